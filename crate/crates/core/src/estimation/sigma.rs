use crate::data::Observation;
use crate::error::{Error, Result};

const FIRST: f64 = 0.25;
const LAST: f64 = 2.0;

/// `grid_size` multipliers equally spaced from 0.25 to 2.00.
pub fn grid_multipliers(grid_size: usize) -> Vec<f64> {
    match grid_size {
        0 => Vec::new(),
        1 => vec![FIRST],
        g => {
            let step = (LAST - FIRST) / (g - 1) as f64;
            (0..g).map(|k| FIRST + step * k as f64).collect()
        }
    }
}

/// Per-feature sample standard deviations over observed cells, scaled by each
/// grid multiplier. A feature without spread gets the floor
/// `1e-8 * (1 + |mean|)`.
pub fn sigma_grid_default(rows: &[Observation], grid_size: usize) -> Result<Vec<Vec<f64>>> {
    if grid_size == 0 {
        return Err(Error::Parameter("grid_size must be positive".into()));
    }
    let p = rows.first().map_or(0, Observation::len);
    let mut scale = Vec::with_capacity(p);
    for j in 0..p {
        let vals: Vec<f64> = rows.iter().filter_map(|r| r.get(j)).collect();
        if vals.len() < 2 {
            return Err(Error::Input(format!(
                "feature {j} has {} observed values; at least 2 are needed to set its kernel scale",
                vals.len()
            )));
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        scale.push(if sd > 0.0 { sd } else { 1e-8 * (1.0 + mean.abs()) });
    }
    Ok(grid_multipliers(grid_size)
        .into_iter()
        .map(|m| scale.iter().map(|s| m * s).collect())
        .collect())
}
