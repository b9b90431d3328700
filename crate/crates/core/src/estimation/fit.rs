use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::grow::grow_tree;
use super::sigma::{grid_multipliers, sigma_grid_default};
use super::ControlParams;
use crate::data::Observation;
use crate::error::{Error, Result};
use crate::tree::{predict, Matrix, NodeInfo, PrTree, Region};

/// A fitted model together with its in-sample diagnostics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub tree: PrTree,
    /// Leaf probabilities for every input row.
    pub p: Matrix,
    pub gamma: Vec<f64>,
    pub sigma: Vec<f64>,
    /// MSE over every input row (building and validation rows together).
    pub mse_train: f64,
    /// MSE on the validation rows; `None` when there were none.
    pub mse_valid: Option<f64>,
    pub yhat: Vec<f64>,
    pub idx_train: Vec<usize>,
    pub idx_valid: Vec<usize>,
    /// Position of the chosen sigma in the grid.
    pub sigma_index: usize,
    /// Chosen multiplier when the grid was generated from the data.
    pub sigma_multiplier: Option<f64>,
    /// Validation MSE (or building MSE without validation rows) per grid entry.
    pub grid_scores: Vec<f64>,
}

impl FitResult {
    pub fn nodes_info(&self) -> &[NodeInfo] {
        self.tree.nodes()
    }

    pub fn regions(&self) -> &[Region] {
        self.tree.regions()
    }
}

/// Splits row indices into building and validation sets, sampling
/// `perc_test` of the rows with and without missing cells separately so both
/// sets keep the same share of incomplete rows. Both lists are ascending.
pub fn split_train_validation(rows: &[Observation], perc_test: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (incomplete, complete): (Vec<usize>, Vec<usize>) =
        (0..rows.len()).partition(|&i| !rows[i].is_complete());
    let mut valid = Vec::new();
    for stratum in [&incomplete, &complete] {
        let k = (perc_test * stratum.len() as f64).round() as usize;
        let k = k.min(stratum.len());
        valid.extend(sample(&mut rng, stratum.len(), k).into_iter().map(|pos| stratum[pos]));
    }
    valid.sort_unstable();
    let mut in_valid = vec![false; rows.len()];
    for &i in &valid {
        in_valid[i] = true;
    }
    let train = (0..rows.len()).filter(|&i| !in_valid[i]).collect();
    (train, valid)
}

/// Fits a tree for every sigma in the grid on the building rows, keeps the one
/// with the lowest validation MSE, and reports in-sample quantities over all
/// rows.
pub fn fit(y: &[f64], x: &[Observation], control: &ControlParams) -> Result<FitResult> {
    control.validate()?;
    if x.is_empty() {
        return Err(Error::Input("no rows to fit".into()));
    }
    if y.len() != x.len() {
        return Err(Error::Shape(format!("{} responses for {} rows", y.len(), x.len())));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("response value at row {i} is missing or not finite")));
    }
    let p = x[0].len();
    if let Some(i) = x.iter().position(|r| r.len() != p) {
        return Err(Error::Shape(format!("row {i} has {} features, expected {p}", x[i].len())));
    }

    let (idx_train, idx_valid) = match &control.idx_train {
        Some(idx) => resolve_indices(idx, x.len())?,
        None => split_train_validation(x, control.perc_test, control.seed),
    };
    if idx_train.is_empty() {
        return Err(Error::Input("no rows left to build the tree".into()));
    }
    let build_x: Vec<Observation> = idx_train.iter().map(|&i| x[i].clone()).collect();
    let build_y: Vec<f64> = idx_train.iter().map(|&i| y[i]).collect();
    let valid_x: Vec<Observation> = idx_valid.iter().map(|&i| x[i].clone()).collect();
    let valid_y: Vec<f64> = idx_valid.iter().map(|&i| y[i]).collect();

    let (grid, multipliers) = match &control.sigma_grid {
        Some(grid) => {
            if let Some(s) = grid.iter().find(|s| s.len() != p) {
                return Err(Error::Shape(format!(
                    "sigma_grid entry has {} values for {p} features",
                    s.len()
                )));
            }
            (grid.clone(), None)
        }
        None => (
            sigma_grid_default(&build_x, control.grid_size)?,
            Some(grid_multipliers(control.grid_size)),
        ),
    };

    let mut best: Option<(usize, PrTree, f64)> = None;
    let mut scores = Vec::with_capacity(grid.len());
    for (k, sigma) in grid.iter().enumerate() {
        let grown = grow_tree(&build_x, &build_y, sigma, control)?;
        let score = if valid_x.is_empty() {
            grown.mse_train
        } else {
            let pred = predict(&grown.tree, &valid_x, false)?;
            mean_sq_err(&pred.yhat, &valid_y)
        };
        scores.push(score);
        if best.as_ref().is_none_or(|(_, _, s)| score < *s) {
            best = Some((k, grown.tree, score));
        }
    }
    let (sigma_index, tree, best_score) = best.expect("grid is not empty");

    let full = predict(&tree, x, true)?;
    let mse_train = mean_sq_err(&full.yhat, y);
    Ok(FitResult {
        gamma: tree.gamma().to_vec(),
        sigma: tree.sigma().to_vec(),
        p: full.p.expect("requested"),
        yhat: full.yhat,
        mse_train,
        mse_valid: (!valid_x.is_empty()).then_some(best_score),
        tree,
        idx_train,
        idx_valid,
        sigma_index,
        sigma_multiplier: multipliers.map(|m| m[sigma_index]),
        grid_scores: scores,
    })
}

fn resolve_indices(idx: &[usize], n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut seen = vec![false; n];
    for &i in idx {
        if i >= n {
            return Err(Error::Parameter(format!("idx_train entry {i} out of range for {n} rows")));
        }
        if seen[i] {
            return Err(Error::Parameter(format!("idx_train entry {i} repeated")));
        }
        seen[i] = true;
    }
    let valid = (0..n).filter(|&i| !seen[i]).collect();
    Ok((idx.to_vec(), valid))
}

fn mean_sq_err(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}
