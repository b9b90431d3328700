use crate::tree::Matrix;

/// Minimum-norm least-squares weights for `y ~ P gamma`.
///
/// Uses the thin SVD of `P`; singular values at or below
/// `max(n, M) * eps * s_max` are treated as zero, so rank-deficient designs
/// (duplicate or all-zero columns) still get the minimum-norm answer.
pub fn solve_gamma(p: &Matrix, y: &[f64]) -> Vec<f64> {
    assert_eq!(p.nrows(), y.len(), "P has {} rows but y has {}", p.nrows(), y.len());
    let (n, m) = p.shape();
    if n == 0 || m == 0 || p.iter().all(|v| *v == 0.0) {
        return vec![0.0; m];
    }
    // nalgebra's SVD loses accuracy on exactly rank-deficient inputs.
    let a = faer::Mat::<f64>::from_fn(n, m, |i, j| p[(i, j)]);
    let svd = a.thin_svd().expect("SVD of a finite matrix converges");
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let s_max = (0..s.nrows()).map(|k| s[k]).fold(0.0, f64::max);
    let tol = n.max(m) as f64 * f64::EPSILON * s_max;
    let mut gamma = vec![0.0; m];
    for k in 0..s.nrows() {
        if s[k] <= tol {
            continue;
        }
        let c = (0..n).map(|i| u[(i, k)] * y[i]).sum::<f64>() / s[k];
        for (j, g) in gamma.iter_mut().enumerate() {
            *g += c * v[(j, k)];
        }
    }
    gamma
}

/// Mean squared residual of `y - P gamma`.
pub fn mse(p: &Matrix, gamma: &[f64], y: &[f64]) -> f64 {
    let fitted = crate::tree::weighted_rows(p, gamma);
    let sse: f64 = fitted.iter().zip(y).map(|(f, y)| (y - f).powi(2)).sum();
    sse / y.len() as f64
}
