//! Test oracles and generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use prtree::{FillType, KernelFamily, KernelSpec, Observation, PrTree};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Kronrod 15-point abscissae (descending, last is the centre) and weights,
// with the embedded 7-point Gauss weights for the odd-indexed abscissae.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let (val, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return val;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, tol / 2.0, depth - 1) + adaptive(f, m, b, tol / 2.0, depth - 1)
}

/// Integral of `f` over `[a, b]`; either bound may be infinite.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    integrate_dyn(&f, a, b)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const TOL: f64 = 1e-14;
    const DEPTH: usize = 40;
    if a >= b {
        return 0.0;
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adaptive(f, a, b, TOL, DEPTH),
        (true, false) => {
            let g = |u: f64| f(a + u / (1.0 - u)) / ((1.0 - u) * (1.0 - u));
            adaptive(&g, 0.0, 1.0, TOL, DEPTH)
        }
        (false, true) => {
            let g = |u: f64| f(b - u / (1.0 - u)) / ((1.0 - u) * (1.0 - u));
            adaptive(&g, 0.0, 1.0, TOL, DEPTH)
        }
        (false, false) => integrate_dyn(f, f64::NEG_INFINITY, 0.0) + integrate_dyn(f, 0.0, f64::INFINITY),
    }
}

/// Standardized density of the family up to a constant, and its support.
fn raw_density(kernel: KernelSpec) -> (Box<dyn Fn(f64) -> f64>, f64) {
    let s = kernel.shape().unwrap_or(f64::NAN);
    match kernel.family() {
        KernelFamily::Gaussian => (Box::new(|t: f64| (-0.5 * t * t).exp()), f64::NEG_INFINITY),
        KernelFamily::StudentT => (Box::new(move |t: f64| (1.0 + t * t / s).powf(-(s + 1.0) / 2.0)), f64::NEG_INFINITY),
        KernelFamily::LogNormal => (
            Box::new(move |t: f64| {
                if t <= 0.0 {
                    0.0
                } else {
                    let l = t.ln();
                    (-(l * l) / (2.0 * s * s)).exp() / t
                }
            }),
            0.0,
        ),
        KernelFamily::Gamma => (
            Box::new(move |t: f64| if t <= 0.0 { 0.0 } else { (t.powf(s - 1.0)) * (-t).exp() }),
            0.0,
        ),
    }
}

/// Interval probability by numerically integrating the numerically
/// normalized density over the standardized interval.
pub fn quad_interval_prob(kernel: KernelSpec, x: f64, lo: f64, hi: f64, sigma: f64) -> f64 {
    let (f, start) = raw_density(kernel);
    let z = integrate(&f, start, f64::INFINITY);
    let a = ((lo - x) / sigma).max(start);
    let b = (hi - x) / sigma;
    integrate(&f, a, b) / z
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform coordinates in `(-3, 3)`, each masked with probability `miss`.
pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, p: usize, miss: f64) -> Vec<Observation> {
    (0..n)
        .map(|_| {
            Observation::new(
                (0..p)
                    .map(|_| {
                        let v = rng.random_range(-3.0..3.0);
                        (!rng.random_bool(miss)).then_some(v)
                    })
                    .collect(),
            )
        })
        .collect()
}

/// A tree with `n_splits` random splits, each drawn inside the chosen leaf's
/// region (infinite bounds clipped to `[-3, 3]`), and random leaf weights.
pub fn random_tree(rng: &mut ChaCha8Rng, p: usize, n_splits: usize, kernel: KernelSpec, fill: FillType) -> PrTree {
    let sigma = (0..p).map(|_| rng.random_range(0.2..2.0)).collect();
    let mut tree = PrTree::root(sigma, kernel, fill, 0.0).unwrap();
    for _ in 0..n_splits {
        let leaves = tree.leaves();
        let leaf = leaves[rng.random_range(0..leaves.len())];
        let j = rng.random_range(0..p);
        let r = tree.region(leaf).unwrap();
        let lo = r.lower(j).max(-3.0);
        let hi = r.upper(j).min(3.0);
        if hi - lo < 1e-3 {
            continue;
        }
        let t = rng.random_range(lo + 1e-4 * (hi - lo)..hi - 1e-4 * (hi - lo));
        tree.split_leaf(leaf, j, t).unwrap();
    }
    let m = tree.n_leaves();
    tree.set_gamma((0..m).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();
    tree
}

pub fn random_kernel(rng: &mut ChaCha8Rng) -> KernelSpec {
    match rng.random_range(0..4) {
        0 => KernelSpec::gaussian(),
        1 => KernelSpec::student_t(rng.random_range(1.0..30.0)).unwrap(),
        2 => KernelSpec::lognormal(rng.random_range(0.3..2.0)).unwrap(),
        _ => KernelSpec::gamma(rng.random_range(1.0..6.0)).unwrap(),
    }
}

/// Moore-Penrose pseudoinverse solution built from the eigen-decomposition of
/// `P'P`, independent of the SVD route.
pub fn pinv_solve(p: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let ptp = p.transpose() * p;
    let eig = SymmetricEigen::new(ptp);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let tol = lmax * 1e-10;
    let pty = p.transpose() * DVector::from_column_slice(y);
    let mut g = DVector::zeros(p.ncols());
    for k in 0..p.ncols() {
        let l = eig.eigenvalues[k];
        if l > tol {
            let v = eig.eigenvectors.column(k);
            g += v * (v.dot(&pty) / l);
        }
    }
    g.iter().copied().collect()
}

/// Within-child sum of squared deviations of a split of `y` by `x <= t`.
pub fn sse_split(x: &[f64], y: &[f64], t: f64) -> f64 {
    let sse = |v: Vec<f64>| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|a| (a - m) * (a - m)).sum::<f64>()
    };
    let (l, r): (Vec<_>, Vec<_>) = x.iter().zip(y).partition(|(a, _)| **a <= t);
    sse(l.into_iter().map(|(_, b)| *b).collect()) + sse(r.into_iter().map(|(_, b)| *b).collect())
}
