//! Monte Carlo comparison of PRTree variants against the CART baseline on a
//! smooth two-covariate regression function with MCAR missingness.
//!
//! Each replication draws 1,200 rows from
//! `y = 5 cos(x1) + x2^3 + e`, `x1 ~ U(0, 5)`, `x2 ~ U(-1.5, 1.5)`,
//! `e ~ N(0, 0.5^2)`, keeps the first 1,000 for training and the rest for
//! testing, and masks cells in both parts. Every replication derives its own
//! seeds, so replications can run in any order or in parallel and still give
//! the same records.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;

use crate::cart::{cart_fit, CartParams};
use crate::data::Observation;
use crate::error::{Error, Result};
use crate::estimation::{fit, ControlParams};
use crate::tree::FillType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Cart,
    PrTree(FillType),
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Cart,
        Method::PrTree(FillType::UniformIgnorance),
        Method::PrTree(FillType::PartialConditioning),
        Method::PrTree(FillType::SmoothedProjection),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cart => "cart",
            Method::PrTree(FillType::UniformIgnorance) => "prtree_fill0",
            Method::PrTree(FillType::PartialConditioning) => "prtree_fill1",
            Method::PrTree(FillType::SmoothedProjection) => "prtree_fill2",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Parameter(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub rho: f64,
    pub n_replications: usize,
    pub base_seed: u64,
    pub methods: Vec<Method>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            n_train: 1000,
            n_test: 200,
            rho: 0.0,
            n_replications: 100,
            base_seed: 1,
            methods: Method::ALL.to_vec(),
        }
    }
}

impl StudyConfig {
    pub fn n_total(&self) -> usize {
        self.n_train + self.n_test
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Parameter(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if self.n_replications == 0 {
            return Err(Error::Parameter("at least one replication is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Parameter("no methods selected".into()));
        }
        // The PRTree setting builds on the first 80% of the training rows.
        if self.n_train < 10 || self.n_test == 0 {
            return Err(Error::Parameter(format!(
                "need at least 10 training rows and 1 test row, got {}/{}",
                self.n_train, self.n_test
            )));
        }
        Ok(())
    }
}

/// One method's results in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRecord {
    pub replication: usize,
    pub method: Method,
    pub rho: f64,
    pub rmse_obs_train: f64,
    pub rmse_obs_test: f64,
    pub rmse_true_train: f64,
    pub rmse_true_test: f64,
    pub n_terminal_nodes: usize,
    pub sigma_multiplier: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyFailure {
    pub replication: usize,
    pub method: Method,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct StudyOutput {
    /// Ordered by replication, then by the configured method order.
    pub records: Vec<StudyRecord>,
    pub failures: Vec<StudyFailure>,
}

/// Draws from the regression function of the study.
#[derive(Debug, Clone)]
pub struct DgpSample {
    pub x: Vec<Observation>,
    pub y: Vec<f64>,
    pub f_true: Vec<f64>,
}

pub fn true_function(x1: f64, x2: f64) -> f64 {
    5.0 * x1.cos() + x2.powi(3)
}

pub fn generate_dgp(n: usize, seed: u64) -> DgpSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u1 = Uniform::new(0.0, 5.0).expect("valid range");
    let u2 = Uniform::new(-1.5, 1.5).expect("valid range");
    let noise = Normal::new(0.0, 0.5).expect("valid sd");
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut f_true = Vec::with_capacity(n);
    for _ in 0..n {
        let a = u1.sample(&mut rng);
        let b = u2.sample(&mut rng);
        let f = true_function(a, b);
        x.push(Observation::complete(&[a, b]));
        f_true.push(f);
        y.push(f + noise.sample(&mut rng));
    }
    DgpSample { x, y, f_true }
}

/// Masks `floor(rho * n)` distinct rows. Each selected row loses, with equal
/// probability, both of the first two features, only the first, or only the
/// second.
pub fn inject_mcar(x: &[Observation], rho: f64, seed: u64) -> Result<Vec<Observation>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Parameter(format!("rho must lie in [0, 1), got {rho}")));
    }
    let mut out = x.to_vec();
    let k = (rho * x.len() as f64).floor() as usize;
    if k == 0 {
        return Ok(out);
    }
    if let Some(i) = x.iter().position(|r| r.len() < 2) {
        return Err(Error::Shape(format!("row {i} has fewer than two features")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = sample(&mut rng, x.len(), k).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        match rng.random_range(0..3u8) {
            0 => {
                out[i].mask_feature(0);
                out[i].mask_feature(1);
            }
            1 => out[i].mask_feature(0),
            _ => out[i].mask_feature(1),
        }
    }
    Ok(out)
}

pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() || targets.is_empty() {
        return Err(Error::Shape(format!(
            "rmse needs equal non-empty lengths, got {} and {}",
            predictions.len(),
            targets.len()
        )));
    }
    let mse = predictions
        .iter()
        .zip(targets)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / targets.len() as f64;
    Ok(mse.sqrt())
}

/// Independent seed for one purpose within one replication.
pub fn sub_seed(replication_seed: u64, stream: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = replication_seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_DGP: u64 = 0;
const STREAM_MCAR_TRAIN: u64 = 1;
const STREAM_MCAR_TEST: u64 = 2;
const STREAM_FIT: u64 = 3;

/// Data of one replication: masked training and test covariates plus responses
/// and true function values.
#[derive(Debug, Clone)]
pub struct ReplicationData {
    pub x_train: Vec<Observation>,
    pub y_train: Vec<f64>,
    pub f_train: Vec<f64>,
    pub x_test: Vec<Observation>,
    pub y_test: Vec<f64>,
    pub f_test: Vec<f64>,
}

pub fn replication_data(config: &StudyConfig, replication: usize) -> Result<ReplicationData> {
    let seed = config.base_seed.wrapping_add(replication as u64);
    let sample = generate_dgp(config.n_total(), sub_seed(seed, STREAM_DGP));
    let nt = config.n_train;
    let x_train = inject_mcar(&sample.x[..nt], config.rho, sub_seed(seed, STREAM_MCAR_TRAIN))?;
    let x_test = inject_mcar(&sample.x[nt..], config.rho, sub_seed(seed, STREAM_MCAR_TEST))?;
    Ok(ReplicationData {
        x_train,
        y_train: sample.y[..nt].to_vec(),
        f_train: sample.f_true[..nt].to_vec(),
        x_test,
        y_test: sample.y[nt..].to_vec(),
        f_test: sample.f_true[nt..].to_vec(),
    })
}

/// PRTree settings of the study: the first 80% of the training rows build the
/// trees and the rest select sigma; up to 50 leaves and depth 49.
pub fn study_control(fill_type: FillType, n_train: usize, seed: u64) -> ControlParams {
    ControlParams {
        fill_type,
        max_terminal_nodes: 50,
        max_depth: 49,
        n_candidates: 3,
        by_node: false,
        idx_train: Some((0..n_train * 4 / 5).collect()),
        seed,
        ..ControlParams::default()
    }
}

fn run_method(
    method: Method,
    data: &ReplicationData,
    config: &StudyConfig,
    replication: usize,
) -> Result<StudyRecord> {
    let seed = config.base_seed.wrapping_add(replication as u64);
    let (train_pred, test_pred, leaves, multiplier) = match method {
        Method::Cart => {
            let tree = cart_fit(&data.y_train, &data.x_train, &CartParams::default())?;
            (
                tree.predict(&data.x_train)?,
                tree.predict(&data.x_test)?,
                tree.n_leaves(),
                None,
            )
        }
        Method::PrTree(fill) => {
            let control = study_control(fill, config.n_train, sub_seed(seed, STREAM_FIT));
            let res = fit(&data.y_train, &data.x_train, &control)?;
            let test = crate::tree::predict(&res.tree, &data.x_test, false)?;
            (res.yhat, test.yhat, res.tree.n_leaves(), res.sigma_multiplier)
        }
    };
    Ok(StudyRecord {
        replication,
        method,
        rho: config.rho,
        rmse_obs_train: rmse(&train_pred, &data.y_train)?,
        rmse_obs_test: rmse(&test_pred, &data.y_test)?,
        rmse_true_train: rmse(&train_pred, &data.f_train)?,
        rmse_true_test: rmse(&test_pred, &data.f_test)?,
        n_terminal_nodes: leaves,
        sigma_multiplier: multiplier,
    })
}

/// Runs every replication on the current rayon pool.
pub fn run_study(config: &StudyConfig) -> Result<StudyOutput> {
    config.validate()?;
    let per_rep: Vec<Vec<std::result::Result<StudyRecord, StudyFailure>>> = (0..config.n_replications)
        .into_par_iter()
        .map(|r| {
            let data = match replication_data(config, r) {
                Ok(d) => d,
                Err(e) => {
                    return config
                        .methods
                        .iter()
                        .map(|&m| {
                            Err(StudyFailure {
                                replication: r,
                                method: m,
                                message: e.to_string(),
                            })
                        })
                        .collect()
                }
            };
            config
                .methods
                .iter()
                .map(|&m| {
                    run_method(m, &data, config, r).map_err(|e| StudyFailure {
                        replication: r,
                        method: m,
                        message: e.to_string(),
                    })
                })
                .collect()
        })
        .collect();
    let mut out = StudyOutput::default();
    for outcome in per_rep.into_iter().flatten() {
        match outcome {
            Ok(rec) => out.records.push(rec),
            Err(f) => out.failures.push(f),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    RmseObsTrain,
    RmseObsTest,
    RmseTrueTrain,
    RmseTrueTest,
    TerminalNodes,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::RmseObsTrain,
        Metric::RmseObsTest,
        Metric::RmseTrueTrain,
        Metric::RmseTrueTest,
        Metric::TerminalNodes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::RmseObsTrain => "rmse_obs_train",
            Metric::RmseObsTest => "rmse_obs_test",
            Metric::RmseTrueTrain => "rmse_true_train",
            Metric::RmseTrueTest => "rmse_true_test",
            Metric::TerminalNodes => "n_terminal_nodes",
        }
    }

    pub fn of(self, r: &StudyRecord) -> f64 {
        match self {
            Metric::RmseObsTrain => r.rmse_obs_train,
            Metric::RmseObsTest => r.rmse_obs_test,
            Metric::RmseTrueTrain => r.rmse_true_train,
            Metric::RmseTrueTest => r.rmse_true_test,
            Metric::TerminalNodes => r.n_terminal_nodes as f64,
        }
    }
}

/// Order statistics of one metric for one method at one missingness level.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub rho: f64,
    pub metric: Metric,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Sample quantile with linear interpolation between order statistics
/// (position `(n - 1) * prob` in the sorted data).
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Groups by method, then rho, then metric.
pub fn summarize(records: &[StudyRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Method, u64), Vec<&StudyRecord>> = BTreeMap::new();
    for r in records {
        // total order on rho via its bit pattern is fine for non-negative values
        groups.entry((r.method, r.rho.to_bits())).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((method, rho_bits), recs) in groups {
        for metric in Metric::ALL {
            let mut v: Vec<f64> = recs.iter().map(|r| metric.of(r)).collect();
            v.sort_by(f64::total_cmp);
            out.push(SummaryRow {
                method,
                rho: f64::from_bits(rho_bits),
                metric,
                n: v.len(),
                min: v[0],
                q1: quantile(&v, 0.25),
                median: quantile(&v, 0.5),
                q3: quantile(&v, 0.75),
                max: v[v.len() - 1],
            });
        }
    }
    out
}
