//! Fitting probabilistic regression trees.
//!
//! Growth alternates between picking a split and refitting the leaf weights.
//! A cheap score on node-local response sums shortlists candidate splits; each
//! shortlisted split is then applied tentatively, the leaf weights are refit by
//! least squares and the split with the lowest global training error wins,
//! provided it improves the error by at least the factor `1 - cp`. The kernel
//! scale vector is chosen from a grid by validation error.

mod fit;
mod grow;
mod lsq;
mod sigma;
mod split;

use std::fmt;
use std::str::FromStr;

pub use fit::{fit, split_train_validation, FitResult};
pub use grow::{grow_tree, splittable_nodes, stage2_evaluate, GrowOutcome, Stage2Result};
pub use lsq::{mse, solve_gamma};
pub use sigma::{grid_multipliers, sigma_grid_default};
pub use split::{
    assign_missing, scan_node, select_candidates, stage1_score, threshold_set, Side, SplitCandidate,
};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::tree::FillType;

/// How rows missing the candidate feature are routed during the split search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ProxyCrit {
    /// Separation between the two child means.
    Mean,
    /// Between-child sum of squares.
    Var,
    /// Sum of the two.
    #[default]
    Both,
}

impl ProxyCrit {
    pub fn name(self) -> &'static str {
        match self {
            ProxyCrit::Mean => "mean",
            ProxyCrit::Var => "var",
            ProxyCrit::Both => "both",
        }
    }
}

impl fmt::Display for ProxyCrit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProxyCrit {
    type Err = Error;

    /// Accepts the names and the numeric codes 1, 2, 3.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" | "1" => Ok(ProxyCrit::Mean),
            "var" | "2" => Ok(ProxyCrit::Var),
            "both" | "3" => Ok(ProxyCrit::Both),
            other => Err(Error::Parameter(format!(
                "proxy_crit must be mean, var or both, got '{other}'"
            ))),
        }
    }
}

/// Tree-growth hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlParams {
    /// A split must bring the training MSE to at most `(1 - cp)` times its current value.
    pub cp: f64,
    pub max_depth: usize,
    pub max_terminal_nodes: usize,
    /// Minimum complete-case count in a node to split it, and in each child.
    pub n_min: usize,
    pub fill_type: FillType,
    pub proxy_crit: ProxyCrit,
    pub n_candidates: usize,
    /// Shortlist per node (`true`) or across all nodes (`false`).
    pub by_node: bool,
    pub kernel: KernelSpec,
    /// A node is split only if at least `ceil(perc_x * n)` training rows give
    /// it probability above `p_min`.
    pub perc_x: f64,
    pub p_min: f64,
    pub grid_size: usize,
    pub sigma_grid: Option<Vec<Vec<f64>>>,
    /// Rows used to build the trees; the remaining rows select sigma.
    pub idx_train: Option<Vec<usize>>,
    pub perc_test: f64,
    pub seed: u64,
}

impl Default for ControlParams {
    fn default() -> Self {
        ControlParams {
            cp: 0.01,
            max_depth: 30,
            max_terminal_nodes: 50,
            n_min: 5,
            fill_type: FillType::SmoothedProjection,
            proxy_crit: ProxyCrit::Both,
            n_candidates: 3,
            by_node: false,
            kernel: KernelSpec::gaussian(),
            perc_x: 0.1,
            p_min: 0.05,
            grid_size: 8,
            sigma_grid: None,
            idx_train: None,
            perc_test: 0.2,
            seed: 0,
        }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if !(0.0..1.0).contains(&self.cp) {
            return bad(format!("cp must lie in [0, 1), got {}", self.cp));
        }
        if self.max_depth == 0 {
            return bad("max_depth must be positive".into());
        }
        if self.max_terminal_nodes == 0 {
            return bad("max_terminal_nodes must be positive".into());
        }
        if self.n_min == 0 {
            return bad("n_min must be positive".into());
        }
        if self.n_candidates == 0 {
            return bad("n_candidates must be positive".into());
        }
        if !(self.perc_x > 0.0 && self.perc_x <= 1.0) {
            return bad(format!("perc_x must lie in (0, 1], got {}", self.perc_x));
        }
        if !(self.p_min > 0.0 && self.p_min < 1.0) {
            return bad(format!("p_min must lie in (0, 1), got {}", self.p_min));
        }
        if self.grid_size == 0 {
            return bad("grid_size must be positive".into());
        }
        if !(self.perc_test > 0.0 && self.perc_test < 1.0) {
            return bad(format!("perc_test must lie in (0, 1), got {}", self.perc_test));
        }
        if let Some(grid) = &self.sigma_grid {
            if grid.is_empty() {
                return bad("sigma_grid must not be empty".into());
            }
            for s in grid.iter().flatten() {
                if !(s.is_finite() && *s > 0.0) {
                    return bad(format!("sigma_grid entries must be positive, got {s}"));
                }
            }
        }
        Ok(())
    }

    /// Key/value echo used in model files and fit reports.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let mut pairs = vec![
            ("cp", self.cp.to_string()),
            ("max_depth", self.max_depth.to_string()),
            ("max_terminal_nodes", self.max_terminal_nodes.to_string()),
            ("n_min", self.n_min.to_string()),
            ("fill_type", self.fill_type.to_string()),
            ("proxy_crit", self.proxy_crit.to_string()),
            ("n_candidates", self.n_candidates.to_string()),
            ("by_node", self.by_node.to_string()),
            ("dist", self.kernel.family().to_string()),
            (
                "dist_par",
                self.kernel.shape().map_or_else(|| "NA".to_string(), |s| s.to_string()),
            ),
            ("perc_x", self.perc_x.to_string()),
            ("p_min", self.p_min.to_string()),
            ("grid_size", self.grid_size.to_string()),
            ("perc_test", self.perc_test.to_string()),
            ("seed", self.seed.to_string()),
        ];
        pairs.push((
            "idx_train",
            match &self.idx_train {
                Some(idx) => idx.len().to_string(),
                None => "NA".to_string(),
            },
        ));
        pairs
    }
}
