//! Tree structure, the smoothing measure of a region, the missing-data proxy
//! calculus and prediction.
//!
//! A node's probability given an observation is propagated top-down. At an
//! internal node split on feature `j`, each child receives the parent's
//! probability times its share of the proxy scores `H(L) / (H(L) + H(R))`.
//! With product kernels the two children only differ in coordinate `j`, so the
//! share reduces to a ratio of one-dimensional interval probabilities (or of
//! indicators, or exactly one half when `x_j` is missing). [`compute_p`] uses
//! that reduction; [`psi_star`] evaluates the full definition and serves as
//! the reference.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::data::Observation;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Dense row-major-agnostic matrix used for `P`.
pub type Matrix = DMatrix<f64>;

/// Strategy for observations with missing covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum FillType {
    /// Any missing value spreads the weight evenly over both children.
    UniformIgnorance = 0,
    /// Hard assignment on the observed, constrained coordinates.
    PartialConditioning = 1,
    /// Smoothed measure on the observed, constrained coordinates.
    #[default]
    SmoothedProjection = 2,
}

impl FillType {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(FillType::UniformIgnorance),
            1 => Ok(FillType::PartialConditioning),
            2 => Ok(FillType::SmoothedProjection),
            other => Err(Error::Parameter(format!(
                "fill_type must be 0, 1 or 2, got {other}"
            ))),
        }
    }

    pub const ALL: [FillType; 3] = [
        FillType::UniformIgnorance,
        FillType::PartialConditioning,
        FillType::SmoothedProjection,
    ];
}

impl fmt::Display for FillType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl FromStr for FillType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let code: u8 = s
            .trim()
            .parse()
            .map_err(|_| Error::Parameter(format!("fill_type must be 0, 1 or 2, got '{s}'")))?;
        FillType::from_code(code)
    }
}

/// Axis-aligned box `(lower_j, upper_j]` per coordinate; bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    bounds: Vec<(f64, f64)>,
}

impl Region {
    /// The whole space.
    pub fn root(p: usize) -> Self {
        Region {
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); p],
        }
    }

    pub fn from_bounds(bounds: Vec<(f64, f64)>) -> Result<Self> {
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::Contract(format!(
                    "region bounds on feature {j} must satisfy lower < upper, got ({lo}, {hi})"
                )));
            }
        }
        Ok(Region { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    #[inline]
    pub fn lower(&self, j: usize) -> f64 {
        self.bounds[j].0
    }

    #[inline]
    pub fn upper(&self, j: usize) -> f64 {
        self.bounds[j].1
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// True when coordinate `j` carries at least one finite bound.
    #[inline]
    pub fn is_constrained(&self, j: usize) -> bool {
        self.bounds[j].0.is_finite() || self.bounds[j].1.is_finite()
    }

    pub fn is_root(&self) -> bool {
        (0..self.dim()).all(|j| !self.is_constrained(j))
    }

    /// Membership of a single coordinate, using the `(lower, upper]` convention.
    #[inline]
    pub fn contains_coord(&self, j: usize, v: f64) -> bool {
        let (lo, hi) = self.bounds[j];
        lo < v && v <= hi
    }

    /// Hard membership of the observed coordinates of `x`; missing coordinates
    /// are ignored.
    pub fn contains_observed(&self, x: &Observation) -> bool {
        (0..self.dim()).all(|j| x.get(j).is_none_or(|v| self.contains_coord(j, v)))
    }
}

/// Splits `region` at `threshold` on `feature`: the left child keeps values
/// `<= threshold`, the right child values `> threshold`.
pub fn region_split(region: &Region, feature: usize, threshold: f64) -> Result<(Region, Region)> {
    if feature >= region.dim() {
        return Err(Error::Shape(format!(
            "feature {feature} out of range for a {}-dimensional region",
            region.dim()
        )));
    }
    let (lo, hi) = region.bounds[feature];
    if !(lo < threshold && threshold < hi) {
        return Err(Error::InvalidSplit {
            feature,
            threshold,
            lower: lo,
            upper: hi,
        });
    }
    let mut left = region.clone();
    let mut right = region.clone();
    left.bounds[feature].1 = threshold;
    right.bounds[feature].0 = threshold;
    Ok((left, right))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSplit {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeInfo {
    pub id: usize,
    pub depth: usize,
    pub parent: Option<usize>,
    pub split: Option<NodeSplit>,
}

impl NodeInfo {
    pub fn is_terminal(&self) -> bool {
        self.split.is_none()
    }
}

/// A fitted (or in-construction) probabilistic regression tree.
///
/// Node ids index `nodes` and `regions`; a node's children always have larger
/// ids than the node itself. `gamma` holds one weight per terminal node in
/// ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct PrTree {
    nodes: Vec<NodeInfo>,
    regions: Vec<Region>,
    gamma: Vec<f64>,
    sigma: Vec<f64>,
    kernel: KernelSpec,
    fill_type: FillType,
}

impl PrTree {
    /// A single-leaf tree over `sigma.len()` features.
    pub fn root(sigma: Vec<f64>, kernel: KernelSpec, fill_type: FillType, gamma: f64) -> Result<Self> {
        validate_sigma(&sigma)?;
        let p = sigma.len();
        Ok(PrTree {
            nodes: vec![NodeInfo {
                id: 0,
                depth: 0,
                parent: None,
                split: None,
            }],
            regions: vec![Region::root(p)],
            gamma: vec![gamma],
            sigma,
            kernel,
            fill_type,
        })
    }

    /// Assembles a tree from stored parts, checking every structural invariant.
    pub fn from_parts(
        nodes: Vec<NodeInfo>,
        regions: Vec<Region>,
        gamma: Vec<f64>,
        sigma: Vec<f64>,
        kernel: KernelSpec,
        fill_type: FillType,
    ) -> Result<Self> {
        validate_sigma(&sigma)?;
        let p = sigma.len();
        if nodes.is_empty() {
            return Err(Error::Contract("a tree needs at least a root node".into()));
        }
        if regions.len() != nodes.len() {
            return Err(Error::Contract(format!(
                "{} regions for {} nodes",
                regions.len(),
                nodes.len()
            )));
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return Err(Error::Contract(format!("node at position {i} has id {}", node.id)));
            }
            if regions[i].dim() != p {
                return Err(Error::Contract(format!(
                    "region {i} has {} coordinates, expected {p}",
                    regions[i].dim()
                )));
            }
        }
        if nodes[0].parent.is_some() || nodes[0].depth != 0 || !regions[0].is_root() {
            return Err(Error::Contract("node 0 must be an unbounded root at depth 0".into()));
        }
        for node in &nodes {
            if let Some(s) = node.split {
                for child in [s.left, s.right] {
                    let c = nodes
                        .get(child)
                        .ok_or_else(|| Error::Contract(format!("node {} has unknown child {child}", node.id)))?;
                    if child <= node.id || c.parent != Some(node.id) || c.depth != node.depth + 1 {
                        return Err(Error::Contract(format!(
                            "node {child} is not a consistent child of node {}",
                            node.id
                        )));
                    }
                }
                let (l, r) = region_split(&regions[node.id], s.feature, s.threshold)?;
                if l != regions[s.left] || r != regions[s.right] {
                    return Err(Error::Contract(format!(
                        "child regions of node {} do not match its split",
                        node.id
                    )));
                }
            } else if node.id != 0 && node.parent.is_none() {
                return Err(Error::Contract(format!("node {} has no parent", node.id)));
            }
            if let Some(parent) = node.parent {
                let ok = nodes
                    .get(parent)
                    .and_then(|n| n.split)
                    .is_some_and(|s| s.left == node.id || s.right == node.id);
                if !ok {
                    return Err(Error::Contract(format!(
                        "node {} is not listed as a child of node {parent}",
                        node.id
                    )));
                }
            }
        }
        let m = nodes.iter().filter(|n| n.is_terminal()).count();
        if gamma.len() != m {
            return Err(Error::Contract(format!(
                "{} leaf weights for {m} terminal nodes",
                gamma.len()
            )));
        }
        Ok(PrTree {
            nodes,
            regions,
            gamma,
            sigma,
            kernel,
            fill_type,
        })
    }

    pub fn n_features(&self) -> usize {
        self.sigma.len()
    }

    pub fn nodes(&self) -> &[NodeInfo] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> Result<&NodeInfo> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, id: usize) -> Result<&Region> {
        self.regions.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn fill_type(&self) -> FillType {
        self.fill_type
    }

    /// Terminal node ids in ascending order; column `m` of `P` belongs to
    /// `leaves()[m]`.
    pub fn leaves(&self) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.is_terminal()).map(|n| n.id).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.gamma.len()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn set_gamma(&mut self, gamma: Vec<f64>) -> Result<()> {
        if gamma.len() != self.n_leaves() {
            return Err(Error::Shape(format!(
                "{} weights for {} leaves",
                gamma.len(),
                self.n_leaves()
            )));
        }
        self.gamma = gamma;
        Ok(())
    }

    /// Splits a terminal node and returns the ids of the new children.
    ///
    /// The parent's weight is copied to both children so the tree stays
    /// consistent until the caller refits `gamma`.
    pub fn split_leaf(&mut self, node: usize, feature: usize, threshold: f64) -> Result<(usize, usize)> {
        let info = self.node(node)?.clone();
        if !info.is_terminal() {
            return Err(Error::Contract(format!("node {node} is already split")));
        }
        let (l, r) = region_split(&self.regions[node], feature, threshold)?;
        let leaf_pos = self.leaves().iter().position(|&id| id == node).expect("terminal node");
        let weight = self.gamma.remove(leaf_pos);
        let left = self.nodes.len();
        let right = left + 1;
        for (id, region) in [(left, l), (right, r)] {
            self.nodes.push(NodeInfo {
                id,
                depth: info.depth + 1,
                parent: Some(node),
                split: None,
            });
            self.regions.push(region);
        }
        self.nodes[node].split = Some(NodeSplit {
            feature,
            threshold,
            left,
            right,
        });
        // New ids are the largest, so they sit at the end of the leaf order.
        self.gamma.push(weight);
        self.gamma.push(weight);
        Ok((left, right))
    }

    /// Path from the root to `node`, inclusive.
    pub fn path_to(&self, node: usize) -> Result<Vec<usize>> {
        let mut path = vec![node];
        let mut cur = self.node(node)?;
        while let Some(p) = cur.parent {
            path.push(p);
            cur = &self.nodes[p];
        }
        path.reverse();
        Ok(path)
    }

    /// Shares of the parent's probability passed to the left and right child
    /// of a split on `feature` at `threshold` inside `parent`.
    #[inline]
    pub(crate) fn split_shares(&self, x: &Observation, parent: &Region, feature: usize, threshold: f64) -> (f64, f64) {
        split_shares(
            x,
            parent.lower(feature),
            parent.upper(feature),
            feature,
            threshold,
            &self.sigma,
            self.kernel,
            self.fill_type,
        )
    }

    /// Probability of every node (not only leaves) for one observation,
    /// indexed by node id.
    pub fn node_probabilities(&self, x: &Observation) -> Vec<f64> {
        let mut prob = vec![0.0; self.nodes.len()];
        prob[0] = 1.0;
        for node in &self.nodes {
            if let Some(s) = node.split {
                let parent = prob[node.id];
                if parent > 0.0 {
                    let (sl, sr) = self.split_shares(x, &self.regions[node.id], s.feature, s.threshold);
                    prob[s.left] = parent * sl;
                    prob[s.right] = parent * sr;
                }
            }
        }
        prob
    }
}

fn validate_sigma(sigma: &[f64]) -> Result<()> {
    if sigma.is_empty() {
        return Err(Error::Parameter("sigma must have at least one entry".into()));
    }
    if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::Parameter(format!("sigma entries must be positive, got {s}")));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn split_shares(
    x: &Observation,
    lower: f64,
    upper: f64,
    feature: usize,
    threshold: f64,
    sigma: &[f64],
    kernel: KernelSpec,
    fill_type: FillType,
) -> (f64, f64) {
    const HALF: (f64, f64) = (0.5, 0.5);
    let Some(v) = x.get(feature) else {
        return HALF;
    };
    let (hl, hr) = if fill_type == FillType::PartialConditioning && !x.is_complete() {
        let l = (lower < v && v <= threshold) as u8 as f64;
        let r = (threshold < v && v <= upper) as u8 as f64;
        (l, r)
    } else if fill_type == FillType::UniformIgnorance && !x.is_complete() {
        return HALF;
    } else {
        let s = sigma[feature];
        (kernel.prob(v, lower, threshold, s), kernel.prob(v, threshold, upper, s))
    };
    let total = hl + hr;
    if total > 0.0 {
        (hl / total, hr / total)
    } else {
        HALF
    }
}

/// Smoothing measure of `region` for a fully observed `x`.
pub fn psi(x: &Observation, region: &Region, sigma: &[f64], kernel: KernelSpec) -> Result<f64> {
    check_dims(x, region, sigma)?;
    if !x.is_complete() {
        return Err(Error::Contract("psi requires a fully observed vector".into()));
    }
    Ok(psi_over(x, region, sigma, kernel, 0..region.dim()))
}

fn psi_over(
    x: &Observation,
    region: &Region,
    sigma: &[f64],
    kernel: KernelSpec,
    coords: impl Iterator<Item = usize>,
) -> f64 {
    coords
        .map(|j| {
            let v = x.get(j).expect("coordinate observed");
            kernel.prob(v, region.lower(j), region.upper(j), sigma[j])
        })
        .product()
}

fn check_dims(x: &Observation, region: &Region, sigma: &[f64]) -> Result<()> {
    if x.len() != region.dim() || sigma.len() != region.dim() {
        return Err(Error::Shape(format!(
            "observation has {} features, region {}, sigma {}",
            x.len(),
            region.dim(),
            sigma.len()
        )));
    }
    Ok(())
}

/// Coordinates that are both observed in `x` and bounded in `child_region`.
pub fn active_set(x: &Observation, child_region: &Region) -> Vec<usize> {
    (0..child_region.dim())
        .filter(|&j| child_region.is_constrained(j) && !x.is_missing(j))
        .collect()
}

/// Proxy score of a child region under the chosen missing-data strategy.
pub fn proxy_h(
    x: &Observation,
    child_region: &Region,
    sigma: &[f64],
    kernel: KernelSpec,
    fill_type: FillType,
) -> Result<f64> {
    check_dims(x, child_region, sigma)?;
    if x.is_complete() {
        return Ok(psi_over(x, child_region, sigma, kernel, 0..child_region.dim()));
    }
    let active = active_set(x, child_region);
    if fill_type == FillType::UniformIgnorance || active.is_empty() {
        return Ok(1.0);
    }
    Ok(match fill_type {
        FillType::PartialConditioning => active
            .iter()
            .all(|&j| child_region.contains_coord(j, x.get(j).expect("active coordinate")))
            as u8 as f64,
        _ => psi_over(x, child_region, sigma, kernel, active.into_iter()),
    })
}

/// Node probability by the recursive definition. The root has probability
/// one; a child gets `H(child) * P(parent) / (H(L) + H(R))`, zero when the
/// parent has zero probability, and half the parent when both proxies vanish.
pub fn psi_star(x: &Observation, node: usize, tree: &PrTree) -> Result<f64> {
    if x.len() != tree.n_features() {
        return Err(Error::Shape(format!(
            "observation has {} features, tree expects {}",
            x.len(),
            tree.n_features()
        )));
    }
    let path = tree.path_to(node)?;
    let mut prob = 1.0;
    for pair in path.windows(2) {
        let (parent, child) = (pair[0], pair[1]);
        if prob == 0.0 {
            return Ok(0.0);
        }
        let (hl, hr, hc) = child_proxies(x, tree, parent, child)?;
        let total = hl + hr;
        prob = if total > 0.0 { hc * prob / total } else { prob / 2.0 };
    }
    Ok(prob)
}

fn child_proxies(x: &Observation, tree: &PrTree, parent: usize, child: usize) -> Result<(f64, f64, f64)> {
    let s = tree.nodes[parent].split.expect("internal node on path");
    let h = |id: usize| proxy_h(x, &tree.regions[id], &tree.sigma, tree.kernel, tree.fill_type);
    let hl = h(s.left)?;
    let hr = h(s.right)?;
    let hc = if child == s.left { hl } else { hr };
    Ok((hl, hr, hc))
}

/// Node probability as the product of per-level proxy shares along the path.
/// Fails when an ancestor has zero probability or both proxies at some level
/// vanish; callers then fall back to [`psi_star`].
pub fn psi_star_product(x: &Observation, node: usize, tree: &PrTree) -> Result<f64> {
    if x.len() != tree.n_features() {
        return Err(Error::Shape(format!(
            "observation has {} features, tree expects {}",
            x.len(),
            tree.n_features()
        )));
    }
    let path = tree.path_to(node)?;
    let mut prob = 1.0;
    for pair in path.windows(2) {
        let (parent, child) = (pair[0], pair[1]);
        let (hl, hr, hc) = child_proxies(x, tree, parent, child)?;
        let total = hl + hr;
        if prob == 0.0 || total == 0.0 {
            return Err(Error::DegeneratePath(parent));
        }
        prob *= hc / total;
    }
    Ok(prob)
}

/// `n x M` matrix of leaf probabilities, columns in [`PrTree::leaves`] order.
pub fn compute_p(data: &[Observation], tree: &PrTree) -> Result<Matrix> {
    let p = tree.n_features();
    if let Some(i) = data.iter().position(|x| x.len() != p) {
        return Err(Error::Shape(format!(
            "row {i} has {} features, tree expects {p}",
            data[i].len()
        )));
    }
    let leaves = tree.leaves();
    let mut out = Matrix::zeros(data.len(), leaves.len());
    for (i, x) in data.iter().enumerate() {
        let probs = tree.node_probabilities(x);
        for (m, &leaf) in leaves.iter().enumerate() {
            out[(i, m)] = probs[leaf];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub yhat: Vec<f64>,
    /// Leaf probabilities, present when requested.
    pub p: Option<Matrix>,
}

/// Predictions `P * gamma`; `with_p` also returns `P`.
pub fn predict(tree: &PrTree, newdata: &[Observation], with_p: bool) -> Result<Prediction> {
    let p = compute_p(newdata, tree)?;
    let yhat = weighted_rows(&p, tree.gamma());
    Ok(Prediction {
        yhat,
        p: with_p.then_some(p),
    })
}

pub(crate) fn weighted_rows(p: &Matrix, gamma: &[f64]) -> Vec<f64> {
    (0..p.nrows())
        .map(|i| gamma.iter().enumerate().map(|(m, g)| g * p[(i, m)]).sum())
        .collect()
}
