//! Classical regression tree with surrogate splits, used as the benchmark
//! comparator.
//!
//! Splits minimise the within-child sum of squares over rows that observe the
//! split feature. Rows missing the primary feature are routed by the best
//! surrogate they observe, and by the node's majority direction when every
//! surrogate is missing too. Growth is depth first; a split is kept only when
//! it removes at least `cp` times the root sum of squares. There is no
//! post-pruning.

use crate::data::Observation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CartParams {
    pub cp: f64,
    pub minsplit: usize,
    pub minbucket: usize,
    pub maxdepth: usize,
    pub n_surrogates: usize,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams {
            cp: 0.01,
            minsplit: 20,
            minbucket: 7, // ceil(20 / 3)
            maxdepth: 30,
            n_surrogates: 5,
        }
    }
}

/// Backup split: `x_feature <= threshold` sends a row left when
/// `left_when_le`, right otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surrogate {
    pub feature: usize,
    pub threshold: f64,
    pub left_when_le: bool,
    /// Share of doubly observed rows sent the same way as the primary split.
    pub agreement: f64,
}

impl Surrogate {
    fn goes_left(&self, v: f64) -> bool {
        (v <= self.threshold) == self.left_when_le
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartSplit {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Sorted by descending agreement.
    pub surrogates: Vec<Surrogate>,
    pub majority_left: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartNode {
    pub id: usize,
    pub depth: usize,
    pub mean: f64,
    pub n: usize,
    pub split: Option<CartSplit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartTree {
    pub nodes: Vec<CartNode>,
    pub n_features: usize,
}

impl CartTree {
    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }

    /// Leaf reached by `x`.
    pub fn leaf_of(&self, x: &Observation) -> usize {
        let mut id = 0;
        while let Some(s) = &self.nodes[id].split {
            id = if route_left(s, x) { s.left } else { s.right };
        }
        id
    }

    pub fn predict(&self, newdata: &[Observation]) -> Result<Vec<f64>> {
        if let Some(i) = newdata.iter().position(|x| x.len() != self.n_features) {
            return Err(Error::Shape(format!(
                "row {i} has {} features, tree expects {}",
                newdata[i].len(),
                self.n_features
            )));
        }
        Ok(newdata.iter().map(|x| self.nodes[self.leaf_of(x)].mean).collect())
    }
}

fn route_left(s: &CartSplit, x: &Observation) -> bool {
    if let Some(v) = x.get(s.feature) {
        return v <= s.threshold;
    }
    s.surrogates
        .iter()
        .find_map(|sur| x.get(sur.feature).map(|v| sur.goes_left(v)))
        .unwrap_or(s.majority_left)
}

pub fn cart_predict(tree: &CartTree, newdata: &[Observation]) -> Result<Vec<f64>> {
    tree.predict(newdata)
}

pub fn cart_fit(y: &[f64], x: &[Observation], params: &CartParams) -> Result<CartTree> {
    if x.is_empty() {
        return Err(Error::Input("no rows to fit".into()));
    }
    if y.len() != x.len() {
        return Err(Error::Shape(format!("{} responses for {} rows", y.len(), x.len())));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("response value at row {i} is missing or not finite")));
    }
    if !(0.0..1.0).contains(&params.cp) || params.minbucket == 0 || params.maxdepth == 0 {
        return Err(Error::Parameter(format!("invalid CART parameters {params:?}")));
    }
    let p = x[0].len();
    if let Some(i) = x.iter().position(|r| r.len() != p) {
        return Err(Error::Shape(format!("row {i} has {} features, expected {p}", x[i].len())));
    }
    let all: Vec<usize> = (0..x.len()).collect();
    let root_sse = sse(&all, y);
    let mut builder = Builder {
        x,
        y,
        params,
        min_gain: params.cp * root_sse,
        nodes: Vec::new(),
    };
    builder.grow(all, 0);
    Ok(CartTree {
        nodes: builder.nodes,
        n_features: p,
    })
}

fn sse(rows: &[usize], y: &[f64]) -> f64 {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / n;
    rows.iter().map(|&i| (y[i] - mean).powi(2)).sum()
}

struct Builder<'a> {
    x: &'a [Observation],
    y: &'a [f64],
    params: &'a CartParams,
    min_gain: f64,
    nodes: Vec<CartNode>,
}

struct Primary {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let mean = rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(CartNode {
            id,
            depth,
            mean,
            n: rows.len(),
            split: None,
        });
        if rows.len() < self.params.minsplit || depth >= self.params.maxdepth {
            return id;
        }
        let Some(best) = self.best_split(&rows) else {
            return id;
        };
        if best.gain < self.min_gain || best.gain <= 0.0 {
            return id;
        }

        let observed_left = rows
            .iter()
            .filter(|&&i| self.x[i].get(best.feature).is_some_and(|v| v <= best.threshold))
            .count();
        let observed = rows.iter().filter(|&&i| !self.x[i].is_missing(best.feature)).count();
        let majority_left = 2 * observed_left >= observed;
        let surrogates = self.surrogates(&rows, best.feature, best.threshold);
        let mut split = CartSplit {
            feature: best.feature,
            threshold: best.threshold,
            left: 0,
            right: 0,
            surrogates,
            majority_left,
        };
        let (lr, rr): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| route_left(&split, &self.x[i]));
        split.left = self.grow(lr, depth + 1);
        split.right = self.grow(rr, depth + 1);
        self.nodes[id].split = Some(split);
        id
    }

    fn best_split(&self, rows: &[usize]) -> Option<Primary> {
        let p = self.x[0].len();
        let mb = self.params.minbucket;
        let mut best: Option<Primary> = None;
        for feature in 0..p {
            let mut obs: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|&i| self.x[i].get(feature).map(|v| (v, self.y[i])))
                .collect();
            let n = obs.len();
            if n < 2 * mb {
                continue;
            }
            obs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let total: f64 = obs.iter().map(|o| o.1).sum();
            let total_sq: f64 = obs.iter().map(|o| o.1 * o.1).sum();
            let parent = total_sq - total * total / n as f64;
            let (mut sl, mut sl2) = (0.0, 0.0);
            for k in 0..n - 1 {
                sl += obs[k].1;
                sl2 += obs[k].1 * obs[k].1;
                let nl = k + 1;
                let nr = n - nl;
                if obs[k + 1].0 == obs[k].0 || nl < mb || nr < mb {
                    continue;
                }
                let sr = total - sl;
                let sr2 = total_sq - sl2;
                let within = (sl2 - sl * sl / nl as f64) + (sr2 - sr * sr / nr as f64);
                let gain = parent - within;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let (a, b) = (obs[k].0, obs[k + 1].0);
                    let t = a + (b - a) / 2.0;
                    if t < b {
                        best = Some(Primary {
                            feature,
                            threshold: t,
                            gain,
                        });
                    }
                }
            }
        }
        best
    }

    /// Best surrogate per other feature, keeping those that beat the
    /// majority-direction rule on the rows observing both features.
    fn surrogates(&self, rows: &[usize], feature: usize, threshold: f64) -> Vec<Surrogate> {
        if self.params.n_surrogates == 0 {
            return Vec::new();
        }
        let p = self.x[0].len();
        let mut found = Vec::new();
        for k in (0..p).filter(|&k| k != feature) {
            let mut pairs: Vec<(f64, bool)> = rows
                .iter()
                .filter_map(|&i| {
                    let v = self.x[i].get(k)?;
                    let primary = self.x[i].get(feature)?;
                    Some((v, primary <= threshold))
                })
                .collect();
            let n = pairs.len();
            if n < 2 {
                continue;
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let n_left = pairs.iter().filter(|p| p.1).count();
            let majority = n_left.max(n - n_left);
            // `agree_le`: rows where "x_k <= s goes left" matches the primary.
            let mut le_left = 0usize;
            let mut le_count = 0usize;
            let mut best: Option<(usize, f64, bool)> = None;
            for idx in 0..n - 1 {
                le_count += 1;
                le_left += pairs[idx].1 as usize;
                if pairs[idx + 1].0 == pairs[idx].0 {
                    continue;
                }
                let gt_right = (n - le_count) - (n_left - le_left);
                let agree = le_left + gt_right;
                let (count, dir) = if agree >= n - agree { (agree, true) } else { (n - agree, false) };
                if best.is_none_or(|b| count > b.0) {
                    let (a, b) = (pairs[idx].0, pairs[idx + 1].0);
                    let t = a + (b - a) / 2.0;
                    if t < b {
                        best = Some((count, t, dir));
                    }
                }
            }
            if let Some((count, t, dir)) = best {
                if count > majority {
                    found.push(Surrogate {
                        feature: k,
                        threshold: t,
                        left_when_le: dir,
                        agreement: count as f64 / n as f64,
                    });
                }
            }
        }
        found.sort_by(|a, b| b.agreement.total_cmp(&a.agreement));
        found.truncate(self.params.n_surrogates);
        found
    }
}
