//! Stage one of the split search: node-local scores and shortlisting.

use std::cmp::Ordering;

use super::{ControlParams, ProxyCrit};
use crate::data::Observation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A shortlisted split of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub node: usize,
    pub feature: usize,
    pub threshold: f64,
    /// Raw score `S_L^2 / n_L + S_R^2 / n_R`.
    pub stage1_score: f64,
    /// Raw score minus the node's unsplit term `S^2 / n`, i.e. the reduction
    /// in within-node sum of squares. Informational; ranking uses the raw score.
    pub gain: f64,
}

/// `S_L^2 / n_L + S_R^2 / n_R`, or `None` when a side is empty.
pub fn stage1_score(sum_left: f64, n_left: usize, sum_right: f64, n_right: usize) -> Option<f64> {
    if n_left == 0 || n_right == 0 {
        return None;
    }
    Some(sum_left * sum_left / n_left as f64 + sum_right * sum_right / n_right as f64)
}

/// Side that a row with a missing candidate feature joins, given the running
/// counts and sums of both sides. Ties go left.
pub fn assign_missing(crit: ProxyCrit, n_l: usize, s_l: f64, n_r: usize, s_r: f64, y_miss: f64) -> Side {
    let (nl, nr) = (n_l as f64, n_r as f64);
    let mean = || {
        let c_l = ((s_l + y_miss) / (nl + 1.0) - s_r / nr).abs();
        let c_r = ((s_r + y_miss) / (nr + 1.0) - s_l / nl).abs();
        (c_l, c_r)
    };
    let var = || {
        let c_l = (s_l + y_miss).powi(2) / (nl + 1.0) + s_r * s_r / nr;
        let c_r = (s_r + y_miss).powi(2) / (nr + 1.0) + s_l * s_l / nl;
        (c_l, c_r)
    };
    let (c_l, c_r) = match crit {
        ProxyCrit::Mean => mean(),
        ProxyCrit::Var => var(),
        ProxyCrit::Both => {
            let (a, b) = mean();
            let (c, d) = var();
            (a + c, b + d)
        }
    };
    if c_l >= c_r {
        Side::Left
    } else {
        Side::Right
    }
}

/// Midpoints between consecutive distinct observed values.
pub fn threshold_set(values: impl IntoIterator<Item = Option<f64>>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().flatten().collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.windows(2).filter_map(|w| midpoint(w[0], w[1])).collect()
}

/// A threshold `t` with `a <= t < b`, so `a` goes left and `b` right.
fn midpoint(a: f64, b: f64) -> Option<f64> {
    let t = a + (b - a) / 2.0;
    (t < b).then_some(t)
}

/// Scores every admissible split of one node and returns the best
/// `control.n_candidates` of them, best first.
///
/// `members` are the row indices routed to the node, in ascending order; rows
/// missing the scanned feature are assigned to a side one by one, in that
/// order, with [`assign_missing`]. A split is admissible only when both sides
/// hold at least `n_min` complete rows.
pub fn scan_node(
    node: usize,
    members: &[usize],
    rows: &[Observation],
    y: &[f64],
    control: &ControlParams,
) -> Vec<SplitCandidate> {
    let p = rows.first().map_or(0, Observation::len);
    let n_tot = members.len();
    if n_tot < 2 {
        return Vec::new();
    }
    let s_tot: f64 = members.iter().map(|&i| y[i]).sum();
    let base = s_tot * s_tot / n_tot as f64;
    let mut found = Vec::new();

    for feature in 0..p {
        let mut observed: Vec<(f64, f64, bool)> = Vec::with_capacity(n_tot);
        let mut missing_y: Vec<f64> = Vec::new();
        for &i in members {
            match rows[i].get(feature) {
                Some(v) => observed.push((v, y[i], rows[i].is_complete())),
                None => missing_y.push(y[i]),
            }
        }
        if observed.len() < 2 {
            continue;
        }
        observed.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n_obs = observed.len();
        let s_obs: f64 = observed.iter().map(|o| o.1).sum();
        let cc_obs = observed.iter().filter(|o| o.2).count();

        let (mut n_l, mut s_l, mut cc_l) = (0usize, 0.0f64, 0usize);
        for k in 0..n_obs - 1 {
            let (v, yv, complete) = observed[k];
            n_l += 1;
            s_l += yv;
            cc_l += complete as usize;
            let next = observed[k + 1].0;
            if next == v {
                continue;
            }
            let cc_r = cc_obs - cc_l;
            if cc_l < control.n_min || cc_r < control.n_min {
                continue;
            }
            let Some(threshold) = midpoint(v, next) else {
                continue;
            };
            let (mut nl, mut sl) = (n_l, s_l);
            let (mut nr, mut sr) = (n_obs - n_l, s_obs - s_l);
            for &ym in &missing_y {
                match assign_missing(control.proxy_crit, nl, sl, nr, sr, ym) {
                    Side::Left => {
                        nl += 1;
                        sl += ym;
                    }
                    Side::Right => {
                        nr += 1;
                        sr += ym;
                    }
                }
            }
            let Some(score) = stage1_score(sl, nl, sr, nr) else {
                continue;
            };
            found.push(SplitCandidate {
                node,
                feature,
                threshold,
                stage1_score: score,
                gain: score - base,
            });
        }
    }
    rank(&mut found);
    found.truncate(control.n_candidates);
    found
}

/// Stable sort by descending raw score; ties keep scan order (node, feature,
/// threshold ascending).
fn rank(c: &mut [SplitCandidate]) {
    c.sort_by(|a, b| b.stage1_score.partial_cmp(&a.stage1_score).unwrap_or(Ordering::Equal));
}

/// Combines per-node shortlists (given in ascending node order) into the
/// candidates passed to the second stage.
pub fn select_candidates(per_node: &[Vec<SplitCandidate>], control: &ControlParams) -> Vec<SplitCandidate> {
    if control.by_node {
        return per_node
            .iter()
            .flat_map(|c| c.iter().take(control.n_candidates).copied())
            .collect();
    }
    let mut pooled: Vec<SplitCandidate> = per_node.iter().flatten().copied().collect();
    rank(&mut pooled);
    pooled.truncate(control.n_candidates);
    pooled
}
