use std::collections::HashMap;

use super::lsq::{mse, solve_gamma};
use super::split::{scan_node, select_candidates, SplitCandidate};
use super::ControlParams;
use crate::data::Observation;
use crate::error::{Error, Result};
use crate::tree::{Matrix, PrTree};

/// Result of growing one tree at a fixed sigma.
#[derive(Debug, Clone)]
pub struct GrowOutcome {
    pub tree: PrTree,
    pub p: Matrix,
    pub gamma: Vec<f64>,
    pub mse_train: f64,
    /// Training MSE after the root fit and after every accepted split.
    pub mse_history: Vec<f64>,
}

/// Outcome of tentatively applying one candidate split.
#[derive(Debug, Clone)]
pub struct Stage2Result {
    pub mse: f64,
    pub gamma: Vec<f64>,
    pub p: Matrix,
}

/// Terminal nodes that may be split: shallower than `max_depth`, with at least
/// `n_min` complete rows, and given probability above `p_min` by at least
/// `ceil(perc_x * n)` rows. `complete_counts` is indexed by node id.
pub fn splittable_nodes(
    tree: &PrTree,
    p: &Matrix,
    control: &ControlParams,
    complete_counts: &[usize],
) -> Vec<usize> {
    let n = p.nrows();
    let needed = (control.perc_x * n as f64).ceil() as usize;
    tree.leaves()
        .into_iter()
        .enumerate()
        .filter(|&(col, id)| {
            let node = &tree.nodes()[id];
            node.depth < control.max_depth
                && complete_counts[id] >= control.n_min
                && p.column(col).iter().filter(|&&v| v > control.p_min).count() >= needed
        })
        .map(|(_, id)| id)
        .collect()
}

/// Applies `candidate` to a copy of the probability matrix, refits the leaf
/// weights and reports the global training MSE.
///
/// The parent's column is removed and the two child columns are appended, in
/// the same order [`PrTree::split_leaf`] gives the leaves. Every other column
/// is copied unchanged.
pub fn stage2_evaluate(
    candidate: &SplitCandidate,
    tree: &PrTree,
    rows: &[Observation],
    y: &[f64],
    p: &Matrix,
) -> Result<Stage2Result> {
    let leaves = tree.leaves();
    let col = leaves
        .iter()
        .position(|&id| id == candidate.node)
        .ok_or_else(|| Error::Contract(format!("node {} is not a leaf", candidate.node)))?;
    let region = tree.region(candidate.node)?;
    let (lo, hi) = region.bounds()[candidate.feature];
    if !(lo < candidate.threshold && candidate.threshold < hi) {
        return Err(Error::InvalidSplit {
            feature: candidate.feature,
            threshold: candidate.threshold,
            lower: lo,
            upper: hi,
        });
    }
    let m = p.ncols();
    let mut next = Matrix::zeros(p.nrows(), m + 1);
    let mut dst = 0;
    for c in 0..m {
        if c != col {
            next.set_column(dst, &p.column(c));
            dst += 1;
        }
    }
    for (i, x) in rows.iter().enumerate() {
        let parent = p[(i, col)];
        if parent > 0.0 {
            let (sl, sr) = tree.split_shares(x, region, candidate.feature, candidate.threshold);
            next[(i, m - 1)] = parent * sl;
            next[(i, m)] = parent * sr;
        }
    }
    let gamma = solve_gamma(&next, y);
    let mse = mse(&next, &gamma, y);
    Ok(Stage2Result { mse, gamma, p: next })
}

/// Grows a tree on `rows`/`y` at a fixed `sigma`.
pub fn grow_tree(rows: &[Observation], y: &[f64], sigma: &[f64], control: &ControlParams) -> Result<GrowOutcome> {
    control.validate()?;
    if rows.is_empty() {
        return Err(Error::Input("no training rows".into()));
    }
    if rows.len() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} responses", rows.len(), y.len())));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("response value at row {i} is missing or not finite")));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != sigma.len()) {
        return Err(Error::Shape(format!(
            "row {i} has {} features but sigma has {}",
            rows[i].len(),
            sigma.len()
        )));
    }

    let n = rows.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let mut tree = PrTree::root(sigma.to_vec(), control.kernel, control.fill_type, mean)?;
    let mut p = Matrix::from_element(n, 1, 1.0);
    let mut gamma = vec![mean];
    let mut current = mse(&p, &gamma, y);
    let mut history = vec![current];

    // Rows hard-routed to each node: those whose observed coordinates fall in
    // the node's region. A row missing a split feature follows both children.
    let mut members: Vec<Vec<usize>> = vec![(0..n).collect()];
    let mut complete_counts = vec![rows.iter().filter(|r| r.is_complete()).count()];
    let mut shortlist: HashMap<usize, Vec<SplitCandidate>> = HashMap::new();

    while tree.n_leaves() < control.max_terminal_nodes {
        let splittable = splittable_nodes(&tree, &p, control, &complete_counts);
        if splittable.is_empty() {
            break;
        }
        let per_node: Vec<Vec<SplitCandidate>> = splittable
            .iter()
            .map(|&id| {
                shortlist
                    .entry(id)
                    .or_insert_with(|| scan_node(id, &members[id], rows, y, control))
                    .clone()
            })
            .collect();
        let candidates = select_candidates(&per_node, control);
        if candidates.is_empty() {
            break;
        }

        let mut best: Option<(SplitCandidate, Stage2Result)> = None;
        for cand in &candidates {
            let eval = stage2_evaluate(cand, &tree, rows, y, &p)?;
            if best.as_ref().is_none_or(|(_, b)| eval.mse < b.mse) {
                best = Some((*cand, eval));
            }
        }
        let (cand, eval) = best.expect("at least one candidate");
        if !(eval.mse <= current * (1.0 - control.cp) && eval.mse < current) {
            break;
        }

        let (left, right) = tree.split_leaf(cand.node, cand.feature, cand.threshold)?;
        tree.set_gamma(eval.gamma.clone())?;
        let parent_members = std::mem::take(&mut members[cand.node]);
        let mut lm = Vec::new();
        let mut rm = Vec::new();
        for i in parent_members {
            match rows[i].get(cand.feature) {
                Some(v) if v <= cand.threshold => lm.push(i),
                Some(_) => rm.push(i),
                None => {
                    lm.push(i);
                    rm.push(i);
                }
            }
        }
        for (id, m) in [(left, lm), (right, rm)] {
            debug_assert_eq!(id, members.len());
            complete_counts.push(m.iter().filter(|&&i| rows[i].is_complete()).count());
            members.push(m);
        }
        shortlist.remove(&cand.node);
        p = eval.p;
        gamma = eval.gamma;
        current = eval.mse;
        history.push(current);
    }

    Ok(GrowOutcome {
        tree,
        p,
        gamma,
        mse_train: current,
        mse_history: history,
    })
}
