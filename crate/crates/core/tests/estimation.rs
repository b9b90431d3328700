mod common;

use common::{pinv_solve, random_rows, rng, sse_split};
use nalgebra::{DMatrix, DVector};
use prtree::estimation::{
    grid_multipliers, grow_tree, scan_node, select_candidates, sigma_grid_default, solve_gamma, splittable_nodes,
    stage2_evaluate, threshold_set,
};
use prtree::{fit, ControlParams, FillType, Matrix, Observation, PrTree, KernelSpec};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn linear_y(r: &mut ChaCha8Rng, rows: &[Observation]) -> Vec<f64> {
    rows.iter()
        .map(|x| {
            let a = x.get(0).unwrap_or(0.0);
            let b = x.get(1).unwrap_or(0.0);
            (2.0 * a).sin() * 3.0 + b + r.random_range(-0.3..0.3)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stage1_best_split_minimizes_within_child_sse(seed in any::<u64>(), n in 4usize..=30, p in 1usize..4) {
        let mut r = rng(seed);
        let rows = random_rows(&mut r, n, p, 0.0);
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let control = ControlParams { n_min: 1, n_candidates: usize::MAX, ..ControlParams::default() };
        let members: Vec<usize> = (0..n).collect();
        let cands = scan_node(0, &members, &rows, &y, &control);
        prop_assume!(!cands.is_empty());

        let mut best = f64::INFINITY;
        for j in 0..p {
            let xs: Vec<f64> = rows.iter().map(|o| o.get(j).unwrap()).collect();
            for t in threshold_set(rows.iter().map(|o| o.get(j))) {
                best = best.min(sse_split(&xs, &y, t));
            }
        }
        let top = cands[0];
        let xs: Vec<f64> = rows.iter().map(|o| o.get(top.feature).unwrap()).collect();
        let chosen = sse_split(&xs, &y, top.threshold);
        prop_assert!((chosen - best).abs() <= 1e-9 * (1.0 + best), "{} vs {}", chosen, best);
        // Every admissible pair was scored.
        let total: usize = (0..p).map(|j| threshold_set(rows.iter().map(|o| o.get(j))).len()).sum();
        prop_assert_eq!(cands.len(), total);
    }

    #[test]
    fn scan_order_is_independent_of_row_order(seed in any::<u64>(), n in 6usize..30) {
        // Integer responses keep the running sums exact under any order.
        let mut r = rng(seed);
        let rows = random_rows(&mut r, n, 2, 0.0);
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-3i32..4) as f64).collect();
        let control = ControlParams { n_min: 1, n_candidates: 5, ..ControlParams::default() };
        let fwd: Vec<usize> = (0..n).collect();
        let rev: Vec<usize> = (0..n).rev().collect();
        let a = scan_node(0, &fwd, &rows, &y, &control);
        let b = scan_node(0, &rev, &rows, &y, &control);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn min_norm_solution_matches_pseudoinverse(seed in any::<u64>(), n in 2usize..40, m in 1usize..6, dup in any::<bool>()) {
        let mut r = rng(seed);
        let mut p = DMatrix::from_fn(n, m, |_, _| r.random_range(0.0..1.0));
        if dup && m > 1 {
            let c = p.column(0).clone_owned();
            p.set_column(m - 1, &c);
        }
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let g = solve_gamma(&p, &y);
        let oracle = pinv_solve(&p, &y);
        // Compare fitted values, which are unique, and the solutions, which
        // are unique once the minimum norm is imposed.
        let scale = 1.0 + oracle.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in g.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-6 * scale, "{:?} vs {:?}", g, oracle);
        }
    }

    #[test]
    fn residual_is_orthogonal_to_design(seed in any::<u64>(), n in 5usize..40, m in 1usize..5) {
        let mut r = rng(seed);
        let p = DMatrix::from_fn(n, m, |_, _| r.random_range(0.0..1.0));
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let g = DVector::from_vec(solve_gamma(&p, &y));
        let resid = DVector::from_column_slice(&y) - &p * g;
        let grad = p.transpose() * resid;
        prop_assert!(grad.amax() < 1e-6);
    }

    #[test]
    fn fill_types_coincide_on_complete_data(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rows = random_rows(&mut r, 80, 2, 0.0);
        let y = linear_y(&mut r, &rows);
        let fits: Vec<_> = FillType::ALL
            .iter()
            .map(|&fill| {
                let control = ControlParams { fill_type: fill, grid_size: 3, seed, ..ControlParams::default() };
                fit(&y, &rows, &control).unwrap()
            })
            .collect();
        for f in &fits[1..] {
            prop_assert_eq!(f.tree.nodes(), fits[0].tree.nodes());
            prop_assert_eq!(f.tree.regions(), fits[0].tree.regions());
            prop_assert_eq!(&f.yhat, &fits[0].yhat);
        }
    }

    #[test]
    fn grown_trees_respect_limits(seed in any::<u64>(), miss in 0.0f64..0.5, max_depth in 1usize..5, max_leaves in 1usize..8, n_min in 1usize..10) {
        let mut r = rng(seed);
        let rows = random_rows(&mut r, 120, 2, miss);
        let y = linear_y(&mut r, &rows);
        let control = ControlParams {
            max_depth,
            max_terminal_nodes: max_leaves,
            n_min,
            fill_type: FillType::PartialConditioning,
            ..ControlParams::default()
        };
        let out = grow_tree(&rows, &y, &[0.5, 0.5], &control).unwrap();
        prop_assert!(out.tree.depth() <= max_depth);
        prop_assert!(out.tree.n_leaves() <= max_leaves);
        for leaf in out.tree.leaves() {
            let region = out.tree.region(leaf).unwrap();
            let complete = rows.iter().filter(|x| x.is_complete() && region.contains_observed(x)).count();
            prop_assert!(complete >= n_min, "leaf {} has {} complete rows", leaf, complete);
        }
        for w in out.mse_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 - control.cp) && w[1] < w[0]);
        }
        let yhat: Vec<f64> = (0..rows.len()).map(|i| (0..out.p.ncols()).map(|m| out.p[(i, m)] * out.gamma[m]).sum()).collect();
        let mse = yhat.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64;
        prop_assert!((mse - out.mse_train).abs() < 1e-9);
    }
}

#[test]
fn solve_gamma_examples() {
    let y = [1.0, -2.0, 3.5];
    let g = solve_gamma(&Matrix::identity(3, 3), &y);
    for (a, b) in g.iter().zip(&y) {
        assert!((a - b).abs() < 1e-14);
    }
    // Duplicate columns share the weight equally.
    let p = Matrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.0, 0.0]);
    let y = [2.0, 1.0, 0.5, 3.0];
    let g = solve_gamma(&p, &y);
    let oracle = pinv_solve(&p, &y);
    assert!((g[0] - g[1]).abs() < 1e-12);
    assert!((g[0] - oracle[0]).abs() < 1e-10);

    let mut r = rng(11);
    let p = DMatrix::from_fn(20, 3, |_, _| r.random_range(0.0..1.0));
    let y: Vec<f64> = (0..20).map(|_| r.random_range(-1.0..1.0)).collect();
    let g = solve_gamma(&p, &y);
    let pt = p.transpose();
    let normal = (&pt * &p).try_inverse().unwrap() * (&pt * DVector::from_vec(y));
    for k in 0..3 {
        assert!((g[k] - normal[k]).abs() < 1e-8);
    }
}

#[test]
fn sigma_grid_uses_observed_cells() {
    let rows = vec![
        Observation::new(vec![Some(1.0), None]),
        Observation::new(vec![Some(3.0), Some(10.0)]),
        Observation::new(vec![None, Some(14.0)]),
        Observation::new(vec![Some(5.0), Some(12.0)]),
    ];
    let grid = sigma_grid_default(&rows, 8).unwrap();
    let m = grid_multipliers(8);
    assert_eq!(m, vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]);
    // sd of {1,3,5} is 2 and of {10,14,12} is 2.
    for (g, k) in grid.iter().zip(&m) {
        assert!((g[0] - 2.0 * k).abs() < 1e-12 && (g[1] - 2.0 * k).abs() < 1e-12);
    }
    assert_eq!(sigma_grid_default(&rows, 1).unwrap(), vec![vec![0.5, 0.5]]);

    let flat = vec![Observation::complete(&[3.0]), Observation::complete(&[3.0])];
    assert_eq!(sigma_grid_default(&flat, 1).unwrap()[0][0], 0.25 * 4e-8);
}

#[test]
fn step_function_is_split_at_the_step() {
    let n = 100;
    let xs: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / n as f64).collect();
    let rows: Vec<Observation> = xs.iter().map(|&v| Observation::complete(&[v])).collect();
    let y: Vec<f64> = xs.iter().map(|&v| if v <= 0.0 { -1.0 } else { 1.0 }).collect();
    let control = ControlParams { max_terminal_nodes: 2, ..ControlParams::default() };
    let out = grow_tree(&rows, &y, &[0.01], &control).unwrap();
    let root = out.tree.node(0).unwrap().split.expect("root was split");
    assert!(root.threshold.abs() <= 0.02, "threshold {}", root.threshold);
    assert!(out.mse_train < 1e-2);
}

#[test]
fn constant_response_keeps_a_single_leaf() {
    let mut r = rng(3);
    let rows = random_rows(&mut r, 60, 2, 0.2);
    let y = vec![4.25; 60];
    let res = fit(&y, &rows, &ControlParams::default()).unwrap();
    assert_eq!(res.tree.n_leaves(), 1);
    assert!((res.gamma[0] - 4.25).abs() < 1e-12);
    assert!(res.mse_train < 1e-20);
}

#[test]
fn fits_are_deterministic() {
    let mut r = rng(8);
    let rows = random_rows(&mut r, 150, 2, 0.3);
    let y = linear_y(&mut r, &rows);
    let control = ControlParams { seed: 99, ..ControlParams::default() };
    let a = fit(&y, &rows, &control).unwrap();
    let b = fit(&y, &rows, &control).unwrap();
    assert_eq!(a.tree, b.tree);
    assert_eq!(a.yhat, b.yhat);
    assert_eq!(a.idx_valid, b.idx_valid);
}

#[test]
fn fit_reports_consistent_quantities() {
    let mut r = rng(9);
    let rows = random_rows(&mut r, 200, 2, 0.25);
    let y = linear_y(&mut r, &rows);
    let res = fit(&y, &rows, &ControlParams::default()).unwrap();
    for i in 0..rows.len() {
        let v: f64 = (0..res.p.ncols()).map(|m| res.p[(i, m)] * res.gamma[m]).sum();
        assert!((v - res.yhat[i]).abs() < 1e-12);
    }
    let mut all: Vec<usize> = res.idx_train.iter().chain(&res.idx_valid).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..rows.len()).collect::<Vec<_>>());
    assert!(res.mse_valid.is_some());
    assert_eq!(res.grid_scores.len(), 8);
    assert_eq!(res.nodes_info().len(), res.regions().len());
}

#[test]
fn splittable_nodes_examples() {
    let n = 1000;
    let mut r = rng(1);
    let rows = random_rows(&mut r, n, 1, 0.0);
    let tree = PrTree::root(vec![1.0], KernelSpec::gaussian(), FillType::SmoothedProjection, 0.0).unwrap();
    let ones = Matrix::from_element(n, 1, 1.0);
    assert_eq!(splittable_nodes(&tree, &ones, &ControlParams::default(), &[n]), vec![0]);

    let shallow = ControlParams { max_depth: 1, ..ControlParams::default() };
    let mut t = tree.clone();
    t.split_leaf(0, 0, 0.0).unwrap();
    let p2 = Matrix::from_element(n, 2, 0.5);
    assert!(splittable_nodes(&t, &p2, &shallow, &[n, n / 2, n / 2]).is_empty());

    // Only 3% of rows give the leaf probability above p_min.
    let p3 = Matrix::from_fn(n, 1, |i, _| if i < 30 { 0.9 } else { 0.01 });
    assert!(splittable_nodes(&tree, &p3, &ControlParams::default(), &[n]).is_empty());
    let _ = rows;
}

#[test]
fn stage2_only_touches_the_parent_column() {
    let mut r = rng(4);
    let rows = random_rows(&mut r, 50, 2, 0.2);
    let y = linear_y(&mut r, &rows);
    let mut tree = PrTree::root(vec![0.6, 0.6], KernelSpec::gaussian(), FillType::SmoothedProjection, 0.0).unwrap();
    tree.split_leaf(0, 0, 0.0).unwrap();
    tree.split_leaf(1, 1, 0.5).unwrap();
    let p = prtree::compute_p(&rows, &tree).unwrap();
    let control = ControlParams { n_min: 1, ..ControlParams::default() };
    let members: Vec<usize> = (0..rows.len()).filter(|&i| tree.region(2).unwrap().contains_observed(&rows[i])).collect();
    let cand = scan_node(2, &members, &rows, &y, &control)[0];
    let out = stage2_evaluate(&cand, &tree, &rows, &y, &p).unwrap();
    // Leaves are [2, 3, 4]; node 2 is column 0, so old columns 1 and 2 move to 0 and 1.
    for c in 0..2 {
        for i in 0..rows.len() {
            assert_eq!(out.p[(i, c)].to_bits(), p[(i, c + 1)].to_bits());
        }
    }
    let mut grown = tree.clone();
    grown.split_leaf(cand.node, cand.feature, cand.threshold).unwrap();
    let fresh = prtree::compute_p(&rows, &grown).unwrap();
    for i in 0..rows.len() {
        for c in 0..fresh.ncols() {
            assert!((fresh[(i, c)] - out.p[(i, c)]).abs() < 1e-12);
        }
    }
}

#[test]
fn pooled_candidates_may_come_from_one_node() {
    let mut r = rng(6);
    let rows = random_rows(&mut r, 80, 1, 0.0);
    // Strong structure only for x > 0.
    let y: Vec<f64> = rows.iter().map(|x| { let v = x.get(0).unwrap(); if v > 0.0 { (4.0 * v).floor() } else { 0.0 } }).collect();
    let control = ControlParams { n_min: 2, ..ControlParams::default() };
    let left: Vec<usize> = (0..80).filter(|&i| rows[i].get(0).unwrap() <= 0.0).collect();
    let right: Vec<usize> = (0..80).filter(|&i| rows[i].get(0).unwrap() > 0.0).collect();
    let per_node = vec![scan_node(1, &left, &rows, &y, &control), scan_node(2, &right, &rows, &y, &control)];
    let pooled = select_candidates(&per_node, &control);
    assert_eq!(pooled.len(), 3);
    assert!(pooled.iter().all(|c| c.node == 2));
    let by_node = ControlParams { by_node: true, ..control };
    assert_eq!(select_candidates(&per_node, &by_node).len(), per_node[0].len().min(3) + per_node[1].len().min(3));
}
