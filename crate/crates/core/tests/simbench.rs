mod common;

use common::rng;
use prtree::simbench::{
    generate_dgp, inject_mcar, quantile, rmse, run_study, summarize, Method, Metric, StudyConfig, StudyRecord,
};
use prtree::{Error, FillType, Observation};
use rand::Rng;

#[test]
fn dgp_ranges_and_truth() {
    let s = generate_dgp(2000, 11);
    for ((x, f), y) in s.x.iter().zip(&s.f_true).zip(&s.y) {
        let (a, b) = (x.get(0).unwrap(), x.get(1).unwrap());
        assert!((0.0..=5.0).contains(&a) && (-1.5..=1.5).contains(&b));
        assert_eq!(*f, 5.0 * a.cos() + b.powi(3));
        assert!(f.abs() <= 5.0 + 3.375);
        assert!(y.is_finite());
    }
    let again = generate_dgp(2000, 11);
    assert_eq!(s.y, again.y);
}

#[test]
fn noise_variance_is_a_quarter() {
    let n = 100_000;
    let s = generate_dgp(n, 5);
    let e: Vec<f64> = s.y.iter().zip(&s.f_true).map(|(y, f)| y - f).collect();
    let m = e.iter().sum::<f64>() / n as f64;
    let var = e.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    // Var of the sample variance of normal draws is 2 sigma^4 / (n - 1).
    let se = (2.0 * 0.25f64.powi(2) / (n - 1) as f64).sqrt();
    assert!((var - 0.25).abs() < 3.0 * se, "variance {var}, se {se}");
}

fn masked_rows(x: &[Observation]) -> usize {
    x.iter().filter(|r| !r.is_complete()).count()
}

#[test]
fn mcar_masks_exactly_floor_rho_n_rows() {
    let s = generate_dgp(1000, 3);
    assert_eq!(masked_rows(&inject_mcar(&s.x, 0.0, 1).unwrap()), 0);
    assert_eq!(masked_rows(&inject_mcar(&s.x, 0.2, 1).unwrap()), 200);
    assert_eq!(masked_rows(&inject_mcar(&s.x[..999], 0.3, 1).unwrap()), 299);
    let masked = inject_mcar(&s.x, 0.4, 9).unwrap();
    for (a, b) in s.x.iter().zip(&masked) {
        for j in 0..2 {
            if let Some(v) = b.get(j) {
                assert_eq!(a.get(j), Some(v));
            }
        }
    }
    assert_eq!(masked, inject_mcar(&s.x, 0.4, 9).unwrap());
    assert!(matches!(inject_mcar(&s.x, 1.0, 1), Err(Error::Parameter(_))));
}

#[test]
fn mcar_patterns_are_equally_likely() {
    let n = 10_000;
    let s = generate_dgp(n, 8);
    let m = inject_mcar(&s.x, 0.9, 21).unwrap();
    let k = 9000.0;
    let mut counts = [0.0f64; 3];
    for r in &m {
        match (r.is_missing(0), r.is_missing(1)) {
            (true, true) => counts[0] += 1.0,
            (true, false) => counts[1] += 1.0,
            (false, true) => counts[2] += 1.0,
            _ => {}
        }
    }
    assert_eq!(counts.iter().sum::<f64>(), k);
    let se = (k * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for c in counts {
        assert!((c - k / 3.0).abs() < 3.0 * se, "{counts:?}");
    }
}

#[test]
fn rmse_examples() {
    assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert!((rmse(&[2.0, 3.0, -1.0], &[1.0, 2.0, -2.0]).unwrap() - 1.0).abs() < 1e-15);
    assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.535_533_905_932_737_6).abs() < 1e-12);
    assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
}

fn record(value: f64, method: Method) -> StudyRecord {
    StudyRecord {
        replication: 0,
        method,
        rho: 0.0,
        rmse_obs_train: value,
        rmse_obs_test: value,
        rmse_true_train: value,
        rmse_true_test: value,
        n_terminal_nodes: 3,
        sigma_multiplier: None,
    }
}

#[test]
fn summary_conventions() {
    let one = summarize(&[record(0.7, Method::Cart)]);
    let row = one.iter().find(|r| r.metric == Metric::RmseTrueTest).unwrap();
    assert_eq!((row.min, row.q1, row.median, row.q3, row.max), (0.7, 0.7, 0.7, 0.7, 0.7));
    let four: Vec<_> = [3.0, 1.0, 4.0, 2.0].iter().map(|&v| record(v, Method::Cart)).collect();
    let row = summarize(&four).into_iter().find(|r| r.metric == Metric::RmseTrueTest).unwrap();
    assert_eq!(row.median, 2.5);
    assert_eq!(row.n, 4);
}

/// Type-7 quantile from its definition: the value at fractional rank
/// `1 + (n - 1) p` in 1-based sorted order.
fn brute_quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = 1.0 + (v.len() as f64 - 1.0) * p;
    let below = v[rank.floor() as usize - 1];
    let above = v[(rank.ceil() as usize) - 1];
    below + (rank - rank.floor()) * (above - below)
}

#[test]
fn quartiles_match_order_statistics_oracle() {
    let mut r = rng(77);
    for trial in 0..20 {
        let vals: Vec<f64> = (0..25).map(|_| r.random_range(0.0..4.0)).collect();
        let recs: Vec<_> = vals.iter().map(|&v| record(v, Method::PrTree(FillType::SmoothedProjection))).collect();
        let row = summarize(&recs).into_iter().find(|x| x.metric == Metric::RmseObsTest).unwrap();
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        // n = 25: quartiles sit exactly on the 7th, 13th and 19th values.
        assert_eq!(row.q1, sorted[6], "trial {trial}");
        assert_eq!(row.median, sorted[12]);
        assert_eq!(row.q3, sorted[18]);
        assert_eq!((row.min, row.max), (sorted[0], sorted[24]));
        for p in [0.1, 0.33, 0.9] {
            assert!((quantile(&sorted, p) - brute_quantile(&vals, p)).abs() < 1e-12);
        }
    }
}

fn small_config(rho: f64) -> StudyConfig {
    StudyConfig {
        n_train: 300,
        n_test: 60,
        rho,
        n_replications: 3,
        base_seed: 42,
        methods: Method::ALL.to_vec(),
    }
}

#[test]
fn study_is_deterministic() {
    let a = run_study(&small_config(0.4)).unwrap();
    let b = run_study(&small_config(0.4)).unwrap();
    assert_eq!(a.records, b.records);
    assert!(a.failures.is_empty());
    assert_eq!(a.records.len(), 12);
    for r in &a.records {
        for v in [r.rmse_obs_train, r.rmse_obs_test, r.rmse_true_train, r.rmse_true_test] {
            assert!(v.is_finite() && v >= 0.0);
        }
        assert_eq!(r.sigma_multiplier.is_some(), r.method != Method::Cart);
    }
    let single = StudyConfig { n_replications: 1, ..small_config(0.4) };
    assert_eq!(run_study(&single).unwrap().records, a.records[..4]);
}

#[test]
fn fill_types_coincide_on_complete_data() {
    let out = run_study(&small_config(0.0)).unwrap();
    for rep in 0..3 {
        let prt: Vec<_> = out
            .records
            .iter()
            .filter(|r| r.replication == rep && r.method != Method::Cart)
            .collect();
        assert_eq!(prt.len(), 3);
        for r in &prt[1..] {
            assert_eq!(r.rmse_true_test, prt[0].rmse_true_test);
            assert_eq!(r.rmse_obs_train, prt[0].rmse_obs_train);
            assert_eq!(r.n_terminal_nodes, prt[0].n_terminal_nodes);
            assert_eq!(r.sigma_multiplier, prt[0].sigma_multiplier);
        }
    }
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(run_study(&StudyConfig { rho: 1.0, ..small_config(0.0) }).is_err());
    assert!(run_study(&StudyConfig { n_replications: 0, ..small_config(0.0) }).is_err());
    assert!(run_study(&StudyConfig { methods: vec![], ..small_config(0.0) }).is_err());
    assert_eq!("prtree_fill1".parse::<Method>().unwrap(), Method::PrTree(FillType::PartialConditioning));
    assert!("rpart".parse::<Method>().is_err());
}
