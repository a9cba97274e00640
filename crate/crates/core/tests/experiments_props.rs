use pooled_data::decode::candidate_count;
use pooled_data::experiments::{estimate_pe, run_trial, sweep_n, write_sweep_csv, ExperimentConfig};
use pooled_data::{NoiseModel, Proportions};

fn base(trials: usize) -> ExperimentConfig {
    ExperimentConfig::new(Proportions::uniform(2).unwrap(), 10, 1, 0.5, NoiseModel::Noiseless, trials, 21)
}

#[test]
fn zero_tests_is_a_pure_guess() {
    let config = ExperimentConfig { n: 0, ..base(10_000) };
    let size = candidate_count(&config.counts().unwrap()).unwrap() as f64;
    let s = sweep_n(&config, &[0], 0).unwrap();
    let e = &s.estimates[0];
    assert!((e.pe_hat - (1.0 - 1.0 / size)).abs() <= 3.0 * e.half_width(), "{e:?}");
}

#[test]
fn tolerance_only_helps_on_paired_trials() {
    let grid: Vec<usize> = (1..=8).collect();
    let exact = sweep_n(&base(800), &grid, 0).unwrap();
    let loose = sweep_n(&ExperimentConfig { qmax: 1, ..base(800) }, &grid, 0).unwrap();
    for (a, b) in exact.estimates.iter().zip(&loose.estimates) {
        assert!(b.failures <= a.failures, "{a:?} vs {b:?}");
    }
}

#[test]
fn more_trials_narrow_the_interval() {
    let config = ExperimentConfig { n: 4, ..base(2000) };
    let a = estimate_pe(&config, 0).unwrap();
    let b = estimate_pe(&ExperimentConfig { trials: 4000, ..config }, 0).unwrap();
    let ratio = (b.ci_high - b.ci_low) / (a.ci_high - a.ci_low);
    assert!((ratio * 2f64.sqrt() - 1.0).abs() < 0.2, "{ratio}");
}

#[test]
fn sweeps_do_not_depend_on_threads() {
    let grid: Vec<usize> = (1..=6).collect();
    let csv = |threads| {
        let mut buf = Vec::new();
        write_sweep_csv(&sweep_n(&base(300), &grid, threads).unwrap(), &mut buf).unwrap();
        buf
    };
    let one = csv(1);
    assert_eq!(one, csv(2));
    assert_eq!(one, csv(5));
    assert_eq!(String::from_utf8(one).unwrap().lines().count(), 7);
}

#[test]
fn trials_are_order_independent() {
    let config = ExperimentConfig { n: 3, ..base(1) };
    let forward: Vec<bool> = (0..50).map(|i| run_trial(&config, i).unwrap()).collect();
    let backward: Vec<bool> = (0..50).rev().map(|i| run_trial(&config, i).unwrap()).collect();
    assert_eq!(forward, backward.into_iter().rev().collect::<Vec<_>>());
}

#[test]
fn sweep_reports_the_formula_and_a_crossing() {
    let config = ExperimentConfig {
        p: 12,
        ..base(600)
    };
    let s = sweep_n(&config, &(1..=12).collect::<Vec<_>>(), 0).unwrap();
    let n_star = s.n_star_formula.unwrap();
    let want = 12.0 / 12f64.ln() * 2.0 * 2f64.ln();
    assert!((n_star - want).abs() < 1e-12);
    let cross = s.n_cross.unwrap();
    assert!((1.0..=12.0).contains(&cross));
    assert!(s.trend.p_value > 0.01);
}
