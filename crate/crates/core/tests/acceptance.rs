//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

mod common;

use std::f64::consts::LN_2;
use std::time::{Duration, Instant};

use pooled_data::bounds::{
    approx_recovery_threshold, counting_pe_lower, gaussian_single_item_bound,
    mi_gaussian_bernoulli, mi_noiseless_bernoulli, noiseless_threshold, ApproxVariant,
};
use pooled_data::decode::exact_pe_oracle;
use pooled_data::experiments::{
    estimate_pe, figure1_data, sweep_n, write_sweep_csv, Decoder, DesignMode, ExperimentConfig, PeEstimate,
    SweepResult,
};
use pooled_data::infotheory::{
    binomial_pmf, hypergeometric_pmf, hypergeometric_variance, massey_bound, pmf_entropy, GeniePattern,
};
use pooled_data::model::{count_labels, round_proportions, sample_beta};
use pooled_data::{LabelCounts, NoiseModel, Proportions};

use common::{brute_force_bernoulli_mi, oracle_instances};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fig1_reproduction() -> Outcome {
    let rows = figure1_data(10, 0, 0).unwrap();
    let argmax = |id: &str| {
        rows.iter()
            .filter(|r| r.pi_id == id)
            .fold((0, f64::NEG_INFINITY), |b, r| if r.f_r > b.1 { (r.r, r.f_r) } else { b })
    };
    let (ru, _) = argmax("uniform");
    let (rn, fmax) = argmax("nonuniform");
    let target = 1.35834;
    let pass = ru == 1 && rn == 9 && (fmax - target).abs() <= 1e-4;
    outcome(
        pass,
        format!("argmax uniform r={ru}, nonuniform r={rn}, f(9)={fmax:.6} (target {target} ± 1e-4)"),
    )
}

fn threshold_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in 2..=12 {
        for p in [100usize, 10_000, 1_000_000] {
            let got = noiseless_threshold(&Proportions::uniform(d).unwrap(), p).unwrap().n_bound;
            let pf = p as f64;
            let want = pf / pf.ln() * 2.0 * (d as f64).ln() / (d - 1) as f64;
            worst = worst.max((got - want).abs() / want);
        }
    }
    outcome(worst <= 1e-9, format!("max relative error {worst:.2e} over d in 2..=12, p in {{1e2,1e4,1e6}}"))
}

struct OracleRow {
    counts: LabelCounts,
    n: usize,
    pe_exact: f64,
    est: PeEstimate,
}

fn oracle_rows() -> Vec<OracleRow> {
    oracle_instances(19, 2024)
        .into_iter()
        .enumerate()
        .map(|(i, inst)| {
            let oracle = exact_pe_oracle(&inst.design, &inst.counts, 0).unwrap();
            let p = inst.counts.p();
            let config = ExperimentConfig {
                design: DesignMode::Fixed(inst.design.clone()),
                ..ExperimentConfig::new(
                    Proportions::from_counts(&inst.counts).unwrap(),
                    p,
                    inst.design.n(),
                    0.5,
                    NoiseModel::Noiseless,
                    5000,
                    1000 + i as u64,
                )
            };
            assert_eq!(config.counts().unwrap(), inst.counts);
            OracleRow {
                n: inst.design.n(),
                counts: inst.counts,
                pe_exact: oracle.pe_exact,
                est: estimate_pe(&config, 0).unwrap(),
            }
        })
        .collect()
}

fn oracle_equivalence(rows: &[OracleRow]) -> Outcome {
    let pinned = rows[0].pe_exact == 0.5;
    let mut misses = 0;
    let mut worst: f64 = 0.0;
    for r in rows {
        let hw = r.est.half_width();
        let z = (r.est.pe_hat - r.pe_exact).abs() / hw;
        worst = worst.max(z);
        if z > 3.0 {
            misses += 1;
        }
    }
    outcome(
        pinned && misses == 0,
        format!(
            "{} instances, pinned pe_exact={}, worst |pe_hat - pe_exact| = {worst:.2} half-widths",
            rows.len(),
            rows[0].pe_exact
        ),
    )
}

fn counting_consistency(rows: &[OracleRow]) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut bad = 0;
    for r in rows {
        let lower = counting_pe_lower(&r.counts, r.n);
        let slack = r.est.pe_hat - (lower - 3.0 * r.est.half_width());
        if slack < 0.0 {
            bad += 1;
        }
        worst = worst.max(lower - r.est.pe_hat);
    }
    outcome(bad == 0, format!("max (lower bound - pe_hat) = {worst:.4}"))
}

fn compositions(total: usize, d: usize) -> Vec<Vec<usize>> {
    if d == 1 {
        return (0..=total).map(|x| vec![x]).collect();
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, d - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn mi_identity() -> Outcome {
    let ctx = LabelCounts::new(vec![1, 1]).unwrap();
    let pair = mi_noiseless_bernoulli(&GeniePattern::new(vec![1, 1], ctx).unwrap(), 0.5).unwrap();
    let mut worst = (pair - 2.0 * LN_2).abs();
    let mut cases = 0;
    for d in [2usize, 3] {
        for ell in compositions(8, d) {
            // One revealed item per label.
            let shown = vec![1; d];
            let context: Vec<usize> = ell.iter().map(|l| l + 1).collect();
            let pattern = GeniePattern::new(ell.clone(), LabelCounts::new(context).unwrap()).unwrap();
            for q in [0.2, 0.5, 0.8] {
                let lib = mi_noiseless_bernoulli(&pattern, q).unwrap();
                let brute = brute_force_bernoulli_mi(&ell, &shown, q);
                worst = worst.max((lib - brute).abs());
                cases += 1;
            }
        }
    }
    outcome(worst <= 1e-9, format!("{cases} patterns, max |closed form - enumeration| = {worst:.2e}"))
}

fn gaussian_sandwich() -> Outcome {
    let patterns: [&[usize]; 6] = [&[1, 0], &[1, 1], &[2, 1], &[3, 3], &[5, 2, 1], &[8, 4]];
    let mut violations = 0;
    let mut cases = 0;
    for ell in patterns {
        let pattern = GeniePattern::new(ell.to_vec(), LabelCounts::new(ell.iter().map(|l| l + 1).collect()).unwrap())
            .unwrap();
        for q in [0.2, 0.5, 0.8] {
            let clean = mi_noiseless_bernoulli(&pattern, q).unwrap();
            for var in [1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0] {
                let g = mi_gaussian_bernoulli(&pattern, q, var, 1).unwrap();
                let awgn: f64 = ell.iter().map(|&l| 0.5 * (l as f64 * q * (1.0 - q) / var).ln_1p()).sum();
                if !(g >= 0.0 && g <= clean.min(awgn) + 1e-6) {
                    violations += 1;
                }
                cases += 1;
            }
        }
    }
    let single = GeniePattern::new(vec![1, 0], LabelCounts::new(vec![2, 1]).unwrap()).unwrap();
    let small = mi_gaussian_bernoulli(&single, 0.5, 1e6, 1).unwrap();
    let approx = 0.25 / (2.0 * 1e6);
    let rel = (small - approx).abs() / approx;
    outcome(
        violations == 0 && rel <= 0.2,
        format!("{cases} grid points, {violations} violations; small-signal relative gap {rel:.2e}"),
    )
}

fn entropy_bounds() -> Outcome {
    let mut massey_fail = 0;
    let mut var_err: f64 = 0.0;
    let mut cases = 0;
    for p in 1..=60u64 {
        for k in 0..=p {
            for m in 0..=p {
                let pmf = hypergeometric_pmf(k, m, p).unwrap();
                if pmf_entropy(&pmf) > massey_bound(pmf.variance()) {
                    massey_fail += 1;
                }
                if p >= 2 {
                    var_err = var_err.max((hypergeometric_variance(k, m, p).unwrap() - pmf.variance()).abs());
                }
                cases += 1;
            }
        }
        for i in 1..20 {
            let pmf = binomial_pmf(p, i as f64 / 20.0).unwrap();
            if pmf_entropy(&pmf) > massey_bound(pmf.variance()) {
                massey_fail += 1;
            }
            cases += 1;
        }
    }
    outcome(
        massey_fail == 0 && var_err <= 1e-10,
        format!("{cases} pmfs, {massey_fail} Massey violations, max variance error {var_err:.2e}"),
    )
}

fn concentration() -> Outcome {
    let draws = 100_000u64;
    let mut worst = f64::NEG_INFINITY;
    let mut ok = true;
    let mut detail = Vec::new();
    for p in [16usize, 36, 64] {
        let radius = ((p as f64) * (p as f64).ln()).sqrt();
        let bound = 2.0 / (p * p) as f64;
        let slack = 3.0 * (bound * (1.0 - bound) / draws as f64).sqrt();
        for counts in [vec![p / 2, p / 2], vec![p / 4, p / 4, p / 2]] {
            let counts = LabelCounts::new(counts).unwrap();
            for m in [p / 4, p / 2, p] {
                let row = pooled_data::model::BitRow::from_bools(&(0..p).map(|j| j < m).collect::<Vec<_>>());
                let means: Vec<f64> = counts.counts().iter().map(|&c| (c * m) as f64 / p as f64).collect();
                let mut exceed = vec![0u64; counts.d()];
                for s in 0..draws {
                    let beta = sample_beta(&counts, s ^ (p as u64) << 40 ^ (m as u64) << 48);
                    let n = count_labels(&beta, &row).unwrap();
                    for t in 0..counts.d() {
                        if (n.0[t] as f64 - means[t]).abs() > radius {
                            exceed[t] += 1;
                        }
                    }
                }
                for e in exceed {
                    let freq = e as f64 / draws as f64;
                    worst = worst.max(freq - bound);
                    ok &= freq <= bound + slack;
                }
            }
        }
        detail.push(format!("p={p}: bound {bound:.2e}"));
    }
    outcome(ok, format!("{}; max (freq - bound) = {worst:.2e}", detail.join(", ")))
}

fn transition_config(noise: NoiseModel) -> ExperimentConfig {
    ExperimentConfig::new(Proportions::uniform(2).unwrap(), 12, 1, 0.5, noise, 2000, 7)
}

fn phase_transition(sweep: &SweepResult) -> Outcome {
    let first = sweep.estimates[0].pe_hat;
    let last = sweep.estimates.last().unwrap().pe_hat;
    let pv = sweep.trend.p_value;
    outcome(
        pv > 0.01 && first > 0.8 && last < 0.2,
        format!("pe_hat(1)={first:.4}, pe_hat(12)={last:.4}, isotonic bootstrap p={pv:.3}"),
    )
}

fn noise_hurts(clean: &SweepResult, noisy: &SweepResult) -> Outcome {
    let mut bad = 0;
    for (a, b) in clean.estimates.iter().zip(&noisy.estimates) {
        let combined = 3.0 * (a.half_width().powi(2) + b.half_width().powi(2)).sqrt();
        if b.pe_hat < a.pe_hat - combined {
            bad += 1;
        }
    }
    let single = gaussian_single_item_bound(100, 1.0, 0.0, None).unwrap().n_bound;
    outcome(
        bad == 0 && (single - 1842.07).abs() <= 0.01,
        format!("{bad} grid points with noisy < clean - 3 combined half-widths; single-item bound {single:.4}"),
    )
}

fn approx_recovery() -> Outcome {
    let mut bitwise = true;
    let mut ratios = Vec::new();
    let p = 10_000usize;
    let qmax = (p as f64).sqrt().floor() as usize;
    let family: Vec<(String, Proportions)> = (2..=12)
        .map(|d| (format!("uniform:{d}"), Proportions::uniform(d).unwrap()))
        .chain(std::iter::once(("fig1".to_string(), Proportions::fig1())))
        .collect();
    for (_, pi) in &family {
        let exact = noiseless_threshold(pi, p).unwrap().n_bound;
        let zero = approx_recovery_threshold(pi, p, 0, ApproxVariant::Noiseless { eta: 0.0 }).unwrap().n_bound;
        bitwise &= exact.to_bits() == zero.to_bits();
        let tol = approx_recovery_threshold(pi, p, qmax, ApproxVariant::Noiseless { eta: 0.0 }).unwrap().n_bound;
        ratios.push(tol / exact);
    }
    let within = ratios.iter().all(|r| (1.0 - r).abs() <= 0.05);
    let worst = family
        .iter()
        .zip(&ratios)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|((id, _), r)| format!("{id} ratio {r:.4}"))
        .unwrap();

    let pi = Proportions::new(vec![0.7, 0.3]).unwrap();
    let minority = round_proportions(&pi, 100).unwrap().counts()[1];
    let rep = approx_recovery_threshold(&pi, 100, minority, ApproxVariant::Noiseless { eta: 0.0 }).unwrap();
    let config = ExperimentConfig {
        qmax: minority,
        decoder: Decoder::MostCommonLabel,
        ..ExperimentConfig::new(pi, 100, 0, 0.5, NoiseModel::Noiseless, 2000, 3)
    };
    let sim = estimate_pe(&config, 0).unwrap();
    outcome(
        bitwise && within && rep.n_bound == 0.0 && sim.failures == 0,
        format!(
            "qmax=0 bit-identical: {bitwise}; qmax={qmax} at p=1e4 worst {worst} (need within 5%); \
             minority qmax bound {} with {} / {} constant-decoder failures",
            rep.n_bound, sim.failures, sim.trials
        ),
    )
}

fn determinism(reference: &SweepResult) -> Outcome {
    let csv = |s: &SweepResult| {
        let mut buf = Vec::new();
        write_sweep_csv(s, &mut buf).unwrap();
        buf
    };
    let grid: Vec<usize> = (1..=12).collect();
    let base = transition_config(NoiseModel::Noiseless);
    let mut same = true;
    for threads in [1, 3] {
        same &= csv(&sweep_n(&base, &grid, threads).unwrap()) == csv(reference);
    }
    outcome(same, "noiseless sweep CSV identical for --threads 0 (all cores), 1 and 3")
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome, Duration, Duration)> = Vec::new();
    let mut run = |id: usize, name: &'static str, limit: u64, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        let took = start.elapsed();
        results.push((id, name, out, took, Duration::from_secs(limit)));
    };

    run(1, "figure-1 reproduction", 1, &mut fig1_reproduction);
    run(2, "threshold identity", 1, &mut threshold_identity);
    let mut rows = Vec::new();
    run(3, "oracle equivalence", 60, &mut || {
        rows = oracle_rows();
        oracle_equivalence(&rows)
    });
    run(4, "counting-bound consistency", 60, &mut || counting_consistency(&rows));
    run(5, "noiseless MI identity", 30, &mut mi_identity);
    run(6, "Gaussian MI sandwich", 120, &mut gaussian_sandwich);
    run(7, "entropy-bound suite", 30, &mut entropy_bounds);
    run(8, "concentration", 60, &mut concentration);
    let grid: Vec<usize> = (1..=12).collect();
    let mut clean = None;
    run(9, "phase-transition trend", 600, &mut || {
        let s = sweep_n(&transition_config(NoiseModel::Noiseless), &grid, 0).unwrap();
        let o = phase_transition(&s);
        clean = Some(s);
        o
    });
    let clean = clean.unwrap();
    run(10, "noise hurts", 600, &mut || {
        let noisy = sweep_n(&transition_config(NoiseModel::Gaussian { sigma2: 1.0 }), &grid, 0).unwrap();
        noise_hurts(&clean, &noisy)
    });
    run(11, "approximate recovery", 30, &mut approx_recovery);
    run(12, "determinism", 600, &mut || determinism(&clean));

    let mut failed = 0;
    for (id, name, out, took, limit) in &results {
        let in_time = took <= limit;
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{id:>2}] {name}: {} ({:.2}s{})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            if in_time { String::new() } else { format!(", over the {}s budget", limit.as_secs()) }
        );
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
