//! Seeded Monte Carlo harness: error-probability estimates, sweeps over the
//! number of tests, and the `f(r)` table behind the threshold plot.
//!
//! Every trial draws its own seeds from `(master_seed, trial_index)`, so an
//! estimate does not depend on how trials are scheduled across threads.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{f_ratio, noiseless_threshold};
use crate::decode::{approx_success, ml_decode, CandidateTable};
use crate::error::{Error, Result};
use crate::model::{
    bernoulli_design, observe, round_proportions, sample_beta, LabelAssignment, LabelCounts, NoiseModel,
    Proportions, TestDesign,
};
use crate::seed::{derive_seed, rng, Purpose};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "design", rename_all = "snake_case")]
pub enum DesignMode {
    /// Fresh Bernoulli(`q`) design every trial.
    Bernoulli,
    /// The same design in every trial; `n` is taken from it.
    Fixed(TestDesign),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder {
    /// Exhaustive maximum likelihood.
    Ml,
    /// Ignore the tests and declare the most common label everywhere.
    MostCommonLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub pi: Proportions,
    pub p: usize,
    pub n: usize,
    pub q: f64,
    pub noise: NoiseModel,
    pub qmax: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub design: DesignMode,
    pub decoder: Decoder,
}

impl ExperimentConfig {
    /// Bernoulli design, ML decoding, exact recovery.
    pub fn new(pi: Proportions, p: usize, n: usize, q: f64, noise: NoiseModel, trials: usize, master_seed: u64) -> Self {
        Self {
            pi,
            p,
            n,
            q,
            noise,
            qmax: 0,
            trials,
            master_seed,
            design: DesignMode::Bernoulli,
            decoder: Decoder::Ml,
        }
    }

    pub fn counts(&self) -> Result<LabelCounts> {
        round_proportions(&self.pi, self.p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.qmax > self.p {
            return Err(Error::InvalidParameter(format!(
                "qmax = {} exceeds p = {}",
                self.qmax, self.p
            )));
        }
        self.noise.validate()?;
        match &self.design {
            DesignMode::Bernoulli => {
                if !(self.q > 0.0 && self.q < 1.0) {
                    return Err(Error::InvalidParameter(format!("q = {} must lie in (0, 1)", self.q)));
                }
            }
            DesignMode::Fixed(x) => {
                if x.p() != self.p {
                    return Err(Error::LengthMismatch {
                        expected: self.p,
                        found: x.p(),
                    });
                }
            }
        }
        self.counts().map(|_| ())
    }

    fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }
}

/// Per-configuration state shared by every trial.
struct Context {
    counts: LabelCounts,
    table: Option<CandidateTable>,
}

impl Context {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let counts = config.counts()?;
        let table = match (&config.design, config.decoder) {
            (DesignMode::Fixed(x), Decoder::Ml) if config.qmax < config.p => Some(CandidateTable::build(x, &counts)?),
            _ => None,
        };
        Ok(Self { counts, table })
    }
}

fn most_common(counts: &LabelCounts) -> usize {
    let c = counts.counts();
    // Lowest label on ties.
    (0..c.len()).fold(0, |best, t| if c[t] > c[best] { t } else { best })
}

fn trial(config: &ExperimentConfig, ctx: &Context, index: u64) -> Result<bool> {
    let seed = |purpose| derive_seed(config.master_seed, index, purpose);
    let beta = sample_beta(&ctx.counts, seed(Purpose::Labels));
    if config.qmax >= config.p {
        return Ok(true);
    }
    let beta_hat = match config.decoder {
        Decoder::MostCommonLabel => LabelAssignment::new(vec![most_common(&ctx.counts); config.p], ctx.counts.d())?,
        Decoder::Ml => {
            let fresh;
            let design = match &config.design {
                DesignMode::Fixed(x) => x,
                DesignMode::Bernoulli => {
                    fresh = bernoulli_design(config.n, config.p, config.q, seed(Purpose::Design))?;
                    &fresh
                }
            };
            let y = observe(&beta, design, &config.noise, seed(Purpose::Noise))?;
            let tie = seed(Purpose::TieBreak);
            match &ctx.table {
                Some(t) => t.decode(&y, &config.noise, tie)?,
                None => ml_decode(&y, design, &ctx.counts, &config.noise, tie)?,
            }
            .beta_hat
        }
    };
    approx_success(&beta_hat, &beta, config.qmax)
}

/// Outcome of trial `index`; a pure function of `(config, index)`.
pub fn run_trial(config: &ExperimentConfig, index: u64) -> Result<bool> {
    let ctx = Context::new(config)?;
    trial(config, &ctx, index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeEstimate {
    pub pe_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: usize,
    pub failures: usize,
}

impl PeEstimate {
    pub fn from_counts(failures: usize, trials: usize) -> Self {
        let (ci_low, ci_high) = wilson_interval(failures, trials);
        Self {
            pe_hat: failures as f64 / trials as f64,
            ci_low,
            ci_high,
            trials,
            failures,
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    let (k, n) = (k as f64, n as f64);
    let z2 = Z95 * Z95;
    let denom = n + z2;
    let center = (k + 0.5 * z2) / denom;
    let half = Z95 / denom * (k * (n - k) / n + 0.25 * z2).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

fn count_failures(config: &ExperimentConfig, ctx: &Context, pool: &rayon::ThreadPool) -> Result<usize> {
    pool.install(|| {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|i| trial(config, ctx, i).map(|ok| usize::from(!ok)))
            .try_reduce(|| 0, |a, b| Ok(a + b))
    })
}

/// Monte Carlo error probability over `config.trials` trials on `threads`
/// workers (0 = all cores). The result does not depend on `threads`.
pub fn estimate_pe(config: &ExperimentConfig, threads: usize) -> Result<PeEstimate> {
    let ctx = Context::new(config)?;
    let failures = count_failures(config, &ctx, &pool(threads)?)?;
    Ok(PeEstimate::from_counts(failures, config.trials))
}

/// Isotonic-trend check: weighted residual of the nonincreasing least-squares
/// fit and its parametric-bootstrap p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendTest {
    pub fitted: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub n_grid: Vec<usize>,
    pub estimates: Vec<PeEstimate>,
    /// Noiseless threshold for the configuration, when defined (`p ≥ 3`).
    pub n_star_formula: Option<f64>,
    /// First downward crossing of 1/2, linearly interpolated.
    pub n_cross: Option<f64>,
    pub trend: TrendTest,
}

pub const BOOTSTRAP_RESAMPLES: usize = 999;

/// Error-probability estimates along `n_grid`. Every grid point reuses the
/// same trial seeds, so two sweeps with the same master seed are paired.
pub fn sweep_n(config: &ExperimentConfig, n_grid: &[usize], threads: usize) -> Result<SweepResult> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "n grid must be nonempty and strictly increasing".into(),
        ));
    }
    if matches!(config.design, DesignMode::Fixed(_)) {
        return Err(Error::InvalidParameter(
            "a sweep over n needs Bernoulli designs".into(),
        ));
    }
    let pool = pool(threads)?;
    let mut estimates = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let cfg = config.with_n(n);
        let ctx = Context::new(&cfg)?;
        estimates.push(PeEstimate::from_counts(count_failures(&cfg, &ctx, &pool)?, cfg.trials));
    }
    let n_star_formula = noiseless_threshold(&config.pi, config.p).ok().map(|r| r.n_bound);
    let pe: Vec<f64> = estimates.iter().map(|e| e.pe_hat).collect();
    let trend = isotonic_trend(&estimates, derive_seed(config.master_seed, 0, Purpose::Bootstrap));
    Ok(SweepResult {
        n_grid: n_grid.to_vec(),
        n_cross: first_half_crossing(n_grid, &pe),
        estimates,
        n_star_formula,
        trend,
    })
}

/// Interpolated `n` where the estimate first drops from `≥ 1/2` to `< 1/2`.
pub fn first_half_crossing(n_grid: &[usize], pe: &[f64]) -> Option<f64> {
    (0..pe.len().saturating_sub(1)).find_map(|i| {
        let (a, b) = (pe[i], pe[i + 1]);
        (a >= 0.5 && b < 0.5).then(|| {
            let (x0, x1) = (n_grid[i] as f64, n_grid[i + 1] as f64);
            x0 + (a - 0.5) / (a - b) * (x1 - x0)
        })
    })
}

/// Weighted least-squares nonincreasing fit (pool adjacent violators).
pub fn isotonic_nonincreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // Blocks of (mean, weight, length).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, l2) = blocks[blocks.len() - 1];
            let (m1, w1, l1) = blocks[blocks.len() - 2];
            if m1 >= m2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push(((m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2, l1 + l2));
        }
    }
    blocks.iter().flat_map(|&(m, _, l)| std::iter::repeat_n(m, l)).collect()
}

fn residual(pe: &[f64], fit: &[f64], weights: &[f64]) -> f64 {
    pe.iter()
        .zip(fit)
        .zip(weights)
        .map(|((a, b), w)| w * (a - b) * (a - b))
        .sum()
}

/// Parametric bootstrap under the fitted nonincreasing curve.
pub fn isotonic_trend(estimates: &[PeEstimate], seed: u64) -> TrendTest {
    let pe: Vec<f64> = estimates.iter().map(|e| e.pe_hat).collect();
    let w: Vec<f64> = estimates.iter().map(|e| e.trials as f64).collect();
    let fitted = isotonic_nonincreasing(&pe, &w);
    let statistic = residual(&pe, &fitted, &w);
    let mut r = rng(seed);
    let mut exceed = 0usize;
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let sim: Vec<f64> = estimates
            .iter()
            .zip(&fitted)
            .map(|(e, &f)| {
                let k = Binomial::new(e.trials as u64, f.clamp(0.0, 1.0))
                    .expect("probability in [0, 1]")
                    .sample(&mut r);
                k as f64 / e.trials as f64
            })
            .collect();
        let refit = isotonic_nonincreasing(&sim, &w);
        if residual(&sim, &refit, &w) >= statistic {
            exceed += 1;
        }
    }
    TrendTest {
        fitted,
        statistic,
        p_value: (1 + exceed) as f64 / (BOOTSTRAP_RESAMPLES + 1) as f64,
        resamples: BOOTSTRAP_RESAMPLES,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure1Row {
    pub pi_id: String,
    pub r: usize,
    pub f_r: f64,
}

/// Draw from the flat Dirichlet on the `d`-simplex.
pub fn random_simplex(d: usize, seed: u64) -> Result<Proportions> {
    let mut r = rng(seed);
    let e: Vec<f64> = (0..d).map(|_| r.sample::<f64, _>(Exp1)).collect();
    let s: f64 = e.iter().sum();
    Proportions::new(e.iter().map(|x| x / s).collect())
}

/// `f(r)` for `r = 1..d−1` on the uniform vector, on the two-heavy-labels
/// vector when `d = 10`, and on `num_random` flat-Dirichlet draws.
pub fn figure1_data(d: usize, num_random: usize, seed: u64) -> Result<Vec<Figure1Row>> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("d = {d} must be at least 2")));
    }
    let mut vectors = vec![("uniform".to_string(), Proportions::uniform(d)?)];
    if d == 10 {
        vectors.push(("nonuniform".to_string(), Proportions::fig1()));
    }
    for i in 0..num_random {
        let pi = random_simplex(d, derive_seed(seed, i as u64, Purpose::Simplex))?;
        vectors.push((format!("random{}", i + 1), pi));
    }
    let mut rows = Vec::with_capacity(vectors.len() * (d - 1));
    for (id, pi) in vectors {
        for r in 1..d {
            rows.push(Figure1Row {
                pi_id: id.clone(),
                r,
                f_r: f_ratio(&pi, r)?,
            });
        }
    }
    Ok(rows)
}

/// Six significant digits, plain notation where it stays short.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..6).contains(&e) {
        let s = format!("{:.*}", (5 - e).max(0) as usize, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter(format!("csv output: {e}"))
}

pub fn write_sweep_csv<W: Write>(sweep: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "trials", "failures", "pe_hat", "ci_low", "ci_high"])
        .map_err(csv_err)?;
    for (n, e) in sweep.n_grid.iter().zip(&sweep.estimates) {
        w.write_record([
            n.to_string(),
            e.trials.to_string(),
            e.failures.to_string(),
            sig6(e.pe_hat),
            sig6(e.ci_low),
            sig6(e.ci_high),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidParameter(format!("csv output: {e}")))
}

pub fn write_figure1_csv<W: Write>(rows: &[Figure1Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pi_id", "r", "f_r"]).map_err(csv_err)?;
    for row in rows {
        w.write_record([row.pi_id.clone(), row.r.to_string(), sig6(row.f_r)])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidParameter(format!("csv output: {e}")))
}
