//! Counting and entropy primitives. All logarithms are natural, so every
//! entropy and log-count here is in nats; `0 · log 0` is taken as 0.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::error::{Error, Result};
use crate::model::LabelCounts;
use crate::quad;

const LN_2PI_E: f64 = 2.837_877_066_409_345_5; // ln(2πe)

/// Shannon entropy of a probability vector.
pub fn entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum()
}

/// Stable `log Σ exp(xs)`; `-∞` for an empty or all-`-∞` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        f64::NEG_INFINITY
    } else {
        ln_binomial(n, k)
    }
}

/// `log( (Σc)! / Π c! )`, the log of the number of sequences with the given
/// label counts.
pub fn log_multinomial(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let v = ln_factorial(total as u64) - counts.iter().map(|&c| ln_factorial(c as u64)).sum::<f64>();
    // Exact zero for a single sequence rather than rounding noise.
    if counts.iter().filter(|&&c| c > 0).count() <= 1 {
        0.0
    } else {
        v.max(0.0)
    }
}

/// Per-label numbers of items whose labels stay hidden after a genie reveals
/// the rest. `ell[t] ≤ counts[t]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeniePattern {
    ell: Vec<usize>,
    context: LabelCounts,
}

impl GeniePattern {
    pub fn new(ell: Vec<usize>, context: LabelCounts) -> Result<Self> {
        if ell.len() != context.d() {
            return Err(Error::LengthMismatch {
                expected: context.d(),
                found: ell.len(),
            });
        }
        if let Some(t) = (0..ell.len()).find(|&t| ell[t] > context.counts()[t]) {
            return Err(Error::InvalidParameter(format!(
                "ell[{t}] = {} exceeds the {} items carrying that label",
                ell[t],
                context.counts()[t]
            )));
        }
        Ok(Self { ell, context })
    }

    /// Every label fully hidden: `ell = counts`.
    pub fn full(context: LabelCounts) -> Self {
        Self {
            ell: context.counts().to_vec(),
            context,
        }
    }

    pub fn ell(&self) -> &[usize] {
        &self.ell
    }

    pub fn context(&self) -> &LabelCounts {
        &self.context
    }

    /// Number of labels with at least one hidden item.
    pub fn support_size(&self) -> usize {
        self.ell.iter().filter(|&&l| l > 0).count()
    }
}

/// Log of the number of completions of the hidden positions.
pub fn log_b_ell(pattern: &GeniePattern) -> f64 {
    log_multinomial(pattern.ell())
}

/// Probability mass function on the contiguous support `start, start+1, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePmf {
    start: i64,
    probs: Vec<f64>,
}

impl DiscretePmf {
    pub fn new(start: i64, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidParameter(
                "pmf needs nonnegative probabilities".into(),
            ));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("pmf sums to {s}")));
        }
        Ok(Self { start, probs })
    }

    pub fn point_mass(at: i64) -> Self {
        Self {
            start: at,
            probs: vec![1.0],
        }
    }

    /// Normalises `exp(log_probs)` without overflow.
    fn from_log(start: i64, log_probs: Vec<f64>) -> Self {
        let norm = log_sum_exp(&log_probs);
        Self {
            start,
            probs: log_probs.iter().map(|l| (l - norm).exp()).collect(),
        }
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: i64) -> f64 {
        usize::try_from(x - self.start)
            .ok()
            .and_then(|i| self.probs.get(i).copied())
            .unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &w)| (self.start + i as i64, w))
    }

    pub fn mean(&self) -> f64 {
        self.support().map(|(x, w)| x as f64 * w).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.support().map(|(x, w)| w * (x as f64 - mu).powi(2)).sum()
    }
}

/// Law of the number of special items among `m` draws without replacement
/// from `p` items, `k` of which are special.
pub fn hypergeometric_pmf(k: u64, m: u64, p: u64) -> Result<DiscretePmf> {
    if k > p || m > p {
        return Err(Error::InvalidParameter(format!(
            "hypergeometric needs k, m ≤ p (k={k}, m={m}, p={p})"
        )));
    }
    let lo = (k + m).saturating_sub(p);
    let hi = k.min(m);
    let logs = (lo..=hi)
        .map(|j| ln_choose(k, j) + ln_choose(p - k, m - j))
        .collect();
    Ok(DiscretePmf::from_log(lo as i64, logs))
}

/// `k · (m/p) · ((p−m)/p) · ((p−k)/(p−1))`; never exceeds `k/4`.
pub fn hypergeometric_variance(k: u64, m: u64, p: u64) -> Result<f64> {
    if p < 2 || k > p || m > p {
        return Err(Error::InvalidParameter(format!(
            "hypergeometric variance needs p ≥ 2 and k, m ≤ p (k={k}, m={m}, p={p})"
        )));
    }
    let (k, m, p) = (k as f64, m as f64, p as f64);
    Ok(k * (m / p) * ((p - m) / p) * ((p - k) / (p - 1.0)))
}

pub fn binomial_pmf(n: u64, q: f64) -> Result<DiscretePmf> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "binomial success probability {q} outside [0, 1]"
        )));
    }
    if q == 0.0 {
        return Ok(DiscretePmf::point_mass(0));
    }
    if q == 1.0 {
        return Ok(DiscretePmf::point_mass(n as i64));
    }
    let (lq, lq1) = (q.ln(), (-q).ln_1p());
    let logs = (0..=n)
        .map(|j| ln_choose(n, j) + j as f64 * lq + (n - j) as f64 * lq1)
        .collect();
    Ok(DiscretePmf::from_log(0, logs))
}

pub fn pmf_entropy(pmf: &DiscretePmf) -> f64 {
    entropy(pmf.probs())
}

/// Massey's bound `½ log(2πe (Var + 1/12))` on the entropy of an
/// integer-valued variable.
pub fn massey_bound(variance: f64) -> f64 {
    0.5 * (LN_2PI_E + (variance + 1.0 / 12.0).ln())
}

/// `log Σ_{j ≤ qmax} C(p, j) (d−1)^j`, the log-size of a Hamming ball of
/// radius `qmax` in `[d]^p`.
pub fn log_hamming_ball(p: u64, d: u64, qmax: u64) -> Result<f64> {
    if qmax > p {
        return Err(Error::InvalidParameter(format!(
            "Hamming radius {qmax} exceeds the length {p}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("alphabet size d must be positive".into()));
    }
    if d == 1 || qmax == 0 {
        return Ok(0.0);
    }
    if qmax == p {
        return Ok(p as f64 * (d as f64).ln());
    }
    let ld = ((d - 1) as f64).ln();
    let terms: Vec<f64> = (0..=qmax).map(|j| ln_choose(p, j) + j as f64 * ld).collect();
    Ok(log_sum_exp(&terms))
}

const TOTAL_TOL: f64 = 1e-10;
const WINDOW: f64 = 8.0;
const PANEL: f64 = 0.5;
const CUTOFF: f64 = 40.0;

/// Mutual information `I(U; U + Z)` for `U ~ weights` and `Z ~ N(0, noise_var)`,
/// i.e. `Σ_j w_j KL(N(j, s²) ‖ mixture)`, by adaptive quadrature in
/// standardised coordinates over `±8` standard deviations around each atom.
pub fn mixture_information(weights: &DiscretePmf, noise_var: f64) -> Result<f64> {
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise variance {noise_var} must be positive"
        )));
    }
    let sd = noise_var.sqrt();
    let atoms: Vec<(f64, f64)> = weights
        .support()
        .filter(|&(_, w)| w > 0.0)
        .map(|(x, w)| (x as f64 / sd, w.ln()))
        .collect();
    if atoms.len() <= 1 {
        return Ok(0.0);
    }
    // Atoms further than CUTOFF from u contribute exp(-800) = 0 in f64.
    let integrand = |u: f64| {
        let lo = atoms.partition_point(|&(mu, _)| mu < u - CUTOFF);
        let hi = atoms.partition_point(|&(mu, _)| mu <= u + CUTOFF);
        let atoms = &atoms[lo..hi];
        let max = atoms
            .iter()
            .map(|&(mu, lw)| lw - 0.5 * (u - mu) * (u - mu))
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return 0.0;
        }
        let z: f64 = atoms
            .iter()
            .map(|&(mu, lw)| (lw - 0.5 * (u - mu) * (u - mu) - max).exp())
            .sum();
        let lse = max + z.ln();
        let s: f64 = atoms
            .iter()
            .map(|&(mu, lw)| {
                let e = -0.5 * (u - mu) * (u - mu);
                let mass = (lw + e).exp();
                if mass == 0.0 {
                    0.0
                } else {
                    mass * (e - lse)
                }
            })
            .sum();
        s / (2.0 * std::f64::consts::PI).sqrt()
    };

    let mut windows: Vec<(f64, f64)> = Vec::new();
    for &(mu, _) in &atoms {
        let (lo, hi) = (mu - WINDOW, mu + WINDOW);
        match windows.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => windows.push((lo, hi)),
        }
    }
    let span: f64 = windows.iter().map(|(a, b)| b - a).sum();
    let mut total = 0.0;
    for (a, b) in windows {
        let panels = ((b - a) / PANEL).ceil() as usize;
        total += quad::adaptive_simpson(&integrand, a, b, panels, TOTAL_TOL * (b - a) / span)?;
    }
    Ok(total.max(0.0))
}

/// Differential entropy (nats) of `Σ_j w_j N(j, noise_var)`.
pub fn gaussian_mixture_entropy(weights: &DiscretePmf, noise_var: f64) -> Result<f64> {
    let info = mixture_information(weights, noise_var)?;
    Ok(0.5 * (LN_2PI_E + noise_var.ln()) + info)
}
