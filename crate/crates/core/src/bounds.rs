//! Threshold and converse-bound formulas, evaluated at finite `p`.
//!
//! The underlying statements are asymptotic. Every evaluator here returns the
//! leading-order value: vanishing `o(1)` corrections are dropped, the
//! arbitrarily small margin `η` is taken as zero unless passed explicitly, and
//! the target error probability `δ` is an explicit input. Each
//! [`BoundReport`] records what was dropped in `regime_note`.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::infotheory::{
    binomial_pmf, entropy, ln_choose, log_hamming_ball, log_multinomial, mixture_information,
    pmf_entropy, GeniePattern,
};
use crate::model::{round_proportions, LabelCounts, Proportions};

const LEADING_ORDER: &str = "leading order: o(1) corrections dropped";

/// The `r`-label coarsening of `π`: the largest `d−r+1` proportions merged into
/// one entry, followed by the remaining (smallest) `r−1` proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiReduced {
    pub r: usize,
    pub entries: Vec<f64>,
}

pub fn pi_reduced(pi: &Proportions, r: usize) -> Result<PiReduced> {
    let d = pi.d();
    if r < 1 || r >= d {
        return Err(Error::InvalidParameter(format!(
            "r = {r} must lie in 1..={}",
            d - 1
        )));
    }
    let mut order: Vec<usize> = (0..d).collect();
    let v = pi.as_slice();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let merged: f64 = order[..d - r + 1].iter().map(|&t| v[t]).sum();
    let mut entries = vec![merged];
    entries.extend(order[d - r + 1..].iter().map(|&t| v[t]));
    Ok(PiReduced { r, entries })
}

/// `2 (H(π) − H(π^(r))) / (d − r)`.
pub fn f_ratio(pi: &Proportions, r: usize) -> Result<f64> {
    let red = pi_reduced(pi, r)?;
    Ok(2.0 * (pi.entropy() - entropy(&red.entries)) / (pi.d() - r) as f64)
}

/// `(argmax r, max f(r))`, lowest `r` on exact ties.
pub fn max_f_ratio(pi: &Proportions) -> (usize, f64) {
    let mut best = (1, f64::NEG_INFINITY);
    for r in 1..pi.d() {
        let f = f_ratio(pi, r).expect("r in range");
        if f > best.1 {
            best = (r, f);
        }
    }
    best
}

/// Maximising argument of a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Argmax {
    /// Coarsening level `r` (labels are not involved).
    R(usize),
    /// Label subset `G`, 0-based label indices in increasing order.
    Subset(Vec<usize>),
    /// Genie pattern `ℓ`.
    Ell(Vec<usize>),
    /// Number of hidden defectives `ℓ₁` in the group-testing specialisation.
    Ell1(u64),
}

/// One evaluated bound on the number of tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    /// Tests required; clamped at 0.
    pub n_bound: f64,
    pub argmax: Option<Argmax>,
    pub regime_note: String,
    pub inputs: BTreeMap<String, Value>,
    /// Set when the raw formula was nonpositive and `n_bound` was clamped.
    #[serde(default)]
    pub vacuous: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
}

impl BoundReport {
    fn new(name: &str, raw: f64, argmax: Option<Argmax>, note: impl Into<String>) -> Self {
        let vacuous = !(raw > 0.0);
        Self {
            name: name.to_string(),
            n_bound: if vacuous { 0.0 } else { raw },
            argmax,
            regime_note: note.into(),
            inputs: BTreeMap::new(),
            vacuous,
            details: BTreeMap::new(),
        }
    }

    fn input(mut self, key: &str, value: Value) -> Self {
        self.inputs.insert(key.to_string(), value);
        self
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if (0.0..1.0).contains(&delta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "target error probability delta = {delta} must lie in [0, 1)"
        )))
    }
}

/// Shared scan for the exact and approximate noiseless thresholds:
/// `max_r 2 (p H(π) − p H(π^(r)) − log_ball) / ((d − r) log p)`.
fn threshold_scan(pi: &Proportions, p: usize, log_ball: f64) -> (usize, f64) {
    let h = pi.entropy();
    let lp = (p as f64).ln();
    let d = pi.d();
    let mut best = (1, f64::NEG_INFINITY);
    for r in 1..d {
        let hr = entropy(&pi_reduced(pi, r).expect("r in range").entries);
        let num = p as f64 * (h - hr) - log_ball;
        let v = 2.0 * num / (d - r) as f64 / lp;
        if v > best.1 {
            best = (r, v);
        }
    }
    best
}

/// The noiseless phase-transition point
/// `n* = (p / log p) · max_r 2(H(π) − H(π^(r)))/(d − r)`.
///
/// The same value is both the achievability threshold for Bernoulli designs
/// and the converse, so a single function serves both.
pub fn noiseless_threshold(pi: &Proportions, p: usize) -> Result<BoundReport> {
    if p < 3 {
        return Err(Error::InvalidParameter(format!(
            "threshold needs p ≥ 3, got {p}"
        )));
    }
    let (r, v) = threshold_scan(pi, p, 0.0);
    Ok(BoundReport::new(
        "noiseless_threshold",
        v,
        Some(Argmax::R(r)),
        format!("{LEADING_ORDER}; eta = 0"),
    )
    .input("pi", json!(pi.as_slice()))
    .input("p", json!(p)))
}

/// Lower bound on the exact-recovery error probability of any decoder from
/// counting typical outcomes:
/// `1 − (2√(p log p) + 1)^{n(d−1)} / |B(π)| − 2nd/p²`, clamped to `[0, 1]`.
pub fn counting_pe_lower(counts: &LabelCounts, n: usize) -> f64 {
    let p = counts.p() as f64;
    let d = counts.d() as f64;
    let width = 2.0 * (p * p.ln()).sqrt() + 1.0;
    let log_typical = n as f64 * (d - 1.0) * width.ln();
    let ratio = (log_typical - log_multinomial(counts.counts())).exp();
    let union = 2.0 * n as f64 * d / (p * p);
    (1.0 - ratio - union).clamp(0.0, 1.0)
}

/// `(log_cand · (1 − δ) − log 2) / mi_per_test`, clamped at 0.
pub fn fano_bound(log_cand: f64, mi_per_test: f64, delta: f64) -> Result<BoundReport> {
    if !(mi_per_test > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mutual information per test must be positive, got {mi_per_test}"
        )));
    }
    check_delta(delta)?;
    let raw = (log_cand * (1.0 - delta) - LN_2) / mi_per_test;
    Ok(BoundReport::new("fano", raw, None, "exact at finite p")
        .input("log_candidates", json!(log_cand))
        .input("mi_per_test", json!(mi_per_test))
        .input("delta", json!(delta)))
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("q = {q} must lie in (0, 1)")))
    }
}

/// Per-test information a Bernoulli(`q`) noiseless test carries about the
/// hidden labels of `pattern`: `Σ_t H(Binomial(ℓ_t, q))`.
///
/// All `d` coordinates count. The row weight of a Bernoulli test is random,
/// so no coordinate is implied by the others.
pub fn mi_noiseless_bernoulli(pattern: &GeniePattern, q: f64) -> Result<f64> {
    check_q(q)?;
    pattern
        .ell()
        .iter()
        .filter(|&&l| l > 0)
        .map(|&l| Ok(pmf_entropy(&binomial_pmf(l as u64, q)?)))
        .sum()
}

/// Same quantity under additive `N(0, p·σ²)` noise on every count:
/// `Σ_t [h(Binomial(ℓ_t, q) ⊛ N(0, pσ²)) − ½ log(2πe pσ²)]`.
pub fn mi_gaussian_bernoulli(pattern: &GeniePattern, q: f64, sigma2: f64, p: usize) -> Result<f64> {
    check_q(q)?;
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma2 = {sigma2} must be positive"
        )));
    }
    let var = p as f64 * sigma2;
    pattern
        .ell()
        .iter()
        .filter(|&&l| l > 0)
        .map(|&l| mixture_information(&binomial_pmf(l as u64, q)?, var))
        .sum()
}

/// Necessary number of Bernoulli(`q`) tests in the noiseless model:
/// `(p / log(pq(1−q))) · max_r f(r) · (1 − δ)`.
pub fn bernoulli_noiseless_bound(pi: &Proportions, p: usize, q: f64, delta: f64) -> Result<BoundReport> {
    check_q(q)?;
    check_delta(delta)?;
    let spread = p as f64 * q * (1.0 - q);
    if spread <= 1.0 {
        return Err(Error::Regime(format!(
            "p·q·(1−q) = {spread} ≤ 1; the formula needs q and 1−q well above 1/p"
        )));
    }
    let (r, f) = max_f_ratio(pi);
    let raw = p as f64 / spread.ln() * f * (1.0 - delta);
    Ok(BoundReport::new(
        "bernoulli_noiseless",
        raw,
        Some(Argmax::R(r)),
        format!("{LEADING_ORDER} from the factor (1 - delta - o(1))"),
    )
    .input("pi", json!(pi.as_slice()))
    .input("p", json!(p))
    .input("q", json!(q))
    .input("delta", json!(delta)))
}

/// Genie restriction to a label subset `G`: only items with labels in `G`
/// remain unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetRestriction {
    pub labels: Vec<usize>,
    pub p_g: usize,
    pub pi_g: Proportions,
}

impl SubsetRestriction {
    pub fn new(pi: &Proportions, counts: &LabelCounts, labels: Vec<usize>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidParameter(
                "a label subset needs at least two labels".into(),
            ));
        }
        if let Some(&t) = labels.iter().find(|&&t| t >= pi.d()) {
            return Err(Error::InvalidParameter(format!("label {t} out of range")));
        }
        let mass: f64 = labels.iter().map(|&t| pi.as_slice()[t]).sum();
        let pi_g = Proportions::new(labels.iter().map(|&t| pi.as_slice()[t] / mass).collect())?;
        let p_g = labels.iter().map(|&t| counts.counts()[t]).sum();
        Ok(Self { labels, p_g, pi_g })
    }
}

const MAX_SUBSET_LABELS: usize = 20;

/// Gaussian-noise bound from hiding whole label classes:
/// `max_G p_G H(π_G) / Σ_{t∈G} ½ log(1 + π_t/(4σ²)) · (1 − δ)`,
/// scanning every subset with `|G| ≥ 2`.
pub fn gaussian_subset_bound(pi: &Proportions, p: usize, sigma2: f64, delta: f64) -> Result<BoundReport> {
    check_delta(delta)?;
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma2 = {sigma2} must be positive"
        )));
    }
    let d = pi.d();
    if d > MAX_SUBSET_LABELS {
        return Err(Error::Guard {
            work: 2f64.powi(d as i32),
            limit: 2f64.powi(MAX_SUBSET_LABELS as i32),
        });
    }
    let counts = round_proportions(pi, p)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0u32..(1 << d) {
        if mask.count_ones() < 2 {
            continue;
        }
        let labels: Vec<usize> = (0..d).filter(|t| mask >> t & 1 == 1).collect();
        let sub = SubsetRestriction::new(pi, &counts, labels)?;
        let denom: f64 = sub
            .labels
            .iter()
            .map(|&t| 0.5 * (pi.as_slice()[t] / (4.0 * sigma2)).ln_1p())
            .sum();
        let v = sub.p_g as f64 * sub.pi_g.entropy() / denom;
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, sub.labels));
        }
    }
    let (v, g) = best.expect("d ≥ 2 gives at least one subset");
    Ok(BoundReport::new(
        "gaussian_subset",
        v * (1.0 - delta),
        Some(Argmax::Subset(g)),
        format!("{LEADING_ORDER} from the factor (1 - delta - o(1)); p_G uses the rounded counts"),
    )
    .input("pi", json!(pi.as_slice()))
    .input("p", json!(p))
    .input("sigma2", json!(sigma2))
    .input("delta", json!(delta)))
}

/// Gaussian-noise bound from hiding a single item: `4pσ² log p · (1 − δ)`.
///
/// With `first_count = Some(k)` (the number of items carrying label 1) the
/// report also carries the finite-`p` form it is derived from,
/// `(log(k+1)(1−δ) − log 2) · 4pσ²`, and the slightly sharper variant that
/// divides by `log(1 + 1/(4pσ²))` instead of its upper bound `1/(4pσ²)`.
pub fn gaussian_single_item_bound(
    p: usize,
    sigma2: f64,
    delta: f64,
    first_count: Option<usize>,
) -> Result<BoundReport> {
    check_delta(delta)?;
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma2 = {sigma2} must be positive"
        )));
    }
    let scale = 4.0 * p as f64 * sigma2;
    let raw = scale * (p as f64).ln() * (1.0 - delta);
    let mut report = BoundReport::new(
        "gaussian_single_item",
        raw,
        Some(Argmax::Ell(vec![first_count.unwrap_or(0), 1])),
        format!("{LEADING_ORDER}: log(p*pi_1 + 1) replaced by log p"),
    )
    .input("p", json!(p))
    .input("sigma2", json!(sigma2))
    .input("delta", json!(delta));
    if let Some(k) = first_count {
        let num = ((k as f64 + 1.0).ln() * (1.0 - delta) - LN_2).max(0.0);
        report = report
            .input("first_count", json!(k))
            .detail("fano_finite_p", num * scale)
            .detail("fano_finite_p_log1p", num / (1.0 / scale).ln_1p());
    }
    Ok(report)
}

/// Which converse the approximate-recovery threshold is built on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApproxVariant {
    /// Counting converse with margin `η` (0 for the leading-order value).
    Noiseless { eta: f64 },
    /// Fano converse with full genie pattern `ℓ = counts`.
    Fano { mi_per_test: f64, delta: f64 },
}

/// Tests needed to recover `β` up to `qmax` label errors.
///
/// When `qmax ≥ p − max_t counts[t]` the constant decoder that outputs the most
/// common label everywhere already succeeds with zero tests, so the report is
/// 0 (flagged vacuous) regardless of the formula.
pub fn approx_recovery_threshold(
    pi: &Proportions,
    p: usize,
    qmax: usize,
    variant: ApproxVariant,
) -> Result<BoundReport> {
    if qmax > p {
        return Err(Error::InvalidParameter(format!(
            "qmax = {qmax} exceeds p = {p}"
        )));
    }
    if p < 3 {
        return Err(Error::InvalidParameter(format!(
            "threshold needs p ≥ 3, got {p}"
        )));
    }
    let counts = round_proportions(pi, p)?;
    let ball = log_hamming_ball(p as u64, pi.d() as u64, qmax as u64)?;
    let majority = *counts.counts().iter().max().expect("d ≥ 2");
    let trivial = qmax > 0 && qmax >= p - majority;

    let mut report = match variant {
        ApproxVariant::Noiseless { eta } => {
            if !(0.0..1.0).contains(&eta) {
                return Err(Error::InvalidParameter(format!("eta = {eta} must lie in [0, 1)")));
            }
            let (r, v) = threshold_scan(pi, p, ball);
            BoundReport::new(
                "approx_noiseless",
                v * (1.0 - eta),
                Some(Argmax::R(r)),
                format!("{LEADING_ORDER}; eta = {eta}"),
            )
            .input("eta", json!(eta))
        }
        ApproxVariant::Fano { mi_per_test, delta } => {
            let log_cand = log_multinomial(counts.counts()) - ball;
            let mut f = fano_bound(log_cand, mi_per_test, delta)?;
            f.name = "approx_fano".into();
            f.argmax = Some(Argmax::Ell(counts.counts().to_vec()));
            f.regime_note = "exact at finite p with ell = counts".into();
            f
        }
    };
    if trivial {
        report.n_bound = 0.0;
        report.vacuous = true;
        report.regime_note.push_str(
            "; qmax reaches the minority total, so declaring the most common label everywhere succeeds with no tests",
        );
    }
    Ok(report
        .input("pi", json!(pi.as_slice()))
        .input("p", json!(p))
        .input("qmax", json!(qmax))
        .detail("log_hamming_ball", ball))
}

/// Group-testing specialisation (`d = 2`, binary outcomes depending only on the
/// number of defectives): `max_{ℓ₁ ∈ 1..=k} (log C(p−k+ℓ₁, ℓ₁)(1−δ) − log 2) / I(ℓ₁)`.
pub fn group_testing_bound<F>(p: u64, k: u64, delta: f64, channel_mi: F) -> Result<BoundReport>
where
    F: Fn(u64) -> f64,
{
    check_delta(delta)?;
    if k < 1 || k > p {
        return Err(Error::InvalidParameter(format!(
            "need 1 ≤ k ≤ p (k = {k}, p = {p})"
        )));
    }
    let mut best = (1, f64::NEG_INFINITY);
    for l1 in 1..=k {
        let mi = channel_mi(l1);
        if !(mi > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "channel information must be positive, got {mi} at l1 = {l1}"
            )));
        }
        let v = (ln_choose(p - k + l1, l1) * (1.0 - delta) - LN_2) / mi;
        if v > best.1 {
            best = (l1, v);
        }
    }
    Ok(BoundReport::new(
        "group_testing",
        best.1,
        Some(Argmax::Ell1(best.0)),
        "exact at finite p",
    )
    .input("p", json!(p))
    .input("k", json!(k))
    .input("delta", json!(delta)))
}

/// Observation channel for [`bernoulli_fano_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BernoulliChannel {
    Noiseless,
    Gaussian { sigma2: f64 },
}

const MAX_PATTERNS: f64 = 2e6;

/// Fano converse for Bernoulli(`q`) designs with the exact per-test
/// information, maximised over genie patterns `ℓ` with at least two nonzero
/// entries. Scans every `ℓ ≤ counts` when there are at most 2·10⁶ of them;
/// otherwise restricts to `ℓ_t ∈ {0, counts[t]}` plus the single-item
/// patterns `(counts[a], 1)` on label pairs.
pub fn bernoulli_fano_bound(
    counts: &LabelCounts,
    q: f64,
    channel: BernoulliChannel,
    delta: f64,
) -> Result<BoundReport> {
    check_q(q)?;
    check_delta(delta)?;
    let p = counts.p();
    let c = counts.counts();
    let cmax = *c.iter().max().expect("nonempty");
    // Information is additive over labels and depends on ℓ_t alone.
    let table: Vec<f64> = (0..=cmax as u64)
        .map(|l| {
            let pmf = binomial_pmf(l, q)?;
            match channel {
                BernoulliChannel::Noiseless => Ok(pmf_entropy(&pmf)),
                BernoulliChannel::Gaussian { sigma2 } => {
                    mixture_information(&pmf, p as f64 * sigma2)
                }
            }
        })
        .collect::<Result<_>>()?;

    let total: f64 = c.iter().map(|&x| x as f64 + 1.0).product();
    let exhaustive = total <= MAX_PATTERNS;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut consider = |ell: &[usize]| {
        if ell.iter().filter(|&&l| l > 0).count() < 2 {
            return;
        }
        let mi: f64 = ell.iter().map(|&l| table[l]).sum();
        if !(mi > 0.0) {
            return;
        }
        let v = (log_multinomial(ell) * (1.0 - delta) - LN_2) / mi;
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, ell.to_vec()));
        }
    };
    if exhaustive {
        let mut ell = vec![0usize; c.len()];
        loop {
            consider(&ell);
            let mut t = 0;
            while t < ell.len() && ell[t] == c[t] {
                ell[t] = 0;
                t += 1;
            }
            if t == ell.len() {
                break;
            }
            ell[t] += 1;
        }
    } else {
        let d = c.len();
        for mask in 0u64..(1u64 << d.min(MAX_SUBSET_LABELS)) {
            let ell: Vec<usize> = (0..d).map(|t| if mask >> t & 1 == 1 { c[t] } else { 0 }).collect();
            consider(&ell);
        }
        for a in 0..d {
            for b in 0..d {
                if a != b && c[b] > 0 {
                    let mut ell = vec![0; d];
                    ell[a] = c[a];
                    ell[b] = 1;
                    consider(&ell);
                }
            }
        }
    }
    let (v, ell) = best.ok_or_else(|| {
        Error::InvalidParameter("need at least two labels with items".into())
    })?;
    let (name, sigma2) = match channel {
        BernoulliChannel::Noiseless => ("bernoulli_fano_noiseless", None),
        BernoulliChannel::Gaussian { sigma2 } => ("bernoulli_fano_gaussian", Some(sigma2)),
    };
    let note = if exhaustive {
        "exact at finite p; all genie patterns scanned"
    } else {
        "exact at finite p; genie patterns restricted to whole classes and single items"
    };
    let mut r = BoundReport::new(name, v, Some(Argmax::Ell(ell)), note)
        .input("counts", json!(c))
        .input("q", json!(q))
        .input("delta", json!(delta));
    if let Some(s) = sigma2 {
        r = r.input("sigma2", json!(s));
    }
    Ok(r)
}
