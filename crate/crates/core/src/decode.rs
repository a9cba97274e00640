//! Exhaustive maximum-likelihood decoding over `B(π)` and the exact
//! noiseless error-probability oracle. Desk scale only: both walk every
//! candidate and refuse to start past 10⁷ of them.

use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::infotheory::log_multinomial;
use crate::model::{LabelAssignment, LabelCounts, NoiseModel, ObservationMatrix, TestDesign};
use crate::seed;

pub const CANDIDATE_LIMIT: f64 = 1e7;

/// Lexicographic walk over every label sequence with the given counts.
#[derive(Debug, Clone)]
pub struct Candidates {
    next: Option<Vec<usize>>,
    d: usize,
}

impl Iterator for Candidates {
    type Item = LabelAssignment;

    fn next(&mut self) -> Option<LabelAssignment> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        if next_permutation(&mut succ) {
            self.next = Some(succ);
        }
        Some(LabelAssignment::from_raw(cur, self.d))
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|&x| x > v[i]).expect("v[i+1] > v[i]");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// `|B(π)|` for `counts`, or a guard error above [`CANDIDATE_LIMIT`].
pub fn candidate_count(counts: &LabelCounts) -> Result<usize> {
    let log_size = log_multinomial(counts.counts());
    let size = log_size.exp().round();
    if size > CANDIDATE_LIMIT {
        return Err(Error::Guard {
            work: size,
            limit: CANDIDATE_LIMIT,
        });
    }
    Ok(size as usize)
}

/// Every `b ∈ B(π)` once, in lexicographic order.
pub fn enumerate_b(counts: &LabelCounts) -> Result<Candidates> {
    candidate_count(counts)?;
    Ok(Candidates {
        next: Some(first_candidate(counts)),
        d: counts.d(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub beta_hat: LabelAssignment,
    /// Size of the argmax set the estimate was drawn from.
    pub tie_count: usize,
    /// Log-likelihood of `beta_hat`, up to candidate-independent constants.
    pub log_likelihood: f64,
}

/// `ln Q(x)` for the standard normal upper tail, accurate far into the tail.
fn ln_upper_tail(x: f64) -> f64 {
    if x < 30.0 {
        (0.5 * erfc(x * FRAC_1_SQRT_2)).ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - (x * (2.0 * std::f64::consts::PI).sqrt()).ln() + (-1.0 / x2 + 3.0 / (x2 * x2)).ln_1p()
    }
}

/// `ln P(a ≤ Z < b)` for standard normal `Z`, `a < b`, infinities allowed.
fn ln_normal_interval(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        let (la, lb) = (ln_upper_tail(a), ln_upper_tail(b));
        la + (-(lb - la).exp()).ln_1p()
    } else if b < 0.0 {
        ln_normal_interval(-b, -a)
    } else {
        // Straddles 0, so the mass is at least min(Φ(b) − ½, ½ − Φ(a)) and no
        // cancellation occurs.
        (1.0 - 0.5 * erfc(-a * FRAC_1_SQRT_2) - 0.5 * erfc(b * FRAC_1_SQRT_2)).ln()
    }
}

/// Per-entry log-likelihood of observation `y` given the true count `c`.
fn entry_ll(noise: &NoiseModel, sd: f64, p: usize, y: f64, c: usize) -> f64 {
    match noise {
        NoiseModel::Noiseless => {
            if y == c as f64 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
        NoiseModel::Gaussian { .. } => {
            let r = y - c as f64;
            -0.5 * r * r / (sd * sd)
        }
        NoiseModel::ClippedGaussian { .. } => {
            let lo = if y <= 0.0 { f64::NEG_INFINITY } else { y - 0.5 };
            let hi = if y >= p as f64 { f64::INFINITY } else { y + 0.5 };
            ln_normal_interval((lo - c as f64) / sd, (hi - c as f64) / sd)
        }
    }
}

fn flatten(y: &ObservationMatrix, n: usize, d: usize, noise: &NoiseModel) -> Result<Vec<f64>> {
    let rows: Vec<Vec<f64>> = match (y, noise) {
        (ObservationMatrix::Integer(r), _) => r
            .iter()
            .map(|row| row.iter().map(|&v| v as f64).collect())
            .collect(),
        (ObservationMatrix::Real(r), NoiseModel::Gaussian { .. }) => r.clone(),
        (ObservationMatrix::Real(_), _) => {
            return Err(Error::InvalidParameter(
                "real-valued observations need the Gaussian channel".into(),
            ))
        }
    };
    if rows.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: rows.len(),
        });
    }
    let mut flat = Vec::with_capacity(n * d);
    for row in rows {
        if row.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                found: row.len(),
            });
        }
        flat.extend(row);
    }
    Ok(flat)
}

/// Uniform choice among the running argmax, by reservoir sampling over
/// candidates offered in enumeration order.
struct TieBreak {
    rng: rand_chacha::ChaCha8Rng,
    best: f64,
    ties: usize,
}

impl TieBreak {
    fn new(seed: u64) -> Self {
        Self {
            rng: seed::rng(seed),
            best: f64::NEG_INFINITY,
            ties: 0,
        }
    }

    /// Whether the offered candidate becomes the current pick.
    fn offer(&mut self, ll: f64) -> bool {
        if ll == f64::NEG_INFINITY || (self.ties > 0 && ll < self.best) {
            return false;
        }
        if self.ties == 0 || ll > self.best {
            self.best = ll;
            self.ties = 1;
            return true;
        }
        self.ties += 1;
        self.rng.random_range(0..self.ties) == 0
    }
}

fn first_candidate(counts: &LabelCounts) -> Vec<usize> {
    counts
        .counts()
        .iter()
        .enumerate()
        .flat_map(|(t, &c)| std::iter::repeat_n(t, c))
        .collect()
}

/// Calls `f` on every `b ∈ B(π)` in lexicographic order without allocating.
fn visit_candidates(counts: &LabelCounts, mut f: impl FnMut(&[usize])) -> Result<()> {
    candidate_count(counts)?;
    let mut v = first_candidate(counts);
    loop {
        f(&v);
        if !next_permutation(&mut v) {
            return Ok(());
        }
    }
}

fn row_items(design: &TestDesign) -> Vec<Vec<usize>> {
    design
        .rows()
        .iter()
        .map(|r| (0..design.p()).filter(|&j| r.get(j)).collect())
        .collect()
}

fn fill_counts(items: &[Vec<usize>], labels: &[usize], d: usize, out: &mut [usize]) {
    out.fill(0);
    for (i, row) in items.iter().enumerate() {
        for &j in row {
            out[i * d + labels[j]] += 1;
        }
    }
}

fn score(noise: &NoiseModel, sd: f64, p: usize, obs: &[f64], model: &[usize]) -> f64 {
    let mut ll = 0.0;
    for (&yv, &c) in obs.iter().zip(model) {
        ll += entry_ll(noise, sd, p, yv, c);
        if ll == f64::NEG_INFINITY {
            break;
        }
    }
    ll
}

fn check_lengths(design: &TestDesign, counts: &LabelCounts) -> Result<()> {
    if counts.p() != design.p() {
        return Err(Error::LengthMismatch {
            expected: design.p(),
            found: counts.p(),
        });
    }
    Ok(())
}

/// Maximum-likelihood estimate of `β` over `B(π)`, ties broken uniformly at
/// random with `tie_seed`.
pub fn ml_decode(
    y: &ObservationMatrix,
    design: &TestDesign,
    counts: &LabelCounts,
    noise: &NoiseModel,
    tie_seed: u64,
) -> Result<DecodeResult> {
    noise.validate()?;
    check_lengths(design, counts)?;
    let d = counts.d();
    let p = design.p();
    let obs = flatten(y, design.n(), d, noise)?;
    let sd = noise.variance(p).sqrt();
    let items = row_items(design);

    let mut tb = TieBreak::new(tie_seed);
    let mut pick: Option<Vec<usize>> = None;
    let mut model = vec![0; obs.len()];
    visit_candidates(counts, |labels| {
        fill_counts(&items, labels, d, &mut model);
        if tb.offer(score(noise, sd, p, &obs, &model)) {
            match &mut pick {
                Some(v) => v.copy_from_slice(labels),
                None => pick = Some(labels.to_vec()),
            }
        }
    })?;
    let labels = pick.ok_or(Error::Inconsistent)?;
    Ok(DecodeResult {
        beta_hat: LabelAssignment::from_raw(labels, d),
        tie_count: tb.ties,
        log_likelihood: tb.best,
    })
}

/// Every candidate of `B(π)` with its noiseless observation under one fixed
/// design, precomputed for repeated decoding. Decoding through the table
/// returns exactly what [`ml_decode`] returns for the same seed.
#[derive(Debug, Clone)]
pub struct CandidateTable {
    d: usize,
    p: usize,
    n: usize,
    labels: Vec<u8>,
    observations: Vec<usize>,
    classes: HashMap<Vec<usize>, Vec<u32>>,
}

impl CandidateTable {
    pub fn build(design: &TestDesign, counts: &LabelCounts) -> Result<Self> {
        check_lengths(design, counts)?;
        if counts.d() > u8::MAX as usize + 1 {
            return Err(Error::InvalidParameter("too many labels for a candidate table".into()));
        }
        let (d, p, n) = (counts.d(), design.p(), design.n());
        let total = candidate_count(counts)?;
        let items = row_items(design);
        let mut labels = Vec::with_capacity(total * p);
        let mut observations = vec![0; total * n * d];
        let mut classes: HashMap<Vec<usize>, Vec<u32>> = HashMap::new();
        let mut k = 0usize;
        visit_candidates(counts, |b| {
            labels.extend(b.iter().map(|&t| t as u8));
            let obs = &mut observations[k * n * d..(k + 1) * n * d];
            fill_counts(&items, b, d, obs);
            classes.entry(obs.to_vec()).or_default().push(k as u32);
            k += 1;
        })?;
        Ok(Self {
            d,
            p,
            n,
            labels,
            observations,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len() / self.p.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn assignment(&self, k: usize) -> LabelAssignment {
        let b = self.labels[k * self.p..(k + 1) * self.p].iter().map(|&t| t as usize).collect();
        LabelAssignment::from_raw(b, self.d)
    }

    pub fn decode(&self, y: &ObservationMatrix, noise: &NoiseModel, tie_seed: u64) -> Result<DecodeResult> {
        noise.validate()?;
        let obs = flatten(y, self.n, self.d, noise)?;
        let mut tb = TieBreak::new(tie_seed);
        let mut pick = None;
        if let NoiseModel::Noiseless = noise {
            let key: Vec<usize> = match y {
                ObservationMatrix::Integer(rows) => rows.concat(),
                ObservationMatrix::Real(_) => unreachable!("rejected by flatten"),
            };
            for &k in self.classes.get(&key).ok_or(Error::Inconsistent)? {
                if tb.offer(0.0) {
                    pick = Some(k as usize);
                }
            }
        } else {
            let sd = noise.variance(self.p).sqrt();
            let stride = self.n * self.d;
            for k in 0..self.len() {
                let model = &self.observations[k * stride..(k + 1) * stride];
                if tb.offer(score(noise, sd, self.p, &obs, model)) {
                    pick = Some(k);
                }
            }
        }
        let k = pick.ok_or(Error::Inconsistent)?;
        Ok(DecodeResult {
            beta_hat: self.assignment(k),
            tie_count: tb.ties,
            log_likelihood: tb.best,
        })
    }
}

/// Whether `beta_hat` is within Hamming distance `qmax` of `beta`.
pub fn approx_success(beta_hat: &LabelAssignment, beta: &LabelAssignment, qmax: usize) -> Result<bool> {
    Ok(beta_hat.hamming(beta)? <= qmax)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Error probability of ML decoding with uniform tie-breaking, `β` uniform
    /// on `B(π)`, noiseless channel.
    pub pe_exact: f64,
    /// Probability that the observation does not determine `β` uniquely.
    pub pe_unique: f64,
    pub candidates_total: usize,
}

const PAIR_LIMIT: f64 = 1e9;

/// Exact error probability of noiseless ML decoding for a fixed design.
///
/// Candidates with the same observation are indistinguishable; the decoder
/// picks uniformly among them. For `qmax > 0` a pick counts as a success when
/// it lies within Hamming distance `qmax` of the truth.
pub fn exact_pe_oracle(design: &TestDesign, counts: &LabelCounts, qmax: usize) -> Result<OracleResult> {
    let table = CandidateTable::build(design, counts)?;
    let total = table.len();
    let total_f = total as f64;
    let ambiguous: usize = table.classes.values().map(Vec::len).filter(|&s| s > 1).sum();
    let pe_unique = ambiguous as f64 / total_f;

    let pe_exact = if qmax >= counts.p() {
        0.0
    } else if qmax == 0 {
        1.0 - table.classes.len() as f64 / total_f
    } else {
        let pairs: f64 = table.classes.values().map(|c| (c.len() as f64).powi(2)).sum();
        if pairs > PAIR_LIMIT {
            return Err(Error::Guard {
                work: pairs,
                limit: PAIR_LIMIT,
            });
        }
        let mut success = 0.0;
        let p = counts.p();
        let row = |k: u32| &table.labels[k as usize * p..(k as usize + 1) * p];
        for members in table.classes.values() {
            let mut within = 0usize;
            for &a in members {
                for &b in members {
                    if row(a).iter().zip(row(b)).filter(|(x, y)| x != y).count() <= qmax {
                        within += 1;
                    }
                }
            }
            success += within as f64 / members.len() as f64;
        }
        (1.0 - success / total_f).max(0.0)
    };
    Ok(OracleResult {
        pe_exact,
        pe_unique,
        candidates_total: total,
    })
}

#[cfg(test)]
fn clipped_cell_ln_prob(y: usize, c: usize, p: usize, sigma2: f64) -> f64 {
    let noise = NoiseModel::ClippedGaussian { sigma2 };
    entry_ll(&noise, noise.variance(p).sqrt(), p, y as f64, c)
}
