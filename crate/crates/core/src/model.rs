//! Generative model: label proportions, uniformly random label vectors with
//! fixed empirical counts, test designs and the observation channels.
//!
//! Labels are 0-based internally (`0..d`); the CLI and Python surface keep the
//! same convention.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

const SIMPLEX_TOL: f64 = 1e-9;

/// Label proportions `π`, strictly positive and summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Proportions {
    pi: Vec<f64>,
}

impl Proportions {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.len() < 2 {
            return Err(Error::InvalidProportions(format!(
                "need at least 2 labels, got {}",
                pi.len()
            )));
        }
        if let Some(bad) = pi.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::InvalidProportions(format!(
                "entries must be strictly positive, found {bad}"
            )));
        }
        let sum: f64 = pi.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidProportions(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(Self { pi })
    }

    pub fn uniform(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidProportions(format!(
                "need at least 2 labels, got {d}"
            )));
        }
        Ok(Self {
            pi: vec![1.0 / d as f64; d],
        })
    }

    /// The highly non-uniform ten-label vector `(0.49, 0.49, 0.0025 × 8)`.
    pub fn fig1() -> Self {
        let mut pi = vec![0.49, 0.49];
        pi.extend(std::iter::repeat_n(0.0025, 8));
        Self { pi }
    }

    /// Empirical proportions `counts / p` of a label-count vector. Fails when
    /// some label is absent.
    pub fn from_counts(counts: &LabelCounts) -> Result<Self> {
        let p = counts.p() as f64;
        Self::new(counts.counts().iter().map(|&c| c as f64 / p).collect())
    }

    pub fn d(&self) -> usize {
        self.pi.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        crate::infotheory::entropy(&self.pi)
    }
}

impl TryFrom<Vec<f64>> for Proportions {
    type Error = Error;
    fn try_from(pi: Vec<f64>) -> Result<Self> {
        Self::new(pi)
    }
}

impl From<Proportions> for Vec<f64> {
    fn from(pi: Proportions) -> Self {
        pi.pi
    }
}

impl TryFrom<Vec<usize>> for LabelCounts {
    type Error = Error;
    fn try_from(counts: Vec<usize>) -> Result<Self> {
        Self::new(counts)
    }
}

impl From<LabelCounts> for Vec<usize> {
    fn from(c: LabelCounts) -> Self {
        c.counts
    }
}

/// Number of items carrying each label; sums to the population size `p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LabelCounts {
    counts: Vec<usize>,
}

impl LabelCounts {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidParameter("empty label counts".into()));
        }
        if counts.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidParameter(
                "label counts must sum to a positive population".into(),
            ));
        }
        Ok(Self { counts })
    }

    pub fn p(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn d(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
}

/// Largest-remainder rounding of `π·p` to integer counts summing to `p`.
/// Remainders are handed out by decreasing fractional part, ties going to the
/// lowest label index.
pub fn round_proportions(pi: &Proportions, p: usize) -> Result<LabelCounts> {
    let d = pi.d();
    if p < d {
        return Err(Error::InvalidParameter(format!(
            "population p = {p} is smaller than the number of labels d = {d}"
        )));
    }
    let quotas: Vec<f64> = pi.as_slice().iter().map(|&x| x * p as f64).collect();
    // Absorb representation error so that exact multiples do not fall a unit short.
    let mut counts: Vec<usize> = quotas.iter().map(|&x| (x + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    if assigned <= p {
        for &t in order.iter().take(p - assigned) {
            counts[t] += 1;
        }
    } else {
        // Only reachable through the epsilon above on pathological inputs.
        for &t in order.iter().rev().take(assigned - p) {
            counts[t] -= 1;
        }
    }
    LabelCounts::new(counts)
}

/// A label vector `β` of length `p` with labels in `0..d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelAssignment {
    labels: Vec<usize>,
    d: usize,
}

impl LabelAssignment {
    pub fn new(labels: Vec<usize>, d: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= d) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} out of range for d = {d}"
            )));
        }
        Ok(Self { labels, d })
    }

    pub(crate) fn from_raw(labels: Vec<usize>, d: usize) -> Self {
        debug_assert!(labels.iter().all(|&l| l < d));
        Self { labels, d }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.d];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    pub fn hamming(&self, other: &LabelAssignment) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(self
            .labels
            .iter()
            .zip(&other.labels)
            .filter(|(a, b)| a != b)
            .count())
    }

    /// One bit mask per label, for popcount-based counting against design rows.
    pub fn label_masks(&self) -> Vec<BitRow> {
        let mut masks = vec![BitRow::zeros(self.len()); self.d];
        for (j, &l) in self.labels.iter().enumerate() {
            masks[l].set(j, true);
        }
        masks
    }
}

/// Uniform draw from all label sequences with the given counts: lay the
/// labels out in order and Fisher–Yates shuffle.
pub fn sample_beta(counts: &LabelCounts, seed: u64) -> LabelAssignment {
    let mut labels = Vec::with_capacity(counts.p());
    for (t, &c) in counts.counts().iter().enumerate() {
        labels.extend(std::iter::repeat_n(t, c));
    }
    labels.shuffle(&mut seed::rng(seed));
    LabelAssignment::from_raw(labels, counts.d())
}

/// Fixed-length bit vector packed into `u64` words.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitRow {
    words: Vec<u64>,
    len: usize,
}

impl BitRow {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut row = Self::zeros(bits.len());
        for (j, &b) in bits.iter().enumerate() {
            row.set(j, b);
        }
        row
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        self.words[j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, j: usize, value: bool) {
        let bit = 1u64 << (j % 64);
        if value {
            self.words[j / 64] |= bit;
        } else {
            self.words[j / 64] &= !bit;
        }
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    #[inline]
    pub fn and_popcount(&self, other: &BitRow) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|j| self.get(j)).collect()
    }
}

impl std::fmt::Display for BitRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for j in 0..self.len {
            f.write_str(if self.get(j) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignProvenance {
    Bernoulli { q: f64, seed: u64 },
    Explicit,
}

impl Serialize for BitRow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitRow {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(serde::de::Error::custom(format!("bad bit `{other}`"))),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(BitRow::from_bools(&bits))
    }
}

#[derive(Deserialize)]
struct RawDesign {
    p: usize,
    rows: Vec<BitRow>,
    provenance: DesignProvenance,
}

impl TryFrom<RawDesign> for TestDesign {
    type Error = Error;

    fn try_from(raw: RawDesign) -> Result<Self> {
        let mut x = TestDesign::explicit(raw.p, raw.rows)?;
        x.provenance = raw.provenance;
        Ok(x)
    }
}

/// The `n × p` binary measurement matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDesign")]
pub struct TestDesign {
    p: usize,
    rows: Vec<BitRow>,
    provenance: DesignProvenance,
}

impl TestDesign {
    pub fn explicit(p: usize, rows: Vec<BitRow>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::LengthMismatch {
                expected: p,
                found: r.len(),
            });
        }
        Ok(Self {
            p,
            rows,
            provenance: DesignProvenance::Explicit,
        })
    }

    /// Parses rows written as strings of `0`/`1` separated by commas, e.g.
    /// `"1100,0011"`.
    pub fn parse_rows(spec: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let bits = part
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(Error::InvalidParameter(format!(
                        "design rows may only contain 0/1, found {other:?}"
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(BitRow::from_bools(&bits));
        }
        let p = rows
            .first()
            .map(BitRow::len)
            .ok_or_else(|| Error::InvalidParameter("design has no rows".into()))?;
        Self::explicit(p, rows)
    }

    pub fn empty(p: usize) -> Self {
        Self {
            p,
            rows: Vec::new(),
            provenance: DesignProvenance::Explicit,
        }
    }

    /// Singleton tests: row `j` contains only item `j`.
    pub fn identity(p: usize) -> Self {
        let rows = (0..p)
            .map(|j| {
                let mut r = BitRow::zeros(p);
                r.set(j, true);
                r
            })
            .collect();
        Self {
            p,
            rows,
            provenance: DesignProvenance::Explicit,
        }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn rows(&self) -> &[BitRow] {
        &self.rows
    }

    pub fn provenance(&self) -> &DesignProvenance {
        &self.provenance
    }

    /// A copy with only the first `n` rows.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            p: self.p,
            rows: self.rows[..n.min(self.rows.len())].to_vec(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn with_row(&self, row: BitRow) -> Result<Self> {
        let mut rows = self.rows.clone();
        rows.push(row);
        Self::explicit(self.p, rows)
    }
}

/// `n` tests on `p` items, each item included independently with probability `q`.
pub fn bernoulli_design(n: usize, p: usize, q: f64, seed: u64) -> Result<TestDesign> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "inclusion probability q = {q} must lie in (0, 1)"
        )));
    }
    let mut rng = seed::rng(seed);
    let rows = (0..n)
        .map(|_| {
            let mut row = BitRow::zeros(p);
            for j in 0..p {
                if rng.random_bool(q) {
                    row.set(j, true);
                }
            }
            row
        })
        .collect();
    Ok(TestDesign {
        p,
        rows,
        provenance: DesignProvenance::Bernoulli { q, seed },
    })
}

/// Per-label counts of the items included in one test.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountVector(pub Vec<usize>);

pub fn count_labels(beta: &LabelAssignment, row: &BitRow) -> Result<CountVector> {
    if beta.len() != row.len() {
        return Err(Error::LengthMismatch {
            expected: beta.len(),
            found: row.len(),
        });
    }
    let mut counts = vec![0; beta.d()];
    for (j, &l) in beta.labels().iter().enumerate() {
        if row.get(j) {
            counts[l] += 1;
        }
    }
    Ok(CountVector(counts))
}

/// Writes the count vectors of every design row for the label masks of one
/// assignment into `out` (row-major, `n × d`).
#[inline]
pub(crate) fn counts_from_masks(masks: &[BitRow], design: &TestDesign, out: &mut Vec<usize>) {
    out.clear();
    for row in design.rows() {
        out.extend(masks.iter().map(|m| m.and_popcount(row)));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    Noiseless,
    /// Adds independent `N(0, p·σ²)` noise to every count.
    Gaussian { sigma2: f64 },
    /// Gaussian noise, rounded half away from zero and clipped to `0..=p`.
    ClippedGaussian { sigma2: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Noiseless => Ok(()),
            NoiseModel::Gaussian { sigma2 } | NoiseModel::ClippedGaussian { sigma2 } => {
                if sigma2 > 0.0 && sigma2.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "noise level sigma2 = {sigma2} must be positive"
                    )))
                }
            }
        }
    }

    /// Per-entry noise variance for a population of size `p`.
    pub fn variance(&self, p: usize) -> f64 {
        match *self {
            NoiseModel::Noiseless => 0.0,
            NoiseModel::Gaussian { sigma2 } | NoiseModel::ClippedGaussian { sigma2 } => {
                p as f64 * sigma2
            }
        }
    }
}

/// Outcome matrix `Y`, one `d`-entry row per test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rows", rename_all = "snake_case")]
pub enum ObservationMatrix {
    Integer(Vec<Vec<usize>>),
    Real(Vec<Vec<f64>>),
}

impl ObservationMatrix {
    pub fn n(&self) -> usize {
        match self {
            ObservationMatrix::Integer(r) => r.len(),
            ObservationMatrix::Real(r) => r.len(),
        }
    }
}

pub fn observe(
    beta: &LabelAssignment,
    design: &TestDesign,
    noise: &NoiseModel,
    seed: u64,
) -> Result<ObservationMatrix> {
    if beta.len() != design.p() {
        return Err(Error::LengthMismatch {
            expected: design.p(),
            found: beta.len(),
        });
    }
    noise.validate()?;
    let d = beta.d();
    let masks = beta.label_masks();
    let mut flat = Vec::with_capacity(design.n() * d);
    counts_from_masks(&masks, design, &mut flat);
    let p = design.p();
    match *noise {
        NoiseModel::Noiseless => Ok(ObservationMatrix::Integer(
            flat.chunks(d.max(1)).map(<[usize]>::to_vec).collect(),
        )),
        NoiseModel::Gaussian { .. } => {
            let sd = noise.variance(p).sqrt();
            let mut rng = seed::rng(seed);
            let rows = flat
                .chunks(d.max(1))
                .map(|row| {
                    row.iter()
                        .map(|&c| {
                            let z: f64 = rng.sample(StandardNormal);
                            c as f64 + sd * z
                        })
                        .collect()
                })
                .collect();
            Ok(ObservationMatrix::Real(rows))
        }
        NoiseModel::ClippedGaussian { .. } => {
            let sd = noise.variance(p).sqrt();
            let mut rng = seed::rng(seed);
            let rows = flat
                .chunks(d.max(1))
                .map(|row| {
                    row.iter()
                        .map(|&c| {
                            let z: f64 = rng.sample(StandardNormal);
                            // f64::round rounds half away from zero.
                            (c as f64 + sd * z).round().clamp(0.0, p as f64) as usize
                        })
                        .collect()
                })
                .collect();
            Ok(ObservationMatrix::Integer(rows))
        }
    }
}
