//! Independent oracles shared by the integration suites. Nothing here calls
//! into the library's entropy or quadrature code.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use pooled_data::model::BitRow;
use pooled_data::{LabelCounts, TestDesign};

/// `I(X0; Y | X1)` for one Bernoulli(`q`) test in the noiseless channel, by
/// enumerating every bit pattern of the hidden (`X0`) and revealed (`X1`)
/// entries. `hidden[t]` items of label `t` are hidden and `shown[t]` revealed.
pub fn brute_force_bernoulli_mi(hidden: &[usize], shown: &[usize], q: f64) -> f64 {
    let d = hidden.len();
    let h: usize = hidden.iter().sum();
    let s: usize = shown.iter().sum();
    let owner = |counts: &[usize]| -> Vec<usize> {
        counts
            .iter()
            .enumerate()
            .flat_map(|(t, &c)| std::iter::repeat_n(t, c))
            .collect()
    };
    let (own0, own1) = (owner(hidden), owner(shown));
    let weight = |bits: u32, len: usize| {
        let k = bits.count_ones() as i32;
        q.powi(k) * (1.0 - q).powi(len as i32 - k)
    };
    // p(y | x1) accumulated over x0, then I = Σ p(x0) p(x1) log(1 / p(y | x1)),
    // since Y is a function of (x0, x1).
    let mut info = 0.0;
    for x1 in 0u32..(1 << s) {
        let w1 = weight(x1, s);
        let mut ylaw: HashMap<Vec<usize>, f64> = HashMap::new();
        for x0 in 0u32..(1 << h) {
            let mut y = vec![0usize; d];
            for (j, &t) in own0.iter().enumerate() {
                y[t] += (x0 >> j & 1) as usize;
            }
            for (j, &t) in own1.iter().enumerate() {
                y[t] += (x1 >> j & 1) as usize;
            }
            *ylaw.entry(y).or_default() += weight(x0, h);
        }
        let hy: f64 = ylaw.values().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
        info += w1 * hy;
    }
    info
}

/// `I(U; U + Z)` for `U` on `0..` with pmf `w` and `Z ~ N(0, var)`, by a plain
/// composite trapezoid rule on a fine fixed grid.
pub fn trapezoid_mixture_information(w: &[f64], var: f64) -> f64 {
    let sd = var.sqrt();
    let lo = -10.0 * sd;
    let hi = (w.len() - 1) as f64 + 10.0 * sd;
    let steps = 200_000;
    let dx = (hi - lo) / steps as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
    let mut h_mix = 0.0;
    for i in 0..=steps {
        let x = lo + i as f64 * dx;
        let f: f64 = w
            .iter()
            .enumerate()
            .map(|(j, &wj)| wj * norm * (-(x - j as f64).powi(2) / (2.0 * var)).exp())
            .sum();
        let term = if f > 0.0 { -f * f.ln() } else { 0.0 };
        h_mix += if i == 0 || i == steps { 0.5 * term } else { term };
    }
    h_mix *= dx;
    h_mix - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * var).ln()
}

/// Binomial pmf by direct products (no log-gamma).
pub fn binomial_direct(n: usize, q: f64) -> Vec<f64> {
    let mut c = 1.0f64;
    (0..=n)
        .map(|k| {
            if k > 0 {
                c = c * (n - k + 1) as f64 / k as f64;
            }
            c * q.powi(k as i32) * (1.0 - q).powi((n - k) as i32)
        })
        .collect()
}

pub fn shannon(w: &[f64]) -> f64 {
    w.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
}

/// Upper-tail p-value of Pearson's statistic.
pub fn chi_square_p(observed: &[u64], expected: &[f64]) -> f64 {
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dof = (observed.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// A desk-scale noiseless instance for the oracle cross-checks.
#[derive(Debug, Clone)]
pub struct Instance {
    pub counts: LabelCounts,
    pub design: TestDesign,
}

/// The pinned instance (counts (2,2), single test on the first two items)
/// followed by `extra` random ones with `p ≤ 10`, `d ≤ 3`, `n ≤ 6`.
pub fn oracle_instances(extra: usize, seed: u64) -> Vec<Instance> {
    let mut out = vec![Instance {
        counts: LabelCounts::new(vec![2, 2]).unwrap(),
        design: TestDesign::parse_rows("1100").unwrap(),
    }];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < extra + 1 {
        let d = rng.random_range(2..=3);
        let p = rng.random_range(d + 1..=10);
        // Random composition of p into d positive parts.
        let mut cuts: Vec<usize> = (1..p).collect();
        for i in (1..cuts.len()).rev() {
            cuts.swap(i, rng.random_range(0..=i));
        }
        let mut marks: Vec<usize> = cuts[..d - 1].to_vec();
        marks.sort_unstable();
        marks.insert(0, 0);
        marks.push(p);
        let counts: Vec<usize> = marks.windows(2).map(|w| w[1] - w[0]).collect();
        let n = rng.random_range(1..=6);
        let rows = (0..n)
            .map(|_| BitRow::from_bools(&(0..p).map(|_| rng.random_bool(0.5)).collect::<Vec<_>>()))
            .collect();
        out.push(Instance {
            counts: LabelCounts::new(counts).unwrap(),
            design: TestDesign::explicit(p, rows).unwrap(),
        });
    }
    out
}
