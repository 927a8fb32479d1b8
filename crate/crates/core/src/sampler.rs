//! Exact random generation of words of length `n` under
//! `Pr(w) ∝ ξ′ μ(w) η`.
//!
//! With suffix vectors `P_s = M^s η`, the word is drawn left to right: after
//! a prefix with row vector `ρ′ = ξ′ μ(prefix)`, the next symbol is `σ` with
//! probability `ρ′ μ(σ) P_r / ρ′ P_{r+1}`, where `r` symbols remain after
//! `σ`. The product of these conditionals telescopes to `Pr(w)`.
//!
//! # Random streams
//!
//! Sample `i` of a batch with seed `s` uses its own generator
//! `ChaCha8Rng::seed_from_u64(stream_seed(s, i))`, where `stream_seed(s, i)`
//! is the `(i+1)`-th output of SplitMix64 started at state `s`:
//!
//! ```text
//! z = s + (i + 1) · 0x9e3779b97f4a7c15        (wrapping)
//! z = (z ^ (z >> 30)) · 0xbf58476d1ce4e5b9
//! z = (z ^ (z >> 27)) · 0x94d049bb133111eb
//! stream_seed = z ^ (z >> 31)
//! ```
//!
//! Test vector: for `s = 1234567` the first five stream seeds are
//! 6457827717110365317, 3203168211198807973, 9817491932198370423,
//! 4593380528125082431 and 16408922859458223821. Batches are therefore
//! reproducible regardless of thread scheduling, and batches over disjoint
//! stream ranges merge into the batch over their union.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::LinearRepresentation;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `index` within a batch seeded with `seed`.
pub fn stream_seed(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// Generator of stream `index`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, index))
}

/// Precomputed suffix vectors for one `(model, n)`; shared read-only by all
/// samples.
#[derive(Debug, Clone)]
pub struct WordSampler<'a> {
    model: &'a LinearRepresentation,
    n: usize,
    transposed: Vec<DMatrix<f64>>,
    // suffix[s] = M^s η scaled to max-entry 1.
    suffix: Vec<DVector<f64>>,
}

impl<'a> WordSampler<'a> {
    pub fn new(model: &'a LinearRepresentation, n: usize) -> Result<Self> {
        let total = model.total_matrix();
        let mut suffix = Vec::with_capacity(n + 1);
        let mut p = model.eta().clone();
        p /= p.max();
        suffix.push(p.clone());
        for s in 1..=n {
            p = &total * p;
            let top = p.max();
            if !(top > 0.0) {
                return Err(Error::DegenerateValue(format!("M^{s} eta vanishes")));
            }
            p /= top;
            suffix.push(p.clone());
        }
        if !(model.xi().dot(&suffix[n]) > 0.0) {
            return Err(Error::DegenerateValue(format!(
                "no word of length {n} has positive weight"
            )));
        }
        let transposed = (0..=model.ell())
            .map(|s| model.symbol_matrix(s).transpose())
            .collect();
        Ok(Self {
            model,
            n,
            transposed,
            suffix,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Start row `ξ′` of the prefix recursion.
    pub fn initial_row(&self) -> DVector<f64> {
        self.model.xi().clone()
    }

    /// Conditional law of the next symbol given the prefix row `ρ′` and the
    /// number of symbols that will remain after it.
    pub fn step_probabilities(&self, prefix: &DVector<f64>, remaining: usize) -> Result<Vec<f64>> {
        let tail = &self.suffix[remaining];
        let mut weights: Vec<f64> = self
            .transposed
            .iter()
            .map(|at| (at * prefix).dot(tail))
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateValue(
                "every continuation of the prefix has zero weight".into(),
            ));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(weights)
    }

    /// Draws one word as symbol indices (`ℓ` is the uncounted symbol).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<usize>> {
        let mut row = self.initial_row();
        let mut word = Vec::with_capacity(self.n);
        for position in 0..self.n {
            let probs = self.step_probabilities(&row, self.n - position - 1)?;
            let symbol = pick(&probs, rng.random::<f64>());
            row = &self.transposed[symbol] * row;
            let top = row.max();
            row /= top;
            word.push(symbol);
        }
        Ok(word)
    }
}

fn pick(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws one word with a caller-supplied generator.
pub fn sample_word<R: Rng + ?Sized>(
    model: &LinearRepresentation,
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    WordSampler::new(model, n)?.sample(rng)
}

/// Counts of each symbol `a_i` in a word.
pub fn count_vector(word: &[usize], ell: usize) -> Vec<usize> {
    let mut k = vec![0; ell];
    for &s in word {
        if s < ell {
            k[s] += 1;
        }
    }
    k
}

/// Histogram of count vectors over a range of random streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    pub n: usize,
    pub count: u64,
    pub seed: u64,
    pub histogram: BTreeMap<Vec<usize>, u64>,
    pub words: Option<Vec<Vec<usize>>>,
}

impl SampleBatch {
    /// Union of two batches drawn with the same seed over disjoint streams.
    pub fn merge(mut self, other: SampleBatch) -> Result<SampleBatch> {
        if self.n != other.n || self.seed != other.seed {
            return Err(Error::InvalidArgument(
                "batches differ in length or seed".into(),
            ));
        }
        self.count += other.count;
        for (k, c) in other.histogram {
            *self.histogram.entry(k).or_insert(0) += c;
        }
        self.words = match (self.words, other.words) {
            (Some(mut a), Some(b)) => {
                a.extend(b);
                Some(a)
            }
            _ => None,
        };
        Ok(self)
    }

    /// Empirical probability of each observed count vector.
    pub fn frequencies(&self) -> BTreeMap<Vec<usize>, f64> {
        self.histogram
            .iter()
            .map(|(k, &c)| (k.clone(), c as f64 / self.count as f64))
            .collect()
    }

    /// CSV with header `k_1,…,k_ℓ,count`.
    pub fn histogram_csv(&self, ell: usize) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=ell).map(|i| format!("k_{i}")).collect();
        let _ = writeln!(out, "{},count", header.join(","));
        for (k, c) in &self.histogram {
            let ks: Vec<String> = k.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{},{c}", ks.join(","));
        }
        out
    }
}

/// `count` independent words of length `n`, streams `0..count` of `seed`.
pub fn sample_counts(
    model: &LinearRepresentation,
    n: usize,
    count: u64,
    seed: u64,
) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    sample_streams(model, n, seed, 0..count, false)
}

/// Samples the given stream indices; keeps the words when `keep_words`.
pub fn sample_streams(
    model: &LinearRepresentation,
    n: usize,
    seed: u64,
    streams: Range<u64>,
    keep_words: bool,
) -> Result<SampleBatch> {
    let sampler = WordSampler::new(model, n)?;
    let ell = model.ell();
    let count = streams.end.saturating_sub(streams.start);
    let draw = |i: u64| sampler.sample(&mut stream_rng(seed, i));

    let (histogram, words) = if keep_words {
        let words = streams
            .into_par_iter()
            .map(draw)
            .collect::<Result<Vec<_>>>()?;
        let mut histogram = BTreeMap::new();
        for w in &words {
            *histogram.entry(count_vector(w, ell)).or_insert(0) += 1;
        }
        (histogram, Some(words))
    } else {
        let histogram = streams
            .into_par_iter()
            .try_fold(BTreeMap::new, |mut acc: BTreeMap<Vec<usize>, u64>, i| {
                let word = draw(i)?;
                *acc.entry(count_vector(&word, ell)).or_insert(0) += 1;
                Ok::<_, Error>(acc)
            })
            .try_reduce(BTreeMap::new, |mut a, b| {
                for (k, c) in b {
                    *a.entry(k).or_insert(0) += c;
                }
                Ok(a)
            })?;
        (histogram, None)
    };

    Ok(SampleBatch {
        n,
        count,
        seed,
        histogram,
        words,
    })
}
