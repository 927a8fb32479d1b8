//! Exact finite-length quantities by transfer-matrix computation.
//!
//! Everything here is computed from powers of `M(t)` (or of the
//! polynomial matrix `Σ A_i x_i + B`) with per-step renormalization, so it
//! serves as ground truth for the asymptotic formulas in
//! [`crate::asymptotics`] and [`crate::deviations`].

use std::f64::consts::LN_2;
use std::fmt::Write as _;
use std::ops::{Add, Mul};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::LinearRepresentation;
use crate::spectral::m_of_t;

/// Default cap on `|Sim_n| · m` for the distribution DP.
pub const DEFAULT_BUDGET: u128 = 50_000_000;

/// Slack applied to region boundaries when classifying lattice points `k/n`.
pub const REGION_SLACK: f64 = 1e-12;

/// A strictly positive real stored as its natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogScaled {
    log_value: f64,
}

impl LogScaled {
    pub fn from_log(log_value: f64) -> Self {
        Self { log_value }
    }

    /// `None` unless `value > 0`.
    pub fn from_value(value: f64) -> Option<Self> {
        (value > 0.0).then(|| Self {
            log_value: value.ln(),
        })
    }

    pub fn ln(self) -> f64 {
        self.log_value
    }

    /// Linear-domain value; may overflow to infinity.
    pub fn value(self) -> f64 {
        self.log_value.exp()
    }
}

impl Add for LogScaled {
    type Output = LogScaled;

    fn add(self, other: LogScaled) -> LogScaled {
        let (hi, lo) = if self.log_value >= other.log_value {
            (self.log_value, other.log_value)
        } else {
            (other.log_value, self.log_value)
        };
        LogScaled::from_log(hi + (lo - hi).exp().ln_1p())
    }
}

impl Mul for LogScaled {
    type Output = LogScaled;

    fn mul(self, other: LogScaled) -> LogScaled {
        LogScaled::from_log(self.log_value + other.log_value)
    }
}

/// Power of two `2^e ≤ top < 2^{e+1}` for a positive normal `top`.
///
/// Renormalizing by it is exact, so integer-weighted models stay exact
/// until their values outgrow the mantissa.
fn binary_exponent(top: f64) -> i32 {
    ((top.to_bits() >> 52) & 0x7ff) as i32 - 1023
}

fn rescale(top: f64) -> (f64, i64) {
    let e = binary_exponent(top);
    (2f64.powi(-e), e as i64)
}

/// `ξ′ M(t)ⁿ η` as `value · 2^exponent`, with integer exponent bookkeeping.
fn h_n_parts(model: &LinearRepresentation, t: &[f64], n: usize) -> Result<(f64, i64)> {
    let mt = m_of_t(model, t)?;
    let mut w = model.eta().clone();
    let mut exponent = 0i64;
    for step in 0..n {
        w = &mt * w;
        let top = w.max();
        if !top.is_normal() {
            return Err(Error::DegenerateValue(format!(
                "M(t)^{} eta vanishes",
                step + 1
            )));
        }
        let (factor, e) = rescale(top);
        w *= factor;
        exponent += e;
    }
    let last = model.xi().dot(&w);
    if last > 0.0 && last.is_finite() {
        Ok((last, exponent))
    } else {
        Err(Error::DegenerateValue(format!("xi' M(t)^{n} eta = 0")))
    }
}

/// `h_n(t) = ξ′ M(t)ⁿ η` in log scale.
pub fn h_n(model: &LinearRepresentation, t: &[f64], n: usize) -> Result<LogScaled> {
    let (value, exponent) = h_n_parts(model, t, n)?;
    Ok(LogScaled::from_log(value.ln() + pow2_ln(exponent)))
}

/// `log Ψ_n(t) = log E[e^{t·Y_n}] = log h_n(t) − log h_n(0)`.
pub fn mgf(model: &LinearRepresentation, t: &[f64], n: usize) -> Result<f64> {
    let zero = vec![0.0; model.ell()];
    let (num, e_num) = h_n_parts(model, t, n)?;
    let (den, e_den) = h_n_parts(model, &zero, n)?;
    Ok((num / den).ln() + pow2_ln(e_num - e_den))
}

/// `e · ln 2` with ln 2 split into two doubles, so large exponents lose nothing.
fn pow2_ln(e: i64) -> f64 {
    const LN_2_LO: f64 = 2.319_046_813_846_299_6e-17;
    let e = e as f64;
    e * LN_2 + e * LN_2_LO
}

/// Dense lexicographic indexing of `Sim_n = {k ∈ ℕ^ℓ : Σ k_i ≤ n}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplexIndex {
    n: usize,
    ell: usize,
    // counts[d][b] = C(b + d, d): lattice points of the d-dimensional simplex of size b.
    counts: Vec<Vec<usize>>,
}

/// `|Sim_n| = C(n + ℓ, ℓ)`, saturating.
pub fn simplex_size(n: usize, ell: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 1..=ell as u128 {
        acc = acc.saturating_mul(n as u128 + i) / i;
    }
    acc
}

impl SimplexIndex {
    pub fn new(n: usize, ell: usize) -> Self {
        let mut counts = vec![vec![1usize; n + 1]; ell + 1];
        for d in 1..=ell {
            for b in 1..=n {
                counts[d][b] = counts[d][b - 1] + counts[d - 1][b];
            }
        }
        Self { n, ell, counts }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn len(&self) -> usize {
        self.counts[self.ell][self.n]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of `k` in lexicographic order; `k` must lie in `Sim_n`.
    pub fn rank(&self, k: &[usize]) -> usize {
        let mut rank = 0;
        let mut budget = self.n;
        for (i, &ki) in k.iter().enumerate() {
            let d = self.ell - i - 1;
            rank += self.counts[d + 1][budget] - self.counts[d + 1][budget - ki];
            budget -= ki;
        }
        rank
    }

    /// Iterates `Sim_n` in lexicographic order.
    pub fn points(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        lex_points(self.ell, self.n)
    }
}

/// `Sim_bound` in lexicographic order.
fn lex_points(ell: usize, bound: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut next = Some(vec![0usize; ell]);
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut k = current.clone();
        if advance(&mut k, bound) {
            next = Some(k);
        }
        Some(current)
    })
}

/// Moves `k` to its lexicographic successor in `Sim_bound`.
fn advance(k: &mut [usize], bound: usize) -> bool {
    let total: usize = k.iter().sum();
    let last = k.len() - 1;
    if total < bound {
        k[last] += 1;
        return true;
    }
    let Some(i) = k.iter().rposition(|&v| v > 0) else {
        return false;
    };
    if i == 0 {
        return false;
    }
    k[i] = 0;
    k[i - 1] += 1;
    true
}

/// Law of the count vector `Y_n` on `Sim_n`.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    n: usize,
    index: SimplexIndex,
    probs: Vec<f64>,
    log_total: f64,
}

impl ExactDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ell(&self) -> usize {
        self.index.ell()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `log ξ′Mⁿη`, the log of the total weight of length-`n` words.
    pub fn log_total_weight(&self) -> f64 {
        self.log_total
    }

    /// `p_n(k)`; zero outside `Sim_n`.
    pub fn prob(&self, k: &[usize]) -> f64 {
        if k.len() != self.ell() || k.iter().sum::<usize>() > self.n {
            return 0.0;
        }
        self.probs[self.index.rank(k)]
    }

    /// `(k, p_n(k))` in lexicographic order of `k`.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.index.points().zip(self.probs.iter().copied())
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut mean = DVector::zeros(self.ell());
        for (k, p) in self.iter() {
            for (i, &ki) in k.iter().enumerate() {
                mean[i] += p * ki as f64;
            }
        }
        mean
    }

    /// Covariance from centred second moments.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let ell = self.ell();
        let mut cov = DMatrix::zeros(ell, ell);
        for (k, p) in self.iter() {
            let centred: Vec<f64> = k.iter().enumerate().map(|(i, &ki)| ki as f64 - mean[i]).collect();
            for i in 0..ell {
                for j in 0..ell {
                    cov[(i, j)] += p * centred[i] * centred[j];
                }
            }
        }
        cov
    }

    /// `log Σ_k p_n(k) e^{t·k}` by log-sum-exp.
    pub fn log_mgf(&self, t: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(k, p)| p.ln() + k.iter().zip(t).map(|(&ki, ti)| ki as f64 * ti).sum::<f64>())
            .collect();
        let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        top + terms.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
    }

    /// Exact probability that `Y_n / n` falls in `region`.
    pub fn probability_of(&self, region: &Region) -> f64 {
        let n = self.n.max(1) as f64;
        self.iter()
            .filter(|(k, _)| {
                let x: Vec<f64> = k.iter().map(|&ki| ki as f64 / n).collect();
                region.contains(&x)
            })
            .map(|(_, p)| p)
            .sum::<f64>()
            .min(1.0)
    }

    /// CSV with header `k_1,…,k_ℓ,prob`, probabilities to 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.ell()).map(|i| format!("k_{i}")).collect();
        let _ = writeln!(out, "{},prob", header.join(","));
        for (k, p) in self.iter() {
            let ks: Vec<String> = k.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{},{:.16e}", ks.join(","), p);
        }
        out
    }
}

fn check_budget(n: usize, model: &LinearRepresentation, budget: u128) -> Result<()> {
    let required = simplex_size(n, model.ell()).saturating_mul(model.dim() as u128);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    Ok(())
}

/// [`exact_distribution_with_budget`] with [`DEFAULT_BUDGET`].
pub fn exact_distribution(model: &LinearRepresentation, n: usize) -> Result<ExactDistribution> {
    exact_distribution_with_budget(model, n, DEFAULT_BUDGET)
}

/// `p_n(k) = [x^k] ξ′(Σ A_i x_i + B)ⁿη / ξ′Mⁿη` by dynamic programming over
/// coefficient row vectors indexed by `k ∈ Sim_s`, `s = 0..n`.
pub fn exact_distribution_with_budget(
    model: &LinearRepresentation,
    n: usize,
    budget: u128,
) -> Result<ExactDistribution> {
    check_budget(n, model, budget)?;
    let m = model.dim();
    let ell = model.ell();
    let index = SimplexIndex::new(n, ell);
    let len = index.len();

    // Row-major copies; symbol ℓ is the uncounted one.
    let mats: Vec<Vec<f64>> = (0..=ell)
        .map(|s| {
            let a = model.symbol_matrix(s);
            (0..m * m).map(|c| a[(c / m, c % m)]).collect()
        })
        .collect();

    let mut current = vec![0.0; len * m];
    current[..m].copy_from_slice(model.xi().as_slice());
    let mut next = vec![0.0; len * m];
    let mut exponent = 0i64;
    let mut neighbour = vec![0usize; ell];

    for step in 0..n {
        next.iter_mut().for_each(|v| *v = 0.0);
        for k in lex_points(ell, step + 1) {
            let target = index.rank(&k) * m;
            let out = &mut next[target..target + m];
            if k.iter().sum::<usize>() <= step {
                accumulate(out, &current[target..target + m], &mats[ell], m);
            }
            for i in 0..ell {
                if k[i] == 0 {
                    continue;
                }
                neighbour.copy_from_slice(&k);
                neighbour[i] -= 1;
                let source = index.rank(&neighbour) * m;
                accumulate(out, &current[source..source + m], &mats[i], m);
            }
        }
        let top = next.iter().copied().fold(0.0, f64::max);
        if !top.is_normal() {
            return Err(Error::DegenerateValue(format!(
                "no word of length {} has positive weight",
                step + 1
            )));
        }
        let (factor, e) = rescale(top);
        next.iter_mut().for_each(|v| *v *= factor);
        exponent += e;
        std::mem::swap(&mut current, &mut next);
    }

    let eta = model.eta().as_slice();
    let mut probs: Vec<f64> = current
        .chunks_exact(m)
        .map(|row| row.iter().zip(eta).map(|(r, e)| r * e).sum())
        .collect();
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateValue(format!("xi' M^{n} eta = 0")));
    }
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(ExactDistribution {
        n,
        index,
        probs,
        log_total: total.ln() + pow2_ln(exponent),
    })
}

/// `out += row · mat` for a row-major `m × m` matrix.
fn accumulate(out: &mut [f64], row: &[f64], mat: &[f64], m: usize) {
    for (p, &rp) in row.iter().enumerate() {
        if rp == 0.0 {
            continue;
        }
        let line = &mat[p * m..(p + 1) * m];
        for (o, &w) in out.iter_mut().zip(line) {
            *o += rp * w;
        }
    }
}

/// Exact mean vector and covariance matrix of `Y_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoments {
    pub n: usize,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Exact moments from derivative recursions at `t = 0`:
///
/// ```text
/// P_{s+1}     = M P_s                                   P_0 = η
/// D_{s+1}^i   = A_i P_s + M D_s^i                       D_0 = 0
/// S_{s+1}^ij  = A_i D_s^j + A_j D_s^i + [i=j] A_i P_s + M S_s^ij
/// ```
///
/// so that `E[Y_i] = ξ′D_n^i / ξ′P_n` and `E[Y_i Y_j] = ξ′S_n^ij / ξ′P_n`.
/// All vectors share one renormalization scale per step.
pub fn exact_moments(model: &LinearRepresentation, n: usize) -> Result<ExactMoments> {
    let ell = model.ell();
    let m = model.dim();
    let total = model.total_matrix();
    let a = model.counted_matrices();
    let pair = |i: usize, j: usize| i * ell + j;

    let mut p = model.eta().clone();
    let mut d = vec![DVector::zeros(m); ell];
    let mut s = vec![DVector::zeros(m); ell * ell];

    for _ in 0..n {
        let mut s_next = vec![DVector::zeros(m); ell * ell];
        for i in 0..ell {
            for j in i..ell {
                let mut v = &a[i] * &d[j] + &a[j] * &d[i] + &total * &s[pair(i, j)];
                if i == j {
                    v += &a[i] * &p;
                }
                s_next[pair(i, j)] = v;
            }
        }
        let d_next: Vec<DVector<f64>> = (0..ell).map(|i| &a[i] * &p + &total * &d[i]).collect();
        let p_next = &total * &p;

        let top = p_next
            .iter()
            .chain(d_next.iter().flat_map(|v| v.iter()))
            .chain(s_next.iter().flat_map(|v| v.iter()))
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        if !top.is_normal() {
            return Err(Error::DegenerateValue("M^s eta vanishes".into()));
        }
        let (factor, _) = rescale(top);
        p = p_next * factor;
        d = d_next.into_iter().map(|v| v * factor).collect();
        s = s_next.into_iter().map(|v| v * factor).collect();
    }

    let xi = model.xi();
    let norm = xi.dot(&p);
    if !(norm > 0.0) {
        return Err(Error::DegenerateValue(format!("xi' M^{n} eta = 0")));
    }
    let mean = DVector::from_iterator(ell, d.iter().map(|v| xi.dot(v) / norm));
    let mut covariance = DMatrix::zeros(ell, ell);
    for i in 0..ell {
        for j in i..ell {
            let second = xi.dot(&s[pair(i, j)]) / norm;
            let c = second - mean[i] * mean[j];
            covariance[(i, j)] = c;
            covariance[(j, i)] = c;
        }
    }
    Ok(ExactMoments {
        n,
        mean,
        covariance,
    })
}

/// Event on the scaled count vector `x = k/n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// `‖x − center‖∞ < radius`, or `≥ radius` when `complement`.
    SupBall {
        center: Vec<f64>,
        radius: f64,
        complement: bool,
    },
    /// `normal · x ≥ threshold`.
    HalfSpace { normal: Vec<f64>, threshold: f64 },
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::SupBall {
                center,
                radius,
                complement,
            } => {
                let dist = x
                    .iter()
                    .zip(center)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let outside = dist >= radius - REGION_SLACK;
                outside == *complement
            }
            Region::HalfSpace { normal, threshold } => {
                let proj: f64 = x.iter().zip(normal).map(|(a, b)| a * b).sum();
                proj >= threshold - REGION_SLACK
            }
        }
    }
}

/// `P(Y_n / n ∈ region)` summed exactly over `Sim_n`.
pub fn tail_probability(
    model: &LinearRepresentation,
    n: usize,
    region: &Region,
    budget: u128,
) -> Result<f64> {
    Ok(exact_distribution_with_budget(model, n, budget)?.probability_of(region))
}
