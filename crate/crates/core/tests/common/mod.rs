//! Independent oracles and generators shared by the integration tests.
//!
//! Nothing here calls the numerical routines under test: distributions come
//! from enumerating every word, multinomial laws from factorials, and linear
//! algebra from plain nested loops.

#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::factorial::ln_factorial;
use wfa_stats::LinearRepresentation;

/// Row-vector times matrix with plain loops.
fn row_times(row: &[f64], m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| row[i] * m[(i, j)]).sum())
        .collect()
}

fn symbol(model: &LinearRepresentation, s: usize) -> &DMatrix<f64> {
    if s < model.ell() {
        &model.counted_matrices()[s]
    } else {
        model.rest_matrix()
    }
}

/// Weight `ξ′μ(w)η` of one word by direct matrix products.
pub fn word_weight(model: &LinearRepresentation, word: &[usize]) -> f64 {
    let mut row: Vec<f64> = model.xi().iter().copied().collect();
    for &s in word {
        row = row_times(&row, symbol(model, s));
    }
    row.iter().zip(model.eta().iter()).map(|(a, b)| a * b).sum()
}

/// Calls `visit` on every word of length `n` over `ℓ+1` symbols.
pub fn for_each_word(alphabet: usize, n: usize, mut visit: impl FnMut(&[usize])) {
    let mut word = vec![0usize; n];
    loop {
        visit(&word);
        let Some(pos) = word.iter().rposition(|&s| s + 1 < alphabet) else {
            return;
        };
        word[pos] += 1;
        word[pos + 1..].iter_mut().for_each(|s| *s = 0);
    }
}

/// Exact law of the count vector by enumerating all `(ℓ+1)ⁿ` words.
pub fn brute_force_distribution(model: &LinearRepresentation, n: usize) -> BTreeMap<Vec<usize>, f64> {
    let ell = model.ell();
    let mut weights: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut total = 0.0;
    for_each_word(ell + 1, n, |w| {
        let weight = word_weight(model, w);
        let mut k = vec![0usize; ell];
        for &s in w {
            if s < ell {
                k[s] += 1;
            }
        }
        *weights.entry(k).or_insert(0.0) += weight;
        total += weight;
    });
    weights.values_mut().for_each(|p| *p /= total);
    weights
}

/// Multinomial probability of counts `k` (plus the remainder `n − Σk`).
pub fn multinomial_pmf(n: usize, k: &[usize], p: &[f64]) -> f64 {
    let rest = n - k.iter().sum::<usize>();
    let p_rest = 1.0 - p.iter().sum::<f64>();
    let mut log = ln_factorial(n as u64) - ln_factorial(rest as u64);
    for (&ki, &pi) in k.iter().zip(p) {
        log += ki as f64 * pi.ln() - ln_factorial(ki as u64);
    }
    log += rest as f64 * p_rest.ln();
    log.exp()
}

pub fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    multinomial_pmf(n, &[k], &[p])
}

/// Relative entropy of `(x, 1 − Σx)` with respect to `(p, 1 − Σp)`.
pub fn kl_divergence(x: &[f64], p: &[f64]) -> f64 {
    let term = |a: f64, b: f64| if a > 0.0 { a * (a / b).ln() } else { 0.0 };
    let rest_x = 1.0 - x.iter().sum::<f64>();
    let rest_p = 1.0 - p.iter().sum::<f64>();
    x.iter().zip(p).map(|(&a, &b)| term(a, b)).sum::<f64>() + term(rest_x, rest_p)
}

/// Multinomial covariance `diag(p) − pp′`.
pub fn multinomial_gamma(p: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(p.len(), p.len(), |i, j| {
        if i == j {
            p[i] * (1.0 - p[i])
        } else {
            -p[i] * p[j]
        }
    })
}

/// Pearson chi-square p-value of observed counts against expected
/// probabilities; cells with expectation below 5 are pooled.
pub fn chi_square_p_value(observed: &BTreeMap<Vec<usize>, u64>, expected: &BTreeMap<Vec<usize>, f64>) -> f64 {
    let total: u64 = observed.values().sum();
    let total = total as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let mut pooled_obs = 0.0;
    let mut pooled_exp = 0.0;
    for (k, &p) in expected {
        let e = p * total;
        let o = *observed.get(k).unwrap_or(&0) as f64;
        if e < 5.0 {
            pooled_obs += o;
            pooled_exp += e;
        } else {
            stat += (o - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp.max(1e-300);
        cells += 1;
    }
    assert!(
        observed.keys().all(|k| expected.contains_key(k)),
        "sample outside the support"
    );
    let dof = (cells - 1).max(1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Largest absolute entry of `a − b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

fn names(ell: usize) -> Vec<String> {
    (0..ell).map(|i| format!("a{i}")).collect()
}

/// Builds a model from flat row-major matrix entries.
pub fn build(m: usize, xi: Vec<f64>, eta: Vec<f64>, counted: Vec<Vec<f64>>, rest: Vec<f64>) -> LinearRepresentation {
    let ell = counted.len();
    LinearRepresentation::new(
        names(ell),
        "b".into(),
        xi,
        eta,
        counted
            .into_iter()
            .map(|e| DMatrix::from_row_slice(m, m, &e))
            .collect(),
        DMatrix::from_row_slice(m, m, &rest),
    )
    .unwrap()
}

/// Weight in `[0.05, 3]`, zero with probability about one third.
fn sparse_weight() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 2 => 0.05f64..3.0]
}

/// Matrix with at least one positive entry.
fn nonzero_matrix(m: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(sparse_weight(), m * m), 0..m * m, 0.1f64..2.0).prop_map(
        |(mut e, idx, v)| {
            if e.iter().all(|&w| w == 0.0) {
                e[idx] = v;
            }
            e
        },
    )
}

/// Models with `m ≤ max_dim` states and `ℓ ≤ max_ell` counted symbols whose
/// rest matrix is entrywise positive, so `M` is primitive.
pub fn primitive_model(max_dim: usize, max_ell: usize) -> impl Strategy<Value = LinearRepresentation> {
    (1..=max_dim, 1..=max_ell).prop_flat_map(|(m, ell)| {
        (
            prop::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.1f64..2.0], m),
            prop::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.1f64..2.0], m),
            prop::collection::vec(nonzero_matrix(m), ell),
            prop::collection::vec(0.1f64..3.0, m * m),
            0..m,
        )
            .prop_map(move |(mut xi, mut eta, counted, rest, i)| {
                if xi.iter().all(|&v| v == 0.0) {
                    xi[i] = 1.0;
                }
                if eta.iter().all(|&v| v == 0.0) {
                    eta[i] = 1.0;
                }
                build(m, xi, eta, counted, rest)
            })
    })
}

/// Models with arbitrary sparse supports; primitivity not guaranteed.
pub fn sparse_model(max_dim: usize, max_ell: usize) -> impl Strategy<Value = LinearRepresentation> {
    (1..=max_dim, 1..=max_ell).prop_flat_map(|(m, ell)| {
        (
            prop::collection::vec(0.1f64..2.0, m),
            prop::collection::vec(0.1f64..2.0, m),
            prop::collection::vec(nonzero_matrix(m), ell),
            nonzero_matrix(m),
        )
            .prop_map(move |(xi, eta, counted, rest)| build(m, xi, eta, counted, rest))
    })
}

/// 0/1 support matrix of size `m`.
pub fn support_matrix(max_dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max_dim).prop_flat_map(|m| {
        prop::collection::vec(prop::bool::weighted(0.4), m * m)
            .prop_map(move |bits| DMatrix::from_fn(m, m, |i, j| if bits[i * m + j] { 1.0 } else { 0.0 }))
    })
}

/// Primitivity by explicit dense powers `M, M², …, M^{(m−1)²+1}`.
pub fn dense_power_primitive(matrix: &DMatrix<f64>) -> bool {
    let m = matrix.nrows();
    let exponent = (m - 1) * (m - 1) + 1;
    let mut power = matrix.clone();
    for _ in 1..exponent {
        power = &power * matrix;
        // Keep magnitudes bounded; only the support matters.
        power.iter_mut().for_each(|v| *v = if *v > 0.0 { 1.0 } else { 0.0 });
    }
    power.iter().all(|&v| v > 0.0)
}
