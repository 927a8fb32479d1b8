//! Asymptotic constants of the count vector and their convergence.
//!
//! For a primitive model the quasi-power expansion
//! `Ψ_n(t) = r(t) (y(t)/λ)ⁿ (1 + O(ε_tⁿ))` gives
//!
//! ```text
//! E[Y_n]   = β n + c + O(εⁿ)     β = ∇y(0)/λ,    c = ∇r(0)
//! Cov(Y_n) = Γ n + C + O(εⁿ)     Γ = H log y(0),  C = H log r(0)
//! ```
//!
//! and `(Y_n − nβ)/√n` converges to `N(0, Γ)`. This module computes the
//! constants and measures the finite-`n` residuals against exact moments.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::Result;
use crate::exact::{exact_moments, mgf};
use crate::model::PrimitiveModel;
use crate::report::{fmt_num, numbered, Table};
use crate::spectral::{hessian_log_growth, log_prefactor, tilt};

// Base steps for the Richardson-extrapolated differences of log r.
const PREFACTOR_STEP_FIRST: f64 = 1e-3;
const PREFACTOR_STEP_SECOND: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticSummary {
    pub lambda: f64,
    pub beta: DVector<f64>,
    /// `c = ∇r(0)`.
    pub c_const: DVector<f64>,
    pub gamma: DMatrix<f64>,
    /// `C = H log r(0)`.
    pub c_matrix: DMatrix<f64>,
    pub gamma_min_eigenvalue: f64,
}

impl AsymptoticSummary {
    /// One-row CSV table: `lambda, beta_i, c_i, gamma_ij, C_ij, gamma_min_eigenvalue`.
    pub fn to_table(&self) -> Table {
        let ell = self.beta.len();
        let mut header = vec!["lambda".to_string()];
        header.extend(numbered("beta", ell));
        header.extend(numbered("c", ell));
        let pairs: Vec<(usize, usize)> = (0..ell).flat_map(|i| (0..ell).map(move |j| (i, j))).collect();
        header.extend(pairs.iter().map(|(i, j)| format!("gamma_{}{}", i + 1, j + 1)));
        header.extend(pairs.iter().map(|(i, j)| format!("C_{}{}", i + 1, j + 1)));
        header.push("gamma_min_eigenvalue".into());

        let mut row = vec![fmt_num(self.lambda)];
        row.extend(self.beta.iter().map(|&v| fmt_num(v)));
        row.extend(self.c_const.iter().map(|&v| fmt_num(v)));
        row.extend(pairs.iter().map(|&(i, j)| fmt_num(self.gamma[(i, j)])));
        row.extend(pairs.iter().map(|&(i, j)| fmt_num(self.c_matrix[(i, j)])));
        row.push(fmt_num(self.gamma_min_eigenvalue));

        let mut table = Table::new(header);
        table.push(row);
        table
    }
}

/// `λ`, `β`, `c`, `Γ`, `C` of a primitive model.
///
/// `β` comes from the analytic gradient at `t = 0` and `Γ` from the spectral
/// Hessian. `c` and `C` are Richardson-extrapolated central differences of
/// `log r`, which has no analytic gradient here.
pub fn summary(model: &PrimitiveModel) -> Result<AsymptoticSummary> {
    let ell = model.ell();
    let zero = vec![0.0; ell];
    let at_zero = tilt(model, &zero)?;
    let lambda = at_zero.y;
    let beta = at_zero.grad_y / lambda;
    let gamma = hessian_log_growth(model, &zero)?;

    let log_r = |t: &[f64]| log_prefactor(model, t);
    let c_const = richardson_gradient(&log_r, ell, PREFACTOR_STEP_FIRST)?;
    let c_matrix = richardson_hessian(&log_r, ell, PREFACTOR_STEP_SECOND)?;

    let gamma_min_eigenvalue = SymmetricEigen::new(gamma.clone()).eigenvalues.min();
    Ok(AsymptoticSummary {
        lambda,
        beta,
        c_const,
        gamma,
        c_matrix,
        gamma_min_eigenvalue,
    })
}

fn axis(ell: usize, entries: &[(usize, f64)]) -> Vec<f64> {
    let mut t = vec![0.0; ell];
    for &(i, v) in entries {
        t[i] += v;
    }
    t
}

/// Gradient at 0 by central differences with one Richardson step.
fn richardson_gradient<F>(f: &F, ell: usize, h: f64) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut grad = DVector::zeros(ell);
    for i in 0..ell {
        let central = |h: f64| -> Result<f64> {
            Ok((f(&axis(ell, &[(i, h)]))? - f(&axis(ell, &[(i, -h)]))?) / (2.0 * h))
        };
        let (coarse, fine) = (central(h)?, central(h / 2.0)?);
        grad[i] = (4.0 * fine - coarse) / 3.0;
    }
    Ok(grad)
}

/// Hessian at 0 by second-order central differences with one Richardson step.
fn richardson_hessian<F>(f: &F, ell: usize, h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let f0 = f(&vec![0.0; ell])?;
    let mut hess = DMatrix::zeros(ell, ell);
    for i in 0..ell {
        for j in i..ell {
            let estimate = |h: f64| -> Result<f64> {
                if i == j {
                    let plus = f(&axis(ell, &[(i, h)]))?;
                    let minus = f(&axis(ell, &[(i, -h)]))?;
                    Ok((plus - 2.0 * f0 + minus) / (h * h))
                } else {
                    let pp = f(&axis(ell, &[(i, h), (j, h)]))?;
                    let pm = f(&axis(ell, &[(i, h), (j, -h)]))?;
                    let mp = f(&axis(ell, &[(i, -h), (j, h)]))?;
                    let mm = f(&axis(ell, &[(i, -h), (j, -h)]))?;
                    Ok((pp - pm - mp + mm) / (4.0 * h * h))
                }
            };
            let (coarse, fine) = (estimate(h)?, estimate(h / 2.0)?);
            let value = (4.0 * fine - coarse) / 3.0;
            hess[(i, j)] = value;
            hess[(j, i)] = value;
        }
    }
    Ok(hess)
}

/// Residuals of the moment expansions at one length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentResidual {
    pub n: usize,
    /// `‖E[Y_n] − βn − c‖∞`.
    pub mean_resid: f64,
    /// `max_ij |Cov(Y_n) − nΓ − C|`.
    pub cov_resid: f64,
}

/// Exact-vs-asymptotic moment residuals for each `n`.
pub fn moment_convergence(model: &PrimitiveModel, n_list: &[usize]) -> Result<Vec<MomentResidual>> {
    let s = summary(model)?;
    moment_residuals(model, &s, n_list)
}

/// [`moment_convergence`] with precomputed constants.
pub fn moment_residuals(
    model: &PrimitiveModel,
    s: &AsymptoticSummary,
    n_list: &[usize],
) -> Result<Vec<MomentResidual>> {
    n_list
        .iter()
        .map(|&n| {
            let exact = exact_moments(model, n)?;
            let nf = n as f64;
            let mean_resid = (&exact.mean - &s.beta * nf - &s.c_const).amax();
            let cov_resid = (&exact.covariance - &s.gamma * nf - &s.c_matrix).amax();
            Ok(MomentResidual {
                n,
                mean_resid,
                cov_resid,
            })
        })
        .collect()
}

pub fn moment_table(rows: &[MomentResidual]) -> Table {
    let mut table = Table::new(vec!["n".into(), "mean_resid".into(), "cov_resid".into()]);
    for r in rows {
        table.push(vec![r.n.to_string(), fmt_num(r.mean_resid), fmt_num(r.cov_resid)]);
    }
    table
}

/// Gaussian-limit diagnostic at one point `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CltRow {
    pub t: Vec<f64>,
    /// `|log M_n(t) − ½ t′Γt|`.
    pub distance: f64,
}

/// Distance between the log-MGF of `(Y_n − nβ)/√n` and that of `N(0, Γ)`.
///
/// `log M_n(t) = log Ψ_n(t/√n) − √n t·β`, evaluated from the exact MGF.
pub fn clt_distance(model: &PrimitiveModel, n: usize, t_grid: &[Vec<f64>]) -> Result<Vec<CltRow>> {
    let s = summary(model)?;
    let root = (n as f64).sqrt();
    t_grid
        .iter()
        .map(|t| {
            let tv = DVector::from_column_slice(t);
            let scaled: Vec<f64> = t.iter().map(|v| v / root).collect();
            let log_mn = mgf(model, &scaled, n)? - root * tv.dot(&s.beta);
            let gaussian = 0.5 * (tv.transpose() * &s.gamma * &tv)[(0, 0)];
            Ok(CltRow {
                t: t.clone(),
                distance: (log_mn - gaussian).abs(),
            })
        })
        .collect()
}

pub fn clt_table(ell: usize, rows: &[CltRow]) -> Table {
    let mut header = numbered("t", ell);
    header.push("clt_distance".into());
    let mut table = Table::new(header);
    for r in rows {
        let mut row: Vec<String> = r.t.iter().map(|&v| fmt_num(v)).collect();
        row.push(fmt_num(r.distance));
        table.push(row);
    }
    table
}
