//! Perron-Frobenius analytics of the tilted matrix
//! `M(t) = A_1 e^{t_1} + … + A_ℓ e^{t_ℓ} + B`.
//!
//! The dominant eigenvalue `y(t)` of `M(t)` drives every asymptotic
//! statistic of the symbol counts:
//!
//! ```text
//! G(t)      = log(y(t) / λ)                    limiting scaled cumulant function
//! ∂G/∂t_i   = e^{t_i} v_t′ A_i u_t / y(t)       analytic gradient, in (0, 1)
//! r(t)      = (ξ′u_t)(v_t′η) / ((ξ′u)(v′η))     quasi-power prefactor, r(0) = 1
//! ```
//!
//! where `u_t`, `v_t` are the right and left Perron vectors of `M(t)`
//! normalized by `v_t′ u_t = 1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{LinearRepresentation, PrimitiveModel};

/// Iteration cap shared by the power and refinement phases.
pub const MAX_ITERS: usize = 100_000;

/// Accepted relative residual of a Perron triple.
pub const RESIDUAL_TOL: f64 = 1e-10;

const SHIFT_FRACTION: f64 = 1e-3;
const QUOTIENT_TOL: f64 = 1e-14;
const POWER_PHASE: usize = 2_000;
const REFINE_ITERS: usize = 200;

/// Dominant eigenvalue with its right and left eigenvectors.
///
/// `right` is scaled to max-entry 1 and `left` so that `left′ right = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronTriple {
    pub value: f64,
    pub right: DVector<f64>,
    pub left: DVector<f64>,
    /// Max of the relative residuals of the right and left eigen-equations.
    pub residual: f64,
}

/// Perron data of `M(t)` at one tilt.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltPoint {
    pub t: DVector<f64>,
    pub y: f64,
    pub grad_y: DVector<f64>,
    pub prefactor_r: f64,
    pub triple: PerronTriple,
}

/// `M(t) = Σ A_i e^{t_i} + B`.
pub fn m_of_t(model: &LinearRepresentation, t: &[f64]) -> Result<DMatrix<f64>> {
    if t.len() != model.ell() {
        return Err(Error::InvalidArgument(format!(
            "tilt has {} components, model counts {} symbols",
            t.len(),
            model.ell()
        )));
    }
    let m = model.dim();
    let mut mat = DMatrix::zeros(m, m);
    for (index, (a, &ti)) in model.counted_matrices().iter().zip(t).enumerate() {
        let scale = ti.exp();
        if !scale.is_normal() {
            return Err(Error::Overflow { index, value: ti });
        }
        mat += a * scale;
    }
    mat += model.rest_matrix();
    Ok(mat)
}

/// Perron triple of a primitive nonnegative matrix with the default
/// iteration cap.
pub fn perron_triple(matrix: &DMatrix<f64>) -> Result<PerronTriple> {
    perron_triple_with(matrix, MAX_ITERS)
}

/// Perron triple of a primitive nonnegative matrix.
///
/// Shifted power iteration from the all-ones vector, applied to `matrix`
/// for the right vector and to its transpose for the left one, followed by
/// Collatz-Wielandt shifted inverse iteration (Noda iteration). The second
/// phase polishes the vectors to rounding level and rescues inputs whose
/// spectral gap is too small for plain power iteration. The eigenvalue is
/// the two-sided Rayleigh quotient `v′ M u / v′ u`.
pub fn perron_triple_with(matrix: &DMatrix<f64>, max_iters: usize) -> Result<PerronTriple> {
    let m = matrix.nrows();
    if m == 0 || matrix.ncols() != m {
        return Err(Error::InvalidArgument("matrix must be square and non-empty".into()));
    }
    if matrix.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument(
            "matrix must be finite and nonnegative".into(),
        ));
    }
    if matrix.iter().all(|&w| w == 0.0) {
        return Err(Error::DegenerateValue("zero matrix has no Perron eigenvalue".into()));
    }

    let (mut right, right_iters) = dominant_vector(matrix, max_iters)?;
    let (mut left, left_iters) = dominant_vector(&matrix.transpose(), max_iters)?;
    let iterations = right_iters.max(left_iters);

    right /= right.max();
    let overlap = left.dot(&right);
    left /= overlap;
    let value = left.dot(&(matrix * &right));

    let right_res = relative_residual(matrix, &right, value);
    let left_res = relative_residual(&matrix.transpose(), &left, value);
    let residual = right_res.max(left_res);

    let positive = right.iter().chain(left.iter()).all(|&x| x > 0.0 && x.is_finite());
    if !(value > 0.0) || !positive || !(residual <= RESIDUAL_TOL) {
        return Err(Error::NoConvergence {
            iterations,
            residual,
        });
    }
    Ok(PerronTriple {
        value,
        right,
        left,
        residual,
    })
}

fn relative_residual(matrix: &DMatrix<f64>, x: &DVector<f64>, value: f64) -> f64 {
    let r = matrix * x - x * value;
    r.amax() / (value.abs() * x.amax())
}

/// Positive dominant eigenvector of `matrix`, with the iteration count used.
fn dominant_vector(matrix: &DMatrix<f64>, max_iters: usize) -> Result<(DVector<f64>, usize)> {
    let m = matrix.nrows();
    if m == 1 {
        return Ok((DVector::from_element(1, 1.0), 0));
    }
    let shift = SHIFT_FRACTION * matrix.max();
    let mut x = DVector::from_element(m, 1.0);
    let mut previous = f64::NAN;
    let mut iterations = 0;
    let power_cap = max_iters.min(POWER_PHASE);
    while iterations < power_cap {
        let z = matrix * &x + &x * shift;
        let quotient = z.dot(&x) / x.dot(&x);
        let top = z.max();
        if !(top > 0.0) || !top.is_finite() {
            return Err(Error::NoConvergence {
                iterations,
                residual: f64::NAN,
            });
        }
        x = z / top;
        iterations += 1;
        if (quotient - previous).abs() < QUOTIENT_TOL * quotient
            && relative_residual(matrix, &x, quotient - shift) < RESIDUAL_TOL
        {
            break;
        }
        previous = quotient;
    }

    let budget = max_iters.saturating_sub(iterations).min(REFINE_ITERS);
    iterations += noda_refine(matrix, &mut x, budget);
    Ok((x, iterations))
}

/// Shifted inverse iteration with the Collatz-Wielandt upper bound
/// `σ = max_i (Mx)_i / x_i ≥ λ` as shift. Since `σI − M` is a nonsingular
/// M-matrix for `σ > λ`, its inverse is positive and iterates stay positive.
/// Stops when the Collatz-Wielandt interval stops shrinking.
fn noda_refine(matrix: &DMatrix<f64>, x: &mut DVector<f64>, budget: usize) -> usize {
    let m = matrix.nrows();
    let mut best_gap = f64::INFINITY;
    let mut stalls = 0;
    for step in 0..budget {
        let mx = matrix * &*x;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..m {
            let ratio = mx[i] / x[i];
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return step;
        }
        let gap = hi - lo;
        if gap <= 2.0 * f64::EPSILON * hi {
            return step;
        }
        if gap < 0.5 * best_gap {
            best_gap = gap;
            stalls = 0;
        } else {
            stalls += 1;
            if stalls >= 3 {
                return step;
            }
        }
        let system = DMatrix::identity(m, m) * hi - matrix;
        let Some(z) = system.lu().solve(&*x) else {
            return step;
        };
        let z = z.abs();
        let top = z.max();
        if !(top > 0.0) || !top.is_finite() || z.iter().any(|&w| !(w > 0.0)) {
            return step;
        }
        *x = z / top;
    }
    budget
}

/// Perron data of `M(t)`: eigenvalue, analytic gradient and prefactor.
pub fn tilt(model: &PrimitiveModel, t: &[f64]) -> Result<TiltPoint> {
    let mt = m_of_t(model, t)?;
    let triple = perron_triple(&mt)?;
    let (u, v) = (&triple.right, &triple.left);
    let grad_y = DVector::from_iterator(
        model.ell(),
        model
            .counted_matrices()
            .iter()
            .zip(t)
            .map(|(a, ti)| ti.exp() * v.dot(&(a * u))),
    );
    let base = model.perron();
    let numerator = model.xi().dot(u) * v.dot(model.eta());
    let denominator = model.xi().dot(&base.right) * base.left.dot(model.eta());
    Ok(TiltPoint {
        t: DVector::from_column_slice(t),
        y: triple.value,
        grad_y,
        prefactor_r: numerator / denominator,
        triple,
    })
}

/// `G(t) = log(y(t)/λ)`, computed as `log y(t) − log λ`.
pub fn log_growth(model: &PrimitiveModel, t: &[f64]) -> Result<f64> {
    Ok(tilt(model, t)?.y.ln() - model.lambda().ln())
}

/// `∇G(t) = ∇y(t) / y(t)`.
pub fn grad_log_growth(model: &PrimitiveModel, t: &[f64]) -> Result<DVector<f64>> {
    let point = tilt(model, t)?;
    Ok(point.grad_y / point.y)
}

/// `log r(t)`.
pub fn log_prefactor(model: &PrimitiveModel, t: &[f64]) -> Result<f64> {
    Ok(tilt(model, t)?.prefactor_r.ln())
}

/// Hessian of `log y` at `t` by central differences of the analytic
/// gradient, step `cbrt(ε)·max(1, |t_i|)`, symmetrized.
pub fn hessian_log_growth(model: &PrimitiveModel, t: &[f64]) -> Result<DMatrix<f64>> {
    let ell = model.ell();
    let mut hessian = DMatrix::zeros(ell, ell);
    let base_step = f64::EPSILON.cbrt();
    let mut probe = t.to_vec();
    for i in 0..ell {
        let h = base_step * t[i].abs().max(1.0);
        probe[i] = t[i] + h;
        let upper = probe[i];
        let g_plus = grad_log_growth(model, &probe)?;
        probe[i] = t[i] - h;
        let lower = probe[i];
        let g_minus = grad_log_growth(model, &probe)?;
        probe[i] = t[i];
        hessian.set_column(i, &((g_plus - g_minus) / (upper - lower)));
    }
    Ok((&hessian + hessian.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn primitive(rep: LinearRepresentation) -> PrimitiveModel {
        PrimitiveModel::new(rep).unwrap()
    }

    const PHI: f64 = 1.618_033_988_749_895;

    #[test]
    fn tilted_matrices() {
        assert_eq!(m_of_t(&fixtures::f1(), &[0.0]).unwrap()[(0, 0)], 3.0);
        let m = m_of_t(&fixtures::f3(), &[4f64.ln()]).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[4.0, 4.0, 1.0, 4.0]);
        assert!((m - expected).amax() < 1e-14);
        assert_eq!(
            m_of_t(&fixtures::f4(), &[0.0]).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0])
        );
    }

    #[test]
    fn tilt_out_of_range_overflows() {
        assert!(matches!(
            m_of_t(&fixtures::f1(), &[800.0]),
            Err(Error::Overflow { index: 0, .. })
        ));
        assert!(matches!(
            m_of_t(&fixtures::f1(), &[-800.0]),
            Err(Error::Overflow { .. })
        ));
        assert!(matches!(
            m_of_t(&fixtures::f1(), &[0.0, 0.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn perron_examples() {
        let p = perron_triple(&DMatrix::from_element(2, 2, 1.0)).unwrap();
        assert!((p.value - 2.0).abs() < 1e-14);
        assert!((p.right - DVector::from_element(2, 1.0)).amax() < 1e-14);
        assert!((p.left - DVector::from_element(2, 0.5)).amax() < 1e-14);

        let p = perron_triple(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0])).unwrap();
        assert!((p.value - PHI).abs() < 1e-14);

        let p = perron_triple(&DMatrix::from_element(1, 1, 3.0)).unwrap();
        assert_eq!(p.value, 3.0);
        assert_eq!(p.right[0], 1.0);
        assert_eq!(p.left[0], 1.0);
    }

    #[test]
    fn perron_invariants_hold() {
        let mat = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 0.5, 1.0, 0.0, 0.0, 0.0, 3.0, 0.1]);
        let p = perron_triple(&mat).unwrap();
        assert!((p.left.dot(&p.right) - 1.0).abs() < 1e-12);
        assert!(p.residual <= RESIDUAL_TOL);
        assert!(p.right.iter().chain(p.left.iter()).all(|&x| x > 0.0));
        assert_eq!(p.right.max(), 1.0);
    }

    #[test]
    fn perron_handles_nearly_periodic_matrix() {
        // Eigenvalues ≈ ±e^{-100}: plain shifted power iteration stalls.
        let eps = (-200f64).exp();
        let mat = DMatrix::from_row_slice(2, 2, &[eps, eps, 1.0, eps]);
        let p = perron_triple(&mat).unwrap();
        let expected = eps + eps.sqrt();
        assert!((p.value - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn tilt_closed_forms() {
        let f1 = primitive(fixtures::f1());
        for s in [-1.0, 0.0, 0.7] {
            let point = tilt(&f1, &[s]).unwrap();
            assert!((point.y - (2.0 * f64::exp(s) + 1.0)).abs() < 1e-12);
            assert!((point.grad_y[0] - 2.0 * f64::exp(s)).abs() < 1e-12);
            assert!((point.prefactor_r - 1.0).abs() < 1e-12);
        }

        let f3 = primitive(fixtures::f3());
        let point = tilt(&f3, &[0.0]).unwrap();
        assert!((point.y - 2.0).abs() < 1e-14);
        assert!((point.grad_y[0] - 1.5).abs() < 1e-14);
        assert_eq!(point.prefactor_r, 1.0);

        let f4 = primitive(fixtures::f4());
        let point = tilt(&f4, &[0.0]).unwrap();
        assert!((point.y - PHI).abs() < 1e-14);
        assert!((point.grad_y[0] - 1.0 / 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn log_growth_examples() {
        let f1 = primitive(fixtures::f1());
        assert!((log_growth(&f1, &[2f64.ln()]).unwrap() - (5.0f64 / 3.0).ln()).abs() < 1e-14);
        for (_, rep) in fixtures::all() {
            let model = primitive(rep);
            let zero = vec![0.0; model.ell()];
            assert_eq!(log_growth(&model, &zero).unwrap(), 0.0);
        }
        let f4 = primitive(fixtures::f4());
        let y1 = (1.0 + (1.0 + 4.0 * 1f64.exp()).sqrt()) / 2.0;
        assert!((log_growth(&f4, &[1.0]).unwrap() - (y1 / PHI).ln()).abs() < 1e-14);
    }

    #[test]
    fn gradient_examples() {
        let g = grad_log_growth(&primitive(fixtures::f1()), &[0.0]).unwrap();
        assert!((g[0] - 2.0 / 3.0).abs() < 1e-15);
        let g = grad_log_growth(&primitive(fixtures::f3()), &[0.0]).unwrap();
        assert!((g[0] - 0.75).abs() < 1e-15);
        let g = grad_log_growth(&primitive(fixtures::f4()), &[0.0]).unwrap();
        assert!((g[0] - (5.0 - 5f64.sqrt()) / 10.0).abs() < 1e-15);
    }

    #[test]
    fn hessian_examples() {
        let h = hessian_log_growth(&primitive(fixtures::f1()), &[0.0]).unwrap();
        assert!((h[(0, 0)] - 2.0 / 9.0).abs() < 1e-9);
        let h = hessian_log_growth(&primitive(fixtures::f3()), &[0.0]).unwrap();
        assert!((h[(0, 0)] - 0.0625).abs() < 1e-9);
        let h = hessian_log_growth(&primitive(fixtures::f2()), &[0.0, 0.0]).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[3.0, -1.0, -1.0, 3.0]) / 16.0;
        assert!((h - expected).amax() < 1e-9);
    }
}
