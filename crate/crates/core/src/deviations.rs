//! Large and moderate deviation rate functions.
//!
//! `Y_n / n` satisfies a large deviation principle with speed `n` and rate
//!
//! ```text
//! G*(x) = sup_t { t·x − G(t) },    G(t) = log(y(t)/λ),
//! ```
//!
//! finite at most on the simplex `{x_i ≥ 0, Σ x_i ≤ 1}` and vanishing only
//! at `β = ∇G(0)`. Moderate deviations of `(Y_n − nβ)/√(n/a_n)` are governed
//! by `J*(x) = sup_t { t·x − ½ t′Γt }`, which equals `½ x′Γ⁻¹x` when `Γ` is
//! invertible.
//!
//! The supremum defining `G*` is a smooth concave maximization solved by
//! damped Newton on `f(t) = t·x − G(t)`, with `∇f = x − ∇G(t)` and
//! `Hf = −H log y(t)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::asymptotics::summary;
use crate::error::{Error, Result};
use crate::exact::{exact_distribution_with_budget, Region, SimplexIndex};
use crate::model::PrimitiveModel;
use crate::report::{fmt_num, numbered, Table};
use crate::spectral::{hessian_log_growth, tilt};

/// Tolerance for membership in the closed simplex.
pub const SIMPLEX_SLACK: f64 = 1e-12;

/// Relative eigenvalue cutoff below which `Γ` is treated as singular.
pub const GAMMA_CUTOFF: f64 = 1e-9;

/// Least-squares residual below which `x` is taken to lie in `range(Γ)`.
pub const RANGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateStatus {
    Interior,
    OutsideSimplex,
    BoundaryUnresolved,
}

impl RateStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RateStatus::Interior => "interior",
            RateStatus::OutsideSimplex => "outside_simplex",
            RateStatus::BoundaryUnresolved => "boundary_unresolved",
        }
    }
}

/// Value of `G*` at one point with its Legendre dual.
#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    pub x: Vec<f64>,
    /// `+∞` when outside the simplex; a lower bound when unresolved.
    pub value: f64,
    pub maximizer_t: Option<Vec<f64>>,
    pub status: RateStatus,
    pub iterations: usize,
    /// `‖x − ∇G(t)‖₂` at the returned `t`.
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop when `‖∇f‖₂` falls below this.
    pub grad_tol: f64,
    /// Give up (boundary_unresolved) once `‖t‖∞` exceeds this.
    pub t_max: f64,
    pub max_iters: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            t_max: 200.0,
            max_iters: 500,
        }
    }
}

/// Closed simplex membership with [`SIMPLEX_SLACK`].
pub fn in_simplex(x: &[f64]) -> bool {
    x.iter().all(|&v| v >= -SIMPLEX_SLACK) && x.iter().sum::<f64>() <= 1.0 + SIMPLEX_SLACK
}

/// Some `x_i = 0` or `Σ x_i = 1`, within [`SIMPLEX_SLACK`].
pub fn on_simplex_boundary(x: &[f64]) -> bool {
    x.iter().any(|&v| v <= SIMPLEX_SLACK) || x.iter().sum::<f64>() >= 1.0 - SIMPLEX_SLACK
}

struct DualPoint {
    t: DVector<f64>,
    value: f64,
    gradient: DVector<f64>,
}

fn dual_point(model: &PrimitiveModel, x: &DVector<f64>, t: DVector<f64>) -> Result<DualPoint> {
    let point = tilt(model, t.as_slice())?;
    let growth = point.y.ln() - model.lambda().ln();
    let gradient = x - point.grad_y / point.y;
    Ok(DualPoint {
        value: t.dot(x) - growth,
        t,
        gradient,
    })
}

/// Solves `H d = g` with eigenvalues of `H` floored to keep `d` an ascent
/// direction when the Hessian is numerically singular.
fn newton_direction(hessian: &DMatrix<f64>, gradient: &DVector<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new(hessian.clone());
    let scale = eig.eigenvalues.amax().max(1e-300);
    let floor = 1e-12 * scale.max(1.0);
    let coords = eig.eigenvectors.transpose() * gradient;
    let scaled = DVector::from_iterator(
        coords.len(),
        coords
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, &l)| c / l.max(floor)),
    );
    &eig.eigenvectors * scaled
}

/// `G*(x)` with default solver options.
pub fn rate_g_star(model: &PrimitiveModel, x: &[f64]) -> Result<RateResult> {
    rate_g_star_with(model, x, &NewtonOptions::default())
}

/// `G*(x)` by damped Newton from `t = 0` with backtracking.
pub fn rate_g_star_with(
    model: &PrimitiveModel,
    x: &[f64],
    options: &NewtonOptions,
) -> Result<RateResult> {
    let ell = model.ell();
    if x.len() != ell {
        return Err(Error::InvalidArgument(format!(
            "point has {} components, model counts {ell} symbols",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("point must be finite".into()));
    }
    if !in_simplex(x) {
        return Ok(RateResult {
            x: x.to_vec(),
            value: f64::INFINITY,
            maximizer_t: None,
            status: RateStatus::OutsideSimplex,
            iterations: 0,
            gradient_norm: f64::NAN,
        });
    }

    let xv = DVector::from_column_slice(x);
    let mut current = dual_point(model, &xv, DVector::zeros(ell))?;
    // On the simplex boundary the value is only ever a limit; never call it interior.
    let on_face = on_simplex_boundary(x);
    let finish = |p: &DualPoint, status, iterations| RateResult {
        x: x.to_vec(),
        value: p.value.max(0.0),
        maximizer_t: Some(p.t.iter().copied().collect()),
        status: if on_face { RateStatus::BoundaryUnresolved } else { status },
        iterations,
        gradient_norm: p.gradient.norm(),
    };

    for iteration in 0..options.max_iters {
        let gnorm = current.gradient.norm();
        if gnorm <= options.grad_tol {
            return Ok(finish(&current, RateStatus::Interior, iteration));
        }
        let hessian = hessian_log_growth(model, current.t.as_slice())?;
        let direction = newton_direction(&hessian, &current.gradient);
        let slope = current.gradient.dot(&direction);

        // Steps heading off to infinity are cut at twice the t-range.
        let reach = (&current.t + &direction).amax();
        let mut alpha: f64 = if reach > 2.0 * options.t_max {
            let mut lo = 0.0;
            let mut hi = 1.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (&current.t + &direction * mid).amax() > 2.0 * options.t_max {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            lo
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..60 {
            let trial_t = &current.t + &direction * alpha;
            if let Ok(trial) = dual_point(model, &xv, trial_t) {
                let armijo = trial.value >= current.value + 1e-4 * alpha * slope;
                let rounding = 1e-14 * current.value.abs().max(1.0);
                let polish = trial.value >= current.value - rounding
                    && trial.gradient.norm() < gnorm;
                if armijo || polish {
                    accepted = Some(trial);
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some(next) = accepted else {
            return Ok(finish(&current, RateStatus::BoundaryUnresolved, iteration + 1));
        };
        current = next;
        if current.t.amax() > options.t_max {
            return Ok(finish(&current, RateStatus::BoundaryUnresolved, iteration + 1));
        }
    }
    let status = if current.gradient.norm() <= options.grad_tol {
        RateStatus::Interior
    } else {
        RateStatus::BoundaryUnresolved
    };
    Ok(finish(&current, status, options.max_iters))
}

/// Points `k·step` of the closed simplex, `k ∈ ℕ^ℓ`, in lexicographic order.
pub fn simplex_grid(ell: usize, step: f64) -> Result<Vec<Vec<f64>>> {
    if !(step > 0.0) || step > 1.0 {
        return Err(Error::InvalidArgument("grid step must lie in (0, 1]".into()));
    }
    let size = (1.0 / step + 1e-9).floor() as usize;
    Ok(SimplexIndex::new(size, ell)
        .points()
        .map(|k| k.iter().map(|&ki| ki as f64 * step).collect())
        .collect())
}

pub fn rate_table(ell: usize, results: &[RateResult]) -> Table {
    let mut header = numbered("x", ell);
    header.push("value".into());
    header.push("status".into());
    header.extend(numbered("t", ell));
    header.push("iterations".into());
    let mut table = Table::new(header);
    for r in results {
        let mut row: Vec<String> = r.x.iter().map(|&v| fmt_num(v)).collect();
        row.push(fmt_num(r.value));
        row.push(r.status.as_str().into());
        match &r.maximizer_t {
            Some(t) => row.extend(t.iter().map(|&v| fmt_num(v))),
            None => row.extend(std::iter::repeat_n(String::new(), ell)),
        }
        row.push(r.iterations.to_string());
        table.push(row);
    }
    table
}

/// Value of the moderate-deviation rate `J*` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ModerateRateResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gamma_invertible: bool,
}

/// `J*(x)` using `Γ` from [`summary`].
pub fn rate_j_star(model: &PrimitiveModel, x: &[f64]) -> Result<ModerateRateResult> {
    rate_j_star_with_gamma(&summary(model)?.gamma, x)
}

/// `J*(x)` for a given `Γ`: `½ x′Γ⁻¹x` by Cholesky solve when `Γ` is
/// invertible, otherwise the supremum of the quadratic via
/// [`quadratic_conjugate`].
pub fn rate_j_star_with_gamma(gamma: &DMatrix<f64>, x: &[f64]) -> Result<ModerateRateResult> {
    if x.len() != gamma.nrows() {
        return Err(Error::InvalidArgument(format!(
            "point has {} components, covariance is {}x{}",
            x.len(),
            gamma.nrows(),
            gamma.ncols()
        )));
    }
    let eig = SymmetricEigen::new(gamma.clone());
    let top = eig.eigenvalues.max();
    let gamma_invertible = top > 0.0 && eig.eigenvalues.min() > GAMMA_CUTOFF * top;
    let xv = DVector::from_column_slice(x);
    let value = if gamma_invertible {
        let t = match gamma.clone().cholesky() {
            Some(ch) => ch.solve(&xv),
            None => gamma
                .clone()
                .lu()
                .solve(&xv)
                .ok_or_else(|| Error::DegenerateValue("covariance is singular".into()))?,
        };
        0.5 * xv.dot(&t)
    } else {
        quadratic_conjugate(gamma, x)
    };
    Ok(ModerateRateResult {
        x: x.to_vec(),
        value,
        gamma_invertible,
    })
}

/// `sup_t { t·x − ½ t′Γt }` for symmetric PSD `Γ` through the spectral
/// pseudo-inverse: finite iff `x ∈ range(Γ)`.
pub fn quadratic_conjugate(gamma: &DMatrix<f64>, x: &[f64]) -> f64 {
    let eig = SymmetricEigen::new(gamma.clone());
    let top = eig.eigenvalues.amax();
    let xv = DVector::from_column_slice(x);
    let coords = eig.eigenvectors.transpose() * &xv;
    let scaled = DVector::from_iterator(
        coords.len(),
        coords.iter().zip(eig.eigenvalues.iter()).map(|(c, &l)| {
            if top > 0.0 && l > GAMMA_CUTOFF * top {
                c / l
            } else {
                0.0
            }
        }),
    );
    let t = &eig.eigenvectors * scaled;
    let residual = (gamma * &t - &xv).norm();
    if residual > RANGE_TOL {
        return f64::INFINITY;
    }
    t.dot(&xv) - 0.5 * (t.transpose() * gamma * &t)[(0, 0)]
}

pub fn moderate_table(ell: usize, results: &[ModerateRateResult]) -> Table {
    let mut header = numbered("x", ell);
    header.push("value".into());
    header.push("gamma_invertible".into());
    let mut table = Table::new(header);
    for r in results {
        let mut row: Vec<String> = r.x.iter().map(|&v| fmt_num(v)).collect();
        row.push(fmt_num(r.value));
        row.push(r.gamma_invertible.to_string());
        table.push(row);
    }
    table
}

/// Exact versus theoretical decay rate of `P(‖Y_n/n − x₀‖∞ ≥ δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdpRow {
    pub n: usize,
    /// `−(1/n) log P(tail)`, `+∞` when the tail is empty.
    pub exact_rate: f64,
    /// `inf G*` over the closed tail region.
    pub theoretical_rate: f64,
}

/// `inf { G*(x) : x ∈ simplex, ‖x − x₀‖∞ ≥ δ }`.
///
/// Zero when `β` lies in the region. Otherwise the infimum sits on the
/// boundary of the sup-norm ball, since `G*` is convex with its minimum at
/// `β` inside the ball; each face is scanned on a grid and refined by
/// compass search.
pub fn region_rate(model: &PrimitiveModel, x0: &[f64], delta: f64) -> Result<f64> {
    let ell = model.ell();
    if x0.len() != ell {
        return Err(Error::InvalidArgument(format!(
            "center has {} components, model counts {ell} symbols",
            x0.len()
        )));
    }
    let zero = vec![0.0; ell];
    let point = tilt(model, &zero)?;
    let beta = point.grad_y / point.y;
    let beta_dist = beta
        .iter()
        .zip(x0)
        .map(|(b, c)| (b - c).abs())
        .fold(0.0, f64::max);
    if delta <= SIMPLEX_SLACK || beta_dist >= delta - SIMPLEX_SLACK {
        return Ok(0.0);
    }

    let rate = |x: &[f64]| -> Result<f64> { Ok(rate_g_star(model, x)?.value) };
    let mut best = f64::INFINITY;
    for axis in 0..ell {
        for sign in [-1.0, 1.0] {
            let fixed = x0[axis] + sign * delta;
            if !(-SIMPLEX_SLACK..=1.0 + SIMPLEX_SLACK).contains(&fixed) {
                continue;
            }
            best = best.min(face_minimum(&rate, x0, delta, axis, fixed)?);
        }
    }
    Ok(best)
}

fn face_minimum<F>(rate: &F, x0: &[f64], delta: f64, axis: usize, fixed: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let ell = x0.len();
    let free: Vec<usize> = (0..ell).filter(|&j| j != axis).collect();
    let bounds: Vec<(f64, f64)> = free
        .iter()
        .map(|&j| ((x0[j] - delta).max(0.0), (x0[j] + delta).min(1.0)))
        .collect();
    let make = |coords: &[f64]| {
        let mut x = vec![0.0; ell];
        x[axis] = fixed;
        for (&j, &c) in free.iter().zip(coords) {
            x[j] = c;
        }
        x
    };
    if free.is_empty() {
        return rate(&make(&[]));
    }

    const GRID: usize = 10;
    let mut best_value = f64::INFINITY;
    let mut best_coords = Vec::new();
    let mut counter = vec![0usize; free.len()];
    loop {
        let coords: Vec<f64> = counter
            .iter()
            .zip(&bounds)
            .map(|(&c, &(lo, hi))| lo + (hi - lo) * c as f64 / GRID as f64)
            .collect();
        let value = rate(&make(&coords))?;
        if value < best_value {
            best_value = value;
            best_coords = coords;
        }
        let Some(pos) = counter.iter().position(|&c| c < GRID) else {
            break;
        };
        counter[pos] += 1;
        counter[..pos].iter_mut().for_each(|c| *c = 0);
    }
    if !best_value.is_finite() {
        return Ok(best_value);
    }

    let mut step = bounds
        .iter()
        .map(|(lo, hi)| (hi - lo) / GRID as f64)
        .fold(0.0, f64::max);
    let floor = 1e-10 * delta.max(1e-3);
    while step > floor {
        let mut improved = false;
        for k in 0..free.len() {
            for sign in [-1.0, 1.0] {
                let mut trial = best_coords.clone();
                let (lo, hi) = bounds[k];
                trial[k] = (trial[k] + sign * step).clamp(lo, hi);
                let value = rate(&make(&trial))?;
                if value < best_value {
                    best_value = value;
                    best_coords = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(best_value)
}

/// Exact tail decay rates at each `n` next to the LDP prediction.
pub fn ldp_verify(
    model: &PrimitiveModel,
    x0: &[f64],
    delta: f64,
    n_list: &[usize],
    budget: u128,
) -> Result<Vec<LdpRow>> {
    let theoretical_rate = region_rate(model, x0, delta)?;
    let region = Region::SupBall {
        center: x0.to_vec(),
        radius: delta,
        complement: true,
    };
    n_list
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::InvalidArgument("lengths must be positive".into()));
            }
            let tail = exact_distribution_with_budget(model, n, budget)?.probability_of(&region);
            let exact_rate = if tail > 0.0 {
                (-tail.ln() / n as f64).max(0.0)
            } else {
                f64::INFINITY
            };
            Ok(LdpRow {
                n,
                exact_rate,
                theoretical_rate,
            })
        })
        .collect()
}

pub fn ldp_table(rows: &[LdpRow]) -> Table {
    let mut table = Table::new(vec![
        "n".into(),
        "exact_rate".into(),
        "theoretical_rate".into(),
    ]);
    for r in rows {
        table.push(vec![
            r.n.to_string(),
            fmt_num(r.exact_rate),
            fmt_num(r.theoretical_rate),
        ]);
    }
    table
}
