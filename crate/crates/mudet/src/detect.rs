//! Symbol-vector estimators: the linear decorrelator and a family of robust
//! M-estimators solved by iteratively reweighted least squares.
//!
//! The observation model is `y = M theta + e` with a real chip matrix `M`
//! and complex `theta`, so the real and imaginary parts decouple into two
//! independent real regressions. Every estimator here minimizes
//! `sum_i rho(residual_i)` per part; the penalty's derivative `psi` enters
//! only through the IRLS weight `psi(r)/r`, which is non-increasing in `|r|`
//! for every kind, making each reweighted solve a descent step on the
//! objective.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::ParamError;

/// Default IRLS stopping tolerance on the relative step norm.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default cap on reweighted solves.
pub const DEFAULT_MAX_ITER: usize = 100;

/// Residual penalty selecting the estimator.
///
/// Breakpoints are in residual units. `a` ends the quadratic core, `b` ends
/// the linear (constant-influence) segment, and Hampel's `c` is where its
/// influence reaches zero. [`PenaltyFunction::ExpTail`] replaces Hampel's
/// hard cutoff with a smooth exponential redescent, so gross outliers are
/// asymptotically ignored yet never get exactly zero weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyFunction {
    /// `rho(x) = x^2 / 2`: the decorrelating detector.
    LeastSquares,
    /// Quadratic core, linear tail.
    Huber { a: f64 },
    /// Quadratic core, linear middle, influence descending linearly to zero
    /// at `c`.
    Hampel { a: f64, b: f64, c: f64 },
    /// Quadratic core, linear middle, influence redescending like
    /// `exp(1 - x^2/b^2)` past `b`.
    ExpTail { a: f64, b: f64 },
}

impl PenaltyFunction {
    pub fn huber(a: f64) -> Result<Self, ParamError> {
        let pf = Self::Huber { a };
        pf.validate()?;
        Ok(pf)
    }

    pub fn hampel(a: f64, b: f64, c: f64) -> Result<Self, ParamError> {
        let pf = Self::Hampel { a, b, c };
        pf.validate()?;
        Ok(pf)
    }

    pub fn exp_tail(a: f64, b: f64) -> Result<Self, ParamError> {
        let pf = Self::ExpTail { a, b };
        pf.validate()?;
        Ok(pf)
    }

    /// Breakpoint sanity; called by the solvers, so enum literals with bad
    /// fields are caught at use.
    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ParamError(format!(
                    "breakpoint {name} must be finite and positive, got {v}"
                )))
            }
        };
        match *self {
            Self::LeastSquares => Ok(()),
            Self::Huber { a } => positive("a", a),
            Self::Hampel { a, b, c } => {
                positive("a", a)?;
                positive("b", b)?;
                positive("c", c)?;
                if a < b && b < c {
                    Ok(())
                } else {
                    Err(ParamError(format!(
                        "breakpoints must satisfy a < b < c, got ({a}, {b}, {c})"
                    )))
                }
            }
            Self::ExpTail { a, b } => {
                positive("a", a)?;
                positive("b", b)?;
                if a < b {
                    Ok(())
                } else {
                    Err(ParamError(format!(
                        "breakpoints must satisfy a < b, got ({a}, {b})"
                    )))
                }
            }
        }
    }

    /// Penalty value; even, continuous and nonnegative.
    pub fn rho(&self, x: f64) -> f64 {
        let ax = x.abs();
        match *self {
            Self::LeastSquares => 0.5 * x * x,
            Self::Huber { a } => {
                if ax <= a {
                    0.5 * x * x
                } else {
                    a * ax - 0.5 * a * a
                }
            }
            Self::Hampel { a, b, c } => {
                if ax <= a {
                    0.5 * x * x
                } else if ax <= b {
                    a * ax - 0.5 * a * a
                } else if ax <= c {
                    let nose = c - ax;
                    a * b - 0.5 * a * a + 0.5 * a * ((c - b) - nose * nose / (c - b))
                } else {
                    0.5 * a * (b + c - a)
                }
            }
            Self::ExpTail { a, b } => {
                if ax <= a {
                    0.5 * x * x
                } else if ax <= b {
                    a * ax - 0.5 * a * a
                } else {
                    // The constant pins continuity at |x| = b.
                    let d = 1.5 * a * b - 0.5 * a * a;
                    let z = ax / b;
                    d - 0.5 * a * b * f64::exp(1.0 - z * z)
                }
            }
        }
    }

    /// Influence function `rho'`; odd by construction.
    pub fn psi(&self, x: f64) -> f64 {
        let ax = x.abs();
        let magnitude = match *self {
            Self::LeastSquares => ax,
            Self::Huber { a } => ax.min(a),
            Self::Hampel { a, b, c } => {
                if ax <= a {
                    ax
                } else if ax <= b {
                    a
                } else if ax <= c {
                    a * (c - ax) / (c - b)
                } else {
                    0.0
                }
            }
            Self::ExpTail { a, b } => {
                if ax <= a {
                    ax
                } else if ax <= b {
                    a
                } else {
                    let z = ax / b;
                    a * z * f64::exp(1.0 - z * z)
                }
            }
        };
        magnitude.copysign(x)
    }

    /// IRLS weight `psi(x)/x`, extended by `weight(0) = 1`; non-increasing
    /// in `|x|` for every kind.
    pub fn weight(&self, x: f64) -> f64 {
        let ax = x.abs();
        match *self {
            Self::LeastSquares => 1.0,
            Self::Huber { a } => {
                if ax <= a {
                    1.0
                } else {
                    a / ax
                }
            }
            Self::Hampel { a, b, c } => {
                if ax <= a {
                    1.0
                } else if ax <= b {
                    a / ax
                } else if ax <= c {
                    a * (c - ax) / ((c - b) * ax)
                } else {
                    0.0
                }
            }
            Self::ExpTail { a, b } => {
                if ax <= a {
                    1.0
                } else if ax <= b {
                    a / ax
                } else {
                    let z = ax / b;
                    (a / b) * f64::exp(1.0 - z * z)
                }
            }
        }
    }
}

/// Per-part objective `sum_i rho(y_i - (M theta)_i)`.
pub fn objective(
    y: &DVector<f64>,
    m: &DMatrix<f64>,
    theta: &DVector<f64>,
    pf: &PenaltyFunction,
) -> f64 {
    let r = y - m * theta;
    r.iter().map(|&ri| pf.rho(ri)).sum()
}

/// Estimate of the stacked coefficient vector with solver diagnostics.
#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub theta_hat: DVector<Complex64>,
    /// Reweighted solves performed (the initializing least-squares solve is
    /// not counted).
    pub iterations: usize,
    pub converged: bool,
    /// Euclidean norm of the last accepted step, maximized over the real
    /// and imaginary subproblems.
    pub final_step_norm: f64,
}

/// One real subproblem's estimate.
#[derive(Debug, Clone)]
pub struct RealEstimate {
    pub theta: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_step_norm: f64,
}

fn normal_cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, ParamError> {
    if m.nrows() < m.ncols() {
        return Err(ParamError(format!(
            "need at least as many observations as coefficients, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Cholesky::new(m.transpose() * m)
        .ok_or_else(|| ParamError("observation matrix is rank-deficient".into()))
}

fn solve_ls(chol: &Cholesky<f64, Dyn>, m: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    chol.solve(&(m.transpose() * y))
}

fn check_shapes(rows: usize, m: &DMatrix<f64>) -> Result<(), ParamError> {
    if rows != m.nrows() {
        return Err(ParamError(format!(
            "observation length {rows} does not match matrix rows {}",
            m.nrows()
        )));
    }
    Ok(())
}

fn check_solver_knobs(tol: f64, max_iter: usize) -> Result<(), ParamError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(ParamError(format!(
            "tolerance must be finite and positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(ParamError("max_iter must be at least 1".into()));
    }
    Ok(())
}

/// Runs IRLS from the given least-squares initializer. A singular weighted
/// system (possible once a zero-influence kind discards too many rows) ends
/// the iteration with `converged = false` and the last iterate kept.
fn irls_from(
    y: &DVector<f64>,
    m: &DMatrix<f64>,
    init: DVector<f64>,
    pf: &PenaltyFunction,
    tol: f64,
    max_iter: usize,
    trace: &mut dyn FnMut(&DVector<f64>),
) -> RealEstimate {
    let mut theta = init;
    trace(&theta);
    if matches!(pf, PenaltyFunction::LeastSquares) {
        return RealEstimate {
            theta,
            iterations: 0,
            converged: true,
            final_step_norm: 0.0,
        };
    }
    let mut step_norm = f64::INFINITY;
    for iteration in 1..=max_iter {
        let residual = y - m * &theta;
        let mut weighted_m = m.clone();
        let mut weighted_y = y.clone();
        for (i, &ri) in residual.iter().enumerate() {
            let w = pf.weight(ri);
            weighted_m.row_mut(i).scale_mut(w);
            weighted_y[i] *= w;
        }
        let Some(chol) = Cholesky::new(m.transpose() * &weighted_m) else {
            return RealEstimate {
                theta,
                iterations: iteration - 1,
                converged: false,
                final_step_norm: step_norm,
            };
        };
        let next = chol.solve(&(m.transpose() * &weighted_y));
        step_norm = (&next - &theta).norm();
        theta = next;
        trace(&theta);
        if step_norm <= tol * (1.0 + theta.norm()) {
            return RealEstimate {
                theta,
                iterations: iteration,
                converged: true,
                final_step_norm: step_norm,
            };
        }
    }
    RealEstimate {
        theta,
        iterations: max_iter,
        converged: false,
        final_step_norm: step_norm,
    }
}

/// M-estimate of one real subproblem, reporting every accepted iterate
/// (including the least-squares initializer) to `trace`.
pub fn m_estimate_real_traced(
    y: &DVector<f64>,
    m: &DMatrix<f64>,
    pf: &PenaltyFunction,
    tol: f64,
    max_iter: usize,
    trace: &mut dyn FnMut(&DVector<f64>),
) -> Result<RealEstimate, ParamError> {
    pf.validate()?;
    check_shapes(y.len(), m)?;
    check_solver_knobs(tol, max_iter)?;
    let chol = normal_cholesky(m)?;
    let init = solve_ls(&chol, m, y);
    Ok(irls_from(y, m, init, pf, tol, max_iter, trace))
}

/// M-estimate of one real subproblem.
pub fn m_estimate_real(
    y: &DVector<f64>,
    m: &DMatrix<f64>,
    pf: &PenaltyFunction,
    tol: f64,
    max_iter: usize,
) -> Result<RealEstimate, ParamError> {
    m_estimate_real_traced(y, m, pf, tol, max_iter, &mut |_| {})
}

/// M-estimate of the complex coefficient vector: the real and imaginary
/// parts are solved as independent real regressions sharing the matrix
/// factorization. The least-squares kind reproduces [`decorrelate`] exactly.
pub fn m_estimate(
    y: &DVector<Complex64>,
    m: &DMatrix<f64>,
    pf: &PenaltyFunction,
    tol: f64,
    max_iter: usize,
) -> Result<EstimateResult, ParamError> {
    pf.validate()?;
    check_shapes(y.len(), m)?;
    check_solver_knobs(tol, max_iter)?;
    let chol = normal_cholesky(m)?;
    let mut noop = |_: &DVector<f64>| {};

    let y_re = y.map(|z| z.re);
    let init_re = solve_ls(&chol, m, &y_re);
    let re = irls_from(&y_re, m, init_re, pf, tol, max_iter, &mut noop);

    let y_im = y.map(|z| z.im);
    let init_im = solve_ls(&chol, m, &y_im);
    let im = irls_from(&y_im, m, init_im, pf, tol, max_iter, &mut noop);

    let theta_hat = DVector::from_iterator(
        re.theta.len(),
        re.theta
            .iter()
            .zip(im.theta.iter())
            .map(|(&a, &b)| Complex64::new(a, b)),
    );
    Ok(EstimateResult {
        theta_hat,
        iterations: re.iterations.max(im.iterations),
        converged: re.converged && im.converged,
        final_step_norm: re.final_step_norm.max(im.final_step_norm),
    })
}

/// Least-squares solution of `y = M theta`: the decorrelating detector's
/// coefficient estimate.
pub fn decorrelate(
    y: &DVector<Complex64>,
    m: &DMatrix<f64>,
) -> Result<DVector<Complex64>, ParamError> {
    check_shapes(y.len(), m)?;
    let chol = normal_cholesky(m)?;
    let re = solve_ls(&chol, m, &y.map(|z| z.re));
    let im = solve_ls(&chol, m, &y.map(|z| z.im));
    Ok(DVector::from_iterator(
        re.len(),
        re.iter()
            .zip(im.iter())
            .map(|(&a, &b)| Complex64::new(a, b)),
    ))
}

/// Coherent sign decisions `sign(Re(conj(g) * theta_hat))`, ties to +1.
pub fn detect_symbols(
    theta_hat: &[Complex64],
    fading: &[Complex64],
) -> Result<Vec<i8>, ParamError> {
    if theta_hat.len() != fading.len() {
        return Err(ParamError(format!(
            "{} estimates against {} fading coefficients",
            theta_hat.len(),
            fading.len()
        )));
    }
    if fading.iter().any(|g| g.norm_sqr() == 0.0) {
        return Err(ParamError(
            "zero fading coefficient, coherent decision undefined".into(),
        ));
    }
    Ok(theta_hat
        .iter()
        .zip(fading)
        .map(|(t, g)| if (g.conj() * t).re >= 0.0 { 1 } else { -1 })
        .collect())
}
