//! Newton iteration for `F(b) = 0` and continuation in the attack angle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{compute_coefficients, OdeCoefficients, ProblemConfig};
use crate::spectral::{GalerkinSystem, SpectralCoefficients, SpectralError};

/// Reciprocal condition estimate below which the Jacobian counts as singular.
pub const RCOND_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("singular Jacobian at iteration {iteration} (rcond = {rcond:e})")]
    SingularJacobian { iteration: usize, rcond: f64 },
    #[error("no convergence after {} iterations (last step {:e})", .report.iterations, .report.final_step_norm)]
    NoConvergence { report: SolveReport },
    #[error("non-finite iterate at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("continuation failed at alpha = {alpha}: {source}")]
    Continuation {
        alpha: f64,
        #[source]
        source: Box<SolverError>,
    },
    #[error("continuation needs at least one step")]
    NoSteps,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// A square nonlinear system with an analytic Jacobian.
pub trait NonlinearSystem {
    fn dim(&self) -> usize;
    fn residual(&self, x: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    #[default]
    MaxAbs,
    Euclidean,
}

impl NormKind {
    pub fn apply(self, v: &DVector<f64>) -> f64 {
        match self {
            NormKind::MaxAbs => v.amax(),
            NormKind::Euclidean => v.norm(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub max_iterations: usize,
    /// Stop once the step norm drops below this.
    pub tolerance: f64,
    /// Fixed step scaling in `(0, 1]`.
    pub damping: f64,
    pub norm: NormKind,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-12,
            damping: 1.0,
            norm: NormKind::MaxAbs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    /// Newton updates applied. The final sub-tolerance step is only used as
    /// the stopping test and is not counted.
    pub iterations: usize,
    pub final_step_norm: f64,
    /// `max |F(b)|` at the returned iterate.
    pub final_residual_norm: f64,
    /// Step norm of every linear solve, including the final one.
    pub history: Vec<f64>,
}

/// `rcond = 1 / (‖A‖₁ ‖A⁻¹‖₁)`, zero when the factorisation fails.
fn solve_with_rcond(jac: DMatrix<f64>, rhs: &DVector<f64>) -> (Option<DVector<f64>>, f64) {
    let norm1 = |m: &DMatrix<f64>| {
        m.column_iter()
            .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let a_norm = norm1(&jac);
    let lu = jac.lu();
    let Some(inv) = lu.try_inverse() else {
        return (None, 0.0);
    };
    let rcond = 1.0 / (a_norm * norm1(&inv));
    (lu.solve(rhs), rcond)
}

/// Plain (optionally damped) Newton: `x ← x − λ DF(x)⁻¹ F(x)` until the step
/// norm falls below the tolerance. The sub-tolerance step is not applied.
pub fn newton<S: NonlinearSystem>(
    system: &S,
    initial: DVector<f64>,
    cfg: &NewtonConfig,
) -> Result<(DVector<f64>, SolveReport), SolverError> {
    let mut x = initial;
    let mut fx = system.residual(&x);
    let mut history = Vec::new();
    let mut applied = 0;
    for iteration in 1..=cfg.max_iterations.max(1) {
        let (step, rcond) = solve_with_rcond(system.jacobian(&x), &fx);
        let step = match step {
            Some(s) if rcond >= RCOND_THRESHOLD => s,
            _ => return Err(SolverError::SingularJacobian { iteration, rcond }),
        };
        let step_norm = cfg.norm.apply(&step);
        if !step_norm.is_finite() {
            return Err(SolverError::NonFinite { iteration });
        }
        history.push(step_norm);
        if step_norm < cfg.tolerance {
            let report = SolveReport {
                converged: true,
                iterations: applied,
                final_step_norm: step_norm,
                final_residual_norm: fx.amax(),
                history,
            };
            return Ok((x, report));
        }
        x -= cfg.damping * step;
        fx = system.residual(&x);
        applied += 1;
    }
    let report = SolveReport {
        converged: false,
        iterations: applied,
        final_step_norm: history.last().copied().unwrap_or(f64::INFINITY),
        final_residual_norm: fx.amax(),
        history,
    };
    Err(SolverError::NoConvergence { report })
}

/// Newton on the truncated Galerkin system.
pub fn newton_solve(
    initial: &SpectralCoefficients,
    ode: &OdeCoefficients,
    cfg: &NewtonConfig,
) -> Result<(SpectralCoefficients, SolveReport), SolverError> {
    let system = GalerkinSystem::new(*ode, initial.truncation())?;
    let x0 = DVector::from_column_slice(initial.as_slice());
    let (x, report) = newton(&system, x0, cfg)?;
    Ok((SpectralCoefficients::new(x.as_slice().to_vec())?, report))
}

/// Solves for attack angles `α_k = (k/steps)·α0`, k = 1..=steps, starting
/// from `b = 0` (exact at α = 0) and warm-starting each step from the last.
pub fn continuation_solve(
    config: &ProblemConfig,
    steps: usize,
    cfg: &NewtonConfig,
) -> Result<(SpectralCoefficients, Vec<SolveReport>), SolverError> {
    if steps == 0 {
        return Err(SolverError::NoSteps);
    }
    let mut b = SpectralCoefficients::zeros(config.truncation);
    let mut reports = Vec::with_capacity(steps);
    for k in 1..=steps {
        let alpha = config.alpha0 * k as f64 / steps as f64;
        let ode = compute_coefficients(&config.with_alpha0(alpha));
        let (next, report) =
            newton_solve(&b, &ode, cfg).map_err(|e| SolverError::Continuation {
                alpha,
                source: Box::new(e),
            })?;
        b = next;
        reports.push(report);
    }
    Ok((b, reports))
}

/// Default continuation steps: one per π/72 of attack angle, at least one.
pub fn default_continuation_steps(alpha0: f64) -> usize {
    ((alpha0.abs() / (std::f64::consts::PI / 72.0)).ceil() as usize).max(1)
}
