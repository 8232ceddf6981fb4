//! Physical parameters, ODE coefficients, upstream traces and the pressure law.
//!
//! Angles are in radians. The freestream density is normalised to one and
//! never appears as a parameter.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("semi-vertex angle must lie in (0, pi/2), got {0}")]
    InvalidSemiVertexAngle(f64),
    #[error("attack angle must be finite, got {0}")]
    InvalidAttackAngle(f64),
    #[error("truncation order must be at least 4, got {0}")]
    TruncationTooSmall(usize),
    #[error("freestream Mach number must be positive and finite, got {0}")]
    InvalidMach(f64),
    #[error("profile arrays differ in length ({phi} angles, {f} values) or are empty")]
    ProfileShape { phi: usize, f: usize },
    #[error("pressure base (u0.n)^2 - f cot(theta0) is {base:e} <= 0 at phi = {phi}")]
    NonPositiveBase { phi: f64, base: f64 },
}

/// Upstream gas model; fixes the freestream pressure `p0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GasModel {
    /// `M∞ = ∞`, `p0 = 0`.
    HypersonicLimit,
    /// Chaplygin gas `p = -A/ρ`, `p0 = -1/M∞²`.
    Chaplygin { mach_infinity: f64 },
}

impl GasModel {
    pub fn chaplygin(mach_infinity: f64) -> Result<Self, ModelError> {
        if !(mach_infinity.is_finite() && mach_infinity > 0.0) {
            return Err(ModelError::InvalidMach(mach_infinity));
        }
        Ok(GasModel::Chaplygin { mach_infinity })
    }

    pub fn freestream_pressure(&self) -> f64 {
        match *self {
            GasModel::HypersonicLimit => 0.0,
            GasModel::Chaplygin { mach_infinity } => -1.0 / (mach_infinity * mach_infinity),
        }
    }

    pub fn mach_infinity(&self) -> Option<f64> {
        match *self {
            GasModel::HypersonicLimit => None,
            GasModel::Chaplygin { mach_infinity } => Some(mach_infinity),
        }
    }
}

/// Which closed form to use for `a6`.
///
/// `Printed` is the published coefficient list. `TraceDerived` replaces the
/// factor `1 + (2/3) sin²θ0` in `a6` by `1 + (3/2) sin²θ0`, which is what
/// substituting the upstream traces into the first-order system yields; with
/// it the recovered `h` satisfies the second first-order equation exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientForm {
    #[default]
    Printed,
    TraceDerived,
}

/// Cone geometry, gas model and Galerkin truncation order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub theta0: f64,
    pub alpha0: f64,
    pub gas: GasModel,
    pub truncation: usize,
    #[serde(default)]
    pub coefficient_form: CoefficientForm,
}

impl ProblemConfig {
    /// Validates `0 < θ0 < π/2` and `N ≥ 4`. Attack angles outside `[0, θ0)`
    /// are accepted; see [`ProblemConfig::in_nominal_range`].
    pub fn new(
        theta0: f64,
        alpha0: f64,
        gas: GasModel,
        truncation: usize,
    ) -> Result<Self, ModelError> {
        if !(theta0 > 0.0 && theta0 < FRAC_PI_2) {
            return Err(ModelError::InvalidSemiVertexAngle(theta0));
        }
        if !alpha0.is_finite() {
            return Err(ModelError::InvalidAttackAngle(alpha0));
        }
        if truncation < 4 {
            return Err(ModelError::TruncationTooSmall(truncation));
        }
        if let GasModel::Chaplygin { mach_infinity } = gas {
            GasModel::chaplygin(mach_infinity)?;
        }
        Ok(Self {
            theta0,
            alpha0,
            gas,
            truncation,
            coefficient_form: CoefficientForm::Printed,
        })
    }

    pub fn hypersonic(theta0: f64, alpha0: f64, truncation: usize) -> Result<Self, ModelError> {
        Self::new(theta0, alpha0, GasModel::HypersonicLimit, truncation)
    }

    pub fn with_coefficient_form(mut self, form: CoefficientForm) -> Self {
        self.coefficient_form = form;
        self
    }

    pub fn with_alpha0(mut self, alpha0: f64) -> Self {
        self.alpha0 = alpha0;
        self
    }

    pub fn with_truncation(mut self, truncation: usize) -> Result<Self, ModelError> {
        if truncation < 4 {
            return Err(ModelError::TruncationTooSmall(truncation));
        }
        self.truncation = truncation;
        Ok(self)
    }

    /// `0 ≤ α0 < θ0`.
    pub fn in_nominal_range(&self) -> bool {
        self.alpha0 >= 0.0 && self.alpha0 < self.theta0
    }

    pub fn p0(&self) -> f64 {
        self.gas.freestream_pressure()
    }

    pub fn trace(&self) -> UpstreamTrace {
        UpstreamTrace::new(self.theta0, self.alpha0)
    }

    pub fn coefficients(&self) -> OdeCoefficients {
        compute_coefficients(self)
    }
}

/// The six scalars of the reduced second-order ODE for `f(φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
}

impl OdeCoefficients {
    pub fn new(theta0: f64, alpha0: f64, form: CoefficientForm) -> Self {
        let (st, ct) = theta0.sin_cos();
        let st2 = st * st;
        let sa2 = alpha0.sin().powi(2);
        let s2a = (2.0 * alpha0).sin();
        let a6_factor = match form {
            CoefficientForm::Printed => 2.0 / 3.0,
            CoefficientForm::TraceDerived => 1.5,
        };
        Self {
            a1: -2.0 / 3.0 * st2 * s2a,
            a2: 1.0 / 3.0 * (2.0 * theta0).sin() * sa2,
            a3: 3.0 * st2,
            a4: 0.75 * st2 * (2.0 * theta0).sin() * (3.0 * alpha0.cos().powi(2) - 1.0),
            a5: 0.5 * st2 * s2a * (1.0 - 3.0 * (2.0 * theta0).cos()),
            a6: -st * ct * sa2 * (1.0 + a6_factor * st2),
        }
    }

    /// `a1 sin φ + a2 sin 2φ`, the coefficient of `ḟ`.
    #[inline]
    pub fn forcing(&self, phi: f64) -> f64 {
        self.a1 * phi.sin() + self.a2 * (2.0 * phi).sin()
    }

    /// `a4 + a5 cos φ + a6 cos 2φ`, the coefficient of `f`.
    #[inline]
    pub fn linear(&self, phi: f64) -> f64 {
        self.a4 + self.a5 * phi.cos() + self.a6 * (2.0 * phi).cos()
    }
}

pub fn compute_coefficients(config: &ProblemConfig) -> OdeCoefficients {
    OdeCoefficients::new(config.theta0, config.alpha0, config.coefficient_form)
}

/// Freestream quantities traced on the cone surface as functions of azimuth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpstreamTrace {
    pub theta0: f64,
    pub alpha0: f64,
}

impl UpstreamTrace {
    pub fn new(theta0: f64, alpha0: f64) -> Self {
        Self { theta0, alpha0 }
    }

    /// Normal component `(u0, n)`.
    #[inline]
    pub fn un(&self, phi: f64) -> f64 {
        self.alpha0.cos() * self.theta0.sin() - self.alpha0.sin() * self.theta0.cos() * phi.cos()
    }

    /// Azimuthal component `(u0, t)`.
    #[inline]
    pub fn ut(&self, phi: f64) -> f64 {
        self.alpha0.sin() * phi.sin()
    }

    /// Radial component `w0`.
    #[inline]
    pub fn w0(&self, phi: f64) -> f64 {
        self.alpha0.cos() * self.theta0.cos() + self.alpha0.sin() * self.theta0.sin() * phi.cos()
    }

    /// `ρ0 (u0,n)(u0,t)`.
    #[inline]
    pub fn a_forcing(&self, phi: f64) -> f64 {
        self.un(phi) * self.ut(phi)
    }

    /// `ρ0 w0 (u0,n)`.
    #[inline]
    pub fn b_forcing(&self, phi: f64) -> f64 {
        self.w0(phi) * self.un(phi)
    }

    /// Tangential forcing in the orientation of the φ-form ODE:
    /// `a1 sin φ + a2 sin 2φ = (4/3) sin θ0 · tangential_forcing(φ)`.
    ///
    /// The printed coefficients correspond to `-(u0,n)(u0,t)`, i.e. the
    /// tangent vector pointing toward decreasing φ.
    #[inline]
    pub fn tangential_forcing(&self, phi: f64) -> f64 {
        -self.a_forcing(phi)
    }

    /// Derivative of [`Self::tangential_forcing`] with respect to φ.
    pub fn tangential_forcing_dphi(&self, phi: f64) -> f64 {
        let dun = self.alpha0.sin() * self.theta0.cos() * phi.sin();
        let dut = self.alpha0.sin() * phi.cos();
        -(dun * self.ut(phi) + self.un(phi) * dut)
    }
}

/// Left-hand side minus right-hand side of the reduced ODE at one point.
#[inline]
pub fn ode_residual_pointwise(
    f: f64,
    fdot: f64,
    fddot: f64,
    phi: f64,
    coeffs: &OdeCoefficients,
) -> f64 {
    let g = coeffs.forcing(phi);
    f * fddot - 2.0 / 3.0 * fdot * fdot + g * fdot + coeffs.a3 * f * f + coeffs.linear(phi) * f
        - 0.375 * g * g
}

/// Generalised Newton–Busemann surface force density `W_C(φ)`.
#[inline]
pub fn pressure_wc(f_at_phi: f64, phi: f64, config: &ProblemConfig) -> f64 {
    let un = config.trace().un(phi);
    un * un - f_at_phi / config.theta0.tan() + config.p0()
}

/// Smallest freestream Mach number for which the Chaplygin layer is valid,
/// `sup_φ ((u0,n)² - f cot θ0)^(-1/2)` over the sampled profile.
pub fn chaplygin_min_mach(
    trace: &UpstreamTrace,
    phi: &[f64],
    f: &[f64],
) -> Result<f64, ModelError> {
    if phi.len() != f.len() || phi.is_empty() {
        return Err(ModelError::ProfileShape {
            phi: phi.len(),
            f: f.len(),
        });
    }
    let cot = 1.0 / trace.theta0.tan();
    let mut sup = f64::NEG_INFINITY;
    for (&p, &fv) in phi.iter().zip(f) {
        let un = trace.un(p);
        let base = un * un - fv * cot;
        if !(base > 0.0) {
            return Err(ModelError::NonPositiveBase { phi: p, base });
        }
        sup = sup.max(base.powf(-0.5));
    }
    Ok(sup)
}
