//! Recovery of the layer fields from a solved `f`, and particle paths.
//!
//! With `h = (a − ḟ/sin θ0)/3` known, `y = w_ρ uᵗ` solves the linear ODE
//!
//! ```text
//! dy/dφ = sin θ0 · (un(φ) − 2 h y / f)
//! ```
//!
//! on each half circle. `f` has double zeros at `φ ∈ {−π, 0, π}`, where the
//! coefficient `2h/f` behaves like `p/(φ − φs)`. The local solutions are
//! `y ≈ Y1 (φ − φs)` plus a homogeneous part `|φ − φs|^(−p)`. At the end with
//! `p > 0` (the source) only the regular branch stays bounded, and a
//! Frobenius series gives it to high order. Integration starts there and
//! runs toward the other end (the sink, `p < 0`), where every solution is
//! regular and the homogeneous part decays.
//!
//! Then `uᵗ = f/y`, `w = h/y`, `w_ρ = y²/f`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::model::{pressure_wc, ProblemConfig, UpstreamTrace};
use crate::spectral::{uniform_grid, SpectralCoefficients};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PostprocessError {
    #[error("no attack angle: f vanishes identically, use the closed-form fields")]
    DegenerateLayer,
    #[error("grid size {0} must be even and at least 8")]
    InvalidGrid(usize),
    #[error("regular branch at phi = {phi} not extractable (exponent {exponent}): {detail}")]
    SingularityTooStrong {
        phi: f64,
        exponent: f64,
        detail: String,
    },
    #[error("f = {f:e} is not positive at phi = {phi}")]
    NonPositiveLayer { phi: f64, f: f64 },
    #[error("trajectory integrand unavailable at phi = {phi}")]
    IntegrandUnavailable { phi: f64 },
    #[error("invalid trajectory start phi0 = {phi0}, r0 = {r0}")]
    InvalidStart { phi0: f64, r0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub grid_size: usize,
    /// Requested RK4 step; rounded so that it divides the grid spacing.
    pub rk_step: f64,
    /// Minimum distance from a singular point at which RK4 starts or stops.
    pub epsilon: f64,
    /// Half-width of the invalid window around each singular point.
    pub window: f64,
    pub series_order: usize,
    /// Fixed start distance from the source point (overrides the automatic
    /// `max(ε, p·h)` choice).
    pub start_offset: Option<f64>,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            grid_size: 2048,
            rk_step: 2.0 * PI / 8192.0,
            epsilon: 1e-3,
            window: 5e-2,
            series_order: 40,
            start_offset: None,
        }
    }
}

impl RecoveryOptions {
    pub fn with_grid(mut self, grid_size: usize) -> Self {
        self.grid_size = grid_size;
        self
    }

    fn substeps(&self) -> usize {
        let spacing = 2.0 * PI / self.grid_size as f64;
        ((spacing / self.rk_step).round() as usize).max(1)
    }

    /// RK4 step actually used.
    pub fn effective_rk_step(&self) -> f64 {
        2.0 * PI / (self.grid_size * self.substeps()) as f64
    }
}

/// `h(φ) = (a(φ) − ḟ(φ)/sin θ0)/3` at one angle.
#[inline]
pub fn h_at(coeffs: &SpectralCoefficients, trace: &UpstreamTrace, phi: f64) -> f64 {
    let fdot = coeffs.eval(phi).fdot;
    (trace.tangential_forcing(phi) - fdot / trace.theta0.sin()) / 3.0
}

pub fn compute_h(coeffs: &SpectralCoefficients, config: &ProblemConfig, grid: &[f64]) -> Vec<f64> {
    let trace = config.trace();
    grid.iter().map(|&phi| h_at(coeffs, &trace, phi)).collect()
}

/// One classical RK4 pass for `y' = source(φ) − decay(φ)·y`.
///
/// `rate(φ)` returns `(decay, source)` or an error. Returns `y` after every
/// `record_every`-th step (the start value is not included).
pub fn rk4_linear<E>(
    mut rate: impl FnMut(f64) -> Result<(f64, f64), E>,
    phi0: f64,
    y0: f64,
    step: f64,
    n_steps: usize,
    record_every: usize,
) -> Result<Vec<f64>, E> {
    let mut out = Vec::with_capacity(n_steps / record_every.max(1) + 1);
    let mut y = y0;
    let mut deriv = |phi: f64, y: f64| -> Result<f64, E> {
        let (d, s) = rate(phi)?;
        Ok(s - d * y)
    };
    for j in 0..n_steps {
        let phi = phi0 + j as f64 * step;
        let k1 = deriv(phi, y)?;
        let k2 = deriv(phi + 0.5 * step, y + 0.5 * step * k1)?;
        let k3 = deriv(phi + 0.5 * step, y + 0.5 * step * k2)?;
        let k4 = deriv(phi + step, y + step * k3)?;
        y += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (j + 1) % record_every.max(1) == 0 {
            out.push(y);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointRole {
    Source,
    Sink,
}

/// Local structure of the `y` equation at one zero of `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularPointInfo {
    pub phi: f64,
    /// `f ≈ f2 (φ − φs)²`.
    pub f2: f64,
    /// `h ≈ h1 (φ − φs)`.
    pub h1: f64,
    /// Indicial exponent `p = 2 sin θ0 h1 / f2`.
    pub exponent: f64,
    pub role: EndpointRole,
    /// `y ≈ y1 (φ − φs)` when the linear term dominates.
    pub y1: Option<f64>,
    /// Distance from `φs` where RK4 starts (source) or stops (sink).
    pub rk_offset: f64,
}

/// Taylor data of `f`, `h` and `un` at a zero `φs = mπ` of `f`, and the
/// regular series of `y` built from them.
struct LocalExpansion {
    phi: f64,
    f: Vec<f64>,
    h: Vec<f64>,
    sin_theta: f64,
    y: Option<Vec<f64>>,
}

impl LocalExpansion {
    fn new(coeffs: &SpectralCoefficients, trace: &UpstreamTrace, m: i32, order: usize) -> Self {
        let k = order.max(4);
        let sign = |n: usize| {
            if (m.unsigned_abs() as usize * n).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            }
        };
        // cos(n(mπ + x)) = ±cos nx,  sin(n(mπ + x)) = ±sin nx
        let cos_series = |n: usize| -> Vec<f64> {
            let mut out = vec![0.0; k];
            let mut t = 1.0;
            for (j, o) in out.iter_mut().enumerate() {
                if j > 0 {
                    t *= n as f64 / j as f64;
                }
                *o = match j % 4 {
                    0 => t,
                    2 => -t,
                    _ => 0.0,
                } * sign(n);
            }
            out
        };
        let sin_series = |n: usize| -> Vec<f64> {
            let mut out = vec![0.0; k];
            let mut t = 1.0;
            for (j, o) in out.iter_mut().enumerate() {
                if j > 0 {
                    t *= n as f64 / j as f64;
                }
                *o = match j % 4 {
                    1 => t,
                    3 => -t,
                    _ => 0.0,
                } * sign(n);
            }
            out
        };
        let st = trace.theta0.sin();
        let (sa, ca) = trace.alpha0.sin_cos();
        let ct = trace.theta0.cos();

        let mut f = vec![0.0; k];
        let mut fdot = vec![0.0; k];
        for (n, &bn) in coeffs.as_slice().iter().enumerate() {
            let c = cos_series(n);
            let s = sin_series(n);
            for j in 0..k {
                f[j] += bn * c[j];
                fdot[j] -= n as f64 * bn * s[j];
            }
        }
        let cos1 = cos_series(1);
        let sin1 = sin_series(1);
        let mut un: Vec<f64> = cos1.iter().map(|c| -sa * ct * c).collect();
        un[0] += ca * st;
        let ut: Vec<f64> = sin1.iter().map(|s| sa * s).collect();
        let a_eff: Vec<f64> = cauchy(&un, &ut, k).into_iter().map(|v| -v).collect();
        let mut h: Vec<f64> = (0..k).map(|j| (a_eff[j] - fdot[j] / st) / 3.0).collect();

        // exact double zero of f and simple zero of h
        f[0] = 0.0;
        f[1] = 0.0;
        h[0] = 0.0;

        let mut exp = Self {
            phi: m as f64 * PI,
            f,
            h,
            sin_theta: st,
            y: None,
        };
        let rhs: Vec<f64> = cauchy(&un, &exp.f, k).iter().map(|v| st * v).collect();
        exp.y = exp.regular_series(&rhs);
        exp
    }

    fn exponent(&self) -> f64 {
        2.0 * self.sin_theta * self.h[1] / self.f[2]
    }

    /// Power series `Σ Y_k x^k` solving `f y' + 2 sinθ0 h y = sinθ0 un f`
    /// order by order; `None` at a resonance.
    fn regular_series(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let k = self.f.len();
        let st2 = 2.0 * self.sin_theta;
        let mut y = vec![0.0; k];
        for m in 2..k {
            let mut acc = rhs[m];
            for (kk, &yk) in y.iter().enumerate().take(m - 1).skip(1) {
                let j = m + 1 - kk;
                if j < k {
                    acc -= self.f[j] * kk as f64 * yk;
                }
                acc -= st2 * self.h[m - kk] * yk;
            }
            let denom = self.f[2] * (m - 1) as f64 + st2 * self.h[1];
            if denom.abs() <= 1e-10 * self.f[2].abs() * m as f64 {
                return None;
            }
            y[m - 1] = acc / denom;
        }
        Some(y)
    }

    /// Sums the regular series at signed offset `x`; `None` if the tail has
    /// not died out.
    fn eval_y(&self, x: f64) -> Option<f64> {
        let y = self.y.as_ref()?;
        let mut sum = 0.0;
        let mut p = 1.0;
        let mut tail = 0.0;
        let n = y.len();
        for (j, &c) in y.iter().enumerate() {
            let term = c * p;
            sum += term;
            if j + 4 >= n {
                tail += term.abs();
            }
            p *= x;
        }
        let scale = sum.abs().max(y.get(1).map_or(0.0, |c| (c * x).abs()));
        (tail <= 1e-12 * scale.max(f64::MIN_POSITIVE) && sum.is_finite()).then_some(sum)
    }
}

fn cauchy(a: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k];
    for (i, &ai) in a.iter().enumerate().take(k) {
        for (j, &bj) in b.iter().enumerate().take(k - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// `y` on the uniform grid plus the local data at each singular point.
#[derive(Debug, Clone, PartialEq)]
pub struct YSolution {
    pub y: Vec<f64>,
    /// At `−π`, `0`, `π` in that order (`π` and `−π` are the same point seen
    /// from the two half circles).
    pub singular_points: Vec<SingularPointInfo>,
}

struct HalfResult {
    /// Interior grid values, left to right.
    values: Vec<f64>,
    left: SingularPointInfo,
    right: SingularPointInfo,
}

fn integrate_half(
    coeffs: &SpectralCoefficients,
    trace: &UpstreamTrace,
    left_m: i32,
    opts: &RecoveryOptions,
) -> Result<HalfResult, PostprocessError> {
    let grid_n = opts.grid_size;
    let half_cells = grid_n / 2;
    let sub = opts.substeps();
    let h_rk = opts.effective_rk_step();
    let total = half_cells * sub;
    let st = trace.theta0.sin();

    let left = LocalExpansion::new(coeffs, trace, left_m, opts.series_order);
    let right = LocalExpansion::new(coeffs, trace, left_m + 1, opts.series_order);
    for e in [&left, &right] {
        if !(e.f[2] > 0.0) {
            return Err(PostprocessError::SingularityTooStrong {
                phi: e.phi,
                exponent: f64::NAN,
                detail: format!("f has no positive double zero (f'' / 2 = {:e})", e.f[2]),
            });
        }
    }
    let (pl, pr) = (left.exponent(), right.exponent());
    let source_is_left = match (pl > 0.0, pr > 0.0) {
        (true, false) => true,
        (false, true) => false,
        (both, _) => {
            let detail = if both {
                "both endpoints demand a regular branch"
            } else {
                "neither endpoint selects a regular branch"
            };
            return Err(PostprocessError::SingularityTooStrong {
                phi: left.phi,
                exponent: pl,
                detail: format!("{detail} (exponents {pl:.4}, {pr:.4})"),
            });
        }
    };
    let (src, snk) = if source_is_left {
        (&left, &right)
    } else {
        (&right, &left)
    };
    let (p_src, p_snk) = (src.exponent(), snk.exponent());

    let start = opts
        .start_offset
        .unwrap_or_else(|| opts.epsilon.max(p_src * h_rk));
    let j_start = ((start / h_rk - 1e-9).ceil() as usize).max(1);
    let j_stop = (((opts.epsilon.max(-p_snk * h_rk)) / h_rk - 1e-9).ceil() as usize).max(1);
    if j_start + j_stop >= total {
        return Err(PostprocessError::SingularityTooStrong {
            phi: src.phi,
            exponent: p_src,
            detail: "start and stop offsets leave no interval to integrate".into(),
        });
    }
    // signed direction from the source into the interval
    let dir = if source_is_left { 1.0 } else { -1.0 };
    let x_start = dir * j_start as f64 * h_rk;
    let y_start = src
        .eval_y(x_start)
        .ok_or_else(|| PostprocessError::SingularityTooStrong {
            phi: src.phi,
            exponent: p_src,
            detail: format!(
                "regular series did not converge at offset {:e}",
                x_start.abs()
            ),
        })?;

    let rate = |phi: f64| -> Result<(f64, f64), PostprocessError> {
        let p = coeffs.eval(phi);
        if !(p.f > 0.0) {
            return Err(PostprocessError::NonPositiveLayer { phi, f: p.f });
        }
        let h = (trace.tangential_forcing(phi) - p.fdot / st) / 3.0;
        Ok((2.0 * st * h / p.f, st * trace.un(phi)))
    };

    // steps counted from the source; grid nodes at multiples of `sub`
    let n_steps = total - j_stop - j_start;
    let rk = rk4_linear(rate, src.phi + x_start, y_start, dir * h_rk, n_steps, 1)?;
    let y_stop = *rk.last().expect("at least one step");
    let x_stop = -dir * j_stop as f64 * h_rk;

    let sink_fill = |x: f64| -> f64 {
        match (snk.eval_y(x), snk.eval_y(x_stop)) {
            (Some(sx), Some(s_stop)) => sx + (y_stop - s_stop) * (x / x_stop).abs().powf(-p_snk),
            _ => y_stop * x / x_stop,
        }
    };
    // grid node i sits i·sub RK steps from the source
    let mut by_source_distance = Vec::with_capacity(half_cells - 1);
    for i in 1..half_cells {
        let j = i * sub;
        let v = if j < j_start {
            src.eval_y(dir * j as f64 * h_rk)
                .unwrap_or(y_start * j as f64 / j_start as f64)
        } else if j <= total - j_stop {
            let idx = j - j_start;
            if idx == 0 {
                y_start
            } else {
                rk[idx - 1]
            }
        } else {
            sink_fill(-dir * (total - j) as f64 * h_rk)
        };
        by_source_distance.push(v);
    }
    if !source_is_left {
        by_source_distance.reverse();
    }

    let info = |e: &LocalExpansion, role: EndpointRole, offset: usize| SingularPointInfo {
        phi: e.phi,
        f2: e.f[2],
        h1: e.h[1],
        exponent: e.exponent(),
        role,
        y1: match (&e.y, e.exponent() < -1.0 || role == EndpointRole::Source) {
            (Some(y), true) => Some(y[1]),
            _ => None,
        },
        rk_offset: offset as f64 * h_rk,
    };
    let (li, ri) = if source_is_left {
        (
            info(&left, EndpointRole::Source, j_start),
            info(&right, EndpointRole::Sink, j_stop),
        )
    } else {
        (
            info(&left, EndpointRole::Sink, j_stop),
            info(&right, EndpointRole::Source, j_start),
        )
    };
    Ok(HalfResult {
        values: by_source_distance,
        left: li,
        right: ri,
    })
}

/// Solves for `y` on the uniform grid `uniform_grid(opts.grid_size)`.
///
/// Each half circle is integrated independently. Refuses `α0 = 0`, where
/// `f ≡ 0` and the closed-form fields apply.
pub fn integrate_y(
    coeffs: &SpectralCoefficients,
    config: &ProblemConfig,
    opts: &RecoveryOptions,
    exec: Execution,
) -> Result<YSolution, PostprocessError> {
    if config.alpha0 == 0.0 {
        return Err(PostprocessError::DegenerateLayer);
    }
    let m = opts.grid_size;
    if m < 8 || !m.is_multiple_of(2) {
        return Err(PostprocessError::InvalidGrid(m));
    }
    let trace = config.trace();
    let (neg, pos) = exec.join(
        || integrate_half(coeffs, &trace, -1, opts),
        || integrate_half(coeffs, &trace, 0, opts),
    );
    let (neg, pos) = (neg?, pos?);
    let mut y = vec![0.0; m];
    y[1..m / 2].copy_from_slice(&neg.values);
    y[m / 2 + 1..].copy_from_slice(&pos.values);
    Ok(YSolution {
        y,
        singular_points: vec![neg.left, pos.left, pos.right],
    })
}

/// Sampled layer fields on the uniform grid `[−π, π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldProfile {
    pub phi: Vec<f64>,
    pub f: Vec<f64>,
    pub fdot: Vec<f64>,
    pub h: Vec<f64>,
    pub y: Vec<f64>,
    pub ut: Vec<f64>,
    pub w: Vec<f64>,
    pub w_rho: Vec<f64>,
    pub wc: Vec<f64>,
    pub valid: Vec<bool>,
    pub window: f64,
    /// True for the `α0 = 0` closed-form branch.
    pub closed_form: bool,
    pub singular_points: Vec<SingularPointInfo>,
    pub config: ProblemConfig,
    pub coeffs: SpectralCoefficients,
}

impl FieldProfile {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Index of `−φ_i` on the grid.
    pub fn mirror_index(&self, i: usize) -> usize {
        (self.len() - i) % self.len()
    }
}

fn distance_to_singular(phi: f64) -> f64 {
    [-PI, 0.0, PI]
        .iter()
        .map(|s| (phi - s).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Closed-form fields for `α0 = 0`: `uᵗ = 0`, `w = cos θ0`, `w_ρ = tan θ0 / 2`.
pub fn closed_form_fields(config: &ProblemConfig, grid_size: usize) -> FieldProfile {
    let phi = uniform_grid(grid_size);
    let n = phi.len();
    let zeros = vec![0.0; n];
    let wc = phi.iter().map(|&p| pressure_wc(0.0, p, config)).collect();
    FieldProfile {
        f: zeros.clone(),
        fdot: zeros.clone(),
        h: zeros.clone(),
        y: zeros.clone(),
        ut: zeros,
        w: vec![config.theta0.cos(); n],
        w_rho: vec![0.5 * config.theta0.tan(); n],
        wc,
        valid: vec![true; n],
        window: 0.0,
        closed_form: true,
        singular_points: Vec::new(),
        config: *config,
        coeffs: SpectralCoefficients::zeros(config.truncation),
        phi,
    }
}

/// `f`, `ḟ`, `h` and `W_C` only; the `y`-derived fields are NaN and no
/// point is valid. Used when `y` cannot be recovered.
pub fn partial_fields(
    coeffs: &SpectralCoefficients,
    config: &ProblemConfig,
    grid_size: usize,
) -> FieldProfile {
    let phi = uniform_grid(grid_size);
    let n = phi.len();
    let trace = config.trace();
    let pts: Vec<_> = phi.iter().map(|&p| coeffs.eval(p)).collect();
    let nan = vec![f64::NAN; n];
    FieldProfile {
        f: pts.iter().map(|s| s.f).collect(),
        fdot: pts.iter().map(|s| s.fdot).collect(),
        h: phi.iter().map(|&p| h_at(coeffs, &trace, p)).collect(),
        y: nan.clone(),
        ut: nan.clone(),
        w: nan.clone(),
        w_rho: nan,
        wc: phi
            .iter()
            .zip(&pts)
            .map(|(&p, s)| pressure_wc(s.f, p, config))
            .collect(),
        valid: vec![false; n],
        window: 0.0,
        closed_form: false,
        singular_points: Vec::new(),
        config: *config,
        coeffs: coeffs.clone(),
        phi,
    }
}

/// `uᵗ = f/y`, `w = h/y`, `w_ρ = y²/f` on the grid, with the regular limits
/// at the singular points and a validity mask excluding their windows.
pub fn recover_fields(
    coeffs: &SpectralCoefficients,
    config: &ProblemConfig,
    opts: &RecoveryOptions,
    exec: Execution,
) -> Result<FieldProfile, PostprocessError> {
    if config.alpha0 == 0.0 {
        return Ok(closed_form_fields(config, opts.grid_size));
    }
    let ys = integrate_y(coeffs, config, opts, exec)?;
    let phi = uniform_grid(opts.grid_size);
    let trace = config.trace();
    let st = config.theta0.sin();
    let n = phi.len();
    let mut out = FieldProfile {
        f: Vec::with_capacity(n),
        fdot: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
        y: ys.y,
        ut: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        w_rho: Vec::with_capacity(n),
        wc: Vec::with_capacity(n),
        valid: Vec::with_capacity(n),
        window: opts.window,
        closed_form: false,
        singular_points: ys.singular_points,
        config: *config,
        coeffs: coeffs.clone(),
        phi: Vec::new(),
    };
    for (i, &p) in phi.iter().enumerate() {
        let s = coeffs.eval(p);
        let h = (trace.tangential_forcing(p) - s.fdot / st) / 3.0;
        let y = out.y[i];
        let singular = i == 0 || i == n / 2;
        let (ut, w, w_rho) = if singular {
            // regular limits: y ≈ y1 x, f ≈ f2 x², h ≈ h1 x
            let info = out
                .singular_points
                .iter()
                .filter(|sp| (sp.phi - p).abs() < 1e-9 || (sp.phi - p - 2.0 * PI).abs() < 1e-9)
                .find(|sp| sp.role == EndpointRole::Source)
                .or_else(|| {
                    out.singular_points.iter().find(|sp| {
                        (sp.phi - p).abs() < 1e-9 || (sp.phi - p - 2.0 * PI).abs() < 1e-9
                    })
                });
            match info.and_then(|sp| sp.y1.map(|y1| (sp, y1))) {
                Some((sp, y1)) => (0.0, sp.h1 / y1, y1 * y1 / sp.f2),
                None => (0.0, f64::NAN, f64::NAN),
            }
        } else {
            (s.f / y, h / y, y * y / s.f)
        };
        out.f.push(s.f);
        out.fdot.push(s.fdot);
        out.h.push(h);
        out.ut.push(ut);
        out.w.push(w);
        out.w_rho.push(w_rho);
        out.wc.push(pressure_wc(s.f, p, config));
        out.valid.push(
            distance_to_singular(p) >= opts.window
                && [ut, w, w_rho].iter().all(|v| v.is_finite())
                && s.f > 0.0,
        );
    }
    out.phi = phi;
    Ok(out)
}

/// Integrand `dr/dφ = w/uᵗ` of the particle paths on the cone.
pub trait RadialRate {
    fn radial_rate(&self, phi: f64) -> Result<f64, PostprocessError>;
    /// Points the path may approach but not cross.
    fn singular_points(&self) -> &[f64];
    fn window(&self) -> f64;
}

const SINGULAR_SET: [f64; 3] = [-PI, 0.0, PI];

impl RadialRate for FieldProfile {
    /// `w/uᵗ = h/f`, which does not involve `y`.
    fn radial_rate(&self, phi: f64) -> Result<f64, PostprocessError> {
        if self.closed_form {
            return Err(PostprocessError::IntegrandUnavailable { phi });
        }
        let trace = self.config.trace();
        let s = self.coeffs.eval(phi);
        if !(s.f > 0.0) {
            return Err(PostprocessError::IntegrandUnavailable { phi });
        }
        let h = (trace.tangential_forcing(phi) - s.fdot / self.config.theta0.sin()) / 3.0;
        Ok(h / s.f)
    }

    fn singular_points(&self) -> &[f64] {
        &SINGULAR_SET
    }

    fn window(&self) -> f64 {
        self.window
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Reached the requested end angle.
    Reached,
    /// Stopped at the edge of a singular window (terminal approach).
    SingularWindow,
    /// `r` would have dropped to zero (the apex).
    Apex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub theta0: f64,
    pub phi0: f64,
    pub r0: f64,
    /// `(φ, r)` in integration order, starting with `(φ0, r0)`.
    pub samples: Vec<(f64, f64)>,
    pub termination: Termination,
}

impl Trajectory {
    /// Cartesian points with the cone axis along `x1`:
    /// `(r cos θ0, r sin θ0 cos φ, r sin θ0 sin φ)`.
    pub fn cartesian(&self) -> Vec<[f64; 3]> {
        let (st, ct) = self.theta0.sin_cos();
        self.samples
            .iter()
            .map(|&(p, r)| [r * ct, r * st * p.cos(), r * st * p.sin()])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    /// Output sample spacing; samples sit on the uniform grid.
    pub grid_size: usize,
    /// Absolute tolerance of adaptive Simpson per output interval.
    pub tolerance: f64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            grid_size: 2048,
            tolerance: 1e-12,
        }
    }
}

fn adaptive_simpson<E>(
    f: &dyn Fn(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, E> {
    #[allow(clippy::too_many_arguments)]
    fn recurse<E>(
        f: &dyn Fn(f64) -> Result<f64, E>,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64, E> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm)?, f(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }
    let (fa, fm, fb) = (f(a)?, f(0.5 * (a + b))?, f(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `r(φ) = r0 + ∫_{φ0}^{φ} w/uᵗ dφ`, sampled on the grid between `φ0` and
/// `φ_end`.
///
/// The start may lie inside a singular window (it is then a limit endpoint).
/// If the path reaches the window of the next singular point it stops at
/// the window edge; if `φ_end` lies beyond that point the path would cross
/// it and an error is returned.
pub fn integrate_trajectory(
    rate: &dyn RadialRate,
    theta0: f64,
    phi0: f64,
    r0: f64,
    phi_end: f64,
    opts: &TrajectoryOptions,
) -> Result<Trajectory, PostprocessError> {
    if !(r0 > 0.0 && r0.is_finite() && phi0.is_finite() && phi_end.is_finite()) {
        return Err(PostprocessError::InvalidStart { phi0, r0 });
    }
    let window = rate.window();
    if rate
        .singular_points()
        .iter()
        .any(|&s| (phi0 - s).abs() < 1e-12)
    {
        return Err(PostprocessError::InvalidStart { phi0, r0 });
    }
    let mut traj = Trajectory {
        theta0,
        phi0,
        r0,
        samples: vec![(phi0, r0)],
        termination: Termination::Reached,
    };
    if phi_end == phi0 {
        return Ok(traj);
    }
    let dir = (phi_end - phi0).signum();

    // first singular point strictly ahead
    let ahead = rate
        .singular_points()
        .iter()
        .copied()
        .filter(|&s| (s - phi0) * dir > 0.0)
        .min_by(|a, b| ((a - phi0) * dir).total_cmp(&((b - phi0) * dir)));
    let mut target = phi_end;
    if let Some(s) = ahead {
        let edge = s - dir * window;
        if (phi_end - s) * dir > 0.0 {
            return Err(PostprocessError::IntegrandUnavailable { phi: s });
        }
        if (phi_end - edge) * dir >= 0.0 {
            target = edge;
            traj.termination = Termination::SingularWindow;
        }
    }
    if (target - phi0) * dir <= 0.0 {
        return Ok(traj);
    }

    let spacing = 2.0 * PI / opts.grid_size as f64;
    let mut nodes = Vec::new();
    let k0 = ((phi0 + PI) / spacing).floor() as i64;
    let mut k = if dir > 0.0 { k0 + 1 } else { k0 };
    loop {
        let p = -PI + k as f64 * spacing;
        if (p - phi0) * dir <= 1e-12 {
            k += dir as i64;
            continue;
        }
        if (target - p) * dir <= 1e-12 {
            break;
        }
        nodes.push(p);
        k += dir as i64;
    }
    nodes.push(target);

    let integrand = |p: f64| rate.radial_rate(p);
    let mut r = r0;
    let mut prev = phi0;
    for p in nodes {
        let dr = adaptive_simpson(&integrand, prev, p, opts.tolerance)?;
        if !(r + dr > 0.0) {
            traj.termination = Termination::Apex;
            break;
        }
        r += dr;
        traj.samples.push((p, r));
        prev = p;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{continuation_solve, NewtonConfig};

    fn solved(alpha: f64, n: usize) -> (SpectralCoefficients, ProblemConfig) {
        let cfg = ProblemConfig::hypersonic(PI / 6.0, alpha, n).unwrap();
        let (b, _) = continuation_solve(&cfg, 4, &NewtonConfig::default()).unwrap();
        (b, cfg)
    }

    #[test]
    fn rk4_linear_constant_coefficients_is_fourth_order() {
        // y' = r − 2c y,  y(0) = 0
        let (c, r) = (0.8, 1.3);
        let exact = |x: f64| r / (2.0 * c) * (1.0 - (-2.0 * c * x).exp());
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let y = rk4_linear(|_| Ok::<_, ()>((2.0 * c, r)), 0.0, 0.0, h, n, n).unwrap();
            (y[0] - exact(1.0)).abs()
        };
        let (e1, e2, e3) = (err(10), err(20), err(40));
        let o1 = (e1 / e2).log2();
        let o2 = (e2 / e3).log2();
        assert!(
            (o1 - 4.0).abs() < 0.2 && (o2 - 4.0).abs() < 0.2,
            "{o1} {o2}"
        );
    }

    #[test]
    fn h_vanishes_without_attack() {
        let cfg = ProblemConfig::hypersonic(0.4, 0.0, 6).unwrap();
        let h = compute_h(&SpectralCoefficients::zeros(6), &cfg, &uniform_grid(32));
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn h_satisfies_its_defining_identity_and_is_odd() {
        let (b, cfg) = solved(PI / 36.0, 8);
        let grid = uniform_grid(512);
        let h = compute_h(&b, &cfg, &grid);
        let trace = cfg.trace();
        let st = cfg.theta0.sin();
        for (i, &p) in grid.iter().enumerate() {
            let r = 3.0 * h[i] + b.eval(p).fdot / st - trace.tangential_forcing(p);
            assert!(r.abs() <= 1e-12);
            let j = (grid.len() - i) % grid.len();
            assert!((h[i] + h[j]).abs() <= 1e-8 * 1e-3 + 1e-15);
        }
    }

    #[test]
    fn integrate_y_refuses_unyawed_cone() {
        let cfg = ProblemConfig::hypersonic(0.4, 0.0, 6).unwrap();
        let err = integrate_y(
            &SpectralCoefficients::zeros(6),
            &cfg,
            &RecoveryOptions::default(),
            Execution::Sequential,
        )
        .unwrap_err();
        assert_eq!(err, PostprocessError::DegenerateLayer);
    }

    #[test]
    fn windward_point_is_the_source() {
        let (b, cfg) = solved(PI / 36.0, 8);
        let ys = integrate_y(&b, &cfg, &RecoveryOptions::default(), Execution::Sequential).unwrap();
        let sp = &ys.singular_points;
        assert_eq!(sp[0].role, EndpointRole::Source);
        assert_eq!(sp[1].role, EndpointRole::Sink);
        assert_eq!(sp[2].role, EndpointRole::Source);
        assert!(sp[0].exponent > 0.0 && sp[1].exponent < 0.0);
    }

    #[test]
    fn closed_form_branch() {
        let cfg =
            ProblemConfig::new(PI / 6.0, 0.0, crate::GasModel::chaplygin(3.0).unwrap(), 8).unwrap();
        let prof = recover_fields(
            &SpectralCoefficients::zeros(8),
            &cfg,
            &RecoveryOptions::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert!(prof.closed_form);
        let tan = (PI / 6.0).tan();
        for i in 0..prof.len() {
            assert_eq!(prof.ut[i], 0.0);
            assert_eq!(prof.w[i], (PI / 6.0).cos());
            assert_eq!(prof.w_rho[i], 0.5 * tan);
            assert!((prof.wc[i] - (0.25 - 1.0 / 9.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn recovered_fields_are_physical() {
        let (b, cfg) = solved(PI / 36.0, 8);
        let prof =
            recover_fields(&b, &cfg, &RecoveryOptions::default(), Execution::Parallel).unwrap();
        for i in 0..prof.len() {
            if !prof.valid[i] {
                continue;
            }
            assert!(prof.w[i] > 0.0 && prof.w_rho[i] > 0.0);
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
            assert!(rel(prof.w_rho[i] * prof.ut[i].powi(2), prof.f[i]) < 1e-8);
            assert!(rel(prof.w_rho[i] * prof.ut[i] * prof.w[i], prof.h[i]) < 1e-8);
            assert!(rel(prof.w_rho[i] * prof.ut[i], prof.y[i]) < 1e-8);
        }
        // particles on (0, π) move toward φ = 0
        let q = prof.len() * 3 / 4;
        assert!(prof.ut[q] < 0.0);
    }

    #[test]
    fn constant_rate_trajectory_is_linear() {
        struct Constant(f64);
        impl RadialRate for Constant {
            fn radial_rate(&self, _phi: f64) -> Result<f64, PostprocessError> {
                Ok(self.0)
            }
            fn singular_points(&self) -> &[f64] {
                &[]
            }
            fn window(&self) -> f64 {
                0.0
            }
        }
        let t = integrate_trajectory(&Constant(2.5), 0.5, -2.0, 3.0, -0.5, &Default::default())
            .unwrap();
        assert_eq!(t.termination, Termination::Reached);
        for &(p, r) in &t.samples {
            assert!((r - (3.0 + 2.5 * (p + 2.0))).abs() < 1e-12);
        }
        assert_eq!(t.samples.last().unwrap().0, -0.5);
    }

    #[test]
    fn trajectory_rejects_bad_inputs() {
        let (b, cfg) = solved(PI / 36.0, 8);
        let prof =
            recover_fields(&b, &cfg, &RecoveryOptions::default(), Execution::Sequential).unwrap();
        let o = TrajectoryOptions::default();
        assert!(matches!(
            integrate_trajectory(&prof, cfg.theta0, -1.0, 0.0, 0.0, &o),
            Err(PostprocessError::InvalidStart { .. })
        ));
        // crossing φ = 0
        assert!(matches!(
            integrate_trajectory(&prof, cfg.theta0, -1.0, 10.0, 1.0, &o),
            Err(PostprocessError::IntegrandUnavailable { .. })
        ));
    }
}
