//! Cosine-series representation of `f` and the truncated Galerkin system.
//!
//! Substituting `f(φ) = Σ_{n=0}^{N} b_n cos nφ` into the reduced ODE gives a
//! residual that is itself a finite cosine series. Its `l`-th coefficient is
//! `A_l + B_l + C_l`:
//!
//! * `A_0` collects the diagonal products `b_n²`, `b_0²` and the constant
//!   part of the squared forcing;
//! * `A_l` (l ≥ 1) collects the difference-frequency products
//!   `b_{k+l} b_k` (k = 1..) and `b_{k-l} b_k` (k = l+1..) together with the
//!   terms linear in `b`;
//! * `B_l` (l ≥ 2) collects the sum-frequency products `b_k b_{l-k}`,
//!   k = 1..l-1;
//! * `C_1..C_4` hold the remaining low harmonics of the forcing.
//!
//! All sums honour `b_k = 0` for `k > N` and `k < 0`. The system `F(b) = 0`
//! keeps rows `0..=N`; the full expansion runs to harmonic `2N`.
//!
//! Every coefficient is a sum of constant, linear and bilinear terms in `b`.
//! [`visit_harmonic`] enumerates them once; `F`, the Jacobian and the full
//! harmonic expansion are all folds over that enumeration.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::model::{ode_residual_pointwise, OdeCoefficients};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("coefficient vector must not be empty")]
    Empty,
    #[error("truncation order must be at least 4, got {0}")]
    TruncationTooSmall(usize),
    #[error("non-finite coefficient b_{0}")]
    NonFinite(usize),
}

/// Coefficients `b_0..b_N` of the even, 2π-periodic profile `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpectralCoefficients {
    b: Vec<f64>,
}

/// `(f, ḟ, f̈)` at one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub f: f64,
    pub fdot: f64,
    pub fddot: f64,
}

impl SpectralCoefficients {
    pub fn new(b: Vec<f64>) -> Result<Self, SpectralError> {
        if b.is_empty() {
            return Err(SpectralError::Empty);
        }
        if let Some(i) = b.iter().position(|x| !x.is_finite()) {
            return Err(SpectralError::NonFinite(i));
        }
        Ok(Self { b })
    }

    pub fn zeros(truncation: usize) -> Self {
        Self {
            b: vec![0.0; truncation + 1],
        }
    }

    pub fn truncation(&self) -> usize {
        self.b.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.b
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.b
    }

    /// `b_k`, zero outside `0..=N`.
    pub fn get(&self, k: i64) -> f64 {
        if k < 0 {
            0.0
        } else {
            self.b.get(k as usize).copied().unwrap_or(0.0)
        }
    }

    pub fn eval(&self, phi: f64) -> SeriesPoint {
        let mut p = SeriesPoint {
            f: 0.0,
            fdot: 0.0,
            fddot: 0.0,
        };
        for (n, &bn) in self.b.iter().enumerate() {
            let nf = n as f64;
            let (s, c) = (nf * phi).sin_cos();
            p.f += bn * c;
            p.fdot -= nf * bn * s;
            p.fddot -= nf * nf * bn * c;
        }
        p
    }

    pub fn value(&self, phi: f64) -> f64 {
        self.b
            .iter()
            .enumerate()
            .map(|(n, &bn)| bn * (n as f64 * phi).cos())
            .sum()
    }

    /// Coefficients of `φ ↦ f(π - φ)`.
    pub fn reflected(&self) -> Self {
        Self {
            b: self
                .b
                .iter()
                .enumerate()
                .map(|(n, &bn)| if n % 2 == 0 { bn } else { -bn })
                .collect(),
        }
    }

    /// Same profile re-expressed with a different truncation order
    /// (zero-padded or cut).
    pub fn resized(&self, truncation: usize) -> Self {
        let mut b = self.b.clone();
        b.resize(truncation + 1, 0.0);
        Self { b }
    }
}

pub fn eval_series(coeffs: &SpectralCoefficients, phi: f64) -> SeriesPoint {
    coeffs.eval(phi)
}

/// `m` uniform angles on `[-π, π)`.
pub fn uniform_grid(m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| -PI + 2.0 * PI * i as f64 / m as f64)
        .collect()
}

/// Default residual grid size.
pub const DEFAULT_RESIDUAL_GRID: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Term {
    Const(f64),
    Linear(f64, usize),
    Bilinear(f64, usize, usize),
}

/// Enumerates the terms of the `l`-th residual harmonic for truncation `n`.
/// Indices outside `0..=n` are dropped here, so callers never see them.
pub(crate) fn visit_harmonic(l: usize, n: usize, c: &OdeCoefficients, mut visit: impl FnMut(Term)) {
    let ok = |k: i64| k >= 0 && k as usize <= n;
    let lin = |coef: f64, k: i64, visit: &mut dyn FnMut(Term)| {
        if ok(k) && coef != 0.0 {
            visit(Term::Linear(coef, k as usize));
        }
    };
    let half_a3 = 0.5 * c.a3;

    if l == 0 {
        // A_0
        for k in 1..=n {
            let kf = k as f64;
            visit(Term::Bilinear(half_a3 - 5.0 / 6.0 * kf * kf, k, k));
        }
        visit(Term::Bilinear(c.a3, 0, 0));
        lin(0.5 * (c.a5 - c.a1), 1, &mut visit);
        lin(0.5 * c.a6 - c.a2, 2, &mut visit);
        lin(c.a4, 0, &mut visit);
        visit(Term::Const(-3.0 / 16.0 * (c.a1 * c.a1 + c.a2 * c.a2)));
        return;
    }

    let li = l as i64;
    let lf = l as f64;

    // A_l, difference frequencies: k = 1.., index k+l <= n
    for k in 1..=n.saturating_sub(l) {
        let kf = k as f64;
        visit(Term::Bilinear(
            half_a3 - (lf / 3.0 + 5.0 / 6.0 * kf) * kf,
            k + l,
            k,
        ));
    }
    // A_l, difference frequencies: k = l+1..=n, index k-l >= 1
    for k in (l + 1)..=n {
        let kf = k as f64;
        visit(Term::Bilinear(
            half_a3 - (5.0 / 6.0 * kf - lf / 3.0) * kf,
            k - l,
            k,
        ));
    }
    // A_l, products with b_0
    if l <= n {
        visit(Term::Bilinear(2.0 * c.a3 - lf * lf, 0, l));
    }
    // A_l, linear terms
    lin(c.a4, li, &mut visit);
    lin(0.5 * c.a5 + 0.5 * c.a1 * (lf - 1.0), li - 1, &mut visit);
    lin(0.5 * c.a6 + 0.5 * c.a2 * (lf - 2.0), li - 2, &mut visit);
    lin(0.5 * c.a5 - 0.5 * c.a1 * (lf + 1.0), li + 1, &mut visit);
    lin(0.5 * c.a6 - 0.5 * c.a2 * (lf + 2.0), li + 2, &mut visit);

    // B_l, sum frequencies: k = 1..=l-1, both indices in 1..=n
    if l >= 2 {
        for k in 1..l {
            if k <= n && l - k <= n {
                let kf = k as f64;
                visit(Term::Bilinear(
                    half_a3 + (lf / 3.0 - 5.0 / 6.0 * kf) * kf,
                    k,
                    l - k,
                ));
            }
        }
    }

    // C_1..C_4
    match l {
        1 => {
            visit(Term::Const(-0.375 * c.a1 * c.a2));
            lin(0.5 * c.a5, 0, &mut visit);
            lin(0.5 * (c.a6 - c.a2), 1, &mut visit);
        }
        2 => {
            lin(0.5 * c.a6, 0, &mut visit);
            visit(Term::Const(3.0 / 16.0 * c.a1 * c.a1));
        }
        3 => visit(Term::Const(0.375 * c.a1 * c.a2)),
        4 => visit(Term::Const(3.0 / 16.0 * c.a2 * c.a2)),
        _ => {}
    }
}

/// `l`-th harmonic of the residual, reading only `b[0..=n]`.
pub(crate) fn harmonic_from_slice(b: &[f64], n: usize, c: &OdeCoefficients, l: usize) -> f64 {
    let mut acc = 0.0;
    visit_harmonic(l, n, c, |t| match t {
        Term::Const(v) => acc += v,
        Term::Linear(v, i) => acc += v * b[i],
        Term::Bilinear(v, i, j) => acc += v * b[i] * b[j],
    });
    acc
}

pub(crate) fn assemble_rows(b: &[f64], n: usize, c: &OdeCoefficients) -> Vec<f64> {
    (0..=n).map(|l| harmonic_from_slice(b, n, c, l)).collect()
}

pub(crate) fn jacobian_rows(b: &[f64], n: usize, c: &OdeCoefficients) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(n + 1, n + 1);
    for l in 0..=n {
        visit_harmonic(l, n, c, |t| match t {
            Term::Const(_) => {}
            Term::Linear(v, i) => jac[(l, i)] += v,
            Term::Bilinear(v, i, j) => {
                jac[(l, i)] += v * b[j];
                jac[(l, j)] += v * b[i];
            }
        });
    }
    jac
}

fn check_truncation(coeffs: &SpectralCoefficients) -> Result<usize, SpectralError> {
    let n = coeffs.truncation();
    if n < 4 {
        Err(SpectralError::TruncationTooSmall(n))
    } else {
        Ok(n)
    }
}

/// `F(b) = (F_0, …, F_N)`.
pub fn assemble_f(
    coeffs: &SpectralCoefficients,
    ode: &OdeCoefficients,
) -> Result<Vec<f64>, SpectralError> {
    let n = check_truncation(coeffs)?;
    Ok(assemble_rows(coeffs.as_slice(), n, ode))
}

/// `DF(b)`, exact; affine in `b` since `F` is quadratic.
pub fn assemble_jacobian(
    coeffs: &SpectralCoefficients,
    ode: &OdeCoefficients,
) -> Result<DMatrix<f64>, SpectralError> {
    let n = check_truncation(coeffs)?;
    Ok(jacobian_rows(coeffs.as_slice(), n, ode))
}

/// Highest harmonic present in the residual of a degree-`n` cosine series.
pub fn max_harmonic(n: usize) -> usize {
    (2 * n).max(n + 2).max(4)
}

/// All residual harmonics `0..=max_harmonic(N)`; the residual of the
/// truncated series is exactly `Σ_l h_l cos lφ`.
pub fn harmonic_expansion(coeffs: &SpectralCoefficients, ode: &OdeCoefficients) -> Vec<f64> {
    let n = coeffs.truncation();
    (0..=max_harmonic(n))
        .map(|l| harmonic_from_slice(coeffs.as_slice(), n, ode, l))
        .collect()
}

/// Fault injection for oracle tests: scales every `b`-dependent term of one
/// residual harmonic by `factor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermMutation {
    pub harmonic: usize,
    pub factor: f64,
}

/// [`harmonic_expansion`] with one harmonic corrupted.
pub fn harmonic_expansion_mutated(
    coeffs: &SpectralCoefficients,
    ode: &OdeCoefficients,
    mutation: TermMutation,
) -> Vec<f64> {
    let n = coeffs.truncation();
    let b = coeffs.as_slice();
    (0..=max_harmonic(n))
        .map(|l| {
            let scale = if l == mutation.harmonic {
                mutation.factor
            } else {
                1.0
            };
            let mut acc = 0.0;
            visit_harmonic(l, n, ode, |t| match t {
                Term::Const(v) => acc += v,
                Term::Linear(v, i) => acc += scale * v * b[i],
                Term::Bilinear(v, i, j) => acc += scale * v * b[i] * b[j],
            });
            acc
        })
        .collect()
}

pub fn eval_harmonics(harmonics: &[f64], phi: f64) -> f64 {
    harmonics
        .iter()
        .enumerate()
        .map(|(l, &h)| h * (l as f64 * phi).cos())
        .sum()
}

/// Residual `E_N(φ)` at one angle, evaluated pointwise.
#[inline]
pub fn residual_at(coeffs: &SpectralCoefficients, ode: &OdeCoefficients, phi: f64) -> f64 {
    let p = coeffs.eval(phi);
    ode_residual_pointwise(p.f, p.fdot, p.fddot, phi, ode)
}

/// `E_N` on a grid.
pub fn residual_function(
    coeffs: &SpectralCoefficients,
    ode: &OdeCoefficients,
    grid: &[f64],
    exec: Execution,
) -> Vec<f64> {
    exec.map(grid, |&phi| residual_at(coeffs, ode, phi))
}

/// Largest positive excursion plus largest negative excursion (magnitude).
/// Zero for an empty slice.
pub fn quasi_l1_norm(residual: &[f64]) -> f64 {
    let pos = residual.iter().fold(0.0f64, |m, &e| m.max(e));
    let neg = residual.iter().fold(0.0f64, |m, &e| m.max(-e));
    pos + neg
}

/// `F` and `DF` for a fixed coefficient set, the unit the Newton loop works on.
#[derive(Debug, Clone, Copy)]
pub struct GalerkinSystem {
    ode: OdeCoefficients,
    truncation: usize,
}

impl GalerkinSystem {
    pub fn new(ode: OdeCoefficients, truncation: usize) -> Result<Self, SpectralError> {
        if truncation < 4 {
            return Err(SpectralError::TruncationTooSmall(truncation));
        }
        Ok(Self { ode, truncation })
    }

    pub fn ode(&self) -> &OdeCoefficients {
        &self.ode
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }
}

impl crate::solver::NonlinearSystem for GalerkinSystem {
    fn dim(&self) -> usize {
        self.truncation + 1
    }

    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(assemble_rows(x.as_slice(), self.truncation, &self.ode))
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        jacobian_rows(x.as_slice(), self.truncation, &self.ode)
    }
}

#[cfg(test)]
mod tests {
    #![allow(clippy::excessive_precision)]
    use super::*;
    use crate::model::{CoefficientForm, OdeCoefficients};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ode(theta: f64, alpha: f64) -> OdeCoefficients {
        OdeCoefficients::new(theta, alpha, CoefficientForm::Printed)
    }

    fn random_b(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SpectralCoefficients {
        SpectralCoefficients::new((0..=n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
    }

    /// Cosine projection by the rectangle rule, exact for trigonometric
    /// polynomials of degree below `m`.
    fn cosine_projection(samples: &[f64], grid: &[f64], l: usize) -> f64 {
        let m = samples.len() as f64;
        let w = if l == 0 { 1.0 } else { 2.0 };
        w / m
            * samples
                .iter()
                .zip(grid)
                .map(|(s, &p)| s * (l as f64 * p).cos())
                .sum::<f64>()
    }

    #[test]
    fn series_basics() {
        let mut b = vec![0.0; 6];
        b[0] = 1.0;
        let p = SpectralCoefficients::new(b).unwrap().eval(0.37);
        assert_eq!((p.f, p.fdot, p.fddot), (1.0, 0.0, 0.0));
        let mut b = vec![0.0; 6];
        b[1] = 1.0;
        let p = SpectralCoefficients::new(b).unwrap().eval(0.0);
        assert_eq!((p.f, p.fdot, p.fddot), (1.0, 0.0, -1.0));
    }

    #[test]
    fn series_matches_high_precision_sum() {
        // term-by-term sums at 40 digits (mpmath)
        let b =
            SpectralCoefficients::new(vec![0.3, -0.7, 1.1, 0.25, -0.05, 0.6, -0.9, 0.125]).unwrap();
        let table = [
            (
                -2.9,
                1.4313699807238690192,
                8.5059097426172116148,
                6.0701874761402968661,
            ),
            (
                -1.234,
                -0.89747661286463184001,
                -4.0736623765034346106,
                9.2669168372941775312,
            ),
            (0.0, 0.72500000000000007494, 0.0, 6.1250000000000009992),
            (
                0.5,
                0.61176637707686689195,
                -2.8083331087025038897,
                -16.577903972480900323,
            ),
            (
                1.75,
                -0.43673167955553364616,
                -4.1161880759584880446,
                -6.0691659864680604865,
            ),
            (
                3.1,
                0.21929356336555109412,
                -2.1187897919210702572,
                49.877630171654479526,
            ),
        ];
        for (phi, f, fd, fdd) in table {
            let p = b.eval(phi);
            assert!((p.f - f).abs() <= 1e-13);
            assert!((p.fdot - fd).abs() <= 1e-13);
            assert!((p.fddot - fdd).abs() <= 1e-13);
        }
    }

    #[test]
    fn homogeneous_case_has_zero_system() {
        let c = ode(PI / 6.0, 0.0);
        let f = assemble_f(&SpectralCoefficients::zeros(8), &c).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_part_at_zero_coefficients() {
        let c = ode(PI / 6.0, PI / 36.0);
        let f = assemble_f(&SpectralCoefficients::zeros(6), &c).unwrap();
        assert_relative_eq!(f[0], -3.0 / 16.0 * (c.a1 * c.a1 + c.a2 * c.a2));
        assert_relative_eq!(f[1], -0.375 * c.a1 * c.a2);
        assert_relative_eq!(f[2], 3.0 / 16.0 * c.a1 * c.a1);
        assert_relative_eq!(f[3], 0.375 * c.a1 * c.a2);
        assert_relative_eq!(f[4], 3.0 / 16.0 * c.a2 * c.a2);
        assert_eq!(f[5], 0.0);
        assert_eq!(f[6], 0.0);
    }

    #[test]
    fn system_rows_are_quadrature_projections_of_residual() {
        let c = ode(PI / 6.0, PI / 36.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grid = uniform_grid(4096);
        for _ in 0..5 {
            let b = random_b(&mut rng, 6, 1e-2);
            let samples: Vec<f64> = grid
                .iter()
                .map(|&p| {
                    let s = b.eval(p);
                    ode_residual_pointwise(s.f, s.fdot, s.fddot, p, &c)
                })
                .collect();
            let f = assemble_f(&b, &c).unwrap();
            for (l, fl) in f.iter().enumerate() {
                assert!((fl - cosine_projection(&samples, &grid, l)).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn first_harmonic_constant_has_negative_sign() {
        // Only the constant part of C_1 survives at b = 0; projecting the
        // pointwise residual fixes its sign.
        let c = ode(0.6, 0.25);
        let grid = uniform_grid(4096);
        let samples: Vec<f64> = grid
            .iter()
            .map(|&p| ode_residual_pointwise(0.0, 0.0, 0.0, p, &c))
            .collect();
        let proj = cosine_projection(&samples, &grid, 1);
        assert!((proj - 0.375 * c.a1 * c.a2).abs() > 1e-3 * proj.abs());
        assert_relative_eq!(proj, -0.375 * c.a1 * c.a2, max_relative = 1e-12);
    }

    #[test]
    fn jacobian_at_zero_is_linear_part() {
        let c = ode(0.5, 0.1);
        let n = 6;
        let jac = assemble_jacobian(&SpectralCoefficients::zeros(n), &c).unwrap();
        for j in 0..=n {
            let mut e = vec![0.0; n + 1];
            e[j] = 1.0;
            let mut em = e.clone();
            em[j] = -1.0;
            let fp = assemble_f(&SpectralCoefficients::new(e).unwrap(), &c).unwrap();
            let fm = assemble_f(&SpectralCoefficients::new(em).unwrap(), &c).unwrap();
            for i in 0..=n {
                // odd part of a quadratic is its linear part
                assert!((0.5 * (fp[i] - fm[i]) - jac[(i, j)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 5..=10 {
            let c = ode(rng.gen_range(0.1..1.3), rng.gen_range(0.0..0.1));
            let b = random_b(&mut rng, n, 1e-2);
            let jac = assemble_jacobian(&b, &c).unwrap();
            let h = 1e-6;
            for j in 0..=n {
                let mut bp = b.clone().into_vec();
                let mut bm = bp.clone();
                bp[j] += h;
                bm[j] -= h;
                let fp = assemble_f(&SpectralCoefficients::new(bp).unwrap(), &c).unwrap();
                let fm = assemble_f(&SpectralCoefficients::new(bm).unwrap(), &c).unwrap();
                for i in 0..=n {
                    let fd = (fp[i] - fm[i]) / (2.0 * h);
                    let scale = jac[(i, j)].abs().max(1e-8);
                    assert!((fd - jac[(i, j)]).abs() / scale <= 1e-6, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn truncation_ignores_extra_slot() {
        let c = ode(0.5, 0.2);
        let short = vec![1e-3, -2e-3, 5e-4, 1e-4, -3e-4, 2e-5];
        let mut long = short.clone();
        long.push(0.7);
        assert_eq!(assemble_rows(&short, 5, &c), assemble_rows(&long, 5, &c));
        assert_eq!(jacobian_rows(&short, 5, &c), jacobian_rows(&long, 5, &c));
    }

    #[test]
    fn small_truncation_is_rejected() {
        let c = ode(0.5, 0.2);
        assert_eq!(
            assemble_f(&SpectralCoefficients::zeros(3), &c),
            Err(SpectralError::TruncationTooSmall(3))
        );
        assert!(SpectralCoefficients::new(vec![]).is_err());
        assert!(SpectralCoefficients::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn quasi_l1_examples() {
        assert_eq!(quasi_l1_norm(&[0.5; 10]), 0.5);
        let s: Vec<f64> = uniform_grid(4096).iter().map(|p| p.sin()).collect();
        assert_relative_eq!(quasi_l1_norm(&s), 2.0, epsilon = 1e-12);
        assert_eq!(quasi_l1_norm(&[]), 0.0);
    }

    #[test]
    fn residual_is_zero_for_homogeneous_case() {
        let c = ode(0.5, 0.0);
        let r = residual_function(
            &SpectralCoefficients::zeros(6),
            &c,
            &uniform_grid(64),
            Execution::Sequential,
        );
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reflection_maps_profile() {
        let b = SpectralCoefficients::new(vec![0.1, 0.2, -0.3, 0.4, 0.05]).unwrap();
        let r = b.reflected();
        for &p in &[0.1, 1.0, -2.0] {
            assert_relative_eq!(r.value(p), b.value(PI - p), epsilon = 1e-14);
        }
    }

    proptest! {
        #[test]
        fn galerkin_consistency(seed in 0u64..1000, n in 5usize..=10,
                                theta in 0.1f64..1.3, frac in 0.0f64..1.0, phi in -PI..PI) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = ode(theta, frac * theta);
            let b = random_b(&mut rng, n, 1e-2);
            let h = harmonic_expansion(&b, &c);
            let direct = residual_at(&b, &c, phi);
            prop_assert!((eval_harmonics(&h, phi) - direct).abs() <= 1e-12);
        }

        #[test]
        fn jacobian_is_affine(seed in 0u64..1000, n in 5usize..=10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = ode(rng.gen_range(0.1..1.3), rng.gen_range(0.0..0.1));
            let b1 = random_b(&mut rng, n, 1.0);
            let b2 = random_b(&mut rng, n, 1.0);
            let sum = SpectralCoefficients::new(
                b1.as_slice().iter().zip(b2.as_slice()).map(|(x, y)| x + y).collect()).unwrap();
            let d = assemble_jacobian(&sum, &c).unwrap() - assemble_jacobian(&b1, &c).unwrap()
                - assemble_jacobian(&b2, &c).unwrap()
                + assemble_jacobian(&SpectralCoefficients::zeros(n), &c).unwrap();
            prop_assert!(d.amax() <= 1e-12);
        }

        #[test]
        fn residual_is_even(seed in 0u64..1000, phi in 0.0f64..PI) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = ode(0.7, 0.2);
            let b = random_b(&mut rng, 7, 1e-2);
            prop_assert!((residual_at(&b, &c, phi) - residual_at(&b, &c, -phi)).abs() <= 1e-15);
        }
    }
}
