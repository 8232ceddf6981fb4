//! Oracle checks and reproduction studies.
//!
//! Every study returns a [`StudyReport`] carrying the measured value next to
//! each threshold, so a failing run says by how much it failed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::exec::Execution;
use crate::model::{chaplygin_min_mach, pressure_wc, GasModel, OdeCoefficients, ProblemConfig};
use crate::postprocess::{
    integrate_trajectory, integrate_y, recover_fields, PostprocessError, RecoveryOptions,
    Termination, TrajectoryOptions,
};
use crate::solver::{continuation_solve, default_continuation_steps, NewtonConfig, SolverError};
use crate::spectral::{
    assemble_jacobian, eval_harmonics, harmonic_expansion, harmonic_expansion_mutated,
    quasi_l1_norm, residual_at, residual_function, uniform_grid, SpectralCoefficients,
    TermMutation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    LessEq,
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = ">=")]
    GreaterEq,
}

impl Comparison {
    fn holds(self, measured: f64, threshold: f64) -> bool {
        match self {
            Comparison::Less => measured < threshold,
            Comparison::LessEq => measured <= threshold,
            Comparison::Greater => measured > threshold,
            Comparison::GreaterEq => measured >= threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Less => "<",
            Comparison::LessEq => "<=",
            Comparison::Greater => ">",
            Comparison::GreaterEq => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub passed: bool,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {:.6e} {} {:.6e}",
            if self.passed { "ok  " } else { "FAIL" },
            self.name,
            self.measured,
            self.comparison.symbol(),
            self.threshold
        )
    }
}

/// Physical admissibility of a solved profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub wc_positive: bool,
    pub f_nonnegative: bool,
    pub boundary_ok: bool,
    pub valid: bool,
    pub min_wc: f64,
    pub max_wc: f64,
    pub min_f: f64,
    pub max_f: f64,
    pub f_at_zero: f64,
    pub f_at_pi: f64,
    /// Smallest freestream Mach number keeping `W_C > 0` (when defined).
    pub chaplygin_min_mach: Option<f64>,
}

/// Relative slack for `min f ≥ −slack·max f`.
pub const NONNEGATIVITY_SLACK: f64 = 1e-6;
/// Relative bound on `|f(0)|`, `|f(π)|`.
pub const BOUNDARY_DEFECT: f64 = 1e-3;

/// Checks `W_C > 0`, `f ≥ 0` and `f(0) = f(π) = 0` on a uniform grid.
///
/// Without attack angle and with a Chaplygin gas the positivity test is the
/// exact condition `M∞ > 1/sin θ0`.
pub fn assess_validity(
    coeffs: &SpectralCoefficients,
    config: &ProblemConfig,
    grid_size: usize,
) -> Validity {
    let grid = uniform_grid(grid_size);
    let f: Vec<f64> = grid.iter().map(|&p| coeffs.value(p)).collect();
    let wc: Vec<f64> = grid
        .iter()
        .zip(&f)
        .map(|(&p, &fv)| pressure_wc(fv, p, config))
        .collect();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (min_f, max_f) = (min(&f), max(&f));
    let (min_wc, max_wc) = (min(&wc), max(&wc));
    let f_at_zero = coeffs.value(0.0);
    let f_at_pi = coeffs.value(PI);
    let scale = max_f.max(0.0);
    let f_nonnegative = min_f >= -NONNEGATIVITY_SLACK * scale;
    let boundary_ok =
        f_at_zero.abs() <= BOUNDARY_DEFECT * scale && f_at_pi.abs() <= BOUNDARY_DEFECT * scale;
    let min_mach = chaplygin_min_mach(&config.trace(), &grid, &f).ok();
    let wc_positive = match config.gas.mach_infinity() {
        Some(m) if coeffs.as_slice().iter().all(|&b| b == 0.0) => m > 1.0 / config.theta0.sin(),
        _ => min_wc > 0.0,
    };
    Validity {
        wc_positive,
        f_nonnegative,
        boundary_ok,
        valid: wc_positive && f_nonnegative && boundary_ok,
        min_wc,
        max_wc,
        min_f,
        max_f,
        f_at_zero,
        f_at_pi,
        chaplygin_min_mach: min_mach,
    }
}

/// Per-case numbers shared by the studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub theta0: f64,
    pub alpha0: f64,
    pub truncation: usize,
    pub continuation_steps: usize,
    pub newton_iterations: usize,
    pub max_abs_residual: f64,
    pub quasi_l1: f64,
    pub validity: Validity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: String,
    pub parameters: serde_json::Value,
    pub notes: Vec<String>,
    pub cases: Vec<CaseMetrics>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl StudyReport {
    pub fn new(study: &str, parameters: serde_json::Value) -> Self {
        Self {
            study: study.to_string(),
            parameters,
            notes: Vec::new(),
            cases: Vec::new(),
            checks: Vec::new(),
            passed: true,
        }
    }

    pub fn check(
        &mut self,
        name: impl Into<String>,
        measured: f64,
        cmp: Comparison,
        threshold: f64,
    ) {
        let passed = cmp.holds(measured, threshold);
        self.passed &= passed;
        self.checks.push(Check {
            name: name.into(),
            measured,
            comparison: cmp,
            threshold,
            passed,
        });
    }

    /// Records a boolean condition as `measured = 1` against `>= 1`.
    pub fn check_flag(&mut self, name: impl Into<String>, ok: bool) {
        self.check(name, if ok { 1.0 } else { 0.0 }, Comparison::GreaterEq, 1.0);
    }
}

/// Shared numerical settings for the solve-based studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub grid_size: usize,
    pub truncation: usize,
    pub newton: NewtonConfig,
    pub exec: Execution,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            grid_size: 2048,
            truncation: 8,
            newton: NewtonConfig::default(),
            exec: Execution::Parallel,
        }
    }
}

/// Continuation solve plus residual and validity metrics.
pub fn solve_case(
    config: &ProblemConfig,
    opts: &StudyOptions,
) -> Result<(SpectralCoefficients, CaseMetrics), SolverError> {
    let steps = default_continuation_steps(config.alpha0);
    let (b, reports) = continuation_solve(config, steps, &opts.newton)?;
    let residual = residual_function(
        &b,
        &config.coefficients(),
        &uniform_grid(opts.grid_size),
        Execution::Sequential,
    );
    let metrics = CaseMetrics {
        theta0: config.theta0,
        alpha0: config.alpha0,
        truncation: config.truncation,
        continuation_steps: steps,
        newton_iterations: reports.iter().map(|r| r.iterations).sum(),
        max_abs_residual: residual.iter().fold(0.0, |m, e| m.max(e.abs())),
        quasi_l1: quasi_l1_norm(&residual),
        validity: assess_validity(&b, config, opts.grid_size),
    };
    Ok((b, metrics))
}

fn solve_all(
    configs: &[ProblemConfig],
    opts: &StudyOptions,
) -> Result<Vec<(SpectralCoefficients, CaseMetrics)>, SolverError> {
    opts.exec
        .map(configs, |c| solve_case(c, opts))
        .into_iter()
        .collect()
}

/// Max over `phis` of |harmonic residual − pointwise residual|.
pub fn galerkin_oracle(coeffs: &SpectralCoefficients, ode: &OdeCoefficients, phis: &[f64]) -> f64 {
    discrepancy(&harmonic_expansion(coeffs, ode), coeffs, ode, phis)
}

/// [`galerkin_oracle`] against a deliberately corrupted assembly.
pub fn galerkin_oracle_mutated(
    coeffs: &SpectralCoefficients,
    ode: &OdeCoefficients,
    phis: &[f64],
    mutation: TermMutation,
) -> f64 {
    discrepancy(
        &harmonic_expansion_mutated(coeffs, ode, mutation),
        coeffs,
        ode,
        phis,
    )
}

fn discrepancy(
    harmonics: &[f64],
    coeffs: &SpectralCoefficients,
    ode: &OdeCoefficients,
    phis: &[f64],
) -> f64 {
    phis.iter()
        .map(|&p| (eval_harmonics(harmonics, p) - residual_at(coeffs, ode, p)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomCaseOptions {
    pub cases: usize,
    pub seed: u64,
    pub coefficient_bound: f64,
    pub min_truncation: usize,
    pub max_truncation: usize,
}

impl Default for RandomCaseOptions {
    fn default() -> Self {
        Self {
            cases: 100,
            seed: 0x5eed_c0de,
            coefficient_bound: 1e-3,
            min_truncation: 5,
            max_truncation: 10,
        }
    }
}

fn case_rng(seed: u64, case: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case as u64);
    rng
}

fn random_case(
    rng: &mut ChaCha8Rng,
    opts: &RandomCaseOptions,
) -> (ProblemConfig, SpectralCoefficients) {
    let theta0 = rng.gen_range(0.1..1.3);
    let alpha0 = rng.gen_range(0.0..theta0);
    let n = rng.gen_range(opts.min_truncation..=opts.max_truncation);
    let b: Vec<f64> = (0..=n)
        .map(|_| rng.gen_range(-opts.coefficient_bound..=opts.coefficient_bound))
        .collect();
    let config = ProblemConfig::hypersonic(theta0, alpha0, n.max(4))
        .expect("sampled parameters are in range");
    (config, SpectralCoefficients::new(b).expect("finite"))
}

/// Harmonic assembly against the pointwise ODE on random problems.
pub fn oracle_study(
    opts: &RandomCaseOptions,
    samples: usize,
    tolerance: f64,
    exec: Execution,
) -> StudyReport {
    let mut report = StudyReport::new(
        "oracle",
        json!({ "random": opts, "samples": samples, "tolerance": tolerance }),
    );
    let worst = exec.map_range(opts.cases, |k| {
        let mut rng = case_rng(opts.seed, k);
        let (config, b) = random_case(&mut rng, opts);
        let phis: Vec<f64> = (0..samples).map(|_| rng.gen_range(-PI..PI)).collect();
        galerkin_oracle(&b, &config.coefficients(), &phis)
    });
    let max = worst.iter().copied().fold(0.0, f64::max);
    report.check("max discrepancy", max, Comparison::LessEq, tolerance);

    // the oracle must notice a corrupted harmonic
    let mut rng = case_rng(opts.seed, opts.cases);
    let (config, _) = random_case(&mut rng, opts);
    let b = SpectralCoefficients::new(vec![opts.coefficient_bound; config.truncation + 1])
        .expect("finite");
    let phis = uniform_grid(samples);
    let mutated = galerkin_oracle_mutated(
        &b,
        &config.coefficients(),
        &phis,
        TermMutation {
            harmonic: 2,
            factor: 1.5,
        },
    );
    report.check("mutation sensitivity", mutated, Comparison::GreaterEq, 1e-6);
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianCheckOptions {
    pub points: usize,
    pub step: f64,
    pub relative_tolerance: f64,
    pub affinity_tolerance: f64,
}

impl Default for JacobianCheckOptions {
    fn default() -> Self {
        Self {
            points: 20,
            step: 1e-6,
            relative_tolerance: 1e-6,
            affinity_tolerance: 1e-12,
        }
    }
}

fn jacobian_errors(
    config: &ProblemConfig,
    b: &SpectralCoefficients,
    b2: &SpectralCoefficients,
    step: f64,
) -> (f64, f64) {
    let ode = config.coefficients();
    let n = config.truncation;
    let jac = assemble_jacobian(b, &ode).expect("N >= 4");
    let mut fd_err = 0.0f64;
    for j in 0..=n {
        let shifted = |s: f64| {
            let mut v = b.as_slice().to_vec();
            v[j] += s;
            crate::spectral::assemble_f(&SpectralCoefficients::new(v).expect("finite"), &ode)
                .expect("N >= 4")
        };
        let (fp, fm) = (shifted(step), shifted(-step));
        for i in 0..=n {
            fd_err = fd_err.max(((fp[i] - fm[i]) / (2.0 * step) - jac[(i, j)]).abs());
        }
    }
    let rel = fd_err / jac.amax().max(f64::MIN_POSITIVE);

    let sum = SpectralCoefficients::new(
        b.as_slice()
            .iter()
            .zip(b2.as_slice())
            .map(|(x, y)| x + y)
            .collect(),
    )
    .expect("finite");
    let zero = SpectralCoefficients::zeros(n);
    let j = |c: &SpectralCoefficients| assemble_jacobian(c, &ode).expect("N >= 4");
    let affinity = (j(&sum) - j(b) - j(b2) + j(&zero)).amax();
    (rel, affinity)
}

/// Analytic Jacobian against central differences, and its affinity in `b`.
pub fn jacobian_study(
    random: &RandomCaseOptions,
    opts: &JacobianCheckOptions,
    exec: Execution,
) -> StudyReport {
    let mut report = StudyReport::new("jacobian", json!({ "random": random, "check": opts }));
    let errs = exec.map_range(opts.points, |k| {
        let mut rng = case_rng(random.seed ^ 0x4a4a, k);
        let (config, b) = random_case(&mut rng, random);
        let b2: Vec<f64> = (0..=config.truncation)
            .map(|_| rng.gen_range(-random.coefficient_bound..=random.coefficient_bound))
            .collect();
        jacobian_errors(
            &config,
            &b,
            &SpectralCoefficients::new(b2).expect("finite"),
            opts.step,
        )
    });
    let rel = errs.iter().map(|e| e.0).fold(0.0, f64::max);
    let aff = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    report.check(
        "finite-difference relative error",
        rel,
        Comparison::LessEq,
        opts.relative_tolerance,
    );
    report.check(
        "affinity defect",
        aff,
        Comparison::LessEq,
        opts.affinity_tolerance,
    );
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStudyThresholds {
    pub base_max_residual: f64,
    pub higher_quasi_l1: f64,
    pub monotone_noise: f64,
    pub coincidence: f64,
}

impl Default for ErrorStudyThresholds {
    fn default() -> Self {
        Self {
            base_max_residual: 1e-6,
            higher_quasi_l1: 1e-9,
            monotone_noise: 0.1,
            coincidence: 1e-6,
        }
    }
}

/// Residual size against truncation order.
///
/// The lowest order must reach `base_max_residual`, every higher order
/// `higher_quasi_l1`, and the quasi-L¹ norm may grow by at most
/// `monotone_noise` (relative) from one order to the next. The `f`, `ḟ`
/// profiles of higher orders must coincide with the lowest within
/// `coincidence`.
pub fn error_study(
    theta0: f64,
    alpha0: f64,
    truncations: &[usize],
    thresholds: &ErrorStudyThresholds,
    opts: &StudyOptions,
) -> Result<StudyReport, SolverError> {
    let mut report = StudyReport::new(
        "error",
        json!({
            "theta0": theta0, "alpha0": alpha0, "truncations": truncations,
            "thresholds": thresholds, "options": opts,
        }),
    );
    report.notes.push(
        "reference error curves do not state their configuration; theta0 = pi/6, alpha0 = pi/36 assumed"
            .into(),
    );
    let configs: Vec<ProblemConfig> = truncations
        .iter()
        .map(|&n| ProblemConfig::hypersonic(theta0, alpha0, n))
        .collect::<Result<_, _>>()
        .map_err(|_| SolverError::NoSteps)?;
    let solved = solve_all(&configs, opts)?;
    let Some((base_b, base)) = solved.first() else {
        return Ok(report);
    };
    report.check(
        format!("N={} max|E|", base.truncation),
        base.max_abs_residual,
        Comparison::Less,
        thresholds.base_max_residual,
    );
    let grid = uniform_grid(opts.grid_size);
    for (b, m) in solved.iter().skip(1) {
        report.check(
            format!("N={} quasi-L1", m.truncation),
            m.quasi_l1,
            Comparison::Less,
            thresholds.higher_quasi_l1,
        );
        let dev = grid
            .iter()
            .map(|&p| {
                let (x, y) = (b.eval(p), base_b.eval(p));
                (x.f - y.f).abs().max((x.fdot - y.fdot).abs())
            })
            .fold(0.0, f64::max);
        report.check(
            format!(
                "N={} f, fdot deviation from N={}",
                m.truncation, base.truncation
            ),
            dev,
            Comparison::LessEq,
            thresholds.coincidence,
        );
    }
    for w in solved.windows(2) {
        let (a, b) = (&w[0].1, &w[1].1);
        report.check(
            format!("quasi-L1 ratio N={}/N={}", b.truncation, a.truncation),
            b.quasi_l1 / a.quasi_l1,
            Comparison::LessEq,
            1.0 + thresholds.monotone_noise,
        );
    }
    report.cases = solved.into_iter().map(|(_, m)| m).collect();
    Ok(report)
}

/// Admissibility of the solved profiles over a list of attack angles, with
/// the peak of `f` at the smallest angle expected in `peak_range`.
pub fn shape_study(
    theta0: f64,
    alphas: &[f64],
    peak_range: (f64, f64),
    opts: &StudyOptions,
) -> Result<StudyReport, SolverError> {
    let mut report = StudyReport::new(
        "shape",
        json!({ "theta0": theta0, "alphas": alphas, "peak_range": peak_range, "options": opts }),
    );
    report.notes.push(format!(
        "truncation N = {}; the boundary defect and the negative part of f shrink only \
         algebraically in N once the attack angle grows",
        opts.truncation
    ));
    let configs = configs_over_alpha(theta0, alphas, opts)?;
    let solved = solve_all(&configs, opts)?;
    let grid = uniform_grid(opts.grid_size);
    for (b, m) in &solved {
        let v = &m.validity;
        let tag = format!("alpha0={:.6}", m.alpha0);
        report.check(
            format!("{tag} min f / max f"),
            v.min_f / v.max_f,
            Comparison::GreaterEq,
            -NONNEGATIVITY_SLACK,
        );
        report.check(
            format!("{tag} max(|f(0)|, |f(pi)|) / max f"),
            v.f_at_zero.abs().max(v.f_at_pi.abs()) / v.max_f,
            Comparison::LessEq,
            BOUNDARY_DEFECT,
        );
        report.check(format!("{tag} min W_C"), v.min_wc, Comparison::Greater, 0.0);
        // windward side carries the steeper slope
        let peak = |lo: f64, hi: f64| {
            grid.iter()
                .filter(|&&p| p >= lo && p <= hi)
                .map(|&p| b.eval(p).fdot.abs())
                .fold(0.0, f64::max)
        };
        report.check(
            format!("{tag} peak|fdot| windward / leeward"),
            peak(-PI, -PI / 2.0) / peak(0.0, PI / 2.0),
            Comparison::Greater,
            1.0,
        );
    }
    if let Some((_, first)) = solved.first() {
        report.check(
            format!("alpha0={:.6} peak f", first.alpha0),
            first.validity.max_f,
            Comparison::GreaterEq,
            peak_range.0,
        );
        report.check(
            format!("alpha0={:.6} peak f", first.alpha0),
            first.validity.max_f,
            Comparison::LessEq,
            peak_range.1,
        );
    }
    report.cases = solved.into_iter().map(|(_, m)| m).collect();
    Ok(report)
}

/// Large-angle cases whose solutions must be flagged invalid.
pub fn breakdown_study(
    theta0: f64,
    alpha0: f64,
    truncations: &[usize],
    opts: &StudyOptions,
) -> Result<StudyReport, SolverError> {
    let mut report = StudyReport::new(
        "breakdown",
        json!({ "theta0": theta0, "alpha0": alpha0, "truncations": truncations, "options": opts }),
    );
    for &n in truncations {
        let config =
            ProblemConfig::hypersonic(theta0, alpha0, n).map_err(|_| SolverError::NoSteps)?;
        let (_, m) = solve_case(&config, opts)?;
        report.check(
            format!(
                "N={n} flagged invalid (min W_C = {:.3e}, min f = {:.3e})",
                m.validity.min_wc, m.validity.min_f
            ),
            if m.validity.valid { 0.0 } else { 1.0 },
            Comparison::GreaterEq,
            1.0,
        );
        report.cases.push(m);
    }
    Ok(report)
}

fn configs_over_alpha(
    theta0: f64,
    alphas: &[f64],
    opts: &StudyOptions,
) -> Result<Vec<ProblemConfig>, SolverError> {
    alphas
        .iter()
        .map(|&a| ProblemConfig::hypersonic(theta0, a, opts.truncation))
        .collect::<Result<_, _>>()
        .map_err(|_| SolverError::NoSteps)
}

/// `max W_C` against `sin²(θ0+α0)` and `min W_C` against `sin²(θ0−α0)`.
pub fn wc_extremum_study(
    theta0: f64,
    alphas: &[f64],
    relative_tolerance: f64,
    opts: &StudyOptions,
) -> Result<StudyReport, SolverError> {
    let mut report = StudyReport::new(
        "wc-extrema",
        json!({ "theta0": theta0, "alphas": alphas, "relative_tolerance": relative_tolerance, "options": opts }),
    );
    let configs = configs_over_alpha(theta0, alphas, opts)?;
    let solved = solve_all(&configs, opts)?;
    for (_, m) in &solved {
        let v = &m.validity;
        let up = (theta0 + m.alpha0).sin().powi(2);
        let lo = (theta0 - m.alpha0).sin().powi(2);
        let tag = format!("alpha0={:.6}", m.alpha0);
        report.check(
            format!("{tag} |max W_C - sin^2(theta0+alpha0)| rel"),
            (v.max_wc - up).abs() / up,
            Comparison::LessEq,
            relative_tolerance,
        );
        report.check(
            format!("{tag} |min W_C - sin^2(theta0-alpha0)| rel"),
            (v.min_wc - lo).abs() / lo,
            Comparison::LessEq,
            relative_tolerance,
        );
    }
    for w in solved.windows(2) {
        let (a, b) = (&w[0].1, &w[1].1);
        report.check(
            format!("max W_C increase alpha0 {:.4} -> {:.4}", a.alpha0, b.alpha0),
            b.validity.max_wc - a.validity.max_wc,
            Comparison::Greater,
            0.0,
        );
        report.check(
            format!("min W_C decrease alpha0 {:.4} -> {:.4}", a.alpha0, b.alpha0),
            a.validity.min_wc - b.validity.min_wc,
            Comparison::Greater,
            0.0,
        );
    }
    report.cases = solved.into_iter().map(|(_, m)| m).collect();
    Ok(report)
}

/// Pointwise ordering of `f` and `W_C` across increasing `θ0` at fixed
/// `α0`, on grid points where every `f` exceeds `f_floor`.
pub fn monotonicity_study(
    alpha0: f64,
    thetas: &[f64],
    f_floor: f64,
    opts: &StudyOptions,
) -> Result<StudyReport, SolverError> {
    let mut report = StudyReport::new(
        "monotonicity",
        json!({ "alpha0": alpha0, "thetas": thetas, "f_floor": f_floor, "options": opts }),
    );
    let configs: Vec<ProblemConfig> = thetas
        .iter()
        .map(|&t| ProblemConfig::hypersonic(t, alpha0, opts.truncation))
        .collect::<Result<_, _>>()
        .map_err(|_| SolverError::NoSteps)?;
    let solved = solve_all(&configs, opts)?;
    let grid = uniform_grid(opts.grid_size);
    for (w, cw) in solved.windows(2).zip(configs.windows(2)) {
        let (ba, bb) = (&w[0].0, &w[1].0);
        let mut df = f64::INFINITY;
        let mut dwc = f64::INFINITY;
        for &p in &grid {
            let (fa, fb) = (ba.value(p), bb.value(p));
            if fa <= f_floor || fb <= f_floor {
                continue;
            }
            df = df.min(fb - fa);
            dwc = dwc.min(pressure_wc(fb, p, &cw[1]) - pressure_wc(fa, p, &cw[0]));
        }
        let tag = format!("theta0 {:.4} -> {:.4}", cw[0].theta0, cw[1].theta0);
        report.check(
            format!("{tag} min increment of f"),
            df,
            Comparison::GreaterEq,
            0.0,
        );
        report.check(
            format!("{tag} min increment of W_C"),
            dwc,
            Comparison::GreaterEq,
            0.0,
        );
    }
    report.cases = solved.into_iter().map(|(_, m)| m).collect();
    Ok(report)
}

/// The no-attack Chaplygin branch against its closed forms, plus the
/// validity flip at `M∞ = 1/sin θ0`.
pub fn chaplygin_reference_check(
    theta0: f64,
    mach: f64,
    grid_size: usize,
) -> Result<StudyReport, crate::model::ModelError> {
    let mut report = StudyReport::new(
        "chaplygin",
        json!({ "theta0": theta0, "mach_infinity": mach, "grid_size": grid_size }),
    );
    let config = ProblemConfig::new(theta0, 0.0, GasModel::chaplygin(mach)?, 8)?;
    let b = SpectralCoefficients::zeros(8);
    let prof = recover_fields(
        &b,
        &config,
        &RecoveryOptions::default().with_grid(grid_size),
        Execution::Sequential,
    )
    .expect("closed-form branch cannot fail");
    let (st, ct) = theta0.sin_cos();
    let dev = |v: &[f64], target: f64| {
        v.iter().map(|x| (x - target).abs()).fold(0.0, f64::max) / target.abs().max(1.0)
    };
    let eps = 4.0 * f64::EPSILON;
    report.check("|u^t|", dev(&prof.ut, 0.0), Comparison::LessEq, eps);
    report.check(
        "|w - cos theta0|",
        dev(&prof.w, ct),
        Comparison::LessEq,
        eps,
    );
    report.check(
        "|w_rho - tan theta0 / 2|",
        dev(&prof.w_rho, 0.5 * theta0.tan()),
        Comparison::LessEq,
        eps,
    );
    report.check(
        "|W_C - (sin^2 theta0 - 1/M^2)|",
        dev(&prof.wc, st * st - 1.0 / (mach * mach)),
        Comparison::LessEq,
        eps,
    );
    let threshold = 1.0 / st;
    let valid_at = |m: f64| -> Result<bool, crate::model::ModelError> {
        let c = ProblemConfig::new(theta0, 0.0, GasModel::chaplygin(m)?, 8)?;
        Ok(assess_validity(&b, &c, grid_size).valid)
    };
    report.check_flag("invalid at M = 1/sin theta0", !valid_at(threshold)?);
    report.check_flag(
        "valid just above 1/sin theta0",
        valid_at(threshold * (1.0 + 4.0 * f64::EPSILON))?,
    );
    report.check_flag(
        format!("validity at M = {mach} matches M > 1/sin theta0"),
        assess_validity(&b, &config, grid_size).valid == (mach > threshold),
    );
    Ok(report)
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum StudyError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Postprocess(#[from] PostprocessError),
}

/// Field identities and parities on the valid mask, plus the observed
/// RK4 order from step halving with a fixed start offset.
pub fn field_study(
    theta0: f64,
    alpha0: f64,
    tolerance: f64,
    order_band: (f64, f64),
    opts: &StudyOptions,
) -> Result<StudyReport, StudyError> {
    let mut report = StudyReport::new(
        "fields",
        json!({ "theta0": theta0, "alpha0": alpha0, "tolerance": tolerance, "order_band": order_band, "options": opts }),
    );
    let config = ProblemConfig::hypersonic(theta0, alpha0, opts.truncation)
        .map_err(|_| SolverError::NoSteps)?;
    let (b, m) = solve_case(&config, opts)?;
    let rec = RecoveryOptions::default().with_grid(opts.grid_size);
    let prof = recover_fields(&b, &config, &rec, opts.exec)?;

    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    let mut id = [0.0f64; 3];
    for i in (0..prof.len()).filter(|&i| prof.valid[i]) {
        id[0] = id[0].max(rel(prof.w_rho[i] * prof.ut[i] * prof.ut[i], prof.f[i]));
        id[1] = id[1].max(rel(prof.w_rho[i] * prof.ut[i] * prof.w[i], prof.h[i]));
        id[2] = id[2].max(rel(prof.w_rho[i] * prof.ut[i], prof.y[i]));
    }
    report.check("f = w_rho ut^2 (rel)", id[0], Comparison::LessEq, tolerance);
    report.check("h = w_rho ut w (rel)", id[1], Comparison::LessEq, tolerance);
    report.check("y = w_rho ut (rel)", id[2], Comparison::LessEq, tolerance);

    let fields: [(&str, &[f64], f64); 8] = [
        ("f", &prof.f, 1.0),
        ("w", &prof.w, 1.0),
        ("w_rho", &prof.w_rho, 1.0),
        ("W_C", &prof.wc, 1.0),
        ("fdot", &prof.fdot, -1.0),
        ("h", &prof.h, -1.0),
        ("y", &prof.y, -1.0),
        ("ut", &prof.ut, -1.0),
    ];
    let idx: Vec<usize> = (0..prof.len())
        .filter(|&i| prof.valid[i] && prof.valid[prof.mirror_index(i)])
        .collect();
    for (name, v, sign) in &fields {
        let scale = idx
            .iter()
            .map(|&i| v[i].abs())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let err = idx
            .iter()
            .map(|&i| (v[i] - sign * v[prof.mirror_index(i)]).abs())
            .fold(0.0, f64::max)
            / scale;
        let kind = if *sign > 0.0 { "even" } else { "odd" };
        report.check(
            format!("{name} {kind} (rel to max)"),
            err,
            Comparison::LessEq,
            tolerance,
        );
    }

    let (o1, o2) = rk4_observed_order(&b, &config, opts.exec)?;
    for (k, o) in [o1, o2].into_iter().enumerate() {
        report.check(
            format!("RK4 order, halving {}", k + 1),
            o,
            Comparison::GreaterEq,
            order_band.0,
        );
        report.check(
            format!("RK4 order, halving {}", k + 1),
            o,
            Comparison::LessEq,
            order_band.1,
        );
    }
    report.cases.push(m);
    Ok(report)
}

/// Observed orders `log2(|y_h − y_{h/2}| / |y_{h/2} − y_{h/4}|)` for two
/// successive halvings, measured more than 0.3 rad from the singular points.
pub fn rk4_observed_order(
    coeffs: &SpectralCoefficients,
    config: &ProblemConfig,
    exec: Execution,
) -> Result<(f64, f64), PostprocessError> {
    let grid_size = 256;
    let divisions = [512usize, 1024, 2048, 4096];
    let ys = exec
        .map(&divisions, |&k| {
            let o = RecoveryOptions {
                grid_size,
                rk_step: 2.0 * PI / k as f64,
                start_offset: Some(0.2),
                ..Default::default()
            };
            integrate_y(coeffs, config, &o, Execution::Sequential).map(|s| s.y)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let grid = uniform_grid(grid_size);
    let away: Vec<usize> = (0..grid_size)
        .filter(|&i| [-PI, 0.0, PI].iter().all(|s| (grid[i] - s).abs() > 0.3))
        .collect();
    let diff = |a: &[f64], b: &[f64]| {
        away.iter()
            .map(|&i| (a[i] - b[i]).abs())
            .fold(0.0, f64::max)
    };
    let d: Vec<f64> = ys.windows(2).map(|w| diff(&w[0], &w[1])).collect();
    Ok(((d[0] / d[1]).log2(), (d[1] / d[2]).log2()))
}

/// Particle paths from the given starts toward `φ = 0`: `r` must increase
/// along the path and the path from `−φ0` must mirror the one from `φ0`.
pub fn trajectory_study(
    theta0: f64,
    alpha0: f64,
    starts: &[f64],
    r0: f64,
    mirror_tolerance: f64,
    opts: &StudyOptions,
) -> Result<StudyReport, StudyError> {
    let mut report = StudyReport::new(
        "trajectory",
        json!({ "theta0": theta0, "alpha0": alpha0, "starts": starts, "r0": r0,
                "mirror_tolerance": mirror_tolerance, "options": opts }),
    );
    let config = ProblemConfig::hypersonic(theta0, alpha0, opts.truncation)
        .map_err(|_| SolverError::NoSteps)?;
    let (b, m) = solve_case(&config, opts)?;
    let prof = recover_fields(
        &b,
        &config,
        &RecoveryOptions::default().with_grid(opts.grid_size),
        opts.exec,
    )?;
    let topts = TrajectoryOptions {
        grid_size: opts.grid_size,
        ..Default::default()
    };
    for &phi0 in starts {
        let t = integrate_trajectory(&prof, theta0, phi0, r0, 0.0, &topts)?;
        let mirror = integrate_trajectory(&prof, theta0, -phi0, r0, 0.0, &topts)?;
        let min_step = t
            .samples
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::INFINITY, f64::min);
        let tag = format!("phi0={phi0:.6}");
        report.check(
            format!("{tag} min r increment"),
            min_step,
            Comparison::Greater,
            0.0,
        );
        report.check_flag(
            format!("{tag} terminal approach to phi = 0"),
            t.termination == Termination::SingularWindow,
        );
        let mut dev = if t.samples.len() == mirror.samples.len() {
            0.0
        } else {
            f64::INFINITY
        };
        for (a, c) in t.samples.iter().zip(&mirror.samples) {
            dev = f64::max(dev, (a.0 + c.0).abs().max((a.1 - c.1).abs()));
        }
        report.check(
            format!("{tag} mirror deviation"),
            dev,
            Comparison::LessEq,
            mirror_tolerance,
        );
    }
    report.cases.push(m);
    Ok(report)
}
