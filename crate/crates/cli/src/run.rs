use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use shocklayer::postprocess::partial_fields;
use shocklayer::solver::default_continuation_steps;
use shocklayer::validation::{
    assess_validity, breakdown_study, chaplygin_reference_check, error_study, field_study,
    jacobian_study, monotonicity_study, oracle_study, shape_study, trajectory_study,
    wc_extremum_study, ErrorStudyThresholds, JacobianCheckOptions, RandomCaseOptions, StudyOptions,
    StudyReport,
};
use shocklayer::{
    continuation_solve, integrate_trajectory, quasi_l1_norm, recover_fields, residual_function,
    uniform_grid, Execution, FieldProfile, NewtonConfig, NormKind, ProblemConfig, RecoveryOptions,
    Termination, TrajectoryOptions,
};

use crate::args::{NumericArgs, SolveArgs, Study, SweepArgs, TrajectoryArgs, ValidateArgs};
use crate::output::{
    now_ms, read_manifest, write_coefficients, write_fields, write_json, write_trajectories,
    Metrics, RunConfig, RunManifest, RunStatus, SCHEMA_VERSION,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(io::Error),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Io(_) | CliError::Failure(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Failure(m) => write!(f, "{m}"),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

pub fn run_config(
    theta0: f64,
    alpha0: f64,
    n: usize,
    numeric: &NumericArgs,
) -> Result<RunConfig, CliError> {
    let usage = |m: String| CliError::Usage(m);
    let problem = ProblemConfig::new(theta0, alpha0, numeric.gas, n)
        .map_err(|e| usage(e.to_string()))?
        .with_coefficient_form(numeric.coefficients.into());
    if numeric.max_iter == 0 {
        return Err(usage("--max-iter must be at least 1".into()));
    }
    if numeric.damping > 1.0 {
        return Err(usage("--damping must lie in (0, 1]".into()));
    }
    if numeric.grid < 8 || !numeric.grid.is_multiple_of(2) {
        return Err(usage("--grid must be even and at least 8".into()));
    }
    let steps = numeric
        .steps
        .unwrap_or_else(|| default_continuation_steps(alpha0));
    if steps == 0 {
        return Err(usage("--steps must be at least 1".into()));
    }
    Ok(RunConfig {
        problem,
        newton: NewtonConfig {
            max_iterations: numeric.max_iter,
            tolerance: numeric.tol,
            damping: numeric.damping,
            norm: NormKind::MaxAbs,
        },
        continuation_steps: steps,
        recovery: RecoveryOptions::default().with_grid(numeric.grid),
    })
}

pub struct CaseOutcome {
    pub manifest: RunManifest,
    pub profile: Option<FieldProfile>,
}

/// Solves one configuration and writes its files into `dir`.
pub fn run_case(cfg: &RunConfig, dir: &Path, exec: Execution) -> io::Result<CaseOutcome> {
    fs::create_dir_all(dir)?;
    let started = now_ms();
    let mut outputs = BTreeMap::new();
    outputs.insert("summary".to_string(), "summary.json".to_string());
    let mut manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_ms: started,
        finished_unix_ms: started,
        config: cfg.clone(),
        outputs,
        status: RunStatus::SolverFailure,
        error: None,
        metrics: None,
        validity: None,
        solve_reports: Vec::new(),
        closed_form: false,
        wc_const: None,
        field_recovery_error: None,
        singular_points: Vec::new(),
    };
    let solved = continuation_solve(&cfg.problem, cfg.continuation_steps, &cfg.newton);
    let (b, reports) = match solved {
        Ok(s) => s,
        Err(e) => {
            manifest.error = Some(e.to_string());
            manifest.finished_unix_ms = now_ms();
            write_json(&dir.join("summary.json"), &manifest)?;
            return Ok(CaseOutcome {
                manifest,
                profile: None,
            });
        }
    };
    let grid_size = cfg.recovery.grid_size;
    let validity = assess_validity(&b, &cfg.problem, grid_size);
    let (profile, recovery_error) = match recover_fields(&b, &cfg.problem, &cfg.recovery, exec) {
        Ok(p) => (p, None),
        Err(e) => (
            partial_fields(&b, &cfg.problem, grid_size),
            Some(e.to_string()),
        ),
    };
    let residual = residual_function(
        &b,
        &cfg.problem.coefficients(),
        &uniform_grid(grid_size),
        exec,
    );
    manifest.metrics = Some(Metrics {
        quasi_l1: quasi_l1_norm(&residual),
        max_abs_residual: residual.iter().fold(0.0, |m, e| m.max(e.abs())),
        newton_iterations: reports.iter().map(|r| r.iterations).sum(),
        max_f: validity.max_f,
        min_f: validity.min_f,
        max_wc: validity.max_wc,
        min_wc: validity.min_wc,
    });
    manifest.status = match (validity.valid, &recovery_error) {
        (false, _) => RunStatus::Invalid,
        (true, None) => RunStatus::Valid,
        (true, Some(_)) => RunStatus::SolverFailure,
    };
    manifest.closed_form = profile.closed_form;
    manifest.wc_const = profile.closed_form.then(|| profile.wc[0]);
    manifest.singular_points = profile.singular_points.clone();
    manifest.field_recovery_error = recovery_error;
    manifest.validity = Some(validity);
    manifest.solve_reports = reports;

    write_fields(&dir.join("fields.csv"), &profile)?;
    write_coefficients(&dir.join("coefficients.csv"), &b)?;
    manifest
        .outputs
        .insert("fields".into(), "fields.csv".into());
    manifest
        .outputs
        .insert("coefficients".into(), "coefficients.csv".into());
    manifest.finished_unix_ms = now_ms();
    write_json(&dir.join("summary.json"), &manifest)?;
    Ok(CaseOutcome {
        manifest,
        profile: Some(profile),
    })
}

fn report_status(m: &RunManifest) {
    match m.status {
        RunStatus::Valid => {}
        RunStatus::Invalid => {
            if let Some(v) = &m.validity {
                eprintln!(
                    "converged but invalid: W_C > 0 {}, f >= 0 {}, f(0) = f(pi) = 0 {} (min W_C {:.3e}, min f {:.3e})",
                    v.wc_positive, v.f_nonnegative, v.boundary_ok, v.min_wc, v.min_f
                );
            }
        }
        RunStatus::SolverFailure => {
            let msg = m
                .error
                .as_deref()
                .or(m.field_recovery_error.as_deref())
                .unwrap_or("unknown failure");
            eprintln!("solver failure: {msg}");
        }
    }
}

fn solve_config(args: &SolveArgs) -> Result<RunConfig, CliError> {
    match &args.manifest {
        Some(path) => Ok(read_manifest(path)
            .map_err(|e| CliError::Usage(format!("cannot read manifest {}: {e}", path.display())))?
            .config),
        None => run_config(args.theta0, args.alpha0, args.n, &args.numeric),
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<u8, CliError> {
    let cfg = solve_config(args)?;
    let out = run_case(&cfg, &args.out.out, Execution::Parallel)?;
    report_status(&out.manifest);
    println!("{}", args.out.out.join("summary.json").display());
    Ok(out.manifest.status.exit_code())
}

#[derive(Debug, Serialize)]
struct SweepEntry {
    dir: String,
    theta0: f64,
    alpha0: f64,
    truncation: usize,
    status: Option<RunStatus>,
    error: Option<String>,
    quasi_l1: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SweepIndex {
    schema_version: u32,
    cases: Vec<SweepEntry>,
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<u8, CliError> {
    if args.theta0.is_empty() || args.alpha0.is_empty() || args.n.is_empty() {
        return Err(CliError::Usage("sweep lists must not be empty".into()));
    }
    let mut cases = Vec::new();
    for &t in &args.theta0 {
        for &a in &args.alpha0 {
            for &n in &args.n {
                cases.push((t, a, n));
            }
        }
    }
    let root = &args.out.out;
    fs::create_dir_all(root)?;
    let run = |(k, &(t, a, n)): (usize, &(f64, f64, usize))| {
        let dir = format!("case_{k:03}");
        let mut entry = SweepEntry {
            dir: dir.clone(),
            theta0: t,
            alpha0: a,
            truncation: n,
            status: None,
            error: None,
            quasi_l1: None,
        };
        match run_config(t, a, n, &args.numeric) {
            Err(e) => entry.error = Some(e.to_string()),
            Ok(cfg) => match run_case(&cfg, &root.join(&dir), Execution::Sequential) {
                Ok(o) => {
                    entry.status = Some(o.manifest.status);
                    entry.error = o.manifest.error.or(o.manifest.field_recovery_error);
                    entry.quasi_l1 = o.manifest.metrics.map(|m| m.quasi_l1);
                }
                Err(e) => entry.error = Some(e.to_string()),
            },
        }
        entry
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Failure(e.to_string()))?;
    let entries: Vec<SweepEntry> = pool.install(|| cases.par_iter().enumerate().map(run).collect());
    let all_ran = entries
        .iter()
        .all(|e| matches!(e.status, Some(RunStatus::Valid | RunStatus::Invalid)));
    for e in &entries {
        let status = e
            .status
            .map(|s| format!("{s:?}").to_lowercase())
            .unwrap_or_else(|| "error".into());
        println!(
            "{} theta0={:.6} alpha0={:.6} N={} {}{}",
            e.dir,
            e.theta0,
            e.alpha0,
            e.truncation,
            status,
            e.error
                .as_deref()
                .map(|m| format!(" ({m})"))
                .unwrap_or_default()
        );
    }
    write_json(
        &root.join("index.json"),
        &SweepIndex {
            schema_version: SCHEMA_VERSION,
            cases: entries,
        },
    )?;
    Ok(if all_ran { 0 } else { 1 })
}

#[derive(Debug, Serialize)]
struct PathSummary {
    path: usize,
    phi0: f64,
    r0: f64,
    phi_end: f64,
    termination: Termination,
    samples: usize,
    final_phi: f64,
    final_r: f64,
}

pub fn cmd_trajectory(args: &TrajectoryArgs) -> Result<u8, CliError> {
    let cfg = solve_config(&args.problem)?;
    let dir = &args.problem.out.out;
    let out = run_case(&cfg, dir, Execution::Parallel)?;
    report_status(&out.manifest);
    let profile = match (&out.profile, &out.manifest.field_recovery_error) {
        (Some(p), None) => p,
        _ => {
            return Err(CliError::Failure(
                "fields unavailable, no trajectories computed".into(),
            ))
        }
    };
    let opts = TrajectoryOptions {
        grid_size: cfg.recovery.grid_size,
        ..Default::default()
    };
    let mut paths = Vec::new();
    for &phi0 in &args.phi0 {
        let t = integrate_trajectory(
            profile,
            cfg.problem.theta0,
            phi0,
            args.r0,
            args.phi_end,
            &opts,
        )
        .map_err(|e| CliError::Failure(format!("trajectory from phi0 = {phi0}: {e}")))?;
        paths.push(t);
    }
    write_trajectories(&dir.join("trajectory.csv"), &paths)?;
    let summary: Vec<PathSummary> = paths
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let last = *t.samples.last().expect("start sample");
            PathSummary {
                path: k,
                phi0: t.phi0,
                r0: t.r0,
                phi_end: args.phi_end,
                termination: t.termination,
                samples: t.samples.len(),
                final_phi: last.0,
                final_r: last.1,
            }
        })
        .collect();
    write_json(&dir.join("trajectory.json"), &summary)?;
    println!("{}", dir.join("trajectory.csv").display());
    Ok(out.manifest.status.exit_code())
}

fn study_name(s: Study) -> &'static str {
    match s {
        Study::Oracle => "oracle",
        Study::Jacobian => "jacobian",
        Study::Error => "error",
        Study::WcExtrema => "wc-extrema",
        Study::Monotonicity => "monotonicity",
        Study::Chaplygin => "chaplygin",
        Study::Shape => "shape",
        Study::Breakdown => "breakdown",
        Study::Fields => "fields",
        Study::Trajectory => "trajectory",
    }
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<u8, CliError> {
    let theta0 = args.theta0.unwrap_or(PI / 6.0);
    let alpha0 = args.alpha0.unwrap_or(PI / 36.0);
    let opts = StudyOptions {
        grid_size: args.grid,
        truncation: args.n.unwrap_or(8),
        ..Default::default()
    };
    let fail = |e: &dyn std::fmt::Display| CliError::Failure(e.to_string());
    let alphas = [PI / 36.0, PI / 24.0, PI / 18.0, PI / 12.0, PI / 9.0];
    let report: StudyReport = match args.study {
        Study::Oracle => oracle_study(
            &RandomCaseOptions::default(),
            512,
            1e-12,
            Execution::Parallel,
        ),
        Study::Jacobian => jacobian_study(
            &RandomCaseOptions::default(),
            &JacobianCheckOptions::default(),
            Execution::Parallel,
        ),
        Study::Error => error_study(
            theta0,
            alpha0,
            &[5, 6, 7, 8, 9, 10],
            &ErrorStudyThresholds::default(),
            &opts,
        )
        .map_err(|e| fail(&e))?,
        Study::WcExtrema => {
            wc_extremum_study(theta0, &alphas, 1e-2, &opts).map_err(|e| fail(&e))?
        }
        Study::Monotonicity => {
            monotonicity_study(alpha0, &[PI / 9.0, PI / 6.0, PI / 4.0], 1e-8, &opts)
                .map_err(|e| fail(&e))?
        }
        Study::Chaplygin => {
            chaplygin_reference_check(theta0, args.mach, args.grid).map_err(|e| fail(&e))?
        }
        Study::Shape => {
            let resolved = StudyOptions {
                truncation: args.n.unwrap_or(64),
                ..opts
            };
            shape_study(theta0, &alphas, (1e-5, 1e-3), &resolved).map_err(|e| fail(&e))?
        }
        Study::Breakdown => {
            breakdown_study(theta0, args.alpha0.unwrap_or(PI / 6.0), &[5, 8, 10], &opts)
                .map_err(|e| fail(&e))?
        }
        Study::Fields => {
            field_study(theta0, alpha0, 1e-8, (3.7, 4.3), &opts).map_err(|e| fail(&e))?
        }
        Study::Trajectory => trajectory_study(
            theta0,
            alpha0,
            &[-0.999 * PI, -0.75 * PI, -0.5 * PI],
            10.0,
            1e-6,
            &opts,
        )
        .map_err(|e| fail(&e))?,
    };
    fs::create_dir_all(&args.out.out)?;
    let path = args
        .out
        .out
        .join(format!("{}.json", study_name(args.study)));
    write_json(&path, &report)?;
    for c in &report.checks {
        println!("{c}");
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    println!(
        "{}: {} ({})",
        report.study,
        if report.passed { "passed" } else { "FAILED" },
        path.display()
    );
    Ok(if report.passed { 0 } else { 1 })
}
