use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use shocklayer::postprocess::SingularPointInfo;
use shocklayer::{
    FieldProfile, NewtonConfig, ProblemConfig, RecoveryOptions, SolveReport, SpectralCoefficients,
    Trajectory, Validity,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to repeat a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub newton: NewtonConfig,
    pub continuation_steps: usize,
    pub recovery: RecoveryOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Valid,
    Invalid,
    SolverFailure,
}

impl RunStatus {
    pub fn exit_code(self) -> u8 {
        match self {
            RunStatus::Valid => 0,
            RunStatus::Invalid => 2,
            RunStatus::SolverFailure => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub quasi_l1: f64,
    pub max_abs_residual: f64,
    pub newton_iterations: usize,
    pub max_f: f64,
    pub min_f: f64,
    pub max_wc: f64,
    pub min_wc: f64,
}

/// Contents of summary.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub config: RunConfig,
    pub outputs: BTreeMap<String, String>,
    pub status: RunStatus,
    pub error: Option<String>,
    pub metrics: Option<Metrics>,
    pub validity: Option<Validity>,
    pub solve_reports: Vec<SolveReport>,
    pub closed_form: bool,
    /// Constant surface force on the closed-form branch.
    #[serde(rename = "Wc_const")]
    pub wc_const: Option<f64>,
    pub field_recovery_error: Option<String>,
    pub singular_points: Vec<SingularPointInfo>,
}

pub fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

pub fn write_fields(path: &Path, p: &FieldProfile) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "phi", "f", "fdot", "h", "y", "ut", "w", "w_rho", "Wc", "valid",
    ])
    .map_err(csv_err)?;
    for i in 0..p.len() {
        let row = [
            p.phi[i], p.f[i], p.fdot[i], p.h[i], p.y[i], p.ut[i], p.w[i], p.w_rho[i], p.wc[i],
        ];
        let mut rec: Vec<String> = row.iter().map(|&v| num(v)).collect();
        rec.push(if p.valid[i] { "1" } else { "0" }.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_coefficients(path: &Path, b: &SpectralCoefficients) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["n", "b_n"]).map_err(csv_err)?;
    for (n, &v) in b.as_slice().iter().enumerate() {
        w.write_record([n.to_string(), num(v)]).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_trajectories(path: &Path, paths: &[Trajectory]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["path", "phi", "r", "x1", "x2", "x3"])
        .map_err(csv_err)?;
    for (k, t) in paths.iter().enumerate() {
        for (&(phi, r), x) in t.samples.iter().zip(t.cartesian()) {
            w.write_record([
                k.to_string(),
                num(phi),
                num(r),
                num(x[0]),
                num(x[1]),
                num(x[2]),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    fs::write(path, text + "\n")
}

pub fn read_manifest(path: &Path) -> io::Result<RunManifest> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
