use std::f64::consts::PI;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shocklayer::{CoefficientForm, GasModel};

/// Angle in radians: a decimal, or `[C][*]pi[/K]` such as `pi/6`, `-pi/2`,
/// `3*pi/4`, `-0.999pi`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t: String = s.trim().to_ascii_lowercase().split_whitespace().collect();
    if t.is_empty() {
        return Err("empty angle".into());
    }
    let value = match t.find("pi") {
        Some(i) => {
            let (pre, post) = (&t[..i], &t[i + 2..]);
            let coef = match pre.trim_end_matches('*') {
                "" | "+" => 1.0,
                "-" => -1.0,
                c => c
                    .parse::<f64>()
                    .map_err(|_| format!("bad multiplier in angle '{s}'"))?,
            };
            let div = if post.is_empty() {
                1.0
            } else {
                post.strip_prefix('/')
                    .and_then(|d| d.parse::<f64>().ok())
                    .filter(|d| *d != 0.0)
                    .ok_or_else(|| format!("bad divisor in angle '{s}'"))?
            };
            coef * PI / div
        }
        None => t.parse::<f64>().map_err(|_| format!("bad angle '{s}'"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("angle '{s}' is not finite"))
    }
}

/// `hypersonic` or `chaplygin:MACH`.
pub fn parse_gas(s: &str) -> Result<GasModel, String> {
    match s.trim().to_ascii_lowercase().split_once(':') {
        None if s.trim().eq_ignore_ascii_case("hypersonic") => Ok(GasModel::HypersonicLimit),
        Some(("chaplygin", m)) => {
            let mach: f64 = m.parse().map_err(|_| format!("bad Mach number '{m}'"))?;
            GasModel::chaplygin(mach).map_err(|e| e.to_string())
        }
        _ => Err(format!(
            "unknown gas '{s}' (use hypersonic or chaplygin:MACH)"
        )),
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("'{s}' is not a positive number")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoefficientChoice {
    Printed,
    TraceDerived,
}

impl From<CoefficientChoice> for CoefficientForm {
    fn from(c: CoefficientChoice) -> Self {
        match c {
            CoefficientChoice::Printed => CoefficientForm::Printed,
            CoefficientChoice::TraceDerived => CoefficientForm::TraceDerived,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "shocklayer",
    version,
    about = "Infinite-thin shock layers on a yawed cone"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one case and write fields.csv, coefficients.csv, summary.json.
    Solve(SolveArgs),
    /// Solve the Cartesian product of the listed parameters.
    Sweep(SweepArgs),
    /// Solve one case and trace particle paths on the cone.
    Trajectory(TrajectoryArgs),
    /// Run a validation study and write its report.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct NumericArgs {
    /// hypersonic | chaplygin:MACH
    #[arg(long, default_value = "hypersonic", value_parser = parse_gas)]
    pub gas: GasModel,
    #[arg(long, value_enum, default_value = "printed")]
    pub coefficients: CoefficientChoice,
    /// Newton tolerance on the max-abs step norm.
    #[arg(long, default_value_t = 1e-12, value_parser = parse_positive)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub damping: f64,
    /// Continuation steps in the attack angle (default: one per pi/72).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Output grid size on [-pi, pi).
    #[arg(long, default_value_t = 2048)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = "SHOCKLAYER_OUT", default_value = "shocklayer-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long, default_value = "pi/6", value_parser = parse_angle, allow_hyphen_values = true)]
    pub theta0: f64,
    #[arg(long, default_value = "pi/36", value_parser = parse_angle, allow_hyphen_values = true)]
    pub alpha0: f64,
    /// Truncation order.
    #[arg(short = 'N', long = "N", default_value_t = 8)]
    pub n: usize,
    #[command(flatten)]
    pub numeric: NumericArgs,
    /// Re-run the configuration stored in a summary.json (other problem
    /// flags are ignored).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', num_args = 1, default_value = "pi/6",
          value_parser = parse_angle, allow_hyphen_values = true)]
    pub theta0: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1, default_value = "pi/36",
          value_parser = parse_angle, allow_hyphen_values = true)]
    pub alpha0: Vec<f64>,
    #[arg(
        short = 'N',
        long = "N",
        value_delimiter = ',',
        num_args = 1,
        default_value = "8"
    )]
    pub n: Vec<usize>,
    #[command(flatten)]
    pub numeric: NumericArgs,
    /// Cases solved concurrently (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub problem: SolveArgs,
    /// Start angles (comma separated).
    #[arg(long, value_delimiter = ',', num_args = 1, required = true,
          value_parser = parse_angle, allow_hyphen_values = true)]
    pub phi0: Vec<f64>,
    #[arg(long, value_parser = parse_positive, allow_hyphen_values = true)]
    pub r0: f64,
    #[arg(long = "phi-end", default_value = "0", value_parser = parse_angle, allow_hyphen_values = true)]
    pub phi_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Study {
    Oracle,
    Jacobian,
    Error,
    WcExtrema,
    Monotonicity,
    Chaplygin,
    Shape,
    Breakdown,
    Fields,
    Trajectory,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(value_enum)]
    pub study: Study,
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub theta0: Option<f64>,
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub alpha0: Option<f64>,
    /// Freestream Mach number for the chaplygin study.
    #[arg(long, default_value_t = 3.0, value_parser = parse_positive)]
    pub mach: f64,
    /// Truncation order for solve-based studies.
    #[arg(short = 'N', long = "N")]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 2048)]
    pub grid: usize,
    #[command(flatten)]
    pub out: OutArgs,
}
