//! The `rerope` command-line tool.
//!
//! Each subcommand writes one or more files whose first lines are `#`
//! comments echoing the fully-resolved parameters. Parameters come from flags,
//! then from an optional `--config` file of `key = value` lines (keys are the
//! long flag names), then from defaults.
//!
//! Exit status: 0 success, 1 failed verification or invalid input data,
//! 2 usage error, 3 I/O error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

mod demo;
mod heatmap;
mod invariance;
pub mod output;
pub mod settings;
mod traj;

use settings::Settings;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Data(String),
    #[error("verification failed")]
    Failed,
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// Wraps a library error raised while handling `context` (usually a file).
    pub fn lib(context: Option<&Path>, e: rerope::Error) -> Self {
        use rerope::Error as E;
        let msg = match context {
            Some(p) => format!("{}: {e}", p.display()),
            None => e.to_string(),
        };
        match e {
            E::Config(_) | E::Dimension { .. } => CliError::Usage(msg),
            _ => CliError::Data(msg),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Data(_) | CliError::Failed => EXIT_FAILED,
        }
    }
}

impl From<rerope::Error> for CliError {
    fn from(e: rerope::Error) -> Self {
        CliError::lib(None, e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "rerope", version, about = "Rotary and camera positional-encoding experiments")]
pub struct Cli {
    /// File of `key = value` lines supplying defaults for any long flag
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Unit-feature logit 2cos(Δω_f) per offset and plane, as CSV
    Heatmap(heatmap::HeatmapArgs),
    /// Per-plane phase accumulated over a window, as CSV
    Redundancy(heatmap::RedundancyArgs),
    /// Run an invariance suite and write its report
    Invariance(invariance::InvarianceArgs),
    /// Trajectory normalization and accuracy metrics
    #[command(subcommand)]
    Traj(traj::TrajCommand),
    /// Pairwise logits for a synthetic single-pixel video
    Demo(demo::DemoArgs),
}

/// Parameters shared by commands that build a head-dimension operator.
#[derive(Debug, Clone, Args)]
pub struct OperatorArgs {
    /// Head dimension, divisible by 6 for the default band layout [default: 96]
    #[arg(long)]
    pub head_dim: Option<usize>,
    /// Rotary base [default: 10000]
    #[arg(long)]
    pub theta: Option<f64>,
    /// Band layout `high,camera,height,width` [default: d/6,d/6,d/3,d/3]
    #[arg(long)]
    pub layout: Option<String>,
}

pub const DEFAULT_HEAD_DIM: usize = 96;
pub const DEFAULT_THETA: f64 = 1e4;

impl OperatorArgs {
    pub fn resolve(&self, s: &mut Settings) -> Result<rerope::ReRopeConfig, CliError> {
        let head_dim = s.value("head-dim", self.head_dim, DEFAULT_HEAD_DIM)?;
        let theta = s.value("theta", self.theta, DEFAULT_THETA)?;
        let layout = match s.resolve::<String>("layout", self.layout.clone())? {
            None => rerope::ReRopeLayout::default_for(head_dim)?,
            Some(text) => {
                let parts = text
                    .split(',')
                    .map(|p| p.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| CliError::Usage(format!("invalid layout '{text}': {e}")))?;
                let [high, low, h, w] = parts[..] else {
                    return Err(CliError::Usage(format!("layout '{text}' needs four widths")));
                };
                let layout = rerope::ReRopeLayout::new(high, low, h, w)?;
                if layout.total() != head_dim {
                    return Err(CliError::Usage(format!(
                        "layout '{text}' sums to {}, not the head dimension {head_dim}",
                        layout.total()
                    )));
                }
                layout
            }
        };
        s.record("layout", format!("{},{},{},{}", layout.d_tau_high(), layout.d_tau_low(), layout.d_h(), layout.d_w()));
        Ok(rerope::ReRopeConfig::with_theta(layout, theta)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Rope3d,
    Rerope,
    FullTemporal,
    DoubleRope,
    MaskedRope,
}

/// Runs the tool and returns the exit status. `output_dir` is the directory for
/// outputs without an explicit path.
pub fn run<I, T>(args: I, output_dir: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, output_dir, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(CliError::Failed) => EXIT_FAILED,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// The output directory from [`output::OUTPUT_DIR_VAR`], or the working directory.
pub fn output_dir_from_env() -> PathBuf {
    std::env::var_os(output::OUTPUT_DIR_VAR)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn execute(cli: Cli, dir: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let mut s = Settings::load(cli.config.as_deref())?;
    let ctx = &mut Context { settings: &mut s, dir, stdout, stderr };
    match cli.command {
        Command::Heatmap(a) => heatmap::heatmap(ctx, a),
        Command::Redundancy(a) => heatmap::redundancy(ctx, a),
        Command::Invariance(a) => invariance::invariance(ctx, a),
        Command::Traj(c) => traj::traj(ctx, c),
        Command::Demo(a) => demo::demo(ctx, a),
    }
}

pub(crate) struct Context<'a> {
    pub settings: &'a mut Settings,
    pub dir: &'a Path,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

impl Context<'_> {
    pub fn say(&mut self, line: &str) -> Result<(), CliError> {
        writeln!(self.stdout, "{line}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
    }

    pub fn warn(&mut self, line: &str) {
        let _ = writeln!(self.stderr, "warning: {line}");
    }
}
