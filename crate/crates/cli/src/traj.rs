use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use rerope::{
    align, compute_metrics_with_stride, normalize_translations, parse_trajectory, serialize_trajectory, unify_scales,
    Trajectory, DEFAULT_EPSILON,
};

use crate::output::{data, read_text, summary, write_atomic};
use crate::{CliError, Context};

#[derive(Debug, Subcommand)]
pub enum TrajCommand {
    /// Divide translations by their largest norm
    Normalize(NormalizeArgs),
    /// Pre-normalize source and target, then scale both by S = max‖t‖ + ε
    JointNormalize(JointArgs),
    /// RRE (degrees), RTE and ATE of an estimate against a reference
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// [default: $REROPE_OUTPUT_DIR/normalized.txt]
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct JointArgs {
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Added to the joint maximum [default: 1e-8]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// [default: $REROPE_OUTPUT_DIR/source_normalized.txt]
    #[arg(long)]
    pub output_source: Option<PathBuf>,
    /// [default: $REROPE_OUTPUT_DIR/target_normalized.txt]
    #[arg(long)]
    pub output_target: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub estimate: Option<PathBuf>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Frame gap of the relative-motion pairs [default: 1]
    #[arg(long)]
    pub stride: Option<usize>,
    /// Align with a similarity transform instead of a rigid one
    #[arg(long)]
    pub with_scale: bool,
    /// [default: $REROPE_OUTPUT_DIR/metrics.txt]
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub(crate) fn load_trajectory(path: &Path) -> Result<Trajectory, CliError> {
    parse_trajectory(&read_text(path)?).map_err(|e| CliError::lib(Some(path), e))
}

pub(crate) fn traj(ctx: &mut Context, cmd: TrajCommand) -> Result<(), CliError> {
    match cmd {
        TrajCommand::Normalize(a) => normalize(ctx, a),
        TrajCommand::JointNormalize(a) => joint(ctx, a),
        TrajCommand::Metrics(a) => metrics(ctx, a),
    }
}

fn normalize(ctx: &mut Context, a: NormalizeArgs) -> Result<(), CliError> {
    let input: PathBuf = ctx.settings.required("input", a.input.map(path_string))?.into();
    let path = ctx.settings.output("output", a.output, ctx.dir, "normalized.txt")?;
    ctx.settings.finish()?;

    let n = normalize_translations(&load_trajectory(&input)?);
    if n.degenerate {
        ctx.warn(&format!("{}: all translations are zero; trajectory left unchanged", input.display()));
    }
    let mut text = ctx.settings.header("traj normalize");
    text.push_str(&format!("# divisor = {}\n", data(n.scale)));
    text.push_str(&serialize_trajectory(&n.trajectory));
    write_atomic(&path, text.as_bytes())
}

fn joint(ctx: &mut Context, a: JointArgs) -> Result<(), CliError> {
    let s = &mut *ctx.settings;
    let source: PathBuf = s.required("source", a.source.map(path_string))?.into();
    let target: PathBuf = s.required("target", a.target.map(path_string))?.into();
    let epsilon = s.value("epsilon", a.epsilon, DEFAULT_EPSILON)?;
    let out_source = s.output("output-source", a.output_source, ctx.dir, "source_normalized.txt")?;
    let out_target = s.output("output-target", a.output_target, ctx.dir, "target_normalized.txt")?;
    s.finish()?;

    let j = unify_scales(&load_trajectory(&source)?, &load_trajectory(&target)?, epsilon)?;
    let line = format!("S={}", summary(j.scale));
    for (traj, path, role) in [(&j.source, &out_source, "source"), (&j.target, &out_target, "target")] {
        let mut text = ctx.settings.header("traj joint-normalize");
        text.push_str(&format!("# role = {role}\n# S = {}\n", data(j.scale)));
        text.push_str(&serialize_trajectory(traj));
        write_atomic(path, text.as_bytes())?;
    }
    ctx.say(&line)
}

fn metrics(ctx: &mut Context, a: MetricsArgs) -> Result<(), CliError> {
    let s = &mut *ctx.settings;
    let estimate: PathBuf = s.required("estimate", a.estimate.map(path_string))?.into();
    let reference: PathBuf = s.required("reference", a.reference.map(path_string))?.into();
    let stride = s.value("stride", a.stride, 1)?;
    let with_scale = s.value("with-scale", a.with_scale.then_some(true), false)?;
    let path = s.output("output", a.output, ctx.dir, "metrics.txt")?;
    s.finish()?;

    let pair = align(&load_trajectory(&estimate)?, &load_trajectory(&reference)?, with_scale)?;
    let m = compute_metrics_with_stride(&pair, stride)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), summary);
    let line = format!("RRE_deg={} RTE={} ATE={}", opt(m.rre_deg), opt(m.rte), summary(m.ate));
    let mut text = ctx.settings.header("traj metrics");
    text.push_str(&format!("# alignment_scale = {}\n", data(pair.alignment.scale)));
    text.push_str(&line);
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    ctx.say(&line)
}

fn path_string(p: PathBuf) -> String {
    p.to_string_lossy().into_owned()
}
