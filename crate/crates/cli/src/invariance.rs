use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rerope::lab::DEFAULT_SEED;
use rerope::{
    double_rope_reversed_control, reduction_random_camera_control, shift_query_only_control,
    verify_double_rope_structure, verify_reduction_identity, verify_rope1d_shift_invariance,
    verify_shift_invariance_with, verify_temporal_independence, verify_world_transform_invariance, FamilyEncoder,
    FrequencySchedule, InvarianceReport, OperatorFamily, ReRopeConfig, TransformScope,
};

use crate::output::{summary, write_atomic};
use crate::{CliError, Context, OperatorArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Shift,
    World,
    Reduction,
    Ablation,
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Suite as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Args)]
pub struct InvarianceArgs {
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    /// Random seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trials per check [default: 1000 for shift, 100 otherwise]
    #[arg(long)]
    pub trials: Option<usize>,
    /// Run the suite's negative controls instead; these are expected to fail
    #[arg(long)]
    pub negative_control: bool,
    #[command(flatten)]
    pub operator: OperatorArgs,
    /// Report destination [default: $REROPE_OUTPUT_DIR/invariance-<suite>.txt]
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Shifts are drawn from `[0, MAX_SHIFT]` per axis.
const MAX_SHIFT: usize = 64;

pub(crate) fn invariance(ctx: &mut Context, a: InvarianceArgs) -> Result<(), CliError> {
    let s = &mut *ctx.settings;
    let suite = s.required("suite", a.suite)?;
    let seed = s.value("seed", a.seed, DEFAULT_SEED)?;
    let default_trials = if suite == Suite::Shift { 1000 } else { 100 };
    let trials = s.value("trials", a.trials, default_trials)?;
    let negative = s.value("negative-control", a.negative_control.then_some(true), false)?;
    let cfg = a.operator.resolve(s)?;
    let path = s.output("output", a.output, ctx.dir, &format!("invariance-{suite}.txt"))?;
    s.finish()?;
    if trials == 0 {
        return Err(CliError::Usage("trials must be positive".into()));
    }

    let reports = run_suite(suite, &cfg, trials, seed, negative)?;
    let mut text = ctx.settings.header("invariance");
    for r in &reports {
        text.push_str(&format!(
            "{} trials={} max_dev={} tol={} {}\n",
            r.name,
            r.trials,
            summary(r.max_abs_deviation),
            summary(r.tolerance),
            verdict(r.passed)
        ));
    }
    let line = summary_line(&reports);
    text.push_str(&line);
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    ctx.say(&line)?;
    if reports.iter().all(|r| r.passed) {
        Ok(())
    } else {
        Err(CliError::Failed)
    }
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

/// `PASS|FAIL max_dev=… tol=…` for the check closest to (or furthest past) its tolerance.
pub(crate) fn summary_line(reports: &[InvarianceReport]) -> String {
    let worst = reports
        .iter()
        .max_by(|a, b| (a.max_abs_deviation / a.tolerance).total_cmp(&(b.max_abs_deviation / b.tolerance)))
        .expect("every suite runs at least one check");
    format!(
        "{} max_dev={} tol={}",
        verdict(reports.iter().all(|r| r.passed)),
        summary(worst.max_abs_deviation),
        summary(worst.tolerance)
    )
}

pub(crate) fn run_suite(
    suite: Suite,
    cfg: &ReRopeConfig,
    trials: usize,
    seed: u64,
    negative: bool,
) -> Result<Vec<InvarianceReport>, CliError> {
    let rotary = [OperatorFamily::Rope3d, OperatorFamily::MaskedRope];
    let camera = [OperatorFamily::ReRope, OperatorFamily::FullTemporal, OperatorFamily::DoubleRope];
    let mut out = Vec::new();
    match (suite, negative) {
        (Suite::Shift, false) => {
            let schedule = FrequencySchedule::new(cfg.schedules().temporal.theta(), cfg.head_dim())?;
            out.push(verify_rope1d_shift_invariance(&schedule, trials, seed)?);
            for f in rotary {
                out.push(verify_shift_invariance_with(&FamilyEncoder::new(f, cfg), f.name(), trials, seed, MAX_SHIFT)?);
            }
        }
        (Suite::Shift, true) => {
            for f in rotary {
                out.push(shift_query_only_control(&FamilyEncoder::new(f, cfg), f.name(), trials, seed, MAX_SHIFT)?);
            }
        }
        (Suite::World, negative) => {
            let scope = if negative { TransformScope::HalfCameras } else { TransformScope::AllCameras };
            for f in camera {
                out.push(verify_world_transform_invariance(f, cfg, trials, seed, scope)?);
            }
        }
        (Suite::Reduction, false) => out.push(verify_reduction_identity(cfg, trials, seed)?),
        (Suite::Reduction, true) => out.push(reduction_random_camera_control(cfg, trials, seed)?),
        (Suite::Ablation, false) => {
            out.push(verify_double_rope_structure(cfg, trials, seed)?);
            out.push(verify_temporal_independence(OperatorFamily::FullTemporal, cfg, trials, seed)?);
        }
        (Suite::Ablation, true) => {
            out.push(double_rope_reversed_control(cfg, trials, seed)?);
            out.push(verify_temporal_independence(OperatorFamily::ReRope, cfg, trials, seed)?);
        }
    }
    Ok(out)
}
