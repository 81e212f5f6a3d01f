use std::path::PathBuf;

use clap::Args;
use rerope::{band_redundancy_report, toy_heatmap, FrequencySchedule};

use crate::output::{data, write_atomic};
use crate::{CliError, Context};

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    /// Number of offsets Δ = 0..T-1 [default: 50]
    #[arg(long, short = 'T')]
    pub positions: Option<usize>,
    /// Rotary base [default: 10000]
    #[arg(long)]
    pub theta: Option<f64>,
    /// Feature dimension (two channels per plane) [default: 32]
    #[arg(long)]
    pub dim: Option<usize>,
    /// CSV destination [default: $REROPE_OUTPUT_DIR/heatmap.csv]
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Also write a binary grayscale PGM image mapping [-2, 2] to [0, 255]
    #[arg(long)]
    pub image: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RedundancyArgs {
    /// Window length T [default: 101]
    #[arg(long, short = 'T')]
    pub positions: Option<usize>,
    /// Rotary base [default: 10000]
    #[arg(long)]
    pub theta: Option<f64>,
    /// Feature dimension [default: 32]
    #[arg(long)]
    pub dim: Option<usize>,
    /// CSV destination [default: $REROPE_OUTPUT_DIR/redundancy.csv]
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn schedule(ctx: &mut Context, theta: Option<f64>, dim: Option<usize>) -> Result<FrequencySchedule, CliError> {
    let theta = ctx.settings.value("theta", theta, 1e4)?;
    let dim = ctx.settings.value("dim", dim, 32)?;
    Ok(FrequencySchedule::new(theta, dim)?)
}

pub(crate) fn heatmap(ctx: &mut Context, a: HeatmapArgs) -> Result<(), CliError> {
    let positions = ctx.settings.value("positions", a.positions, 50)?;
    let schedule = schedule(ctx, a.theta, a.dim)?;
    let path = ctx.settings.output("output", a.output, ctx.dir, "heatmap.csv")?;
    let image = ctx.settings.optional_output("image", a.image)?;
    ctx.settings.finish()?;
    if positions == 0 {
        return Err(CliError::Usage("positions must be at least 1".into()));
    }

    let grid = toy_heatmap(positions, &schedule);
    let mut csv = ctx.settings.header("heatmap");
    csv.push_str("# rows: offset 0..T-1; columns: plane index; cell = 2cos(offset * omega_f)\n");
    let planes: Vec<String> = (0..grid.ncols()).map(|f| f.to_string()).collect();
    csv.push_str(&planes.join(","));
    csv.push('\n');
    for row in grid.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| data(*v)).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    write_atomic(&path, csv.as_bytes())?;

    if let Some(image) = image {
        let mut pgm = format!("P5\n{} {}\n255\n", grid.ncols(), grid.nrows()).into_bytes();
        pgm.extend(grid.row_iter().flat_map(|row| row.iter().map(|v| gray(*v)).collect::<Vec<_>>()));
        write_atomic(&image, &pgm)?;
    }
    Ok(())
}

/// Linear map of [-2, 2] onto [0, 255].
pub(crate) fn gray(v: f64) -> u8 {
    ((v.clamp(-2.0, 2.0) + 2.0) / 4.0 * 255.0).round() as u8
}

pub(crate) fn redundancy(ctx: &mut Context, a: RedundancyArgs) -> Result<(), CliError> {
    let positions = ctx.settings.value("positions", a.positions, 101)?;
    let schedule = schedule(ctx, a.theta, a.dim)?;
    let path = ctx.settings.output("output", a.output, ctx.dir, "redundancy.csv")?;
    ctx.settings.finish()?;

    let rows = band_redundancy_report(positions, &schedule)?;
    let mut csv = ctx.settings.header("redundancy");
    csv.push_str("plane,omega,accumulated_phase,logit_deviation\n");
    for r in rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.plane,
            data(r.omega),
            data(r.accumulated_phase),
            data(r.logit_deviation)
        ));
    }
    write_atomic(&path, csv.as_bytes())
}
