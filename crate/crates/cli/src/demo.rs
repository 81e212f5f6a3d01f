use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rerope::lab::{sample, DEFAULT_SEED};
use rerope::{
    lift_projection, pairwise_logits, GridCoord, Intrinsics, LiftedProjection, OperatorFamily, Token, TokenSet,
};

use crate::output::{data, write_atomic};
use crate::traj::load_trajectory;
use crate::{CliError, Context, FamilyArg, OperatorArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    /// Source and target clips concatenated: 2T temporal slots
    V2v,
    /// Frame 0 is the conditioning anchor: T temporal slots
    I2v,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Task as ValueEnum>::from_str(s, false)
    }
}

impl std::fmt::Display for FamilyArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

impl std::str::FromStr for FamilyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <FamilyArg as ValueEnum>::from_str(s, false)
    }
}

impl From<FamilyArg> for OperatorFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Rope3d => OperatorFamily::Rope3d,
            FamilyArg::Rerope => OperatorFamily::ReRope,
            FamilyArg::FullTemporal => OperatorFamily::FullTemporal,
            FamilyArg::DoubleRope => OperatorFamily::DoubleRope,
            FamilyArg::MaskedRope => OperatorFamily::MaskedRope,
        }
    }
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, value_enum)]
    pub task: Option<Task>,
    /// Frames per clip [default: 3]
    #[arg(long, short = 'T')]
    pub positions: Option<usize>,
    /// Trajectory file with one pose per temporal slot (v2v: source then
    /// target) [default: identity cameras]
    #[arg(long)]
    pub cameras: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Seed for the token features [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub operator: OperatorArgs,
    /// [default: $REROPE_OUTPUT_DIR/demo-<task>.csv]
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub(crate) fn demo(ctx: &mut Context, a: DemoArgs) -> Result<(), CliError> {
    let s = &mut *ctx.settings;
    let task = s.required("task", a.task)?;
    let positions = s.value("positions", a.positions, 3usize)?;
    let cameras_path = s.optional("cameras", a.cameras.map(|p| p.to_string_lossy().into_owned()))?;
    let family: OperatorFamily = s.value("family", a.family, FamilyArg::Rerope)?.into();
    let seed = s.value("seed", a.seed, DEFAULT_SEED)?;
    let cfg = a.operator.resolve(s)?;
    let path = s.output("output", a.output, ctx.dir, &format!("demo-{task}.csv"))?;
    s.finish()?;
    if positions == 0 {
        return Err(CliError::Usage("positions must be at least 1".into()));
    }

    let slots = match task {
        Task::V2v => 2 * positions,
        Task::I2v => positions,
    };
    let cameras = match &cameras_path {
        None => vec![LiftedProjection::identity(); slots],
        Some(p) => {
            let p = PathBuf::from(p);
            let traj = load_trajectory(&p)?;
            if traj.len() != slots {
                return Err(CliError::Data(format!(
                    "{}: {} poses for {slots} temporal slots",
                    p.display(),
                    traj.len()
                )));
            }
            traj.poses()
                .map(|pose| lift_projection(&Intrinsics::identity(), pose))
                .collect::<rerope::Result<Vec<_>>>()?
        }
    };

    let mut rng = sample::rng(seed);
    let dim = cfg.head_dim();
    let tokens = (0..slots)
        .map(|i| Token {
            coord: GridCoord::new(i, 0, 0),
            camera_index: i,
            q: sample::vector(&mut rng, dim),
            k: sample::vector(&mut rng, dim),
        })
        .collect();
    let logits = pairwise_logits(&TokenSet::new(tokens, dim, cameras)?, family, &cfg)?;

    let mut csv = ctx.settings.header("demo");
    csv.push_str("# cell (i, j) = logit of query token i against key token j; token i sits at temporal slot i\n");
    match task {
        Task::V2v => csv.push_str(&format!(
            "# slots 0..{} are source frames, slots {}..{} are target frames\n",
            positions - 1,
            positions,
            slots - 1
        )),
        Task::I2v => csv.push_str("# slot 0 is the anchor frame\n"),
    }
    let header: Vec<String> = (0..slots).map(|j| j.to_string()).collect();
    csv.push_str(&header.join(","));
    csv.push('\n');
    for row in logits.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| data(*v)).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    write_atomic(&path, csv.as_bytes())
}
