//! Attention logits over synthetic token sets and the invariance verifiers.
//!
//! Every verifier returns an [`InvarianceReport`] whose `passed` flag is
//! `max_abs_deviation <= tolerance`. Sampling is driven by a ChaCha8 stream
//! seeded from the caller's seed, so reports are reproducible bit for bit.
//!
//! Tolerances:
//! * pure rotary invariances use [`ROTARY_TOL`] (`1e-10`): rotations are
//!   orthogonal and errors stay at a few ulps of the logit magnitude;
//! * camera invariances use [`CAMERA_TOL`] (`1e-8`): the key side carries a
//!   matrix inverse, which amplifies rounding by the condition number of `P̃`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix4, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camera::{normalize_translations, LiftedProjection, Pose, Trajectory};
use crate::error::{config, Error, Result};
use crate::hybrid::{
    camera_masked_operator, double_rope_operator, full_temporal_replacement_operator, rerope_operator, rope3d_operator,
    CameraBand, CameraConvention, ReRopeConfig, Side,
};
use crate::rope::{dot, rope_operator, BlockDiagOperator, FrequencySchedule};
use crate::video::GridCoord;

pub const ROTARY_TOL: f64 = 1e-10;
pub const CAMERA_TOL: f64 = 1e-8;
pub const DEFAULT_SEED: u64 = 42;

/// Operator families that can encode a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorFamily {
    Rope3d,
    ReRope,
    FullTemporal,
    DoubleRope,
    MaskedRope,
}

impl OperatorFamily {
    pub const ALL: [OperatorFamily; 5] = [
        OperatorFamily::Rope3d,
        OperatorFamily::ReRope,
        OperatorFamily::FullTemporal,
        OperatorFamily::DoubleRope,
        OperatorFamily::MaskedRope,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            OperatorFamily::Rope3d => "rope3d",
            OperatorFamily::ReRope => "rerope",
            OperatorFamily::FullTemporal => "full_temporal",
            OperatorFamily::DoubleRope => "double_rope",
            OperatorFamily::MaskedRope => "masked_rope",
        }
    }

    pub fn uses_cameras(&self) -> bool {
        matches!(self, OperatorFamily::ReRope | OperatorFamily::FullTemporal | OperatorFamily::DoubleRope)
    }
}

impl fmt::Display for OperatorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s || f.name().replace('_', "-") == s)
            .ok_or_else(|| Error::Config(format!("unknown operator family '{s}'")))
    }
}

/// Anything that can produce the per-token query/key operator.
pub trait TokenEncoder {
    fn head_dim(&self) -> usize;

    fn operator(&self, coord: GridCoord, camera: &LiftedProjection, side: Side) -> Result<BlockDiagOperator>;
}

/// A [`TokenEncoder`] for one of the built-in families.
#[derive(Debug, Clone, Copy)]
pub struct FamilyEncoder<'a> {
    pub family: OperatorFamily,
    pub config: &'a ReRopeConfig,
}

impl<'a> FamilyEncoder<'a> {
    pub fn new(family: OperatorFamily, config: &'a ReRopeConfig) -> Self {
        Self { family, config }
    }
}

impl TokenEncoder for FamilyEncoder<'_> {
    fn head_dim(&self) -> usize {
        self.config.head_dim()
    }

    fn operator(&self, coord: GridCoord, camera: &LiftedProjection, side: Side) -> Result<BlockDiagOperator> {
        let cfg = self.config;
        match self.family {
            OperatorFamily::Rope3d => rope3d_operator(cfg, coord),
            OperatorFamily::MaskedRope => camera_masked_operator(cfg, coord),
            OperatorFamily::ReRope => rerope_operator(cfg, coord, camera, side),
            OperatorFamily::FullTemporal => full_temporal_replacement_operator(cfg, coord, camera, side),
            OperatorFamily::DoubleRope => double_rope_operator(cfg, coord, camera, side),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub coord: GridCoord,
    pub camera_index: usize,
    pub q: Vec<f64>,
    pub k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenSet {
    tokens: Vec<Token>,
    head_dim: usize,
    cameras: Vec<LiftedProjection>,
}

impl TokenSet {
    pub fn new(tokens: Vec<Token>, head_dim: usize, cameras: Vec<LiftedProjection>) -> Result<Self> {
        for (i, t) in tokens.iter().enumerate() {
            for v in [&t.q, &t.k] {
                if v.len() != head_dim {
                    return Err(Error::Dimension { expected: head_dim, actual: v.len() });
                }
            }
            if t.camera_index >= cameras.len() {
                return Err(Error::Validation(format!(
                    "token {i} refers to camera {} but only {} cameras exist",
                    t.camera_index,
                    cameras.len()
                )));
            }
        }
        Ok(Self { tokens, head_dim, cameras })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn head_dim(&self) -> usize {
        self.head_dim
    }

    pub fn cameras(&self) -> &[LiftedProjection] {
        &self.cameras
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The same tokens with every camera replaced by `f(index, camera)`.
    pub fn map_cameras(&self, f: impl Fn(usize, &LiftedProjection) -> LiftedProjection) -> Self {
        Self {
            tokens: self.tokens.clone(),
            head_dim: self.head_dim,
            cameras: self.cameras.iter().enumerate().map(|(i, c)| f(i, c)).collect(),
        }
    }
}

/// `entry[i][j] = ⟨op_q(token_i) q_i, op_k(token_j) k_j⟩` for a built-in family.
pub fn pairwise_logits(tokens: &TokenSet, family: OperatorFamily, cfg: &ReRopeConfig) -> Result<DMatrix<f64>> {
    pairwise_logits_with(tokens, &FamilyEncoder::new(family, cfg))
}

pub fn pairwise_logits_with(tokens: &TokenSet, encoder: &dyn TokenEncoder) -> Result<DMatrix<f64>> {
    if encoder.head_dim() != tokens.head_dim() {
        return config(format!(
            "encoder head dimension {} does not match token dimension {}",
            encoder.head_dim(),
            tokens.head_dim()
        ));
    }
    let encode = |side: Side| -> Result<Vec<Vec<f64>>> {
        tokens
            .tokens()
            .iter()
            .map(|t| {
                let v = if side == Side::Query { &t.q } else { &t.k };
                encoder.operator(t.coord, &tokens.cameras()[t.camera_index], side)?.apply(v)
            })
            .collect()
    };
    let queries = encode(Side::Query)?;
    let keys = encode(Side::Key)?;
    let n = tokens.len();
    Ok(DMatrix::from_fn(n, n, |i, j| dot(&queries[i], &keys[j])))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub name: String,
    pub trials: usize,
    pub max_abs_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl InvarianceReport {
    pub fn new(name: impl Into<String>, trials: usize, max_abs_deviation: f64, tolerance: f64) -> Self {
        Self { name: name.into(), trials, max_abs_deviation, tolerance, passed: max_abs_deviation <= tolerance }
    }
}

/// Random draws shared by the verifiers.
pub mod sample {
    use super::*;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Entries uniform in `[-1, 1]`.
    pub fn vector(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
    }

    /// Uniform rotation from a uniform unit quaternion.
    pub fn rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
        let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let tau = std::f64::consts::TAU;
        let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
        let q = nalgebra::Quaternion::new(
            b * (tau * u3).cos(),
            a * (tau * u2).sin(),
            a * (tau * u2).cos(),
            b * (tau * u3).sin(),
        );
        UnitQuaternion::from_quaternion(q)
    }

    /// Random rotation with translation uniform in `[-1, 1]³`.
    pub fn rigid(rng: &mut impl Rng) -> Pose {
        let r = rotation(rng);
        let t = Vector3::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        Pose::from_quaternion(&r, t)
    }

    /// `n` random cameras (`K = I`) whose translations are jointly normalized.
    pub fn cameras(rng: &mut impl Rng, n: usize) -> Result<Vec<LiftedProjection>> {
        let traj = Trajectory::from_poses((0..n).map(|_| rigid(rng)))?;
        normalize_translations(&traj).trajectory.lifted()
    }

    pub fn coord(rng: &mut impl Rng, extent: usize) -> GridCoord {
        GridCoord::new(rng.random_range(0..extent), rng.random_range(0..extent), rng.random_range(0..extent))
    }
}

const SHIFT_COORD_EXTENT: usize = 32;
const SHIFT_MAX: usize = 64;

/// Shift invariance of the 3-D rotary families (`rope3d`, `masked_rope`).
pub fn verify_shift_invariance(
    family: OperatorFamily,
    cfg: &ReRopeConfig,
    trials: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    if family.uses_cameras() {
        return config(format!("shift invariance applies to rotary families, not {family}"));
    }
    verify_shift_invariance_with(&FamilyEncoder::new(family, cfg), family.name(), trials, seed, SHIFT_MAX)
}

/// Compares `logit(a, b)` with `logit(a + δ, b + δ)` for random tokens and
/// shifts `δ ∈ [0, max_shift]³`.
pub fn verify_shift_invariance_with(
    encoder: &dyn TokenEncoder,
    name: &str,
    trials: usize,
    seed: u64,
    max_shift: usize,
) -> Result<InvarianceReport> {
    let worst = shift_trials(encoder, trials, seed, max_shift, true)?;
    Ok(InvarianceReport::new(format!("shift/{name}"), trials, worst, ROTARY_TOL))
}

/// Negative control for [`verify_shift_invariance_with`]: only the query moves,
/// so the relative offset changes and the report must fail.
pub fn shift_query_only_control(
    encoder: &dyn TokenEncoder,
    name: &str,
    trials: usize,
    seed: u64,
    max_shift: usize,
) -> Result<InvarianceReport> {
    let worst = shift_trials(encoder, trials, seed, max_shift, false)?;
    Ok(InvarianceReport::new(format!("shift/{name}/query-only"), trials, worst, ROTARY_TOL))
}

fn shift_trials(encoder: &dyn TokenEncoder, trials: usize, seed: u64, max_shift: usize, move_key: bool) -> Result<f64> {
    let mut rng = sample::rng(seed);
    let dim = encoder.head_dim();
    let camera = LiftedProjection::identity();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let q = sample::vector(&mut rng, dim);
        let k = sample::vector(&mut rng, dim);
        let a = sample::coord(&mut rng, SHIFT_COORD_EXTENT);
        let b = sample::coord(&mut rng, SHIFT_COORD_EXTENT);
        let shift = sample::coord(&mut rng, max_shift + 1);
        let logit = |a: GridCoord, b: GridCoord| -> Result<f64> {
            let qa = encoder.operator(a, &camera, Side::Query)?.apply(&q)?;
            let kb = encoder.operator(b, &camera, Side::Key)?.apply(&k)?;
            Ok(dot(&qa, &kb))
        };
        let before = logit(a, b)?;
        let moved_b = if move_key { b.shifted(shift) } else { b };
        let after = logit(a.shifted(shift), moved_b)?;
        worst = worst.max((before - after).abs());
    }
    Ok(worst)
}

/// Shift invariance of the 1-D rotary operator at integer positions.
pub fn verify_rope1d_shift_invariance(
    schedule: &FrequencySchedule,
    trials: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    let mut rng = sample::rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let q = sample::vector(&mut rng, schedule.dim());
        let k = sample::vector(&mut rng, schedule.dim());
        let i: i64 = rng.random_range(-512..=512);
        let j: i64 = rng.random_range(-512..=512);
        let s: i64 = rng.random_range(-512..=512);
        let logit = |i: i64, j: i64| -> Result<f64> {
            Ok(dot(&rope_operator(schedule, i).apply(&q)?, &rope_operator(schedule, j).apply(&k)?))
        };
        worst = worst.max((logit(i, j)? - logit(i + s, j + s)?).abs());
    }
    Ok(InvarianceReport::new("shift/rope1d", trials, worst, ROTARY_TOL))
}

/// Which cameras receive the common world transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformScope {
    AllCameras,
    /// Only even-indexed cameras: breaks the pairing and must fail.
    HalfCameras,
}

const WORLD_CAMERAS: usize = 4;

/// Right-composes cameras with a random rigid `G` per trial and compares all
/// pairwise logits.
pub fn verify_world_transform_invariance(
    family: OperatorFamily,
    cfg: &ReRopeConfig,
    trials: usize,
    seed: u64,
    scope: TransformScope,
) -> Result<InvarianceReport> {
    if !family.uses_cameras() {
        return config(format!("world-transform invariance needs a camera family, not {family}"));
    }
    let mut rng = sample::rng(seed);
    let dim = cfg.head_dim();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let tokens = random_camera_tokens(&mut rng, dim, WORLD_CAMERAS)?;
        let g = sample::rigid(&mut rng);
        let moved = tokens.map_cameras(|i, c| match scope {
            TransformScope::AllCameras => c.right_compose(&g),
            TransformScope::HalfCameras if i % 2 == 0 => c.right_compose(&g),
            TransformScope::HalfCameras => *c,
        });
        let before = pairwise_logits(&tokens, family, cfg)?;
        let after = pairwise_logits(&moved, family, cfg)?;
        worst = worst.max((before - after).amax());
    }
    let suffix = match scope {
        TransformScope::AllCameras => "",
        TransformScope::HalfCameras => "/half",
    };
    Ok(InvarianceReport::new(format!("world/{family}{suffix}"), trials, worst, CAMERA_TOL))
}

/// Element-wise tolerance of the identity-camera reduction.
pub const REDUCTION_TOL: f64 = 1e-15;
/// Tolerance of the ablation structure checks.
pub const ABLATION_TOL: f64 = 1e-12;

/// ReRoPE with identity cameras against the camera-masked operator, compared
/// element-wise on both query and key sides at random coordinates.
pub fn verify_reduction_identity(cfg: &ReRopeConfig, trials: usize, seed: u64) -> Result<InvarianceReport> {
    let worst = reduction_trials(cfg, trials, seed, false)?;
    Ok(InvarianceReport::new("reduction/rerope", trials, worst, REDUCTION_TOL))
}

/// Negative control for [`verify_reduction_identity`]: random cameras.
pub fn reduction_random_camera_control(cfg: &ReRopeConfig, trials: usize, seed: u64) -> Result<InvarianceReport> {
    let worst = reduction_trials(cfg, trials, seed, true)?;
    Ok(InvarianceReport::new("reduction/rerope/random-camera", trials, worst, REDUCTION_TOL))
}

fn reduction_trials(cfg: &ReRopeConfig, trials: usize, seed: u64, random_camera: bool) -> Result<f64> {
    let mut rng = sample::rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let coord = sample::coord(&mut rng, SHIFT_COORD_EXTENT);
        let camera = if random_camera { sample::cameras(&mut rng, 1)?[0] } else { LiftedProjection::identity() };
        let masked = camera_masked_operator(cfg, coord)?;
        for side in [Side::Query, Side::Key] {
            worst = worst.max(rerope_operator(cfg, coord, &camera, side)?.max_abs_diff(&masked)?);
        }
    }
    Ok(worst)
}

/// Double RoPE's temporal band against the dense product `camera · rotary`.
pub fn verify_double_rope_structure(cfg: &ReRopeConfig, trials: usize, seed: u64) -> Result<InvarianceReport> {
    let worst = double_rope_trials(cfg, trials, seed, false)?;
    Ok(InvarianceReport::new("ablation/double_rope", trials, worst, ABLATION_TOL))
}

/// Negative control: the product taken in the wrong order, `rotary · camera`.
pub fn double_rope_reversed_control(cfg: &ReRopeConfig, trials: usize, seed: u64) -> Result<InvarianceReport> {
    let worst = double_rope_trials(cfg, trials, seed, true)?;
    Ok(InvarianceReport::new("ablation/double_rope/reversed", trials, worst, ABLATION_TOL))
}

fn double_rope_trials(cfg: &ReRopeConfig, trials: usize, seed: u64, reversed: bool) -> Result<f64> {
    let mut rng = sample::rng(seed);
    let d_tau = cfg.layout().temporal_dim();
    let schedule = &cfg.schedules().temporal;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let coord = sample::coord(&mut rng, SHIFT_COORD_EXTENT);
        let camera = sample::cameras(&mut rng, 1)?[0];
        for side in [Side::Query, Side::Key] {
            let band = double_rope_operator(cfg, coord, &camera, side)?.slice(0..d_tau)?.to_dense();
            let cam = CameraBand::new(camera, d_tau)?.side_operator(side, cfg.convention())?.to_dense();
            let rot = rope_operator(schedule, coord.tau as i64).to_dense();
            let expected = if reversed { &rot * &cam } else { &cam * &rot };
            worst = worst.max((band - expected).amax());
        }
    }
    Ok(worst)
}

/// Logits of token pairs that share spatial positions but differ in `τ`,
/// with identity cameras. Passes when no temporal position information remains.
pub fn verify_temporal_independence(
    family: OperatorFamily,
    cfg: &ReRopeConfig,
    trials: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    let encoder = FamilyEncoder::new(family, cfg);
    let mut rng = sample::rng(seed);
    let camera = LiftedProjection::identity();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let q = sample::vector(&mut rng, cfg.head_dim());
        let k = sample::vector(&mut rng, cfg.head_dim());
        let a = sample::coord(&mut rng, SHIFT_COORD_EXTENT);
        let b = sample::coord(&mut rng, SHIFT_COORD_EXTENT);
        let (ta, tb) = (rng.random_range(0..SHIFT_MAX), rng.random_range(0..SHIFT_MAX));
        let logit = |a: GridCoord, b: GridCoord| -> Result<f64> {
            let qa = encoder.operator(a, &camera, Side::Query)?.apply(&q)?;
            let kb = encoder.operator(b, &camera, Side::Key)?.apply(&k)?;
            Ok(dot(&qa, &kb))
        };
        let before = logit(a, b)?;
        let after = logit(GridCoord { tau: ta, ..a }, GridCoord { tau: tb, ..b })?;
        worst = worst.max((before - after).abs());
    }
    Ok(InvarianceReport::new(format!("temporal-independence/{family}"), trials, worst, ABLATION_TOL))
}

fn random_camera_tokens(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> Result<TokenSet> {
    let cameras = sample::cameras(rng, n)?;
    let tokens = (0..n)
        .map(|i| Token {
            coord: GridCoord::new(i, rng.random_range(0..8), rng.random_range(0..8)),
            camera_index: i,
            q: sample::vector(rng, dim),
            k: sample::vector(rng, dim),
        })
        .collect();
    TokenSet::new(tokens, dim, cameras)
}

/// Phase accumulated by one rotary plane over a window of `T` positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandRedundancy {
    pub plane: usize,
    /// Per-step phase `ω_f`.
    pub omega: f64,
    /// `(T - 1) ω_f`.
    pub accumulated_phase: f64,
    /// Drop of the unit-feature logit at the largest offset, `2 - 2cos((T-1) ω_f)`.
    pub logit_deviation: f64,
}

pub fn band_redundancy_report(num_positions: usize, schedule: &FrequencySchedule) -> Result<Vec<BandRedundancy>> {
    if num_positions < 2 {
        return config(format!("redundancy needs at least 2 positions, got {num_positions}"));
    }
    let span = (num_positions - 1) as i64;
    let ones = vec![1.0; schedule.dim()];
    let far = rope_operator(schedule, span).apply(&ones)?;
    Ok(schedule
        .omegas()
        .iter()
        .enumerate()
        .map(|(f, &omega)| BandRedundancy {
            plane: f,
            omega,
            accumulated_phase: span as f64 * omega,
            logit_deviation: 2.0 - (far[2 * f] + far[2 * f + 1]),
        })
        .collect())
}

/// Fixed token pair whose logit is differentiated with respect to the query camera.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityProbe {
    pub family: OperatorFamily,
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub query_coord: GridCoord,
    pub key_coord: GridCoord,
    pub key_camera: LiftedProjection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    pub analytic: f64,
    pub finite_difference: f64,
}

impl Sensitivity {
    pub fn relative_error(&self) -> f64 {
        let scale = self.analytic.abs().max(self.finite_difference.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.analytic - self.finite_difference).abs() / scale
        }
    }
}

/// Smallest finite-difference step accepted.
pub const MIN_STEP: f64 = 1e-12;

/// Directional derivative of the probe logit as the query camera moves along
/// `direction` (the 12 entries of the top three rows of `P̃`, row-major).
///
/// The analytic value comes from the bilinear form of the camera band; the
/// finite difference is a central difference with step `h`.
pub fn logit_camera_sensitivity(
    cfg: &ReRopeConfig,
    probe: &SensitivityProbe,
    camera: &LiftedProjection,
    direction: &[f64; 12],
    h: f64,
) -> Result<Sensitivity> {
    if h.partial_cmp(&MIN_STEP).is_none_or(|o| o.is_lt()) {
        return Err(Error::Precision(format!("finite-difference step {h:e} is below {MIN_STEP:e}")));
    }
    if !probe.family.uses_cameras() {
        return config(format!("{} carries no camera band", probe.family));
    }
    let encoder = FamilyEncoder::new(probe.family, cfg);
    let mut delta = Matrix4::zeros();
    for (n, v) in direction.iter().enumerate() {
        delta[(n / 4, n % 4)] = *v;
    }

    let key = encoder.operator(probe.key_coord, &probe.key_camera, Side::Key)?.apply(&probe.k)?;
    let logit = |p: &LiftedProjection| -> Result<f64> {
        Ok(dot(&encoder.operator(probe.query_coord, p, Side::Query)?.apply(&probe.q)?, &key))
    };

    // Query vector before its camera factor: the identity camera leaves only the rotary part.
    let pre = encoder.operator(probe.query_coord, &LiftedProjection::identity(), Side::Query)?.apply(&probe.q)?;
    let band = match probe.family {
        OperatorFamily::ReRope => cfg.layout().camera_range(),
        _ => 0..cfg.layout().temporal_dim(),
    };
    // d(query factor)ᵀ per copy: Δ for P̃ᵀ, -P̃⁻¹ Δ P̃⁻¹ for P̃⁻ᵀ.
    let d_factor_t = match cfg.convention() {
        CameraConvention::Forward => delta,
        CameraConvention::Mirrored => {
            let inv = *camera.inverse()?.matrix();
            -(inv * delta * inv)
        }
    };
    let mut analytic = 0.0;
    for start in band.step_by(4) {
        for i in 0..4 {
            for j in 0..4 {
                analytic += pre[start + i] * d_factor_t[(i, j)] * key[start + j];
            }
        }
    }

    let plus = LiftedProjection::from_matrix(camera.matrix() + delta * h)?;
    let minus = LiftedProjection::from_matrix(camera.matrix() - delta * h)?;
    let finite_difference = (logit(&plus)? - logit(&minus)?) / (2.0 * h);
    Ok(Sensitivity { analytic, finite_difference })
}
