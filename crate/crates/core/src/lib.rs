//! Rotary position encodings for video transformers, extended with relative
//! camera geometry.
//!
//! The crate builds every positional encoding as a [`BlockDiagOperator`]: a
//! head-dimension-sized linear map made of 2×2 rotations, 4×4 camera blocks
//! and identities. On top of that it provides
//!
//! * 1-D rotary encodings and their frequency schedules ([`rope`]);
//! * factorized temporal/height/width encodings and band masks ([`video`]);
//! * lifted camera projections and translation normalization ([`camera`]);
//! * the hybrid operator that carries a camera block in the low-frequency
//!   temporal planes, plus two ablation variants ([`hybrid`]);
//! * logit computation and invariance verifiers ([`lab`]);
//! * trajectory files and RRE/RTE/ATE metrics ([`trajfile`], [`metrics`]).
//!
//! ```
//! use rerope::{attention_logit, rope_operator, FrequencySchedule};
//!
//! let schedule = FrequencySchedule::new(1e4, 2).unwrap();
//! let q = [1.0, 1.0];
//! let logit = attention_logit(&q, &q, &rope_operator(&schedule, 5), &rope_operator(&schedule, 2)).unwrap();
//! assert!((logit - 2.0 * 3f64.cos()).abs() < 1e-12);
//! ```

pub mod camera;
pub mod error;
pub mod hybrid;
pub mod lab;
pub mod metrics;
pub mod numfmt;
pub mod rope;
pub mod trajfile;
pub mod video;

pub use camera::{
    invert_lifted, joint_normalize, lift_projection, normalize_translations, pre_normalize, relative_projection,
    unify_scales, Intrinsics, IntrinsicsUnit, JointNormalized, LiftedProjection, Normalized, Pose, Trajectory,
    TrajectoryEntry, DEFAULT_EPSILON,
};
pub use error::{Error, Result};
pub use hybrid::{
    camera_masked_operator, camera_projection_block, double_rope_operator, full_temporal_replacement_operator,
    rerope_operator, rope3d_operator, CameraBand, CameraConvention, ReRopeConfig, ReRopeLayout, Side,
};
pub use lab::{
    band_redundancy_report, double_rope_reversed_control, logit_camera_sensitivity, pairwise_logits,
    reduction_random_camera_control, shift_query_only_control, verify_double_rope_structure, verify_reduction_identity,
    verify_rope1d_shift_invariance, verify_shift_invariance, verify_shift_invariance_with,
    verify_temporal_independence, verify_world_transform_invariance, BandRedundancy, FamilyEncoder, InvarianceReport,
    OperatorFamily, SensitivityProbe, Token, TokenEncoder, TokenSet, TransformScope,
};
pub use metrics::{align, compute_metrics, compute_metrics_with_stride, AlignedPair, Alignment, MetricResult};
pub use rope::{
    apply_operator, attention_logit, rope_operator, toy_heatmap, Block, BlockDiagOperator, FrequencySchedule, Mat4,
    Rotation2,
};
pub use trajfile::{parse_trajectory, serialize_trajectory};
pub use video::{
    apply_band_mask, mask_operator, masked_logit_deviation, video_rope_operator, Axis, BandLayout, BandMask, GridCoord,
    MaskAxis, PlaneSelection, VideoSchedules,
};
