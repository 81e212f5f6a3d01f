//! The hybrid operator that keeps the high-frequency temporal planes and the
//! spatial bands of a factorized video RoPE and replaces the low-frequency
//! temporal planes with a repeated lifted camera matrix.
//!
//! Channel layout, in order:
//!
//! ```text
//! [ temporal high | camera block | height | width ]
//!   d_tau_high      d_tau_low      d_h      d_w
//! ```
//!
//! The temporal-high planes are planes `0..d_tau_high/2` of the schedule for
//! the *full* temporal band (`d_tau_high + d_tau_low` channels), so the
//! retained frequencies are exactly those of the original operator.
//!
//! Query and key tokens receive different camera factors. With the default
//! [`CameraConvention::Forward`], the query side carries `P̃ᵀ` and the key
//! side `P̃⁻¹`, so a query at camera `c` and a key at camera `t` see
//! `P̃_c P̃_t⁻¹` on every camera copy.

use std::ops::Range;

use nalgebra::Matrix4;

use crate::camera::LiftedProjection;
use crate::error::{config, Result};
use crate::rope::{rotary_blocks, Block, BlockDiagOperator, Mat4};
use crate::video::{
    apply_band_mask, video_rope_operator, BandLayout, BandMask, GridCoord, MaskAxis, PlaneSelection, VideoSchedules,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReRopeLayout {
    d_tau_high: usize,
    d_tau_low: usize,
    d_h: usize,
    d_w: usize,
}

impl ReRopeLayout {
    pub fn new(d_tau_high: usize, d_tau_low: usize, d_h: usize, d_w: usize) -> Result<Self> {
        if d_tau_high == 0 || !d_tau_high.is_multiple_of(2) {
            return config(format!("temporal high band must be even and positive, got {d_tau_high}"));
        }
        if d_tau_low == 0 || !d_tau_low.is_multiple_of(4) {
            return config(format!("camera band must be a positive multiple of 4, got {d_tau_low}"));
        }
        BandLayout::new(d_tau_high + d_tau_low, d_h, d_w)?;
        Ok(Self { d_tau_high, d_tau_low, d_h, d_w })
    }

    /// `d/6` temporal-high, `d/6` camera, `d/3` height, `d/3` width.
    pub fn default_for(total: usize) -> Result<Self> {
        if !total.is_multiple_of(6) {
            return config(format!("head dimension {total} is not divisible by 6"));
        }
        Self::new(total / 6, total / 6, total / 3, total / 3)
    }

    pub fn d_tau_high(&self) -> usize {
        self.d_tau_high
    }

    pub fn d_tau_low(&self) -> usize {
        self.d_tau_low
    }

    pub fn d_h(&self) -> usize {
        self.d_h
    }

    pub fn d_w(&self) -> usize {
        self.d_w
    }

    pub fn temporal_dim(&self) -> usize {
        self.d_tau_high + self.d_tau_low
    }

    pub fn total(&self) -> usize {
        self.temporal_dim() + self.d_h + self.d_w
    }

    /// The underlying three-band video layout.
    pub fn video_layout(&self) -> BandLayout {
        BandLayout::new(self.temporal_dim(), self.d_h, self.d_w).expect("validated at construction")
    }

    /// Channels carrying the camera block.
    pub fn camera_range(&self) -> Range<usize> {
        self.d_tau_high..self.temporal_dim()
    }

    /// Temporal planes that the camera block replaces.
    pub fn camera_planes(&self) -> Range<usize> {
        self.d_tau_high / 2..self.temporal_dim() / 2
    }

    /// The band mask that identifies the camera planes with the identity.
    pub fn camera_mask(&self) -> BandMask {
        BandMask::new(MaskAxis::Temporal, PlaneSelection::Range(self.camera_planes()))
    }
}

/// Which relative transform the camera bands realise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CameraConvention {
    /// Query `P̃ᵀ`, key `P̃⁻¹`: logits see `P̃_c P̃_t⁻¹`.
    #[default]
    Forward,
    /// Query `P̃⁻ᵀ`, key `P̃`: logits see `P̃_c⁻¹ P̃_t`.
    Mirrored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Query,
    Key,
}

/// Camera factor placed on one side of the attention product.
pub fn side_matrix(p: &LiftedProjection, side: Side, convention: CameraConvention) -> Result<Matrix4<f64>> {
    Ok(match (convention, side) {
        (CameraConvention::Forward, Side::Query) => p.matrix().transpose(),
        (CameraConvention::Forward, Side::Key) => *p.inverse()?.matrix(),
        (CameraConvention::Mirrored, Side::Query) => p.inverse()?.matrix().transpose(),
        (CameraConvention::Mirrored, Side::Key) => *p.matrix(),
    })
}

/// A lifted camera matrix repeated along a band of `copies * 4` channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraBand {
    pub lifted: LiftedProjection,
    pub copies: usize,
}

impl CameraBand {
    pub fn new(lifted: LiftedProjection, d_c: usize) -> Result<Self> {
        if d_c == 0 || !d_c.is_multiple_of(4) {
            return config(format!("camera band width must be a positive multiple of 4, got {d_c}"));
        }
        Ok(Self { lifted, copies: d_c / 4 })
    }

    pub fn width(&self) -> usize {
        self.copies * 4
    }

    pub fn operator(&self) -> Result<BlockDiagOperator> {
        repeat_matrix(self.lifted.matrix(), self.width())
    }

    /// Side-transformed operator used inside the attention product.
    pub fn side_operator(&self, side: Side, convention: CameraConvention) -> Result<BlockDiagOperator> {
        repeat_matrix(&side_matrix(&self.lifted, side, convention)?, self.width())
    }
}

fn repeat_matrix(m: &Matrix4<f64>, d_c: usize) -> Result<BlockDiagOperator> {
    if d_c == 0 || !d_c.is_multiple_of(4) {
        return config(format!("camera band width must be a positive multiple of 4, got {d_c}"));
    }
    let block = Mat4::new(*m)?;
    BlockDiagOperator::new(vec![Block::Mat4(block); d_c / 4])
}

/// `blkdiag(P̃, …, P̃)` over `d_c` channels.
pub fn camera_projection_block(p: &LiftedProjection, d_c: usize) -> Result<BlockDiagOperator> {
    CameraBand::new(*p, d_c)?.operator()
}

/// Layout, schedules and camera convention shared by the operator families.
#[derive(Debug, Clone, PartialEq)]
pub struct ReRopeConfig {
    layout: ReRopeLayout,
    schedules: VideoSchedules,
    convention: CameraConvention,
}

impl ReRopeConfig {
    pub fn new(layout: ReRopeLayout, schedules: VideoSchedules) -> Result<Self> {
        schedules.check(&layout.video_layout())?;
        Ok(Self { layout, schedules, convention: CameraConvention::Forward })
    }

    /// Same `theta` on every axis.
    pub fn with_theta(layout: ReRopeLayout, theta: f64) -> Result<Self> {
        let schedules = VideoSchedules::uniform(theta, &layout.video_layout())?;
        Self::new(layout, schedules)
    }

    pub fn with_convention(mut self, convention: CameraConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn layout(&self) -> &ReRopeLayout {
        &self.layout
    }

    pub fn schedules(&self) -> &VideoSchedules {
        &self.schedules
    }

    pub fn convention(&self) -> CameraConvention {
        self.convention
    }

    pub fn head_dim(&self) -> usize {
        self.layout.total()
    }

    fn spatial_blocks(&self, coord: GridCoord) -> Vec<Block> {
        let mut blocks = rotary_blocks(&self.schedules.height, coord.h as i64, 0..self.schedules.height.planes());
        blocks.extend(rotary_blocks(&self.schedules.width, coord.w as i64, 0..self.schedules.width.planes()));
        blocks
    }

    fn camera_blocks(&self, camera: &LiftedProjection, side: Side, width: usize) -> Result<Vec<Block>> {
        Ok(CameraBand::new(*camera, width)?.side_operator(side, self.convention)?.blocks().to_vec())
    }
}

/// `blkdiag(Φ_τ^H(τ), camera band, Φ_h(h), Φ_w(w))`.
pub fn rerope_operator(
    cfg: &ReRopeConfig,
    coord: GridCoord,
    camera: &LiftedProjection,
    side: Side,
) -> Result<BlockDiagOperator> {
    let layout = cfg.layout;
    let mut blocks = rotary_blocks(&cfg.schedules.temporal, coord.tau as i64, 0..layout.d_tau_high / 2);
    blocks.extend(cfg.camera_blocks(camera, side, layout.d_tau_low)?);
    blocks.extend(cfg.spatial_blocks(coord));
    BlockDiagOperator::new(blocks)
}

/// The whole temporal band replaced by camera blocks; spatial bands unchanged.
pub fn full_temporal_replacement_operator(
    cfg: &ReRopeConfig,
    coord: GridCoord,
    camera: &LiftedProjection,
    side: Side,
) -> Result<BlockDiagOperator> {
    let d_tau = cfg.layout.temporal_dim();
    if !d_tau.is_multiple_of(4) {
        return config(format!("temporal band width {d_tau} is not a multiple of 4"));
    }
    let mut blocks = cfg.camera_blocks(camera, side, d_tau)?;
    blocks.extend(cfg.spatial_blocks(coord));
    BlockDiagOperator::new(blocks)
}

/// Temporal band = camera band ∘ `Φ_τ(τ)` (rotary first, camera second).
pub fn double_rope_operator(
    cfg: &ReRopeConfig,
    coord: GridCoord,
    camera: &LiftedProjection,
    side: Side,
) -> Result<BlockDiagOperator> {
    let d_tau = cfg.layout.temporal_dim();
    if !d_tau.is_multiple_of(4) {
        return config(format!("temporal band width {d_tau} is not a multiple of 4"));
    }
    let schedule = &cfg.schedules.temporal;
    let rotary = BlockDiagOperator::new(rotary_blocks(schedule, coord.tau as i64, 0..schedule.planes()))?;
    let cam = BlockDiagOperator::new(cfg.camera_blocks(camera, side, d_tau)?)?;
    let mut blocks = cam.compose(&rotary)?.blocks().to_vec();
    blocks.extend(cfg.spatial_blocks(coord));
    BlockDiagOperator::new(blocks)
}

/// Plain factorized video RoPE on the config's layout.
pub fn rope3d_operator(cfg: &ReRopeConfig, coord: GridCoord) -> Result<BlockDiagOperator> {
    video_rope_operator(&cfg.layout.video_layout(), &cfg.schedules, coord)
}

/// Video RoPE with the camera planes set to the identity.
pub fn camera_masked_operator(cfg: &ReRopeConfig, coord: GridCoord) -> Result<BlockDiagOperator> {
    apply_band_mask(&cfg.layout.video_layout(), &cfg.schedules, &cfg.layout.camera_mask(), coord)
}
