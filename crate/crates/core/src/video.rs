//! Factorized spatio-temporal rotary encodings over a `T × H × W` token grid.
//!
//! The head dimension is split into three contiguous bands in the order
//! temporal, height, width. Each band is an independent 1-D rotary operator
//! driven by its own [`FrequencySchedule`].

use std::ops::Range;

use crate::error::{config, Error, Result};
use crate::rope::{attention_logit, rotary_blocks, Block, BlockDiagOperator, FrequencySchedule};

/// Default grid extents used by the demos.
pub const DEFAULT_GRID: (usize, usize, usize) = (21, 30, 52);

/// Widths of the temporal, height and width channel bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandLayout {
    d_tau: usize,
    d_h: usize,
    d_w: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Temporal,
    Height,
    Width,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Temporal, Axis::Height, Axis::Width];
}

impl BandLayout {
    pub fn new(d_tau: usize, d_h: usize, d_w: usize) -> Result<Self> {
        for (name, d) in [("temporal", d_tau), ("height", d_h), ("width", d_w)] {
            if d == 0 || d % 2 != 0 {
                return config(format!("{name} band width must be even and positive, got {d}"));
            }
        }
        Ok(Self { d_tau, d_h, d_w })
    }

    /// Equal thirds of `total`.
    pub fn thirds(total: usize) -> Result<Self> {
        if !total.is_multiple_of(3) {
            return config(format!("head dimension {total} is not divisible by 3"));
        }
        Self::new(total / 3, total / 3, total / 3)
    }

    pub fn d_tau(&self) -> usize {
        self.d_tau
    }

    pub fn d_h(&self) -> usize {
        self.d_h
    }

    pub fn d_w(&self) -> usize {
        self.d_w
    }

    pub fn total(&self) -> usize {
        self.d_tau + self.d_h + self.d_w
    }

    pub fn band_dim(&self, axis: Axis) -> usize {
        match axis {
            Axis::Temporal => self.d_tau,
            Axis::Height => self.d_h,
            Axis::Width => self.d_w,
        }
    }

    /// Channel range occupied by `axis`.
    pub fn band_range(&self, axis: Axis) -> Range<usize> {
        match axis {
            Axis::Temporal => 0..self.d_tau,
            Axis::Height => self.d_tau..self.d_tau + self.d_h,
            Axis::Width => self.d_tau + self.d_h..self.total(),
        }
    }
}

/// One frequency schedule per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSchedules {
    pub temporal: FrequencySchedule,
    pub height: FrequencySchedule,
    pub width: FrequencySchedule,
}

impl VideoSchedules {
    pub fn new(temporal: FrequencySchedule, height: FrequencySchedule, width: FrequencySchedule) -> Self {
        Self { temporal, height, width }
    }

    /// Same `theta` on every axis, band widths taken from `layout`.
    pub fn uniform(theta: f64, layout: &BandLayout) -> Result<Self> {
        Ok(Self {
            temporal: FrequencySchedule::new(theta, layout.d_tau())?,
            height: FrequencySchedule::new(theta, layout.d_h())?,
            width: FrequencySchedule::new(theta, layout.d_w())?,
        })
    }

    pub fn get(&self, axis: Axis) -> &FrequencySchedule {
        match axis {
            Axis::Temporal => &self.temporal,
            Axis::Height => &self.height,
            Axis::Width => &self.width,
        }
    }

    pub(crate) fn check(&self, layout: &BandLayout) -> Result<()> {
        for axis in Axis::ALL {
            let (have, want) = (self.get(axis).dim(), layout.band_dim(axis));
            if have != want {
                return config(format!("{axis:?} schedule has width {have}, layout band is {want}"));
            }
        }
        Ok(())
    }
}

/// Position of a token in the latent grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct GridCoord {
    pub tau: usize,
    pub h: usize,
    pub w: usize,
}

impl GridCoord {
    pub fn new(tau: usize, h: usize, w: usize) -> Self {
        Self { tau, h, w }
    }

    pub fn get(&self, axis: Axis) -> usize {
        match axis {
            Axis::Temporal => self.tau,
            Axis::Height => self.h,
            Axis::Width => self.w,
        }
    }

    pub fn shifted(&self, by: GridCoord) -> GridCoord {
        GridCoord::new(self.tau + by.tau, self.h + by.h, self.w + by.w)
    }
}

/// Which bands a [`BandMask`] touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskAxis {
    Temporal,
    Height,
    Width,
    All,
}

impl MaskAxis {
    fn covers(&self, axis: Axis) -> bool {
        match self {
            MaskAxis::All => true,
            MaskAxis::Temporal => axis == Axis::Temporal,
            MaskAxis::Height => axis == Axis::Height,
            MaskAxis::Width => axis == Axis::Width,
        }
    }
}

/// Planes replaced by the identity, resolved per band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlaneSelection {
    /// Explicit half-open plane interval.
    Range(Range<usize>),
    /// `f ∈ [d_b/4, d_b/2)`: the lowest-frequency half of the band.
    LowHalf,
    /// `f ∈ [0, d_b/4)`: the highest-frequency half of the band.
    HighHalf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandMask {
    pub axis: MaskAxis,
    pub planes: PlaneSelection,
}

impl BandMask {
    pub fn new(axis: MaskAxis, planes: PlaneSelection) -> Self {
        Self { axis, planes }
    }

    pub fn low_half(axis: MaskAxis) -> Self {
        Self::new(axis, PlaneSelection::LowHalf)
    }

    pub fn high_half(axis: MaskAxis) -> Self {
        Self::new(axis, PlaneSelection::HighHalf)
    }

    /// A mask that replaces nothing.
    pub fn empty() -> Self {
        Self::new(MaskAxis::All, PlaneSelection::Range(0..0))
    }

    /// Masked planes for `axis`, validated against the band size.
    pub fn planes_for(&self, layout: &BandLayout, axis: Axis) -> Result<Range<usize>> {
        if !self.axis.covers(axis) {
            return Ok(0..0);
        }
        let planes = layout.band_dim(axis) / 2;
        let range = match &self.planes {
            PlaneSelection::Range(r) => r.clone(),
            PlaneSelection::LowHalf => planes / 2..planes,
            PlaneSelection::HighHalf => 0..planes / 2,
        };
        if range.start > range.end || range.end > planes {
            return config(format!("plane range {range:?} outside [0, {planes}) for the {axis:?} band"));
        }
        Ok(range)
    }
}

/// `blkdiag(Φ_τ(τ), Φ_h(h), Φ_w(w))`.
pub fn video_rope_operator(
    layout: &BandLayout,
    schedules: &VideoSchedules,
    coord: GridCoord,
) -> Result<BlockDiagOperator> {
    schedules.check(layout)?;
    let mut blocks = Vec::with_capacity(layout.total() / 2);
    for axis in Axis::ALL {
        let schedule = schedules.get(axis);
        blocks.extend(rotary_blocks(schedule, coord.get(axis) as i64, 0..schedule.planes()));
    }
    BlockDiagOperator::new(blocks)
}

/// Replaces the planes selected by `mask` in a factorized operator with 2×2 identities.
///
/// `op` must be laid out as `layout` with one two-channel block per plane.
pub fn mask_operator(op: &BlockDiagOperator, layout: &BandLayout, mask: &BandMask) -> Result<BlockDiagOperator> {
    if op.dim() != layout.total() {
        return Err(Error::Dimension { expected: layout.total(), actual: op.dim() });
    }
    if op.blocks().iter().any(|b| b.size() != 2) {
        return config("band masks apply to operators made of two-channel planes");
    }
    let mut blocks = op.blocks().to_vec();
    for axis in Axis::ALL {
        let first_plane = layout.band_range(axis).start / 2;
        for f in mask.planes_for(layout, axis)? {
            blocks[first_plane + f] = Block::Identity(2);
        }
    }
    BlockDiagOperator::new(blocks)
}

/// Video RoPE with the planes selected by `mask` replaced by 2×2 identities.
pub fn apply_band_mask(
    layout: &BandLayout,
    schedules: &VideoSchedules,
    mask: &BandMask,
    coord: GridCoord,
) -> Result<BlockDiagOperator> {
    mask_operator(&video_rope_operator(layout, schedules, coord)?, layout, mask)
}

/// Largest `|logit_full - logit_masked|` over coordinate pairs whose per-axis
/// offsets lie in `[-(T-1), T-1]`.
///
/// Logits depend only on offsets, so each offset is realised by one
/// non-negative coordinate pair. Axes the mask does not touch contribute
/// identically to both logits and are held at offset zero.
pub fn masked_logit_deviation(
    num_frames: usize,
    layout: &BandLayout,
    schedules: &VideoSchedules,
    mask: &BandMask,
    q: &[f64],
    k: &[f64],
) -> Result<f64> {
    let total = layout.total();
    for v in [q, k] {
        if v.len() != total {
            return Err(Error::Dimension { expected: total, actual: v.len() });
        }
    }
    if num_frames == 0 {
        return config("number of frames must be positive");
    }
    let reach = num_frames as i64 - 1;
    let offsets = |axis: Axis| -> Vec<i64> {
        if mask.axis.covers(axis) {
            (-reach..=reach).collect()
        } else {
            vec![0]
        }
    };
    let split = |d: i64| -> (usize, usize) { (d.max(0) as usize, (-d).max(0) as usize) };

    let mut worst: f64 = 0.0;
    for dt in offsets(Axis::Temporal) {
        for dh in offsets(Axis::Height) {
            for dw in offsets(Axis::Width) {
                let (ta, tb) = split(dt);
                let (ha, hb) = split(dh);
                let (wa, wb) = split(dw);
                let a = GridCoord::new(ta, ha, wa);
                let b = GridCoord::new(tb, hb, wb);
                let full = attention_logit(
                    q,
                    k,
                    &video_rope_operator(layout, schedules, a)?,
                    &video_rope_operator(layout, schedules, b)?,
                )?;
                let masked = attention_logit(
                    q,
                    k,
                    &apply_band_mask(layout, schedules, mask, a)?,
                    &apply_band_mask(layout, schedules, mask, b)?,
                )?;
                worst = worst.max((full - masked).abs());
            }
        }
    }
    Ok(worst)
}
