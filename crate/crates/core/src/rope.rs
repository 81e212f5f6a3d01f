//! Frequency schedules, planar rotations and block-diagonal operators.
//!
//! A head-dimension vector is treated as a sequence of channel blocks. Rotary
//! planes occupy consecutive channel pairs `(2f, 2f + 1)`; camera blocks occupy
//! four consecutive channels. Every operator in this crate is a
//! [`BlockDiagOperator`], so rotary, masked and camera-carrying encodings share
//! one representation and one application path.

use std::ops::Range;

use nalgebra::{DMatrix, Matrix2, Matrix4};

use crate::error::{config, Error, Result};

/// Angular frequencies `theta^(-2f/dim)` for the `dim / 2` planes of a rotary band.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySchedule {
    theta: f64,
    dim: usize,
    omegas: Vec<f64>,
}

impl FrequencySchedule {
    /// Builds the schedule for a band of width `dim` with base `theta`.
    ///
    /// `dim` must be even and at least 2, `theta` must exceed 1.
    pub fn new(theta: f64, dim: usize) -> Result<Self> {
        if !(theta.is_finite() && theta > 1.0) {
            return config(format!("theta must be finite and > 1, got {theta}"));
        }
        if dim < 2 || !dim.is_multiple_of(2) {
            return config(format!("band width must be even and >= 2, got {dim}"));
        }
        let omegas = (0..dim / 2).map(|f| theta.powf(-2.0 * f as f64 / dim as f64)).collect();
        Ok(Self { theta, dim, omegas })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn planes(&self) -> usize {
        self.omegas.len()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn omega(&self, plane: usize) -> f64 {
        self.omegas[plane]
    }
}

/// A planar rotation stored as its cosine and sine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation2 {
    c: f64,
    s: f64,
}

impl Rotation2 {
    pub fn from_angle(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Self { c, s }
    }

    pub fn identity() -> Self {
        Self { c: 1.0, s: 0.0 }
    }

    pub fn cos(&self) -> f64 {
        self.c
    }

    pub fn sin(&self) -> f64 {
        self.s
    }

    pub fn angle(&self) -> f64 {
        self.s.atan2(self.c)
    }

    /// `[[c, -s], [s, c]]`.
    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.c, -self.s, self.s, self.c)
    }

    pub fn transpose(&self) -> Self {
        Self { c: self.c, s: -self.s }
    }

    /// `self * inner`, i.e. rotate by `inner` first.
    pub fn then_after(&self, inner: &Rotation2) -> Self {
        Self { c: self.c * inner.c - self.s * inner.s, s: self.s * inner.c + self.c * inner.s }
    }

    fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.c * x - self.s * y, self.s * x + self.c * y)
    }
}

/// An invertible 4×4 block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4(Matrix4<f64>);

impl Mat4 {
    /// Smallest `|det|` accepted for a 4×4 block.
    pub const MIN_ABS_DET: f64 = 1e-12;

    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::Singular("4x4 block has non-finite entries".into()));
        }
        let det = m.determinant();
        if det.abs() <= Self::MIN_ABS_DET {
            return Err(Error::Singular(format!("4x4 block determinant {det:e}")));
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }
}

/// One diagonal block of a [`BlockDiagOperator`].
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Rot2(Rotation2),
    Mat4(Mat4),
    Identity(usize),
}

impl Block {
    pub fn size(&self) -> usize {
        match self {
            Block::Rot2(_) => 2,
            Block::Mat4(_) => 4,
            Block::Identity(n) => *n,
        }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        match self {
            Block::Rot2(r) => {
                let m = r.matrix();
                DMatrix::from_fn(2, 2, |i, j| m[(i, j)])
            }
            Block::Mat4(m) => DMatrix::from_fn(4, 4, |i, j| m.0[(i, j)]),
            Block::Identity(n) => DMatrix::identity(*n, *n),
        }
    }

    pub fn transpose(&self) -> Block {
        match self {
            Block::Rot2(r) => Block::Rot2(r.transpose()),
            Block::Mat4(m) => Block::Mat4(Mat4(m.0.transpose())),
            Block::Identity(n) => Block::Identity(*n),
        }
    }

    fn apply_into(&self, src: &[f64], dst: &mut [f64]) {
        match self {
            Block::Rot2(r) => {
                let (x, y) = r.apply(src[0], src[1]);
                dst[0] = x;
                dst[1] = y;
            }
            Block::Mat4(m) => {
                for (i, out) in dst.iter_mut().enumerate().take(4) {
                    *out = (0..4).map(|j| m.0[(i, j)] * src[j]).sum();
                }
            }
            Block::Identity(_) => dst.copy_from_slice(src),
        }
    }
}

/// A linear operator on `R^dim` given as an ordered sequence of diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagOperator {
    blocks: Vec<Block>,
    dim: usize,
}

impl BlockDiagOperator {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        for b in &blocks {
            match b {
                Block::Identity(0) => return config("identity block of size 0"),
                Block::Mat4(m) => {
                    Mat4::new(m.0)?;
                }
                _ => {}
            }
        }
        let dim = blocks.iter().map(Block::size).sum();
        if dim == 0 {
            return config("operator must have positive dimension");
        }
        Ok(Self { blocks, dim })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(vec![Block::Identity(dim)])
    }

    /// Block-diagonal concatenation of several operators, in order.
    pub fn blkdiag(parts: &[BlockDiagOperator]) -> Result<Self> {
        Self::new(parts.iter().flat_map(|p| p.blocks.iter().cloned()).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, actual: v.len() });
        }
        let mut out = vec![0.0; self.dim];
        let mut offset = 0;
        for b in &self.blocks {
            let n = b.size();
            b.apply_into(&v[offset..offset + n], &mut out[offset..offset + n]);
            offset += n;
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        let mut offset = 0;
        for b in &self.blocks {
            let n = b.size();
            m.view_mut((offset, offset), (n, n)).copy_from(&b.dense());
            offset += n;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        Self { blocks: self.blocks.iter().map(Block::transpose).collect(), dim: self.dim }
    }

    /// The operator restricted to channels `range`, which must fall on block boundaries.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        let mut offset = 0;
        let mut blocks = Vec::new();
        let mut aligned_start = false;
        let mut aligned_end = false;
        for b in &self.blocks {
            if offset == range.start {
                aligned_start = true;
            }
            if offset >= range.start && offset + b.size() <= range.end {
                blocks.push(b.clone());
            }
            offset += b.size();
            if offset == range.end {
                aligned_end = true;
            }
        }
        if !(aligned_start && aligned_end) || range.start >= range.end {
            return config(format!("channel range {range:?} does not align with block boundaries"));
        }
        Self::new(blocks)
    }

    /// `self ∘ inner`: applies `inner` first, then `self`.
    ///
    /// Both operators must share a common partition into segments that are
    /// either identity on one side or at most four channels wide.
    pub fn compose(&self, inner: &BlockDiagOperator) -> Result<Self> {
        if self.dim != inner.dim {
            return Err(Error::Dimension { expected: self.dim, actual: inner.dim });
        }
        let outer_cuts = self.boundaries();
        let inner_cuts = inner.boundaries();
        let cuts: Vec<usize> = outer_cuts.iter().copied().filter(|c| inner_cuts.binary_search(c).is_ok()).collect();

        let mut blocks = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let outer = self.blocks_in(a..b);
            let inner_seg = inner.blocks_in(a..b);
            let is_identity = |bs: &[Block]| bs.iter().all(|x| matches!(x, Block::Identity(_)));
            if is_identity(&outer) {
                blocks.extend(inner_seg);
            } else if is_identity(&inner_seg) {
                blocks.extend(outer);
            } else if b - a == 2 {
                match (&outer[0], &inner_seg[0]) {
                    (Block::Rot2(r1), Block::Rot2(r2)) => blocks.push(Block::Rot2(r1.then_after(r2))),
                    _ => unreachable!("two-channel segments hold rotations or identities"),
                }
            } else if b - a == 4 {
                let dense = |bs: &[Block]| {
                    let op = BlockDiagOperator { blocks: bs.to_vec(), dim: 4 };
                    Matrix4::from_iterator(op.to_dense().iter().copied())
                };
                blocks.push(Block::Mat4(Mat4::new(dense(&outer) * dense(&inner_seg))?));
            } else {
                return config(format!("cannot compose non-identity blocks spanning {} channels", b - a));
            }
        }
        Self::new(blocks)
    }

    /// Spectral norm: the largest singular value over all blocks.
    pub fn spectral_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Rot2(_) | Block::Identity(_) => 1.0,
                Block::Mat4(m) => m.0.singular_values().max(),
            })
            .fold(0.0, f64::max)
    }

    /// Largest absolute element-wise difference between the dense matrices.
    pub fn max_abs_diff(&self, other: &BlockDiagOperator) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::Dimension { expected: self.dim, actual: other.dim });
        }
        Ok((self.to_dense() - other.to_dense()).amax())
    }

    fn boundaries(&self) -> Vec<usize> {
        let mut cuts = vec![0];
        for b in &self.blocks {
            cuts.push(cuts.last().unwrap() + b.size());
        }
        cuts
    }

    fn blocks_in(&self, range: Range<usize>) -> Vec<Block> {
        let mut offset = 0;
        let mut out = Vec::new();
        for b in &self.blocks {
            if offset >= range.start && offset + b.size() <= range.end {
                out.push(b.clone());
            }
            offset += b.size();
        }
        out
    }
}

/// Rotation blocks for `planes` of `schedule` at integer position `m`.
pub fn rotary_blocks(schedule: &FrequencySchedule, m: i64, planes: Range<usize>) -> Vec<Block> {
    planes.map(|f| Block::Rot2(Rotation2::from_angle(m as f64 * schedule.omega(f)))).collect()
}

/// The 1-D rotary operator `blkdiag(Φ₂(m ω_0), …, Φ₂(m ω_{d/2-1}))`.
pub fn rope_operator(schedule: &FrequencySchedule, m: i64) -> BlockDiagOperator {
    BlockDiagOperator { blocks: rotary_blocks(schedule, m, 0..schedule.planes()), dim: schedule.dim() }
}

pub fn apply_operator(op: &BlockDiagOperator, v: &[f64]) -> Result<Vec<f64>> {
    op.apply(v)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `⟨op_q q, op_k k⟩`.
///
/// For rotary operators at positions `i` and `j` this equals
/// `⟨q, Φ(j - i) k⟩`.
pub fn attention_logit(q: &[f64], k: &[f64], op_q: &BlockDiagOperator, op_k: &BlockDiagOperator) -> Result<f64> {
    if op_q.dim() != op_k.dim() {
        return Err(Error::Dimension { expected: op_q.dim(), actual: op_k.dim() });
    }
    Ok(dot(&op_q.apply(q)?, &op_k.apply(k)?))
}

/// Per-plane logits of all-ones features: `entry[Δ][f] = 2 cos(Δ ω_f)` for `Δ < T`.
pub fn toy_heatmap(num_positions: usize, schedule: &FrequencySchedule) -> DMatrix<f64> {
    let ones = vec![1.0; schedule.dim()];
    let origin = rope_operator(schedule, 0);
    let key = origin.apply(&ones).expect("schedule dimension");
    DMatrix::from_fn(num_positions, schedule.planes(), |delta, f| {
        let query = rope_operator(schedule, delta as i64).apply(&ones).expect("schedule dimension");
        query[2 * f] * key[2 * f] + query[2 * f + 1] * key[2 * f + 1]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn schedule_values() {
        let s = FrequencySchedule::new(1e4, 4).unwrap();
        assert_eq!(s.omegas(), &[1.0, 0.01]);
        let s = FrequencySchedule::new(1e4, 2).unwrap();
        assert_eq!(s.omegas(), &[1.0]);
        let s = FrequencySchedule::new(1e4, 32).unwrap();
        assert_abs_diff_eq!(s.omega(15), 10f64.powf(-3.75), epsilon = 1e-18);
        assert!((s.omega(15) - 1.7783e-4).abs() < 1e-8);
    }

    #[test]
    fn schedule_ratio_is_constant() {
        let s = FrequencySchedule::new(1e4, 64).unwrap();
        let ratio = 1e4f64.powf(-2.0 / 64.0);
        for w in s.omegas().windows(2) {
            assert!(w[1] < w[0]);
            assert!(((w[1] / w[0]) - ratio).abs() <= 1e-12 * ratio);
        }
    }

    #[test]
    fn schedule_rejects_bad_config() {
        assert!(matches!(FrequencySchedule::new(1e4, 3), Err(Error::Config(_))));
        assert!(matches!(FrequencySchedule::new(1e4, 0), Err(Error::Config(_))));
        assert!(matches!(FrequencySchedule::new(1.0, 4), Err(Error::Config(_))));
        assert!(matches!(FrequencySchedule::new(0.5, 4), Err(Error::Config(_))));
    }

    #[test]
    fn rope_at_zero_is_identity() {
        let s = FrequencySchedule::new(1e4, 4).unwrap();
        let op = rope_operator(&s, 0);
        assert_eq!(op.max_abs_diff(&BlockDiagOperator::identity(4).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn rope_at_one_has_schedule_angles() {
        let s = FrequencySchedule::new(1e4, 4).unwrap();
        let op = rope_operator(&s, 1);
        let angles: Vec<f64> = op
            .blocks()
            .iter()
            .map(|b| match b {
                Block::Rot2(r) => r.angle(),
                _ => panic!("expected rotation"),
            })
            .collect();
        assert_abs_diff_eq!(angles[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(angles[1], 0.01, epsilon = 1e-15);
    }

    #[test]
    fn unit_vector_rotation() {
        let s = FrequencySchedule::new(1e4, 2).unwrap();
        let v = rope_operator(&s, 1).apply(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(v[0], 1f64.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 1f64.sin(), epsilon = 1e-15);
    }

    #[test]
    fn apply_examples() {
        let id = BlockDiagOperator::identity(3).unwrap();
        assert_eq!(id.apply(&[1.0, -2.0, 3.0]).unwrap(), vec![1.0, -2.0, 3.0]);

        let half_turn = BlockDiagOperator::new(vec![Block::Rot2(Rotation2::from_angle(std::f64::consts::PI))]).unwrap();
        let v = half_turn.apply(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(v[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-12);

        let mut m = Matrix4::identity();
        m[(0, 3)] = 1.0;
        m[(1, 3)] = 2.0;
        m[(2, 3)] = 3.0;
        let op = BlockDiagOperator::new(vec![Block::Mat4(Mat4::new(m).unwrap())]).unwrap();
        assert_eq!(op.apply(&[0.0, 0.0, 0.0, 1.0]).unwrap(), vec![1.0, 2.0, 3.0, 1.0]);
    }

    #[test]
    fn apply_length_mismatch() {
        let id = BlockDiagOperator::identity(4).unwrap();
        assert_eq!(id.apply(&[1.0, 2.0]), Err(Error::Dimension { expected: 4, actual: 2 }));
    }

    #[test]
    fn singular_and_empty_blocks_rejected() {
        assert!(matches!(Mat4::new(Matrix4::zeros()), Err(Error::Singular(_))));
        assert!(BlockDiagOperator::new(vec![Block::Identity(0)]).is_err());
        assert!(BlockDiagOperator::new(vec![]).is_err());
    }

    #[test]
    fn logit_of_unit_features() {
        let s = FrequencySchedule::new(1e4, 2).unwrap();
        let q = [1.0, 1.0];
        let same = attention_logit(&q, &q, &rope_operator(&s, 7), &rope_operator(&s, 7)).unwrap();
        assert_abs_diff_eq!(same, 2.0, epsilon = 1e-14);
        let l = attention_logit(&q, &q, &rope_operator(&s, 5), &rope_operator(&s, 2)).unwrap();
        assert_abs_diff_eq!(l, 2.0 * 3f64.cos(), epsilon = 1e-14);
    }

    #[test]
    fn heatmap_entries() {
        let s = FrequencySchedule::new(1e4, 32).unwrap();
        let h = toy_heatmap(50, &s);
        assert_eq!(h.shape(), (50, 16));
        for f in 0..16 {
            assert_eq!(h[(0, f)], 2.0);
        }
        for d in 0..50 {
            assert_abs_diff_eq!(h[(d, 0)], 2.0 * (d as f64).cos(), epsilon = 1e-12);
            assert!(2.0 - h[(d, 15)] < 1e-3);
        }
    }

    #[test]
    fn compose_rotations_and_camera_blocks() {
        let s = FrequencySchedule::new(1e4, 8).unwrap();
        let rot = rope_operator(&s, 3);
        let mut m = Matrix4::identity();
        m[(0, 3)] = 0.5;
        m[(2, 1)] = -0.25;
        let cam = BlockDiagOperator::new(vec![Block::Mat4(Mat4::new(m).unwrap()), Block::Mat4(Mat4::new(m).unwrap())])
            .unwrap();
        let composed = cam.compose(&rot).unwrap();
        let dense = cam.to_dense() * rot.to_dense();
        assert!((composed.to_dense() - dense).amax() <= 1e-15);

        let misaligned = BlockDiagOperator::new(vec![
            Block::Rot2(Rotation2::from_angle(0.3)),
            Block::Mat4(Mat4::new(m).unwrap()),
            Block::Rot2(Rotation2::from_angle(0.3)),
        ])
        .unwrap();
        assert!(misaligned.compose(&cam).is_err());
    }

    #[test]
    fn slice_requires_alignment() {
        let s = FrequencySchedule::new(1e4, 8).unwrap();
        let op = rope_operator(&s, 2);
        assert_eq!(op.slice(2..6).unwrap().dim(), 4);
        assert!(op.slice(1..6).is_err());
    }
}
