//! Cameras, lifted projection matrices and trajectory scale normalization.
//!
//! Poses are world-to-camera extrinsics: `x_cam = R x_world + t`. A camera
//! with intrinsics `K` projects through `K [R | t]`, and its lifted form is the
//! 4×4 matrix `[[K R, K t], [0ᵀ, 1]]`.

use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};

use crate::error::{config, Error, Result};

/// Unit system of the intrinsics. Carried as metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntrinsicsUnit {
    #[default]
    Normalized,
    Pixels,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub skew: f64,
    pub unit: IntrinsicsUnit,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, skew: f64, unit: IntrinsicsUnit) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || ![fx, fy, cx, cy, skew].iter().all(|v| v.is_finite()) {
            return config(format!("focal lengths must be positive and finite (fx={fx}, fy={fy})"));
        }
        Ok(Self { fx, fy, cx, cy, skew, unit })
    }

    /// `K = I`.
    pub fn identity() -> Self {
        Self { fx: 1.0, fy: 1.0, cx: 0.0, cy: 0.0, skew: 0.0, unit: IntrinsicsUnit::Normalized }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, self.skew, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self::identity()
    }
}

/// World-to-camera rigid transform.
///
/// The rotation is stored as a unit quaternion so that poses read from text
/// serialize back to the same numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub const ORTHONORMAL_TOL: f64 = 1e-9;

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let gram_err = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if !(gram_err <= Self::ORTHONORMAL_TOL && (det - 1.0).abs() <= Self::ORTHONORMAL_TOL) {
            return Err(Error::Validation(format!(
                "rotation is not proper orthonormal (|RᵀR - I| = {gram_err:e}, det = {det})"
            )));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation("translation has non-finite entries".into()));
        }
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rotation));
        Ok(Self { rotation: q, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: UnitQuaternion::identity(), translation: Vector3::zeros() }
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation: *q, translation }
    }

    pub fn translation_only(translation: Vector3<f64>) -> Self {
        Self { rotation: UnitQuaternion::identity(), translation }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn quaternion(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Camera centre in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.inverse_transform_vector(&self.translation))
    }

    /// Same rotation, translation replaced.
    pub fn with_translation(&self, translation: Vector3<f64>) -> Self {
        Self { rotation: self.rotation, translation }
    }

    /// 4×4 homogeneous world-to-camera matrix.
    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Self { rotation: inv, translation: -(inv * self.translation) }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// The lifted 4×4 projection `[[K R, K t], [0ᵀ, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedProjection {
    m: Matrix4<f64>,
}

impl LiftedProjection {
    /// Smallest `|det|` accepted for the top-left 3×3 block.
    pub const MIN_ABS_DET: f64 = 1e-12;

    pub fn from_matrix(m: Matrix4<f64>) -> Result<Self> {
        if m[(3, 0)] != 0.0 || m[(3, 1)] != 0.0 || m[(3, 2)] != 0.0 || m[(3, 3)] != 1.0 {
            return Err(Error::Validation("bottom row of a lifted projection must be (0,0,0,1)".into()));
        }
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation("lifted projection has non-finite entries".into()));
        }
        let det = m.fixed_view::<3, 3>(0, 0).determinant();
        if det.abs() <= Self::MIN_ABS_DET {
            return Err(Error::Singular(format!("top-left block determinant {det:e}")));
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        Self { m: Matrix4::identity() }
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.m
    }

    /// Closed-form inverse `[[A⁻¹, -A⁻¹ b], [0ᵀ, 1]]`.
    pub fn inverse(&self) -> Result<Self> {
        let a = self.m.fixed_view::<3, 3>(0, 0).into_owned();
        let b = self.m.fixed_view::<3, 1>(0, 3).into_owned();
        let a_inv = a.try_inverse().ok_or_else(|| Error::Singular("top-left block is not invertible".into()))?;
        let mut inv = Matrix4::identity();
        inv.fixed_view_mut::<3, 3>(0, 0).copy_from(&a_inv);
        inv.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-(a_inv * b)));
        Ok(Self { m: inv })
    }

    /// `self · other⁻¹`.
    pub fn relative_to(&self, other: &LiftedProjection) -> Result<Matrix4<f64>> {
        Ok(self.m * other.inverse()?.m)
    }

    /// `self · g`, a change of world frame.
    pub fn right_compose(&self, g: &Pose) -> Self {
        Self { m: self.m * g.to_homogeneous() }
    }
}

/// `[[K R, K t], [0ᵀ, 1]]`.
pub fn lift_projection(k: &Intrinsics, pose: &Pose) -> Result<LiftedProjection> {
    let km = k.matrix();
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(km * pose.rotation()));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&(km * pose.translation()));
    LiftedProjection::from_matrix(m)
}

pub fn invert_lifted(p: &LiftedProjection) -> Result<LiftedProjection> {
    p.inverse()
}

/// `P̃_c · P̃_t⁻¹`.
pub fn relative_projection(p_c: &LiftedProjection, p_t: &LiftedProjection) -> Result<Matrix4<f64>> {
    p_c.relative_to(p_t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryEntry {
    pub timestamp: f64,
    pub pose: Pose,
}

/// Timestamped camera poses sharing one set of intrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    entries: Vec<TrajectoryEntry>,
    intrinsics: Intrinsics,
}

impl Trajectory {
    pub fn new(entries: Vec<TrajectoryEntry>, intrinsics: Intrinsics) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Validation("trajectory must contain at least one pose".into()));
        }
        for (i, w) in entries.windows(2).enumerate() {
            if w[1].timestamp.partial_cmp(&w[0].timestamp) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::Ordering { index: i + 1 });
            }
        }
        Ok(Self { entries, intrinsics })
    }

    /// Poses at timestamps `0, 1, 2, …` with identity intrinsics.
    pub fn from_poses(poses: impl IntoIterator<Item = Pose>) -> Result<Self> {
        let entries =
            poses.into_iter().enumerate().map(|(i, pose)| TrajectoryEntry { timestamp: i as f64, pose }).collect();
        Self::new(entries, Intrinsics::identity())
    }

    pub fn entries(&self) -> &[TrajectoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn poses(&self) -> impl Iterator<Item = &Pose> {
        self.entries.iter().map(|e| &e.pose)
    }

    pub fn max_translation_norm(&self) -> f64 {
        self.poses().map(|p| p.translation().norm()).fold(0.0, f64::max)
    }

    /// Lifted projections of every pose with the shared intrinsics.
    pub fn lifted(&self) -> Result<Vec<LiftedProjection>> {
        self.poses().map(|p| lift_projection(&self.intrinsics, p)).collect()
    }

    /// Divides every translation by `divisor`; rotations are copied untouched.
    pub fn with_translations_divided(&self, divisor: f64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|e| TrajectoryEntry {
                timestamp: e.timestamp,
                pose: e.pose.with_translation(e.pose.translation() / divisor),
            })
            .collect();
        Self { entries, intrinsics: self.intrinsics }
    }

    /// Re-expresses every pose in the frame of `origin` (world-to-camera),
    /// so that a camera equal to `origin` becomes the identity.
    pub fn rebased(&self, origin: &Pose) -> Self {
        let to_old_world = origin.inverse();
        let entries = self
            .entries
            .iter()
            .map(|e| TrajectoryEntry { timestamp: e.timestamp, pose: e.pose.compose(&to_old_world) })
            .collect();
        Self { entries, intrinsics: self.intrinsics }
    }
}

/// Result of dividing a trajectory by its largest translation norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub trajectory: Trajectory,
    /// Largest translation norm before scaling (the divisor).
    pub scale: f64,
    /// Set when every translation was zero and nothing was scaled.
    pub degenerate: bool,
}

/// Divides all translations by the largest translation norm.
///
/// A trajectory with only zero translations is returned unchanged with
/// `degenerate` set.
pub fn normalize_translations(traj: &Trajectory) -> Normalized {
    let scale = traj.max_translation_norm();
    if scale == 0.0 {
        return Normalized { trajectory: traj.clone(), scale, degenerate: true };
    }
    Normalized { trajectory: traj.with_translations_divided(scale), scale, degenerate: false }
}

/// Divides by the largest translation norm only when it exceeds 1.
pub fn pre_normalize(traj: &Trajectory) -> Trajectory {
    let max = traj.max_translation_norm();
    if max > 1.0 {
        traj.with_translations_divided(max)
    } else {
        traj.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointNormalized {
    pub source: Trajectory,
    pub target: Trajectory,
    /// `max ‖t‖ over both trajectories + ε`.
    pub scale: f64,
}

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Scales both trajectories by `S = max_{t ∈ src ∪ tgt} ‖t‖ + epsilon`.
pub fn joint_normalize(src: &Trajectory, tgt: &Trajectory, epsilon: f64) -> Result<JointNormalized> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return config(format!("epsilon must be positive, got {epsilon}"));
    }
    let scale = src.max_translation_norm().max(tgt.max_translation_norm()) + epsilon;
    Ok(JointNormalized {
        source: src.with_translations_divided(scale),
        target: tgt.with_translations_divided(scale),
        scale,
    })
}

/// Both pre-normalization steps followed by the joint scaling.
pub fn unify_scales(src: &Trajectory, tgt: &Trajectory, epsilon: f64) -> Result<JointNormalized> {
    joint_normalize(&pre_normalize(src), &pre_normalize(tgt), epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn translated(t: [f64; 3]) -> Pose {
        Pose::translation_only(Vector3::from(t))
    }

    fn traj_with_norms(norms: &[f64]) -> Trajectory {
        Trajectory::from_poses(norms.iter().map(|&n| translated([0.0, n, 0.0]))).unwrap()
    }

    fn norms(t: &Trajectory) -> Vec<f64> {
        t.poses().map(|p| p.translation().norm()).collect()
    }

    #[test]
    fn lift_examples() {
        let p = lift_projection(&Intrinsics::identity(), &translated([1.0, 2.0, 3.0])).unwrap();
        #[rustfmt::skip]
        let want = Matrix4::new(
            1.0, 0.0, 0.0, 1.0,
            0.0, 1.0, 0.0, 2.0,
            0.0, 0.0, 1.0, 3.0,
            0.0, 0.0, 0.0, 1.0,
        );
        assert_eq!(*p.matrix(), want);

        let id = lift_projection(&Intrinsics::identity(), &Pose::identity()).unwrap();
        assert_eq!(*id.matrix(), Matrix4::identity());

        let k = Intrinsics::new(2.0, 2.0, 0.0, 0.0, 0.0, IntrinsicsUnit::Pixels).unwrap();
        let p = lift_projection(&k, &translated([1.0, 0.0, 0.0])).unwrap();
        assert_eq!(
            p.matrix().fixed_view::<3, 3>(0, 0).into_owned(),
            Matrix3::from_diagonal(&Vector3::new(2.0, 2.0, 1.0))
        );
        assert_eq!(p.matrix().column(3).into_owned(), nalgebra::Vector4::new(2.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn invalid_inputs() {
        assert!(Intrinsics::new(0.0, 1.0, 0.0, 0.0, 0.0, IntrinsicsUnit::Pixels).is_err());
        assert!(Pose::new(Matrix3::identity() * 2.0, Vector3::zeros()).is_err());
        let reflection = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Pose::new(reflection, Vector3::zeros()).is_err());
        let mut m = Matrix4::identity();
        m[(3, 0)] = 0.1;
        assert!(LiftedProjection::from_matrix(m).is_err());
        let mut m = Matrix4::identity();
        m[(2, 2)] = 0.0;
        assert!(matches!(LiftedProjection::from_matrix(m), Err(Error::Singular(_))));
    }

    #[test]
    fn invert_examples() {
        let id = LiftedProjection::identity();
        assert_eq!(*invert_lifted(&id).unwrap().matrix(), Matrix4::identity());
        let p = lift_projection(&Intrinsics::identity(), &translated([1.0, 2.0, 3.0])).unwrap();
        let inv = invert_lifted(&p).unwrap();
        let want = lift_projection(&Intrinsics::identity(), &translated([-1.0, -2.0, -3.0])).unwrap();
        assert_eq!(inv, want);
    }

    #[test]
    fn relative_examples() {
        let p = lift_projection(&Intrinsics::identity(), &translated([1.0, 0.0, 0.0])).unwrap();
        assert!((relative_projection(&p, &p).unwrap() - Matrix4::identity()).amax() <= 1e-15);
        let r = relative_projection(&p, &LiftedProjection::identity()).unwrap();
        assert_eq!(r, *p.matrix());
    }

    #[test]
    fn normalize_examples() {
        let out = normalize_translations(&traj_with_norms(&[0.5, 2.0, 1.0]));
        assert!(!out.degenerate);
        assert_eq!(norms(&out.trajectory), vec![0.25, 1.0, 0.5]);

        let zero = traj_with_norms(&[0.0, 0.0]);
        let out = normalize_translations(&zero);
        assert!(out.degenerate);
        assert_eq!(out.trajectory, zero);

        let single = Trajectory::from_poses([translated([0.0, 3.0, 0.0])]).unwrap();
        assert_abs_diff_eq!(normalize_translations(&single).trajectory.max_translation_norm(), 1.0);
    }

    #[test]
    fn pre_normalize_threshold_is_strict() {
        let t = traj_with_norms(&[0.8, 0.1]);
        assert_eq!(pre_normalize(&t), t);
        let t = traj_with_norms(&[1.0, 0.5]);
        assert_eq!(pre_normalize(&t), t);
        let t = traj_with_norms(&[5.0, 2.5]);
        assert_eq!(norms(&pre_normalize(&t)), vec![1.0, 0.5]);
    }

    #[test]
    fn joint_normalize_examples() {
        let src = traj_with_norms(&[1.0, 0.2]);
        let tgt = traj_with_norms(&[0.5]);
        let out = joint_normalize(&src, &tgt, 1e-8).unwrap();
        assert_eq!(out.scale, 1.0 + 1e-8);

        let z = traj_with_norms(&[0.0]);
        let out = joint_normalize(&z, &z, 1e-8).unwrap();
        assert_eq!(out.scale, 1e-8);
        assert_eq!(out.source.max_translation_norm(), 0.0);

        let src = traj_with_norms(&[0.3]);
        let tgt = traj_with_norms(&[0.9]);
        let out = joint_normalize(&src, &tgt, 1e-8).unwrap();
        assert_eq!(out.scale, 0.9 + 1e-8);
        assert!(out.source.max_translation_norm() <= 0.3 / out.scale);
        assert!(out.target.max_translation_norm() < 1.0);

        assert!(joint_normalize(&src, &tgt, 0.0).is_err());
    }

    #[test]
    fn ordering_enforced() {
        let e = |t: f64| TrajectoryEntry { timestamp: t, pose: Pose::identity() };
        assert_eq!(
            Trajectory::new(vec![e(0.0), e(1.0), e(1.0)], Intrinsics::identity()),
            Err(Error::Ordering { index: 2 })
        );
        assert!(Trajectory::new(vec![], Intrinsics::identity()).is_err());
    }

    #[test]
    fn rebased_first_pose_is_identity() {
        let q = UnitQuaternion::from_euler_angles(0.1, -0.4, 0.7);
        let t = Trajectory::from_poses([
            Pose::from_quaternion(&q, Vector3::new(1.0, 2.0, -1.0)),
            translated([0.5, 0.0, 0.0]),
        ])
        .unwrap();
        let first = t.entries()[0].pose;
        let r = t.rebased(&first);
        let p0 = r.entries()[0].pose;
        assert!((p0.rotation() - Matrix3::identity()).amax() < 1e-15);
        assert!(p0.translation().norm() < 1e-15);
    }
}
