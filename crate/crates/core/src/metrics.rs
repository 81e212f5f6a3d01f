//! Camera-accuracy metrics between an estimated and a reference trajectory.
//!
//! * ATE: root-mean-square distance between camera centres after a
//!   least-squares rigid (optionally similarity) alignment.
//! * RRE: mean geodesic angle, in degrees, between estimated and reference
//!   relative rotations of frame pairs `(i, i + stride)`.
//! * RTE: mean norm of the difference between the relative translations of the
//!   same pairs.
//!
//! The relative motion of a pair is `T_i T_j⁻¹` for world-to-camera poses, so
//! RRE and RTE do not depend on the world frame.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::camera::{Pose, Trajectory, TrajectoryEntry};
use crate::error::{config, Error, Result};

/// Timestamps of paired entries must agree within this many seconds.
pub const TIMESTAMP_TOL: f64 = 1e-6;

/// Similarity `x ↦ s R x + t` mapping estimate world coordinates to reference ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Alignment {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros(), scale: 1.0 }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    /// Moves a world-to-camera pose into the reference frame. Camera-frame
    /// distances are scaled along with the world.
    pub fn apply_pose(&self, pose: &Pose) -> Pose {
        let r = pose.quaternion() * UnitQuaternion::from_matrix(&self.rotation).inverse();
        let t = self.scale * pose.translation() - r * self.translation;
        Pose::from_quaternion(&r, t)
    }

    pub fn apply(&self, traj: &Trajectory) -> Result<Trajectory> {
        let entries = traj
            .entries()
            .iter()
            .map(|e| TrajectoryEntry { timestamp: e.timestamp, pose: self.apply_pose(&e.pose) })
            .collect();
        Trajectory::new(entries, *traj.intrinsics())
    }
}

/// An estimate already mapped into the reference frame, with the alignment used.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub estimate: Trajectory,
    pub reference: Trajectory,
    pub alignment: Alignment,
}

impl AlignedPair {
    /// Applies `alignment` to `estimate` and pairs the result with `reference`.
    pub fn with_alignment(estimate: &Trajectory, reference: &Trajectory, alignment: Alignment) -> Result<Self> {
        check_paired(estimate, reference)?;
        Ok(Self { estimate: alignment.apply(estimate)?, reference: reference.clone(), alignment })
    }

    /// Largest camera-centre distance after alignment.
    pub fn max_residual(&self) -> f64 {
        residuals(&self.estimate, &self.reference).into_iter().fold(0.0, f64::max)
    }
}

fn check_paired(estimate: &Trajectory, reference: &Trajectory) -> Result<()> {
    if estimate.len() != reference.len() {
        return Err(Error::Validation(format!(
            "trajectory lengths differ: estimate {} vs reference {}",
            estimate.len(),
            reference.len()
        )));
    }
    for (i, (a, b)) in estimate.entries().iter().zip(reference.entries()).enumerate() {
        if (a.timestamp - b.timestamp).abs() > TIMESTAMP_TOL {
            return Err(Error::Validation(format!(
                "timestamps differ at entry {i}: {} vs {}",
                a.timestamp, b.timestamp
            )));
        }
    }
    Ok(())
}

fn centers(t: &Trajectory) -> Vec<Vector3<f64>> {
    t.poses().map(Pose::center).collect()
}

fn residuals(estimate: &Trajectory, reference: &Trajectory) -> Vec<f64> {
    centers(estimate).iter().zip(centers(reference)).map(|(a, b)| (a - b).norm()).collect()
}

/// Closed-form least-squares alignment of camera centres (Umeyama).
///
/// Scale estimation needs at least three non-collinear centres.
pub fn align(estimate: &Trajectory, reference: &Trajectory, with_scale: bool) -> Result<AlignedPair> {
    check_paired(estimate, reference)?;
    let src = centers(estimate);
    let dst = centers(reference);
    let n = src.len() as f64;
    if with_scale && src.len() < 3 {
        return Err(Error::Degenerate(format!("scale alignment needs 3 poses, got {}", src.len())));
    }

    let mu_src = src.iter().sum::<Vector3<f64>>() / n;
    let mu_dst = dst.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    let mut src_cov = Matrix3::zeros();
    let mut src_var = 0.0;
    for (p, r) in src.iter().zip(&dst) {
        let (dp, dr) = (p - mu_src, r - mu_dst);
        cov += dr * dp.transpose();
        src_cov += dp * dp.transpose();
        src_var += dp.norm_squared();
    }
    cov /= n;
    src_var /= n;

    if with_scale {
        let sv = (src_cov / n).singular_values();
        let (largest, second) = (sv.max(), {
            let mut s = [sv[0], sv[1], sv[2]];
            s.sort_by(|a, b| b.total_cmp(a));
            s[1]
        });
        if largest <= f64::EPSILON || second <= 1e-12 * largest {
            return Err(Error::Degenerate("camera centres are coincident or collinear".into()));
        }
    }

    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut s = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let rotation = u * s * v_t;
    let scale = if with_scale { (Matrix3::from_diagonal(&svd.singular_values) * s).trace() / src_var } else { 1.0 };
    let translation = mu_dst - scale * (rotation * mu_src);
    let fitted = Alignment { rotation, translation, scale };
    // The closed form carries rounding even when no motion is needed; keep the
    // identity whenever it fits at least as well.
    let best = if cost(&fitted, &src, &dst) < cost(&Alignment::identity(), &src, &dst) {
        fitted
    } else {
        Alignment::identity()
    };
    AlignedPair::with_alignment(estimate, reference, best)
}

fn cost(a: &Alignment, src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> f64 {
    src.iter().zip(dst).map(|(p, r)| (a.apply_point(p) - r).norm_squared()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricResult {
    /// Mean relative rotation error in degrees; absent for single-pose trajectories.
    pub rre_deg: Option<f64>,
    /// Mean relative translation error; absent for single-pose trajectories.
    pub rte: Option<f64>,
    pub ate: f64,
}

/// Geodesic angle between two rotations, in radians.
pub fn geodesic_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    // Half the rotation angle is the angle between ±b and a as 4-vectors.
    let (a, b) = (a.quaternion().coords, b.quaternion().coords);
    let b = if a.dot(&b) < 0.0 { -b } else { b };
    4.0 * (a - b).norm().atan2((a + b).norm())
}

pub fn compute_metrics(pair: &AlignedPair) -> Result<MetricResult> {
    compute_metrics_with_stride(pair, 1)
}

pub fn compute_metrics_with_stride(pair: &AlignedPair, stride: usize) -> Result<MetricResult> {
    if stride == 0 {
        return config("relative-error stride must be positive");
    }
    check_paired(&pair.estimate, &pair.reference)?;
    let res = residuals(&pair.estimate, &pair.reference);
    let ate = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();

    let est: Vec<&Pose> = pair.estimate.poses().collect();
    let reference: Vec<&Pose> = pair.reference.poses().collect();
    let relative = |poses: &[&Pose], i: usize| poses[i].compose(&poses[i + stride].inverse());
    let pairs = est.len().saturating_sub(stride);
    if pairs == 0 {
        return Ok(MetricResult { rre_deg: None, rte: None, ate });
    }
    let (mut rre, mut rte) = (0.0, 0.0);
    for i in 0..pairs {
        let (a, b) = (relative(&est, i), relative(&reference, i));
        rre += geodesic_angle(a.quaternion(), b.quaternion()).to_degrees();
        rte += (a.translation() - b.translation()).norm();
    }
    Ok(MetricResult { rre_deg: Some(rre / pairs as f64), rte: Some(rte / pairs as f64), ate })
}
