mod common;

use common::*;
use nalgebra::{Matrix3, Matrix4, UnitQuaternion, Vector3};
use rand::Rng;
use rerope::lab::sample;
use rerope::{
    align, attention_logit, band_redundancy_report, compute_metrics, double_rope_operator, joint_normalize,
    lift_projection, logit_camera_sensitivity, masked_logit_deviation, pairwise_logits, parse_trajectory,
    relative_projection, rerope_operator, rope_operator, serialize_trajectory, toy_heatmap, unify_scales,
    video_rope_operator, AlignedPair, Alignment, BandLayout, BandMask, FrequencySchedule, GridCoord, Intrinsics,
    IntrinsicsUnit, LiftedProjection, MaskAxis, OperatorFamily, Pose, ReRopeConfig, ReRopeLayout, SensitivityProbe,
    Side, Token, TokenSet, Trajectory, VideoSchedules,
};

fn cfg96() -> ReRopeConfig {
    ReRopeConfig::with_theta(ReRopeLayout::default_for(96).unwrap(), 1e4).unwrap()
}

#[test]
fn rotary_logit_against_dense_matrices() {
    let mut rng = sample::rng(7);
    let s = FrequencySchedule::new(1e4, 64).unwrap();
    let q = sample::vector(&mut rng, 64);
    let k = sample::vector(&mut rng, 64);
    let lib = attention_logit(&q, &k, &rope_operator(&s, 17), &rope_operator(&s, 5)).unwrap();
    let dense = rotary(1e4, 64, 0..32, 17.0).transpose() * rotary(1e4, 64, 0..32, 5.0);
    assert!((lib - quadratic(&q, &dense, &k)).abs() < 1e-12);
    assert!((lib - quadratic(&q, &rotary(1e4, 64, 0..32, -12.0), &k)).abs() < 1e-12);
}

#[test]
fn heatmap_cells_are_two_cosines() {
    let s = FrequencySchedule::new(1e4, 32).unwrap();
    assert!((s.omega(15) - 10f64.powf(-3.75)).abs() < 1e-18);
    assert!((s.omega(15) - 1.7783e-4).abs() < 1e-8);
    let grid = toy_heatmap(50, &s);
    for delta in 0..50 {
        for f in 0..16 {
            let expected = 2.0 * (delta as f64 * omega(1e4, 32, f)).cos();
            assert!((grid[(delta, f)] - expected).abs() <= 1e-12, "cell ({delta}, {f})");
        }
        assert!(2.0 - grid[(delta, 15)] < 1e-3);
    }
    assert!(2.0 - grid[(49, 15)] < 1e-4);
    assert!((2.0 - grid[(49, 15)] - (2.0 - 2.0 * (49.0 * 10f64.powf(-3.75)).cos())).abs() < 1e-15);
}

#[test]
fn redundancy_phase_over_a_hundred_steps() {
    let rows = band_redundancy_report(101, &FrequencySchedule::new(1e4, 32).unwrap()).unwrap();
    let last = rows[15];
    assert!((last.accumulated_phase - 100.0 * 10f64.powf(-3.75)).abs() < 1e-15);
    assert!((last.accumulated_phase - 1.78e-2).abs() < 1e-4);
    let first = band_redundancy_report(2, &FrequencySchedule::new(1e4, 32).unwrap()).unwrap()[0];
    assert_eq!(first.accumulated_phase, 1.0);
}

#[test]
fn video_logits_depend_on_offsets_only() {
    let layout = BandLayout::thirds(96).unwrap();
    let schedules = VideoSchedules::uniform(1e4, &layout).unwrap();
    let mut rng = sample::rng(3);
    let q = sample::vector(&mut rng, 96);
    let k = sample::vector(&mut rng, 96);
    let dense = |c: [f64; 3]| {
        blkdiag(&[rotary(1e4, 32, 0..16, c[0]), rotary(1e4, 32, 0..16, c[1]), rotary(1e4, 32, 0..16, c[2])])
    };
    let logit = |a: [usize; 3], b: [usize; 3]| {
        let op = |c: [usize; 3]| video_rope_operator(&layout, &schedules, GridCoord::new(c[0], c[1], c[2])).unwrap();
        let lib = attention_logit(&q, &k, &op(a), &op(b)).unwrap();
        let f = |c: [usize; 3]| dense([c[0] as f64, c[1] as f64, c[2] as f64]);
        let oracle = quadratic(&q, &(f(a).transpose() * f(b)), &k);
        assert!((lib - oracle).abs() < 1e-12);
        lib
    };
    assert!((logit([2, 5, 7], [0, 5, 7]) - logit([5, 1, 1], [3, 1, 1])).abs() < 1e-12);
}

#[test]
fn masking_contrast_against_closed_form_bound() {
    let layout = BandLayout::new(32, 32, 32).unwrap();
    let schedules = VideoSchedules::uniform(1e4, &layout).unwrap();
    let ones = vec![1.0; 96];
    let low =
        masked_logit_deviation(21, &layout, &schedules, &BandMask::low_half(MaskAxis::Temporal), &ones, &ones).unwrap();
    let high = masked_logit_deviation(21, &layout, &schedules, &BandMask::high_half(MaskAxis::Temporal), &ones, &ones)
        .unwrap();
    let bound: f64 = (8..16).map(|f| 2.0 * (1.0 - (20.0 * omega(1e4, 32, f)).cos())).sum();
    assert!(low <= bound * (1.0 + 1e-12), "low {low} bound {bound}");
    assert!(high > 100.0 * low, "high {high} low {low}");
}

#[test]
fn lifted_projection_by_hand() {
    let k = Intrinsics::new(2.0, 2.0, 0.0, 0.0, 0.0, IntrinsicsUnit::Normalized).unwrap();
    let p = lift_projection(&k, &Pose::translation_only(Vector3::new(1.0, 0.0, 0.0))).unwrap();
    let expected = Matrix4::new(2.0, 0.0, 0.0, 2.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    assert_eq!(*p.matrix(), expected);
    assert_eq!(*p.matrix(), lifted(&k.matrix(), &Matrix3::identity(), &Vector3::new(1.0, 0.0, 0.0)));
}

fn random_camera(rng: &mut impl Rng) -> (Matrix4<f64>, LiftedProjection) {
    let q = sample::rotation(rng);
    let t = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let k = Intrinsics::new(
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
        rng.random_range(-0.2..0.2),
        rng.random_range(-0.2..0.2),
        0.0,
        IntrinsicsUnit::Normalized,
    )
    .unwrap();
    let dense = lifted(&k.matrix(), q.to_rotation_matrix().matrix(), &t);
    (dense, lift_projection(&k, &Pose::from_quaternion(&q, t)).unwrap())
}

#[test]
fn camera_band_logit_is_relative_projection() {
    let cfg = cfg96();
    let band = cfg.layout().camera_range();
    let mut rng = sample::rng(11);
    let oracle = DenseReRope { theta: 1e4, d: 96 };
    for _ in 0..100 {
        let (dc, pc) = random_camera(&mut rng);
        let (dt, pt) = random_camera(&mut rng);
        let mut q = vec![0.0; 96];
        let mut k = vec![0.0; 96];
        for i in band.clone() {
            q[i] = rng.random_range(-1.0..1.0);
            k[i] = rng.random_range(-1.0..1.0);
        }
        let a = GridCoord::new(rng.random_range(0..20), rng.random_range(0..20), rng.random_range(0..20));
        let b = GridCoord::new(rng.random_range(0..20), rng.random_range(0..20), rng.random_range(0..20));
        let lib = attention_logit(
            &q,
            &k,
            &rerope_operator(&cfg, a, &pc, Side::Query).unwrap(),
            &rerope_operator(&cfg, b, &pt, Side::Key).unwrap(),
        )
        .unwrap();
        let rel = dc * dt.try_inverse().unwrap();
        let expected = quadratic(&q[band.clone()], &repeat4(&rel, band.len() / 4), &k[band.clone()]);
        assert!((lib - expected).abs() < 1e-10, "{lib} vs {expected}");

        // Full head dimension against the dense operator.
        let q = sample::vector(&mut rng, 96);
        let k = sample::vector(&mut rng, 96);
        let lib = attention_logit(
            &q,
            &k,
            &rerope_operator(&cfg, a, &pc, Side::Query).unwrap(),
            &rerope_operator(&cfg, b, &pt, Side::Key).unwrap(),
        )
        .unwrap();
        let f =
            |c: GridCoord, cam: &Matrix4<f64>, query| oracle.operator(c.tau as f64, c.h as f64, c.w as f64, cam, query);
        let dense = f(a, &dc, true).transpose() * f(b, &dt, false);
        assert!((lib - quadratic(&q, &dense, &k)).abs() < 1e-10);
    }
}

#[test]
fn relative_projection_ignores_world_frame() {
    let mut rng = sample::rng(5);
    for _ in 0..100 {
        let (_, pc) = random_camera(&mut rng);
        let (_, pt) = random_camera(&mut rng);
        let g = sample::rigid(&mut rng);
        let before = relative_projection(&pc, &pt).unwrap();
        let after = relative_projection(&pc.right_compose(&g), &pt.right_compose(&g)).unwrap();
        assert!((before - after).amax() <= 1e-10);
        let (d, p) = random_camera(&mut rng);
        assert!((p.matrix() * p.inverse().unwrap().matrix() - Matrix4::identity()).amax() <= 1e-10);
        assert!((d - p.matrix()).amax() <= 1e-14);
    }
}

#[test]
fn pairwise_logits_against_dense_oracle() {
    let cfg = cfg96();
    let mut rng = sample::rng(21);
    let cams: Vec<(Matrix4<f64>, LiftedProjection)> = (0..4).map(|_| random_camera(&mut rng)).collect();
    let coords = [GridCoord::new(0, 0, 0), GridCoord::new(0, 1, 0), GridCoord::new(1, 0, 1), GridCoord::new(1, 1, 1)];
    let tokens: Vec<Token> = coords
        .iter()
        .enumerate()
        .map(|(i, &coord)| Token {
            coord,
            camera_index: i,
            q: sample::vector(&mut rng, 96),
            k: sample::vector(&mut rng, 96),
        })
        .collect();
    let set = TokenSet::new(tokens.clone(), 96, cams.iter().map(|c| c.1).collect()).unwrap();
    let lib = pairwise_logits(&set, OperatorFamily::ReRope, &cfg).unwrap();
    let oracle = DenseReRope { theta: 1e4, d: 96 };
    for (i, a) in tokens.iter().enumerate() {
        for (j, b) in tokens.iter().enumerate() {
            let f = |t: &Token, query| {
                oracle.operator(t.coord.tau as f64, t.coord.h as f64, t.coord.w as f64, &cams[t.camera_index].0, query)
            };
            let expected = quadratic(&a.q, &(f(a, true).transpose() * f(b, false)), &b.k);
            assert!((lib[(i, j)] - expected).abs() < 1e-10);
        }
    }
}

#[test]
fn double_rope_band_is_dense_product() {
    let cfg = cfg96();
    let mut rng = sample::rng(9);
    for _ in 0..20 {
        let (dense_cam, cam) = random_camera(&mut rng);
        let coord = GridCoord::new(rng.random_range(0..40), 3, 4);
        for (side, query) in [(Side::Query, true), (Side::Key, false)] {
            let band = double_rope_operator(&cfg, coord, &cam, side).unwrap().slice(0..32).unwrap().to_dense();
            let factor = if query { dense_cam.transpose() } else { dense_cam.try_inverse().unwrap() };
            let expected = repeat4(&factor, 8) * rotary(1e4, 32, 0..16, coord.tau as f64);
            assert!((band - expected).amax() <= 1e-12);
        }
    }
}

#[test]
fn sensitivity_along_translation_matches_bilinear_form() {
    let cfg = cfg96();
    let band = cfg.layout().camera_range();
    let mut rng = sample::rng(13);
    let q = sample::vector(&mut rng, 96);
    let k = sample::vector(&mut rng, 96);
    let probe = SensitivityProbe {
        family: OperatorFamily::ReRope,
        q: q.clone(),
        k: k.clone(),
        query_coord: GridCoord::new(0, 0, 0),
        key_coord: GridCoord::new(0, 0, 0),
        key_camera: LiftedProjection::identity(),
    };
    let camera =
        lift_projection(&Intrinsics::identity(), &Pose::translation_only(Vector3::new(0.3, -0.2, 0.5))).unwrap();
    let mut direction = [0.0; 12];
    direction[3] = 1.0;
    direction[7] = -0.5;
    direction[11] = 0.25;
    let s = logit_camera_sensitivity(&cfg, &probe, &camera, &direction, 1e-5).unwrap();
    let mut delta = Matrix4::zeros();
    for (n, v) in direction.iter().enumerate() {
        delta[(n / 4, n % 4)] = *v;
    }
    let expected = quadratic(&q[band.clone()], &repeat4(&delta, band.len() / 4), &k[band.clone()]);
    assert!((s.analytic - expected).abs() < 1e-12);
    assert!(s.relative_error() <= 1e-6);

    let zero = logit_camera_sensitivity(&cfg, &probe, &camera, &[0.0; 12], 1e-5).unwrap();
    assert_eq!((zero.analytic, zero.finite_difference), (0.0, 0.0));

    for _ in 0..10 {
        let dir: [f64; 12] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let (_, cam) = random_camera(&mut rng);
        let s = logit_camera_sensitivity(&cfg, &probe, &cam, &dir, 1e-5).unwrap();
        assert!(s.relative_error() <= 1e-6, "{s:?}");
    }
}

#[test]
fn joint_scale_examples() {
    let line = |norms: &[f64]| {
        Trajectory::from_poses(norms.iter().map(|&n| Pose::translation_only(Vector3::new(n, 0.0, 0.0)))).unwrap()
    };
    let j = joint_normalize(&line(&[0.2, 1.0]), &line(&[0.5]), 1e-8).unwrap();
    assert_eq!(j.scale, 1.0 + 1e-8);
    let j = unify_scales(&line(&[0.3]), &line(&[0.9, 0.1]), 1e-8).unwrap();
    assert_eq!(j.scale, 0.9 + 1e-8);
    assert!(j.source.max_translation_norm() <= 0.3 / j.scale);
}

fn trajectory(poses: Vec<Pose>) -> Trajectory {
    Trajectory::from_poses(poses).unwrap()
}

/// Pose whose camera centre is `c` with rotation `r`.
fn centred(r: UnitQuaternion<f64>, c: Vector3<f64>) -> Pose {
    Pose::from_quaternion(&r, -(r * c))
}

#[test]
fn ate_of_one_perpendicular_offset() {
    let n = 6;
    let reference =
        trajectory((0..n).map(|i| centred(UnitQuaternion::identity(), Vector3::new(i as f64, 0.0, 0.0))).collect());
    let estimate = trajectory(
        (0..n)
            .map(|i| {
                let y = if i == 2 { 0.1 } else { 0.0 };
                centred(UnitQuaternion::identity(), Vector3::new(i as f64, y, 0.0))
            })
            .collect(),
    );
    let pair = AlignedPair::with_alignment(&estimate, &reference, Alignment::identity()).unwrap();
    let m = compute_metrics(&pair).unwrap();
    let oracle = (0.1f64 * 0.1 / n as f64).sqrt();
    assert!((m.ate - oracle).abs() < 1e-9);
    assert!((m.ate - 0.1 / (n as f64).sqrt()).abs() < 1e-9);
}

#[test]
fn rre_of_ten_versus_twelve_degrees() {
    let rz = |deg: f64| UnitQuaternion::from_axis_angle(&Vector3::z_axis(), deg.to_radians());
    let reference = trajectory(vec![
        Pose::from_quaternion(&rz(0.0), Vector3::zeros()),
        Pose::from_quaternion(&rz(10.0), Vector3::zeros()),
    ]);
    let estimate = trajectory(vec![
        Pose::from_quaternion(&rz(0.0), Vector3::zeros()),
        Pose::from_quaternion(&rz(12.0), Vector3::zeros()),
    ]);
    let pair = AlignedPair::with_alignment(&estimate, &reference, Alignment::identity()).unwrap();
    let m = compute_metrics(&pair).unwrap();
    assert!((m.rre_deg.unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn construct_then_recover_alignment() {
    let mut rng = sample::rng(17);
    for with_scale in [false, true] {
        for _ in 0..20 {
            let reference = trajectory((0..8).map(|_| sample::rigid(&mut rng)).collect());
            let g = sample::rigid(&mut rng);
            let s = if with_scale { rng.random_range(0.5..3.0) } else { 1.0 };
            // Estimate world x_e = s⁻¹ (R_g x_r + t_g): cameras see the same points.
            let estimate = trajectory(
                reference
                    .poses()
                    .map(|p| {
                        let c = (g.quaternion() * p.center() + g.translation()) / s;
                        let r = p.quaternion() * g.quaternion().inverse();
                        centred(r, c)
                    })
                    .collect(),
            );
            let pair = align(&estimate, &reference, with_scale).unwrap();
            assert!(pair.max_residual() <= 1e-9, "{}", pair.max_residual());
            let m = compute_metrics(&pair).unwrap();
            assert!(m.ate <= 1e-9 && m.rre_deg.unwrap() <= 1e-9);
        }
    }
}

#[test]
fn three_pose_file_round_trip() {
    let text = "0 0.1 0.2 0.3 0 0 0 1\n0.5 -1 2 3.25 0.5 0.5 0.5 0.5\n1.5 1e-3 0 7 0 0.6 0 0.8\n";
    let t = parse_trajectory(text).unwrap();
    let again = parse_trajectory(&serialize_trajectory(&t)).unwrap();
    assert_eq!(t, again);
    assert_eq!(serialize_trajectory(&t), serialize_trajectory(&again));
}
