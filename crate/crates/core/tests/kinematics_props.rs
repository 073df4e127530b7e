use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use proptest::prelude::*;
use psg_core::geometry::{closest_points, Vec3};
use psg_core::kinematics::reference::{reference_environment, reference_model};
use psg_core::kinematics::{
    forward_kinematics, mass_matrix, point_jacobian, projected_jacobian, update_skeleton_states, JointKind, RobotModel,
};

/// Homogeneous DH chain built from 4x4 matrices, independent of the library
/// pose type.
fn oracle_frames(model: &RobotModel, q: &[f64]) -> Vec<Matrix4<f64>> {
    let mut t = Matrix4::identity();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(&model.base.rotation);
    t.fixed_view_mut::<3, 1>(0, 3).copy_from(&model.base.translation);
    let mut out = Vec::new();
    for (j, &qk) in model.joints.iter().zip(q) {
        let (theta, d) = match j.kind {
            JointKind::Revolute => (j.dh.theta + qk, j.dh.d),
            JointKind::Prismatic => (j.dh.theta, j.dh.d + qk),
        };
        let rz = Matrix4::new(
            theta.cos(), -theta.sin(), 0.0, 0.0,
            theta.sin(), theta.cos(), 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        let tz = Matrix4::new_translation(&Vec3::new(0.0, 0.0, d));
        let tx = Matrix4::new_translation(&Vec3::new(j.dh.a, 0.0, 0.0));
        let (sa, ca) = j.dh.alpha.sin_cos();
        let rx = Matrix4::new(
            1.0, 0.0, 0.0, 0.0,
            0.0, ca, -sa, 0.0,
            0.0, sa, ca, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        t = t * rz * tz * tx * rx;
        out.push(t);
    }
    out
}

fn oracle_point(model: &RobotModel, q: &[f64], frame: usize, local: &Vec3) -> Vec3 {
    let p = oracle_frames(model, q)[frame] * Vector4::new(local.x, local.y, local.z, 1.0);
    Vec3::new(p.x, p.y, p.z)
}

fn config() -> impl Strategy<Value = Vec<f64>> {
    let m = reference_model();
    m.joints.iter().map(|j| j.q_limit_low..j.q_limit_up).collect::<Vec<_>>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn frames_match_homogeneous_oracle(q in config()) {
        let model = reference_model();
        let kin = forward_kinematics(&model, &q).unwrap();
        for (pose, t) in kin.frames.iter().zip(oracle_frames(&model, &q)) {
            prop_assert!((pose.rotation - t.fixed_view::<3, 3>(0, 0)).norm() < 1e-12);
            prop_assert!((pose.translation - t.fixed_view::<3, 1>(0, 3)).norm() < 1e-12);
        }
    }

    #[test]
    fn composition_of_consecutive_frames(q in config()) {
        let model = reference_model();
        let kin = forward_kinematics(&model, &q).unwrap();
        for k in 1..kin.frames.len() {
            let step = model.joints[k].dh.transform(model.joints[k].kind, q[k]);
            let composed = kin.frames[k - 1].compose(&step);
            prop_assert!((composed.translation - kin.frames[k].translation).norm() < 1e-12);
        }
    }

    #[test]
    fn point_jacobian_matches_finite_differences(q in config(), fx in -0.1..0.1f64, fy in -0.1..0.1f64) {
        let mut model = reference_model();
        model.base_actuatable = true;
        let eps = 1e-7;
        for frame in 0..model.n_joints() {
            let local = Vec3::new(fx, fy, 0.05);
            let p = oracle_point(&model, &q, frame, &local);
            let jac = point_jacobian(&model, &q, frame as i32, &p).unwrap();
            for k in 0..model.n_joints() {
                let mut qp = q.clone();
                qp[k] += eps;
                let fd = (oracle_point(&model, &qp, frame, &local) - p) / eps;
                let col = jac.column(k);
                prop_assert!((fd - col).norm() <= 1e-5 * col.norm().max(1.0), "frame {} joint {}", frame, k);
            }
        }
    }

    #[test]
    fn mass_matrix_is_symmetric_positive_definite(q in config()) {
        let model = reference_model();
        let m = mass_matrix(&model, &q).unwrap();
        prop_assert!((&m - m.transpose()).norm() < 1e-12);
        let eig = SymmetricEigen::new(m);
        prop_assert!(eig.eigenvalues.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn projection_is_bounded_by_operator_norm(q in config(), wx in -1.0..1.0f64, wy in -1.0..1.0f64, wz in 0.1..1.0f64) {
        let model = reference_model();
        let kin = forward_kinematics(&model, &q).unwrap();
        let jx = kin.point_jacobian(&model, 8, &kin.tcp(&model));
        let jd = projected_jacobian(&jx, &Vec3::new(wx, wy, wz)).unwrap();
        let sigma = jx.clone().svd(false, false).singular_values.max();
        prop_assert!(jd.norm() <= sigma + 1e-12);
    }

    #[test]
    fn robot_distances_invariant_under_locked_base_motion(q in config(), dy in -0.2..0.2f64, dz in -0.1..0.1f64) {
        let model = reference_model();
        let robot = update_skeleton_states(&model, &q, &model.link_skeletons).unwrap();
        let mut q2 = q.clone();
        q2[0] += dy;
        q2[1] += dz;
        let moved = update_skeleton_states(&model, &q2, &model.link_skeletons).unwrap();
        // skeletons carried by the z carriage move rigidly with both axes
        let carried: Vec<usize> = (0..robot.len()).filter(|&k| robot[k].frame_id >= 1).collect();
        for (n, &i) in carried.iter().enumerate() {
            for &j in &carried[..n] {
                let a = closest_points(&robot[i], &robot[j]).unwrap().surface_distance;
                let b = closest_points(&moved[i], &moved[j]).unwrap().surface_distance;
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn world_fixed_environment_passes_through_bit_identical() {
    let model = reference_model();
    let env = reference_environment();
    let q = psg_core::kinematics::reference::home_q();
    let out = update_skeleton_states(&model, &q, &env).unwrap();
    assert_eq!(out, env);
}
