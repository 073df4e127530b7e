//! Reference 9-DOF system: a two-axis y-z gantry carrying a 7-joint arm.
//!
//! Arm DH values are the classic-convention parameters of a common 7-DOF
//! torque-controlled research arm. Gantry geometry and masses are plausible
//! defaults, not measurements.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::geometry::{Mat3, Pose, PrimitiveSkeleton, Vec3};

use super::{DhParams, JointKind, JointSpec, RobotModel};

pub const N_JOINTS: usize = 9;
/// Index of the gantry y axis.
pub const GANTRY_Y: usize = 0;
/// Index of the gantry z axis.
pub const GANTRY_Z: usize = 1;
/// Index of the first arm joint.
pub const ARM_FIRST: usize = 2;

pub const ARM_TORQUE_LIMITS: [f64; 7] = [87.0, 87.0, 87.0, 87.0, 12.0, 12.0, 12.0];
pub const ARM_LIMITS: [(f64, f64); 7] = [
    (-2.8973, 2.8973),
    (-1.7628, 1.7628),
    (-2.8973, 2.8973),
    (-3.0718, -0.0698),
    (-2.8973, 2.8973),
    (-0.0175, 3.7525),
    (-2.8973, 2.8973),
];

/// Home configuration: gantry centered and raised 0.2 m, arm in its usual
/// ready pose.
pub fn home_q() -> Vec<f64> {
    vec![0.0, 0.2, 0.0, -FRAC_PI_4, 0.0, -3.0 * FRAC_PI_4, 0.0, FRAC_PI_2, FRAC_PI_4]
}

fn v(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

pub fn reference_model() -> RobotModel {
    // base z axis along world y so the first prismatic joint is the y axis
    let base = Pose::new(Mat3::from_columns(&[Vec3::x(), -Vec3::z(), Vec3::y()]), Vec3::zeros());

    let mut joints = vec![
        JointSpec {
            name: "gantry_y".into(),
            kind: JointKind::Prismatic,
            dh: DhParams::new(0.0, FRAC_PI_2, 0.0, 0.0),
            q_limit_low: -0.6,
            q_limit_up: 0.6,
            lumped_mass: 40.0,
            lumped_inertia: 0.0,
            torque_limit: 400.0,
            torque_rate_limit: 10_000.0,
        },
        JointSpec {
            name: "gantry_z".into(),
            kind: JointKind::Prismatic,
            dh: DhParams::new(0.0, 0.0, 0.0, 0.0),
            q_limit_low: 0.0,
            q_limit_up: 0.5,
            lumped_mass: 20.0,
            lumped_inertia: 0.0,
            torque_limit: 600.0,
            torque_rate_limit: 10_000.0,
        },
    ];

    let arm_dh = [
        (0.0, -FRAC_PI_2, 0.333),
        (0.0, FRAC_PI_2, 0.0),
        (0.0825, FRAC_PI_2, 0.316),
        (-0.0825, -FRAC_PI_2, 0.0),
        (0.0, FRAC_PI_2, 0.384),
        (0.088, FRAC_PI_2, 0.0),
        (0.0, 0.0, 0.107),
    ];
    let arm_masses = [4.97, 0.65, 3.23, 3.59, 1.23, 1.67, 1.47];
    let rotor = [0.2, 0.2, 0.1, 0.1, 0.03, 0.03, 0.02];
    for k in 0..7 {
        let (a, alpha, d) = arm_dh[k];
        joints.push(JointSpec {
            name: format!("arm_{}", k + 1),
            kind: JointKind::Revolute,
            dh: DhParams::new(a, alpha, d, 0.0),
            q_limit_low: ARM_LIMITS[k].0,
            q_limit_up: ARM_LIMITS[k].1,
            lumped_mass: arm_masses[k],
            lumped_inertia: rotor[k],
            torque_limit: ARM_TORQUE_LIMITS[k],
            torque_rate_limit: 1000.0,
        });
    }

    let skeletons = reference_skeletons();
    let mut model = RobotModel::new("gantry_arm_9dof", base, joints, skeletons).expect("reference model is valid");
    model.base_joints = 2;
    model.base_actuatable = false;
    model.tcp = v(0.0, 0.0, 0.1034);
    model
}

/// 4 spheres and 11 capsules in their link frames.
fn reference_skeletons() -> Vec<PrimitiveSkeleton> {
    let line = |name: &str, frame: i32, o: Vec3, p: Vec3, r: f64| {
        PrimitiveSkeleton::line(name, o, p, r).expect("valid").with_frame(frame)
    };
    let point = |name: &str, frame: i32, o: Vec3, r: f64| PrimitiveSkeleton::point(name, o, r).expect("valid").with_frame(frame);

    let mut out = vec![
        line("gantry_y", 0, v(-0.55, 0.0, -0.12), v(0.45, 0.0, 0.0), 0.07),
        line("gantry_z", 0, v(-0.45, 0.0, -0.05), v(0.0, 0.0, 1.25), 0.06),
        line("mount", 1, v(-0.45, 0.0, -0.03), v(0.45, 0.0, 0.0), 0.05),
        line("link0", 1, v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.2), 0.09),
        point("shoulder", 2, v(0.0, 0.0, 0.0), 0.09),
        line("link1", 2, v(0.0, 0.13, 0.0), v(0.0, -0.13, 0.0), 0.08),
        line("upper_arm", 3, v(0.0, 0.0, 0.06), v(0.0, 0.0, 0.2), 0.07),
        point("elbow", 4, v(0.0, 0.0, 0.0), 0.09),
        line("elbow_link", 5, v(0.0825, 0.0, 0.0), v(-0.0825, 0.0, 0.0), 0.07),
        line("forearm", 5, v(0.0, 0.0, 0.06), v(0.0, 0.0, 0.2), 0.06),
        point("wrist", 6, v(0.0, 0.0, 0.0), 0.08),
        line("link6", 7, v(-0.088, 0.0, 0.0), v(0.088, 0.0, 0.0), 0.06),
        line("flange", 8, v(0.0, 0.0, -0.107), v(0.0, 0.0, 0.107), 0.05),
        line("hand", 8, v(0.0, -0.09, 0.06), v(0.0, 0.18, 0.0), 0.035),
        point("ee", 8, v(0.0, 0.0, 0.09), 0.04),
    ];

    // Structurally impossible or permanently touching robot-robot pairs:
    // neighbours up to two links apart, the low gantry beam against the arm
    // beyond the shoulder, and two stacked segments that stay apart.
    let frame_of = |name: &str| out.iter().find(|s| s.name == name).map(|s| s.frame_id).expect("known");
    let mut ignores: Vec<(String, String)> = Vec::new();
    for a in &out {
        for b in &out {
            if a.name >= b.name || a.frame_id == b.frame_id {
                continue;
            }
            let gap = (a.frame_id - b.frame_id).abs();
            let beam = (a.name == "gantry_y" && b.frame_id >= 3) || (b.name == "gantry_y" && a.frame_id >= 3);
            if gap <= 2 || beam {
                ignores.push((a.name.clone(), b.name.clone()));
            }
        }
    }
    for (a, b) in [("mount", "elbow"), ("link0", "elbow"), ("upper_arm", "wrist")] {
        debug_assert_eq!((frame_of(a) - frame_of(b)).abs(), 3);
        ignores.push((a.to_string(), b.to_string()));
    }
    for (a, b) in ignores {
        for s in out.iter_mut() {
            if s.name == a {
                s.ignore.insert(b.clone());
            } else if s.name == b {
                s.ignore.insert(a.clone());
            }
        }
    }
    out
}

/// World-fixed skeletons of the reference lab bench: a table top, an
/// incubator wall, a cabinet side and two bottles.
pub fn reference_environment() -> Vec<PrimitiveSkeleton> {
    vec![
        PrimitiveSkeleton::plane("table", v(-1.0, -1.0, -0.2), v(2.0, 0.0, 0.0), v(0.0, 2.0, 0.0), 0.0).unwrap(),
        PrimitiveSkeleton::plane("incubator_wall", v(0.75, -0.5, -0.2), v(0.0, 1.0, 0.0), v(0.0, 0.0, 1.0), 0.0)
            .unwrap(),
        PrimitiveSkeleton::plane("cabinet_side", v(-0.2, 0.85, -0.2), v(0.8, 0.0, 0.0), v(0.0, 0.0, 1.0), 0.0)
            .unwrap(),
        PrimitiveSkeleton::line("bottle_a", v(0.5, -0.35, -0.18), v(0.0, 0.0, 0.2), 0.035).unwrap(),
        PrimitiveSkeleton::line("bottle_b", v(0.45, 0.4, -0.18), v(0.0, 0.0, 0.22), 0.04).unwrap(),
    ]
}
