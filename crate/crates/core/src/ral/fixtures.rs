//! Procedural meshes for tests, examples and the CLI demo scene.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI};

use super::TriangleMesh;
use crate::geometry::{rot_y, Pose, Vec3};

/// Axis-aligned box centered at the origin, outward winding.
pub fn box_mesh(name: &str, extents: [f64; 3]) -> TriangleMesh {
    let h = Vec3::new(extents[0], extents[1], extents[2]) / 2.0;
    let vertices = (0..8)
        .map(|i| {
            let s = |bit: usize| if i & (1 << bit) != 0 { 1.0 } else { -1.0 };
            Vec3::new(s(0) * h.x, s(1) * h.y, s(2) * h.z)
        })
        .collect();
    let quads = [[0, 4, 6, 2], [1, 3, 7, 5], [0, 1, 5, 4], [2, 6, 7, 3], [0, 2, 3, 1], [4, 5, 7, 6]];
    let triangles = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
    TriangleMesh::new(name, vertices, triangles).expect("valid box")
}

pub fn unit_cube() -> TriangleMesh {
    box_mesh("unit_cube", [1.0, 1.0, 1.0])
}

/// 1.0 × 0.8 × 0.04 m plate.
pub fn thin_box() -> TriangleMesh {
    box_mesh("thin_box", [1.0, 0.8, 0.04])
}

/// Closed `segments`-gon prism along z, centered at the origin.
pub fn cylinder(name: &str, radius: f64, length: f64, segments: usize) -> TriangleMesh {
    let n = segments.max(3);
    let mut vertices = Vec::with_capacity(2 * n + 2);
    for z in [-length / 2.0, length / 2.0] {
        for k in 0..n {
            let a = 2.0 * PI * k as f64 / n as f64;
            vertices.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let (cb, ct) = (2 * n, 2 * n + 1);
    vertices.push(Vec3::new(0.0, 0.0, -length / 2.0));
    vertices.push(Vec3::new(0.0, 0.0, length / 2.0));
    let mut triangles = Vec::with_capacity(4 * n);
    for k in 0..n {
        let k1 = (k + 1) % n;
        let (b0, b1, t0, t1) = (k, k1, n + k, n + k1);
        triangles.push([b0, b1, t1]);
        triangles.push([b0, t1, t0]);
        triangles.push([cb, b1, b0]);
        triangles.push([ct, t0, t1]);
    }
    TriangleMesh::new(name, vertices, triangles).expect("valid cylinder")
}

/// 32-gon rod, radius 0.01 m and length 1 m, tilted 45° about y.
pub fn rotated_rod() -> TriangleMesh {
    cylinder("rod", 0.01, 1.0, 32).with_pose(Pose::new(rot_y(FRAC_PI_4), Vec3::zeros()))
}

/// Subdivided icosahedron projected onto a sphere of `radius`.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vs: &mut Vec<Vec3>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vs.push(((vs[a] + vs[b]) / 2.0).normalize());
                vs.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for f in &mut faces {
        let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
        if (b - a).cross(&(c - a)).dot(&(a + b + c)) < 0.0 {
            f.swap(1, 2);
        }
    }
    let vertices = vertices.into_iter().map(|v| v * radius).collect();
    TriangleMesh::new("icosphere", vertices, faces).expect("valid icosphere")
}

fn placed(mut mesh: TriangleMesh, name: &str, at: Vec3) -> TriangleMesh {
    mesh.name = name.to_string();
    mesh.with_pose(Pose::from_translation(at))
}

/// Lab bench around the reference system: a table top, an incubator, a
/// cabinet, two bottles, the robot's own base (excluded by name) and a
/// shelf outside the reachable workspace.
pub fn lab_scene() -> Vec<TriangleMesh> {
    vec![
        placed(box_mesh("", [2.0, 2.0, 0.04]), "table", Vec3::new(0.0, 0.0, -0.22)),
        placed(box_mesh("", [0.5, 0.6, 0.7]), "incubator", Vec3::new(1.0, 0.0, 0.15)),
        placed(box_mesh("", [0.8, 0.3, 0.9]), "cabinet", Vec3::new(0.2, 1.0, 0.25)),
        placed(cylinder("", 0.035, 0.2, 32), "bottle_a", Vec3::new(0.5, -0.35, -0.08)),
        placed(cylinder("", 0.04, 0.22, 32), "bottle_b", Vec3::new(0.45, 0.4, -0.07)),
        placed(box_mesh("", [1.2, 0.2, 0.2]), "robot_gantry", Vec3::new(-0.45, 0.0, -0.12)),
        placed(box_mesh("", [1.0, 0.4, 0.3]), "far_shelf", Vec3::new(6.0, 0.0, 1.0)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_closed_with_outward_winding() {
        let meshes = [unit_cube(), thin_box(), rotated_rod(), icosphere(1.0, 3)];
        for m in meshes.iter().chain(lab_scene().iter()) {
            assert!(m.signed_volume() > 0.0, "{}", m.name);
        }
        assert!((unit_cube().signed_volume() - 1.0).abs() < 1e-14);
        assert_eq!(icosphere(1.0, 3).vertices.len(), 642);
    }
}
