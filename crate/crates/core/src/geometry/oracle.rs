use super::{PrimitiveSkeleton, SkeletonKind, Vec3};

/// Sampling oracle: minimum distance over uniform grids of both bounded
/// domains, minus both radii.
///
/// Points need no sampling, lines use `samples_per_axis` values of `s`, planes
/// a `samples_per_axis²` grid. The result upper-bounds the exact surface
/// distance and converges to it as the grid is refined. Deliberately shares no
/// code with the analytical routines.
pub fn brute_force_distance(a: &PrimitiveSkeleton, b: &PrimitiveSkeleton, samples_per_axis: usize) -> f64 {
    let n = samples_per_axis.max(2);
    let pa = samples(a, n);
    let pb = samples(b, n);
    let mut best = f64::INFINITY;
    for x in &pa {
        for y in &pb {
            let d = (x - y).norm_squared();
            if d < best {
                best = d;
            }
        }
    }
    best.sqrt() - a.shape.radius - b.shape.radius
}

fn samples(ps: &PrimitiveSkeleton, n: usize) -> Vec<Vec3> {
    let sh = &ps.shape;
    let step = 1.0 / (n - 1) as f64;
    match sh.kind {
        SkeletonKind::Point => vec![sh.origin],
        SkeletonKind::Line => (0..n).map(|k| sh.origin + sh.p * (k as f64 * step)).collect(),
        SkeletonKind::Plane => {
            let mut out = Vec::with_capacity(n * n);
            for k in 0..n {
                let s = k as f64 * step;
                for l in 0..n {
                    out.push(sh.origin + sh.p * s + sh.q * (l as f64 * step));
                }
            }
            out
        }
    }
}
