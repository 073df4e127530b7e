#![allow(dead_code)]

use psg_core::envstore::{DesignValues, EnvironmentSnapshot, SkeletonRecord};
use psg_core::geometry::{PrimitiveSkeleton, Shape, SkeletonKind, Vec3};
use rand::Rng;

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_shape<R: Rng>(rng: &mut R, kind: SkeletonKind) -> Shape {
    let origin = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let radius = rng.random_range(0.0..0.2);
    match kind {
        SkeletonKind::Point => Shape::point(origin, radius),
        SkeletonKind::Line => Shape::line(origin, random_unit(rng) * rng.random_range(0.1..1.5), radius),
        SkeletonKind::Plane => {
            let p = random_unit(rng);
            let mut q = random_unit(rng);
            q -= p * p.dot(&q);
            while q.norm() < 0.2 {
                q = random_unit(rng);
                q -= p * p.dot(&q);
            }
            let q = q.normalize();
            Shape::plane(origin, p * rng.random_range(0.1..1.5), q * rng.random_range(0.1..1.5), radius)
        }
    }
}

pub fn skeleton(name: &str, shape: Shape) -> PrimitiveSkeleton {
    PrimitiveSkeleton::new(name, shape).expect("valid random shape")
}

pub const KINDS: [SkeletonKind; 3] = [SkeletonKind::Point, SkeletonKind::Line, SkeletonKind::Plane];

/// Grid resolution used by the sampling oracle per kind pair.
pub fn oracle_samples(a: SkeletonKind, b: SkeletonKind) -> usize {
    use SkeletonKind::*;
    match (a, b) {
        (Point, Point) => 2,
        (Point, Line) | (Line, Point) => 2000,
        (Line, Line) => 400,
        (Point, Plane) | (Plane, Point) => 200,
        (Line, Plane) | (Plane, Line) => 60,
        (Plane, Plane) => 16,
    }
}

/// Coordinates spanning many magnitudes and both signs.
fn wild<R: Rng>(rng: &mut R) -> f64 {
    let mantissa: f64 = rng.random_range(-1.0..1.0);
    mantissa * 10f64.powi(rng.random_range(-12..4))
}

/// Snapshot of `n` random world records with unique names; plane vectors are
/// orthogonal to rounding.
pub fn random_snapshot<R: Rng>(rng: &mut R, version: u64, n: usize) -> EnvironmentSnapshot {
    let mut records: Vec<SkeletonRecord> = Vec::with_capacity(n);
    for i in 0..n {
        let kind = KINDS[rng.random_range(0..3)];
        let shape = random_shape(rng, kind);
        let shape = Shape { origin: Vec3::new(wild(rng), wild(rng), wild(rng)), radius: rng.random_range(0.0..0.5), ..shape };
        let mut r = SkeletonRecord::from_skeleton(&skeleton(&format!("s{i}_{}", rng.random_range(0..1000)), shape), "world");
        if let Some(prev) = records.last().filter(|_| rng.random_bool(0.3)) {
            r.ignores.push(prev.name.clone());
        }
        records.push(r);
    }
    let dv = DesignValues { f_max: rng.random_range(1.0..100.0), d_th: rng.random_range(0.01..0.2), zeta: rng.random_range(0.0..1.0) };
    EnvironmentSnapshot::new(version, rng.random_bool(0.5), dv, records)
}
