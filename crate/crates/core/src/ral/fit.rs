use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{FitParams, FittedPrimitive, PrimitiveKind, TriangleMesh};
use crate::geometry::{Mat3, Vec3};

/// Outward growth applied to every fitted primitive.
pub const FIT_INFLATION: f64 = 1e-9;

fn box_volume(half: &Vec3) -> f64 {
    8.0 * half.x * half.y * half.z
}

pub fn fit_abox(mesh: &TriangleMesh) -> FittedPrimitive {
    let (lo, hi) = mesh.aabb();
    let half = (hi - lo) / 2.0 + Vec3::repeat(FIT_INFLATION);
    FittedPrimitive {
        kind: PrimitiveKind::ABox,
        params: Some(FitParams::Box { center: (lo + hi) / 2.0, axes: Mat3::identity(), half }),
        volume: box_volume(&half),
    }
}

/// Principal axes of the vertex cloud, largest variance first, right-handed.
fn principal_axes(points: &[Vec3]) -> (Vec3, Mat3) {
    let n = points.len().max(1) as f64;
    let mean = points.iter().sum::<Vec3>() / n;
    let cov = points.iter().map(|p| (p - mean) * (p - mean).transpose()).sum::<Mat3>() / n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let c0 = eig.eigenvectors.column(order[0]).normalize();
    let c1 = eig.eigenvectors.column(order[1]).normalize();
    let c2 = c0.cross(&c1);
    (mean, Mat3::from_columns(&[c0, c1, c2]))
}

pub fn fit_obox(mesh: &TriangleMesh) -> FittedPrimitive {
    let pts = mesh.world_vertices();
    if pts.is_empty() {
        return FittedPrimitive::invalid(PrimitiveKind::OBox);
    }
    let (mean, axes) = principal_axes(&pts);
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in &pts {
        let l = axes.transpose() * (p - mean);
        lo = lo.inf(&l);
        hi = hi.sup(&l);
    }
    let half = (hi - lo) / 2.0 + Vec3::repeat(FIT_INFLATION);
    let center = mean + axes * ((lo + hi) / 2.0);
    FittedPrimitive {
        kind: PrimitiveKind::OBox,
        params: Some(FitParams::Box { center, axes, half }),
        volume: box_volume(&half),
    }
}

#[derive(Clone, Copy)]
struct Ball {
    c: Vec3,
    r2: f64,
}

impl Ball {
    fn contains(&self, p: &Vec3, tol: f64) -> bool {
        self.r2 >= 0.0 && (p - self.c).norm_squared() <= self.r2 + tol
    }
}

/// Circumscribed ball of up to four support points; `None` when degenerate.
fn support_ball(s: &[Vec3]) -> Option<Ball> {
    match s.len() {
        0 => Some(Ball { c: Vec3::zeros(), r2: -1.0 }),
        1 => Some(Ball { c: s[0], r2: 0.0 }),
        2 => {
            let c = (s[0] + s[1]) / 2.0;
            Some(Ball { c, r2: (s[0] - c).norm_squared() })
        }
        3 => {
            let (a, b) = (s[1] - s[0], s[2] - s[0]);
            let n = a.cross(&b);
            let n2 = n.norm_squared();
            if n2 <= 1e-24 * a.norm_squared() * b.norm_squared() || n2 == 0.0 {
                return None;
            }
            let off = (b.cross(&n) * a.norm_squared() + n.cross(&a) * b.norm_squared()) / (2.0 * n2);
            Some(Ball { c: s[0] + off, r2: off.norm_squared() })
        }
        4 => {
            let a = Mat3::from_rows(&[
                (s[1] - s[0]).transpose(),
                (s[2] - s[0]).transpose(),
                (s[3] - s[0]).transpose(),
            ]);
            let rhs = Vec3::new(
                (s[1] - s[0]).norm_squared(),
                (s[2] - s[0]).norm_squared(),
                (s[3] - s[0]).norm_squared(),
            ) / 2.0;
            let scale = (0..3).map(|k| a.row(k).norm()).product::<f64>();
            if a.determinant().abs() <= 1e-12 * scale {
                return None;
            }
            let off = a.lu().solve(&rhs)?;
            Some(Ball { c: s[0] + off, r2: off.norm_squared() })
        }
        _ => None,
    }
}

/// Move-to-front Welzl recursion over `pts[..n]` with `support` on the boundary.
fn welzl(pts: &mut [Vec3], n: usize, support: &mut Vec<Vec3>, tol: f64) -> Option<Ball> {
    let mut ball = support_ball(support)?;
    if support.len() == 4 {
        return Some(ball);
    }
    for i in 0..n {
        if !ball.contains(&pts[i], tol) {
            support.push(pts[i]);
            let inner = welzl(pts, i, support, tol);
            support.pop();
            ball = inner?;
            pts[..=i].rotate_right(1);
        }
    }
    Some(ball)
}

/// Ritter's bounding sphere, grown until it holds every point.
fn ritter(pts: &[Vec3]) -> Ball {
    let far = |from: &Vec3| *pts.iter().max_by(|a, b| (*a - from).norm_squared().total_cmp(&(*b - from).norm_squared())).unwrap();
    let x = far(&pts[0]);
    let y = far(&x);
    let mut c = (x + y) / 2.0;
    let mut r = (y - x).norm() / 2.0;
    for p in pts {
        let d = (p - c).norm();
        if d > r {
            let nr = (r + d) / 2.0;
            c += (p - c) * ((nr - r) / d);
            r = nr;
        }
    }
    Ball { c, r2: r * r }
}

pub fn fit_sphere(mesh: &TriangleMesh) -> FittedPrimitive {
    let mut pts = mesh.world_vertices();
    if pts.is_empty() {
        return FittedPrimitive::invalid(PrimitiveKind::Sphere);
    }
    pts.sort_by(|a, b| a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    let scale = pts.iter().map(|p| p.norm_squared()).fold(1.0, f64::max);
    let tol = 1e-12 * scale;
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed));
    let n = pts.len();
    let mut work = pts.clone();
    let ball = welzl(&mut work, n, &mut Vec::with_capacity(4), tol)
        .filter(|b| pts.iter().all(|p| b.contains(p, tol)))
        .unwrap_or_else(|| {
            log::debug!("mesh {}: exact enclosing sphere failed, using Ritter", mesh.name);
            ritter(&pts)
        });
    let radius = pts.iter().map(|p| (p - ball.c).norm()).fold(ball.r2.max(0.0).sqrt(), f64::max) + FIT_INFLATION;
    FittedPrimitive {
        kind: PrimitiveKind::Sphere,
        params: Some(FitParams::Sphere { center: ball.c, radius }),
        volume: 4.0 / 3.0 * PI * radius.powi(3),
    }
}

/// Capsule about the principal axis with the tightest end caps that still
/// enclose every vertex. Invalid when the caps would cross.
pub fn fit_capsule(mesh: &TriangleMesh) -> FittedPrimitive {
    let pts = mesh.world_vertices();
    if pts.is_empty() {
        return FittedPrimitive::invalid(PrimitiveKind::Capsule);
    }
    let (mean, axes) = principal_axes(&pts);
    let u = axes.column(0).into_owned();
    let proj: Vec<(f64, f64)> = pts
        .iter()
        .map(|p| {
            let d = p - mean;
            let t = d.dot(&u);
            (t, (d - u * t).norm())
        })
        .collect();
    let radius = proj.iter().map(|&(_, rho)| rho).fold(0.0, f64::max) + FIT_INFLATION;
    let cap = |rho: f64| (radius * radius - rho * rho).max(0.0).sqrt();
    let s_hi = proj.iter().map(|&(t, rho)| t - cap(rho)).fold(f64::NEG_INFINITY, f64::max);
    let s_lo = proj.iter().map(|&(t, rho)| t + cap(rho)).fold(f64::INFINITY, f64::min);
    if s_hi < s_lo {
        return FittedPrimitive::invalid(PrimitiveKind::Capsule);
    }
    let len = s_hi - s_lo;
    FittedPrimitive {
        kind: PrimitiveKind::Capsule,
        params: Some(FitParams::Capsule { a: mean + u * s_lo, b: mean + u * s_hi, radius }),
        volume: PI * radius * radius * len + 4.0 / 3.0 * PI * radius.powi(3),
    }
}

/// All four candidates, each marked invalid if it cannot hold `mesh_volume`.
pub fn fit_all(mesh: &TriangleMesh, mesh_volume: f64) -> Vec<FittedPrimitive> {
    [fit_sphere(mesh), fit_capsule(mesh), fit_abox(mesh), fit_obox(mesh)]
        .into_iter()
        .map(|f| f.checked(mesh_volume))
        .collect()
}
