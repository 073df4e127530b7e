use super::{GeometryError, PrimitiveSkeleton, Shape, SkeletonKind, Vec3, MIN_DIRECTION_NORM, PARALLEL_SIN_TOL};

/// Closest-point segment between two skeletons.
///
/// `u` lies on the center geometry of skeleton `i`, `u + w` on skeleton `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceResult {
    pub u: Vec3,
    pub w: Vec3,
    pub s_i: f64,
    pub t_i: f64,
    pub s_j: f64,
    pub t_j: f64,
    pub center_distance: f64,
    /// `|w| - r_i - r_j`; negative on interpenetration.
    pub surface_distance: f64,
}

impl DistanceResult {
    /// Closest point on skeleton `j`.
    pub fn closest_on_j(&self) -> Vec3 {
        self.u + self.w
    }

    /// Unit direction from `i` toward `j`, `None` for coincident centers.
    pub fn direction(&self) -> Option<Vec3> {
        if self.center_distance > MIN_DIRECTION_NORM {
            Some(self.w / self.center_distance)
        } else {
            None
        }
    }

    /// The same pair seen from `j`.
    pub fn swapped(&self) -> DistanceResult {
        DistanceResult {
            u: self.u + self.w,
            w: -self.w,
            s_i: self.s_j,
            t_i: self.t_j,
            s_j: self.s_i,
            t_j: self.t_i,
            ..*self
        }
    }
}

/// Minimal distance between two named skeletons.
pub fn closest_points(a: &PrimitiveSkeleton, b: &PrimitiveSkeleton) -> Result<DistanceResult, GeometryError> {
    check_directions(&a.shape, &a.name)?;
    check_directions(&b.shape, &b.name)?;
    Ok(closest_unchecked(&a.shape, &b.shape))
}

impl Shape {
    /// Minimal distance to `other`; fails only on degenerate direction vectors.
    pub fn closest(&self, other: &Shape) -> Result<DistanceResult, GeometryError> {
        check_directions(self, "<anonymous>")?;
        check_directions(other, "<anonymous>")?;
        Ok(closest_unchecked(self, other))
    }
}

fn check_directions(shape: &Shape, name: &str) -> Result<(), GeometryError> {
    let min_sq = MIN_DIRECTION_NORM * MIN_DIRECTION_NORM;
    let bad = match shape.kind {
        SkeletonKind::Point => None,
        SkeletonKind::Line => (shape.p.norm_squared() < min_sq).then_some("|P| below 1e-12"),
        SkeletonKind::Plane => {
            if shape.p.norm_squared() < min_sq {
                Some("|P| below 1e-12")
            } else if shape.q.norm_squared() < min_sq {
                Some("|Q| below 1e-12")
            } else {
                None
            }
        }
    };
    match bad {
        Some(reason) => Err(GeometryError::DegenerateSkeleton { name: name.to_string(), reason: reason.to_string() }),
        None => Ok(()),
    }
}

/// Scaling factors of a closest-point pair: `(s_i, t_i, s_j, t_j)`.
#[derive(Debug, Clone, Copy)]
struct Params {
    s_i: f64,
    t_i: f64,
    s_j: f64,
    t_j: f64,
}

impl Params {
    fn swap(self) -> Params {
        Params { s_i: self.s_j, t_i: self.t_j, s_j: self.s_i, t_j: self.t_i }
    }
}

pub(crate) fn closest_unchecked(a: &Shape, b: &Shape) -> DistanceResult {
    use SkeletonKind::*;
    let params = match (a.kind, b.kind) {
        (Point, Point) => Params { s_i: 0.0, t_i: 0.0, s_j: 0.0, t_j: 0.0 },
        (Point, Line) => Params { s_i: 0.0, t_i: 0.0, s_j: point_segment(&a.origin, &b.origin, &b.p), t_j: 0.0 },
        (Line, Point) => Params { s_i: point_segment(&b.origin, &a.origin, &a.p), t_i: 0.0, s_j: 0.0, t_j: 0.0 },
        (Line, Line) => {
            let (s_i, s_j) = segment_segment(&a.origin, &a.p, &b.origin, &b.p);
            Params { s_i, t_i: 0.0, s_j, t_j: 0.0 }
        }
        (Point, Plane) => {
            let (s_j, t_j) = point_rectangle(&a.origin, b);
            Params { s_i: 0.0, t_i: 0.0, s_j, t_j }
        }
        (Plane, Point) => {
            let (s_i, t_i) = point_rectangle(&b.origin, a);
            Params { s_i, t_i, s_j: 0.0, t_j: 0.0 }
        }
        (Line, Plane) => segment_rectangle(&a.origin, &a.p, b).params(),
        (Plane, Line) => segment_rectangle(&b.origin, &b.p, a).params().swap(),
        (Plane, Plane) => rectangle_rectangle(a, b),
    };
    build_result(a, b, params)
}

#[inline]
fn build_result(a: &Shape, b: &Shape, p: Params) -> DistanceResult {
    let u = a.at(p.s_i, p.t_i);
    let w = b.at(p.s_j, p.t_j) - u;
    let center_distance = w.norm();
    DistanceResult {
        u,
        w,
        s_i: p.s_i,
        t_i: p.t_i,
        s_j: p.s_j,
        t_j: p.t_j,
        center_distance,
        surface_distance: center_distance - a.radius - b.radius,
    }
}

#[inline]
fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// How far `x` lies outside `[0, 1]`.
#[inline]
fn violation(x: f64) -> f64 {
    if x < 0.0 {
        -x
    } else if x > 1.0 {
        x - 1.0
    } else {
        0.0
    }
}

/// Clamped factor of the point on segment `origin + s dir` closest to `x`.
#[inline]
fn point_segment(x: &Vec3, origin: &Vec3, dir: &Vec3) -> f64 {
    clamp01((x - origin).dot(dir) / dir.norm_squared())
}

/// Segment-segment closest factors.
///
/// Solves the perpendicularity system of the infinite lines, then clamps the
/// most violating factor first, re-solves the other as a point-segment
/// problem, clamps it, and back-substitutes once more into the first.
fn segment_segment(o_i: &Vec3, p_i: &Vec3, o_j: &Vec3, p_j: &Vec3) -> (f64, f64) {
    let r = o_i - o_j;
    let a = p_i.norm_squared();
    let e = p_j.norm_squared();
    let b = p_i.dot(p_j);
    let c = p_i.dot(&r);
    let f = p_j.dot(&r);
    // same as a*e - b*b without the cancellation
    let denom = p_i.cross(p_j).norm_squared();

    // s for a fixed t, t for a fixed s
    let solve_s = |t: f64| clamp01((b * t - c) / a);
    let solve_t = |s: f64| clamp01((f + b * s) / e);

    if denom <= PARALLEL_SIN_TOL * PARALLEL_SIN_TOL * a * e {
        // parallel: center of the overlapping parameter interval
        let a0 = -c / a;
        let a1 = (b - c) / a;
        let (lo, hi) = if a0 <= a1 { (a0, a1) } else { (a1, a0) };
        let (lo, hi) = (lo.max(0.0), hi.min(1.0));
        if lo <= hi {
            let s = 0.5 * (lo + hi);
            return (s, solve_t(s));
        }
        let s = if hi < 0.0 { 0.0 } else { 1.0 };
        let t = solve_t(s);
        return (solve_s(t), t);
    }

    let s = (b * f - c * e) / denom;
    let t = (a * f - b * c) / denom;
    let (vs, vt) = (violation(s), violation(t));
    if vs == 0.0 && vt == 0.0 {
        return (s, t);
    }
    if vs >= vt {
        let s = clamp01(s);
        let t = solve_t(s);
        (solve_s(t), t)
    } else {
        let t = clamp01(t);
        let s = solve_s(t);
        (s, solve_t(s))
    }
}

/// Point-rectangle closest factors with the same clamp-then-resolve scheme.
fn point_rectangle(x: &Vec3, rect: &Shape) -> (f64, f64) {
    let d = x - rect.origin;
    let pp = rect.p.norm_squared();
    let qq = rect.q.norm_squared();
    let s = d.dot(&rect.p) / pp;
    let t = d.dot(&rect.q) / qq;
    let (vs, vt) = (violation(s), violation(t));
    if vs == 0.0 && vt == 0.0 {
        return (s, t);
    }
    if vs >= vt {
        let s = clamp01(s);
        let t = clamp01((d - rect.p * s).dot(&rect.q) / qq);
        (s, t)
    } else {
        let t = clamp01(t);
        let s = clamp01((d - rect.q * t).dot(&rect.p) / pp);
        (s, t)
    }
}

/// Closest factors of segment `i` against rectangle `j`.
#[derive(Debug, Clone, Copy)]
struct SegRect {
    s_i: f64,
    s_j: f64,
    t_j: f64,
}

impl SegRect {
    fn params(self) -> Params {
        Params { s_i: self.s_i, t_i: 0.0, s_j: self.s_j, t_j: self.t_j }
    }
}

fn segment_rectangle(o_i: &Vec3, p_i: &Vec3, rect: &Shape) -> SegRect {
    let normal = rect.p.cross(&rect.q);
    let dn = p_i.dot(&normal);
    let pp = rect.p.norm_squared();
    let qq = rect.q.norm_squared();
    let rect_coords = |x: &Vec3| {
        let d = x - rect.origin;
        (d.dot(&rect.p) / pp, d.dot(&rect.q) / qq)
    };

    if dn.abs() > PARALLEL_SIN_TOL * p_i.norm() * normal.norm() {
        // Intersection of the infinite line with the infinite plane (Cramer on
        // O_i + s P_i = O_j + u P_j + v Q_j).
        let r = rect.origin - o_i;
        let s = r.dot(&normal) / dn;
        let u = p_i.dot(&rect.q.cross(&r)) / dn;
        let v = p_i.dot(&r.cross(&rect.p)) / dn;
        if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v) {
            return SegRect { s_i: s, s_j: u, t_j: v };
        }
    } else {
        // Parallel: take the center of the part of the segment that projects
        // inside the rectangle, if there is one.
        let (u0, v0) = rect_coords(o_i);
        let du = p_i.dot(&rect.p) / pp;
        let dv = p_i.dot(&rect.q) / qq;
        if let Some((lo, hi)) = clip_unit(u0, du).and_then(|(lo, hi)| {
            let (lo2, hi2) = clip_unit(v0, dv)?;
            let (lo, hi) = (lo.max(lo2), hi.min(hi2));
            (lo <= hi).then_some((lo, hi))
        }) {
            let s = 0.5 * (lo + hi);
            return SegRect { s_i: s, s_j: clamp01(u0 + du * s), t_j: clamp01(v0 + dv * s) };
        }
    }

    segment_rectangle_boundary(o_i, p_i, rect)
}

/// Interval of `s ∈ [0,1]` for which `x0 + dx s ∈ [0,1]`.
fn clip_unit(x0: f64, dx: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if dx.abs() < 1e-15 {
        if !(0.0..=1.0).contains(&x0) {
            return None;
        }
    } else {
        let (a, b) = ((0.0 - x0) / dx, (1.0 - x0) / dx);
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        lo = lo.max(a);
        hi = hi.min(b);
    }
    (lo <= hi).then_some((lo, hi))
}

/// Segment-rectangle minimum when the optimum lies on a domain boundary:
/// both segment endpoints against the rectangle and the segment against the
/// four rectangle edges.
fn segment_rectangle_boundary(o_i: &Vec3, p_i: &Vec3, rect: &Shape) -> SegRect {
    let end = o_i + p_i;
    let mut best = {
        let (s_j, t_j) = point_rectangle(o_i, rect);
        (dist_sq(o_i, &rect.at(s_j, t_j)), SegRect { s_i: 0.0, s_j, t_j })
    };
    let mut consider = |cand: SegRect| {
        let dsq = dist_sq(&(o_i + p_i * cand.s_i), &rect.at(cand.s_j, cand.t_j));
        if dsq < best.0 {
            best = (dsq, cand);
        }
    };
    let (s_j, t_j) = point_rectangle(&end, rect);
    consider(SegRect { s_i: 1.0, s_j, t_j });
    for (edge_o, edge_p, fixed_is_t, fixed) in rectangle_edges(rect) {
        let (s, e) = segment_segment(o_i, p_i, &edge_o, &edge_p);
        let (s_j, t_j) = if fixed_is_t { (e, fixed) } else { (fixed, e) };
        consider(SegRect { s_i: s, s_j, t_j });
    }
    best.1
}

/// The four edges as `(origin, direction, fixed factor is t, fixed value)`.
fn rectangle_edges(rect: &Shape) -> [(Vec3, Vec3, bool, f64); 4] {
    [
        (rect.origin, rect.p, true, 0.0),
        (rect.origin + rect.q, rect.p, true, 1.0),
        (rect.origin, rect.q, false, 0.0),
        (rect.origin + rect.p, rect.q, false, 1.0),
    ]
}

/// Rectangle-rectangle minimum: the interior projections of both centers and
/// the eight edge-against-rectangle problems.
fn rectangle_rectangle(a: &Shape, b: &Shape) -> Params {
    let mut best: Option<(f64, Params)> = None;
    let mut consider = |p: Params| {
        let dsq = dist_sq(&a.at(p.s_i, p.t_i), &b.at(p.s_j, p.t_j));
        if best.map_or(true, |(d, _)| dsq < d) {
            best = Some((dsq, p));
        }
    };

    let (s_j, t_j) = point_rectangle(&a.center(), b);
    consider(Params { s_i: 0.5, t_i: 0.5, s_j, t_j });
    let (s_i, t_i) = point_rectangle(&b.center(), a);
    consider(Params { s_i, t_i, s_j: 0.5, t_j: 0.5 });

    for (edge_o, edge_p, fixed_is_t, fixed) in rectangle_edges(a) {
        let r = segment_rectangle(&edge_o, &edge_p, b);
        let (s_i, t_i) = if fixed_is_t { (r.s_i, fixed) } else { (fixed, r.s_i) };
        consider(Params { s_i, t_i, s_j: r.s_j, t_j: r.t_j });
    }
    for (edge_o, edge_p, fixed_is_t, fixed) in rectangle_edges(b) {
        let r = segment_rectangle(&edge_o, &edge_p, a);
        let (s_j, t_j) = if fixed_is_t { (r.s_i, fixed) } else { (fixed, r.s_i) };
        consider(Params { s_i: r.s_j, t_i: r.t_j, s_j, t_j });
    }
    best.map(|(_, p)| p).expect("at least one candidate")
}

#[inline]
fn dist_sq(a: &Vec3, b: &Vec3) -> f64 {
    (a - b).norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::brute_force_distance;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn point(name: &str, o: Vec3, r: f64) -> PrimitiveSkeleton {
        PrimitiveSkeleton::point(name, o, r).unwrap()
    }

    fn line(name: &str, o: Vec3, p: Vec3, r: f64) -> PrimitiveSkeleton {
        PrimitiveSkeleton::line(name, o, p, r).unwrap()
    }

    fn plane(name: &str, o: Vec3, p: Vec3, q: Vec3, r: f64) -> PrimitiveSkeleton {
        PrimitiveSkeleton::plane(name, o, p, q, r).unwrap()
    }

    #[test]
    fn sphere_sphere() {
        let a = point("a", v(0., 0., 0.), 0.1);
        let b = point("b", v(1., 0., 0.), 0.2);
        let r = closest_points(&a, &b).unwrap();
        assert!((r.surface_distance - 0.7).abs() < 1e-15);
        assert_eq!(r.w, v(1., 0., 0.));
    }

    #[test]
    fn perpendicular_skew_lines() {
        let a = line("a", v(0., 0., 0.), v(1., 0., 0.), 0.0);
        let b = line("b", v(0., 0., 1.), v(0., 1., 0.), 0.0);
        let r = closest_points(&a, &b).unwrap();
        assert_eq!((r.s_i, r.s_j), (0.0, 0.0));
        assert!((r.surface_distance - 1.0).abs() < 1e-15);
        assert_eq!(r.w, v(0., 0., 1.));
    }

    #[test]
    fn point_beyond_segment_end_is_clamped() {
        // unclamped s = 2 -> 1; brute force over 1e4 samples agrees
        let a = point("a", v(2., 1., 0.), 0.0);
        let b = line("b", v(0., 0., 0.), v(1., 0., 0.), 0.0);
        let r = closest_points(&a, &b).unwrap();
        assert_eq!(r.s_j, 1.0);
        assert!((r.surface_distance - 2f64.sqrt()).abs() < 1e-15);
        let brute = brute_force_distance(&a, &b, 10_000);
        assert!((brute - r.surface_distance).abs() < 1e-12);
    }

    #[test]
    fn plane_above_point() {
        let a = plane("a", v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.), 0.0);
        let b = point("b", v(0.5, 0.5, 0.3), 0.1);
        let r = closest_points(&a, &b).unwrap();
        assert!((r.surface_distance - 0.2).abs() < 1e-15);
        assert!((r.u - v(0.5, 0.5, 0.0)).norm() < 1e-15);
        // dense (s,t) grid: 201 samples hit (0.5, 0.5) exactly
        let brute = brute_force_distance(&a, &b, 201);
        assert!((brute - 0.2).abs() < 1e-12);
    }

    #[test]
    fn parallel_lines_use_overlap_center() {
        let a = line("a", v(0., 0., 0.), v(2., 0., 0.), 0.0);
        let b = line("b", v(1., 1., 0.), v(2., 0., 0.), 0.0);
        let r = closest_points(&a, &b).unwrap();
        // overlap on a is s in [0.5, 1] -> center 0.75
        assert!((r.s_i - 0.75).abs() < 1e-15);
        assert!((r.s_j - 0.25).abs() < 1e-15);
        assert!((r.center_distance - 1.0).abs() < 1e-15);
    }

    #[test]
    fn long_column_against_short_parallel_probe() {
        let col = line("c", v(-0.45, -3e-18, -0.05), v(0., 7.65e-17, 1.25), 0.06);
        let probe = line("p", v(-0.45, 0.14, 0.95), v(0., 0., 0.2), 0.05);
        let r = closest_points(&col, &probe).unwrap();
        assert!((r.u.z - 1.05).abs() < 1e-9 && (r.closest_on_j().z - 1.05).abs() < 1e-9);
        assert!((r.center_distance - 0.14).abs() < 1e-12);
    }

    #[test]
    fn parallel_lines_without_overlap_take_nearest_ends() {
        let a = line("a", v(0., 0., 0.), v(1., 0., 0.), 0.0);
        let b = line("b", v(3., 1., 0.), v(1., 0., 0.), 0.0);
        let r = closest_points(&a, &b).unwrap();
        assert_eq!((r.s_i, r.s_j), (1.0, 0.0));
        assert!((r.center_distance - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn antiparallel_lines() {
        let a = line("a", v(0., 0., 0.), v(1., 0., 0.), 0.0);
        let b = line("b", v(-0.5, 0., 1.), v(-1., 0., 0.), 0.0);
        let r = closest_points(&a, &b).unwrap();
        assert_eq!((r.s_i, r.s_j), (0.0, 0.0));
        assert!((r.center_distance - (0.25f64 + 1.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn segment_piercing_rectangle() {
        let a = line("a", v(0.3, 0.4, -1.), v(0., 0., 2.), 0.05);
        let b = plane("b", v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.), 0.0);
        let r = closest_points(&a, &b).unwrap();
        assert!(r.center_distance < 1e-15);
        assert!((r.s_i - 0.5).abs() < 1e-15);
        assert!((r.s_j - 0.3).abs() < 1e-15 && (r.t_j - 0.4).abs() < 1e-15);
        assert!((r.surface_distance + 0.05).abs() < 1e-15);
    }

    #[test]
    fn segment_parallel_above_rectangle_uses_overlap_center() {
        let a = line("a", v(-1., 0.5, 0.2), v(1.5, 0., 0.), 0.0);
        let b = plane("b", v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.), 0.0);
        let r = closest_points(&a, &b).unwrap();
        // projection inside for x in [0, 0.5] -> s in [2/3, 1]
        assert!((r.s_i - 5.0 / 6.0).abs() < 1e-12);
        assert!((r.center_distance - 0.2).abs() < 1e-15);
    }

    #[test]
    fn segment_missing_rectangle_hits_edge() {
        // line crosses the plane outside the rectangle; nearest is edge x = 1
        let a = line("a", v(2., 0.5, -1.), v(0., 0., 2.), 0.0);
        let b = plane("b", v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.), 0.0);
        let r = closest_points(&a, &b).unwrap();
        assert!((r.center_distance - 1.0).abs() < 1e-15);
        assert_eq!(r.s_j, 1.0);
    }

    #[test]
    fn stacked_parallel_rectangles() {
        let a = plane("a", v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.), 0.0);
        let b = plane("b", v(0.25, 0.25, 0.5), v(1., 0., 0.), v(0., 1., 0.), 0.1);
        let r = closest_points(&a, &b).unwrap();
        assert!((r.surface_distance - 0.4).abs() < 1e-15);
    }

    #[test]
    fn crossing_rectangles_touch() {
        let a = plane("a", v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.), 0.0);
        let b = plane("b", v(0.5, -0.5, -0.5), v(0., 2., 0.), v(0., 0., 1.), 0.0);
        let r = closest_points(&a, &b).unwrap();
        assert!(r.center_distance < 1e-15);
    }

    #[test]
    fn swapped_arguments_swap_foot_points() {
        let a = line("a", v(0., 0., 0.), v(1., 0.2, 0.), 0.0);
        let b = plane("b", v(0.5, -0.5, 0.3), v(0., 1., 0.), v(1., 0., 0.5), 0.0);
        let ab = closest_points(&a, &b).unwrap();
        let ba = closest_points(&b, &a).unwrap();
        assert!((ab.center_distance - ba.center_distance).abs() < 1e-12);
        assert!((ba.u - (ab.u + ab.w)).norm() < 1e-12);
    }

    #[test]
    fn degenerate_direction_is_rejected() {
        let mut a = line("a", v(0., 0., 0.), v(1., 0., 0.), 0.0);
        a.shape.p = Vec3::zeros();
        let b = point("b", v(1., 0., 0.), 0.0);
        assert!(matches!(closest_points(&a, &b), Err(GeometryError::DegenerateSkeleton { .. })));
    }
}
