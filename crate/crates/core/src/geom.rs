//! Exact planar predicates and primitive constructions.
//!
//! Signs of `orient2d` and `in_circle` are exact for every finite `f64`
//! input (adaptive expansions from the `robust` crate). Real data that hits a
//! degenerate configuration is resolved with [`in_circle_sos`], a symbolic
//! perturbation of the paraboloid lift in which a lower point index carries a
//! larger perturbation.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("points are collinear")]
    CollinearInput,
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist_sq(&self, o: &Point2) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        dx * dx + dy * dy
    }

    fn rb(&self) -> robust::Coord<f64> {
        robust::Coord { x: self.x, y: self.y }
    }
}

impl From<(f64, f64)> for Point2 {
    fn from(p: (f64, f64)) -> Self {
        Point2::new(p.0, p.1)
    }
}

/// Rejects NaN or infinite coordinates.
pub fn check_finite(points: &[Point2]) -> Result<(), GeomError> {
    match points.iter().position(|p| !p.is_finite()) {
        Some(i) => Err(GeomError::NonFinite(i)),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point2,
    pub radius_sq: f64,
}

/// Directed edge between two point indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrientedEdge {
    pub u: usize,
    pub v: usize,
}

impl OrientedEdge {
    pub fn new(u: usize, v: usize) -> Self {
        assert_ne!(u, v, "degenerate edge");
        OrientedEdge { u, v }
    }

    pub fn reversed(&self) -> Self {
        OrientedEdge { u: self.v, v: self.u }
    }

    /// Direction from the lower to the higher index.
    pub fn canonical(&self) -> Self {
        if self.u < self.v {
            *self
        } else {
            self.reversed()
        }
    }
}

/// Triangle over point indices, counter-clockwise, rotated so `a` is the
/// smallest index. Two equal vertex sets therefore compare equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triangle {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl Triangle {
    /// Builds the canonical counter-clockwise triangle, or `None` when the
    /// three points are collinear or indices repeat.
    pub fn new(points: &[Point2], a: usize, b: usize, c: usize) -> Option<Triangle> {
        if a == b || b == c || a == c {
            return None;
        }
        let (a, b, c) = match orient2d(points[a], points[b], points[c]) {
            1 => (a, b, c),
            -1 => (a, c, b),
            _ => return None,
        };
        Some(Self::rotate_min_first(a, b, c))
    }

    /// Wraps indices already known to be counter-clockwise.
    pub fn from_ccw(a: usize, b: usize, c: usize) -> Triangle {
        Self::rotate_min_first(a, b, c)
    }

    fn rotate_min_first(a: usize, b: usize, c: usize) -> Triangle {
        if a < b && a < c {
            Triangle { a, b, c }
        } else if b < a && b < c {
            Triangle { a: b, b: c, c: a }
        } else {
            Triangle { a: c, b: a, c: b }
        }
    }

    pub fn vertices(&self) -> [usize; 3] {
        [self.a, self.b, self.c]
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        self.a == v || self.b == v || self.c == v
    }

    /// Counter-clockwise directed edges (a,b), (b,c), (c,a).
    pub fn edges(&self) -> [OrientedEdge; 3] {
        [
            OrientedEdge { u: self.a, v: self.b },
            OrientedEdge { u: self.b, v: self.c },
            OrientedEdge { u: self.c, v: self.a },
        ]
    }

    pub fn sorted(&self) -> [usize; 3] {
        let mut s = self.vertices();
        s.sort_unstable();
        s
    }
}

/// +1 if `c` lies strictly left of the directed line a->b, -1 if right, 0 if collinear.
pub fn orient2d(a: Point2, b: Point2, c: Point2) -> i8 {
    let d = robust::orient2d(a.rb(), b.rb(), c.rb());
    sign(d)
}

/// +1 if `d` is strictly inside the circle through a, b, c (given
/// counter-clockwise), 0 on it, -1 outside.
pub fn in_circle(a: Point2, b: Point2, c: Point2, d: Point2) -> i8 {
    sign(robust::incircle(a.rb(), b.rb(), c.rb(), d.rb()))
}

fn sign(d: f64) -> i8 {
    if d > 0.0 {
        1
    } else if d < 0.0 {
        -1
    } else {
        0
    }
}

/// `in_circle` with the symbolic-perturbation tie-break. `(a, b, c)` must be
/// counter-clockwise. Returns 0 only when all four points are collinear.
pub fn in_circle_sos(points: &[Point2], a: usize, b: usize, c: usize, d: usize) -> i8 {
    let (pa, pb, pc, pd) = (points[a], points[b], points[c], points[d]);
    let raw = in_circle(pa, pb, pc, pd);
    if raw != 0 {
        return raw;
    }
    // Coefficient of each lift perturbation in the incircle determinant.
    let mut terms =
        [(a, orient2d(pd, pb, pc)), (b, orient2d(pa, pd, pc)), (c, orient2d(pa, pb, pd)), (d, -orient2d(pa, pb, pc))];
    terms.sort_unstable_by_key(|t| t.0);
    terms.iter().map(|t| t.1).find(|&s| s != 0).unwrap_or(0)
}

/// Circumcircle in floating point. Use [`exact::circumcircle`] when the
/// center itself must be exact.
pub fn circumcircle(a: Point2, b: Point2, c: Point2) -> Result<Circle, GeomError> {
    if orient2d(a, b, c) == 0 {
        return Err(GeomError::CollinearInput);
    }
    let bx = b.x - a.x;
    let by = b.y - a.y;
    let cx = c.x - a.x;
    let cy = c.y - a.y;
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    Ok(Circle { center: Point2::new(a.x + ux, a.y + uy), radius_sq: ux * ux + uy * uy })
}

/// True iff the open segments cross at a point that is an endpoint of
/// neither; collinear segments count when their interiors overlap.
pub fn segments_properly_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let o1 = orient2d(p1, p2, q1);
    let o2 = orient2d(p1, p2, q2);
    let o3 = orient2d(q1, q2, p1);
    let o4 = orient2d(q1, q2, p2);
    if o1 == 0 && o2 == 0 {
        // collinear: compare parameter intervals along the dominant axis
        let key = |p: Point2| {
            if (p2.x - p1.x).abs() >= (p2.y - p1.y).abs() {
                p.x
            } else {
                p.y
            }
        };
        let (a0, a1) = minmax(key(p1), key(p2));
        let (b0, b1) = minmax(key(q1), key(q2));
        return a0.max(b0) < a1.min(b1);
    }
    o1 * o2 < 0 && o3 * o4 < 0
}

fn minmax(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// True iff `p` lies strictly inside the segment a-b.
pub fn on_open_segment(a: Point2, b: Point2, p: Point2) -> bool {
    if orient2d(a, b, p) != 0 || p == a || p == b {
        return false;
    }
    let (x0, x1) = minmax(a.x, b.x);
    let (y0, y1) = minmax(a.y, b.y);
    p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1
}

/// Where a point sits relative to a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Interior,
    /// On the open edge, given as the counter-clockwise directed edge of the triangle.
    OnEdge(OrientedEdge),
    AtVertex(usize),
    Outside,
}

pub fn point_in_triangle(p: Point2, t: &Triangle, points: &[Point2]) -> Location {
    let v = t.vertices();
    match locate_in_corners(p, [points[v[0]], points[v[1]], points[v[2]]]) {
        LocalLocation::Interior => Location::Interior,
        LocalLocation::Outside => Location::Outside,
        LocalLocation::AtVertex(i) => Location::AtVertex(v[i]),
        LocalLocation::OnEdge(i) => Location::OnEdge(OrientedEdge { u: v[i], v: v[(i + 1) % 3] }),
    }
}

/// Location against raw counter-clockwise corners; edge `i` runs from corner `i` to `i+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalLocation {
    Interior,
    OnEdge(usize),
    AtVertex(usize),
    Outside,
}

pub fn locate_in_corners(p: Point2, c: [Point2; 3]) -> LocalLocation {
    for (i, q) in c.iter().enumerate() {
        if *q == p {
            return LocalLocation::AtVertex(i);
        }
    }
    let s = [orient2d(c[0], c[1], p), orient2d(c[1], c[2], p), orient2d(c[2], c[0], p)];
    if s.iter().any(|&x| x < 0) {
        return LocalLocation::Outside;
    }
    match s.iter().position(|&x| x == 0) {
        Some(i) => LocalLocation::OnEdge(i),
        None => LocalLocation::Interior,
    }
}

/// Degeneracies found by [`validate_general_position`].
#[derive(Debug, Clone, Default, Serialize)]
pub struct GeneralPositionReport {
    pub collinear: Vec<[usize; 3]>,
    pub cocircular: Vec<[usize; 4]>,
    /// False when the point count exceeded the exhaustive threshold and triples
    /// and quadruples were sampled instead.
    pub exhaustive: bool,
}

impl GeneralPositionReport {
    pub fn is_clean(&self) -> bool {
        self.collinear.is_empty() && self.cocircular.is_empty()
    }
}

pub const EXHAUSTIVE_GP_LIMIT: usize = 60;
const GP_SAMPLES: usize = 200_000;

/// Lists collinear triples and cocircular quadruples. Exhaustive up to
/// [`EXHAUSTIVE_GP_LIMIT`] points, sampled (fixed seed) above.
pub fn validate_general_position(points: &[Point2]) -> GeneralPositionReport {
    let n = points.len();
    let mut rep = GeneralPositionReport { exhaustive: n <= EXHAUSTIVE_GP_LIMIT, ..Default::default() };
    let cocirc = |i: usize, j: usize, k: usize, l: usize| {
        let (a, b, c) = (points[i], points[j], points[k]);
        match orient2d(a, b, c) {
            0 => false,
            s => in_circle(a, b, c, points[l]) * s == 0,
        }
    };
    if rep.exhaustive {
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    if orient2d(points[i], points[j], points[k]) == 0 {
                        rep.collinear.push([i, j, k]);
                    }
                    for l in k + 1..n {
                        if cocirc(i, j, k, l) {
                            rep.cocircular.push([i, j, k, l]);
                        }
                    }
                }
            }
        }
        return rep;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6750);
    let mut seen3 = std::collections::HashSet::new();
    let mut seen4 = std::collections::HashSet::new();
    for _ in 0..GP_SAMPLES {
        let mut q = [0usize; 4];
        for slot in q.iter_mut() {
            *slot = rng.gen_range(0..n);
        }
        q.sort_unstable();
        if q[0] == q[1] || q[1] == q[2] || q[2] == q[3] {
            continue;
        }
        let t = [q[0], q[1], q[2]];
        if orient2d(points[t[0]], points[t[1]], points[t[2]]) == 0 && seen3.insert(t) {
            rep.collinear.push(t);
        }
        if cocirc(q[0], q[1], q[2], q[3]) && seen4.insert(q) {
            rep.cocircular.push(q);
        }
    }
    rep
}

/// Exact rational geometry for gadget instances and oracles.
pub mod exact {
    use super::*;

    pub type Q = BigRational;

    #[derive(Debug, Clone, PartialEq, Eq, Hash)]
    pub struct QPoint {
        pub x: Q,
        pub y: Q,
    }

    #[derive(Debug, Clone, PartialEq, Eq)]
    pub struct QCircle {
        pub center: QPoint,
        pub radius_sq: Q,
    }

    pub fn q(n: i64) -> Q {
        Q::from_integer(BigInt::from(n))
    }

    pub fn qf(n: i64, d: i64) -> Q {
        Q::new(BigInt::from(n), BigInt::from(d))
    }

    impl QPoint {
        pub fn new(x: Q, y: Q) -> Self {
            QPoint { x, y }
        }

        pub fn int(x: i64, y: i64) -> Self {
            QPoint { x: q(x), y: q(y) }
        }

        /// Every finite double is a dyadic rational, so this is lossless.
        pub fn from_point(p: Point2) -> Self {
            QPoint { x: Q::from_float(p.x).expect("finite"), y: Q::from_float(p.y).expect("finite") }
        }

        pub fn dist_sq(&self, o: &QPoint) -> Q {
            let dx = &self.x - &o.x;
            let dy = &self.y - &o.y;
            &dx * &dx + &dy * &dy
        }
    }

    pub fn orient(a: &QPoint, b: &QPoint, c: &QPoint) -> i8 {
        let d = (&b.x - &a.x) * (&c.y - &a.y) - (&b.y - &a.y) * (&c.x - &a.x);
        if d.is_zero() {
            0
        } else if d.is_positive() {
            1
        } else {
            -1
        }
    }

    pub fn circumcircle(a: &QPoint, b: &QPoint, c: &QPoint) -> Result<QCircle, GeomError> {
        if orient(a, b, c) == 0 {
            return Err(GeomError::CollinearInput);
        }
        let bx = &b.x - &a.x;
        let by = &b.y - &a.y;
        let cx = &c.x - &a.x;
        let cy = &c.y - &a.y;
        let d = (&bx * &cy - &by * &cx) * q(2);
        let b2 = &bx * &bx + &by * &by;
        let c2 = &cx * &cx + &cy * &cy;
        let ux = (&cy * &b2 - &by * &c2) / &d;
        let uy = (&bx * &c2 - &cx * &b2) / &d;
        let radius_sq = &ux * &ux + &uy * &uy;
        Ok(QCircle { center: QPoint::new(&a.x + ux, &a.y + uy), radius_sq })
    }

    /// Sign of `radius_sq - |p - center|^2`: +1 inside, 0 on, -1 outside.
    pub fn circle_side(c: &QCircle, p: &QPoint) -> i8 {
        let d = &c.radius_sq - c.center.dist_sq(p);
        if d.is_zero() {
            0
        } else if d.is_positive() {
            1
        } else {
            -1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::exact::{circle_side, q, qf, QPoint};
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn orient_examples() {
        assert_eq!(orient2d(p(0., 0.), p(1., 0.), p(0., 1.)), 1);
        assert_eq!(orient2d(p(0., 0.), p(1., 0.), p(2., 0.)), 0);
        assert_eq!(orient2d(p(0., 0.), p(1., 0.), p(0., -1.)), -1);
    }

    #[test]
    fn in_circle_examples() {
        let (a, b, c) = (p(0., 0.), p(2., 0.), p(0., 2.));
        assert_eq!(in_circle(a, b, c, p(1., 1.)), 1);
        assert_eq!(in_circle(a, b, c, p(2., 2.)), 0);
        assert_eq!(in_circle(a, b, c, p(5., 5.)), -1);
    }

    #[test]
    fn orient_exact_near_degenerate() {
        // classic failure case for naive doubles
        let a = p(0.5, 0.5);
        let b = p(12.0, 12.0);
        let c = p(24.0, 24.0);
        assert_eq!(orient2d(a, b, c), 0);
        let c2 = p(24.0, 24.000000000000004);
        assert_eq!(orient2d(a, b, c2), 1);
    }

    #[test]
    fn circumcircle_examples() {
        let c = circumcircle(p(0., 0.), p(2., 0.), p(0., 2.)).unwrap();
        assert_eq!(c.center, p(1., 1.));
        assert_eq!(c.radius_sq, 2.0);
        assert_eq!(circumcircle(p(0., 0.), p(1., 0.), p(2., 0.)), Err(GeomError::CollinearInput));
        let c = circumcircle(p(0., 0.), p(4., 0.), p(2., 3.)).unwrap();
        assert!((c.center.y - 5.0 / 6.0).abs() < 1e-15);
        assert!((c.radius_sq - 169.0 / 36.0).abs() < 1e-14);
    }

    #[test]
    fn exact_circumcircle_frozen() {
        let c = exact::circumcircle(&QPoint::int(0, 0), &QPoint::int(4, 0), &QPoint::int(2, 3)).unwrap();
        assert_eq!(c.center, QPoint::new(q(2), qf(5, 6)));
        assert_eq!(c.radius_sq, qf(169, 36));
    }

    #[test]
    fn segment_examples() {
        assert!(segments_properly_intersect(p(0., 0.), p(2., 2.), p(0., 2.), p(2., 0.)));
        assert!(!segments_properly_intersect(p(0., 0.), p(1., 1.), p(1., 1.), p(2., 0.)));
        assert!(!segments_properly_intersect(p(0., 0.), p(2., 0.), p(0., 1.), p(2., 1.)));
        // collinear overlap of interiors
        assert!(segments_properly_intersect(p(0., 0.), p(2., 0.), p(1., 0.), p(3., 0.)));
        assert!(!segments_properly_intersect(p(0., 0.), p(1., 0.), p(1., 0.), p(3., 0.)));
        // T-junction touches at an endpoint of one segment
        assert!(!segments_properly_intersect(p(0., 0.), p(2., 0.), p(1., 0.), p(1., 3.)));
    }

    #[test]
    fn point_in_triangle_examples() {
        let pts = vec![p(0., 0.), p(3., 0.), p(0., 3.)];
        let t = Triangle::new(&pts, 0, 1, 2).unwrap();
        assert_eq!(point_in_triangle(p(1., 1.), &t, &pts), Location::Interior);
        assert_eq!(point_in_triangle(p(1.5, 0.), &t, &pts), Location::OnEdge(OrientedEdge::new(0, 1)));
        assert_eq!(point_in_triangle(p(5., 5.), &t, &pts), Location::Outside);
        assert_eq!(point_in_triangle(p(0., 3.), &t, &pts), Location::AtVertex(2));
    }

    #[test]
    fn triangle_canonical_form() {
        let pts = vec![p(0., 0.), p(3., 0.), p(0., 3.)];
        let t1 = Triangle::new(&pts, 2, 1, 0).unwrap();
        let t2 = Triangle::new(&pts, 1, 2, 0).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(t1.vertices(), [0, 1, 2]);
        assert!(Triangle::new(&[p(0., 0.), p(1., 1.), p(2., 2.)], 0, 1, 2).is_none());
    }

    #[test]
    fn general_position_examples() {
        let sq = vec![p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)];
        let r = validate_general_position(&sq);
        assert_eq!(r.cocircular, vec![[0, 1, 2, 3]]);
        assert!(r.collinear.is_empty());
        let col = vec![p(0., 0.), p(1., 0.), p(2., 0.), p(0., 5.)];
        let r = validate_general_position(&col);
        assert_eq!(r.collinear, vec![[0, 1, 2]]);
        let clean = vec![p(0., 0.), p(4., 0.), p(2., 3.), p(2., 1.)];
        assert!(validate_general_position(&clean).is_clean());
    }

    #[test]
    fn sos_resolves_square() {
        let sq = vec![p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)];
        let s1 = in_circle_sos(&sq, 0, 1, 2, 3);
        assert_ne!(s1, 0);
        // both sides of diagonal 0-2 agree, and exactly one diagonal is legal
        assert_eq!(in_circle_sos(&sq, 0, 2, 3, 1), s1);
        let s2 = in_circle_sos(&sq, 1, 2, 3, 0);
        assert_ne!(s2, 0);
        assert_eq!(in_circle_sos(&sq, 1, 3, 0, 2), s2);
        assert_ne!(s1 > 0, s2 > 0);
    }

    fn small() -> impl Strategy<Value = f64> {
        (-20i32..20).prop_map(|v| v as f64 * 0.5)
    }

    fn pt() -> impl Strategy<Value = Point2> {
        (small(), small()).prop_map(|(x, y)| Point2::new(x, y))
    }

    proptest! {
        #[test]
        fn orient_antisymmetric(a in pt(), b in pt(), c in pt()) {
            prop_assert_eq!(orient2d(a, b, c), -orient2d(b, a, c));
        }

        #[test]
        fn in_circle_permutation_rules(a in pt(), b in pt(), c in pt(), d in pt()) {
            let base = in_circle(a, b, c, d);
            prop_assert_eq!(in_circle(b, c, a, d), base);
            prop_assert_eq!(in_circle(c, a, b, d), base);
            prop_assert_eq!(in_circle(b, a, c, d), -base);
        }

        #[test]
        fn in_circle_agrees_with_exact_circle(a in pt(), b in pt(), c in pt(), d in pt()) {
            let s = orient2d(a, b, c);
            prop_assume!(s > 0);
            let cc = exact::circumcircle(&QPoint::from_point(a), &QPoint::from_point(b), &QPoint::from_point(c)).unwrap();
            prop_assert_eq!(in_circle(a, b, c, d), circle_side(&cc, &QPoint::from_point(d)));
        }

        #[test]
        fn proper_intersection_symmetric(a in pt(), b in pt(), c in pt(), d in pt()) {
            prop_assert_eq!(segments_properly_intersect(a, b, c, d), segments_properly_intersect(c, d, a, b));
            prop_assert_eq!(segments_properly_intersect(a, b, c, d), segments_properly_intersect(b, a, d, c));
        }

        #[test]
        fn sos_never_zero_for_proper_triangles(a in pt(), b in pt(), c in pt(), d in pt()) {
            let pts = vec![a, b, c, d];
            prop_assume!(orient2d(a, b, c) > 0);
            prop_assume!(d != a && d != b && d != c);
            let s = in_circle_sos(&pts, 0, 1, 2, 3);
            prop_assert_ne!(s, 0);
            let raw = in_circle(a, b, c, d);
            if raw != 0 { prop_assert_eq!(s, raw); }
        }
    }
}
