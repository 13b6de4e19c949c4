//! Delaunay triangulation, convex hulls and the `Triangulation` value type.
//!
//! Construction is a lexicographic sweep: points are inserted in sorted order,
//! so each new point is outside the current hull and only sees a contiguous
//! chain of hull edges. Lawson flips with [`in_circle_sos`] restore the empty
//! circle property after every insertion.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{in_circle_sos, on_open_segment, orient2d, segments_properly_intersect, Point2, Triangle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DelaunayError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("all points are collinear")]
    AllCollinear,
    #[error("points {0} and {1} coincide")]
    DuplicatePoint(usize, usize),
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
}

/// A triangulation over indexed points.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    pub points: Vec<Point2>,
    /// Undirected edges `(i, j)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Canonical triangles, sorted.
    pub triangles: Vec<Triangle>,
    pub total_error: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct TriangulationJson {
    points: Vec<[f64; 2]>,
    edges: Vec<[usize; 2]>,
    triangles: Vec<[usize; 3]>,
    error: Option<f64>,
}

impl Triangulation {
    /// Builds the edge list from a triangle list. Triangles are canonicalized.
    pub fn from_triangles(points: Vec<Point2>, tris: impl IntoIterator<Item = Triangle>) -> Self {
        let mut triangles: Vec<Triangle> = tris.into_iter().collect();
        triangles.sort_unstable();
        triangles.dedup();
        let mut edges: Vec<(usize, usize)> =
            triangles.iter().flat_map(|t| t.edges()).map(|e| (e.u.min(e.v), e.u.max(e.v))).collect();
        edges.sort_unstable();
        edges.dedup();
        Triangulation { points, edges, triangles, total_error: None }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let doc = TriangulationJson {
            points: self.points.iter().map(|p| [p.x, p.y]).collect(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            triangles: self.triangles.iter().map(|t| t.vertices()).collect(),
            error: self.total_error,
        };
        serde_json::to_value(doc).expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, serde_json::Error> {
        let doc: TriangulationJson = serde_json::from_value(v.clone())?;
        let points: Vec<Point2> = doc.points.iter().map(|p| Point2::new(p[0], p[1])).collect();
        let tris = doc.triangles.iter().map(|t| Triangle::from_ccw(t[0], t[1], t[2]));
        let mut t = Triangulation::from_triangles(points, tris);
        t.total_error = doc.error;
        Ok(t)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    /// Checks every structural invariant exactly: non-crossing edges, no point
    /// on an open edge or inside a triangle, Euler counts for maximality, and
    /// triangle/edge consistency.
    pub fn validate(&self) -> Result<(), String> {
        let pts = &self.points;
        let n = pts.len();
        for t in &self.triangles {
            let [a, b, c] = t.vertices();
            if orient2d(pts[a], pts[b], pts[c]) <= 0 {
                return Err(format!("triangle {:?} not counter-clockwise", t));
            }
            for e in t.edges() {
                if !self.has_edge(e.u, e.v) {
                    return Err(format!("triangle edge {:?} missing", e));
                }
            }
        }
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            for &(c, d) in &self.edges[i + 1..] {
                if segments_properly_intersect(pts[a], pts[b], pts[c], pts[d]) {
                    return Err(format!("edges ({a},{b}) and ({c},{d}) cross"));
                }
            }
            if let Some(p) = (0..n).find(|&p| on_open_segment(pts[a], pts[b], pts[p])) {
                return Err(format!("point {p} lies on edge ({a},{b})"));
            }
        }
        let hb = hull_boundary(pts).map_err(|e| e.to_string())?.len();
        if self.edges.len() != 3 * n - hb - 3 {
            return Err(format!("edge count {} != {}", self.edges.len(), 3 * n - hb - 3));
        }
        if self.triangles.len() != 2 * n - hb - 2 {
            return Err(format!("triangle count {} != {}", self.triangles.len(), 2 * n - hb - 2));
        }
        for t in &self.triangles {
            let [a, b, c] = t.vertices();
            for p in 0..n {
                if t.contains_vertex(p) {
                    continue;
                }
                let q = pts[p];
                if orient2d(pts[a], pts[b], q) > 0 && orient2d(pts[b], pts[c], q) > 0 && orient2d(pts[c], pts[a], q) > 0
                {
                    return Err(format!("point {p} inside triangle {:?}", t));
                }
            }
        }
        Ok(())
    }
}

/// Triangle adjacency: `nbr[t][i]` is the triangle across the edge opposite
/// vertex `i` of `tris[t]`, or `NONE` on the hull.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub tris: Vec<[usize; 3]>,
    pub nbr: Vec<[usize; 3]>,
}

pub const NONE: usize = usize::MAX;

impl Mesh {
    pub fn from_triangles(tris: Vec<[usize; 3]>) -> Mesh {
        let mut half: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(tris.len() * 3);
        for (ti, t) in tris.iter().enumerate() {
            for i in 0..3 {
                half.insert((t[(i + 1) % 3], t[(i + 2) % 3]), (ti, i));
            }
        }
        let mut nbr = vec![[NONE; 3]; tris.len()];
        for (ti, t) in tris.iter().enumerate() {
            for i in 0..3 {
                if let Some(&(tj, _)) = half.get(&(t[(i + 2) % 3], t[(i + 1) % 3])) {
                    nbr[ti][i] = tj;
                }
            }
        }
        Mesh { tris, nbr }
    }

    /// Sorted neighbor lists per vertex.
    pub fn vertex_adjacency(&self, n: usize) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); n];
        for t in &self.tris {
            for i in 0..3 {
                adj[t[i]].push(t[(i + 1) % 3]);
                adj[t[(i + 1) % 3]].push(t[i]);
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Incident triangles per vertex.
    pub fn vertex_triangles(&self, n: usize) -> Vec<Vec<usize>> {
        let mut vt = vec![Vec::new(); n];
        for (ti, t) in self.tris.iter().enumerate() {
            for &v in t {
                vt[v].push(ti);
            }
        }
        vt
    }
}

fn check_input(points: &[Point2]) -> Result<Vec<usize>, DelaunayError> {
    if points.len() < 3 {
        return Err(DelaunayError::TooFewPoints(points.len()));
    }
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(DelaunayError::NonFinite(i));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lex(points[a], points[b]).then(a.cmp(&b)));
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            return Err(DelaunayError::DuplicatePoint(w[0].min(w[1]), w[0].max(w[1])));
        }
    }
    Ok(order)
}

fn lex(a: Point2, b: Point2) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

struct Builder<'a> {
    pts: &'a [Point2],
    tris: Vec<[usize; 3]>,
    alive: Vec<bool>,
    half: HashMap<(usize, usize), usize>,
}

impl<'a> Builder<'a> {
    fn add(&mut self, a: usize, b: usize, c: usize) -> usize {
        debug_assert!(orient2d(self.pts[a], self.pts[b], self.pts[c]) > 0);
        let id = self.tris.len();
        self.tris.push([a, b, c]);
        self.alive.push(true);
        self.half.insert((a, b), id);
        self.half.insert((b, c), id);
        self.half.insert((c, a), id);
        id
    }

    fn remove(&mut self, t: usize) {
        let [a, b, c] = self.tris[t];
        self.alive[t] = false;
        for e in [(a, b), (b, c), (c, a)] {
            if self.half.get(&e) == Some(&t) {
                self.half.remove(&e);
            }
        }
    }

    fn apex(&self, t: usize, u: usize, v: usize) -> usize {
        let tr = self.tris[t];
        *tr.iter().find(|&&x| x != u && x != v).expect("apex")
    }

    /// Lawson flips until every edge on the stack is locally Delaunay.
    fn legalize(&mut self, mut stack: Vec<(usize, usize)>) {
        while let Some((u, v)) = stack.pop() {
            let (Some(&t1), Some(&t2)) = (self.half.get(&(u, v)), self.half.get(&(v, u))) else {
                continue;
            };
            let x = self.apex(t1, u, v);
            let y = self.apex(t2, v, u);
            // t1 = (u, v, x) counter-clockwise
            if in_circle_sos(self.pts, u, v, x, y) <= 0 {
                continue;
            }
            self.remove(t1);
            self.remove(t2);
            self.add(u, y, x);
            self.add(y, v, x);
            stack.extend([(u, y), (y, v), (v, x), (x, u)]);
        }
    }

    fn live(&self) -> Vec<[usize; 3]> {
        self.tris.iter().zip(&self.alive).filter(|(_, &a)| a).map(|(t, _)| *t).collect()
    }
}

/// Delaunay triangulation as a raw counter-clockwise triangle list.
pub fn delaunay_mesh(points: &[Point2]) -> Result<Mesh, DelaunayError> {
    let order = check_input(points)?;
    let n = points.len();
    let p0 = points[order[0]];
    let p1 = points[order[1]];
    let m = (2..n).find(|&m| orient2d(p0, p1, points[order[m]]) != 0).ok_or(DelaunayError::AllCollinear)?;
    let q = order[m];
    let mut b = Builder {
        pts: points,
        tris: Vec::with_capacity(2 * n),
        alive: Vec::new(),
        half: HashMap::with_capacity(6 * n),
    };
    let left = orient2d(p0, p1, points[q]) > 0;
    let mut next = vec![NONE; n];
    let mut prev = vec![NONE; n];
    let chain = &order[..m];
    for w in chain.windows(2) {
        if left {
            b.add(w[0], w[1], q);
        } else {
            b.add(w[1], w[0], q);
        }
    }
    let mut cycle: Vec<usize> = chain.to_vec();
    if !left {
        cycle.reverse();
    }
    cycle.push(q);
    for i in 0..cycle.len() {
        let a = cycle[i];
        let c = cycle[(i + 1) % cycle.len()];
        next[a] = c;
        prev[c] = a;
    }
    let mut last = q;
    for &p in &order[m + 1..] {
        let pp = points[p];
        let visible = |a: usize, nx: &[usize]| orient2d(points[a], points[nx[a]], pp) < 0;
        let start = if visible(last, &next) {
            last
        } else if visible(prev[last], &next) {
            prev[last]
        } else {
            let mut v = next[last];
            while !visible(v, &next) {
                v = next[v];
                assert!(v != last, "no visible hull edge");
            }
            v
        };
        let mut s = start;
        while visible(prev[s], &next) {
            s = prev[s];
        }
        let mut e = s;
        let mut stack = Vec::new();
        while visible(e, &next) {
            let f = next[e];
            b.add(f, e, p);
            stack.push((e, f));
            e = f;
        }
        let mut v = next[s];
        while v != e {
            let nv = next[v];
            next[v] = NONE;
            prev[v] = NONE;
            v = nv;
        }
        next[s] = p;
        prev[p] = s;
        next[p] = e;
        prev[e] = p;
        b.legalize(stack);
        last = p;
    }
    let all: Vec<(usize, usize)> = b.half.keys().copied().filter(|&(u, v)| u < v).collect();
    b.legalize(all);
    Ok(Mesh::from_triangles(b.live()))
}

pub fn delaunay_triangulate(points: &[Point2]) -> Result<Triangulation, DelaunayError> {
    let mesh = delaunay_mesh(points)?;
    let tris = mesh.tris.iter().map(|t| Triangle::from_ccw(t[0], t[1], t[2]));
    Ok(Triangulation::from_triangles(points.to_vec(), tris))
}

/// Strictly convex hull, counter-clockwise from the lexicographically
/// smallest point. Collinear boundary points are left out.
pub fn convex_hull(points: &[Point2]) -> Result<Vec<usize>, DelaunayError> {
    monotone_chain(points, true)
}

/// Every point on the hull boundary, collinear ones included, counter-clockwise.
pub fn hull_boundary(points: &[Point2]) -> Result<Vec<usize>, DelaunayError> {
    monotone_chain(points, false)
}

fn monotone_chain(points: &[Point2], strict: bool) -> Result<Vec<usize>, DelaunayError> {
    let order = check_input(points)?;
    let bad = |o: i8| if strict { o <= 0 } else { o < 0 };
    let mut lower: Vec<usize> = Vec::new();
    for &i in &order {
        while lower.len() >= 2
            && bad(orient2d(points[lower[lower.len() - 2]], points[lower[lower.len() - 1]], points[i]))
        {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in order.iter().rev() {
        while upper.len() >= 2
            && bad(orient2d(points[upper[upper.len() - 2]], points[upper[upper.len() - 1]], points[i]))
        {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    let hull_area_zero = lower.len() < 3
        || (0..lower.len())
            .all(|i| orient2d(points[lower[0]], points[lower[i]], points[lower[(i + 1) % lower.len()]]) == 0);
    if hull_area_zero {
        return Err(DelaunayError::AllCollinear);
    }
    Ok(lower)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::in_circle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
        v.iter().map(|&p| p.into()).collect()
    }

    #[test]
    fn single_triangle() {
        let p = pts(&[(0., 0.), (1., 0.), (0., 1.)]);
        let t = delaunay_triangulate(&p).unwrap();
        assert_eq!(t.triangles, vec![Triangle::from_ccw(0, 1, 2)]);
        assert_eq!(t.edges.len(), 3);
    }

    #[test]
    fn fan_around_inner_point() {
        let p = pts(&[(0., 0.), (4., 0.), (2., 3.), (2., 1.)]);
        let t = delaunay_triangulate(&p).unwrap();
        assert_eq!(t.triangles.len(), 3);
        assert!(t.triangles.iter().all(|tr| tr.contains_vertex(3)));
        t.validate().unwrap();
    }

    #[test]
    fn collinear_rejected() {
        let p = pts(&[(0., 0.), (1., 0.), (2., 0.), (3., 0.)]);
        assert_eq!(delaunay_triangulate(&p).unwrap_err(), DelaunayError::AllCollinear);
        assert_eq!(convex_hull(&p).unwrap_err(), DelaunayError::AllCollinear);
    }

    #[test]
    fn duplicate_rejected() {
        let p = pts(&[(0., 0.), (1., 0.), (0., 1.), (1., 0.)]);
        assert_eq!(delaunay_triangulate(&p).unwrap_err(), DelaunayError::DuplicatePoint(1, 3));
    }

    #[test]
    fn hull_examples() {
        let sq = pts(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.), (0.5, 0.5)]);
        assert_eq!(convex_hull(&sq).unwrap(), vec![0, 1, 2, 3]);
        let tri = pts(&[(0., 1.), (1., 0.), (0., 0.)]);
        assert_eq!(convex_hull(&tri).unwrap(), vec![2, 1, 0]);
        let p = pts(&[(0., 0.), (4., 0.), (2., 3.), (2., 1.)]);
        assert_eq!(convex_hull(&p).unwrap(), vec![0, 1, 2]);
        let c = pts(&[(0., 0.), (1., 0.), (2., 0.), (1., 2.)]);
        assert_eq!(convex_hull(&c).unwrap(), vec![0, 2, 3]);
        assert_eq!(hull_boundary(&c).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn collinear_prefix_and_hull_points_get_edges() {
        let p = pts(&[(0., 0.), (0., 1.), (0., 2.), (0., 3.), (2., 1.5), (1., 5.)]);
        let t = delaunay_triangulate(&p).unwrap();
        t.validate().unwrap();
        assert!(t.has_edge(0, 1) && t.has_edge(1, 2) && t.has_edge(2, 3));
    }

    #[test]
    fn cocircular_grid_is_resolved() {
        let mut p = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                p.push(Point2::new(i as f64, j as f64));
            }
        }
        let t = delaunay_triangulate(&p).unwrap();
        t.validate().unwrap();
        assert_eq!(t.triangles.len(), 32);
    }

    /// Independent oracle: flip any non-locally-Delaunay edge of a fan
    /// triangulation until none is left.
    fn flip_fixpoint(p: &[Point2]) -> Vec<Triangle> {
        let hull = convex_hull(p).unwrap();
        let mut tris: Vec<[usize; 3]> = Vec::new();
        for i in 1..hull.len() - 1 {
            tris.push([hull[0], hull[i], hull[i + 1]]);
        }
        for v in 0..p.len() {
            if hull.contains(&v) {
                continue;
            }
            let ti = tris
                .iter()
                .position(|t| (0..3).all(|i| orient2d(p[t[i]], p[t[(i + 1) % 3]], p[v]) > 0))
                .expect("general position");
            let [a, b, c] = tris.swap_remove(ti);
            tris.extend([[a, b, v], [b, c, v], [c, a, v]]);
        }
        loop {
            let mut changed = false;
            'outer: for i in 0..tris.len() {
                for j in 0..tris.len() {
                    for e in 0..3 {
                        let (u, v) = (tris[i][e], tris[i][(e + 1) % 3]);
                        let x = tris[i][(e + 2) % 3];
                        if let Some(f) = (0..3).find(|&f| tris[j][f] == v && tris[j][(f + 1) % 3] == u) {
                            let y = tris[j][(f + 2) % 3];
                            if in_circle(p[u], p[v], p[x], p[y]) > 0 {
                                tris[i] = [u, y, x];
                                tris[j] = [y, v, x];
                                changed = true;
                                break 'outer;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut out: Vec<Triangle> = tris.iter().map(|t| Triangle::from_ccw(t[0], t[1], t[2])).collect();
        out.sort_unstable();
        out
    }

    #[test]
    fn matches_flip_oracle_small_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.gen_range(3..=8);
            let p: Vec<Point2> = (0..n).map(|_| Point2::new(rng.gen(), rng.gen())).collect();
            let t = delaunay_triangulate(&p).unwrap();
            assert_eq!(t.triangles, flip_fixpoint(&p));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn empty_circle_and_euler(seed in any::<u64>(), n in 3usize..80) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p: Vec<Point2> = (0..n).map(|_| Point2::new(rng.gen(), rng.gen())).collect();
            let t = delaunay_triangulate(&p).unwrap();
            for tr in &t.triangles {
                let [a, b, c] = tr.vertices();
                for d in 0..n {
                    if !tr.contains_vertex(d) {
                        prop_assert!(in_circle(p[a], p[b], p[c], p[d]) <= 0);
                    }
                }
            }
            let h = convex_hull(&p).unwrap().len();
            prop_assert_eq!(t.triangles.len(), 2 * n - h - 2);
            prop_assert_eq!(t.edges.len(), 3 * n - h - 3);
            prop_assert!(t.validate().is_ok());
        }

        #[test]
        fn integer_lattice_inputs_stay_valid(seed in any::<u64>(), n in 3usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p: Vec<Point2> = Vec::new();
            while p.len() < n {
                let q = Point2::new(rng.gen_range(0..6) as f64, rng.gen_range(0..6) as f64);
                if !p.contains(&q) { p.push(q); }
                if p.len() == 36 { break; }
            }
            if let Ok(t) = delaunay_triangulate(&p) {
                prop_assert!(t.validate().is_ok());
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let p = pts(&[(0., 0.), (4., 0.), (2., 3.), (2., 1.)]);
        let mut t = delaunay_triangulate(&p).unwrap();
        t.total_error = Some(1.5);
        let j = t.to_json();
        assert!(j.get("points").is_some() && j.get("error").is_some());
        assert_eq!(Triangulation::from_json(&j).unwrap(), t);
    }
}
