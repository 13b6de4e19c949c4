//! Reference-point ownership and decomposable triangle weights.
//!
//! A reference point strictly inside a triangle belongs to it. A point on an
//! interior edge belongs to the triangle left of the edge directed from its
//! lower to its higher point index; on a hull edge it belongs to the only
//! triangle there. Points that coincide with a triangulation point are
//! ignored. Ownership depends only on the triangle, so one table serves every
//! triangulation built from the catalog.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delaunay::{hull_boundary, DelaunayError, Triangulation};
use crate::geom::{point_in_triangle, Location, Point2, Triangle};
use crate::hod::KodCatalog;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightsError {
    #[error("point lies outside the triangle")]
    OutsideTriangle,
    #[error("{0} values for {1} points")]
    LengthMismatch(usize, usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Delaunay(#[from] DelaunayError),
}

/// Triangulation points with measurements and reference points with values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub points: Vec<Point2>,
    pub f: Vec<f64>,
    pub refs: Vec<Point2>,
    pub h: Vec<f64>,
}

impl Instance {
    pub fn new(points: Vec<Point2>, f: Vec<f64>, refs: Vec<Point2>, h: Vec<f64>) -> Result<Self, WeightsError> {
        if points.len() != f.len() {
            return Err(WeightsError::LengthMismatch(f.len(), points.len()));
        }
        if refs.len() != h.len() {
            return Err(WeightsError::LengthMismatch(h.len(), refs.len()));
        }
        let bad = points.iter().position(|p| !p.is_finite()).or_else(|| f.iter().position(|v| !v.is_finite()));
        if let Some(i) = bad {
            return Err(WeightsError::NonFinite(i));
        }
        if let Some(i) = refs.iter().position(|p| !p.is_finite()).or_else(|| h.iter().position(|v| !v.is_finite())) {
            return Err(WeightsError::NonFinite(i));
        }
        Ok(Instance { points, f, refs, h })
    }

    /// Keeps only the references inside or on the hull of the points.
    pub fn clip_to_hull(&self) -> Result<Instance, WeightsError> {
        let hull = hull_boundary(&self.points)?;
        let keep: Vec<usize> = (0..self.refs.len()).filter(|&i| in_hull(&self.points, &hull, self.refs[i])).collect();
        Ok(Instance {
            points: self.points.clone(),
            f: self.f.clone(),
            refs: keep.iter().map(|&i| self.refs[i]).collect(),
            h: keep.iter().map(|&i| self.h[i]).collect(),
        })
    }
}

/// True iff `p` is inside or on the counter-clockwise hull cycle.
pub fn in_hull(points: &[Point2], hull: &[usize], p: Point2) -> bool {
    (0..hull.len()).all(|i| crate::geom::orient2d(points[hull[i]], points[hull[(i + 1) % hull.len()]], p) >= 0)
}

/// Barycentric linear interpolation of `f` over `t` at `r`.
pub fn interpolate(points: &[Point2], t: &Triangle, f: &[f64], r: Point2) -> Result<f64, WeightsError> {
    if point_in_triangle(r, t, points) == Location::Outside {
        return Err(WeightsError::OutsideTriangle);
    }
    Ok(interpolate_unchecked(points, t, f, r))
}

fn interpolate_unchecked(points: &[Point2], t: &Triangle, f: &[f64], r: Point2) -> f64 {
    let [a, b, c] = t.vertices();
    let (pa, pb, pc) = (points[a], points[b], points[c]);
    if r == pa {
        return f[a];
    }
    if r == pb {
        return f[b];
    }
    if r == pc {
        return f[c];
    }
    let area = (pb.x - pa.x) * (pc.y - pa.y) - (pb.y - pa.y) * (pc.x - pa.x);
    let la = ((pb.x - r.x) * (pc.y - r.y) - (pb.y - r.y) * (pc.x - r.x)) / area;
    let lb = ((pc.x - r.x) * (pa.y - r.y) - (pc.y - r.y) * (pa.x - r.x)) / area;
    let lc = 1.0 - la - lb;
    la * f[a] + lb * f[b] + lc * f[c]
}

/// Undirected hull boundary edges, collinear pieces included.
pub fn hull_edge_set(points: &[Point2]) -> Result<HashSet<(usize, usize)>, DelaunayError> {
    let h = hull_boundary(points)?;
    Ok((0..h.len()).map(|i| (h[i].min(h[(i + 1) % h.len()]), h[i].max(h[(i + 1) % h.len()]))).collect())
}

/// Ownership rule for a single triangle.
pub fn owns(points: &[Point2], hull_edges: &HashSet<(usize, usize)>, t: &Triangle, r: Point2) -> bool {
    match point_in_triangle(r, t, points) {
        Location::Interior => true,
        Location::OnEdge(e) => e.u < e.v || hull_edges.contains(&(e.v, e.u)),
        Location::AtVertex(_) | Location::Outside => false,
    }
}

/// Uniform bucket grid over reference points.
pub struct RefGrid {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl RefGrid {
    pub fn new(refs: &[Point2]) -> RefGrid {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in refs {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        if refs.is_empty() {
            return RefGrid { x0: 0.0, y0: 0.0, cell: 1.0, nx: 1, ny: 1, buckets: vec![Vec::new()] };
        }
        let span = (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
        let side = (refs.len() as f64).sqrt().ceil().max(1.0);
        let cell = span / side;
        let nx = ((x1 - x0) / cell).floor() as usize + 1;
        let ny = ((y1 - y0) / cell).floor() as usize + 1;
        let mut g = RefGrid { x0, y0, cell, nx, ny, buckets: vec![Vec::new(); nx * ny] };
        for (i, p) in refs.iter().enumerate() {
            let (cx, cy) = g.cell_of(p.x, p.y);
            g.buckets[cy * nx + cx].push(i as u32);
        }
        g
    }

    fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let cx = ((x - self.x0) / self.cell).floor().clamp(0.0, (self.nx - 1) as f64) as usize;
        let cy = ((y - self.y0) / self.cell).floor().clamp(0.0, (self.ny - 1) as f64) as usize;
        (cx, cy)
    }

    /// Candidate references in the bounding box (a superset; callers test exactly).
    pub fn query(&self, lo: Point2, hi: Point2, out: &mut Vec<usize>) {
        out.clear();
        let (ax, ay) = self.cell_of(lo.x, lo.y);
        let (bx, by) = self.cell_of(hi.x, hi.y);
        for cy in ay..=by {
            for cx in ax..=bx {
                out.extend(self.buckets[cy * self.nx + cx].iter().map(|&i| i as usize));
            }
        }
    }
}

/// Weight and owned references for every catalog triangle.
#[derive(Debug, Clone)]
pub struct WeightTable {
    pub weights: Vec<f64>,
    pub refs: Vec<Vec<usize>>,
}

impl WeightTable {
    pub fn weight(&self, catalog: &KodCatalog, t: &Triangle) -> Option<f64> {
        catalog.get(t).map(|i| self.weights[i])
    }
}

/// Refs owned by `t` together with their squared residual sum.
pub fn triangle_weight(
    inst: &Instance,
    hull_edges: &HashSet<(usize, usize)>,
    grid: &RefGrid,
    t: &Triangle,
    scratch: &mut Vec<usize>,
) -> (f64, Vec<usize>) {
    let p = &inst.points;
    let [a, b, c] = t.vertices();
    let lo = Point2::new(p[a].x.min(p[b].x).min(p[c].x), p[a].y.min(p[b].y).min(p[c].y));
    let hi = Point2::new(p[a].x.max(p[b].x).max(p[c].x), p[a].y.max(p[b].y).max(p[c].y));
    grid.query(lo, hi, scratch);
    scratch.sort_unstable();
    let mut w = 0.0;
    let mut owned = Vec::new();
    for &i in scratch.iter() {
        let r = inst.refs[i];
        if owns(p, hull_edges, t, r) {
            let d = interpolate_unchecked(p, t, &inst.f, r) - inst.h[i];
            w += d * d;
            owned.push(i);
        }
    }
    (w, owned)
}

pub fn precompute_weights(catalog: &KodCatalog, inst: &Instance) -> Result<WeightTable, WeightsError> {
    let hull_edges = hull_edge_set(&inst.points)?;
    let grid = RefGrid::new(&inst.refs);
    let mut scratch = Vec::new();
    let mut weights = Vec::with_capacity(catalog.triangles.len());
    let mut refs = Vec::with_capacity(catalog.triangles.len());
    for t in &catalog.triangles {
        let (w, r) = triangle_weight(inst, &hull_edges, &grid, t, &mut scratch);
        weights.push(w);
        refs.push(r);
    }
    Ok(WeightTable { weights, refs })
}

/// `Err_D` evaluated per reference point: locate the owner among the
/// triangulation's triangles and sum squared residuals. References outside
/// the triangulation are skipped.
pub fn triangulation_error(inst: &Instance, tri: &Triangulation) -> Result<f64, WeightsError> {
    Ok(residuals(inst, &tri.triangles)?.iter().map(|r| r.1 * r.1).sum())
}

/// `(ref index, s_D(r) - h(r))` for every reference with an owner in `tris`.
pub fn residuals(inst: &Instance, tris: &[Triangle]) -> Result<Vec<(usize, f64)>, WeightsError> {
    let p = &inst.points;
    let hull_edges = hull_edge_set(p)?;
    let mut out = Vec::new();
    for (i, &r) in inst.refs.iter().enumerate() {
        if p.contains(&r) {
            continue;
        }
        let mut owner = None;
        for t in tris {
            match point_in_triangle(r, t, p) {
                Location::Interior => {
                    owner = Some(*t);
                    break;
                }
                Location::OnEdge(e) => {
                    let left_of_canonical = e.u < e.v;
                    if left_of_canonical || hull_edges.contains(&(e.v.min(e.u), e.u.max(e.v))) {
                        owner = Some(*t);
                        break;
                    }
                }
                _ => {}
            }
        }
        if let Some(t) = owner {
            out.push((i, interpolate_unchecked(p, &t, &inst.f, r) - inst.h[i]));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct WeightRow {
    tri_a: usize,
    tri_b: usize,
    tri_c: usize,
    weight: f64,
    ref_count: usize,
}

pub fn write_weights_csv<W: std::io::Write>(catalog: &KodCatalog, table: &WeightTable, w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    for (i, t) in catalog.triangles.iter().enumerate() {
        wr.serialize(WeightRow {
            tri_a: t.a,
            tri_b: t.b,
            tri_c: t.c,
            weight: table.weights[i],
            ref_count: table.refs[i].len(),
        })?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hod::brute_force_catalog;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn interpolate_examples() {
        let pts = vec![p(0., 0.), p(2., 0.), p(0., 2.)];
        let t = Triangle::from_ccw(0, 1, 2);
        let f = [0.0, 2.0, 4.0];
        assert_eq!(interpolate(&pts, &t, &f, p(0., 0.)).unwrap(), 0.0);
        assert!((interpolate(&pts, &t, &f, p(1., 1.)).unwrap() - 3.0).abs() < 1e-12);
        assert!((interpolate(&pts, &t, &f, p(2. / 3., 2. / 3.)).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(interpolate(&pts, &t, &f, p(3., 3.)), Err(WeightsError::OutsideTriangle));
    }

    #[test]
    fn ownership_examples() {
        // two triangles sharing edge 1-2
        let pts = vec![p(0., 0.), p(2., 0.), p(0., 2.), p(2., 2.)];
        let hull = hull_edge_set(&pts).unwrap();
        let left = Triangle::from_ccw(0, 1, 2);
        let right = Triangle::from_ccw(1, 3, 2);
        let mid = p(1., 1.);
        // left of 1->2 is the triangle containing 0
        assert!(owns(&pts, &hull, &left, mid));
        assert!(!owns(&pts, &hull, &right, mid));
        assert!(owns(&pts, &hull, &left, p(0.5, 0.5)));
        assert!(!owns(&pts, &hull, &left, p(0., 0.)));
        // hull edge 0-1 seen from the triangle where it runs 0->1
        assert!(owns(&pts, &hull, &left, p(1., 0.)));
        // hull edge 3-2 where the triangle runs 3->2
        assert!(owns(&pts, &hull, &right, p(1., 2.)));
    }

    #[test]
    fn weight_examples() {
        let pts = vec![p(0., 0.), p(1., 0.), p(0., 1.)];
        let inst = Instance::new(pts.clone(), vec![0.; 3], vec![p(0.25, 0.25)], vec![1.0]).unwrap();
        let cat = brute_force_catalog(&pts, 0);
        let w = precompute_weights(&cat, &inst).unwrap();
        assert_eq!(w.weights, vec![1.0]);
        assert_eq!(w.refs, vec![vec![0]]);
    }

    #[test]
    fn affine_data_gives_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Point2> = (0..9).map(|_| p(rng.gen(), rng.gen())).collect();
        let plane = |q: Point2| 3.0 * q.x - 2.0 * q.y + 0.5;
        let refs: Vec<Point2> = (0..40).map(|_| p(rng.gen(), rng.gen())).collect();
        let inst = Instance::new(
            pts.clone(),
            pts.iter().map(|&q| plane(q)).collect(),
            refs.clone(),
            refs.iter().map(|&q| plane(q)).collect(),
        )
        .unwrap()
        .clip_to_hull()
        .unwrap();
        let cat = brute_force_catalog(&pts, 9);
        let w = precompute_weights(&cat, &inst).unwrap();
        assert!(w.weights.iter().all(|&x| x < 1e-20));
    }

    #[test]
    fn grid_query_covers_bbox() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let refs: Vec<Point2> = (0..500).map(|_| p(rng.gen(), rng.gen())).collect();
        let g = RefGrid::new(&refs);
        let mut out = Vec::new();
        g.query(p(0.2, 0.3), p(0.4, 0.5), &mut out);
        for (i, r) in refs.iter().enumerate() {
            if r.x >= 0.2 && r.x <= 0.4 && r.y >= 0.3 && r.y <= 0.5 {
                assert!(out.contains(&i));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn interpolation_reproduces_affine(seed in any::<u64>(), a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Point2> = (0..3).map(|_| p(rng.gen(), rng.gen())).collect();
            prop_assume!(crate::geom::orient2d(pts[0], pts[1], pts[2]) != 0);
            let t = Triangle::new(&pts, 0, 1, 2).unwrap();
            let f: Vec<f64> = pts.iter().map(|q| a * q.x + b * q.y + c).collect();
            let (u, v): (f64, f64) = (rng.gen(), rng.gen());
            let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
            let r = p(pts[0].x + u * (pts[1].x - pts[0].x) + v * (pts[2].x - pts[0].x),
                      pts[0].y + u * (pts[1].y - pts[0].y) + v * (pts[2].y - pts[0].y));
            let s = interpolate_unchecked(&pts, &t, &f, r);
            prop_assert!((s - (a * r.x + b * r.y + c)).abs() < 1e-8);
        }

        /// Refs are placed on lattice points so many sit exactly on edges and vertices.
        #[test]
        fn decomposability_with_refs_on_edges(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts: Vec<Point2> = Vec::new();
            while pts.len() < 6 {
                let q = p(rng.gen_range(0..5) as f64, rng.gen_range(0..5) as f64);
                if !pts.contains(&q) { pts.push(q); }
            }
            prop_assume!(crate::delaunay::convex_hull(&pts).is_ok());
            let mut refs = Vec::new();
            for x in 0..9 { for y in 0..9 { refs.push(p(x as f64 * 0.5, y as f64 * 0.5)); } }
            let h: Vec<f64> = refs.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f: Vec<f64> = pts.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
            let inst = Instance::new(pts.clone(), f, refs, h).unwrap().clip_to_hull().unwrap();
            let cat = brute_force_catalog(&pts, 6);
            let table = precompute_weights(&cat, &inst).unwrap();
            let mut count = 0;
            crate::enumerate::enumerate_triangulations(&pts, &|_t: &Triangle| true, 100_000, &mut |tris: &[Triangle]| {
                let sum: f64 = tris.iter().map(|t| table.weights[cat.get(t).unwrap()]).sum();
                let d = Triangulation::from_triangles(pts.clone(), tris.iter().copied());
                let direct = triangulation_error(&inst, &d).unwrap();
                assert!((sum - direct).abs() < 1e-9, "{sum} vs {direct}");
                let owned: usize = tris.iter().map(|t| table.refs[cat.get(t).unwrap()].len()).sum();
                let expected = inst.refs.iter().filter(|r| !pts.contains(r)).count();
                assert_eq!(owned, expected);
                count += 1;
                true
            }).unwrap();
            prop_assert!(count >= 1);
        }
    }
}
