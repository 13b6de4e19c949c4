//! Higher-order Delaunay machinery: triangle orders, useful edges, the
//! fixed-edge graph `F_k` and its face decomposition.
//!
//! All circle tests go through [`in_circle_sos`], so the catalog is computed
//! for the symbolically perturbed point set and is always in general position.
//!
//! Locality: if a circle through `u` holds at most `m` points, every point
//! strictly inside it is reachable from `u` in at most `m` Delaunay hops, and
//! a chord `uv` of it needs at most `m + 1`. Candidate edges and the points
//! that can matter for their counts are therefore taken from bounded-hop
//! Delaunay balls, and every count up to the bound is exact.

use std::collections::{HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::delaunay::{delaunay_mesh, DelaunayError, Mesh, NONE};
use crate::geom::{
    circumcircle, in_circle_sos, on_open_segment, orient2d, segments_properly_intersect, Point2, Triangle,
};
use crate::weights::RefGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HodError {
    #[error(transparent)]
    Delaunay(#[from] DelaunayError),
    #[error("order {0} too large for the hop table (max 250)")]
    OrderTooLarge(usize),
}

/// Points strictly inside the circumcircle of `t` (perturbed), vertices excluded.
pub fn triangle_order(t: &Triangle, points: &[Point2]) -> usize {
    let [a, b, c] = t.vertices();
    (0..points.len()).filter(|&d| d != a && d != b && d != c && in_circle_sos(points, a, b, c, d) > 0).count()
}

/// True iff no point other than the vertices lies in the closed triangle.
pub fn triangle_is_empty(t: &Triangle, points: &[Point2]) -> bool {
    let [a, b, c] = t.vertices();
    let (pa, pb, pc) = (points[a], points[b], points[c]);
    (0..points.len()).all(|d| {
        if t.contains_vertex(d) {
            return true;
        }
        let q = points[d];
        !(orient2d(pa, pb, q) >= 0 && orient2d(pb, pc, q) >= 0 && orient2d(pc, pa, q) >= 0)
    })
}

/// Left and right defining points of the directed edge `u -> v`, by full scan.
pub fn defining_points(u: usize, v: usize, points: &[Point2]) -> (Option<usize>, Option<usize>) {
    let all: Vec<usize> = (0..points.len()).collect();
    let d = defining_in(u, v, &all, points);
    (d.s_l, d.s_r)
}

struct Defining {
    s_l: Option<usize>,
    s_r: Option<usize>,
    on_segment: bool,
}

fn defining_in(u: usize, v: usize, cand: &[usize], points: &[Point2]) -> Defining {
    let (pu, pv) = (points[u], points[v]);
    let mut d = Defining { s_l: None, s_r: None, on_segment: false };
    for &w in cand {
        if w == u || w == v {
            continue;
        }
        match orient2d(pu, pv, points[w]) {
            1 => match d.s_l {
                Some(b) if in_circle_sos(points, u, v, b, w) <= 0 => {}
                _ => d.s_l = Some(w),
            },
            -1 => match d.s_r {
                Some(b) if in_circle_sos(points, v, u, b, w) <= 0 => {}
                _ => d.s_r = Some(w),
            },
            _ => d.on_segment |= on_open_segment(pu, pv, points[w]),
        }
    }
    d
}

/// Max of the two defining-triangle orders, counting only `cand`; `None`
/// when a point lies on the open segment, when neither side has a point,
/// or when a count exceeds `cap`.
fn edge_order_in(u: usize, v: usize, cand: &[usize], points: &[Point2], cap: usize) -> Option<usize> {
    edge_order_defining(u, v, cand, points, cap).map(|(o, _)| o)
}

fn edge_order_defining(u: usize, v: usize, cand: &[usize], points: &[Point2], cap: usize) -> Option<(usize, Defining)> {
    let d = defining_in(u, v, cand, points);
    if d.on_segment || (d.s_l.is_none() && d.s_r.is_none()) {
        return None;
    }
    let (pu, pv) = (points[u], points[v]);
    let mut cl = 0;
    let mut cr = 0;
    for &w in cand {
        if w == u || w == v {
            continue;
        }
        match orient2d(pu, pv, points[w]) {
            -1 => {
                if let Some(s) = d.s_l {
                    if in_circle_sos(points, u, v, s, w) > 0 {
                        cl += 1;
                    }
                }
            }
            1 => {
                if let Some(s) = d.s_r {
                    if in_circle_sos(points, v, u, s, w) > 0 {
                        cr += 1;
                    }
                }
            }
            _ => {}
        }
        if cl > cap || cr > cap {
            return None;
        }
    }
    Some((cl.max(cr), d))
}

/// Usefulness test by full scan: both defining triangles (one for
/// hull edges) have order at most `k` and no point sits on the open segment.
pub fn is_useful_kod_edge(u: usize, v: usize, points: &[Point2], k: usize) -> bool {
    let all: Vec<usize> = (0..points.len()).collect();
    edge_order_in(u, v, &all, points, k).is_some_and(|o| o <= k)
}

/// Delaunay mesh plus bounded hop distances.
pub struct HopIndex<'a> {
    pub points: &'a [Point2],
    pub mesh: Mesh,
    pub limit: usize,
    n: usize,
    dist: Vec<u8>,
    balls: Vec<Vec<usize>>,
    vtris: Vec<Vec<usize>>,
    grid: RefGrid,
}

impl<'a> HopIndex<'a> {
    pub fn new(points: &'a [Point2], limit: usize) -> Result<Self, HodError> {
        if limit > 250 {
            return Err(HodError::OrderTooLarge(limit));
        }
        let mesh = delaunay_mesh(points)?;
        let n = points.len();
        let adj = mesh.vertex_adjacency(n);
        let mut dist = vec![u8::MAX; n * n];
        let mut balls = Vec::with_capacity(n);
        let mut queue = Vec::new();
        for s in 0..n {
            queue.clear();
            queue.push(s);
            dist[s * n + s] = 0;
            let mut head = 0;
            while head < queue.len() {
                let x = queue[head];
                head += 1;
                let dx = dist[s * n + x];
                if dx as usize == limit {
                    continue;
                }
                for &y in &adj[x] {
                    if dist[s * n + y] == u8::MAX {
                        dist[s * n + y] = dx + 1;
                        queue.push(y);
                    }
                }
            }
            balls.push(queue.clone());
        }
        let vtris = mesh.vertex_triangles(n);
        Ok(HopIndex { points, mesh, limit, n, dist, balls, vtris, grid: RefGrid::new(points) })
    }

    pub fn hops(&self, u: usize, v: usize) -> Option<usize> {
        let d = self.dist[u * self.n + v];
        (d != u8::MAX).then_some(d as usize)
    }

    /// Points within the hop limit of both `u` and `v`, without `u` and `v`.
    fn lens(&self, u: usize, v: usize) -> Vec<usize> {
        self.balls[u].iter().copied().filter(|&w| w != u && w != v && self.dist[v * self.n + w] != u8::MAX).collect()
    }

    /// Points other than `a, b, c` strictly inside the perturbed circle
    /// through the counter-clockwise triple, by grid over the whole set.
    fn circle_members(&self, a: usize, b: usize, c: usize, out: &mut Vec<usize>) {
        let p = self.points;
        out.clear();
        let Ok(cc) = circumcircle(p[a], p[b], p[c]) else {
            out.extend((0..self.n).filter(|&d| d != a && d != b && d != c && in_circle_sos(p, a, b, c, d) > 0));
            return;
        };
        let r = cc.radius_sq.sqrt() * (1.0 + 1e-9) + 1e-12;
        let mut cand = Vec::new();
        self.grid.query(
            Point2::new(cc.center.x - r, cc.center.y - r),
            Point2::new(cc.center.x + r, cc.center.y + r),
            &mut cand,
        );
        out.extend(cand.into_iter().filter(|&d| d != a && d != b && d != c && in_circle_sos(p, a, b, c, d) > 0));
    }

    /// True when the lens result for `u v` holds for the whole point set:
    /// each defining circle holds only lens points, and an empty side means
    /// `u v` is a hull edge.
    fn lens_exact(
        &self,
        u: usize,
        v: usize,
        d: &Defining,
        in_lens: &dyn Fn(usize) -> bool,
        scratch: &mut Vec<usize>,
    ) -> bool {
        for (s, a, b) in [(d.s_l, u, v), (d.s_r, v, u)] {
            match s {
                Some(s) => {
                    self.circle_members(a, b, s, scratch);
                    if scratch.iter().any(|&w| !in_lens(w)) {
                        return false;
                    }
                }
                None => {
                    if !self.is_hull_edge(u, v) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn is_hull_edge(&self, u: usize, v: usize) -> bool {
        self.vtris[u].iter().any(|&t| {
            let tr = self.mesh.tris[t];
            tr.contains(&v) && self.across(t, u, v) == NONE
        })
    }

    fn across(&self, t: usize, x: usize, y: usize) -> usize {
        let tr = self.mesh.tris[t];
        let i = (0..3).find(|&i| tr[i] != x && tr[i] != y).expect("edge of triangle");
        self.mesh.nbr[t][i]
    }

    /// Delaunay triangles whose closure meets the open segment `u v`, or
    /// `None` if the segment runs through another point.
    pub fn corridor(&self, u: usize, v: usize) -> Option<Vec<usize>> {
        let p = self.points;
        let (pu, pv) = (p[u], p[v]);
        for &t in &self.vtris[u] {
            let tr = self.mesh.tris[t];
            let r = (0..3).find(|&i| tr[i] == u).unwrap();
            let (a, b) = (tr[(r + 1) % 3], tr[(r + 2) % 3]);
            if a == v || b == v {
                let nb = self.across(t, u, v);
                return Some(if nb == NONE { vec![t] } else { vec![t, nb] });
            }
            let oa = orient2d(pu, p[a], pv);
            let ob = orient2d(pu, pv, p[b]);
            if (oa == 0 && on_open_segment(pu, pv, p[a])) || (ob == 0 && on_open_segment(pu, pv, p[b])) {
                return None;
            }
            if oa > 0 && ob > 0 {
                let mut out = vec![t];
                let (mut r, mut l, mut cur) = (a, b, t);
                loop {
                    let nx = self.across(cur, r, l);
                    if nx == NONE {
                        return None;
                    }
                    out.push(nx);
                    let nt = self.mesh.tris[nx];
                    let w = *nt.iter().find(|&&x| x != r && x != l).unwrap();
                    if w == v {
                        return Some(out);
                    }
                    match orient2d(pu, pv, p[w]) {
                        0 => return None,
                        1 => l = w,
                        _ => r = w,
                    }
                    cur = nx;
                }
            }
        }
        None
    }
}

/// Orders of every candidate edge up to `kmax`, with the smallest order of
/// any useful edge crossing it. One pass serves every `k <= kmax`.
#[derive(Debug, Clone)]
pub struct EdgeOrders {
    pub kmax: usize,
    pub n: usize,
    /// `(u, v)` with `u < v`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub order: Vec<usize>,
    /// `usize::MAX` when nothing useful (up to `kmax`) crosses the edge.
    pub cross_min: Vec<usize>,
}

impl EdgeOrders {
    pub fn useful_edges(&self, k: usize) -> Vec<(usize, usize)> {
        self.edges.iter().zip(&self.order).filter(|(_, &o)| o <= k).map(|(e, _)| *e).collect()
    }

    pub fn fixed_edges(&self, k: usize) -> FixedEdgeGraph {
        assert!(k <= self.kmax, "k above the computed range");
        let edges = (0..self.edges.len())
            .filter(|&i| self.order[i] <= k && self.cross_min[i] > k)
            .map(|i| self.edges[i])
            .collect();
        FixedEdgeGraph { k, n: self.n, edges }
    }

    pub fn order_of(&self, u: usize, v: usize) -> Option<usize> {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).ok().map(|i| self.order[i])
    }
}

pub fn edge_orders(points: &[Point2], kmax: usize) -> Result<EdgeOrders, HodError> {
    let idx = HopIndex::new(points, kmax + 1)?;
    edge_orders_with(&idx, kmax)
}

pub fn edge_orders_with(idx: &HopIndex, kmax: usize) -> Result<EdgeOrders, HodError> {
    assert!(kmax < idx.limit, "hop limit must exceed kmax");
    let points = idx.points;
    let n = points.len();
    let mut edges = Vec::new();
    let mut order = Vec::new();
    let mut corridors = Vec::new();
    let all: Vec<usize> = (0..n).collect();
    let mut stamp = vec![usize::MAX; n];
    let mut scratch = Vec::new();
    for u in 0..n {
        let mut vs: Vec<usize> = idx.balls[u].iter().copied().filter(|&v| v > u).collect();
        vs.sort_unstable();
        for v in vs {
            let lens = idx.lens(u, v);
            let Some((mut o, d)) = edge_order_defining(u, v, &lens, points, kmax) else { continue };
            let key = u * n + v;
            for &w in &lens {
                stamp[w] = key;
            }
            if !idx.lens_exact(u, v, &d, &|w| stamp[w] == key, &mut scratch) {
                match edge_order_in(u, v, &all, points, kmax) {
                    Some(full) => o = full,
                    None => continue,
                }
            }
            if let Some(c) = idx.corridor(u, v) {
                edges.push((u, v));
                order.push(o);
                corridors.push(c);
            }
        }
    }
    let mut per_tri: Vec<Vec<u32>> = vec![Vec::new(); idx.mesh.tris.len()];
    for (i, c) in corridors.iter().enumerate() {
        for &t in c {
            per_tri[t].push(i as u32);
        }
    }
    let mut cross_min = vec![usize::MAX; edges.len()];
    for list in &per_tri {
        for (x, &i) in list.iter().enumerate() {
            let (a, b) = edges[i as usize];
            for &j in &list[x + 1..] {
                let (c, d) = edges[j as usize];
                if a == c || a == d || b == c || b == d {
                    continue;
                }
                let (i, j) = (i as usize, j as usize);
                if cross_min[i] <= order[j] && cross_min[j] <= order[i] {
                    continue;
                }
                if segments_properly_intersect(points[a], points[b], points[c], points[d]) {
                    cross_min[i] = cross_min[i].min(order[j]);
                    cross_min[j] = cross_min[j].min(order[i]);
                }
            }
        }
    }
    Ok(EdgeOrders { kmax, n, edges, order, cross_min })
}

/// `F_k`: useful edges not crossed by any other useful edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedEdgeGraph {
    pub k: usize,
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl FixedEdgeGraph {
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    pub fn isolated_vertices(&self) -> Vec<usize> {
        let adj = self.adjacency();
        (0..self.n).filter(|&v| adj[v].is_empty()).collect()
    }
}

pub fn fixed_edge_graph(points: &[Point2], k: usize) -> Result<FixedEdgeGraph, HodError> {
    Ok(edge_orders(points, k)?.fixed_edges(k))
}

/// All triangles of order at most `k`.
#[derive(Debug, Clone)]
pub struct KodCatalog {
    pub k: usize,
    pub triangles: Vec<Triangle>,
    pub orders: Vec<usize>,
    /// True when no other point lies in the closed triangle.
    pub empty: Vec<bool>,
    pub useful_edges: Vec<(usize, usize)>,
    index: HashMap<Triangle, usize>,
}

impl KodCatalog {
    pub fn get(&self, t: &Triangle) -> Option<usize> {
        self.index.get(t).copied()
    }

    /// Order of an empty catalog triangle, `None` otherwise.
    pub fn usable(&self, t: &Triangle) -> Option<usize> {
        self.get(t).filter(|&i| self.empty[i]).map(|i| self.orders[i])
    }

    pub fn is_useful(&self, a: usize, b: usize) -> bool {
        self.useful_edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    fn from_parts(k: usize, mut rows: Vec<(Triangle, usize, bool)>, useful_edges: Vec<(usize, usize)>) -> Self {
        rows.sort_unstable_by_key(|r| r.0);
        rows.dedup_by_key(|r| r.0);
        let index = rows.iter().enumerate().map(|(i, r)| (r.0, i)).collect();
        KodCatalog {
            k,
            triangles: rows.iter().map(|r| r.0).collect(),
            orders: rows.iter().map(|r| r.1).collect(),
            empty: rows.iter().map(|r| r.2).collect(),
            useful_edges,
            index,
        }
    }
}

/// Catalog triangles only, via pencil-sorted candidate sides per edge.
pub fn enumerate_kod_triangles(points: &[Point2], k: usize) -> Result<KodCatalog, HodError> {
    let idx = HopIndex::new(points, k + 1)?;
    Ok(KodCatalog::from_parts(k, catalog_rows(&idx, k), Vec::new()))
}

/// Catalog triangles plus useful edges.
pub fn build_catalog(points: &[Point2], k: usize) -> Result<KodCatalog, HodError> {
    let idx = HopIndex::new(points, k + 1)?;
    let orders = edge_orders_with(&idx, k)?;
    Ok(catalog_from_index(&idx, k, &orders))
}

/// Catalog from an existing index and edge orders (`orders.kmax >= k`).
pub fn catalog_from_index(idx: &HopIndex, k: usize, orders: &EdgeOrders) -> KodCatalog {
    KodCatalog::from_parts(k, catalog_rows(idx, k), orders.useful_edges(k))
}

/// Brute-force catalog over every index triple.
pub fn brute_force_catalog(points: &[Point2], k: usize) -> KodCatalog {
    let n = points.len();
    let mut rows = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                if let Some(t) = Triangle::new(points, a, b, c) {
                    let o = triangle_order(&t, points);
                    if o <= k {
                        rows.push((t, o, triangle_is_empty(&t, points)));
                    }
                }
            }
        }
    }
    let mut useful = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if is_useful_kod_edge(a, b, points, k) {
                useful.push((a, b));
            }
        }
    }
    KodCatalog::from_parts(k, rows, useful)
}

fn catalog_rows(idx: &HopIndex, k: usize) -> Vec<(Triangle, usize, bool)> {
    let points = idx.points;
    let n = points.len();
    let mut rows = Vec::new();
    let mut scratch = Vec::new();
    for u in 0..n {
        for &v in &idx.balls[u] {
            if v <= u {
                continue;
            }
            let lens = idx.lens(u, v);
            let (pu, pv) = (points[u], points[v]);
            let mut left = Vec::new();
            let mut right = Vec::new();
            let mut on_seg = 0;
            for &w in &lens {
                match orient2d(pu, pv, points[w]) {
                    1 => left.push(w),
                    -1 => right.push(w),
                    _ => on_seg += on_open_segment(pu, pv, points[w]) as usize,
                }
            }
            if on_seg > k {
                continue;
            }
            // ascending pencil parameter: the left part of the circle grows
            left.sort_by(|&p, &q| pencil_cmp(points, u, v, p, q, true));
            right.sort_by(|&p, &q| pencil_cmp(points, u, v, p, q, false));
            for (i, &w) in left.iter().enumerate() {
                if i + on_seg > k {
                    break;
                }
                let below = right.partition_point(|&q| in_circle_sos(points, u, v, w, q) < 0);
                let o = i + (right.len() - below) + on_seg;
                if o <= k && w > v {
                    push_verified(idx, &mut rows, Triangle::from_ccw(u, v, w), k, &mut scratch);
                }
            }
            for (j, &w) in right.iter().enumerate().rev() {
                let above = right.len() - j - 1;
                if above + on_seg > k {
                    break;
                }
                let before = left.partition_point(|&p| in_circle_sos(points, v, u, w, p) > 0);
                let o = before + above + on_seg;
                if o <= k && w > v {
                    push_verified(idx, &mut rows, Triangle::from_ccw(v, u, w), k, &mut scratch);
                }
            }
        }
    }
    rows
}

/// Recounts a lens candidate over the whole set; keeps it if still of order
/// at most `k`.
fn push_verified(
    idx: &HopIndex,
    rows: &mut Vec<(Triangle, usize, bool)>,
    t: Triangle,
    k: usize,
    scratch: &mut Vec<usize>,
) {
    let [a, b, c] = t.vertices();
    idx.circle_members(a, b, c, scratch);
    if scratch.len() <= k {
        let empty = local_empty(idx.points, &t, scratch);
        rows.push((t, scratch.len(), empty));
    }
}

fn pencil_cmp(points: &[Point2], u: usize, v: usize, p: usize, q: usize, left: bool) -> std::cmp::Ordering {
    use std::cmp::Ordering::*;
    if p == q {
        return Equal;
    }
    let less = if left { in_circle_sos(points, u, v, q, p) > 0 } else { in_circle_sos(points, v, u, q, p) < 0 };
    if less {
        Less
    } else {
        Greater
    }
}

fn local_empty(points: &[Point2], t: &Triangle, cand: &[usize]) -> bool {
    let [a, b, c] = t.vertices();
    let (pa, pb, pc) = (points[a], points[b], points[c]);
    cand.iter().all(|&d| {
        if t.contains_vertex(d) {
            return true;
        }
        let q = points[d];
        !(orient2d(pa, pb, q) >= 0 && orient2d(pb, pc, q) >= 0 && orient2d(pc, pa, q) >= 0)
    })
}

/// A connected piece of `F_k` strictly inside a face.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub vertices: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Face {
    /// Counter-clockwise closed walk; vertices may repeat.
    pub boundary: Vec<usize>,
    pub interior_components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceDecomposition {
    pub faces: Vec<Face>,
    pub c_max: usize,
}

impl FaceDecomposition {
    /// Mean number of interior components per face.
    pub fn avg_components(&self) -> f64 {
        if self.faces.is_empty() {
            return 0.0;
        }
        let s: usize = self.faces.iter().map(|f| f.interior_components.len()).sum();
        s as f64 / self.faces.len() as f64
    }
}

/// Exact counter-clockwise angular order of `nbrs` around `c`, starting at
/// the positive x direction.
pub fn sort_ccw(points: &[Point2], c: usize, nbrs: &mut [usize]) {
    let pc = points[c];
    let half = |w: usize| {
        let p = points[w];
        if p.y > pc.y || (p.y == pc.y && p.x > pc.x) {
            0
        } else {
            1
        }
    };
    nbrs.sort_by(|&a, &b| {
        half(a).cmp(&half(b)).then_with(|| match orient2d(pc, points[a], points[b]) {
            1 => std::cmp::Ordering::Less,
            -1 => std::cmp::Ordering::Greater,
            _ => std::cmp::Ordering::Equal,
        })
    });
}

/// Planar walk structure of a straight-line graph.
pub(crate) struct Walks {
    pub adj: Vec<Vec<usize>>,
    pub walks: Vec<Vec<usize>>,
    /// Walk id of each directed edge.
    pub walk_of: HashMap<(usize, usize), usize>,
}

pub(crate) fn trace_walks(points: &[Point2], n: usize, edges: &[(usize, usize)]) -> Walks {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    for (v, list) in adj.iter_mut().enumerate() {
        sort_ccw(points, v, list);
    }
    let pos: HashMap<(usize, usize), usize> =
        adj.iter().enumerate().flat_map(|(v, l)| l.iter().enumerate().map(move |(i, &w)| ((v, w), i))).collect();
    let mut walk_of: HashMap<(usize, usize), usize> = HashMap::with_capacity(pos.len());
    let mut walks = Vec::new();
    for v in 0..n {
        for &w in &adj[v] {
            if walk_of.contains_key(&(v, w)) {
                continue;
            }
            let id = walks.len();
            let mut walk = Vec::new();
            let (mut a, mut b) = (v, w);
            while !walk_of.contains_key(&(a, b)) {
                walk_of.insert((a, b), id);
                walk.push(a);
                let l = &adj[b];
                let i = pos[&(b, a)];
                let c = l[(i + l.len() - 1) % l.len()];
                a = b;
                b = c;
            }
            walks.push(walk);
        }
    }
    Walks { adj, walks, walk_of }
}

fn lex_less(p: Point2, q: Point2) -> bool {
    p.x < q.x || (p.x == q.x && p.y < q.y)
}

/// Walk id of the unbounded side of the component whose lexicographically
/// smallest vertex is `v` (`v` must have an edge).
pub(crate) fn outer_walk(points: &[Point2], w: &Walks, v: usize) -> usize {
    let pv = points[v];
    let l = &w.adj[v];
    let mut best = l[0];
    for &x in &l[1..] {
        if orient2d(pv, points[best], points[x]) > 0 {
            best = x;
        }
    }
    w.walk_of[&(v, best)]
}

/// Winding number of the closed walk around `p` (exact; `p` not on the walk).
pub fn winding_number(points: &[Point2], walk: &[usize], p: Point2) -> i32 {
    let mut wn = 0;
    for i in 0..walk.len() {
        let a = points[walk[i]];
        let b = points[walk[(i + 1) % walk.len()]];
        if a.y <= p.y {
            if b.y > p.y && orient2d(a, b, p) > 0 {
                wn += 1;
            }
        } else if b.y <= p.y && orient2d(a, b, p) < 0 {
            wn -= 1;
        }
    }
    wn
}

pub fn walk_area(points: &[Point2], walk: &[usize]) -> f64 {
    let mut s = 0.0;
    for i in 0..walk.len() {
        let a = points[walk[i]];
        let b = points[walk[(i + 1) % walk.len()]];
        s += a.x * b.y - a.y * b.x;
    }
    s / 2.0
}

pub fn decompose_faces(f: &FixedEdgeGraph, points: &[Point2]) -> FaceDecomposition {
    let n = f.n;
    let w = trace_walks(points, n, &f.edges);
    // components by union-find
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let nx = p[y];
            p[y] = r;
            y = nx;
        }
        r
    }
    for &(a, b) in &f.edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let mut comp_id = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        if comp_id[r] == usize::MAX {
            comp_id[r] = comps.len();
            comps.push(Vec::new());
        }
        comp_id[v] = comp_id[r];
        comps[comp_id[v]].push(v);
    }
    let rep: Vec<usize> = comps
        .iter()
        .map(|c| c.iter().copied().fold(c[0], |b, x| if lex_less(points[x], points[b]) { x } else { b }))
        .collect();
    let global_min = (0..n).fold(0, |b, x| if lex_less(points[x], points[b]) { x } else { b });
    let main = comp_id[global_min];
    let mut not_face = HashSet::new();
    for &v in &rep {
        if !w.adj[v].is_empty() {
            not_face.insert(outer_walk(points, &w, v));
        }
    }
    let walk_comp: Vec<usize> = w.walks.iter().map(|wk| comp_id[wk[0]]).collect();
    let bounded: Vec<usize> = (0..w.walks.len()).filter(|i| !not_face.contains(i)).collect();
    let areas: Vec<f64> = w.walks.iter().map(|wk| walk_area(points, wk)).collect();
    let mut faces: Vec<Face> =
        bounded.iter().map(|&i| Face { boundary: w.walks[i].clone(), interior_components: Vec::new() }).collect();
    let bbox: Vec<[f64; 4]> = bounded
        .iter()
        .map(|&i| {
            let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
            for &v in &w.walks[i] {
                let p = points[v];
                b = [b[0].min(p.x), b[1].min(p.y), b[2].max(p.x), b[3].max(p.y)];
            }
            b
        })
        .collect();
    let mut comp_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); comps.len()];
    for &(a, b) in &f.edges {
        comp_edges[comp_id[a]].push((a, b));
    }
    for (c, verts) in comps.iter().enumerate() {
        if c == main {
            continue;
        }
        let p = points[rep[c]];
        let mut best: Option<usize> = None;
        for (fi, &wi) in bounded.iter().enumerate() {
            let b = bbox[fi];
            if walk_comp[wi] == c || p.x < b[0] || p.y < b[1] || p.x > b[2] || p.y > b[3] {
                continue;
            }
            if winding_number(points, &w.walks[wi], p) != 0 && best.is_none_or(|bi| areas[wi] < areas[bounded[bi]]) {
                best = Some(fi);
            }
        }
        let fi = best.expect("component outside every bounded face");
        faces[fi].interior_components.push(Component { vertices: verts.clone(), edges: comp_edges[c].clone() });
    }
    let c_max = faces.iter().map(|f| f.interior_components.len()).max().unwrap_or(0);
    FaceDecomposition { faces, c_max }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delaunay::{convex_hull, delaunay_triangulate};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
        v.iter().map(|&p| p.into()).collect()
    }

    fn random(seed: u64, n: usize) -> Vec<Point2> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Point2::new(rng.gen(), rng.gen())).collect()
    }

    #[test]
    fn triangle_order_examples() {
        let t = Triangle::from_ccw(0, 1, 2);
        let a = pts(&[(0., 0.), (4., 0.), (2., 3.), (2., 4.)]);
        assert_eq!(triangle_order(&t, &a), 0);
        let b = pts(&[(0., 0.), (4., 0.), (2., 3.), (2., 2.)]);
        assert_eq!(triangle_order(&t, &b), 1);
        let p = random(3, 30);
        for tr in delaunay_triangulate(&p).unwrap().triangles {
            assert_eq!(triangle_order(&tr, &p), 0);
        }
    }

    #[test]
    fn defining_points_examples() {
        let q = pts(&[(0., 0.), (2., 0.), (2., 2.), (0., 3.)]);
        assert_eq!(defining_points(0, 2, &q), (Some(3), Some(1)));
        // hull edge with the exterior on its left
        assert_eq!(defining_points(1, 0, &q).0, None);
        let p = random(5, 25);
        let d = delaunay_triangulate(&p).unwrap();
        for &(a, b) in &d.edges {
            let (l, r) = defining_points(a, b, &p);
            for s in [l, r].into_iter().flatten() {
                assert!(d.triangles.contains(&Triangle::new(&p, a, b, s).unwrap()));
            }
        }
    }

    #[test]
    fn quadrilateral_usefulness_and_f1() {
        let q = pts(&[(0., 0.), (2., 0.), (2.2, 2.), (0., 3.)]);
        assert!(is_useful_kod_edge(0, 2, &q, 1));
        assert!(is_useful_kod_edge(1, 3, &q, 1));
        let f1 = fixed_edge_graph(&q, 1).unwrap();
        assert_eq!(f1.edges, vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
        let f0 = fixed_edge_graph(&q, 0).unwrap();
        assert_eq!(f0.edges, delaunay_triangulate(&q).unwrap().edges);
    }

    #[test]
    fn edge_over_fan_not_useful() {
        // u=0, v=1; points 2,3,4 below the chord all share endpoint 5's fan
        let p = pts(&[(-3., 0.), (3., 0.), (-1., -0.9), (0., -1.), (1., -0.9), (0., -6.), (0., 3.)]);
        let (l, r) = defining_points(0, 1, &p);
        assert_eq!(l, Some(6));
        let t = Triangle::new(&p, 0, 1, 6).unwrap();
        assert_eq!(triangle_order(&t, &p), 3);
        assert!(r.is_some());
        assert!(!is_useful_kod_edge(0, 1, &p, 2));
        assert!(is_useful_kod_edge(0, 1, &p, 3));
    }

    #[test]
    fn catalog_k0_is_delaunay() {
        let p = random(8, 40);
        let c = build_catalog(&p, 0).unwrap();
        assert_eq!(c.triangles, delaunay_triangulate(&p).unwrap().triangles);
    }

    #[test]
    fn catalog_k_large_is_everything() {
        let p = random(9, 9);
        let c = build_catalog(&p, 9).unwrap();
        assert_eq!(c.triangles.len(), 84);
        assert_eq!(c.orders.iter().copied().max(), Some(6));
    }

    #[test]
    fn decomposition_of_triangulation_and_isolated_vertex() {
        let p = random(12, 20);
        let d = delaunay_triangulate(&p).unwrap();
        let f = FixedEdgeGraph { k: 0, n: 20, edges: d.edges.clone() };
        let fd = decompose_faces(&f, &p);
        assert_eq!(fd.faces.len(), d.triangles.len());
        assert!(fd.faces.iter().all(|f| f.boundary.len() == 3));
        assert_eq!(fd.c_max, 0);
        let sq = pts(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.), (0.4, 0.55)]);
        let f = FixedEdgeGraph { k: 9, n: 5, edges: vec![(0, 1), (0, 3), (1, 2), (2, 3)] };
        let fd = decompose_faces(&f, &sq);
        assert_eq!(fd.faces.len(), 1);
        assert_eq!(fd.c_max, 1);
        assert_eq!(fd.faces[0].interior_components[0].vertices, vec![4]);
    }

    #[test]
    fn dangling_edge_walked_twice_and_nested_components() {
        // square hull, a dangling edge from corner 0, a triangle island with
        // an isolated point inside it, and a free edge beside the island
        let p = pts(&[
            (0., 0.),
            (10., 0.),
            (10., 10.),
            (0., 10.),
            (2., 2.),
            (5., 4.),
            (8., 4.),
            (6.5, 7.),
            (6.5, 5.),
            (2., 8.),
            (3., 6.),
        ]);
        let edges = vec![(0, 1), (0, 3), (0, 4), (1, 2), (2, 3), (5, 6), (5, 7), (6, 7), (9, 10)];
        let f = FixedEdgeGraph { k: 9, n: p.len(), edges };
        let fd = decompose_faces(&f, &p);
        assert_eq!(fd.faces.len(), 2);
        let outer = fd.faces.iter().find(|f| f.boundary.contains(&0)).unwrap();
        assert_eq!(outer.boundary.iter().filter(|&&v| v == 0).count(), 2);
        assert_eq!(outer.interior_components.len(), 2);
        let island = fd.faces.iter().find(|f| f.boundary.contains(&5)).unwrap();
        assert_eq!(island.interior_components.len(), 1);
        assert_eq!(island.interior_components[0].vertices, vec![8]);
        assert_eq!(fd.c_max, 2);
    }

    #[test]
    fn fast_orders_match_full_scan() {
        for seed in 0..12 {
            let p = random(seed, 40);
            let eo = edge_orders(&p, 4).unwrap();
            for k in 0..=4 {
                let useful: Vec<(usize, usize)> = (0..40)
                    .flat_map(|a| (a + 1..40).map(move |b| (a, b)))
                    .filter(|&(a, b)| is_useful_kod_edge(a, b, &p, k))
                    .collect();
                assert_eq!(eo.useful_edges(k), useful, "seed {seed} k {k}");
                let f = eo.fixed_edges(k);
                for &e in &useful {
                    let crossed =
                        useful.iter().any(|&g| g != e && segments_properly_intersect(p[e.0], p[e.1], p[g.0], p[g.1]));
                    assert_eq!(f.contains(e.0, e.1), !crossed);
                }
            }
        }
    }

    #[test]
    fn fast_catalog_matches_brute_force() {
        for seed in 0..10 {
            let p = random(100 + seed, 14);
            for k in 0..4 {
                let fast = build_catalog(&p, k).unwrap();
                let slow = brute_force_catalog(&p, k);
                assert_eq!(fast.triangles, slow.triangles);
                assert_eq!(fast.orders, slow.orders);
                assert_eq!(fast.empty, slow.empty);
                assert_eq!(fast.useful_edges, slow.useful_edges);
            }
        }
    }

    #[test]
    fn long_hull_chords_are_not_useful() {
        // nearly antipodal hull points a few hops apart through the rim
        let points = crate::randgen::gen_type1(500, 1.0, crate::randgen::sample_seed(42, 1));
        let eo = edge_orders(&points, 7).unwrap();
        for k in [3, 7] {
            let fast: HashSet<(usize, usize)> = eo.useful_edges(k).into_iter().collect();
            for a in 0..points.len() {
                for b in a + 1..points.len() {
                    assert_eq!(fast.contains(&(a, b)), is_useful_kod_edge(a, b, &points, k), "{a}-{b} k={k}");
                }
            }
        }
        assert!(eo.useful_edges(3).iter().all(|&(a, b)| points[a].dist_sq(&points[b]) < 1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn nesting_and_monotone_usefulness(seed in any::<u64>(), n in 6usize..60) {
            let p = random(seed, n);
            let eo = edge_orders(&p, 5).unwrap();
            let hull = convex_hull(&p).unwrap();
            for k in 0..5 {
                let a = eo.fixed_edges(k);
                let b = eo.fixed_edges(k + 1);
                prop_assert!(b.edges.iter().all(|e| a.contains(e.0, e.1)));
                for i in 0..hull.len() {
                    let (x, y) = (hull[i], hull[(i + 1) % hull.len()]);
                    prop_assert!(b.contains(x, y));
                }
                let ua: HashSet<_> = eo.useful_edges(k).into_iter().collect();
                prop_assert!(ua.iter().all(|e| eo.order_of(e.0, e.1).unwrap() <= k + 1));
            }
            prop_assert!(eo.fixed_edges(1).is_connected());
            prop_assert!(eo.fixed_edges(2).isolated_vertices().is_empty());
        }

        #[test]
        fn catalog_small_sets_equal_brute(seed in any::<u64>(), n in 4usize..9, k in 0usize..4) {
            let p = random(seed, n);
            let fast = build_catalog(&p, k).unwrap();
            let slow = brute_force_catalog(&p, k);
            prop_assert_eq!(fast.triangles, slow.triangles);
            prop_assert_eq!(fast.useful_edges, slow.useful_edges);
        }
    }
}
