//! Exhaustive triangulation enumeration for small point sets.
//!
//! Advancing front: the open directed edge with the smallest index pair is
//! always closed first, so every triangulation is produced exactly once.

use std::collections::HashSet;

use thiserror::Error;

use crate::delaunay::{hull_boundary, DelaunayError};
use crate::geom::{orient2d, segments_properly_intersect, Point2, Triangle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnumError {
    #[error("{n} points exceed the enumeration cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error(transparent)]
    Delaunay(#[from] DelaunayError),
}

/// Triangle admission test used by the enumerator.
pub type TriFilter<'a> = &'a dyn Fn(&Triangle) -> bool;

/// Visits every triangulation whose triangles all pass `tri_ok`. The visitor
/// returns `false` to stop early. Returns the number of triangulations visited.
pub fn enumerate_triangulations(
    points: &[Point2],
    tri_ok: TriFilter,
    cap: usize,
    visit: &mut dyn FnMut(&[Triangle]) -> bool,
) -> Result<usize, EnumError> {
    enumerate_restricted(points, tri_ok, &|_, _| true, cap, visit)
}

/// As [`enumerate_triangulations`], with every edge also passing `edge_ok`.
pub fn enumerate_restricted(
    points: &[Point2],
    tri_ok: TriFilter,
    edge_ok: &dyn Fn(usize, usize) -> bool,
    cap: usize,
    visit: &mut dyn FnMut(&[Triangle]) -> bool,
) -> Result<usize, EnumError> {
    let n = points.len();
    if n > cap {
        return Err(EnumError::CapExceeded { n, cap });
    }
    let hull = hull_boundary(points)?;
    let mut hull_dir = HashSet::new();
    for i in 0..hull.len() {
        hull_dir.insert((hull[i], hull[(i + 1) % hull.len()]));
    }
    if hull_dir.iter().any(|&(a, b)| !edge_ok(a, b)) {
        return Ok(0);
    }
    // apexes[a*n+b]: c such that (a, b, c) is a usable counter-clockwise triangle
    let mut apexes = vec![Vec::new(); n * n];
    for a in 0..n {
        for b in 0..n {
            if a == b || !edge_ok(a, b) {
                continue;
            }
            for c in 0..n {
                if c == a || c == b || orient2d(points[a], points[b], points[c]) <= 0 {
                    continue;
                }
                if !edge_ok(b, c) || !edge_ok(c, a) {
                    continue;
                }
                let t = Triangle::from_ccw(a, b, c);
                if closed_empty(points, a, b, c) && tri_ok(&t) {
                    apexes[a * n + b].push(c);
                }
            }
        }
    }
    let mut cross = vec![false; n * n * n * n];
    for a in 0..n {
        for b in a + 1..n {
            for c in 0..n {
                for d in c + 1..n {
                    let x = segments_properly_intersect(points[a], points[b], points[c], points[d]);
                    for (p, q) in [(a, b), (b, a)] {
                        for (r, s) in [(c, d), (d, c)] {
                            cross[((p * n + q) * n + r) * n + s] = x;
                        }
                    }
                }
            }
        }
    }
    let mut st = State {
        n,
        apexes,
        cross,
        hull_dir,
        filled: vec![false; n * n],
        edges: Vec::new(),
        open: hull.iter().enumerate().map(|(i, &a)| (a, hull[(i + 1) % hull.len()])).collect(),
        tris: Vec::new(),
        count: 0,
        stop: false,
    };
    st.open.sort_unstable();
    st.recurse(visit);
    Ok(st.count)
}

fn closed_empty(points: &[Point2], a: usize, b: usize, c: usize) -> bool {
    let (pa, pb, pc) = (points[a], points[b], points[c]);
    (0..points.len()).all(|d| {
        d == a
            || d == b
            || d == c
            || !(orient2d(pa, pb, points[d]) >= 0
                && orient2d(pb, pc, points[d]) >= 0
                && orient2d(pc, pa, points[d]) >= 0)
    })
}

struct State {
    n: usize,
    apexes: Vec<Vec<usize>>,
    cross: Vec<bool>,
    hull_dir: HashSet<(usize, usize)>,
    filled: Vec<bool>,
    edges: Vec<(usize, usize)>,
    /// Sorted directed edges still waiting for a triangle on their left.
    open: Vec<(usize, usize)>,
    tris: Vec<Triangle>,
    count: usize,
    stop: bool,
}

impl State {
    fn crosses(&self, a: usize, b: usize) -> bool {
        let n = self.n;
        self.edges.iter().any(|&(c, d)| self.cross[((a * n + b) * n + c) * n + d])
    }

    fn recurse(&mut self, visit: &mut dyn FnMut(&[Triangle]) -> bool) {
        if self.stop {
            return;
        }
        let Some(&(a, b)) = self.open.first() else {
            self.count += 1;
            if !visit(&self.tris) {
                self.stop = true;
            }
            return;
        };
        let n = self.n;
        let cands = self.apexes[a * n + b].clone();
        for c in cands {
            if self.filled[b * n + c] || self.filled[c * n + a] {
                continue;
            }
            let new_bc = !self.filled[c * n + b];
            let new_ca = !self.filled[a * n + c];
            if (new_bc && self.crosses(b, c)) || (new_ca && self.crosses(c, a)) {
                continue;
            }
            let saved_open = self.open.clone();
            let saved_edges = self.edges.len();
            for (x, y) in [(a, b), (b, c), (c, a)] {
                self.filled[x * n + y] = true;
                if let Ok(i) = self.open.binary_search(&(x, y)) {
                    self.open.remove(i);
                }
                if !self.filled[y * n + x] && !self.hull_dir.contains(&(x, y)) {
                    if let Err(i) = self.open.binary_search(&(y, x)) {
                        self.open.insert(i, (y, x));
                    }
                    self.edges.push((x, y));
                }
            }
            self.tris.push(Triangle::from_ccw(a, b, c));
            self.recurse(visit);
            self.tris.pop();
            self.edges.truncate(saved_edges);
            for (x, y) in [(a, b), (b, c), (c, a)] {
                self.filled[x * n + y] = false;
            }
            self.open = saved_open;
            if self.stop {
                return;
            }
        }
    }
}
