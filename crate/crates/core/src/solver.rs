//! Exact minimum-error k-OD triangulation.
//!
//! Faces of `F_k` are solved independently. A face without interior
//! components is a weakly simple polygon handled by an interval DP over walk
//! positions. A face with components is first made connected by a set of
//! non-crossing useful bridge edges; every bridge set reachable by the
//! canonical branching rule is solved and the cheapest wins.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::delaunay::Triangulation;
use crate::enumerate::{enumerate_triangulations, EnumError};
use crate::geom::{orient2d, segments_properly_intersect, Point2, Triangle};
use crate::hod::{
    catalog_from_index, decompose_faces, edge_orders_with, sort_ccw, triangle_order, Face, HodError, HopIndex,
    KodCatalog,
};
use crate::weights::{precompute_weights, triangulation_error, Instance, WeightTable, WeightsError};

pub const DEFAULT_BUDGET: u64 = 10_000_000;
pub const DEFAULT_ENUM_CAP: usize = 11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("no k-OD triangulation of face {0}")]
    Infeasible(usize),
    #[error("budget of {budget} DP cells exceeded")]
    BudgetExceeded { budget: u64 },
    #[error("time limit of {0:?} exceeded")]
    TimeLimit(Duration),
    #[error(transparent)]
    Hod(#[from] HodError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Enum(#[from] EnumError),
}

/// Shared cell counter and deadline.
#[derive(Debug)]
pub struct Budget {
    cells: u64,
    used: AtomicU64,
    limit: Option<Duration>,
    start: Instant,
}

impl Budget {
    pub fn new(cells: u64, time_limit: Option<Duration>) -> Budget {
        Budget { cells, used: AtomicU64::new(0), limit: time_limit, start: Instant::now() }
    }

    pub fn unlimited() -> Budget {
        Budget::new(u64::MAX, None)
    }

    pub fn used(&self) -> u64 {
        self.used.load(Ordering::Relaxed)
    }

    pub fn charge(&self, n: u64) -> Result<(), SolveError> {
        let total = self.used.fetch_add(n, Ordering::Relaxed).saturating_add(n);
        if total > self.cells {
            return Err(SolveError::BudgetExceeded { budget: self.cells });
        }
        if let Some(l) = self.limit {
            if self.start.elapsed() > l {
                return Err(SolveError::TimeLimit(l));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub budget: u64,
    pub time_limit: Option<Duration>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { budget: DEFAULT_BUDGET, time_limit: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonSolution {
    pub triangles: Vec<Triangle>,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub faces: usize,
    pub faces_with_components: usize,
    pub c_max: usize,
    pub bridge_sets: usize,
    pub dp_cells: u64,
    pub preprocess_secs: f64,
    pub optimize_secs: f64,
}

#[derive(Debug, Clone)]
pub struct DpResult {
    pub triangulation: Triangulation,
    pub error: f64,
    pub face_costs: Vec<f64>,
    pub stats: SolveStats,
}

fn weight_of(catalog: &KodCatalog, table: &WeightTable, t: &Triangle) -> Option<f64> {
    catalog.get(t).filter(|&i| catalog.empty[i]).map(|i| table.weights[i])
}

/// True iff direction `d` leaves `v` strictly inside the sector swept
/// counter-clockwise from `a` to `b`.
fn in_sector(v: Point2, a: Point2, b: Point2, d: Point2) -> bool {
    let ab = orient2d(v, a, b);
    if ab == 0 && (a.x - v.x) * (b.x - v.x) + (a.y - v.y) * (b.y - v.y) > 0.0 {
        // spike: full turn minus the single direction
        return !(orient2d(v, a, d) == 0 && (a.x - v.x) * (d.x - v.x) + (a.y - v.y) * (d.y - v.y) > 0.0);
    }
    match ab {
        1 => orient2d(v, a, d) > 0 && orient2d(v, d, b) > 0,
        0 => orient2d(v, a, d) > 0,
        _ => orient2d(v, a, d) > 0 || orient2d(v, d, b) > 0,
    }
}

struct WalkGeom<'a> {
    points: &'a [Point2],
    walk: &'a [usize],
}

impl WalkGeom<'_> {
    fn wedge_ok(&self, i: usize, target: usize) -> bool {
        let m = self.walk.len();
        let p = self.points;
        let v = p[self.walk[i]];
        let next = p[self.walk[(i + 1) % m]];
        let prev = p[self.walk[(i + m - 1) % m]];
        in_sector(v, next, prev, p[target])
    }

    fn chord_ok(&self, i: usize, j: usize) -> bool {
        let (a, c) = (self.walk[i], self.walk[j]);
        if a == c || !self.wedge_ok(i, c) || !self.wedge_ok(j, a) {
            return false;
        }
        let m = self.walk.len();
        let p = self.points;
        (0..m).all(|t| {
            let (x, y) = (self.walk[t], self.walk[(t + 1) % m]);
            !segments_properly_intersect(p[a], p[c], p[x], p[y])
        })
    }
}

/// Cheapest triangulation of the interior of a counter-clockwise weakly
/// simple closed walk using empty catalog triangles.
pub fn polygon_dp(
    points: &[Point2],
    walk: &[usize],
    catalog: &KodCatalog,
    weights: &WeightTable,
    budget: &Budget,
) -> Result<PolygonSolution, SolveError> {
    let m = walk.len();
    if m < 3 {
        return Err(SolveError::Infeasible(0));
    }
    let geo = WalkGeom { points, walk };
    let mut cost = vec![f64::INFINITY; m * m];
    let mut arg = vec![usize::MAX; m * m];
    for i in 0..m - 1 {
        cost[i * m + i + 1] = 0.0;
    }
    for gap in 2..m {
        for i in 0..m - gap {
            let j = i + gap;
            let (a, c) = (walk[i], walk[j]);
            let closing = i == 0 && j == m - 1;
            if !closing && (a == c || !catalog.is_useful(a, c) || !geo.chord_ok(i, j)) {
                continue;
            }
            let mut cells = 0u64;
            let mut best = f64::INFINITY;
            for l in i + 1..j {
                let (cl, cr) = (cost[i * m + l], cost[l * m + j]);
                if !cl.is_finite() || !cr.is_finite() {
                    continue;
                }
                let b = walk[l];
                if b == a || b == c || orient2d(points[a], points[b], points[c]) <= 0 {
                    continue;
                }
                cells += 1;
                if let Some(w) = weight_of(catalog, weights, &Triangle::from_ccw(a, b, c)) {
                    let tot = cl + cr + w;
                    if tot < best {
                        best = tot;
                        arg[i * m + j] = l;
                    }
                }
            }
            budget.charge(cells)?;
            cost[i * m + j] = best;
        }
    }
    let total = cost[m - 1];
    if !total.is_finite() {
        return Err(SolveError::Infeasible(0));
    }
    let mut triangles = Vec::with_capacity(m - 2);
    let mut stack = vec![(0, m - 1)];
    while let Some((i, j)) = stack.pop() {
        if j <= i + 1 {
            continue;
        }
        let l = arg[i * m + j];
        triangles.push(Triangle::from_ccw(walk[i], walk[l], walk[j]));
        stack.push((i, l));
        stack.push((l, j));
    }
    triangles.sort_unstable();
    Ok(PolygonSolution { triangles, cost: total })
}

/// Closed walk around the face side of `(walk[0], walk[1])` in the graph made
/// of the walk edges plus `extra` edges.
fn retrace(points: &[Point2], walk: &[usize], extra: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut seen = HashSet::new();
    let m = walk.len();
    let edges = (0..m).map(|i| (walk[i], walk[(i + 1) % m])).chain(extra.iter().copied());
    for (a, b) in edges {
        if seen.insert((a.min(b), a.max(b))) {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
    }
    for (v, l) in adj.iter_mut() {
        sort_ccw(points, *v, l);
    }
    let start = (walk[0], walk[1]);
    let (mut a, mut b) = start;
    let mut out = Vec::new();
    loop {
        out.push(a);
        let l = &adj[&b];
        let i = l.iter().position(|&x| x == a).expect("edge present");
        let c = l[(i + l.len() - 1) % l.len()];
        a = b;
        b = c;
        if (a, b) == start {
            break;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceSolution {
    pub triangles: Vec<Triangle>,
    pub cost: f64,
    pub bridge_sets: usize,
}

struct BridgeSearch<'a> {
    points: &'a [Point2],
    face: &'a Face,
    catalog: &'a KodCatalog,
    weights: &'a WeightTable,
    budget: &'a Budget,
    group_of: HashMap<usize, usize>,
    groups: Vec<Vec<usize>>,
    useful: HashMap<usize, Vec<usize>>,
    visited: HashSet<Vec<(usize, usize)>>,
    best: Option<PolygonSolution>,
    solved: usize,
}

impl BridgeSearch<'_> {
    fn root(parent: &[usize], mut g: usize) -> usize {
        while parent[g] != g {
            g = parent[g];
        }
        g
    }

    fn run(&mut self, parent: &mut Vec<usize>, bridges: &mut Vec<(usize, usize)>) -> Result<(), SolveError> {
        let mut key = bridges.clone();
        key.sort_unstable();
        if !self.visited.insert(key) {
            return Ok(());
        }
        let r0 = Self::root(parent, 0);
        let Some(g) = (1..self.groups.len()).find(|&g| Self::root(parent, g) != r0) else {
            return self.solve(bridges);
        };
        let rg = Self::root(parent, g);
        let p = self.points;
        let mut cands = Vec::new();
        for (gi, vs) in self.groups.iter().enumerate() {
            if Self::root(parent, gi) != rg {
                continue;
            }
            for &u in vs {
                for &v in self.useful.get(&u).map(|l| l.as_slice()).unwrap_or(&[]) {
                    let Some(&gv) = self.group_of.get(&v) else { continue };
                    if Self::root(parent, gv) == rg {
                        continue;
                    }
                    if bridges.iter().any(|&(x, y)| segments_properly_intersect(p[u], p[v], p[x], p[y])) {
                        continue;
                    }
                    cands.push((u.min(v), u.max(v), gv));
                }
            }
        }
        cands.sort_unstable();
        cands.dedup();
        for (u, v, gv) in cands {
            let saved = parent.clone();
            let (a, b) = (Self::root(parent, gv), rg);
            parent[a.max(b)] = a.min(b);
            bridges.push((u, v));
            let r = self.run(parent, bridges);
            bridges.pop();
            *parent = saved;
            r?;
        }
        Ok(())
    }

    fn solve(&mut self, bridges: &[(usize, usize)]) -> Result<(), SolveError> {
        let mut extra: Vec<(usize, usize)> = bridges.to_vec();
        for c in &self.face.interior_components {
            extra.extend_from_slice(&c.edges);
        }
        let walk = retrace(self.points, &self.face.boundary, &extra);
        let covered: HashSet<usize> = walk.iter().copied().collect();
        if self.face.interior_components.iter().any(|c| c.vertices.iter().any(|v| !covered.contains(v))) {
            return Ok(());
        }
        self.solved += 1;
        match polygon_dp(self.points, &walk, self.catalog, self.weights, self.budget) {
            Ok(s) => {
                if self.best.as_ref().is_none_or(|b| s.cost < b.cost) {
                    self.best = Some(s);
                }
                Ok(())
            }
            Err(SolveError::Infeasible(_)) => Ok(()),
            Err(e) => Err(e),
        }
    }
}

/// Exact optimum over the k-OD triangulations of one face.
pub fn face_solve(
    points: &[Point2],
    face: &Face,
    catalog: &KodCatalog,
    weights: &WeightTable,
    budget: &Budget,
) -> Result<FaceSolution, SolveError> {
    if face.interior_components.is_empty() {
        let s = polygon_dp(points, &face.boundary, catalog, weights, budget)?;
        return Ok(FaceSolution { triangles: s.triangles, cost: s.cost, bridge_sets: 0 });
    }
    let mut groups = vec![{
        let mut b = face.boundary.clone();
        b.sort_unstable();
        b.dedup();
        b
    }];
    groups.extend(face.interior_components.iter().map(|c| c.vertices.clone()));
    let group_of: HashMap<usize, usize> =
        groups.iter().enumerate().flat_map(|(g, vs)| vs.iter().map(move |&v| (v, g))).collect();
    let mut useful: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(a, b) in &catalog.useful_edges {
        if let (Some(ga), Some(gb)) = (group_of.get(&a), group_of.get(&b)) {
            if ga != gb {
                useful.entry(a).or_default().push(b);
                useful.entry(b).or_default().push(a);
            }
        }
    }
    let mut search = BridgeSearch {
        points,
        face,
        catalog,
        weights,
        budget,
        group_of,
        useful,
        visited: HashSet::new(),
        best: None,
        solved: 0,
        groups,
    };
    let mut parent: Vec<usize> = (0..search.groups.len()).collect();
    search.run(&mut parent, &mut Vec::new())?;
    let best = search.best.ok_or(SolveError::Infeasible(0))?;
    Ok(FaceSolution { triangles: best.triangles, cost: best.cost, bridge_sets: search.solved })
}

/// Optimal k-OD triangulation of the instance points.
pub fn min_error_triangulation(inst: &Instance, k: usize, opts: &SolveOptions) -> Result<DpResult, SolveError> {
    let t0 = Instant::now();
    let points = &inst.points;
    let idx = HopIndex::new(points, k + 1)?;
    let orders = edge_orders_with(&idx, k)?;
    let catalog = catalog_from_index(&idx, k, &orders);
    let table = precompute_weights(&catalog, inst)?;
    let fixed = orders.fixed_edges(k);
    let faces = decompose_faces(&fixed, points);
    let preprocess = t0.elapsed();
    let t1 = Instant::now();
    let budget = Budget::new(opts.budget, opts.time_limit);
    let sols: Vec<Result<FaceSolution, SolveError>> = faces
        .faces
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            face_solve(points, f, &catalog, &table, &budget).map_err(|e| match e {
                SolveError::Infeasible(_) => SolveError::Infeasible(i),
                e => e,
            })
        })
        .collect();
    let mut tris = Vec::new();
    let mut face_costs = Vec::with_capacity(sols.len());
    let mut bridge_sets = 0;
    for s in sols {
        let s = s?;
        tris.extend(s.triangles);
        face_costs.push(s.cost);
        bridge_sets += s.bridge_sets;
    }
    let error: f64 = face_costs.iter().sum();
    let mut triangulation = Triangulation::from_triangles(points.clone(), tris);
    triangulation.total_error = Some(error);
    let stats = SolveStats {
        faces: faces.faces.len(),
        faces_with_components: faces.faces.iter().filter(|f| !f.interior_components.is_empty()).count(),
        c_max: faces.c_max,
        bridge_sets,
        dp_cells: budget.used(),
        preprocess_secs: preprocess.as_secs_f64(),
        optimize_secs: t1.elapsed().as_secs_f64(),
    };
    Ok(DpResult { triangulation, error, face_costs, stats })
}

/// Retries with `k + 1, ..., kmax` while the result is infeasible.
pub fn min_error_escalating(
    inst: &Instance,
    k: usize,
    kmax: usize,
    opts: &SolveOptions,
) -> Result<(usize, DpResult), SolveError> {
    let mut k = k;
    loop {
        match min_error_triangulation(inst, k, opts) {
            Err(SolveError::Infeasible(_)) if k < kmax => k += 1,
            r => return r.map(|d| (k, d)),
        }
    }
}

/// Every k-OD triangulation of at most `cap` points, each as sorted triangles.
pub fn brute_force_enumerate(points: &[Point2], k: usize, cap: usize) -> Result<Vec<Vec<Triangle>>, SolveError> {
    let mut out: Vec<Vec<Triangle>> = Vec::new();
    enumerate_triangulations(points, &|t| triangle_order(t, points) <= k, cap, &mut |ts| {
        let mut v = ts.to_vec();
        v.sort_unstable();
        out.push(v);
        true
    })?;
    out.sort();
    out.dedup();
    Ok(out)
}

/// Minimum error over the enumerated k-OD triangulations, each evaluated by
/// per-reference location.
pub fn brute_force_min(inst: &Instance, k: usize, cap: usize) -> Result<(Vec<Triangle>, f64), SolveError> {
    let all = brute_force_enumerate(&inst.points, k, cap)?;
    let mut best: Option<(Vec<Triangle>, f64)> = None;
    for ts in all {
        let t = Triangulation::from_triangles(inst.points.clone(), ts.iter().copied());
        let e = triangulation_error(inst, &t)?;
        if best.as_ref().is_none_or(|b| e < b.1) {
            best = Some((ts, e));
        }
    }
    best.ok_or(SolveError::Infeasible(0))
}
