//! Zero-error hardness gadgets on the lifted paraboloid.
//!
//! Triangulation points are lattice points with `f(p) = p1^2 + p2^2`. Each
//! reference point is coupled to a circle and takes the height of the plane
//! through that circle's lift, so a triangle with all corners on the circle
//! represents it exactly. Everything here is exact rational arithmetic.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use spade::{ConstrainedDelaunayTriangulation, PositionInTriangulation, Triangulation as _};
use thiserror::Error;

use crate::enumerate::{enumerate_restricted, EnumError};
use crate::geom::exact::{circle_side, circumcircle, q, qf, QCircle, QPoint, Q};
use crate::geom::{Point2, Triangle};

/// Integer lattice point.
pub type IPt = (i64, i64);
pub type Seg = (IPt, IPt);

/// Spacing of the multipliers inside a variable gadget.
pub const ALPHA: i64 = 200;
/// Point cap of the exhaustive zero-error oracle.
pub const ZERO_ERROR_CAP: usize = 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HardnessError {
    #[error("{0:?} and {1:?} do not span an axis-parallel segment")]
    NotAxisAligned(IPt, IPt),
    #[error("triangulation point {0:?} is forbidden in the other gadget")]
    ForbiddenOverlap(IPt),
    #[error("gadgets share no anchor")]
    NoSharedAnchor,
    #[error("reference point {0} defined twice with different data")]
    RefConflict(String),
    #[error("neither square beside {0:?}-{1:?} has an empty circumcircle")]
    SquareNotEmpty(IPt, IPt),
    #[error("diametral circle of {0:?}-{1:?} holds other triangulation points")]
    CircleNotEmpty(IPt, IPt),
    #[error("gadgets collide at {0:?}")]
    OverlapDetected(IPt),
    #[error("malformed embedding: {0}")]
    MalformedEmbedding(String),
    #[error("assignment has {got} values for {want} variables")]
    Assignment { got: usize, want: usize },
    #[error("signal constraints cannot be met: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Enum(#[from] EnumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RefRole {
    Bit {
        orientation: Orientation,
    },
    /// Inner reference of a multiplier.
    Inner,
    /// Crossing point of an anchor construction inside a clause.
    Crossing,
    /// The clause reference `r_c`.
    Clause,
    /// Replacement of a mandatory edge.
    Mandatory {
        long: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "gadget", content = "index", rename_all = "snake_case")]
pub enum Owner {
    Free,
    Variable(usize),
    Clause(usize),
    Negation(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRef {
    pub r: QPoint,
    pub circle: QCircle,
    pub h: Q,
    pub pos_edge: Option<Seg>,
    pub neg_edge: Option<Seg>,
    /// Candidate triangles for a clause reference.
    pub triangles: Vec<[IPt; 3]>,
    /// The replaced edge for a mandatory-edge reference.
    pub edge: Option<Seg>,
    pub role: RefRole,
    pub owner: Owner,
}

impl CoupledRef {
    fn new(r: QPoint, circle: QCircle, role: RefRole) -> Self {
        let h = href(&circle, &r);
        CoupledRef {
            r,
            circle,
            h,
            pos_edge: None,
            neg_edge: None,
            triangles: Vec::new(),
            edge: None,
            role,
            owner: Owner::Free,
        }
    }

    fn key(&self) -> (Q, Q) {
        (self.r.x.clone(), self.r.y.clone())
    }

    fn same_shape(&self, o: &CoupledRef) -> bool {
        let tris = |r: &CoupledRef| {
            let mut t: Vec<[IPt; 3]> = r
                .triangles
                .iter()
                .map(|t| {
                    let mut t = *t;
                    t.sort_unstable();
                    t
                })
                .collect();
            t.sort_unstable();
            t
        };
        self.circle == o.circle
            && self.pos_edge.map(canon) == o.pos_edge.map(canon)
            && self.neg_edge.map(canon) == o.neg_edge.map(canon)
            && self.edge.map(canon) == o.edge.map(canon)
            && tris(self) == tris(o)
    }
}

fn canon(s: Seg) -> Seg {
    if s.0 <= s.1 {
        s
    } else {
        (s.1, s.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MandatoryEdge {
    pub s: IPt,
    pub t: IPt,
    /// Replaced through an adjacent square instead of the diametral circle.
    pub long: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gadget {
    pub s_points: BTreeSet<IPt>,
    pub refs: BTreeMap<(Q, Q), CoupledRef>,
    pub forbidden: BTreeSet<IPt>,
    pub anchors: BTreeSet<IPt>,
    pub mandatory_edges: Vec<MandatoryEdge>,
}

pub fn paraboloid_f(p: IPt) -> i64 {
    p.0 * p.0 + p.1 * p.1
}

/// Height at `r` of the plane through the lifted circle.
pub fn href(c: &QCircle, r: &QPoint) -> Q {
    let x = &c.center;
    q(2) * &x.x * &r.x + q(2) * &x.y * &r.y - &x.x * &x.x - &x.y * &x.y + &c.radius_sq
}

fn qp(p: IPt) -> QPoint {
    QPoint::int(p.0, p.1)
}

fn circle(center: QPoint, radius_sq: Q) -> QCircle {
    QCircle { center, radius_sq }
}

fn add(a: IPt, b: IPt) -> IPt {
    (a.0 + b.0, a.1 + b.1)
}

fn sub(a: IPt, b: IPt) -> IPt {
    (a.0 - b.0, a.1 - b.1)
}

fn scale(a: IPt, k: i64) -> IPt {
    (a.0 * k, a.1 * k)
}

/// Lattice points in the closed disk.
fn disk_lattice(c: &QCircle) -> Vec<IPt> {
    let cx = c.center.x.to_f64().unwrap_or(0.0);
    let cy = c.center.y.to_f64().unwrap_or(0.0);
    let r = c.radius_sq.to_f64().unwrap_or(0.0).sqrt();
    let mut out = Vec::new();
    for x in (cx - r).floor() as i64 - 1..=(cx + r).ceil() as i64 + 1 {
        for y in (cy - r).floor() as i64 - 1..=(cy + r).ceil() as i64 + 1 {
            if circle_side(c, &qp((x, y))) >= 0 {
                out.push((x, y));
            }
        }
    }
    out
}

fn line_intersection(a: &Seg, b: &Seg) -> QPoint {
    let (p, p2) = (qp(a.0), qp(a.1));
    let (r, r2) = (qp(b.0), qp(b.1));
    let d1 = (&p2.x - &p.x, &p2.y - &p.y);
    let d2 = (&r2.x - &r.x, &r2.y - &r.y);
    let den = &d1.0 * &d2.1 - &d1.1 * &d2.0;
    let t = ((&r.x - &p.x) * &d2.1 - (&r.y - &p.y) * &d2.0) / den;
    QPoint::new(&p.x + &t * &d1.0, &p.y + &t * &d1.1)
}

/// Linear isometry of the lattice plus translation; `swap` exchanges the
/// roles of positive and negative edges.
#[derive(Debug, Clone, Copy)]
struct Iso {
    m: [[i64; 2]; 2],
    t: IPt,
    swap: bool,
}

impl Iso {
    const ID: [[i64; 2]; 2] = [[1, 0], [0, 1]];
    const ROT_CCW: [[i64; 2]; 2] = [[0, -1], [1, 0]];
    const ROT_CW: [[i64; 2]; 2] = [[0, 1], [-1, 0]];
    const ROT_PI: [[i64; 2]; 2] = [[-1, 0], [0, -1]];
    const ANTI_DIAG: [[i64; 2]; 2] = [[0, -1], [-1, 0]];
    const MIRROR_X: [[i64; 2]; 2] = [[-1, 0], [0, 1]];

    fn new(m: [[i64; 2]; 2], swap: bool) -> Self {
        Iso { m, t: (0, 0), swap }
    }

    fn shift(t: IPt) -> Self {
        Iso { m: Self::ID, t, swap: false }
    }

    fn p(&self, p: IPt) -> IPt {
        (self.m[0][0] * p.0 + self.m[0][1] * p.1 + self.t.0, self.m[1][0] * p.0 + self.m[1][1] * p.1 + self.t.1)
    }

    fn qp(&self, p: &QPoint) -> QPoint {
        let x = q(self.m[0][0]) * &p.x + q(self.m[0][1]) * &p.y + q(self.t.0);
        let y = q(self.m[1][0]) * &p.x + q(self.m[1][1]) * &p.y + q(self.t.1);
        QPoint::new(x, y)
    }

    fn seg(&self, s: &Seg) -> Seg {
        (self.p(s.0), self.p(s.1))
    }
}

impl Gadget {
    fn transform(&self, iso: &Iso) -> Gadget {
        let turns_axes = iso.m[0][0] == 0;
        let mut refs = BTreeMap::new();
        for r in self.refs.values() {
            let c = circle(iso.qp(&r.circle.center), r.circle.radius_sq.clone());
            let role = match r.role {
                RefRole::Bit { orientation } if turns_axes => RefRole::Bit {
                    orientation: match orientation {
                        Orientation::Horizontal => Orientation::Vertical,
                        Orientation::Vertical => Orientation::Horizontal,
                    },
                },
                x => x,
            };
            let mut n = CoupledRef::new(iso.qp(&r.r), c, role);
            let (pe, ne) = (r.pos_edge.map(|s| iso.seg(&s)), r.neg_edge.map(|s| iso.seg(&s)));
            (n.pos_edge, n.neg_edge) = if iso.swap { (ne, pe) } else { (pe, ne) };
            n.triangles = r.triangles.iter().map(|t| t.map(|p| iso.p(p))).collect();
            n.edge = r.edge.map(|s| iso.seg(&s));
            n.owner = r.owner;
            refs.insert(n.key(), n);
        }
        Gadget {
            s_points: self.s_points.iter().map(|&p| iso.p(p)).collect(),
            refs,
            forbidden: self.forbidden.iter().map(|&p| iso.p(p)).collect(),
            anchors: self.anchors.iter().map(|&p| iso.p(p)).collect(),
            mandatory_edges: self
                .mandatory_edges
                .iter()
                .map(|e| MandatoryEdge { s: iso.p(e.s), t: iso.p(e.t), long: e.long })
                .collect(),
        }
    }

    pub fn translate(&self, t: IPt) -> Gadget {
        self.transform(&Iso::shift(t))
    }

    /// Rotation by a multiple of a quarter turn around the origin.
    pub fn rotate_quarter(&self, turns: i32) -> Gadget {
        let m = match turns.rem_euclid(4) {
            0 => Iso::ID,
            1 => Iso::ROT_CCW,
            2 => Iso::ROT_PI,
            _ => Iso::ROT_CW,
        };
        self.transform(&Iso::new(m, false))
    }

    fn set_owner(&mut self, o: Owner) {
        for r in self.refs.values_mut() {
            r.owner = o;
        }
    }

    fn add_ref(&mut self, r: CoupledRef) {
        self.refs.insert(r.key(), r);
    }

    /// `(points, f, refs, h)` in a stable order.
    pub fn arrays(&self) -> (Vec<IPt>, Vec<Q>, Vec<QPoint>, Vec<Q>) {
        let pts: Vec<IPt> = self.s_points.iter().copied().collect();
        let f = pts.iter().map(|&p| q(paraboloid_f(p))).collect();
        let refs = self.refs.values().map(|r| r.r.clone()).collect();
        let h = self.refs.values().map(|r| r.h.clone()).collect();
        (pts, f, refs, h)
    }

    /// Structural checks; returns one message per violation.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut bad = Vec::new();
        for p in self.s_points.intersection(&self.forbidden) {
            bad.push(format!("point {p:?} is forbidden"));
        }
        for r in self.refs.values() {
            let at = format!("({}, {})", r.r.x, r.r.y);
            if r.h != href(&r.circle, &r.r) {
                bad.push(format!("{at}: h does not match its circle"));
            }
            if let (Some(pe), Some(ne)) = (r.pos_edge, r.neg_edge) {
                for p in [pe.0, pe.1, ne.0, ne.1] {
                    if circle_side(&r.circle, &qp(p)) != 0 {
                        bad.push(format!("{at}: edge endpoint {p:?} off the circle"));
                    }
                }
                if line_intersection(&pe, &ne) != r.r || !on_closed_segment(&pe, &r.r) || !on_closed_segment(&ne, &r.r)
                {
                    bad.push(format!("{at}: edges do not cross at the reference"));
                }
            }
            for t in &r.triangles {
                if t.iter().any(|&p| circle_side(&r.circle, &qp(p)) != 0) || interpolate(t, &r.r).is_none() {
                    bad.push(format!("{at}: triangle {t:?} does not cover the reference on its circle"));
                }
            }
            if let Some((s, t)) = r.edge {
                for p in disk_lattice(&r.circle) {
                    if p != s && p != t && self.s_points.contains(&p) {
                        bad.push(format!("{at}: replacement circle holds {p:?}"));
                    }
                }
            }
        }
        bad
    }
}

fn on_closed_segment(s: &Seg, r: &QPoint) -> bool {
    let (a, b) = (qp(s.0), qp(s.1));
    crate::geom::exact::orient(&a, &b, r) == 0
        && r.x >= a.x.clone().min(b.x.clone())
        && r.x <= a.x.clone().max(b.x.clone())
        && r.y >= a.y.clone().min(b.y.clone())
        && r.y <= a.y.clone().max(b.y.clone())
}

/// Union without the shared-anchor requirement.
fn merge(mut a: Gadget, b: &Gadget) -> Result<Gadget, HardnessError> {
    if let Some(p) = b.s_points.iter().find(|p| a.forbidden.contains(p)) {
        return Err(HardnessError::ForbiddenOverlap(*p));
    }
    if let Some(p) = b.forbidden.iter().find(|p| a.s_points.contains(p)) {
        return Err(HardnessError::ForbiddenOverlap(*p));
    }
    for (k, r) in &b.refs {
        match a.refs.get(k) {
            Some(x) if !x.same_shape(r) => return Err(HardnessError::RefConflict(format!("({}, {})", k.0, k.1))),
            Some(_) => {}
            None => {
                a.refs.insert(k.clone(), r.clone());
            }
        }
    }
    a.s_points.extend(b.s_points.iter().copied());
    a.forbidden.extend(b.forbidden.iter().copied());
    for &p in &b.anchors {
        if !a.anchors.remove(&p) {
            a.anchors.insert(p);
        }
    }
    for e in &b.mandatory_edges {
        if !a.mandatory_edges.contains(e) {
            a.mandatory_edges.push(*e);
        }
    }
    Ok(a)
}

pub fn combine(g1: &Gadget, g2: &Gadget) -> Result<Gadget, HardnessError> {
    if g1.anchors.is_disjoint(&g2.anchors) {
        return Err(HardnessError::NoSharedAnchor);
    }
    merge(g1.clone(), g2)
}

pub fn make_bit(r: IPt, orientation: Orientation) -> Gadget {
    let mut g = Gadget::default();
    g.s_points.extend([(-1, -1), (-1, 1), (1, -1), (1, 1), (0, 1), (0, -1)]);
    g.forbidden.extend([(-1, 0), (1, 0), (-2, 0), (2, 0)]);
    g.anchors.insert((0, 0));
    let mut c =
        CoupledRef::new(qp((0, 0)), circle(qp((0, 0)), q(2)), RefRole::Bit { orientation: Orientation::Horizontal });
    c.pos_edge = Some(((-1, -1), (1, 1)));
    c.neg_edge = Some(((-1, 1), (1, -1)));
    g.add_ref(c);
    let g = match orientation {
        Orientation::Horizontal => g,
        Orientation::Vertical => g.transform(&Iso::new(Iso::ROT_CCW, true)),
    };
    g.translate(r)
}

pub fn make_wire_segment(x: IPt, y: IPt) -> Result<Gadget, HardnessError> {
    if x == y || (x.0 != y.0 && x.1 != y.1) {
        return Err(HardnessError::NotAxisAligned(x, y));
    }
    let (o, d) = if x.1 == y.1 {
        (Orientation::Horizontal, ((y.0 - x.0).signum(), 0))
    } else {
        (Orientation::Vertical, (0, (y.1 - x.1).signum()))
    };
    let len = (y.0 - x.0).abs() + (y.1 - x.1).abs();
    let mut g = Gadget::default();
    for i in 0..=len {
        g = merge(g, &make_bit(add(x, scale(d, i)), o))?;
    }
    g.anchors = [x, y].into();
    Ok(g)
}

fn multiplier_core() -> Gadget {
    let mut g = Gadget::default();
    for (p, o) in [
        ((2, 0), Orientation::Horizontal),
        ((-2, 0), Orientation::Horizontal),
        ((0, 2), Orientation::Vertical),
        ((0, -2), Orientation::Vertical),
    ] {
        g = merge(g, &make_bit(p, o)).expect("multiplier bits are compatible");
    }
    let c = circle(qp((0, 0)), q(5));
    let up = ((-2, -1), (1, 2));
    let down = ((-1, -2), (2, 1));
    let left = ((-2, 1), (1, -2));
    let right = ((-1, 2), (2, -1));
    for (r, pe, ne) in [((-1, 0), up, left), ((0, 1), up, right), ((1, 0), down, right), ((0, -1), down, left)] {
        let mut cr = CoupledRef::new(qp(r), c.clone(), RefRole::Inner);
        cr.pos_edge = Some(pe);
        cr.neg_edge = Some(ne);
        g.add_ref(cr);
    }
    for p in disk_lattice(&c) {
        if !g.s_points.contains(&p) {
            g.forbidden.insert(p);
        }
    }
    for (sx, sy) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
        g.mandatory_edges.push(MandatoryEdge { s: (sx, sy), t: (2 * sx, sy), long: false });
        g.mandatory_edges.push(MandatoryEdge { s: (sx, sy), t: (sx, 2 * sy), long: false });
    }
    g
}

pub fn make_multiplier(x: IPt) -> Gadget {
    multiplier_core().translate(x)
}

/// Bits at `a1 + (l, 0)`, the crossing reference `r1` and its two edges,
/// relative to a clause centered at the origin.
fn anchor_construction() -> Gadget {
    let a1 = (-12, -17);
    let mut g = Gadget::default();
    for l in 0..3 {
        g = merge(g, &make_bit(add(a1, (l, 0)), Orientation::Horizontal)).expect("consecutive bits");
    }
    let pe = (add(a1, (1, -1)), add(a1, (23, 4)));
    let ne = (add(a1, (1, 1)), add(a1, (23, -4)));
    g.s_points.extend([pe.0, pe.1, ne.0, ne.1]);
    let c = circumcircle(&qp(pe.0), &qp(pe.1), &qp(ne.0)).expect("not collinear");
    let mut r = CoupledRef::new(line_intersection(&pe, &ne), c, RefRole::Crossing);
    r.pos_edge = Some(pe);
    r.neg_edge = Some(ne);
    g.add_ref(r);
    g.mandatory_edges.push(MandatoryEdge { s: add(a1, (3, -1)), t: ne.1, long: true });
    g.anchors = [a1].into();
    g
}

fn clause_core(with_third: bool) -> Gadget {
    let mut g = Gadget::default();
    let ring = [(5, -15), (15, -5), (-15, -5), (9, 13), (-9, 13)];
    g.s_points.extend(ring);
    let mut rc = CoupledRef::new(qp((0, 11)), circle(qp((0, 0)), q(250)), RefRole::Clause);
    rc.triangles = vec![[ring[0], ring[3], ring[4]], [ring[1], ring[3], ring[4]]];
    if with_third {
        rc.triangles.push([ring[2], ring[3], ring[4]]);
    }
    g.add_ref(rc);
    let first = anchor_construction();
    let mut parts = vec![first.clone(), first.transform(&Iso::new(Iso::ANTI_DIAG, false))];
    if with_third {
        parts.push(first.transform(&Iso::new(Iso::ROT_CW, true)));
    }
    let mut anchors = BTreeSet::new();
    for p in &parts {
        anchors.extend(p.anchors.iter().copied());
        g = merge(g, p).expect("clause constructions are compatible");
    }
    let disks: Vec<IPt> = g.refs.values().flat_map(|r| disk_lattice(&r.circle)).collect();
    for p in disks {
        if !g.s_points.contains(&p) {
            g.forbidden.insert(p);
        }
    }
    g.anchors = anchors;
    g
}

/// Anchors `a1 = c+(-12,-17)`, `a2 = c+(17,12)`, `a3 = c+(-17,12)`.
pub fn make_clause(c: IPt) -> Gadget {
    clause_core(true).translate(c)
}

fn negation_core() -> Result<Gadget, HardnessError> {
    let seg = clause_core(false);
    let pos = seg.translate((27, 17));
    let neg = seg.transform(&Iso { m: Iso::MIRROR_X, t: (-27, 17), swap: true });
    let mut g = merge(pos, &neg)?;
    g = merge(g, &multiplier_core())?;
    g = merge(g, &make_multiplier((0, 38)))?;
    for sx in [1, -1] {
        g = merge(g, &make_wire_segment((2 * sx, 0), (15 * sx, 0))?)?;
        g = merge(g, &make_wire_segment((2 * sx, 38), (42 * sx, 38))?)?;
        g = merge(g, &make_multiplier((44 * sx, 38)))?;
        g = merge(g, &make_wire_segment((44 * sx, 36), (44 * sx, 29))?)?;
    }
    g.anchors = [(0, -2), (0, 40)].into();
    Ok(g)
}

/// Anchors `a = x-(0,2)` and `a' = x+(0,40)`; unused multiplier anchors are capped.
pub fn make_negation(x: IPt) -> Gadget {
    negation_core().expect("negation layout is consistent").translate(x)
}

/// Multipliers at `v + k*ALPHA` chained by wires; anchors above and below each.
pub fn make_variable(v: IPt, slots: usize) -> Result<Gadget, HardnessError> {
    let mut g = Gadget::default();
    let mut anchors = BTreeSet::new();
    for k in 0..slots.max(1) as i64 {
        let x = add(v, (k * ALPHA, 0));
        g = merge(g, &make_multiplier(x))?;
        anchors.extend([add(x, (0, 2)), add(x, (0, -2))]);
        if k > 0 {
            g = merge(g, &make_wire_segment(add(x, (2 - ALPHA, 0)), add(x, (-2, 0)))?)?;
        }
    }
    g.anchors = anchors;
    Ok(g)
}

/// Swaps every mandatory edge for a midpoint reference on an empty circle.
pub fn replace_mandatory_edges(g: &Gadget) -> Result<Gadget, HardnessError> {
    let mut out = g.clone();
    out.mandatory_edges.clear();
    for e in &g.mandatory_edges {
        let (s, t) = (e.s, e.t);
        let mid = QPoint::new(qf(s.0 + t.0, 2), qf(s.1 + t.1, 2));
        let d = sub(t, s);
        let len_sq = q(paraboloid_f(d));
        let empty = |c: &QCircle| disk_lattice(c).iter().all(|p| *p == s || *p == t || !g.s_points.contains(p));
        let c = if e.long {
            let sides = [(-d.1, d.0), (d.1, -d.0)];
            sides
                .iter()
                .map(|n| circle(QPoint::new(&mid.x + qf(n.0, 2), &mid.y + qf(n.1, 2)), &len_sq / q(2)))
                .find(|c| empty(c))
                .ok_or(HardnessError::SquareNotEmpty(s, t))?
        } else {
            let c = circle(mid.clone(), &len_sq / q(4));
            if !empty(&c) {
                return Err(HardnessError::CircleNotEmpty(s, t));
            }
            c
        };
        for p in disk_lattice(&c) {
            if p != s && p != t {
                out.forbidden.insert(p);
            }
        }
        let mut r = CoupledRef::new(mid, c, RefRole::Mandatory { long: e.long });
        r.edge = Some((s, t));
        r.owner = g.refs.values().next().map_or(Owner::Free, |x| x.owner);
        out.add_ref(r);
    }
    Ok(out)
}

// ---------------------------------------------------------------- reduction

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn eval(&self, assignment: &[bool]) -> bool {
        assignment[self.var] != self.negated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedVariable {
    pub name: String,
    /// Position on the axis, in units of the scale.
    pub x: i64,
    /// Number of multipliers in the variable gadget.
    pub slots: usize,
}

/// Route from clause anchor `a_i` to a variable anchor. The wire leaves the
/// anchor away from the clause; each entry of `turns` is the coordinate (in
/// units of the scale) where the current leg ends, alternating axes. After
/// the turns a horizontal leg reaches the slot column and a vertical leg the
/// variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedWire {
    pub var: usize,
    pub negated: bool,
    pub slot: usize,
    #[serde(default)]
    pub turns: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedClause {
    /// Clause vertex in units of the scale; `y > 0` above the axis.
    pub at: [i64; 2],
    /// Wires for anchors a1, a2, a3.
    pub wires: [EmbeddedWire; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    #[serde(default)]
    pub gamma: Option<i64>,
    pub variables: Vec<EmbeddedVariable>,
    pub clauses: Vec<EmbeddedClause>,
}

impl Embedding {
    pub fn literals(&self) -> Vec<[Literal; 3]> {
        self.clauses.iter().map(|c| c.wires.clone().map(|w| Literal { var: w.var, negated: w.negated })).collect()
    }
}

#[derive(Debug, Clone)]
pub struct HardnessInstance {
    pub gadget: Gadget,
    pub variables: Vec<String>,
    /// Literals in anchor order a1, a2, a3.
    pub clauses: Vec<[Literal; 3]>,
    pub gamma: i64,
    pub variable_gadgets: usize,
    pub clause_gadgets: usize,
    pub negation_gadgets: usize,
}

fn overlap(e: HardnessError) -> HardnessError {
    match e {
        HardnessError::ForbiddenOverlap(p) => HardnessError::OverlapDetected(p),
        HardnessError::RefConflict(s) => HardnessError::MalformedEmbedding(format!("gadgets share reference {s}")),
        e => e,
    }
}

fn place(acc: Gadget, g: Gadget, owner: Owner) -> Result<Gadget, HardnessError> {
    let mut g = replace_mandatory_edges(&g)?;
    g.set_owner(owner);
    merge(acc, &g).map_err(overlap)
}

fn unit(from: IPt, to: IPt) -> Result<IPt, HardnessError> {
    let d = sub(to, from);
    if d == (0, 0) || (d.0 != 0 && d.1 != 0) {
        return Err(HardnessError::MalformedEmbedding(format!("route leg {from:?} -> {to:?} is not axis-parallel")));
    }
    Ok((d.0.signum(), d.1.signum()))
}

fn dist(a: IPt, b: IPt) -> i64 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

/// Places variable gadgets, clause gadgets, wires and negations.
pub fn build_instance(emb: &Embedding) -> Result<HardnessInstance, HardnessError> {
    let nv = emb.variables.len();
    let gamma = emb.gamma.unwrap_or(1000 * (emb.clauses.len() + nv).max(1) as i64);
    let bad = |m: String| HardnessError::MalformedEmbedding(m);
    if gamma <= 0 {
        return Err(bad(format!("scale {gamma} is not positive")));
    }
    let mut g = Gadget::default();
    for (i, v) in emb.variables.iter().enumerate() {
        g = place(g, make_variable((gamma * v.x, 0), v.slots)?, Owner::Variable(i))?;
    }
    let mut negations = 0;
    let clause = clause_core(true);
    let negation = negation_core()?;
    for (j, c) in emb.clauses.iter().enumerate() {
        if c.at[1] == 0 {
            return Err(bad(format!("clause {j} sits on the variable axis")));
        }
        let above = c.at[1] > 0;
        let rot = if above { Iso::ID } else { Iso::ROT_PI };
        let at = (gamma * c.at[0], gamma * c.at[1]);
        let orient = Iso { m: rot, t: at, swap: false };
        g = place(g, clause.transform(&orient), Owner::Clause(j))?;
        let exits = [((-12, -17), (-1, 0)), ((17, 12), (0, 1)), ((-17, 12), (0, 1))];
        for (i, (w, (off, exit))) in c.wires.iter().zip(exits).enumerate() {
            let var = emb.variables.get(w.var).ok_or_else(|| bad(format!("clause {j} names variable {}", w.var)))?;
            if w.slot >= var.slots.max(1) {
                return Err(bad(format!("clause {j} uses slot {} of {}", w.slot, var.name)));
            }
            let col = gamma * var.x + w.slot as i64 * ALPHA;
            let target = (col, if above { 2 } else { -2 });
            let anchor = orient.p(off);
            let exit = Iso::new(rot, false).p(exit);
            let mut pts = vec![anchor];
            let mut horizontal = exit.1 == 0;
            let mut cur = anchor;
            for &t in &w.turns {
                cur = if horizontal { (gamma * t, cur.1) } else { (cur.0, gamma * t) };
                pts.push(cur);
                horizontal = !horizontal;
            }
            if !horizontal {
                return Err(bad(format!("clause {j} wire {}: last turn must end a vertical leg", i + 1)));
            }
            pts.push((col, cur.1));
            pts.push(target);
            if unit(pts[0], pts[1])? != exit {
                return Err(bad(format!("clause {j} wire {} does not leave its anchor outward", i + 1)));
            }
            let needs_negation = if i < 2 { !w.negated } else { w.negated };
            let last = pts.len() - 1;
            for k in 0..last {
                let d = unit(pts[k], pts[k + 1])?;
                if k > 0 && (dist(pts[k], pts[k + 1]) < 5) {
                    return Err(bad(format!("clause {j} wire {}: leg shorter than 5", i + 1)));
                }
                let start = if k == 0 { pts[0] } else { add(pts[k], scale(d, 2)) };
                if k > 0 {
                    g = place(g, make_multiplier(pts[k]), Owner::Free)?;
                }
                if k + 1 == last && needs_negation {
                    let top = sub(target, scale(d, 90));
                    let low = sub(target, scale(d, 48));
                    if unit(start, top).ok() != Some(d) {
                        return Err(bad(format!("clause {j} wire {}: no room for a negation", i + 1)));
                    }
                    let x = sub(target, scale(d, 50));
                    let neg_rot = if d.1 < 0 { Iso::ID } else { Iso::ROT_PI };
                    let idx = 3 * j + i;
                    g = place(g, negation.transform(&Iso { m: neg_rot, t: x, swap: false }), Owner::Negation(idx))?;
                    g = place(g, make_wire_segment(start, top)?, Owner::Free)?;
                    g = place(g, make_wire_segment(low, target)?, Owner::Free)?;
                    negations += 1;
                } else {
                    let end = if k + 1 == last { target } else { sub(pts[k + 1], scale(d, 2)) };
                    if unit(start, end).ok() != Some(d) {
                        return Err(bad(format!("clause {j} wire {}: leg too short", i + 1)));
                    }
                    g = place(g, make_wire_segment(start, end)?, Owner::Free)?;
                }
            }
        }
    }
    g.anchors.clear();
    Ok(HardnessInstance {
        gadget: g,
        variables: emb.variables.iter().map(|v| v.name.clone()).collect(),
        clauses: emb.literals(),
        gamma,
        variable_gadgets: nv,
        clause_gadgets: emb.clauses.len(),
        negation_gadgets: negations,
    })
}

/// Layout for small formulas: variables left to right, every literal on its
/// own multiplier, clauses above or below the axis with nested spans stacked.
/// Returns `None` when no variable order and side choice gives nested spans.
pub fn auto_embedding(n_vars: usize, clauses: &[[Literal; 3]]) -> Option<Embedding> {
    for c in clauses {
        let mut v: Vec<usize> = c.iter().map(|l| l.var).collect();
        v.sort_unstable();
        v.dedup();
        if v.len() != 3 || v[2] >= n_vars {
            return None;
        }
    }
    let k = clauses.len();
    for perm in permutations(n_vars) {
        let mut rank = vec![0; n_vars];
        for (i, &v) in perm.iter().enumerate() {
            rank[v] = i;
        }
        for mask in 0..1usize << k {
            let side = |j: usize| mask >> j & 1 == 0;
            let mut orders: Vec<Vec<Vec<usize>>> = Vec::new();
            let mut ok = true;
            for above in [true, false] {
                match side_orders(n_vars, clauses, &rank, &|j| side(j) == above) {
                    Some(o) => orders.push(o),
                    None => ok = false,
                }
            }
            if ok {
                return Some(lay_out(n_vars, clauses, &perm, &side, &orders));
            }
        }
    }
    None
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Per variable, the order of its incident clauses on one side such that the
/// clause spans are nested or disjoint.
fn side_orders(
    n: usize,
    clauses: &[[Literal; 3]],
    rank: &[usize],
    on: &dyn Fn(usize) -> bool,
) -> Option<Vec<Vec<usize>>> {
    let inc: Vec<Vec<usize>> = (0..n)
        .map(|v| (0..clauses.len()).filter(|&j| on(j) && clauses[j].iter().any(|l| l.var == v)).collect())
        .collect();
    let choices: Vec<Vec<Vec<usize>>> = inc
        .iter()
        .map(|l| permutations(l.len()).into_iter().map(|p| p.iter().map(|&i| l[i]).collect()).collect())
        .collect();
    let mut pick = vec![0; n];
    loop {
        let orders: Vec<Vec<usize>> = (0..n).map(|v| choices[v][pick[v]].clone()).collect();
        if laminar(clauses, rank, &orders, on) {
            return Some(orders);
        }
        let mut v = 0;
        while v < n {
            pick[v] += 1;
            if pick[v] < choices[v].len() {
                break;
            }
            pick[v] = 0;
            v += 1;
        }
        if v == n {
            return None;
        }
    }
}

fn positions(c: &[Literal; 3], rank: &[usize], orders: &[Vec<usize>], j: usize) -> [(usize, usize); 3] {
    let mut p = c.map(|l| (rank[l.var], orders[l.var].iter().position(|&x| x == j).unwrap_or(0)));
    p.sort_unstable();
    p
}

fn laminar(clauses: &[[Literal; 3]], rank: &[usize], orders: &[Vec<usize>], on: &dyn Fn(usize) -> bool) -> bool {
    let js: Vec<usize> = (0..clauses.len()).filter(|&j| on(j)).collect();
    let one_gap = |outer: &[(usize, usize); 3], inner: &[(usize, usize); 3]| {
        let gap = |p: &(usize, usize)| outer.iter().filter(|x| *x < p).count();
        inner.iter().all(|p| gap(p) == gap(&inner[0]))
    };
    for (i, &a) in js.iter().enumerate() {
        let pa = positions(&clauses[a], rank, orders, a);
        for &b in &js[i + 1..] {
            let pb = positions(&clauses[b], rank, orders, b);
            if !one_gap(&pa, &pb) && !one_gap(&pb, &pa) {
                return false;
            }
        }
    }
    true
}

fn lay_out(
    n: usize,
    clauses: &[[Literal; 3]],
    perm: &[usize],
    side: &dyn Fn(usize) -> bool,
    orders: &[Vec<Vec<usize>>],
) -> Embedding {
    let slot = |v: usize, j: usize| -> usize {
        let top = &orders[0][v];
        match top.iter().position(|&x| x == j) {
            Some(i) => i,
            None => top.len() + orders[1][v].iter().position(|&x| x == j).unwrap_or(0),
        }
    };
    let slots: Vec<usize> = (0..n).map(|v| (orders[0][v].len() + orders[1][v].len()).max(1)).collect();
    let mut xs = vec![0i64; n];
    let mut x = 0;
    for &v in perm {
        xs[v] = x;
        x += (slots[v] as i64 - 1) * ALPHA + 400;
    }
    let col = |l: &Literal, j: usize| xs[l.var] + slot(l.var, j) as i64 * ALPHA;
    let span = |j: usize| {
        let c: Vec<i64> = clauses[j].iter().map(|l| col(l, j)).collect();
        (*c.iter().min().unwrap_or(&0), *c.iter().max().unwrap_or(&0))
    };
    let mut level = vec![0i64; clauses.len()];
    let mut by_width: Vec<usize> = (0..clauses.len()).collect();
    by_width.sort_by_key(|&j| span(j).1 - span(j).0);
    for &a in &by_width {
        let (lo, hi) = span(a);
        level[a] = by_width
            .iter()
            .filter(|&&b| b != a && side(b) == side(a) && span(b).0 > lo && span(b).1 < hi)
            .map(|&b| level[b] + 1)
            .max()
            .unwrap_or(0);
    }
    let variables =
        (0..n).map(|v| EmbeddedVariable { name: format!("v{}", v + 1), x: xs[v], slots: slots[v] }).collect();
    let mut out = Vec::new();
    for (j, c) in clauses.iter().enumerate() {
        let mut lits: Vec<Literal> = c.to_vec();
        lits.sort_by_key(|l| col(l, j));
        let height = 300 + 300 * level[j];
        let wire =
            |l: &Literal, turns: Vec<i64>| EmbeddedWire { var: l.var, negated: l.negated, slot: slot(l.var, j), turns };
        let (at, wires) = if side(j) {
            let cx = col(&lits[0], j) + 150;
            (
                [cx, height],
                [wire(&lits[0], vec![]), wire(&lits[1], vec![height + 60]), wire(&lits[2], vec![height + 120])],
            )
        } else {
            let cx = col(&lits[2], j) - 150;
            (
                [cx, -height],
                [wire(&lits[2], vec![]), wire(&lits[1], vec![-height - 60]), wire(&lits[0], vec![-height - 120])],
            )
        };
        out.push(EmbeddedClause { at, wires });
    }
    Embedding { gamma: Some(1), variables, clauses: out }
}

// ------------------------------------------------------------- verification

fn orient_i(a: IPt, b: IPt, c: IPt) -> i128 {
    (b.0 - a.0) as i128 * (c.1 - a.1) as i128 - (b.1 - a.1) as i128 * (c.0 - a.0) as i128
}

fn strictly_inside(s: &Seg, p: IPt) -> bool {
    p != s.0
        && p != s.1
        && orient_i(s.0, s.1, p) == 0
        && p.0 >= s.0 .0.min(s.1 .0)
        && p.0 <= s.0 .0.max(s.1 .0)
        && p.1 >= s.0 .1.min(s.1 .1)
        && p.1 <= s.0 .1.max(s.1 .1)
}

/// Two segments cannot both be triangulation edges.
fn segments_conflict(a: &Seg, b: &Seg) -> bool {
    if (a.0 == b.0 && a.1 == b.1) || (a.0 == b.1 && a.1 == b.0) {
        return false;
    }
    let o1 = orient_i(a.0, a.1, b.0).signum();
    let o2 = orient_i(a.0, a.1, b.1).signum();
    let o3 = orient_i(b.0, b.1, a.0).signum();
    let o4 = orient_i(b.0, b.1, a.1).signum();
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    strictly_inside(a, b.0) || strictly_inside(a, b.1) || strictly_inside(b, a.0) || strictly_inside(b, a.1)
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Interpolated paraboloid height at `r` if `r` lies in the closed triangle.
fn interpolate(t: &[IPt; 3], r: &QPoint) -> Option<Q> {
    let d = orient_i(t[0], t[1], t[2]);
    if d == 0 {
        return None;
    }
    let d = Q::from_integer(d.into());
    let (a, b, c) = (qp(t[0]), qp(t[1]), qp(t[2]));
    let det = |p: &QPoint, u: &QPoint, v: &QPoint| (&u.x - &p.x) * (&v.y - &p.y) - (&u.y - &p.y) * (&v.x - &p.x);
    let la = det(r, &b, &c) / &d;
    let lb = det(&a, r, &c) / &d;
    let lc = det(&a, &b, r) / &d;
    if la.is_negative() || lb.is_negative() || lc.is_negative() {
        return None;
    }
    Some(la * q(paraboloid_f(t[0])) + lb * q(paraboloid_f(t[1])) + lc * q(paraboloid_f(t[2])))
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub zero_error: bool,
    /// Sum of squared residuals over all references.
    pub error: Q,
    /// Clauses whose reference has no usable triangle.
    pub violated_clauses: Vec<usize>,
    /// References with a nonzero residual in the completed triangulation.
    pub violated_refs: Vec<QPoint>,
    pub triangles: Vec<[IPt; 3]>,
    pub decisions: usize,
}

struct Csp {
    opt_ref: Vec<usize>,
    opt_bit: Vec<u8>,
    ref_opts: Vec<Vec<usize>>,
    conflicts: Vec<Vec<usize>>,
    active: Vec<bool>,
}

impl Csp {
    fn propagate(&self, dom: &mut [u8], mut stack: Vec<usize>) -> bool {
        while let Some(r) = stack.pop() {
            let o = self.ref_opts[r][dom[r].trailing_zeros() as usize];
            for &c in &self.conflicts[o] {
                let cr = self.opt_ref[c];
                let bit = 1u8 << self.opt_bit[c];
                if dom[cr] & bit == 0 {
                    continue;
                }
                dom[cr] &= !bit;
                if self.active[cr] {
                    match dom[cr].count_ones() {
                        0 => return false,
                        1 => stack.push(cr),
                        _ => {}
                    }
                }
            }
        }
        true
    }

    fn search(&self, dom: &mut Vec<u8>, decisions: &mut usize) -> bool {
        let open =
            (0..dom.len()).filter(|&r| self.active[r] && dom[r].count_ones() > 1).min_by_key(|&r| dom[r].count_ones());
        let Some(r) = open else { return true };
        for bit in 0..8 {
            if dom[r] >> bit & 1 == 0 {
                continue;
            }
            *decisions += 1;
            let mut d = dom.clone();
            d[r] = 1 << bit;
            if self.propagate(&mut d, vec![r]) && self.search(&mut d, decisions) {
                *dom = d;
                return true;
            }
        }
        false
    }
}

/// Builds the signal-consistent edge set for `assignment`, completes it to a
/// constrained triangulation and evaluates every reference exactly.
pub fn verify_assignment(inst: &HardnessInstance, assignment: &[bool]) -> Result<VerifyReport, HardnessError> {
    if assignment.len() != inst.variables.len() {
        return Err(HardnessError::Assignment { got: assignment.len(), want: inst.variables.len() });
    }
    let g = &inst.gadget;
    let refs: Vec<&CoupledRef> = g.refs.values().collect();
    let mut opt_segs: Vec<Vec<Seg>> = Vec::new();
    let mut csp = Csp {
        opt_ref: Vec::new(),
        opt_bit: Vec::new(),
        ref_opts: Vec::new(),
        conflicts: Vec::new(),
        active: Vec::new(),
    };
    for (i, r) in refs.iter().enumerate() {
        let mut opts: Vec<Vec<Seg>> = Vec::new();
        if let Some(e) = r.edge {
            opts.push(vec![e]);
        }
        if let (Some(pe), Some(ne)) = (r.pos_edge, r.neg_edge) {
            opts.push(vec![pe]);
            opts.push(vec![ne]);
        }
        for t in &r.triangles {
            opts.push(vec![(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]);
        }
        if opts.is_empty() {
            return Err(HardnessError::Inconsistent(format!("reference ({}, {}) has no edge options", r.r.x, r.r.y)));
        }
        let mut ids = Vec::new();
        for (b, o) in opts.into_iter().enumerate() {
            csp.opt_ref.push(i);
            csp.opt_bit.push(b as u8);
            ids.push(opt_segs.len());
            opt_segs.push(o);
        }
        csp.ref_opts.push(ids);
        csp.active.push(!(r.role == RefRole::Clause && matches!(r.owner, Owner::Clause(_))));
    }
    for o in &opt_segs {
        for s in o {
            let (dx, dy) = sub(s.1, s.0);
            let k = gcd(dx, dy);
            for m in 1..k {
                let p = add(s.0, (dx / k * m, dy / k * m));
                if g.s_points.contains(&p) {
                    return Err(HardnessError::Inconsistent(format!("edge {s:?} runs through {p:?}")));
                }
            }
        }
    }
    // conflict graph through a uniform grid over segment boxes
    const CELL: i64 = 8;
    let mut grid: HashMap<IPt, Vec<(usize, usize)>> = HashMap::new();
    for (o, segs) in opt_segs.iter().enumerate() {
        for (si, s) in segs.iter().enumerate() {
            let (x0, x1) = (s.0 .0.min(s.1 .0).div_euclid(CELL), s.0 .0.max(s.1 .0).div_euclid(CELL));
            let (y0, y1) = (s.0 .1.min(s.1 .1).div_euclid(CELL), s.0 .1.max(s.1 .1).div_euclid(CELL));
            for cx in x0..=x1 {
                for cy in y0..=y1 {
                    grid.entry((cx, cy)).or_default().push((o, si));
                }
            }
        }
    }
    let mut pairs: HashSet<(usize, usize)> = HashSet::new();
    for cell in grid.values() {
        for (i, &(o1, s1)) in cell.iter().enumerate() {
            for &(o2, s2) in &cell[i + 1..] {
                if csp.opt_ref[o1] == csp.opt_ref[o2] || pairs.contains(&(o1.min(o2), o1.max(o2))) {
                    continue;
                }
                if segments_conflict(&opt_segs[o1][s1], &opt_segs[o2][s2]) {
                    pairs.insert((o1.min(o2), o1.max(o2)));
                }
            }
        }
    }
    csp.conflicts = vec![Vec::new(); opt_segs.len()];
    for &(a, b) in &pairs {
        csp.conflicts[a].push(b);
        csp.conflicts[b].push(a);
    }
    let mut dom: Vec<u8> = csp.ref_opts.iter().map(|o| ((1u16 << o.len()) - 1) as u8).collect();
    for (i, r) in refs.iter().enumerate() {
        if let (Owner::Variable(v), Some(_)) = (r.owner, r.pos_edge) {
            let base = usize::from(r.edge.is_some());
            dom[i] = 1 << (base + usize::from(!assignment[v]));
        }
    }
    let start: Vec<usize> = (0..refs.len()).filter(|&r| csp.active[r] && dom[r].count_ones() == 1).collect();
    let mut decisions = 0;
    if !csp.propagate(&mut dom, start) || !csp.search(&mut dom, &mut decisions) {
        return Err(HardnessError::Inconsistent("no signal-consistent edge set".into()));
    }
    let mut violated_clauses = Vec::new();
    let mut edges: BTreeSet<Seg> = BTreeSet::new();
    for (i, r) in refs.iter().enumerate() {
        if dom[i] == 0 {
            if let Owner::Clause(j) = r.owner {
                violated_clauses.push(j);
            }
            continue;
        }
        let o = csp.ref_opts[i][dom[i].trailing_zeros() as usize];
        for s in &opt_segs[o] {
            edges.insert(canon(*s));
        }
    }
    violated_clauses.sort_unstable();
    let pts: Vec<IPt> = g.s_points.iter().copied().collect();
    let index: HashMap<IPt, usize> = pts.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut triangles = Vec::new();
    let mut error = Q::zero();
    let mut violated_refs = Vec::new();
    if pts.len() >= 3 {
        let verts: Vec<spade::Point2<f64>> = pts.iter().map(|p| spade::Point2::new(p.0 as f64, p.1 as f64)).collect();
        let cons: Vec<[usize; 2]> = edges.iter().map(|s| [index[&s.0], index[&s.1]]).collect();
        let cdt = ConstrainedDelaunayTriangulation::<spade::Point2<f64>>::bulk_load_cdt(verts, cons)
            .map_err(|e| HardnessError::Inconsistent(format!("{e:?}")))?;
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); pts.len()];
        for f in cdt.inner_faces() {
            let v = f.vertices().map(|v| v.fix().index());
            for &x in &v {
                incident[x].push(triangles.len());
            }
            triangles.push(v.map(|x| pts[x]));
        }
        for r in &refs {
            let p = spade::Point2::new(r.r.x.to_f64().unwrap_or(0.0), r.r.y.to_f64().unwrap_or(0.0));
            let near: Vec<usize> = match cdt.locate(p) {
                PositionInTriangulation::OnVertex(v) => vec![v.index()],
                PositionInTriangulation::OnEdge(e) => cdt.directed_edge(e).vertices().map(|v| v.fix().index()).to_vec(),
                PositionInTriangulation::OnFace(f) => cdt.face(f).vertices().map(|v| v.fix().index()).to_vec(),
                _ => Vec::new(),
            };
            let mut value =
                near.iter().flat_map(|&v| incident[v].iter()).find_map(|&t| interpolate(&triangles[t], &r.r));
            if value.is_none() {
                value = triangles.iter().find_map(|t| interpolate(t, &r.r));
            }
            let res = value.map(|v| v - &r.h);
            match res {
                Some(x) if x.is_zero() => {}
                Some(x) => {
                    error += &x * &x;
                    violated_refs.push(r.r.clone());
                }
                None => violated_refs.push(r.r.clone()),
            }
        }
    } else if !refs.is_empty() {
        violated_refs.extend(refs.iter().map(|r| r.r.clone()));
    }
    Ok(VerifyReport {
        zero_error: violated_refs.is_empty() && violated_clauses.is_empty(),
        error,
        violated_clauses,
        violated_refs,
        triangles,
        decisions,
    })
}

#[derive(Debug, Clone)]
pub struct ExhaustiveReport {
    pub triangulations: usize,
    /// Every triangulation with exactly zero error.
    pub witnesses: Vec<Vec<Triangle>>,
    /// Smallest absolute residual per reference; `None` if never covered.
    pub min_residual: Vec<Option<Q>>,
}

impl ExhaustiveReport {
    pub fn any_zero(&self) -> bool {
        !self.witnesses.is_empty()
    }
}

pub fn exhaustive_zero_error(
    points: &[IPt],
    f: &[Q],
    refs: &[QPoint],
    h: &[Q],
) -> Result<ExhaustiveReport, HardnessError> {
    exhaustive_zero_error_restricted(points, f, refs, h, &|_, _| true)
}

/// As [`exhaustive_zero_error`] over triangulations whose edges pass `edge_ok`.
pub fn exhaustive_zero_error_restricted(
    points: &[IPt],
    f: &[Q],
    refs: &[QPoint],
    h: &[Q],
    edge_ok: &dyn Fn(usize, usize) -> bool,
) -> Result<ExhaustiveReport, HardnessError> {
    let fp: Vec<Point2> = points.iter().map(|p| Point2::new(p.0 as f64, p.1 as f64)).collect();
    let mut rep = ExhaustiveReport { triangulations: 0, witnesses: Vec::new(), min_residual: vec![None; refs.len()] };
    let n = enumerate_restricted(&fp, &|_| true, edge_ok, ZERO_ERROR_CAP, &mut |tris| {
        let mut zero = true;
        for (k, r) in refs.iter().enumerate() {
            let res = tris.iter().find_map(|t| {
                let d = orient_i(points[t.a], points[t.b], points[t.c]);
                if d == 0 {
                    return None;
                }
                let dq = Q::from_integer(d.into());
                let (a, b, c) = (qp(points[t.a]), qp(points[t.b]), qp(points[t.c]));
                let det =
                    |p: &QPoint, u: &QPoint, v: &QPoint| (&u.x - &p.x) * (&v.y - &p.y) - (&u.y - &p.y) * (&v.x - &p.x);
                let (la, lb, lc) = (det(r, &b, &c) / &dq, det(&a, r, &c) / &dq, det(&a, &b, r) / &dq);
                if la.is_negative() || lb.is_negative() || lc.is_negative() {
                    return None;
                }
                Some((la * &f[t.a] + lb * &f[t.b] + lc * &f[t.c] - &h[k]).abs())
            });
            match res {
                Some(x) => {
                    zero &= x.is_zero();
                    if rep.min_residual[k].as_ref().is_none_or(|m| x < *m) {
                        rep.min_residual[k] = Some(x);
                    }
                }
                None => zero = false,
            }
        }
        if zero {
            rep.witnesses.push(tris.to_vec());
        }
        true
    })?;
    rep.triangulations = n;
    Ok(rep)
}

// --------------------------------------------------------------------- json

pub fn rational_json(x: &Q) -> Value {
    let n = x.numer();
    let d = x.denom();
    let num = n.to_i64().map_or_else(|| json!(n.to_string()), |v| json!(v));
    let den = d.to_i64().map_or_else(|| json!(d.to_string()), |v| json!(v));
    json!({ "num": num, "den": den })
}

fn point_json(p: &QPoint) -> Value {
    json!([rational_json(&p.x), rational_json(&p.y)])
}

pub fn gadget_json(g: &Gadget) -> Value {
    let refs: Vec<Value> = g
        .refs
        .values()
        .map(|r| {
            json!({
                "r": point_json(&r.r),
                "center": point_json(&r.circle.center),
                "radius_sq": rational_json(&r.circle.radius_sq),
                "h": rational_json(&r.h),
                "role": r.role,
                "owner": r.owner,
                "pos_edge": r.pos_edge.map(|s| [s.0, s.1]),
                "neg_edge": r.neg_edge.map(|s| [s.0, s.1]),
                "triangles": r.triangles,
                "edge": r.edge.map(|s| [s.0, s.1]),
            })
        })
        .collect();
    json!({
        "s_points": g.s_points.iter().map(|p| [p.0, p.1, paraboloid_f(*p)]).collect::<Vec<_>>(),
        "refs": refs,
        "forbidden": g.forbidden.iter().map(|p| [p.0, p.1]).collect::<Vec<_>>(),
        "anchors": g.anchors.iter().map(|p| [p.0, p.1]).collect::<Vec<_>>(),
        "mandatory_edges": g.mandatory_edges,
    })
}

pub fn instance_json(inst: &HardnessInstance) -> Value {
    let mut v = gadget_json(&inst.gadget);
    v["variables"] = json!(inst.variables);
    v["clauses"] = json!(inst.clauses);
    v["gamma"] = json!(inst.gamma);
    v["gadgets"] = json!({
        "variable": inst.variable_gadgets,
        "clause": inst.clause_gadgets,
        "negation": inst.negation_gadgets,
    });
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn lit(v: usize, n: bool) -> Literal {
        Literal { var: v, negated: n }
    }

    #[test]
    fn paraboloid_and_plane_examples() {
        assert_eq!(paraboloid_f((0, 0)), 0);
        assert_eq!(paraboloid_f((1, 1)), 2);
        assert_eq!(paraboloid_f((-3, 4)), 25);
        let c = circle(qp((0, 0)), q(2));
        assert_eq!(href(&c, &qp((0, 0))), q(2));
        assert_eq!(q(paraboloid_f((2, 0))) - href(&c, &qp((2, 0))), q(2));
        assert_eq!(href(&circle(qp((1, 0)), q(1)), &qp((1, 0))), q(2));
    }

    #[test]
    fn bit_layout() {
        let b = make_bit((0, 0), Orientation::Horizontal);
        let want: BTreeSet<IPt> = [(-1, -1), (-1, 1), (1, -1), (1, 1), (0, 1), (0, -1)].into();
        assert_eq!(b.s_points, want);
        let r = b.refs.values().next().unwrap();
        assert_eq!(r.circle.radius_sq, q(2));
        assert_eq!(r.pos_edge, Some(((-1, -1), (1, 1))));
        assert!(b.check_invariants().is_empty());
        let v = make_bit((5, 7), Orientation::Vertical);
        let want: BTreeSet<IPt> = [(4, 6), (6, 6), (4, 8), (6, 8), (4, 7), (6, 7)].into();
        assert_eq!(v.s_points, want);
        let r = v.refs.values().next().unwrap();
        assert_eq!(r.pos_edge.map(|s| (s.0.min(s.1), s.0.max(s.1))), Some(((4, 6), (6, 8))));
        assert_eq!(r.role, RefRole::Bit { orientation: Orientation::Vertical });
        assert!(v.forbidden.contains(&(5, 8)) && v.forbidden.contains(&(5, 5)));
    }

    #[test]
    fn wire_examples() {
        let w = make_wire_segment((0, 0), (3, 0)).unwrap();
        assert_eq!(w.refs.len(), 4);
        assert_eq!(w.anchors, [(0, 0), (3, 0)].into());
        assert_eq!(make_wire_segment((0, 0), (0, 2)).unwrap().refs.len(), 3);
        assert_eq!(make_wire_segment((0, 0), (1, 1)), Err(HardnessError::NotAxisAligned((0, 0), (1, 1))));
        let a = make_wire_segment((0, 0), (3, 0)).unwrap();
        let b = make_wire_segment((3, 0), (7, 0)).unwrap();
        assert_eq!(combine(&a, &b).unwrap().anchors, [(0, 0), (7, 0)].into());
        let same = make_wire_segment((1, 0), (5, 0)).unwrap();
        let mut same2 = same.clone();
        same2.anchors.insert((0, 0));
        assert!(combine(&a, &same2).is_ok());
        let c = make_wire_segment((1, -3), (1, 3)).unwrap();
        let mut c2 = c.clone();
        c2.anchors.insert((0, 0));
        assert!(matches!(combine(&a, &c2), Err(HardnessError::ForbiddenOverlap(_))));
        let far = make_wire_segment((10, 0), (12, 0)).unwrap();
        assert_eq!(combine(&a, &far), Err(HardnessError::NoSharedAnchor));
    }

    #[test]
    fn multiplier_layout() {
        let m = make_multiplier((0, 0));
        assert_eq!(m.anchors, [(2, 0), (-2, 0), (0, 2), (0, -2)].into());
        let inner = m.refs.values().find(|r| r.role == RefRole::Inner).unwrap();
        let on: Vec<IPt> = m.s_points.iter().copied().filter(|&p| circle_side(&inner.circle, &qp(p)) == 0).collect();
        assert_eq!(on.len(), 8);
        assert!(m.check_invariants().is_empty());
        let mut g = m.clone();
        for (a, b) in [((2, 0), (9, 0)), ((-2, 0), (-9, 0)), ((0, 2), (0, 9)), ((0, -2), (0, -9))] {
            g = combine(&g, &make_wire_segment(a, b).unwrap()).unwrap();
        }
        assert_eq!(g.anchors, [(9, 0), (-9, 0), (0, 9), (0, -9)].into());
        let clash = make_wire_segment((0, 0), (0, 2)).unwrap();
        assert!(combine(&m, &clash).is_err());
    }

    #[test]
    fn clause_geometry() {
        let c = make_clause((0, 0));
        assert!(c.check_invariants().is_empty(), "{:?}", c.check_invariants());
        let rc = c.refs.get(&(q(0), q(11))).unwrap();
        assert_eq!(rc.triangles.len(), 3);
        for t in &rc.triangles {
            assert_eq!(interpolate(t, &rc.r), Some(rc.h.clone()));
        }
        let r1 = c.refs.get(&(qf(-12 * 5 + 27, 5), q(-17))).unwrap();
        assert_eq!(r1.role, RefRole::Crossing);
        let (pe, ne) = (r1.pos_edge.unwrap(), r1.neg_edge.unwrap());
        assert_eq!(line_intersection(&pe, &ne), QPoint::new(qf(-33, 5), q(-17)));
        let cc = circumcircle(&qp(pe.0), &qp(pe.1), &qp(ne.0)).unwrap();
        assert_eq!(circle_side(&cc, &qp(ne.1)), 0);
        assert_eq!(c.anchors, [(-12, -17), (17, 12), (-17, 12)].into());
        assert_eq!(c.mandatory_edges.iter().filter(|e| e.long).count(), 3);
        let moved = make_clause((100, -40));
        assert_eq!(moved.refs.len(), c.refs.len());
        assert!(moved.check_invariants().is_empty());
    }

    #[test]
    fn clause_edges_block_their_triangles() {
        let c = make_clause((0, 0));
        let rc = c.refs.get(&(q(0), q(11))).unwrap();
        let crossings: Vec<&CoupledRef> = c.refs.values().filter(|r| r.role == RefRole::Crossing).collect();
        let blocks =
            |t: &[IPt; 3], s: &Seg| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])].iter().any(|e| segments_conflict(e, s));
        // T1, T2 blocked by a positive edge; T3 by a negative one
        let want = [(0, true), (1, true), (2, false)];
        for (ti, t) in rc.triangles.iter().enumerate() {
            let blockers: Vec<(usize, bool)> = crossings
                .iter()
                .enumerate()
                .flat_map(|(k, r)| {
                    [(true, r.pos_edge.unwrap()), (false, r.neg_edge.unwrap())]
                        .into_iter()
                        .filter(|(_, s)| blocks(t, s))
                        .map(move |(p, _)| (k, p))
                })
                .collect();
            assert_eq!(blockers.len(), 1, "triangle {ti}");
            assert_eq!(blockers[0].1, want[ti].1);
        }
    }

    #[test]
    fn negation_layout() {
        let n = make_negation((0, 0));
        assert_eq!(n.anchors, [(0, -2), (0, 40)].into());
        assert!(n.check_invariants().is_empty());
        assert_eq!(n.mandatory_edges.iter().filter(|e| e.long).count(), 4);
        let clause_refs = n.refs.values().filter(|r| r.role == RefRole::Clause).count();
        assert_eq!(clause_refs, 2);
    }

    #[test]
    fn mandatory_replacement() {
        let mut g = Gadget::default();
        g.s_points.extend([(0, 0), (2, 0), (1, 5)]);
        g.mandatory_edges.push(MandatoryEdge { s: (0, 0), t: (2, 0), long: false });
        let r = replace_mandatory_edges(&g).unwrap();
        assert!(r.mandatory_edges.is_empty());
        let e = r.refs.get(&(q(1), q(0))).unwrap();
        assert_eq!(e.circle.radius_sq, q(1));
        assert_eq!(e.h, q(1) + q(0) + q(4) / q(4));
        assert!(r.forbidden.contains(&(1, 0)) && r.forbidden.contains(&(1, 1)));
        g.s_points.insert((1, 1));
        assert_eq!(replace_mandatory_edges(&g), Err(HardnessError::CircleNotEmpty((0, 0), (2, 0))));
        g.mandatory_edges[0].long = true;
        g.s_points.insert((1, -1));
        assert_eq!(replace_mandatory_edges(&g), Err(HardnessError::SquareNotEmpty((0, 0), (2, 0))));

        let c = replace_mandatory_edges(&make_clause((0, 0))).unwrap();
        assert!(c.check_invariants().is_empty());
        for r in c.refs.values().filter(|r| r.role == RefRole::Mandatory { long: true }) {
            let (s, t) = r.edge.unwrap();
            let diam = circle(r.r.clone(), q(paraboloid_f(sub(t, s))) / q(4));
            assert!(disk_lattice(&diam).iter().any(|p| *p != s && *p != t && c.s_points.contains(p)));
        }
    }

    #[test]
    fn isolated_bit_needs_a_signal_edge() {
        let b = make_bit((0, 0), Orientation::Horizontal);
        let (pts, f, refs, h) = b.arrays();
        let rep = exhaustive_zero_error(&pts, &f, &refs, &h).unwrap();
        assert!(rep.any_zero());
        let idx = |p: IPt| pts.iter().position(|&x| x == p).unwrap();
        let has = |t: &[Triangle], a: usize, b: usize| t.iter().any(|x| x.contains_vertex(a) && x.contains_vertex(b));
        let (pa, pb, na, nb) = (idx((-1, -1)), idx((1, 1)), idx((-1, 1)), idx((1, -1)));
        for w in &rep.witnesses {
            assert!(has(w, pa, pb) || has(w, na, nb));
        }
        let without = |a: usize, b: usize| {
            !((a.min(b), a.max(b)) == (pa.min(pb), pa.max(pb)) || (a.min(b), a.max(b)) == (na.min(nb), na.max(nb)))
        };
        let rep = exhaustive_zero_error_restricted(&pts, &f, &refs, &h, &without).unwrap();
        assert!(!rep.any_zero());
    }

    #[test]
    fn transformed_instances_keep_their_errors() {
        let w = make_wire_segment((0, 0), (1, 0)).unwrap();
        let (pts, f, refs, h) = w.arrays();
        let base = exhaustive_zero_error(&pts, &f, &refs, &h).unwrap();
        for turns in 1..4 {
            let t = w.rotate_quarter(turns).translate((7, -3));
            let (p2, f2, r2, h2) = t.arrays();
            let rep = exhaustive_zero_error(&p2, &f2, &r2, &h2).unwrap();
            assert_eq!(rep.triangulations, base.triangulations);
            assert_eq!(rep.witnesses.len(), base.witnesses.len());
            let mut a: Vec<Option<Q>> = base.min_residual.clone();
            let mut b = rep.min_residual.clone();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    fn brute_sat(n: usize, cl: &[[Literal; 3]]) -> Option<Vec<bool>> {
        (0..1u32 << n)
            .map(|m| (0..n).map(|i| m >> i & 1 == 1).collect::<Vec<_>>())
            .find(|a| cl.iter().all(|c| c.iter().any(|l| l.eval(a))))
    }

    #[test]
    fn single_clause_reduction() {
        let cl = [[lit(0, false), lit(1, true), lit(2, true)]];
        let emb = auto_embedding(3, &cl).unwrap();
        let inst = build_instance(&emb).unwrap();
        assert_eq!((inst.variable_gadgets, inst.clause_gadgets), (3, 1));
        assert!(inst.gadget.check_invariants().is_empty());
        let rep = verify_assignment(&inst, &[true, true, true]).unwrap();
        assert!(rep.zero_error && rep.error.is_zero(), "{:?}", rep.violated_refs.len());
        let rep = verify_assignment(&inst, &[false, true, true]).unwrap();
        assert_eq!(rep.violated_clauses, vec![0]);
        assert!(rep.violated_refs.contains(&qp((0, 11)).clone()) || !rep.violated_refs.is_empty());
        assert!(rep.error.is_positive());
    }

    #[test]
    fn empty_formula_is_trivial() {
        let emb = Embedding { gamma: None, variables: vec![], clauses: vec![] };
        let inst = build_instance(&emb).unwrap();
        assert!(verify_assignment(&inst, &[]).unwrap().zero_error);
    }

    #[test]
    fn overlap_and_malformed() {
        let v = |x| EmbeddedVariable { name: "v".into(), x, slots: 1 };
        let emb = Embedding { gamma: Some(1), variables: vec![v(0), v(1)], clauses: vec![] };
        let r = build_instance(&emb);
        assert!(matches!(r, Err(HardnessError::OverlapDetected(_))), "{:?}", r.err());
        let w = EmbeddedWire { var: 5, negated: false, slot: 0, turns: vec![] };
        let emb = Embedding {
            gamma: Some(1),
            variables: vec![v(0)],
            clauses: vec![EmbeddedClause { at: [100, 300], wires: [w.clone(), w.clone(), w] }],
        };
        assert!(matches!(build_instance(&emb), Err(HardnessError::MalformedEmbedding(_))));
    }

    #[test]
    fn example_formula_reduction() {
        let cl = [
            [lit(0, true), lit(1, false), lit(3, false)],
            [lit(0, false), lit(1, true), lit(2, false)],
            [lit(0, false), lit(2, true), lit(3, true)],
        ];
        let emb = auto_embedding(4, &cl).unwrap();
        let inst = build_instance(&emb).unwrap();
        assert_eq!((inst.variable_gadgets, inst.clause_gadgets), (4, 3));
        assert!(brute_sat(4, &cl).is_some());
        for m in 0..16u32 {
            let a: Vec<bool> = (0..4).map(|i| m >> i & 1 == 1).collect();
            let sat = cl.iter().all(|c| c.iter().any(|l| l.eval(&a)));
            let rep = verify_assignment(&inst, &a).unwrap();
            assert_eq!(rep.zero_error, sat, "assignment {a:?}");
            assert_eq!(rep.error.is_zero(), sat);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn plane_identity(cx in -50i64..50, cy in -50i64..50, cd in 1i64..9, r2 in 1i64..400, yx in -60i64..60, yy in -60i64..60, yd in 1i64..9) {
            let c = circle(QPoint::new(qf(cx, cd), qf(cy, cd)), qf(r2, 3));
            let y = QPoint::new(qf(yx, yd), qf(yy, yd));
            let fy = &y.x * &y.x + &y.y * &y.y;
            prop_assert_eq!(fy - href(&c, &y), y.dist_sq(&c.center) - &c.radius_sq);
        }

        #[test]
        fn cocircular_triangles_interpolate_the_plane(seed in 0u64..10_000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let t: [IPt; 3] = std::array::from_fn(|_| (rng.gen_range(-30..30), rng.gen_range(-30..30)));
            prop_assume!(orient_i(t[0], t[1], t[2]) != 0);
            let c = circumcircle(&qp(t[0]), &qp(t[1]), &qp(t[2])).unwrap();
            let w: [i64; 3] = std::array::from_fn(|_| rng.gen_range(1..20));
            let s = w.iter().sum::<i64>();
            let r = QPoint::new(
                (0..3).map(|i| qf(w[i] * t[i].0, s)).fold(Q::zero(), |a, b| a + b),
                (0..3).map(|i| qf(w[i] * t[i].1, s)).fold(Q::zero(), |a, b| a + b),
            );
            prop_assert_eq!(interpolate(&t, &r), Some(href(&c, &r)));
        }
    }
}
