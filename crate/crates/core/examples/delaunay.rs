//! Delaunay triangulation with exact predicates on a grid full of
//! cocircular quadruples.

use hodt::delaunay::delaunay_triangulate;
use hodt::geom::exact::{circumcircle, QPoint};
use hodt::geom::{validate_general_position, Point2};

fn main() {
    let pts: Vec<Point2> = (0..6).flat_map(|i| (0..6).map(move |j| Point2::new(i as f64, j as f64))).collect();
    let t = delaunay_triangulate(&pts).expect("non-degenerate set");
    t.validate().expect("valid triangulation");
    let gp = validate_general_position(&pts);
    println!("{} points, {} triangles, {} edges", pts.len(), t.triangles.len(), t.edges.len());
    println!("collinear triples {}, cocircular quadruples {}", gp.collinear.len(), gp.cocircular.len());
    let c = circumcircle(&QPoint::int(0, 0), &QPoint::int(4, 0), &QPoint::int(2, 3)).unwrap();
    println!("circumcircle of (0,0),(4,0),(2,3): center ({}, {}), r^2 {}", c.center.x, c.center.y, c.radius_sq);
}
