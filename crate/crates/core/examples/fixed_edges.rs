//! Fixed-edge graphs of a random disk sample for several orders.

use std::time::Instant;

use hodt::hod::{decompose_faces, edge_orders};
use hodt::randgen::gen_type1;

fn main() {
    let points = gen_type1(500, 1.0, 7);
    let t = Instant::now();
    let orders = edge_orders(&points, 7).expect("valid sample");
    println!("edge orders up to 7: {} candidate edges in {:?}", orders.edges.len(), t.elapsed());
    for k in 0..=7 {
        let f = orders.fixed_edges(k);
        let fd = decompose_faces(&f, &points);
        println!(
            "k={k} |F_k|={} faces={} c_max={} avg_components={:.3}",
            f.edges.len(),
            fd.faces.len(),
            fd.c_max,
            fd.avg_components()
        );
    }
}
