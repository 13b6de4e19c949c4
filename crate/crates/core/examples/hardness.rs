//! Reduces a small 3SAT formula to a zero-error triangulation instance and
//! checks every assignment.

use hodt::hardness::{auto_embedding, build_instance, verify_assignment, Literal};

fn main() {
    let l = |v: usize, n: bool| Literal { var: v, negated: n };
    let clauses = [[l(0, false), l(1, true), l(2, false)], [l(1, false), l(2, true), l(3, false)]];
    let emb = auto_embedding(4, &clauses).expect("layout exists");
    println!("{}", serde_json::to_string(&emb).unwrap());
    let inst = build_instance(&emb).expect("embedding is valid");
    println!(
        "{} points, {} references, {} negation gadgets",
        inst.gadget.s_points.len(),
        inst.gadget.refs.len(),
        inst.negation_gadgets
    );
    for m in 0..16u32 {
        let a: Vec<bool> = (0..4).map(|i| m >> i & 1 == 1).collect();
        let rep = verify_assignment(&inst, &a).unwrap();
        println!("{a:?} zero_error={} error={} violated={:?}", rep.zero_error, rep.error, rep.violated_clauses);
    }
}
