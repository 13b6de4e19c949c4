//! Minimum-error triangulation of a random terrain sample for growing k,
//! checked against exhaustive enumeration on a small instance.

use hodt::randgen::gen_type1;
use hodt::solver::{brute_force_min, min_error_triangulation, SolveOptions};
use hodt::weights::Instance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn terrain(x: f64, y: f64) -> f64 {
    (3.0 * x).sin() + (2.0 * y).cos() + 0.5 * x * y
}

fn instance(n: usize, m: usize, seed: u64) -> Instance {
    let points = gen_type1(n, 1.0, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let refs: Vec<_> = gen_type1(m, 0.9, seed + 1);
    let f = points.iter().map(|p| terrain(p.x, p.y)).collect();
    let h = refs.iter().map(|p| terrain(p.x, p.y) + rng.gen_range(-0.01..0.01)).collect();
    Instance::new(points, f, refs, h).expect("consistent sizes")
}

fn main() {
    let inst = instance(200, 2000, 11);
    for k in 0..=5 {
        let r = min_error_triangulation(&inst, k, &SolveOptions::default()).expect("solvable");
        println!(
            "k={k} error={:.6} c_max={} dp_cells={} preprocess={:.3}s optimize={:.3}s",
            r.error, r.stats.c_max, r.stats.dp_cells, r.stats.preprocess_secs, r.stats.optimize_secs
        );
    }
    let small = instance(9, 30, 4);
    let dp = min_error_triangulation(&small, 2, &SolveOptions::default()).unwrap();
    let (_, brute) = brute_force_min(&small, 2, 11).unwrap();
    println!("n=9 k=2: dp {:.9} brute force {:.9}", dp.error, brute);
}
