//! Random point-set generators and the fixed-edge-graph statistics harness.
//!
//! Every generator is a pure function of its seed. The RNG is ChaCha8 from
//! `rand_chacha` 0.3; Type 2 draws disk `d` (0..4) from stream `d + 1` of the
//! seed so the disks do not depend on each other's draw counts. Sample `i` of
//! an experiment with base seed `s` uses seed [`sample_seed`]`(s, i)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point2;
use crate::hod::{decompose_faces, edge_orders, HodError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RandgenError {
    #[error("invalid radii: need 0 <= r2 < r1 (got r1={0}, r2={1})")]
    InvalidRadii(f64, f64),
    #[error("need at least {0} points")]
    TooFewPoints(usize),
    #[error("sample {0}: {1}")]
    Sample(usize, HodError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleType {
    Type1,
    Type2,
    Type3,
    Projected,
}

#[derive(Debug, Clone)]
pub enum Generator {
    Type1 {
        radius: f64,
    },
    Type2 {
        radius: f64,
    },
    Type3 {
        r1: f64,
        r2: f64,
    },
    /// Pre-built point sets, one per sample.
    Projected {
        sets: Vec<Vec<Point2>>,
    },
}

impl Generator {
    pub fn sample_type(&self) -> SampleType {
        match self {
            Generator::Type1 { .. } => SampleType::Type1,
            Generator::Type2 { .. } => SampleType::Type2,
            Generator::Type3 { .. } => SampleType::Type3,
            Generator::Projected { .. } => SampleType::Projected,
        }
    }

    pub fn generate(&self, n: usize, seed: u64, index: usize) -> Result<Vec<Point2>, RandgenError> {
        match self {
            Generator::Type1 { radius } => Ok(gen_type1(n, *radius, seed)),
            Generator::Type2 { radius } => Ok(gen_type2(n, *radius, seed)),
            Generator::Type3 { r1, r2 } => gen_type3(n, *r1, *r2, seed),
            Generator::Projected { sets } => Ok(sets[index % sets.len()].clone()),
        }
    }
}

/// Derived per-sample seed (splitmix64 of the pair).
pub fn sample_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn disk_point(rng: &mut ChaCha8Rng, radius: f64) -> (f64, f64) {
    let r = radius * rng.gen::<f64>().sqrt();
    let a = std::f64::consts::TAU * rng.gen::<f64>();
    (r * a.cos(), r * a.sin())
}

/// `n` uniform points in the disk of `radius` around the origin.
pub fn gen_type1(n: usize, radius: f64, seed: u64) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| disk_point(&mut rng, radius).into()).collect()
}

/// Four disks centered at `(+-2r, +-2r)`, i.e. on a square of side twice
/// the diameter; `n` is the total, split as evenly as possible.
pub fn gen_type2(n: usize, radius: f64, seed: u64) -> Vec<Point2> {
    let c = 2.0 * radius;
    let centers = [(-c, -c), (c, -c), (c, c), (-c, c)];
    let mut out = Vec::with_capacity(n);
    for (d, &(cx, cy)) in centers.iter().enumerate() {
        let count = n / 4 + usize::from(d < n % 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(d as u64 + 1);
        for _ in 0..count {
            let (x, y) = disk_point(&mut rng, radius);
            out.push(Point2::new(cx + x, cy + y));
        }
    }
    out
}

/// Uniform points in the annulus `r2 < |p| <= r1` by rejection.
pub fn gen_type3(n: usize, r1: f64, r2: f64, seed: u64) -> Result<Vec<Point2>, RandgenError> {
    if !(r2 >= 0.0 && r2 < r1) {
        return Err(RandgenError::InvalidRadii(r1, r2));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (x, y) = disk_point(&mut rng, r1);
        if (x * x + y * y).sqrt() > r2 {
            out.push(Point2::new(x, y));
        }
    }
    Ok(out)
}

/// Per-sample, per-order statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStats {
    pub k: usize,
    pub avg_components: f64,
    pub c_max: usize,
    pub f_edges: usize,
    pub isolated: usize,
    pub connected: bool,
}

/// Statistics of one point set for every `k` in `ks`, from a single order pass.
pub fn sample_stats(points: &[Point2], ks: &[usize]) -> Result<Vec<SampleStats>, HodError> {
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let eo = edge_orders(points, kmax)?;
    Ok(ks
        .iter()
        .map(|&k| {
            let f = eo.fixed_edges(k);
            let fd = decompose_faces(&f, points);
            SampleStats {
                k,
                avg_components: fd.avg_components(),
                c_max: fd.c_max,
                f_edges: f.edges.len(),
                isolated: f.isolated_vertices().len(),
                connected: f.is_connected(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub sample_type: SampleType,
    pub n: usize,
    pub k: usize,
    pub avg_components: f64,
    pub avg_cmax: f64,
    pub min_cmax: usize,
    pub max_cmax: usize,
    pub samples: usize,
    pub seed: u64,
}

/// Runs `samples` independent samples in parallel and aggregates in sample order.
pub fn cmax_experiment(
    gen: &Generator,
    n: usize,
    ks: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<StatsRow>, RandgenError> {
    if n < 3 {
        return Err(RandgenError::TooFewPoints(3));
    }
    let per: Vec<Vec<SampleStats>> = (0..samples.max(1))
        .into_par_iter()
        .map(|i| {
            let pts = gen.generate(n, sample_seed(seed, i), i)?;
            sample_stats(&pts, ks).map_err(|e| RandgenError::Sample(i, e))
        })
        .collect::<Result<_, _>>()?;
    Ok(aggregate(gen.sample_type(), n, ks, &per, seed))
}

pub fn aggregate(
    sample_type: SampleType,
    n: usize,
    ks: &[usize],
    per: &[Vec<SampleStats>],
    seed: u64,
) -> Vec<StatsRow> {
    ks.iter()
        .enumerate()
        .map(|(ki, &k)| {
            let cm: Vec<usize> = per.iter().map(|s| s[ki].c_max).collect();
            let m = per.len() as f64;
            StatsRow {
                sample_type,
                n,
                k,
                avg_components: per.iter().map(|s| s[ki].avg_components).sum::<f64>() / m,
                avg_cmax: cm.iter().sum::<usize>() as f64 / m,
                min_cmax: cm.iter().copied().min().unwrap_or(0),
                max_cmax: cm.iter().copied().max().unwrap_or(0),
                samples: per.len(),
                seed,
            }
        })
        .collect()
}

pub fn write_stats_csv<W: std::io::Write>(rows: &[StatsRow], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Outcome of a randomized hunt for a point set whose `F_2` is disconnected.
#[derive(Debug, Clone)]
pub struct WitnessSearch {
    pub tried: usize,
    pub witness: Option<Vec<Point2>>,
}

/// Tries `attempts` small random sets (sizes cycling through `sizes`) and
/// keeps the first one with a disconnected `F_2`.
pub fn search_disconnected_f2(attempts: usize, sizes: &[usize], seed: u64) -> WitnessSearch {
    for i in 0..attempts {
        let n = sizes[i % sizes.len()];
        let s = sample_seed(seed, i);
        let pts = if i % 2 == 0 { gen_type1(n, 1.0, s) } else { gen_type2(n.max(4), 1.0, s) };
        if let Ok(eo) = edge_orders(&pts, 2) {
            if !eo.fixed_edges(2).is_connected() {
                return WitnessSearch { tried: i + 1, witness: Some(pts) };
            }
        }
    }
    WitnessSearch { tried: attempts, witness: None }
}
