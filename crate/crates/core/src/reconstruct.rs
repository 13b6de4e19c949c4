//! Train-at-`i`, evaluate-at-`j` sea-surface reconstruction.
//!
//! For an epoch pair the stations valid at both epochs are projected around
//! the anchor. The optimal k-OD triangulation is trained on the epoch-`i`
//! station values and altimetry, then lifted with the epoch-`j` station values
//! and scored against the epoch-`j` altimetry, next to the plain Delaunay
//! triangulation of the same stations.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::delaunay::{delaunay_triangulate, hull_boundary, DelaunayError, Triangulation};
use crate::geo_ingest::{demean, lap_project, AltimetryGrid, IngestError, ProjectionAnchor, StationSeries};
use crate::geom::Point2;
use crate::solver::{min_error_triangulation, SolveError, SolveOptions};
use crate::weights::{hull_edge_set, in_hull, triangle_weight, Instance, RefGrid, WeightsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconError {
    #[error("only {0} stations valid at both epochs")]
    TooFewStations(usize),
    #[error("only {0} reference points inside the hull")]
    TooFewRefs(usize),
    #[error("no results with temporal difference {0}")]
    EmptyGroup(i64),
    #[error("epoch pair ({0}, {1}) violates the stride")]
    Stride(i64, i64),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Delaunay(#[from] DelaunayError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
}

/// Stations and altimetry, keyed by epoch.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub stations: Vec<StationSeries>,
    pub altimetry: BTreeMap<i64, AltimetryGrid>,
}

impl Dataset {
    /// De-means every station series.
    pub fn demeaned(mut self) -> Result<Dataset, ReconError> {
        self.stations = self.stations.iter().map(demean).collect::<Result<_, _>>()?;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReconConfig {
    pub anchor: ProjectionAnchor,
    pub stride: i64,
    pub enforce_stride: bool,
    pub solve: SolveOptions,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            anchor: ProjectionAnchor { lambda0: -40.0, phi0: 16.0 },
            stride: 12,
            enforce_stride: true,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommonStations {
    pub ids: Vec<String>,
    pub points: Vec<Point2>,
    pub f_i: Vec<f64>,
    pub f_j: Vec<f64>,
}

/// Stations valid at both epochs, projected. Antipodal stations and repeated
/// projected positions are skipped.
pub fn common_stations(
    i: i64,
    j: i64,
    stations: &[StationSeries],
    anchor: &ProjectionAnchor,
) -> Result<CommonStations, ReconError> {
    let mut out = CommonStations { ids: Vec::new(), points: Vec::new(), f_i: Vec::new(), f_j: Vec::new() };
    let mut seen = HashSet::new();
    for s in stations {
        let (Some(a), Some(b)) = (s.value(i), s.value(j)) else { continue };
        let Ok(p) = lap_project(s.lon, s.lat, anchor) else {
            log::warn!("station {} is antipodal to the anchor", s.station_id);
            continue;
        };
        if !seen.insert((p.x.to_bits(), p.y.to_bits())) {
            continue;
        }
        out.ids.push(s.station_id.clone());
        out.points.push(p);
        out.f_i.push(a);
        out.f_j.push(b);
    }
    if out.points.len() < 3 {
        return Err(ReconError::TooFewStations(out.points.len()));
    }
    Ok(out)
}

/// Projected altimetry cells as reference points with values.
pub fn project_grid(grid: &AltimetryGrid, anchor: &ProjectionAnchor) -> (Vec<Point2>, Vec<f64>) {
    let mut refs = Vec::with_capacity(grid.cells.len());
    let mut h = Vec::with_capacity(grid.cells.len());
    for &(lon, lat, v) in &grid.cells {
        if let Ok(p) = lap_project(lon, lat, anchor) {
            refs.push(p);
            h.push(v);
        }
    }
    (refs, h)
}

/// Sum of squared residuals over the hull references divided by their
/// count minus one.
pub fn empirical_variance(tri: &Triangulation, f: &[f64], refs: &[Point2], h: &[f64]) -> Result<f64, ReconError> {
    let inst = Instance::new(tri.points.clone(), f.to_vec(), refs.to_vec(), h.to_vec())?;
    let hull = hull_boundary(&inst.points)?;
    let n = refs.iter().filter(|&&r| in_hull(&inst.points, &hull, r)).count();
    if n < 2 {
        return Err(ReconError::TooFewRefs(n));
    }
    let hull_edges = hull_edge_set(&inst.points)?;
    let grid = RefGrid::new(&inst.refs);
    let mut scratch = Vec::new();
    let sum: f64 = tri.triangles.iter().map(|t| triangle_weight(&inst, &hull_edges, &grid, t, &mut scratch).0).sum();
    Ok(sum / (n as f64 - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionResult {
    pub i: i64,
    pub j: i64,
    pub k: usize,
    pub n_stations: usize,
    pub n_refs: usize,
    pub sigma2_m: f64,
    pub sigma2_d: f64,
    pub delta_sigma2: f64,
    pub train_error: f64,
    pub preprocess_secs: f64,
    pub optimize_secs: f64,
}

fn grid_at(data: &Dataset, e: i64) -> Result<&AltimetryGrid, ReconError> {
    data.altimetry.get(&e).ok_or(ReconError::Ingest(IngestError::EpochMissing(e)))
}

pub fn reconstruct(
    i: i64,
    j: i64,
    k: usize,
    data: &Dataset,
    cfg: &ReconConfig,
) -> Result<ReconstructionResult, ReconError> {
    if cfg.enforce_stride && (i - j) % cfg.stride != 0 {
        return Err(ReconError::Stride(i, j));
    }
    let g = common_stations(i, j, &data.stations, &cfg.anchor)?;
    let (refs_i, h_i) = project_grid(grid_at(data, i)?, &cfg.anchor);
    let (refs_j, h_j) = project_grid(grid_at(data, j)?, &cfg.anchor);
    let train = Instance::new(g.points.clone(), g.f_i.clone(), refs_i, h_i)?.clip_to_hull()?;
    let dm = min_error_triangulation(&train, k, &cfg.solve)?;
    let dd = delaunay_triangulate(&g.points)?;
    let sigma2_m = empirical_variance(&dm.triangulation, &g.f_j, &refs_j, &h_j)?;
    let sigma2_d = empirical_variance(&dd, &g.f_j, &refs_j, &h_j)?;
    Ok(ReconstructionResult {
        i,
        j,
        k,
        n_stations: g.points.len(),
        n_refs: train.refs.len(),
        sigma2_m,
        sigma2_d,
        delta_sigma2: sigma2_m - sigma2_d,
        train_error: dm.error,
        preprocess_secs: dm.stats.preprocess_secs,
        optimize_secs: dm.stats.optimize_secs,
    })
}

/// Pairs `i >= j` of altimetry epochs whose difference is a multiple of `stride`.
pub fn epoch_pairs(data: &Dataset, stride: i64) -> Vec<(i64, i64)> {
    let epochs: Vec<i64> = data.altimetry.keys().copied().collect();
    let mut out = Vec::new();
    for &i in &epochs {
        for &j in &epochs {
            if j <= i && (i - j) % stride == 0 {
                out.push((i, j));
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub results: Vec<ReconstructionResult>,
    pub failures: Vec<(i64, i64, usize, String)>,
}

/// Runs every pair for every order in parallel; results keep input order.
pub fn run_experiment(data: &Dataset, pairs: &[(i64, i64)], ks: &[usize], cfg: &ReconConfig) -> ExperimentOutput {
    let jobs: Vec<(i64, i64, usize)> = pairs.iter().flat_map(|&(i, j)| ks.iter().map(move |&k| (i, j, k))).collect();
    let outs: Vec<_> = jobs.par_iter().map(|&(i, j, k)| (i, j, k, reconstruct(i, j, k, data, cfg))).collect();
    let mut res = ExperimentOutput { results: Vec::new(), failures: Vec::new() };
    for (i, j, k, r) in outs {
        match r {
            Ok(r) => res.results.push(r),
            Err(e) => {
                log::warn!("pair ({i}, {j}) k={k}: {e}");
                res.failures.push((i, j, k, e.to_string()));
            }
        }
    }
    res
}

/// Mean `delta_sigma2` over results with `|i - j| == delta_d`.
pub fn average_variance_reduction(results: &[ReconstructionResult], delta_d: i64) -> Result<f64, ReconError> {
    let g: Vec<f64> = results.iter().filter(|r| (r.i - r.j).abs() == delta_d).map(|r| r.delta_sigma2).collect();
    if g.is_empty() {
        return Err(ReconError::EmptyGroup(delta_d));
    }
    Ok(g.iter().sum::<f64>() / g.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QRow {
    pub delta_d: i64,
    pub k: usize,
    pub q: f64,
    pub count: usize,
}

/// `q(delta_d)` per order, sorted by order then difference.
pub fn q_table(results: &[ReconstructionResult]) -> Vec<QRow> {
    let mut groups: BTreeMap<(usize, i64), Vec<f64>> = BTreeMap::new();
    for r in results {
        groups.entry((r.k, (r.i - r.j).abs())).or_default().push(r.delta_sigma2);
    }
    groups
        .into_iter()
        .map(|((k, d), v)| QRow { delta_d: d, k, q: v.iter().sum::<f64>() / v.len() as f64, count: v.len() })
        .collect()
}

pub fn write_csv<T: Serialize, W: std::io::Write>(rows: &[T], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Parameters of a synthetic sea surface sampled by stations and a grid.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_stations: usize,
    pub n_epochs: i64,
    pub lon: (f64, f64),
    pub lat: (f64, f64),
    pub resolution: f64,
    pub noise_cm: f64,
    /// Probability that a station epoch is missing.
    pub gap_rate: f64,
    /// Surface affine in the projected plane of this anchor instead of waves.
    pub planar: Option<ProjectionAnchor>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 1,
            n_stations: 60,
            n_epochs: 25,
            lon: (-60.0, -20.0),
            lat: (0.0, 30.0),
            resolution: 1.0,
            noise_cm: 1.0,
            gap_rate: 0.05,
            planar: None,
        }
    }
}

fn surface(cfg: &SyntheticConfig, lon: f64, lat: f64, t: i64) -> f64 {
    let tt = t as f64;
    if let Some(a) = cfg.planar {
        let p = lap_project(lon, lat, &a).expect("anchor inside the region");
        return 3.0 * (tt * std::f64::consts::FRAC_PI_6).sin() + (2.0 + 0.1 * tt) * p.x - 4.0 * p.y;
    }
    let season = 8.0 * (std::f64::consts::TAU * tt / 12.0).sin();
    let wave = 12.0 * (0.15 * lon + 0.2 * lat + 0.3 * tt).sin() + 6.0 * (0.35 * lat - 0.1 * lon - 0.05 * tt).cos();
    let eddy = 10.0 * (-((lon + 40.0 + 5.0 * (0.2 * tt).sin()).powi(2) + (lat - 15.0).powi(2)) / 30.0).exp();
    season + wave + eddy
}

/// Synthetic stations (values in cm) and altimetry grids.
pub fn synthetic_dataset(cfg: &SyntheticConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stations = Vec::with_capacity(cfg.n_stations);
    for s in 0..cfg.n_stations {
        let lon = rng.gen_range(cfg.lon.0..cfg.lon.1);
        let lat = rng.gen_range(cfg.lat.0..cfg.lat.1);
        let mut values = BTreeMap::new();
        for t in 0..cfg.n_epochs {
            let gap = rng.gen_bool(cfg.gap_rate);
            let noise = cfg.noise_cm * (rng.gen::<f64>() - 0.5) * 2.0;
            values.insert(t, (!gap).then(|| surface(cfg, lon, lat, t) + noise));
        }
        stations.push(StationSeries { station_id: format!("S{s:04}"), lon, lat, values });
    }
    let mut altimetry = BTreeMap::new();
    let nx = ((cfg.lon.1 - cfg.lon.0) / cfg.resolution).floor() as usize;
    let ny = ((cfg.lat.1 - cfg.lat.0) / cfg.resolution).floor() as usize;
    for t in 0..cfg.n_epochs {
        let mut cells = Vec::with_capacity(nx * ny);
        for a in 0..nx {
            for b in 0..ny {
                let lon = cfg.lon.0 + (a as f64 + 0.5) * cfg.resolution;
                let lat = cfg.lat.0 + (b as f64 + 0.5) * cfg.resolution;
                cells.push((lon, lat, surface(cfg, lon, lat, t)));
            }
        }
        altimetry.insert(t, AltimetryGrid { epoch: t, cells, resolution: cfg.resolution, skipped: 0 });
    }
    Dataset { stations, altimetry }
}

/// Station CSV with values in mm.
pub fn write_stations_csv<W: std::io::Write>(stations: &[StationSeries], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["station_id", "lon", "lat", "epoch", "value_mm"])?;
    for s in stations {
        for (e, v) in &s.values {
            let val = v.map_or(String::new(), |x| (x * 10.0).to_string());
            wr.write_record([s.station_id.clone(), s.lon.to_string(), s.lat.to_string(), e.to_string(), val])?;
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn write_altimetry_csv<W: std::io::Write>(grids: &BTreeMap<i64, AltimetryGrid>, w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["epoch", "lon", "lat", "anomaly_cm"])?;
    for g in grids.values() {
        for &(lon, lat, v) in &g.cells {
            wr.write_record([g.epoch.to_string(), lon.to_string(), lat.to_string(), v.to_string()])?;
        }
    }
    wr.flush()?;
    Ok(())
}
