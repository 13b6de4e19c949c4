//! Tide-gauge and altimetry loading plus the Lambert azimuthal equal-area
//! projection.
//!
//! Station CSV: `station_id,lon,lat,epoch,value_mm`. An empty value, `NaN`
//! or `-99999` marks a missing epoch. Altimetry CSV: `epoch,lon,lat,anomaly_cm`.
//! Epochs count months since 1993-01.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("line {line}: coordinates ({lon}, {lat}) out of range")]
    Range { line: u64, lon: f64, lat: f64 },
    #[error("epoch {0} not present in the altimetry files")]
    EpochMissing(i64),
    #[error("station {0} has no valid epochs")]
    NoValidEpochs(String),
    #[error("point is antipodal to the projection anchor")]
    AntipodalPoint,
    #[error("invalid time frame {0:?}, expected start:end")]
    TimeFrame(String),
}

/// Inclusive epoch range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeFrame {
    pub start: i64,
    pub end: i64,
}

impl TimeFrame {
    pub fn contains(&self, e: i64) -> bool {
        self.start <= e && e <= self.end
    }
}

impl FromStr for TimeFrame {
    type Err = IngestError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IngestError::TimeFrame(s.to_string());
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let start: i64 = a.trim().parse().map_err(|_| bad())?;
        let end: i64 = b.trim().parse().map_err(|_| bad())?;
        if start > end {
            return Err(bad());
        }
        Ok(TimeFrame { start, end })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationSeries {
    pub station_id: String,
    pub lon: f64,
    pub lat: f64,
    /// Epoch to value in cm; `None` is an explicit missing marker.
    pub values: BTreeMap<i64, Option<f64>>,
}

impl StationSeries {
    pub fn value(&self, epoch: i64) -> Option<f64> {
        self.values.get(&epoch).copied().flatten()
    }

    pub fn valid_epochs(&self) -> usize {
        self.values.values().filter(|v| v.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationLoad {
    pub stations: Vec<StationSeries>,
    /// Stations without a valid epoch inside the time frame.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AltimetryGrid {
    pub epoch: i64,
    /// `(lon, lat, anomaly_cm)`
    pub cells: Vec<(f64, f64, f64)>,
    pub resolution: f64,
    /// Rows dropped for NaN values or repeated cells.
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionAnchor {
    pub lambda0: f64,
    pub phi0: f64,
}

impl ProjectionAnchor {
    pub fn new(lambda0: f64, phi0: f64) -> Result<Self, IngestError> {
        if !valid_lon_lat(lambda0, phi0) {
            return Err(IngestError::Range { line: 0, lon: lambda0, lat: phi0 });
        }
        Ok(ProjectionAnchor { lambda0, phi0 })
    }
}

impl FromStr for ProjectionAnchor {
    type Err = IngestError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| {
            t.trim().parse::<f64>().map_err(|e| IngestError::Parse { line: 0, msg: format!("anchor {s:?}: {e}") })
        };
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| IngestError::Parse { line: 0, msg: format!("anchor {s:?}: expected lon,lat") })?;
        ProjectionAnchor::new(parse(a)?, parse(b)?)
    }
}

fn valid_lon_lat(lon: f64, lat: f64) -> bool {
    (-180.0..=180.0).contains(&lon) && (-90.0..=90.0).contains(&lat)
}

fn open(path: &Path) -> Result<csv::Reader<File>, IngestError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| IngestError::Io { path: path.display().to_string(), msg: e.to_string() })
}

fn parse_err(rec: &csv::StringRecord, msg: impl Into<String>) -> IngestError {
    IngestError::Parse { line: rec.position().map_or(0, |p| p.line()), msg: msg.into() }
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T, IngestError> {
    let s = rec.get(i).ok_or_else(|| parse_err(rec, format!("missing column {name}")))?;
    s.parse().map_err(|_| parse_err(rec, format!("bad {name} {s:?}")))
}

fn check_header(rd: &mut csv::Reader<File>, want: &[&str], path: &Path) -> Result<(), IngestError> {
    let h = rd.headers().map_err(|e| IngestError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    if h.iter().collect::<Vec<_>>() != want {
        return Err(IngestError::Parse { line: 1, msg: format!("expected header {}", want.join(",")) });
    }
    Ok(())
}

fn read_err(path: &Path, e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    if line > 0 {
        IngestError::Parse { line, msg: e.to_string() }
    } else {
        IngestError::Io { path: path.display().to_string(), msg: e.to_string() }
    }
}

/// Loads station series; values outside `frame` are discarded.
pub fn load_stations(path: &Path, frame: Option<TimeFrame>) -> Result<StationLoad, IngestError> {
    let mut rd = open(path)?;
    check_header(&mut rd, &["station_id", "lon", "lat", "epoch", "value_mm"], path)?;
    let mut order: Vec<String> = Vec::new();
    let mut by_id: BTreeMap<String, StationSeries> = BTreeMap::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| read_err(path, e))?;
        let id = rec.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(parse_err(&rec, "empty station_id"));
        }
        let lon: f64 = field(&rec, 1, "lon")?;
        let lat: f64 = field(&rec, 2, "lat")?;
        if !valid_lon_lat(lon, lat) {
            return Err(IngestError::Range { line: rec.position().map_or(0, |p| p.line()), lon, lat });
        }
        let epoch: i64 = field(&rec, 3, "epoch")?;
        let raw = rec.get(4).unwrap_or("");
        let value = if raw.is_empty() || raw.eq_ignore_ascii_case("nan") {
            None
        } else {
            let v: f64 = field(&rec, 4, "value_mm")?;
            (v != -99999.0 && v.is_finite()).then_some(v / 10.0)
        };
        let s = by_id.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            StationSeries { station_id: id, lon, lat, values: BTreeMap::new() }
        });
        if frame.is_none_or(|f| f.contains(epoch)) {
            s.values.insert(epoch, value);
        }
    }
    let mut stations = Vec::new();
    let mut dropped = 0;
    for id in order {
        let s = by_id.remove(&id).expect("station recorded");
        if s.valid_epochs() == 0 {
            log::info!("dropping station {} without valid epochs", s.station_id);
            dropped += 1;
        } else {
            stations.push(s);
        }
    }
    Ok(StationLoad { stations, dropped })
}

fn altimetry_files(path: &Path) -> Result<Vec<PathBuf>, IngestError> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let io = |e: std::io::Error| IngestError::Io { path: path.display().to_string(), msg: e.to_string() };
    let mut files = Vec::new();
    for ent in std::fs::read_dir(path).map_err(io)? {
        let p = ent.map_err(io)?.path();
        if p.extension().is_some_and(|e| e == "csv") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

fn grid_resolution(cells: &[(f64, f64, f64)]) -> f64 {
    let mut lons: Vec<f64> = cells.iter().map(|c| c.0).collect();
    lons.sort_by(f64::total_cmp);
    lons.windows(2).map(|w| w[1] - w[0]).filter(|&d| d > 0.0).fold(0.0, |a: f64, d| if a == 0.0 { d } else { a.min(d) })
}

/// Every epoch found in a file or a directory of CSV files.
pub fn load_altimetry_all(path: &Path) -> Result<BTreeMap<i64, AltimetryGrid>, IngestError> {
    let mut grids: BTreeMap<i64, AltimetryGrid> = BTreeMap::new();
    let mut seen: HashSet<(i64, u64, u64)> = HashSet::new();
    for file in altimetry_files(path)? {
        let mut rd = open(&file)?;
        check_header(&mut rd, &["epoch", "lon", "lat", "anomaly_cm"], &file)?;
        for rec in rd.records() {
            let rec = rec.map_err(|e| read_err(&file, e))?;
            let epoch: i64 = field(&rec, 0, "epoch")?;
            let lon: f64 = field(&rec, 1, "lon")?;
            let lat: f64 = field(&rec, 2, "lat")?;
            if !valid_lon_lat(lon, lat) {
                return Err(IngestError::Range { line: rec.position().map_or(0, |p| p.line()), lon, lat });
            }
            let raw = rec.get(3).unwrap_or("");
            let v: f64 = if raw.is_empty() { f64::NAN } else { field(&rec, 3, "anomaly_cm")? };
            let g = grids.entry(epoch).or_insert_with(|| AltimetryGrid {
                epoch,
                cells: Vec::new(),
                resolution: 0.0,
                skipped: 0,
            });
            if !v.is_finite() || !seen.insert((epoch, lon.to_bits(), lat.to_bits())) {
                g.skipped += 1;
                continue;
            }
            g.cells.push((lon, lat, v));
        }
    }
    for g in grids.values_mut() {
        g.resolution = grid_resolution(&g.cells);
        if g.skipped > 0 {
            log::warn!("epoch {}: skipped {} altimetry rows", g.epoch, g.skipped);
        }
    }
    Ok(grids)
}

pub fn load_altimetry(path: &Path, epoch: i64) -> Result<AltimetryGrid, IngestError> {
    let mut all = load_altimetry_all(path)?;
    all.remove(&epoch).ok_or(IngestError::EpochMissing(epoch))
}

/// Subtracts the mean over valid epochs.
pub fn demean(series: &StationSeries) -> Result<StationSeries, IngestError> {
    let valid: Vec<f64> = series.values.values().filter_map(|v| *v).collect();
    if valid.is_empty() {
        return Err(IngestError::NoValidEpochs(series.station_id.clone()));
    }
    let mean = valid.iter().sum::<f64>() / valid.len() as f64;
    let mut out = series.clone();
    for x in out.values.values_mut().flatten() {
        *x -= mean;
    }
    Ok(out)
}

/// Forward Lambert azimuthal equal-area projection on the unit sphere.
pub fn lap_project(lon: f64, lat: f64, anchor: &ProjectionAnchor) -> Result<Point2, IngestError> {
    let (phi, phi0) = (lat.to_radians(), anchor.phi0.to_radians());
    let dl = (lon - anchor.lambda0).to_radians();
    let denom = 1.0 + phi0.sin() * phi.sin() + phi0.cos() * phi.cos() * dl.cos();
    if denom <= 1e-12 {
        return Err(IngestError::AntipodalPoint);
    }
    let kp = (2.0 / denom).sqrt();
    Ok(Point2::new(kp * phi.cos() * dl.sin(), kp * (phi0.cos() * phi.sin() - phi0.sin() * phi.cos() * dl.cos())))
}

/// Cell-center anchors of an `n_lon` by `n_lat` grid over the sphere,
/// longitude varying fastest.
pub fn anchor_grid(n_lon: usize, n_lat: usize) -> Vec<ProjectionAnchor> {
    let mut out = Vec::with_capacity(n_lon * n_lat);
    for r in 0..n_lat {
        for c in 0..n_lon {
            out.push(ProjectionAnchor {
                lambda0: -180.0 + (c as f64 + 0.5) * 360.0 / n_lon as f64,
                phi0: -90.0 + (r as f64 + 0.5) * 180.0 / n_lat as f64,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    const STATIONS: &str = "station_id,lon,lat,epoch,value_mm
A,-10,40,0,100
A,-10,40,1,200
B,5,50,0,-99999
B,5,50,1,300
C,20,-30,0,
C,20,-30,1,50
";

    #[test]
    fn loads_three_stations() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "s.csv", STATIONS);
        let l = load_stations(&p, None).unwrap();
        assert_eq!(l.stations.len(), 3);
        assert_eq!(l.stations[0].value(1), Some(20.0));
        assert_eq!(l.stations[1].values[&0], None);
        assert_eq!(l.stations[2].value(0), None);
    }

    #[test]
    fn out_of_range_lat() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "s.csv", "station_id,lon,lat,epoch,value_mm\nA,0,10,0,1\nB,0,95,0,1\n");
        assert_eq!(load_stations(&p, None), Err(IngestError::Range { line: 3, lon: 0.0, lat: 95.0 }));
    }

    #[test]
    fn parse_error_has_line() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "s.csv", "station_id,lon,lat,epoch,value_mm\nA,0,10,x,1\n");
        assert!(matches!(load_stations(&p, None), Err(IngestError::Parse { line: 2, .. })));
    }

    #[test]
    fn station_outside_frame_dropped() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "s.csv", STATIONS);
        let l = load_stations(&p, Some(TimeFrame { start: 0, end: 0 })).unwrap();
        assert_eq!(l.stations.len(), 1);
        assert_eq!(l.dropped, 2);
        assert_eq!(l.stations[0].station_id, "A");
    }

    #[test]
    fn altimetry_grid() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "a.csv", "epoch,lon,lat,anomaly_cm\n3,0,0,1.5\n3,0.25,0,2\n3,0,0.25,NaN\n4,0,0,1\n");
        write(d.path(), "b.csv", "epoch,lon,lat,anomaly_cm\n3,0.25,0.25,-1\n3,0.5,0.25,0\n");
        let g = load_altimetry(d.path(), 3).unwrap();
        assert_eq!(g.cells.len(), 4);
        assert_eq!(g.skipped, 1);
        assert_eq!(g.resolution, 0.25);
        assert_eq!(load_altimetry(d.path(), 9), Err(IngestError::EpochMissing(9)));
        let single = load_altimetry(&d.path().join("a.csv"), 4).unwrap();
        assert_eq!(single.cells, vec![(0.0, 0.0, 1.0)]);
    }

    fn series(v: &[Option<f64>]) -> StationSeries {
        StationSeries {
            station_id: "s".into(),
            lon: 0.0,
            lat: 0.0,
            values: v.iter().enumerate().map(|(i, &x)| (i as i64, x)).collect(),
        }
    }

    #[test]
    fn demean_examples() {
        let d = demean(&series(&[Some(10.0), Some(20.0), Some(30.0)])).unwrap();
        assert_eq!(d.values.values().copied().collect::<Vec<_>>(), vec![Some(-10.0), Some(0.0), Some(10.0)]);
        assert_eq!(demean(&series(&[Some(7.0)])).unwrap().value(0), Some(0.0));
        let g = demean(&series(&[Some(10.0), None, Some(30.0)])).unwrap();
        assert_eq!(g.values.values().copied().collect::<Vec<_>>(), vec![Some(-10.0), None, Some(10.0)]);
        assert!(matches!(demean(&series(&[None])), Err(IngestError::NoValidEpochs(_))));
    }

    #[test]
    fn projection_examples() {
        let a = ProjectionAnchor::new(-40.0, 16.0).unwrap();
        let p = lap_project(-40.0, 16.0, &a).unwrap();
        assert_eq!((p.x, p.y), (0.0, 0.0));
        let o = ProjectionAnchor::new(0.0, 0.0).unwrap();
        let n = lap_project(0.0, 90.0, &o).unwrap();
        assert!(n.x.abs() < 1e-15 && (n.y - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(lap_project(140.0, -16.0, &a), Err(IngestError::AntipodalPoint));
    }

    #[test]
    fn anchor_grids() {
        assert_eq!(anchor_grid(20, 20).len(), 400);
        assert_eq!(anchor_grid(1, 1), vec![ProjectionAnchor { lambda0: 0.0, phi0: 0.0 }]);
        let two = anchor_grid(2, 1);
        assert_eq!(two.iter().map(|a| (a.lambda0, a.phi0)).collect::<Vec<_>>(), vec![(-90.0, 0.0), (90.0, 0.0)]);
    }

    #[test]
    fn parse_frame_and_anchor() {
        assert_eq!("12:48".parse::<TimeFrame>().unwrap(), TimeFrame { start: 12, end: 48 });
        assert!("48:12".parse::<TimeFrame>().is_err());
        assert_eq!("-40,16".parse::<ProjectionAnchor>().unwrap(), ProjectionAnchor { lambda0: -40.0, phi0: 16.0 });
    }

    fn projected_area(lon: f64, lat: f64, d: f64, a: &ProjectionAnchor) -> f64 {
        let steps = 16;
        let mut ring = Vec::new();
        for (x0, y0, dx, dy) in
            [(lon, lat, d, 0.0), (lon + d, lat, 0.0, d), (lon + d, lat + d, -d, 0.0), (lon, lat + d, 0.0, -d)]
        {
            for s in 0..steps {
                let t = s as f64 / steps as f64;
                ring.push(lap_project(x0 + t * dx, y0 + t * dy, a).unwrap());
            }
        }
        let mut s = 0.0;
        for i in 0..ring.len() {
            let (p, q) = (ring[i], ring[(i + 1) % ring.len()]);
            s += p.x * q.y - p.y * q.x;
        }
        s / 2.0
    }

    proptest! {
        #[test]
        fn demean_idempotent(v in proptest::collection::vec(proptest::option::of(-500.0f64..500.0), 1..20)) {
            prop_assume!(v.iter().any(|x| x.is_some()));
            let once = demean(&series(&v)).unwrap();
            let twice = demean(&once).unwrap();
            let mean: f64 = once.values.values().flatten().sum::<f64>() / once.valid_epochs() as f64;
            prop_assert!(mean.abs() < 1e-9);
            for (a, b) in once.values.values().zip(twice.values.values()) {
                prop_assert_eq!(a.is_some(), b.is_some());
                if let (Some(a), Some(b)) = (a, b) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn projection_injective(l0 in -180.0f64..180.0, p0 in -89.0f64..89.0,
                                a in -180.0f64..180.0, b in -89.0f64..89.0, c in -180.0f64..180.0, d in -89.0f64..89.0) {
            let anc = ProjectionAnchor::new(l0, p0).unwrap();
            prop_assume!((a - c).abs() > 1e-6 || (b - d).abs() > 1e-6);
            if let (Ok(x), Ok(y)) = (lap_project(a, b, &anc), lap_project(c, d, &anc)) {
                prop_assert!(x.dist_sq(&y) > 0.0);
            }
        }

        #[test]
        fn equal_area(l0 in -180.0f64..180.0, p0 in -60.0f64..60.0, dl in -100.0f64..100.0, dp in -25.0f64..25.0) {
            let anc = ProjectionAnchor::new(l0, p0).unwrap();
            let (lon, lat) = (l0 + dl, p0 + dp);
            let d: f64 = 0.05;
            let sphere = d.to_radians() * ((lat + d).to_radians().sin() - lat.to_radians().sin());
            let plane = projected_area(lon, lat, d, &anc);
            prop_assert!((plane / sphere - 1.0).abs() < 1e-3, "{plane} vs {sphere}");
        }
    }
}
