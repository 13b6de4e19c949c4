//! `hodt` command line: argument parsing, I/O and exit codes.
//!
//! Exit codes: 0 success, 2 input error, 3 budget or time limit (a partial
//! document with a `status` field is still written).

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::geo_ingest::{load_altimetry_all, load_stations, ProjectionAnchor, TimeFrame};
use crate::geom::Point2;
use crate::hardness::{
    build_instance, gadget_json, instance_json, make_bit, make_clause, make_multiplier, make_negation,
    make_wire_segment, replace_mandatory_edges, verify_assignment, Embedding, Gadget, HardnessError, IPt, Orientation,
};
use crate::hod::{decompose_faces, fixed_edge_graph};
use crate::randgen::{cmax_experiment, write_stats_csv, Generator};
use crate::reconstruct::{epoch_pairs, q_table, run_experiment, write_csv, Dataset, ReconConfig};
use crate::solver::{
    brute_force_min, min_error_triangulation, SolveError, SolveOptions, DEFAULT_BUDGET, DEFAULT_ENUM_CAP,
};
use crate::weights::Instance;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hodt", version, about = "Higher-order Delaunay triangulation toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seconds per solve (reconstruction defaults to 3600).
    #[arg(long, global = true)]
    pub time_limit: Option<f64>,
    /// DP cell budget.
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    /// Inclusive epoch range `start:end`.
    #[arg(long, global = true)]
    pub time_frame: Option<TimeFrame>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimum-error k-order Delaunay triangulation.
    Triangulate(TriangulateArgs),
    /// Fixed-edge graph and its face decomposition.
    FixedEdges(FixedEdgesArgs),
    /// Sea-surface reconstruction experiment.
    Reconstruct(ReconstructArgs),
    /// c_max statistics of random point sets.
    RandgenStats(RandgenArgs),
    /// Hardness gadgets and full reductions.
    Gadget(GadgetArgs),
}

#[derive(Debug, Args)]
pub struct TriangulateArgs {
    /// CSV `x,y`.
    #[arg(long)]
    pub points: PathBuf,
    /// CSV `f`, one row per point.
    #[arg(long)]
    pub values: PathBuf,
    /// CSV `x,y`.
    #[arg(long)]
    pub refs: PathBuf,
    /// CSV `h`, one row per reference point.
    #[arg(long)]
    pub refvalues: PathBuf,
    #[arg(long)]
    pub k: usize,
    /// Cross-check against exhaustive enumeration.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FixedEdgesArgs {
    /// CSV `x,y`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub stations: PathBuf,
    /// Altimetry CSV file or directory of CSV files.
    #[arg(long)]
    pub altimetry_dir: PathBuf,
    #[arg(long, default_value = "-40,16", allow_hyphen_values = true)]
    pub anchor: ProjectionAnchor,
    /// `a..b`, `a,b,c` or a single order.
    #[arg(long, default_value = "0..7")]
    pub k: KRange,
    #[arg(long, default_value_t = 12)]
    pub stride: i64,
    /// Subtract each station's mean before use.
    #[arg(long)]
    pub demean: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional q(delta d) table.
    #[arg(long)]
    pub q_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PointType {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
}

#[derive(Debug, Args)]
pub struct RandgenArgs {
    #[arg(long = "type", value_enum)]
    pub kind: PointType,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value = "3..10")]
    pub k: KRange,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Disk radius (outer radius for type 3).
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Inner radius for type 3.
    #[arg(long, default_value_t = 0.5)]
    pub inner_radius: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GadgetKind {
    Bit,
    Wire,
    Multiplier,
    Clause,
    Negation,
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true)]
pub struct GadgetArgs {
    #[command(subcommand)]
    pub reduce: Option<GadgetCommand>,
    #[arg(long, value_enum)]
    pub kind: Option<GadgetKind>,
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub at: LatticePoint,
    /// Second endpoint of a wire.
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<LatticePoint>,
    /// Bit orientation.
    #[arg(long, default_value = "horizontal")]
    pub orientation: String,
    /// Replace mandatory edges by midpoint references.
    #[arg(long)]
    pub replace_mandatory: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GadgetCommand {
    /// Builds the instance of an embedded formula.
    Reduce {
        #[arg(long)]
        embedding: PathBuf,
        /// Comma-separated 0/1 values; verifies the assignment.
        #[arg(long)]
        assignment: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KRange(pub Vec<usize>);

impl std::str::FromStr for KRange {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("order {t:?}: {e}"));
        let ks = if let Some((a, b)) = s.split_once("..") {
            let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
            if a > b {
                return Err(format!("empty range {s:?}"));
            }
            (a..=b).collect()
        } else {
            s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
        };
        Ok(KRange(ks))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticePoint(pub IPt);

impl std::str::FromStr for LatticePoint {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("expected X,Y, got {s:?}"))?;
        let p = |t: &str| t.trim().parse::<i64>().map_err(|e| format!("{t:?}: {e}"));
        Ok(LatticePoint((p(a)?, p(b)?)))
    }
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    /// Budget or time limit; the partial document has been written.
    Limit(String),
    Failed(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Limit(_) => EXIT_BUDGET,
            CliError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Limit(m) => write!(f, "stopped: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Failed(format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let level = cli.global.log_level.parse().unwrap_or(log::LevelFilter::Warn);
    let _ = env_logger::Builder::new().filter_level(level).target(env_logger::Target::Stderr).try_init();
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("hodt: {e}");
            e.code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.global.threads {
        if t == 0 {
            return Err(CliError::Input("--threads must be positive".into()));
        }
        pool = pool.num_threads(t);
    }
    if cli.global.budget == 0 {
        return Err(CliError::Input("--budget must be positive".into()));
    }
    if let Some(t) = cli.global.time_limit {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Input(format!("--time-limit {t} must be positive")));
        }
    }
    let pool = pool.build().map_err(|e| CliError::Failed(e.to_string()))?;
    let g = &cli.global;
    pool.install(|| match &cli.command {
        Command::Triangulate(a) => triangulate(g, a),
        Command::FixedEdges(a) => fixed_edges(a),
        Command::Reconstruct(a) => reconstruct(g, a),
        Command::RandgenStats(a) => randgen_stats(g, a),
        Command::Gadget(a) => gadget(a),
    })
}

fn check_exists(paths: &[&Path]) -> Result<(), CliError> {
    for p in paths {
        if !p.exists() {
            return Err(CliError::Input(format!("{}: no such file or directory", p.display())));
        }
    }
    Ok(())
}

fn check_out_dir(out: Option<&Path>) -> Result<(), CliError> {
    if let Some(parent) = out.and_then(|p| p.parent()).filter(|p| !p.as_os_str().is_empty()) {
        if !parent.is_dir() {
            return Err(CliError::Input(format!("{}: output directory does not exist", parent.display())));
        }
    }
    Ok(())
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json(out: Option<&Path>, v: &Value) -> Result<(), CliError> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, v).map_err(|e| CliError::Failed(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::Failed(e.to_string()))
}

fn read_rows(path: &Path, cols: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| input(format!("{}: {e}", path.display())))?;
    let header = rd.headers().map_err(|e| input(format!("{}: {e}", path.display())))?.clone();
    let idx: Vec<usize> = cols
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| input(format!("{}: missing column {c:?}", path.display())))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| input(format!("{}: {e}", path.display())))?;
        let row = idx
            .iter()
            .map(|&i| {
                let t = rec.get(i).unwrap_or("");
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| input(format!("{} row {}: bad number {t:?}", path.display(), line + 1)))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn read_points(path: &Path) -> Result<Vec<Point2>, CliError> {
    Ok(read_rows(path, &["x", "y"])?.iter().map(|r| Point2::new(r[0], r[1])).collect())
}

fn read_column(path: &Path, col: &str) -> Result<Vec<f64>, CliError> {
    Ok(read_rows(path, &[col])?.into_iter().map(|r| r[0]).collect())
}

fn solve_opts(g: &GlobalOpts, default_limit: Option<f64>) -> SolveOptions {
    SolveOptions { budget: g.budget, time_limit: g.time_limit.or(default_limit).map(Duration::from_secs_f64) }
}

fn limit_status(e: &SolveError) -> Option<&'static str> {
    match e {
        SolveError::BudgetExceeded { .. } => Some("budget_exceeded"),
        SolveError::TimeLimit(_) => Some("time_limit"),
        _ => None,
    }
}

fn triangulate(g: &GlobalOpts, a: &TriangulateArgs) -> Result<(), CliError> {
    check_exists(&[&a.points, &a.values, &a.refs, &a.refvalues])?;
    check_out_dir(a.out.as_deref())?;
    let inst = Instance::new(
        read_points(&a.points)?,
        read_column(&a.values, "f")?,
        read_points(&a.refs)?,
        read_column(&a.refvalues, "h")?,
    )
    .map_err(input)?;
    let t = Instant::now();
    match min_error_triangulation(&inst, a.k, &solve_opts(g, None)) {
        Ok(res) => {
            let mut doc = res.triangulation.to_json();
            doc["error"] = json!(res.error);
            doc["status"] = json!("ok");
            doc["k"] = json!(a.k);
            doc["stats"] = json!({
                "faces": res.stats.faces,
                "faces_with_components": res.stats.faces_with_components,
                "c_max": res.stats.c_max,
                "bridge_sets": res.stats.bridge_sets,
                "dp_cells": res.stats.dp_cells,
            });
            eprintln!(
                "preprocess {:.3}s, optimize {:.3}s, total {:.3}s",
                res.stats.preprocess_secs,
                res.stats.optimize_secs,
                t.elapsed().as_secs_f64()
            );
            if a.oracle && inst.points.len() > DEFAULT_ENUM_CAP {
                log::warn!(
                    "oracle skipped: {} points exceed the enumeration cap {DEFAULT_ENUM_CAP}",
                    inst.points.len()
                );
                doc["oracle"] = json!({ "skipped": true });
            } else if a.oracle {
                let (_, best) =
                    brute_force_min(&inst, a.k, DEFAULT_ENUM_CAP).map_err(|e| CliError::Input(e.to_string()))?;
                let agree = (best - res.error).abs() <= 1e-9 * best.abs().max(1.0);
                doc["oracle"] = json!({ "error": best, "agrees": agree });
                if !agree {
                    write_json(a.out.as_deref(), &doc)?;
                    return Err(CliError::Failed(format!("oracle minimum {best} differs from {}", res.error)));
                }
            }
            write_json(a.out.as_deref(), &doc)
        }
        Err(e) => match limit_status(&e) {
            Some(status) => {
                write_json(a.out.as_deref(), &json!({ "status": status, "k": a.k, "message": e.to_string() }))?;
                Err(CliError::Limit(e.to_string()))
            }
            None => Err(CliError::Input(e.to_string())),
        },
    }
}

fn fixed_edges(a: &FixedEdgesArgs) -> Result<(), CliError> {
    check_exists(&[&a.input])?;
    check_out_dir(a.out.as_deref())?;
    let pts = read_points(&a.input)?;
    let f = fixed_edge_graph(&pts, a.k).map_err(input)?;
    let fd = decompose_faces(&f, &pts);
    let faces: Vec<Value> = fd
        .faces
        .iter()
        .map(|face| {
            json!({
                "boundary": face.boundary,
                "components": face.interior_components.len(),
                "interior_components": face.interior_components,
            })
        })
        .collect();
    let doc = json!({
        "k": a.k,
        "n": f.n,
        "edges": f.edges,
        "connected": f.is_connected(),
        "isolated_vertices": f.isolated_vertices(),
        "faces": faces,
        "c_max": fd.c_max,
        "avg_components": fd.avg_components(),
    });
    write_json(a.out.as_deref(), &doc)
}

/// One output row per (pair, order); failed runs keep their status.
#[derive(Debug, Serialize, Deserialize)]
struct ReconRow {
    i: i64,
    j: i64,
    k: usize,
    status: String,
    n_stations: Option<usize>,
    n_refs: Option<usize>,
    sigma2_m: Option<f64>,
    sigma2_d: Option<f64>,
    delta_sigma2: Option<f64>,
    train_error: Option<f64>,
}

fn reconstruct(g: &GlobalOpts, a: &ReconstructArgs) -> Result<(), CliError> {
    check_exists(&[&a.stations, &a.altimetry_dir])?;
    check_out_dir(Some(&a.out))?;
    check_out_dir(a.q_out.as_deref())?;
    if a.stride <= 0 {
        return Err(CliError::Input(format!("--stride {} must be positive", a.stride)));
    }
    let t = Instant::now();
    let load = load_stations(&a.stations, g.time_frame).map_err(input)?;
    let mut altimetry = load_altimetry_all(&a.altimetry_dir).map_err(input)?;
    if let Some(tf) = g.time_frame {
        altimetry.retain(|e, _| tf.contains(*e));
    }
    let mut data = Dataset { stations: load.stations, altimetry };
    if a.demean {
        data = data.demeaned().map_err(input)?;
    }
    let cfg =
        ReconConfig { anchor: a.anchor, stride: a.stride, enforce_stride: true, solve: solve_opts(g, Some(3600.0)) };
    let pairs = epoch_pairs(&data, a.stride);
    log::info!("{} stations, {} epochs, {} pairs", data.stations.len(), data.altimetry.len(), pairs.len());
    let out = run_experiment(&data, &pairs, &a.k.0, &cfg);
    let mut rows: Vec<ReconRow> = out
        .results
        .iter()
        .map(|r| ReconRow {
            i: r.i,
            j: r.j,
            k: r.k,
            status: "ok".into(),
            n_stations: Some(r.n_stations),
            n_refs: Some(r.n_refs),
            sigma2_m: Some(r.sigma2_m),
            sigma2_d: Some(r.sigma2_d),
            delta_sigma2: Some(r.delta_sigma2),
            train_error: Some(r.train_error),
        })
        .collect();
    let mut limited = 0;
    for (i, j, k, msg) in &out.failures {
        let status = if msg.contains("budget") {
            "budget_exceeded"
        } else if msg.contains("time limit") {
            "time_limit"
        } else {
            "error"
        };
        limited += usize::from(status != "error");
        rows.push(ReconRow {
            i: *i,
            j: *j,
            k: *k,
            status: status.into(),
            n_stations: None,
            n_refs: None,
            sigma2_m: None,
            sigma2_d: None,
            delta_sigma2: None,
            train_error: None,
        });
    }
    rows.sort_by_key(|r| (r.i, r.j, r.k));
    write_csv(&rows, sink(Some(&a.out))?).map_err(|e| CliError::Failed(e.to_string()))?;
    if let Some(q) = &a.q_out {
        write_csv(&q_table(&out.results), sink(Some(q))?).map_err(|e| CliError::Failed(e.to_string()))?;
    }
    let pre: f64 = out.results.iter().map(|r| r.preprocess_secs).sum();
    let opt: f64 = out.results.iter().map(|r| r.optimize_secs).sum();
    eprintln!("{} runs, preprocess {pre:.3}s, optimize {opt:.3}s, wall {:.3}s", rows.len(), t.elapsed().as_secs_f64());
    if limited > 0 {
        return Err(CliError::Limit(format!("{limited} runs hit the budget or time limit")));
    }
    Ok(())
}

fn randgen_stats(g: &GlobalOpts, a: &RandgenArgs) -> Result<(), CliError> {
    check_out_dir(a.out.as_deref())?;
    let gen = match a.kind {
        PointType::One => Generator::Type1 { radius: a.radius },
        PointType::Two => Generator::Type2 { radius: a.radius },
        PointType::Three => Generator::Type3 { r1: a.radius, r2: a.inner_radius },
    };
    let rows = cmax_experiment(&gen, a.n, &a.k.0, a.samples, g.seed).map_err(input)?;
    write_stats_csv(&rows, sink(a.out.as_deref())?).map_err(|e| CliError::Failed(e.to_string()))
}

fn hard(e: HardnessError) -> CliError {
    CliError::Input(e.to_string())
}

fn gadget(a: &GadgetArgs) -> Result<(), CliError> {
    if let Some(GadgetCommand::Reduce { embedding, assignment, out }) = &a.reduce {
        check_exists(&[embedding])?;
        check_out_dir(out.as_deref())?;
        let text = std::fs::read_to_string(embedding).map_err(|e| io_err(embedding, e))?;
        let emb: Embedding = serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", embedding.display())))?;
        let inst = build_instance(&emb).map_err(hard)?;
        let mut doc = instance_json(&inst);
        if let Some(s) = assignment {
            let vals: Vec<bool> = s
                .split(',')
                .map(|t| match t.trim() {
                    "1" | "true" => Ok(true),
                    "0" | "false" => Ok(false),
                    x => Err(CliError::Input(format!("assignment value {x:?}"))),
                })
                .collect::<Result<_, _>>()?;
            let rep = verify_assignment(&inst, &vals).map_err(hard)?;
            doc["verification"] = json!({
                "assignment": vals,
                "zero_error": rep.zero_error,
                "error": crate::hardness::rational_json(&rep.error),
                "violated_clauses": rep.violated_clauses,
                "violated_refs": rep.violated_refs.len(),
                "triangles": rep.triangles.len(),
            });
        }
        return write_json(out.as_deref(), &doc);
    }
    let kind = a.kind.ok_or_else(|| CliError::Input("--kind is required".into()))?;
    check_out_dir(a.out.as_deref())?;
    let at = a.at.0;
    let g: Gadget = match kind {
        GadgetKind::Bit => {
            let o = match a.orientation.as_str() {
                "horizontal" | "h" => Orientation::Horizontal,
                "vertical" | "v" => Orientation::Vertical,
                x => return Err(CliError::Input(format!("orientation {x:?}"))),
            };
            make_bit(at, o)
        }
        GadgetKind::Wire => {
            let to = a.to.ok_or_else(|| CliError::Input("--to is required for a wire".into()))?;
            make_wire_segment(at, to.0).map_err(hard)?
        }
        GadgetKind::Multiplier => make_multiplier(at),
        GadgetKind::Clause => make_clause(at),
        GadgetKind::Negation => make_negation(at),
    };
    let g = if a.replace_mandatory { replace_mandatory_edges(&g).map_err(hard)? } else { g };
    write_json(a.out.as_deref(), &gadget_json(&g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_ranges() {
        assert_eq!("0..3".parse::<KRange>().unwrap().0, vec![0, 1, 2, 3]);
        assert_eq!("2,5".parse::<KRange>().unwrap().0, vec![2, 5]);
        assert_eq!("4".parse::<KRange>().unwrap().0, vec![4]);
        assert!("5..2".parse::<KRange>().is_err());
        assert_eq!("-3,7".parse::<LatticePoint>().unwrap().0, (-3, 7));
    }

    #[test]
    fn parse_errors_are_input_errors() {
        assert_eq!(main_with_args(["hodt", "triangulate"]), EXIT_INPUT);
        assert_eq!(main_with_args(["hodt", "--help"]), EXIT_OK);
        let code = main_with_args(["hodt", "fixed-edges", "--input", "/nonexistent/p.csv", "--k", "1"]);
        assert_eq!(code, EXIT_INPUT);
    }

    #[test]
    fn gadget_subcommands_parse() {
        let c = Cli::try_parse_from(["hodt", "gadget", "--kind", "wire", "--at", "-1,0", "--to", "4,0"]).unwrap();
        assert!(matches!(c.command, Command::Gadget(GadgetArgs { kind: Some(GadgetKind::Wire), .. })));
        let c = Cli::try_parse_from(["hodt", "gadget", "reduce", "--embedding", "e.json"]).unwrap();
        assert!(matches!(c.command, Command::Gadget(GadgetArgs { reduce: Some(GadgetCommand::Reduce { .. }), .. })));
    }
}
