//! Reconstruction experiment on a synthetic sea surface, written through
//! the CSV formats and read back.

use hodt::geo_ingest::{load_altimetry_all, load_stations};
use hodt::reconstruct::{
    epoch_pairs, q_table, run_experiment, synthetic_dataset, write_altimetry_csv, write_stations_csv, Dataset,
    ReconConfig, SyntheticConfig,
};

fn main() {
    let dir = std::env::temp_dir().join("hodt-reconstruct-example");
    std::fs::create_dir_all(&dir).unwrap();
    let data = synthetic_dataset(&SyntheticConfig { n_stations: 40, n_epochs: 37, ..Default::default() });
    let (sp, ap) = (dir.join("stations.csv"), dir.join("altimetry.csv"));
    write_stations_csv(&data.stations, std::fs::File::create(&sp).unwrap()).unwrap();
    write_altimetry_csv(&data.altimetry, std::fs::File::create(&ap).unwrap()).unwrap();

    let stations = load_stations(&sp, None).unwrap().stations;
    let altimetry = load_altimetry_all(&ap).unwrap();
    let data = Dataset { stations, altimetry }.demeaned().unwrap();
    let cfg = ReconConfig::default();
    let pairs = epoch_pairs(&data, cfg.stride);
    let out = run_experiment(&data, &pairs, &[0, 1, 2, 3], &cfg);
    println!("{} runs, {} failures", out.results.len(), out.failures.len());
    for row in q_table(&out.results) {
        println!("k={} delta_d={:>2} q={:+.5} ({} pairs)", row.k, row.delta_d, row.q, row.count);
    }
}
