//! Equal-area projection of tide-gauge positions around several anchors.

use hodt::geo_ingest::{anchor_grid, lap_project, ProjectionAnchor};

fn main() {
    let gauges = [("Brest", -4.495, 48.383), ("Dakar", -17.4, 14.7), ("Bermuda", -64.7, 32.37), ("Natal", -35.2, -5.8)];
    let atlantic = ProjectionAnchor::new(-40.0, 16.0).unwrap();
    for (name, lon, lat) in gauges {
        let p = lap_project(lon, lat, &atlantic).unwrap();
        println!("{name:8} ({lon:8.3}, {lat:7.3}) -> ({:+.5}, {:+.5})", p.x, p.y);
    }
    let grid = anchor_grid(8, 4);
    println!("{} anchors, first ({}, {})", grid.len(), grid[0].lambda0, grid[0].phi0);
}
