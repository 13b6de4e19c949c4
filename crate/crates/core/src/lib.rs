//! Exact minimum-error higher-order Delaunay triangulations.
//!
//! The crate covers the full pipeline from exact predicates to the fixed-edge
//! graph `F_k`, a polygon dynamic program extended to faces with interior
//! components, a sea-surface reconstruction harness, random point-set
//! statistics and the zero-error hardness gadget construction.

pub mod cli;
pub mod delaunay;
pub mod enumerate;
pub mod geo_ingest;
pub mod geom;
pub mod hardness;
pub mod hod;
pub mod randgen;
pub mod reconstruct;
pub mod solver;
pub mod weights;
