//! Density ridge ("filament") estimation for geospatial point data.
//!
//! The pipeline estimates a Gaussian kernel density over latitude/longitude
//! points with great-circle distances, runs thresholded subspace-constrained
//! mean shift to pull a uniform mesh onto the density ridges, and scores the
//! resulting ridges by how many held-out incidents fall inside distance
//! envelopes around them.
//!
//! ```
//! use filament_core::{run_scms, GeoPointSet, ScmsConfig};
//!
//! let data = GeoPointSet::from_degrees(&[(41.88, -87.63), (41.89, -87.62), (41.90, -87.61)])?;
//! let result = run_scms(&data, &ScmsConfig { neighbors: 1, ..Default::default() })?;
//! for (p, density) in result.ridges.points.iter().zip(&result.ridges.densities) {
//!     println!("{p} {density}");
//! }
//! # Ok::<(), filament_core::FilamentError>(())
//! ```

pub mod cli;
pub mod density;
pub mod error;
pub mod eval;
pub mod geo;
pub mod ingest;
pub mod linalg;
pub mod scms;
pub mod stats;
pub mod synth;

pub use density::{knn_bandwidth, Bandwidth, DensityModel, GeoPointSet};
pub use error::{FilamentError, Result};
pub use geo::{haversine, Distance, GeoPoint};
pub use scms::{run_scms, RidgePointSet, ScmsConfig, ScmsResult};
