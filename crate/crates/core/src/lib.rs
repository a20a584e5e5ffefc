// SPDX-License-Identifier: Apache-2.0

//! Real-time stochastic terrain mapping and landing hazard detection.
//!
//! The crate turns sparse LiDAR point clouds into Gaussian digital elevation
//! maps (per-cell mean and variance) using Delaunay triangulation and local
//! three-point Gaussian random field regression, and evaluates landing safety
//! with a conservative height-difference detector and its stochastic
//! extension. An exhaustive orientation-sweep oracle and the conventional
//! footpad-map baseline are provided for validation.
//!
//! Module map:
//!
//! - [`grid`]: rasters, point clouds, file formats, resampling.
//! - [`terrain`]: synthetic rock fields and fractal base terrains.
//! - [`lidar`]: grid-pattern LiDAR scan simulation.
//! - [`dem`]: conventional bilinear DEM construction and hole filling.
//! - [`gaussian`]: Delaunay triangulation, local GRF regression, Gaussian DEMs.
//! - [`hazard`]: landing geometry, exact oracle, baseline and fast detectors.
//! - [`metrics`]: RMSE, NLPD, precision/recall, hazard-missing maps.
//! - [`config`], [`pipeline`], [`bench`]: experiment front-end.

pub mod bench;
pub mod config;
pub mod dem;
pub mod error;
pub mod gaussian;
pub mod grid;
pub mod hazard;
pub mod lidar;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod terrain;

pub use error::{Error, Result};
pub use grid::{GaussianGrid, GeoGrid, GridGeometry, PointCloud};
