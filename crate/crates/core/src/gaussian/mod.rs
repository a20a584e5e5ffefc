// SPDX-License-Identifier: Apache-2.0

//! Gaussian DEM construction.
//!
//! Cells that receive direct bilinear support from the cloud keep the
//! bilinear mean with variance `sigma_eps^2`. Every other cell inside the
//! convex hull of the cloud is predicted by three-point GRF regression from
//! the vertices of the Delaunay triangle that owns its center.

mod delaunay;
mod grf;
mod raster;

pub use delaunay::{delaunay_triangulate, Triangulation};
pub use grf::{ae_kernel, grf_predict_local, GrfHyper};
pub use raster::{covers, rasterize_triangle};

use crate::dem::accumulate_bilinear;
use crate::error::{Error, Result};
use crate::grid::{GaussianGrid, GeoGrid, GridGeometry, PointCloud};

/// Floor applied to the default prior standard deviation on flat input.
pub const MIN_SIGMA_F: f64 = 1e-6;

/// Optional overrides for [`default_hyper`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HyperOverrides {
    pub sigma_f: Option<f64>,
    pub length_scale: Option<f64>,
    pub sigma_eps: Option<f64>,
}

/// Data-driven hyperparameters: `length_scale` is three times the median
/// triangulation edge, `sigma_f` the standard deviation of elevations about
/// their least-squares plane and `sigma_eps` the cloud's noise level.
pub fn default_hyper(cloud: &PointCloud, tri: &Triangulation, overrides: HyperOverrides) -> Result<GrfHyper> {
    let sigma_f = match overrides.sigma_f {
        Some(s) => s,
        None => detrended_std(cloud).max(MIN_SIGMA_F),
    };
    let length_scale = match overrides.length_scale {
        Some(l) => l,
        None => {
            3.0 * tri
                .median_edge_length(&cloud.xy())
                .ok_or_else(|| Error::Degenerate("triangulation has no edges".into()))?
        }
    };
    GrfHyper::new(sigma_f, length_scale, overrides.sigma_eps.unwrap_or(cloud.sigma_eps()))
}

/// Standard deviation of `z` residuals after a least-squares plane fit.
fn detrended_std(cloud: &PointCloud) -> f64 {
    let pts = cloud.points();
    let n = pts.len() as f64;
    if pts.len() < 3 {
        return 0.0;
    }
    let (mx, my, mz) = pts.iter().fold((0.0, 0.0, 0.0), |(a, b, c), p| (a + p[0], b + p[1], c + p[2]));
    let (mx, my, mz) = (mx / n, my / n, mz / n);
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in pts {
        let (x, y, z) = (p[0] - mx, p[1] - my, p[2] - mz);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sxz += x * z;
        syz += y * z;
    }
    let det = sxx * syy - sxy * sxy;
    let (a, b) = if det.abs() > 1e-12 * (sxx * syy).max(f64::MIN_POSITIVE) {
        ((sxz * syy - syz * sxy) / det, (syz * sxx - sxz * sxy) / det)
    } else {
        (0.0, 0.0)
    };
    let ss: f64 = pts
        .iter()
        .map(|p| {
            let r = (p[2] - mz) - a * (p[0] - mx) - b * (p[1] - my);
            r * r
        })
        .sum();
    (ss / n).sqrt()
}

/// Builds the Gaussian DEM of `cloud` on `geom`, triangulating internally.
pub fn build_gaussian_dem(cloud: &PointCloud, geom: GridGeometry, hyper: &GrfHyper) -> Result<GaussianGrid> {
    let tri = delaunay_triangulate(&cloud.xy())?;
    build_gaussian_dem_with(cloud, &tri, geom, hyper)
}

/// As [`build_gaussian_dem`] with a precomputed triangulation of `cloud`.
pub fn build_gaussian_dem_with(
    cloud: &PointCloud,
    tri: &Triangulation,
    geom: GridGeometry,
    hyper: &GrfHyper,
) -> Result<GaussianGrid> {
    hyper.validate()?;
    let acc = accumulate_bilinear(cloud, geom)?;
    let mut mean = GeoGrid::empty(geom)?;
    let mut var = GeoGrid::empty(geom)?;
    let noise = hyper.sigma_eps * hyper.sigma_eps;
    for (i, (&e, &w)) in acc.e.iter().zip(&acc.w).enumerate() {
        if w > 0.0 {
            mean.set_index(i, e / w);
            var.set_index(i, noise);
        }
    }
    let pts = cloud.points();
    let mut failure = None;
    for t in &tri.triangles {
        let verts = t.map(|i| pts[i]);
        let xy = verts.map(|p| [p[0], p[1]]);
        raster::for_each_cell(&xy, &geom, |u, v| {
            let i = geom.index(u, v);
            if acc.w[i] > 0.0 || failure.is_some() {
                return;
            }
            match grf_predict_local(geom_center(&geom, u, v), &verts, hyper) {
                Ok((m, s2)) => {
                    mean.set_index(i, m);
                    var.set_index(i, s2);
                }
                Err(e) => failure = Some(e),
            }
        });
    }
    if let Some(e) = failure {
        return Err(e);
    }
    GaussianGrid::new(mean, var)
}

#[inline]
fn geom_center(g: &GridGeometry, u: usize, v: usize) -> [f64; 2] {
    let (x, y) = g.center(u, v);
    [x, y]
}
