// SPDX-License-Identifier: Apache-2.0

//! Grid-pattern LiDAR scan simulation over a ground-truth raster.
//!
//! The sensor sits at distance `range` from the aim point along a boresight
//! tilted `off_nadir_deg` from nadir, looking toward +x. Rays go through the
//! centers of a pinhole detector grid, are intersected with the bilinear
//! surface through the truth cell centers, and get Gaussian noise along the
//! ray whose standard deviation scales linearly with range.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GeoGrid, PointCloud};
use crate::rng;

const BISECTION_STEPS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    /// Distance from sensor to aim point, m.
    pub range: f64,
    pub off_nadir_deg: f64,
    /// Detector size `(columns, rows)`; columns span the tilt direction.
    pub detector: (usize, usize),
    /// Full field-of-view angle per axis, radians.
    pub fov: f64,
    /// Three-sigma ray noise at a 500 m range, m.
    pub sigma3_at_500m: f64,
    /// Aim point on the `z = 0` plane; defaults to the center of the truth grid.
    pub target: Option<(f64, f64)>,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            range: 500.0,
            off_nadir_deg: 0.0,
            detector: (256, 256),
            fov: default_fov(),
            sigma3_at_500m: 0.05,
            target: None,
            seed: 0,
        }
    }
}

/// Field of view covering 100 m from 500 m straight down.
pub fn default_fov() -> f64 {
    2.0 * (50.0f64 / 500.0).atan()
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("scan: {m}")));
        if !(self.range > 0.0) || !self.range.is_finite() {
            return bad(format!("range must be positive, got {}", self.range));
        }
        if !(0.0..90.0).contains(&self.off_nadir_deg) {
            return bad(format!("off-nadir angle must lie in [0, 90), got {}", self.off_nadir_deg));
        }
        if self.detector.0 < 2 || self.detector.1 < 2 {
            return bad(format!("detector must be at least 2x2, got {:?}", self.detector));
        }
        if !(self.fov > 0.0 && self.fov < std::f64::consts::PI) {
            return bad(format!("fov must lie in (0, pi), got {}", self.fov));
        }
        if !(self.sigma3_at_500m >= 0.0) {
            return bad(format!("noise must be >= 0, got {}", self.sigma3_at_500m));
        }
        Ok(())
    }

    /// Ray noise standard deviation at this range.
    pub fn sigma_lidar(&self) -> f64 {
        self.sigma3_at_500m / 3.0 * (self.range / 500.0)
    }

    /// Vertical component of the ray noise, recorded as the cloud's `sigma_eps`.
    pub fn sigma_eps(&self) -> f64 {
        self.sigma_lidar() * self.off_nadir_deg.to_radians().cos()
    }
}

/// Flat-plane footprint `(coverage_x, coverage_y, gsd_x, gsd_y)` in meters.
pub fn nominal_scan_geometry(cfg: &ScanConfig) -> Result<(f64, f64, f64, f64)> {
    cfg.validate()?;
    let alpha = cfg.off_nadir_deg.to_radians();
    let half = cfg.fov / 2.0;
    if alpha + half >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::InvalidArgument(format!(
            "off-nadir angle {} plus half fov reaches the horizon",
            cfg.off_nadir_deg
        )));
    }
    let altitude = cfg.range * alpha.cos();
    let cov_x = altitude * ((alpha + half).tan() - (alpha - half).tan());
    let cov_y = 2.0 * cfg.range * half.tan();
    Ok((cov_x, cov_y, cov_x / cfg.detector.0 as f64, cov_y / cfg.detector.1 as f64))
}

/// One detector ray that hit the terrain inside the truth extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayReturn {
    /// Detector raster index, `row * columns + column`.
    pub ray: usize,
    pub true_range: f64,
    pub measured_range: f64,
    pub point: [f64; 3],
}

/// Bilinear surface through cell centers, clamped beyond the outer centers.
struct Surface<'a> {
    grid: &'a GeoGrid,
}

impl Surface<'_> {
    fn height(&self, x: f64, y: f64) -> f64 {
        let g = self.grid.geometry();
        let (u, v) = g.to_center_coords(x, y);
        let clamp = |s: f64, n: usize| s.clamp(0.0, (n - 1) as f64);
        let (u, v) = (clamp(u, g.ncols), clamp(v, g.nrows));
        let (i0, j0) = (u.floor() as usize, v.floor() as usize);
        let (i1, j1) = ((i0 + 1).min(g.ncols - 1), (j0 + 1).min(g.nrows - 1));
        let (p, q) = (u - i0 as f64, v - j0 as f64);
        let z = self.grid.values();
        let at = |i: usize, j: usize| z[j * g.ncols + i];
        let bottom = at(i0, j0) + p * (at(i1, j0) - at(i0, j0));
        let top = at(i0, j1) + p * (at(i1, j1) - at(i0, j1));
        bottom + q * (top - bottom)
    }
}

/// First intersection of `origin + t * dir` with the surface, by fixed-step
/// march from the top of the terrain followed by bisection.
fn intersect(surface: &Surface, origin: [f64; 3], dir: [f64; 3], zmin: f64, zmax: f64, step: f64) -> Option<[f64; 3]> {
    if dir[2] >= 0.0 {
        return None;
    }
    let at = |t: f64| [origin[0] + t * dir[0], origin[1] + t * dir[1], origin[2] + t * dir[2]];
    let gap = |t: f64| {
        let p = at(t);
        p[2] - surface.height(p[0], p[1])
    };
    let mut t_prev = ((zmax - origin[2]) / dir[2]).max(0.0);
    let t_end = (zmin - origin[2]) / dir[2] + step;
    if gap(t_prev) <= 0.0 {
        return None;
    }
    let mut t = t_prev;
    loop {
        t += step;
        if gap(t) <= 0.0 {
            break;
        }
        if t > t_end {
            return None;
        }
        t_prev = t;
    }
    let (mut lo, mut hi) = (t_prev, t);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = at(hi);
    Some([p[0], p[1], surface.height(p[0], p[1])])
}

/// Simulates every ray and keeps the returns that land inside the truth extent.
pub fn simulate_returns(truth: &GeoGrid, cfg: &ScanConfig) -> Result<Vec<RayReturn>> {
    cfg.validate()?;
    if !truth.is_fully_valid() {
        return Err(Error::InvalidGrid("truth grid must not contain nodata".into()));
    }
    let g = *truth.geometry();
    let (x0, y0, x1, y1) = g.extent();
    let (tx, ty) = cfg.target.unwrap_or(((x0 + x1) / 2.0, (y0 + y1) / 2.0));
    let (zmin, zmax) = truth.min_max().expect("fully valid grid is non-empty");
    let zmax = zmax + 1e-6;

    let alpha = cfg.off_nadir_deg.to_radians();
    let (sa, ca) = alpha.sin_cos();
    let origin = [tx - cfg.range * sa, ty, cfg.range * ca];
    let boresight = [sa, 0.0, -ca];
    let across_x = [ca, 0.0, sa];
    let half_tan = (cfg.fov / 2.0).tan();
    let (nc, nr) = cfg.detector;
    let sigma = cfg.sigma_lidar();
    let surface = Surface { grid: truth };
    let step = g.cell_size / 2.0;

    let returns: Vec<RayReturn> = (0..nc * nr)
        .into_par_iter()
        .filter_map(|ray| {
            let (i, j) = (ray % nc, ray / nc);
            let a = half_tan * (2.0 * (i as f64 + 0.5) / nc as f64 - 1.0);
            let b = half_tan * (2.0 * (j as f64 + 0.5) / nr as f64 - 1.0);
            let d = [
                boresight[0] + a * across_x[0],
                b,
                boresight[2] + a * across_x[2],
            ];
            let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let dir = [d[0] / norm, d[1] / norm, d[2] / norm];
            let hit = intersect(&surface, origin, dir, zmin, zmax, step)?;
            if hit[0] < x0 || hit[0] >= x1 || hit[1] < y0 || hit[1] >= y1 {
                return None;
            }
            let true_range = (0..3).map(|k| (hit[k] - origin[k]).powi(2)).sum::<f64>().sqrt();
            let noise = if sigma > 0.0 {
                let n: f64 = StandardNormal.sample(&mut rng::keyed(cfg.seed, rng::domain::LIDAR, ray as u64));
                sigma * n
            } else {
                0.0
            };
            let point = [hit[0] + noise * dir[0], hit[1] + noise * dir[1], hit[2] + noise * dir[2]];
            Some(RayReturn {
                ray,
                true_range,
                measured_range: true_range + noise,
                point,
            })
        })
        .collect();
    if returns.is_empty() {
        return Err(Error::EmptyScan);
    }
    Ok(returns)
}

/// Point cloud of a simulated scan, in detector raster order.
pub fn simulate_scan(truth: &GeoGrid, cfg: &ScanConfig) -> Result<PointCloud> {
    let returns = simulate_returns(truth, cfg)?;
    PointCloud::new(returns.into_iter().map(|r| r.point).collect(), cfg.sigma_eps())
}
