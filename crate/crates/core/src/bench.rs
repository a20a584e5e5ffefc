// SPDX-License-Identifier: Apache-2.0

//! Run-time comparison of the baseline and proposed pipelines.
//!
//! One truth terrain is scanned once; each resolution then times the two
//! stages of both algorithms on in-memory data. The baseline sweeps headings
//! at one pixel of arc on the leg circle, so its cost grows with the fifth
//! power of the pixel density.

use std::time::Instant;

use crate::config::{ExperimentConfig, Rect};
use crate::dem::{build_dem_bilinear, fill_holes};
use crate::error::{Error, Result};
use crate::gaussian::{build_gaussian_dem_with, default_hyper, delaunay_triangulate};
use crate::grid::{GridGeometry, PointCloud};
use crate::hazard::{hd_baseline_stochastic, hd_fast_stochastic, LanderGeom, SlopeBound};
use crate::lidar::{simulate_scan, ScanConfig};
use crate::pipeline::{dem_domain, synthesize};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub experiment: ExperimentConfig,
    pub scan: ScanConfig,
    pub domain: Option<Rect>,
    pub lander: LanderGeom,
    pub bound: SlopeBound,
    /// Timed runs per stage; the median is reported.
    pub repeats: usize,
    /// Untimed runs before the timed ones.
    pub warmup: usize,
}

impl BenchConfig {
    pub fn from_experiment(exp: &ExperimentConfig) -> BenchConfig {
        BenchConfig {
            scan: exp.scans[0].clone(),
            domain: exp.dem.domain,
            lander: exp.lander,
            bound: exp.hd.stochastic_bound,
            repeats: 3,
            warmup: 1,
            experiment: exp.clone(),
        }
    }
}

/// Seconds per stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTimes {
    pub baseline_dem: f64,
    pub baseline_hd: f64,
    pub proposed_dem: f64,
    pub proposed_hd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub resolution: f64,
    /// Pixels in the DEM at this resolution.
    pub pixels: usize,
    pub times: StageTimes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of `ln t` against `ln(1 / resolution)`; absent
    /// with fewer than two resolutions.
    pub exponents: Option<StageTimes>,
}

fn median_time(warmup: usize, repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    for _ in 0..warmup {
        f()?;
    }
    let mut ts = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        f()?;
        ts.push(t.elapsed().as_secs_f64());
    }
    ts.sort_by(f64::total_cmp);
    Ok(ts[ts.len() / 2])
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn bench_runtime(resolutions: &[f64], cfg: &BenchConfig) -> Result<BenchReport> {
    if resolutions.is_empty() || resolutions.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidArgument("resolutions must be positive".into()));
    }
    if cfg.repeats == 0 {
        return Err(Error::InvalidArgument("need at least one timed run".into()));
    }
    let truth = synthesize(&cfg.experiment)?;
    let cloud = simulate_scan(&truth.dem, &cfg.scan)?;
    let crop = dem_domain(cfg.domain, &truth.dem, &cloud)?;
    let g = *crop.geometry();
    let (x0, y0, _, _) = g.extent();
    let sigma = cfg.scan.sigma_lidar();

    let mut rows = Vec::new();
    for &res in resolutions {
        let geom = GridGeometry::covering(x0, y0, g.width(), g.height(), res)?;
        log::info!("bench: {res} m/pix, {} x {} pixels", geom.ncols, geom.nrows);
        let dtheta = res / cfg.lander.leg_circle_radius;
        let (w, r) = (cfg.warmup, cfg.repeats);

        let baseline_dem = || fill_holes(&build_dem_bilinear(&cloud, geom)?);
        let proposed_dem = |c: &PointCloud| {
            let tri = delaunay_triangulate(&c.xy())?;
            let hyper = default_hyper(c, &tri, cfg.experiment.dem.hyper)?;
            build_gaussian_dem_with(c, &tri, geom, &hyper)
        };
        let t_bdem = median_time(w, r, || baseline_dem().map(drop))?;
        let t_pdem = median_time(w, r, || proposed_dem(&cloud).map(drop))?;
        let dem = baseline_dem()?;
        let gdem = proposed_dem(&cloud)?;
        let t_bhd = median_time(w, r, || hd_baseline_stochastic(&dem, sigma, &cfg.lander, dtheta).map(drop))?;
        let t_phd = median_time(w, r, || hd_fast_stochastic(&gdem, &cfg.lander, cfg.bound).map(drop))?;
        rows.push(BenchRow {
            resolution: res,
            pixels: geom.len(),
            times: StageTimes {
                baseline_dem: t_bdem,
                baseline_hd: t_bhd,
                proposed_dem: t_pdem,
                proposed_hd: t_phd,
            },
        });
    }

    let xs: Vec<f64> = rows.iter().map(|r| (1.0 / r.resolution).ln()).collect();
    let distinct = xs.iter().any(|x| (x - xs[0]).abs() > 1e-12);
    let exponents = distinct.then(|| {
        let fit = |f: fn(&StageTimes) -> f64| slope(&xs, &rows.iter().map(|r| f(&r.times).ln()).collect::<Vec<_>>());
        StageTimes {
            baseline_dem: fit(|t| t.baseline_dem),
            baseline_hd: fit(|t| t.baseline_hd),
            proposed_dem: fit(|t| t.proposed_dem),
            proposed_hd: fit(|t| t.proposed_hd),
        }
    });
    Ok(BenchReport { rows, exponents })
}

impl BenchReport {
    /// Whitespace-aligned table, one row per resolution, then the fit.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:>10} {:>10} {:>14} {:>14} {:>14} {:>14}\n",
            "m/pix", "pixels", "baseline_dem", "baseline_hd", "proposed_dem", "proposed_hd"
        );
        let line = |label: String, extra: String, t: &StageTimes| {
            format!(
                "{label:>10} {extra:>10} {:>14.4} {:>14.4} {:>14.4} {:>14.4}\n",
                t.baseline_dem, t.baseline_hd, t.proposed_dem, t.proposed_hd
            )
        };
        for r in &self.rows {
            s += &line(r.resolution.to_string(), r.pixels.to_string(), &r.times);
        }
        if let Some(e) = &self.exponents {
            s += &line("exponent".into(), String::new(), e);
        }
        s
    }
}
