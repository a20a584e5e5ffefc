// SPDX-License-Identifier: Apache-2.0

//! End-to-end experiment: synth, scan, DEM construction, hazard detection
//! and evaluation, with every artifact written under one directory and
//! listed in `manifest.json` with its SHA-256.
//!
//! Artifacts are pure functions of the configuration, so a rerun produces
//! byte-identical files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{BaseTerrain, CellSize, Config, Detector, ExperimentConfig, Rect};
use crate::dem::{baseline_resolution, build_dem_bilinear, fill_holes};
use crate::error::{Error, Result};
use crate::gaussian::{build_gaussian_dem_with, default_hyper, delaunay_triangulate};
use crate::grid::io::encode_grid;
use crate::grid::{bilinear_upsample, grid_read, nearest_resample, GaussianGrid, GeoGrid, GridFormat, GridGeometry, PointCloud};
use crate::hazard::{hd_baseline_stochastic, hd_exact_oracle, hd_fast_deterministic, hd_fast_stochastic, SafetyMap};
use crate::lidar::{nominal_scan_geometry, simulate_scan, ScanConfig};
use crate::metrics::{hazard_missing_map, nlpd, nlpd_fixed_sigma, precision_recall, rmse};
use crate::terrain::{gen_fractal_base, gen_rock_field, rocks_to_csv, superpose_complexity, RockSpec};

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ (Error::Stage { .. } | Error::Config(_)) => e,
        e => Error::Stage {
            stage: name,
            source: Box::new(e),
        },
    })
}

/// Ground truth: rock field plus the scaled base terrain.
pub struct Truth {
    pub dem: GeoGrid,
    pub rocks: Vec<RockSpec>,
    /// Unscaled base terrain on the truth grid.
    pub base: Option<GeoGrid>,
}

pub fn synthesize(exp: &ExperimentConfig) -> Result<Truth> {
    let (rock, rocks) = gen_rock_field(&exp.terrain)?;
    let geom = *rock.geometry();
    let base = match &exp.base {
        BaseTerrain::None => None,
        BaseTerrain::Fractal {
            hurst,
            amplitude,
            resolution,
            seed,
        } => {
            let factor = (resolution / geom.cell_size).round();
            if factor < 1.0 || (factor * geom.cell_size - resolution).abs() > 1e-9 * resolution {
                return Err(Error::Config(format!(
                    "terrain.base_resolution {resolution} is not a multiple of the truth resolution {}",
                    geom.cell_size
                )));
            }
            let coarse = GridGeometry::covering(geom.origin_x, geom.origin_y, geom.width(), geom.height(), *resolution)?;
            let fine = bilinear_upsample(&gen_fractal_base(coarse, *hurst, *amplitude, *seed)?, factor as usize)?;
            Some(fine.window(0, 0, geom.ncols, geom.nrows)?)
        }
        BaseTerrain::File(path) => {
            let ext = grid_read(path)?;
            let on_truth = nearest_resample(&ext, geom)?;
            if !on_truth.is_fully_valid() {
                return Err(Error::InvalidGrid(format!("{} does not cover the truth extent", path.display())));
            }
            Some(on_truth)
        }
    };
    let dem = match &base {
        Some(b) => superpose_complexity(&rock, b, exp.complexity)?,
        None => rock,
    };
    Ok(Truth { dem, rocks, base })
}

/// Truth cells inside the DEM domain: the configured rectangle, or else the
/// cells fully inside the cloud's bounding box.
pub fn dem_domain(domain: Option<Rect>, truth: &GeoGrid, cloud: &PointCloud) -> Result<GeoGrid> {
    if let Some(r) = domain {
        return truth.crop(r.x0, r.y0, r.width, r.height);
    }
    let g = truth.geometry();
    let (bx0, by0, bx1, by1) = cloud.bounds().ok_or(Error::EmptyScan)?;
    let cs = g.cell_size;
    let lo = |b: f64, o: f64, n: usize| (((b - o) / cs - 1e-9).ceil().max(0.0) as usize).min(n);
    let hi = |b: f64, o: f64, n: usize| (((b - o) / cs + 1e-9).floor().max(0.0) as usize).min(n);
    let (u0, u1) = (lo(bx0, g.origin_x, g.ncols), hi(bx1, g.origin_x, g.ncols));
    let (v0, v1) = (lo(by0, g.origin_y, g.nrows), hi(by1, g.origin_y, g.nrows));
    if u1 <= u0 || v1 <= v0 {
        return Err(Error::Degenerate("point cloud covers no truth cell".into()));
    }
    truth.window(u0, v0, u1 - u0, v1 - v0)
}

/// Slope, roughness and combined safety rasters in `[0, 1]` plus the
/// detector-specific extras.
pub struct DetectorMaps {
    pub slope: GeoGrid,
    pub rough: GeoGrid,
    pub safe: GeoGrid,
    pub extras: Vec<(&'static str, GeoGrid)>,
}

impl From<SafetyMap> for DetectorMaps {
    fn from(m: SafetyMap) -> Self {
        DetectorMaps {
            safe: m.safe(),
            slope: m.slope_safe,
            rough: m.rough_safe,
            extras: vec![("slope_deg", m.slope), ("roughness", m.roughness)],
        }
    }
}

/// Everything computed from one scan.
pub struct ScanRun {
    pub scan: ScanConfig,
    pub cloud: PointCloud,
    /// Truth restricted to the DEM domain.
    pub truth: GeoGrid,
    pub baseline_cell: Option<f64>,
    pub baseline_dem: Option<GeoGrid>,
    pub gaussian_dem: Option<GaussianGrid>,
    pub detectors: Vec<(Detector, DetectorMaps)>,
}

pub fn check_detectors(exp: &ExperimentConfig) -> Result<()> {
    for d in &exp.hd.detectors {
        let needs_gaussian = *d != Detector::Baseline;
        if needs_gaussian && !exp.dem.gaussian || !needs_gaussian && !exp.dem.baseline {
            return Err(Error::Config(format!("detector {} needs the {} DEM", d.name(), if needs_gaussian { "gaussian" } else { "baseline" })));
        }
    }
    Ok(())
}

/// Scan, DEM and detector stages for one scan configuration.
pub fn process_scan(exp: &ExperimentConfig, truth: &GeoGrid, scan: &ScanConfig) -> Result<ScanRun> {
    check_detectors(exp)?;
    let cloud = stage("scan", simulate_scan(truth, scan))?;
    let (crop, baseline_cell, baseline_dem, gaussian_dem) = stage("dem", {
        (|| {
            let crop = dem_domain(exp.dem.domain, truth, &cloud)?;
            let (x0, y0, _, _) = crop.geometry().extent();
            let (w, h) = (crop.geometry().width(), crop.geometry().height());
            let (mut cell, mut base, mut gdem) = (None, None, None);
            if exp.dem.baseline {
                let cs = match exp.dem.baseline_cell {
                    CellSize::Auto => baseline_resolution(&cloud)?,
                    CellSize::Fixed(c) => c,
                };
                let dem = build_dem_bilinear(&cloud, GridGeometry::covering(x0, y0, w, h, cs)?)?;
                base = Some(if exp.dem.fill_holes { fill_holes(&dem)? } else { dem });
                cell = Some(cs);
            }
            if exp.dem.gaussian {
                let geom = GridGeometry::covering(x0, y0, w, h, exp.dem.cell_size)?;
                let tri = delaunay_triangulate(&cloud.xy())?;
                let hyper = default_hyper(&cloud, &tri, exp.dem.hyper)?;
                gdem = Some(build_gaussian_dem_with(&cloud, &tri, geom, &hyper)?);
            }
            Ok((crop, cell, base, gdem))
        })()
    })?;
    let detectors = stage("hd", {
        (|| {
            let dtheta = exp.hd.dtheta_deg.to_radians();
            let mut out = Vec::new();
            for &d in &exp.hd.detectors {
                let maps: DetectorMaps = match d {
                    Detector::Fast => hd_fast_deterministic(&gaussian_dem.as_ref().unwrap().mean, &exp.lander)?.into(),
                    Detector::Oracle => hd_exact_oracle(&gaussian_dem.as_ref().unwrap().mean, &exp.lander, dtheta)?.into(),
                    Detector::Stochastic => {
                        let m = hd_fast_stochastic(gaussian_dem.as_ref().unwrap(), &exp.lander, exp.hd.stochastic_bound)?;
                        let mut extras = Vec::new();
                        if let Some(mo) = &m.moments {
                            extras = vec![
                                ("mu_ll", mo.mu_ll.clone()),
                                ("sigma_ll", mo.sigma_ll.clone()),
                                ("mu_ul", mo.mu_ul.clone()),
                                ("sigma_ul", mo.sigma_ul.clone()),
                            ];
                        }
                        DetectorMaps {
                            safe: m.p_safe(),
                            slope: m.p_slope,
                            rough: m.p_rough,
                            extras,
                        }
                    }
                    Detector::Baseline => {
                        let sigma = exp.hd.baseline_sigma.unwrap_or(scan.sigma_lidar());
                        let m = hd_baseline_stochastic(baseline_dem.as_ref().unwrap(), sigma, &exp.lander, dtheta)?;
                        DetectorMaps {
                            safe: m.p_safe(),
                            slope: m.p_slope,
                            rough: m.p_rough,
                            extras: Vec::new(),
                        }
                    }
                };
                out.push((d, maps));
            }
            Ok(out)
        })()
    })?;
    Ok(ScanRun {
        scan: scan.clone(),
        cloud,
        truth: crop,
        baseline_cell,
        baseline_dem,
        gaussian_dem,
        detectors,
    })
}

/// Oracle safety of the truth over `crop`.
pub fn truth_safety(exp: &ExperimentConfig, crop: &GeoGrid) -> Result<SafetyMap> {
    stage("eval", hd_exact_oracle(crop, &exp.lander, exp.eval.truth_dtheta_deg.to_radians()))
}

/// Flat metric report of one scan.
pub type Metrics = BTreeMap<String, f64>;

fn restrict(grid: &GeoGrid, keep: &[bool]) -> GeoGrid {
    let mut out = grid.clone();
    for (i, &k) in keep.iter().enumerate() {
        if !k {
            let g = *grid.geometry();
            out.set_nodata(i % g.ncols, i / g.ncols);
        }
    }
    out
}

fn on_truth(grid: &GeoGrid, truth: &GridGeometry) -> Result<GeoGrid> {
    if grid.geometry().same_as(truth) {
        Ok(grid.clone())
    } else {
        nearest_resample(grid, *truth)
    }
}

/// DEM metrics over the window and safety metrics over the cells every
/// detector and the truth map can evaluate. NLPD is NaN where some
/// predictive variance is zero. Returns the metrics and the
/// hazard-missing map of each detector's combined safety.
pub fn evaluate(exp: &ExperimentConfig, run: &ScanRun, truth_safe: &SafetyMap) -> Result<(Metrics, Vec<(Detector, GeoGrid)>)> {
    stage("eval", {
        (|| {
            let g = *run.truth.geometry();
            let in_window: Vec<bool> = (0..g.len())
                .map(|i| {
                    let (x, y) = g.center(i % g.ncols, i / g.ncols);
                    exp.eval.window.map_or(true, |r: Rect| r.contains(x, y))
                })
                .collect();
            let truth = restrict(&run.truth, &in_window);
            let mut m = Metrics::new();
            if let Some(gd) = &run.gaussian_dem {
                m.insert("dem.proposed.rmse".into(), rmse(&truth, &gd.mean)?);
                m.insert("dem.proposed.nlpd".into(), nlpd(&truth, gd).unwrap_or(f64::NAN));
            }
            if let Some(b) = &run.baseline_dem {
                m.insert("dem.baseline.rmse".into(), rmse(&truth, b)?);
                m.insert("dem.baseline.nlpd".into(), nlpd_fixed_sigma(&truth, b, run.scan.sigma_lidar()).unwrap_or(f64::NAN));
            }
            let preds: Vec<(Detector, [GeoGrid; 3])> = run
                .detectors
                .iter()
                .map(|(d, maps)| Ok((*d, [on_truth(&maps.slope, &g)?, on_truth(&maps.rough, &g)?, on_truth(&maps.safe, &g)?])))
                .collect::<Result<_>>()?;
            let mut common = in_window;
            for (i, c) in common.iter_mut().enumerate() {
                *c = *c && truth_safe.slope_safe.mask()[i] && preds.iter().all(|(_, p)| p[2].mask()[i]);
            }
            m.insert("eval.cells".into(), common.iter().filter(|&&c| c).count() as f64);
            let truths = [
                restrict(&truth_safe.slope_safe, &common),
                restrict(&truth_safe.rough_safe, &common),
                restrict(&truth_safe.safe(), &common),
            ];
            let mut missing = Vec::new();
            for (d, p) in &preds {
                for ((kind, pred), t) in ["slope", "rough", "safe"].iter().zip(p).zip(&truths) {
                    let pr = precision_recall(pred, t, exp.eval.threshold)?;
                    let key = |s: &str| format!("hd.{}.{kind}.{s}", d.name());
                    m.insert(key("precision"), pr.precision);
                    m.insert(key("recall"), pr.recall);
                    m.insert(key("true_safe"), pr.true_safe as f64);
                    m.insert(key("false_safe"), pr.false_safe as f64);
                    m.insert(key("false_unsafe"), pr.false_unsafe as f64);
                }
                missing.push((*d, hazard_missing_map(&truths[2], &p[2])?));
            }
            Ok((m, missing))
        })()
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Seeds {
    pub terrain: u64,
    pub base: Option<u64>,
    pub scan: u64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ScanReport {
    pub dir: String,
    pub range: f64,
    pub off_nadir_deg: f64,
    pub sigma_lidar: f64,
    pub sigma_eps: f64,
    /// Flat-ground `[coverage_x, coverage_y, gsd_x, gsd_y]`, m.
    pub nominal: [f64; 4],
    pub points: usize,
    pub baseline_cell: Option<f64>,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Manifest {
    pub config_sha256: String,
    pub config: BTreeMap<String, String>,
    pub seeds: Seeds,
    pub scans: Vec<ScanReport>,
    pub files: Vec<FileEntry>,
}

struct Writer {
    root: PathBuf,
    format: GridFormat,
    files: Vec<FileEntry>,
}

impl Writer {
    fn bytes(&mut self, rel: &str, data: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, data).map_err(|e| Error::io(&path, e))?;
        self.files.push(FileEntry {
            path: rel.to_string(),
            sha256: hex::encode(Sha256::digest(data)),
            bytes: data.len() as u64,
        });
        Ok(())
    }

    fn grid(&mut self, rel: &str, grid: &GeoGrid) -> Result<()> {
        let ext = match self.format {
            GridFormat::Ascii => "asc",
            GridFormat::Binary => "grd",
        };
        self.bytes(&format!("{rel}.{ext}"), &encode_grid(grid, self.format)?)
    }

    fn maps(&mut self, dir: &str, name: &str, maps: &DetectorMaps) -> Result<()> {
        self.grid(&format!("{dir}/{name}_slope"), &maps.slope)?;
        self.grid(&format!("{dir}/{name}_rough"), &maps.rough)?;
        self.grid(&format!("{dir}/{name}_safe"), &maps.safe)?;
        for (k, g) in &maps.extras {
            self.grid(&format!("{dir}/{name}_{k}"), g)?;
        }
        Ok(())
    }
}

/// Flat `key = value` text of a metric report.
pub fn metrics_text(m: &Metrics) -> String {
    m.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

fn scan_dir(s: &ScanConfig) -> String {
    format!("scan_r{}_a{}", s.range, s.off_nadir_deg)
}

/// Runs every stage for every scan and writes artifacts under `out`.
pub fn run_pipeline(cfg: &Config, out: &Path) -> Result<Manifest> {
    let exp = ExperimentConfig::from_config(cfg)?;
    check_detectors(&exp)?;
    let mut w = Writer {
        root: out.to_path_buf(),
        format: exp.format,
        files: Vec::new(),
    };
    let truth = stage("synth", synthesize(&exp))?;
    stage("write", {
        w.grid("truth", &truth.dem)?;
        w.bytes("rocks.csv", rocks_to_csv(&truth.rocks).as_bytes())?;
        match &truth.base {
            Some(b) => w.grid("base", b),
            None => Ok(()),
        }
    })?;

    // With a fixed domain every scan shares the truth safety map.
    let shared = match (exp.eval.enabled, exp.dem.domain) {
        (true, Some(r)) => {
            let crop = stage("eval", truth.dem.crop(r.x0, r.y0, r.width, r.height))?;
            let ts = truth_safety(&exp, &crop)?;
            stage("write", w.maps("truth_safety", "oracle", &ts.clone().into()))?;
            Some(ts)
        }
        _ => None,
    };

    let mut scans = Vec::new();
    for scan in &exp.scans {
        let dir = scan_dir(scan);
        log::info!("{dir}: scanning");
        let run = process_scan(&exp, &truth.dem, scan)?;
        let mut metrics = Metrics::new();
        stage("write", {
            (|| {
                w.bytes(&format!("{dir}/cloud.bin"), &run.cloud.to_binary())?;
                if let Some(b) = &run.baseline_dem {
                    w.grid(&format!("{dir}/dem_baseline"), b)?;
                }
                if let Some(g) = &run.gaussian_dem {
                    w.grid(&format!("{dir}/gdem_mean"), &g.mean)?;
                    w.grid(&format!("{dir}/gdem_variance"), &g.variance)?;
                }
                for (d, maps) in &run.detectors {
                    w.maps(&dir, d.name(), maps)?;
                }
                Ok(())
            })()
        })?;
        if exp.eval.enabled {
            let own;
            let ts = match &shared {
                Some(ts) => ts,
                None => {
                    own = truth_safety(&exp, &run.truth)?;
                    stage("write", w.maps(&dir, "truth", &own.clone().into()))?;
                    &own
                }
            };
            let (m, missing) = evaluate(&exp, &run, ts)?;
            stage("write", {
                (|| {
                    for (d, g) in &missing {
                        w.grid(&format!("{dir}/missing_{}", d.name()), g)?;
                    }
                    w.bytes(&format!("{dir}/metrics.txt"), metrics_text(&m).as_bytes())
                })()
            })?;
            metrics = m;
        }
        let (cx, cy, gx, gy) = stage("scan", nominal_scan_geometry(scan))?;
        scans.push(ScanReport {
            dir,
            range: scan.range,
            off_nadir_deg: scan.off_nadir_deg,
            sigma_lidar: scan.sigma_lidar(),
            sigma_eps: scan.sigma_eps(),
            nominal: [cx, cy, gx, gy],
            points: run.cloud.len(),
            baseline_cell: run.baseline_cell,
            metrics,
        });
    }

    let manifest = Manifest {
        config_sha256: cfg.hash(),
        config: cfg.keys().map(|k| (k.to_string(), cfg.raw(k).unwrap_or_default().to_string())).collect(),
        seeds: Seeds {
            terrain: exp.terrain.seed,
            base: match exp.base {
                BaseTerrain::Fractal { seed, .. } => Some(seed),
                _ => None,
            },
            scan: exp.scans.first().map_or(0, |s| s.seed),
        },
        scans,
        files: w.files,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = out.join("manifest.json");
    stage("write", std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e)))?;
    Ok(manifest)
}
