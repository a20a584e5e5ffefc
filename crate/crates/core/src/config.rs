// SPDX-License-Identifier: Apache-2.0

//! Flat `key = value` experiment configuration.
//!
//! Keys are dotted (`terrain.seed`); a `[section]` line prefixes the keys
//! that follow it. `#` starts a comment. A value containing commas is a list,
//! used for scan sweeps: `scan.range = 200, 500, 1000`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gaussian::HyperOverrides;
use crate::grid::GridFormat;
use crate::hazard::{LanderGeom, SlopeBound, DEFAULT_DTHETA_DEG};
use crate::lidar::{default_fov, ScanConfig};
use crate::terrain::TerrainConfig;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(format!("line {}: unterminated section header", no + 1)))?
                    .trim();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(config_err(format!("line {}: bad section name {name:?}", no + 1)));
                }
                section = format!("{name}.");
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(config_err(format!("line {}: bad key {k:?}", no + 1)));
            }
            let key = format!("{section}{k}");
            if entries.insert(key.clone(), v.to_string()).is_some() {
                return Err(config_err(format!("line {}: duplicate key {key}", no + 1)));
            }
        }
        Ok(Config { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Config> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text).map_err(|e| match e {
            Error::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.raw(key).map(|v| parse_value(key, v)).transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        let items: Vec<T> = v.split(',').map(|s| parse_value(key, s.trim())).collect::<Result<_>>()?;
        Ok(Some(items))
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "yes" | "on" | "1") => Ok(true),
            Some("false" | "no" | "off" | "0") => Ok(false),
            Some(v) => Err(config_err(format!("{key}: expected a boolean, got {v:?}"))),
        }
    }

    /// Errors on the first key not in `known`.
    pub fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        match self.keys().find(|k| !known.contains(k)) {
            Some(k) => Err(config_err(format!("unknown key {k}"))),
            None => Ok(()),
        }
    }

    /// Sorted `key = value` lines; the form that is hashed.
    pub fn canonical(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Hex SHA-256 of [`Config::canonical`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// Keys under `prefix.` with the prefix stripped.
    pub fn section(&self, prefix: &str) -> Config {
        let p = format!("{prefix}.");
        Config {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(&p).map(|s| (s.to_string(), v.clone())))
                .collect(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: Display,
{
    v.parse().map_err(|e| config_err(format!("{key}: cannot parse {v:?}: {e}")))
}

/// Base terrain added to the rock field with weight `terrain.complexity`.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseTerrain {
    None,
    /// Generated at `resolution` and bilinearly upsampled to the truth grid.
    Fractal {
        hurst: f64,
        amplitude: f64,
        resolution: f64,
        seed: u64,
    },
    /// External DEM, nearest-resampled onto the truth grid.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Detector {
    Fast,
    Stochastic,
    Baseline,
    Oracle,
}

impl Detector {
    pub fn name(self) -> &'static str {
        match self {
            Detector::Fast => "fast",
            Detector::Stochastic => "stochastic",
            Detector::Baseline => "baseline",
            Detector::Oracle => "oracle",
        }
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Detector::Fast),
            "stochastic" => Ok(Detector::Stochastic),
            "baseline" => Ok(Detector::Baseline),
            "oracle" => Ok(Detector::Oracle),
            _ => Err(config_err(format!("unknown detector {s:?}"))),
        }
    }
}

/// Baseline DEM cell size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellSize {
    /// The cloud's ground sample distance.
    Auto,
    Fixed(f64),
}

impl FromStr for CellSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(CellSize::Auto);
        }
        match s.parse::<f64>() {
            Ok(c) if c > 0.0 && c.is_finite() => Ok(CellSize::Fixed(c)),
            _ => Err(config_err(format!("cell size must be 'auto' or a positive number, got {s:?}"))),
        }
    }
}

/// Axis-aligned rectangle `x0, y0, width, height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    fn from_list(key: &str, v: Vec<f64>) -> Result<Rect> {
        match v[..] {
            [x0, y0, width, height] if width > 0.0 && height > 0.0 => Ok(Rect { x0, y0, width, height }),
            _ => Err(config_err(format!("{key}: expected x0, y0, width, height with positive size"))),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x0 + self.width && y >= self.y0 && y <= self.y0 + self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemConfig {
    pub baseline: bool,
    pub gaussian: bool,
    pub baseline_cell: CellSize,
    pub fill_holes: bool,
    /// Gaussian DEM cell size; defaults to the truth resolution.
    pub cell_size: f64,
    /// Region the DEMs cover; defaults to the truth extent.
    pub domain: Option<Rect>,
    pub hyper: HyperOverrides,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HdConfig {
    pub detectors: Vec<Detector>,
    /// Orientation step for the oracle and baseline, degrees.
    pub dtheta_deg: f64,
    pub stochastic_bound: SlopeBound,
    /// Per-pixel elevation noise for the baseline; defaults to the scan's
    /// ray noise.
    pub baseline_sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub enabled: bool,
    /// Scored region; defaults to the DEM domain minus the lander reach.
    pub window: Option<Rect>,
    pub truth_dtheta_deg: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub terrain: TerrainConfig,
    pub base: BaseTerrain,
    pub complexity: f64,
    /// Cartesian product of the listed ranges and angles, range-major.
    pub scans: Vec<ScanConfig>,
    pub dem: DemConfig,
    pub lander: LanderGeom,
    pub hd: HdConfig,
    pub eval: EvalConfig,
    pub format: GridFormat,
}

const KNOWN_KEYS: &[&str] = &[
    "terrain.origin_x",
    "terrain.origin_y",
    "terrain.width",
    "terrain.height",
    "terrain.resolution",
    "terrain.n_rocks",
    "terrain.rock_diameter",
    "terrain.rock_diameter_max",
    "terrain.height_ratio",
    "terrain.aspect",
    "terrain.packing_fraction",
    "terrain.attempts_per_rock",
    "terrain.seed",
    "terrain.complexity",
    "terrain.base",
    "terrain.base_hurst",
    "terrain.base_amplitude",
    "terrain.base_resolution",
    "terrain.base_seed",
    "scan.range",
    "scan.off_nadir",
    "scan.detector_cols",
    "scan.detector_rows",
    "scan.fov_deg",
    "scan.sigma3_at_500m",
    "scan.target_x",
    "scan.target_y",
    "scan.seed",
    "dem.baseline",
    "dem.gaussian",
    "dem.baseline_cell_size",
    "dem.fill_holes",
    "dem.cell_size",
    "dem.domain",
    "dem.sigma_f",
    "dem.length_scale",
    "dem.sigma_eps",
    "lander.n_legs",
    "lander.leg_circle_radius",
    "lander.pad_radius",
    "lander.body_radius",
    "lander.slope_threshold",
    "lander.roughness_threshold",
    "hd.detectors",
    "hd.dtheta",
    "hd.slope_bound",
    "hd.baseline_sigma",
    "eval.enabled",
    "eval.window",
    "eval.truth_dtheta",
    "eval.threshold",
    "output.format",
];

impl ExperimentConfig {
    pub fn from_config(cfg: &Config) -> Result<ExperimentConfig> {
        cfg.reject_unknown(KNOWN_KEYS)?;
        let d = TerrainConfig::default();
        let terrain = TerrainConfig {
            origin_x: cfg.get_or("terrain.origin_x", d.origin_x)?,
            origin_y: cfg.get_or("terrain.origin_y", d.origin_y)?,
            width: cfg.get_or("terrain.width", d.width)?,
            height: cfg.get_or("terrain.height", d.height)?,
            resolution: cfg.get_or("terrain.resolution", d.resolution)?,
            n_rocks: cfg.get_or("terrain.n_rocks", d.n_rocks)?,
            rock_diameter: cfg.get_or("terrain.rock_diameter", d.rock_diameter)?,
            rock_diameter_max: cfg.get("terrain.rock_diameter_max")?,
            height_ratio: cfg.get_or("terrain.height_ratio", d.height_ratio)?,
            aspect: cfg.get_or("terrain.aspect", d.aspect)?,
            packing_fraction: cfg.get_or("terrain.packing_fraction", d.packing_fraction)?,
            attempts_per_rock: cfg.get_or("terrain.attempts_per_rock", d.attempts_per_rock)?,
            seed: cfg.get_or("terrain.seed", d.seed)?,
        };
        let complexity: f64 = cfg.get_or("terrain.complexity", 0.0)?;
        if !(complexity >= 0.0 && complexity.is_finite()) {
            return Err(config_err("terrain.complexity must be >= 0"));
        }
        let base = match cfg.raw("terrain.base").unwrap_or("none") {
            "none" => BaseTerrain::None,
            "fractal" => BaseTerrain::Fractal {
                hurst: cfg.get_or("terrain.base_hurst", 0.8)?,
                amplitude: cfg.get_or("terrain.base_amplitude", 1.0)?,
                resolution: cfg.get_or("terrain.base_resolution", terrain.resolution)?,
                seed: cfg.get_or("terrain.base_seed", terrain.seed)?,
            },
            path => BaseTerrain::File(PathBuf::from(path)),
        };

        let sd = ScanConfig::default();
        let ranges = cfg.get_list("scan.range")?.unwrap_or(vec![sd.range]);
        let angles = cfg.get_list("scan.off_nadir")?.unwrap_or(vec![sd.off_nadir_deg]);
        let detector = (
            cfg.get_or("scan.detector_cols", sd.detector.0)?,
            cfg.get_or("scan.detector_rows", sd.detector.1)?,
        );
        let fov = cfg.get::<f64>("scan.fov_deg")?.map(f64::to_radians).unwrap_or_else(default_fov);
        let target = match (cfg.get::<f64>("scan.target_x")?, cfg.get::<f64>("scan.target_y")?) {
            (Some(x), Some(y)) => Some((x, y)),
            (None, None) => None,
            _ => return Err(config_err("scan.target_x and scan.target_y must be given together")),
        };
        let sigma3 = cfg.get_or("scan.sigma3_at_500m", sd.sigma3_at_500m)?;
        let scan_seed = cfg.get_or("scan.seed", sd.seed)?;
        let mut scans = Vec::new();
        for &range in &ranges {
            for &off_nadir_deg in &angles {
                let s = ScanConfig {
                    range,
                    off_nadir_deg,
                    detector,
                    fov,
                    sigma3_at_500m: sigma3,
                    target,
                    seed: scan_seed,
                };
                s.validate().map_err(|e| config_err(e.to_string()))?;
                scans.push(s);
            }
        }

        let dem = DemConfig {
            baseline: cfg.get_bool("dem.baseline", true)?,
            gaussian: cfg.get_bool("dem.gaussian", true)?,
            baseline_cell: cfg.get_or("dem.baseline_cell_size", CellSize::Auto)?,
            fill_holes: cfg.get_bool("dem.fill_holes", true)?,
            cell_size: cfg.get_or("dem.cell_size", terrain.resolution)?,
            domain: cfg.get_list("dem.domain")?.map(|v| Rect::from_list("dem.domain", v)).transpose()?,
            hyper: HyperOverrides {
                sigma_f: cfg.get("dem.sigma_f")?,
                length_scale: cfg.get("dem.length_scale")?,
                sigma_eps: cfg.get("dem.sigma_eps")?,
            },
        };
        if !(dem.cell_size > 0.0) {
            return Err(config_err("dem.cell_size must be positive"));
        }

        let ld = LanderGeom::default();
        let n_legs = cfg.get_or("lander.n_legs", ld.n_legs)?;
        let radius = cfg.get_or("lander.leg_circle_radius", ld.leg_circle_radius)?;
        let lander = LanderGeom::new(
            n_legs,
            radius,
            cfg.get_or("lander.pad_radius", ld.pad_radius)?,
            cfg.get_or("lander.body_radius", radius * (PI / n_legs.max(3) as f64).cos())?,
            cfg.get_or("lander.slope_threshold", ld.slope_threshold)?,
            cfg.get_or("lander.roughness_threshold", ld.roughness_threshold)?,
        )
        .map_err(|e| config_err(e.to_string()))?;

        let mut detectors: Vec<Detector> = cfg
            .get_list("hd.detectors")?
            .unwrap_or(vec![Detector::Fast, Detector::Stochastic, Detector::Baseline]);
        detectors.sort();
        detectors.dedup();
        let hd = HdConfig {
            detectors,
            dtheta_deg: positive(cfg, "hd.dtheta", DEFAULT_DTHETA_DEG)?,
            stochastic_bound: cfg.get_or("hd.slope_bound", SlopeBound::Tan)?,
            baseline_sigma: cfg.get("hd.baseline_sigma")?,
        };
        let eval = EvalConfig {
            enabled: cfg.get_bool("eval.enabled", true)?,
            window: cfg.get_list("eval.window")?.map(|v| Rect::from_list("eval.window", v)).transpose()?,
            truth_dtheta_deg: positive(cfg, "eval.truth_dtheta", DEFAULT_DTHETA_DEG)?,
            threshold: cfg.get_or("eval.threshold", 0.5)?,
        };
        let format = cfg.get_or("output.format", GridFormat::Binary)?;
        Ok(ExperimentConfig {
            terrain,
            base,
            complexity,
            scans,
            dem,
            lander,
            hd,
            eval,
            format,
        })
    }
}

fn positive(cfg: &Config, key: &str, default: f64) -> Result<f64> {
    let v = cfg.get_or(key, default)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_err(format!("{key} must be positive, got {v}")))
    }
}

/// Lander geometry from the `lander.*` keys of a config, other keys ignored.
pub fn lander_from_config(cfg: &Config) -> Result<LanderGeom> {
    let mut only = Config::default();
    for k in cfg.keys().filter(|k| k.starts_with("lander.")) {
        only.set(k, cfg.raw(k).unwrap_or_default());
    }
    Ok(ExperimentConfig::from_config(&only)?.lander)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = "
        # Table-style sweep
        hd.detectors = stochastic, fast, fast
        [terrain]
        seed = 7
        n_rocks = 20
        base = fractal
        complexity = 0.5

        [scan]
        range = 200, 500, 1000
        off_nadir = 0, 30, 60
        lander.mass = 4
    ";

    #[test]
    fn parses_sections_lists_and_comments() {
        let cfg = Config::parse(SWEEP).unwrap();
        assert_eq!(cfg.get::<u64>("terrain.seed").unwrap(), Some(7));
        assert_eq!(cfg.get_list::<f64>("scan.range").unwrap(), Some(vec![200.0, 500.0, 1000.0]));
        assert!(cfg.get::<f64>("scan.range").is_err());
        assert_eq!(cfg.raw("hd.detectors"), Some("stochastic, fast, fast"));
        assert_eq!(cfg.raw("scan.lander.mass"), Some("4"));
        assert_eq!(cfg.section("terrain").raw("base"), Some("fractal"));
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(Config::parse("a = 1\na = 2"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("no equals"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("[open\n"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("bad key = 1"), Err(Error::Config(_))));
        let cfg = Config::parse("x = yes\ny = maybe").unwrap();
        assert!(cfg.get_bool("x", false).unwrap());
        assert!(cfg.get_bool("y", false).is_err());
    }

    #[test]
    fn hash_ignores_layout() {
        let a = Config::parse("[scan]\nrange = 500\nseed=1\n").unwrap();
        let b = Config::parse("scan.seed = 1 # comment\n\nscan.range=500").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = Config::parse("scan.seed = 2\nscan.range=500").unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn experiment_defaults() {
        let e = ExperimentConfig::from_config(&Config::default()).unwrap();
        assert_eq!(e.terrain, TerrainConfig::default());
        assert_eq!(e.scans.len(), 1);
        assert_eq!(e.lander, LanderGeom::default());
        assert_eq!(e.base, BaseTerrain::None);
        assert_eq!(e.dem.cell_size, e.terrain.resolution);
        assert_eq!(e.hd.stochastic_bound, SlopeBound::Tan);
        assert_eq!(e.format, GridFormat::Binary);
    }

    #[test]
    fn sweep_expands_range_major() {
        let mut cfg = Config::parse(SWEEP).unwrap();
        assert!(ExperimentConfig::from_config(&cfg).is_err());
        cfg.entries.remove("scan.lander.mass");
        let e = ExperimentConfig::from_config(&cfg).unwrap();
        let pairs: Vec<(f64, f64)> = e.scans.iter().map(|s| (s.range, s.off_nadir_deg)).collect();
        assert_eq!(pairs.len(), 9);
        assert_eq!(pairs[0], (200.0, 0.0));
        assert_eq!(pairs[1], (200.0, 30.0));
        assert_eq!(pairs[8], (1000.0, 60.0));
        assert_eq!(e.hd.detectors, vec![Detector::Fast, Detector::Stochastic]);
        assert!(matches!(e.base, BaseTerrain::Fractal { seed: 7, .. }));
        assert_eq!(e.complexity, 0.5);
    }

    #[test]
    fn rejects_bad_experiments() {
        let bad = |s: &str| ExperimentConfig::from_config(&Config::parse(s).unwrap()).unwrap_err();
        assert!(matches!(bad("terrain.colour = red"), Error::Config(_)));
        assert!(matches!(bad("scan.off_nadir = 0, 95"), Error::Config(_)));
        assert!(matches!(bad("lander.body_radius = 3"), Error::Config(_)));
        assert!(matches!(bad("scan.target_x = 3"), Error::Config(_)));
        assert!(matches!(bad("hd.detectors = fast, magic"), Error::Config(_)));
        assert!(matches!(bad("eval.window = 1, 2, 3"), Error::Config(_)));
        assert!(matches!(bad("dem.baseline_cell_size = -1"), Error::Config(_)));
    }

    #[test]
    fn lander_section_only() {
        let cfg = Config::parse("lander.n_legs = 4\nlander.leg_circle_radius = 2\nscan.range = 1").unwrap();
        let g = lander_from_config(&cfg).unwrap();
        assert_eq!(g.n_legs, 4);
        assert!((g.body_radius - 2.0 * (PI / 4.0).cos()).abs() < 1e-15);
    }
}
