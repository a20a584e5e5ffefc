// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use terrain_hazard::bench::{bench_runtime, BenchConfig};
use terrain_hazard::config::{lander_from_config, Config, ExperimentConfig};
use terrain_hazard::dem::{baseline_resolution, build_dem_bilinear, fill_holes};
use terrain_hazard::gaussian::{build_gaussian_dem_with, default_hyper, delaunay_triangulate, HyperOverrides};
use terrain_hazard::grid::{grid_read, grid_write, nearest_resample, GridFormat};
use terrain_hazard::hazard::{
    hd_baseline_stochastic, hd_exact_oracle, hd_fast_deterministic, hd_fast_stochastic, LanderGeom, SlopeBound,
    DEFAULT_DTHETA_DEG,
};
use terrain_hazard::lidar::simulate_scan;
use terrain_hazard::metrics::{hazard_missing_map, nlpd, nlpd_fixed_sigma, precision_recall, rmse};
use terrain_hazard::pipeline::{metrics_text, run_pipeline, synthesize, Metrics};
use terrain_hazard::terrain::write_rocks_csv;
use terrain_hazard::{Error, GaussianGrid, GeoGrid, GridGeometry, PointCloud, Result};

#[derive(Parser)]
#[command(name = "terrain-hazard", version, about = "Stochastic terrain mapping and landing hazard detection")]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "TERRAIN_HAZARD_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth terrain.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the rock list as CSV.
        #[arg(long)]
        rocks: Option<PathBuf>,
    },
    /// Simulate a LiDAR scan of a terrain grid.
    Scan {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        range: Option<f64>,
        #[arg(long)]
        off_nadir: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// `.bin` for the binary stream, anything else CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a DEM from a point cloud.
    Dem {
        #[command(subcommand)]
        kind: DemKind,
    },
    /// Run a hazard detector.
    Hd {
        detector: DetectorArg,
        #[command(flatten)]
        args: HdArgs,
    },
    /// Score an estimate against the truth.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        metric: MetricArg,
        /// Variance grid for `nlpd` with a Gaussian DEM.
        #[arg(long)]
        variance: Option<PathBuf>,
        /// Fixed standard deviation for `nlpd` with a plain DEM.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Output raster for `missing`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time both pipelines across resolutions.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1")]
        resolutions: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
    },
    /// Run the full experiment described by a config file.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum DemKind {
    /// Bilinear accumulation with hole filling.
    Baseline {
        #[command(flatten)]
        cloud: CloudArgs,
        #[arg(long, conflicts_with = "auto_gsd")]
        cell_size: Option<f64>,
        /// Use the cloud's ground sample distance (the default).
        #[arg(long)]
        auto_gsd: bool,
        #[arg(long)]
        no_fill: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Triangulation plus local Gaussian random field regression.
    Gaussian {
        #[command(flatten)]
        cloud: CloudArgs,
        #[arg(long)]
        cell_size: f64,
        #[arg(long)]
        sigma_f: Option<f64>,
        #[arg(long)]
        length_scale: Option<f64>,
        #[arg(long)]
        sigma_eps: Option<f64>,
        #[arg(long)]
        mean: PathBuf,
        #[arg(long)]
        variance: PathBuf,
    },
}

#[derive(Args)]
struct CloudArgs {
    #[arg(long)]
    cloud: PathBuf,
    /// Noise level for CSV clouds, which do not record one.
    #[arg(long = "cloud-sigma", default_value_t = 0.0)]
    cloud_sigma: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorArg {
    Fast,
    Stochastic,
    Baseline,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Rmse,
    Nlpd,
    Pr,
    Missing,
}

#[derive(Args)]
struct HdArgs {
    #[arg(long, conflicts_with = "gdem")]
    dem: Option<PathBuf>,
    /// Mean and variance grids.
    #[arg(long, num_args = 2, value_names = ["MEAN", "VARIANCE"])]
    gdem: Option<Vec<PathBuf>>,
    /// Config file with `lander.*` keys; defaults apply otherwise.
    #[arg(long)]
    lander: Option<PathBuf>,
    /// Heading step for `oracle` and `baseline`, degrees.
    #[arg(long, default_value_t = DEFAULT_DTHETA_DEG)]
    dtheta: f64,
    /// Slope bound for `stochastic`.
    #[arg(long, default_value = "tan")]
    slope_bound: String,
    /// Per-pixel elevation noise for `baseline`, m.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    Config::load(path).map_err(|e| match e {
        e @ Error::Config(_) => e,
        e => Error::Config(e.to_string()),
    })
}

fn experiment(path: Option<&Path>) -> Result<ExperimentConfig> {
    ExperimentConfig::from_config(&load_config(path)?)
}

fn write(path: &Path, grid: &GeoGrid) -> Result<()> {
    grid_write(grid, path, GridFormat::from_path(path))
}

fn write_named(dir: &Path, maps: &[(&str, &GeoGrid)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    for (name, g) in maps {
        write(&dir.join(format!("{name}.grd")), g)?;
    }
    Ok(())
}

fn cloud_geometry(cloud: &PointCloud, cs: f64) -> Result<GridGeometry> {
    let (x0, y0, x1, y1) = cloud.bounds().ok_or(Error::EmptyScan)?;
    let (ox, oy) = ((x0 / cs).floor() * cs, (y0 / cs).floor() * cs);
    GridGeometry::covering(ox, oy, (x1 - ox).max(cs), (y1 - oy).max(cs), cs)
}

fn read_gdem(paths: &[PathBuf]) -> Result<GaussianGrid> {
    GaussianGrid::new(grid_read(&paths[0])?, grid_read(&paths[1])?)
}

fn run_hd(detector: DetectorArg, a: &HdArgs) -> Result<()> {
    let geom: LanderGeom = match &a.lander {
        Some(p) => lander_from_config(&load_config(Some(p))?)?,
        None => LanderGeom::default(),
    };
    let bound: SlopeBound = a.slope_bound.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let dtheta = a.dtheta.to_radians();
    let plain = || -> Result<GeoGrid> {
        match (&a.dem, &a.gdem) {
            (Some(p), _) => grid_read(p),
            (None, Some(g)) => grid_read(&g[0]),
            (None, None) => Err(Error::Config("need --dem or --gdem".into())),
        }
    };
    match detector {
        DetectorArg::Fast | DetectorArg::Oracle => {
            let dem = plain()?;
            let m = match detector {
                DetectorArg::Fast => hd_fast_deterministic(&dem, &geom)?,
                _ => hd_exact_oracle(&dem, &geom, dtheta)?,
            };
            let safe = m.safe();
            write_named(
                &a.out,
                &[
                    ("slope_safe", &m.slope_safe),
                    ("rough_safe", &m.rough_safe),
                    ("safe", &safe),
                    ("slope_deg", &m.slope),
                    ("roughness", &m.roughness),
                ],
            )
        }
        DetectorArg::Stochastic => {
            let g = a.gdem.as_ref().ok_or_else(|| Error::Config("stochastic needs --gdem MEAN VARIANCE".into()))?;
            let m = hd_fast_stochastic(&read_gdem(g)?, &geom, bound)?;
            let safe = m.p_safe();
            write_named(&a.out, &[("p_slope", &m.p_slope), ("p_rough", &m.p_rough), ("p_safe", &safe)])
        }
        DetectorArg::Baseline => {
            let m = hd_baseline_stochastic(&plain()?, a.sigma, &geom, dtheta)?;
            let safe = m.p_safe();
            write_named(&a.out, &[("p_slope", &m.p_slope), ("p_rough", &m.p_rough), ("p_safe", &safe)])
        }
    }
}

fn aligned(pred: &GeoGrid, truth: &GeoGrid) -> Result<GeoGrid> {
    if pred.geometry().same_as(truth.geometry()) {
        Ok(pred.clone())
    } else {
        nearest_resample(pred, *truth.geometry())
    }
}

#[allow(clippy::too_many_arguments)]
fn run_eval(
    truth: &Path,
    pred: &Path,
    metric: MetricArg,
    variance: Option<&Path>,
    sigma: Option<f64>,
    threshold: f64,
    out: Option<&Path>,
) -> Result<()> {
    let truth = grid_read(truth)?;
    let pred = grid_read(pred)?;
    let mut m = Metrics::new();
    match metric {
        MetricArg::Rmse => {
            m.insert("rmse".into(), rmse(&truth, &pred)?);
        }
        MetricArg::Nlpd => {
            let v = match (variance, sigma) {
                (Some(v), _) => nlpd(&truth, &GaussianGrid::new(pred, grid_read(v)?)?)?,
                (None, Some(s)) => nlpd_fixed_sigma(&truth, &pred, s)?,
                (None, None) => return Err(Error::Config("nlpd needs --variance or --sigma".into())),
            };
            m.insert("nlpd".into(), v);
        }
        MetricArg::Pr => {
            let pred = aligned(&pred, &truth)?;
            let pr = precision_recall(&pred, &truth, threshold)?;
            m.insert("precision".into(), pr.precision);
            m.insert("recall".into(), pr.recall);
            m.insert("true_safe".into(), pr.true_safe as f64);
            m.insert("false_safe".into(), pr.false_safe as f64);
            m.insert("false_unsafe".into(), pr.false_unsafe as f64);
            m.insert("true_unsafe".into(), pr.true_unsafe as f64);
        }
        MetricArg::Missing => {
            let map = hazard_missing_map(&truth, &aligned(&pred, &truth)?)?;
            let out = out.ok_or_else(|| Error::Config("missing needs --out".into()))?;
            write(out, &map)?;
            let vals: Vec<f64> = map.values().iter().zip(map.mask()).filter(|(_, ok)| **ok).map(|(v, _)| *v).collect();
            m.insert("cells".into(), vals.len() as f64);
            m.insert("mean".into(), vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    print!("{}", metrics_text(&m));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, out, rocks } => {
            let truth = synthesize(&experiment(config.as_deref())?)?;
            write(&out, &truth.dem)?;
            if let Some(r) = rocks {
                write_rocks_csv(&truth.rocks, r)?;
            }
            Ok(())
        }
        Command::Scan {
            truth,
            config,
            range,
            off_nadir,
            seed,
            out,
        } => {
            let mut scan = experiment(config.as_deref())?.scans.remove(0);
            scan.range = range.unwrap_or(scan.range);
            scan.off_nadir_deg = off_nadir.unwrap_or(scan.off_nadir_deg);
            scan.seed = seed.unwrap_or(scan.seed);
            scan.validate().map_err(|e| Error::Config(e.to_string()))?;
            let cloud = simulate_scan(&grid_read(truth)?, &scan)?;
            log::info!("{} returns, sigma_eps {}", cloud.len(), cloud.sigma_eps());
            cloud.write(out)
        }
        Command::Dem { kind } => match kind {
            DemKind::Baseline {
                cloud,
                cell_size,
                auto_gsd: _,
                no_fill,
                out,
            } => {
                let c = PointCloud::read(&cloud.cloud, cloud.cloud_sigma)?;
                let cs = match cell_size {
                    Some(cs) => cs,
                    None => baseline_resolution(&c)?,
                };
                let dem = build_dem_bilinear(&c, cloud_geometry(&c, cs)?)?;
                write(&out, &if no_fill { dem } else { fill_holes(&dem)? })
            }
            DemKind::Gaussian {
                cloud,
                cell_size,
                sigma_f,
                length_scale,
                sigma_eps,
                mean,
                variance,
            } => {
                let c = PointCloud::read(&cloud.cloud, cloud.cloud_sigma)?;
                let tri = delaunay_triangulate(&c.xy())?;
                let hyper = default_hyper(
                    &c,
                    &tri,
                    HyperOverrides {
                        sigma_f,
                        length_scale,
                        sigma_eps,
                    },
                )?;
                log::info!("hyperparameters {hyper:?}");
                let g = build_gaussian_dem_with(&c, &tri, cloud_geometry(&c, cell_size)?, &hyper)?;
                write(&mean, &g.mean)?;
                write(&variance, &g.variance)
            }
        },
        Command::Hd { detector, args } => run_hd(detector, &args),
        Command::Eval {
            truth,
            pred,
            metric,
            variance,
            sigma,
            threshold,
            out,
        } => run_eval(&truth, &pred, metric, variance.as_deref(), sigma, threshold, out.as_deref()),
        Command::Bench {
            config,
            resolutions,
            repeats,
            warmup,
        } => {
            let mut b = BenchConfig::from_experiment(&experiment(config.as_deref())?);
            b.repeats = repeats;
            b.warmup = warmup;
            print!("{}", bench_runtime(&resolutions, &b)?.to_table());
            Ok(())
        }
        Command::Pipeline { config, out } => {
            let m = run_pipeline(&load_config(Some(&config))?, &out)?;
            println!("config_sha256 = {}", m.config_sha256);
            println!("files = {}", m.files.len());
            for s in &m.scans {
                println!("{} points = {}", s.dir, s.points);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                _ => 3,
            })
        }
    }
}
