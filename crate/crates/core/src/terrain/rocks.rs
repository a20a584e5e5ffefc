// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{GeoGrid, GridGeometry};
use crate::rng;

/// A hemi-ellipsoidal rock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RockSpec {
    pub center_x: f64,
    pub center_y: f64,
    /// Semi-major axis.
    pub a: f64,
    /// Semi-minor axis.
    pub b: f64,
    pub height: f64,
    pub yaw: f64,
}

impl RockSpec {
    pub fn elevation(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.center_x, y - self.center_y);
        let (s, c) = self.yaw.sin_cos();
        let xl = (c * dx + s * dy) / self.a;
        let yl = (-s * dx + c * dy) / self.b;
        let r2 = 1.0 - xl * xl - yl * yl;
        if r2 > 0.0 {
            self.height * r2.sqrt()
        } else {
            0.0
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.center_x, self.center_y, self.a, self.b, self.height, self.yaw]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.b > 0.0) || self.a < self.b || !(self.height > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid rock {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerrainConfig {
    pub origin_x: f64,
    pub origin_y: f64,
    pub width: f64,
    pub height: f64,
    /// Cell size, m/pix.
    pub resolution: f64,
    pub n_rocks: usize,
    /// Rock diameter `2a`. With `rock_diameter_max` set, diameters are drawn
    /// uniformly from `[rock_diameter, rock_diameter_max]`.
    pub rock_diameter: f64,
    pub rock_diameter_max: Option<f64>,
    /// Rock height as a multiple of the semi-major axis.
    pub height_ratio: f64,
    /// `b / a`, in `(0, 1]`.
    pub aspect: f64,
    /// Upper bound on total rock footprint area relative to the extent.
    pub packing_fraction: f64,
    /// Placement attempts allowed per requested rock.
    pub attempts_per_rock: usize,
    pub seed: u64,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        TerrainConfig {
            origin_x: 0.0,
            origin_y: 0.0,
            width: 200.0,
            height: 200.0,
            resolution: 0.1,
            n_rocks: 500,
            rock_diameter: 1.0,
            rock_diameter_max: None,
            height_ratio: 1.0,
            aspect: 1.0,
            packing_fraction: 0.5,
            attempts_per_rock: 100,
            seed: 0,
        }
    }
}

impl TerrainConfig {
    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::covering(self.origin_x, self.origin_y, self.width, self.height, self.resolution)
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("terrain: {what}")));
        if !(self.resolution > 0.0) {
            return bad("resolution must be positive");
        }
        if !(self.rock_diameter > 0.0) {
            return bad("rock diameter must be positive");
        }
        if let Some(dmax) = self.rock_diameter_max {
            if !(dmax >= self.rock_diameter) {
                return bad("rock_diameter_max below rock_diameter");
            }
        }
        if !(self.aspect > 0.0 && self.aspect <= 1.0) {
            return bad("aspect must lie in (0, 1]");
        }
        if !(self.height_ratio > 0.0) {
            return bad("height ratio must be positive");
        }
        if !(self.packing_fraction > 0.0 && self.packing_fraction <= 1.0) {
            return bad("packing fraction must lie in (0, 1]");
        }
        Ok(())
    }

    fn max_diameter(&self) -> f64 {
        self.rock_diameter_max.unwrap_or(self.rock_diameter)
    }
}

/// Places `n_rocks` non-overlapping rocks (bounding circles of radius `a`)
/// by rejection sampling and rasterizes them onto a flat zero plane.
///
/// Rock `i` draws from its own counter-based stream, and candidates are
/// accepted in index order, so the result depends only on the seed.
pub fn gen_rock_field(cfg: &TerrainConfig) -> Result<(GeoGrid, Vec<RockSpec>)> {
    cfg.validate()?;
    let geom = cfg.geometry()?;
    let n = cfg.n_rocks;
    let dmax = cfg.max_diameter();
    if n > 0 && (dmax > cfg.width || dmax > cfg.height) {
        return Err(Error::InvalidArgument(format!(
            "rock diameter {dmax} exceeds extent {} x {}",
            cfg.width, cfg.height
        )));
    }
    let footprint = n as f64 * PI * (dmax / 2.0).powi(2);
    if footprint >= cfg.packing_fraction * cfg.width * cfg.height {
        return Err(Error::InvalidArgument(format!(
            "{n} rocks of diameter {dmax} exceed packing fraction {} of the extent",
            cfg.packing_fraction
        )));
    }

    let budget = cfg.attempts_per_rock.saturating_mul(n);
    let mut attempts = 0usize;
    let mut rocks: Vec<RockSpec> = Vec::with_capacity(n);
    // Uniform bucket grid over the extent for neighbour queries.
    let bucket = dmax.max(1e-9);
    let bx = (cfg.width / bucket).ceil().max(1.0) as usize;
    let by = (cfg.height / bucket).ceil().max(1.0) as usize;
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); bx * by];
    let cell = |x: f64, y: f64| {
        let i = (((x - cfg.origin_x) / bucket) as usize).min(bx - 1);
        let j = (((y - cfg.origin_y) / bucket) as usize).min(by - 1);
        (i, j)
    };

    for i in 0..n {
        let mut stream = rng::keyed(cfg.seed, rng::domain::ROCKS, i as u64);
        loop {
            if attempts >= budget {
                return Err(Error::Placement {
                    attempts,
                    placed: rocks.len(),
                    requested: n,
                });
            }
            attempts += 1;
            let d = match cfg.rock_diameter_max {
                Some(hi) if hi > cfg.rock_diameter => stream.random_range(cfg.rock_diameter..hi),
                _ => cfg.rock_diameter,
            };
            let a = d / 2.0;
            let cx = cfg.origin_x + a + stream.random::<f64>() * (cfg.width - d);
            let cy = cfg.origin_y + a + stream.random::<f64>() * (cfg.height - d);
            let yaw = stream.random::<f64>() * PI;
            let (ci, cj) = cell(cx, cy);
            let clash = (ci.saturating_sub(1)..=(ci + 1).min(bx - 1)).any(|ii| {
                (cj.saturating_sub(1)..=(cj + 1).min(by - 1)).any(|jj| {
                    buckets[jj * bx + ii].iter().any(|&k| {
                        let r = &rocks[k];
                        (r.center_x - cx).hypot(r.center_y - cy) < r.a + a
                    })
                })
            });
            if clash {
                continue;
            }
            buckets[cj * bx + ci].push(rocks.len());
            rocks.push(RockSpec {
                center_x: cx,
                center_y: cy,
                a,
                b: a * cfg.aspect,
                height: a * cfg.height_ratio,
                yaw,
            });
            break;
        }
    }
    let grid = rasterize_rocks(geom, &rocks)?;
    Ok((grid, rocks))
}

/// Rasterizes rocks onto a zero plane; overlapping rocks combine by max.
pub fn rasterize_rocks(geom: GridGeometry, rocks: &[RockSpec]) -> Result<GeoGrid> {
    let mut grid = GeoGrid::filled(geom, 0.0)?;
    let cs = geom.cell_size;
    for rock in rocks {
        rock.validate()?;
        let (cu, cv) = geom.to_center_coords(rock.center_x, rock.center_y);
        let reach = rock.a / cs + 1.0;
        let u0 = (cu - reach).floor().max(0.0) as usize;
        let v0 = (cv - reach).floor().max(0.0) as usize;
        let u1 = ((cu + reach).ceil().max(0.0) as usize).min(geom.ncols - 1);
        let v1 = ((cv + reach).ceil().max(0.0) as usize).min(geom.nrows - 1);
        for v in v0..=v1 {
            for u in u0..=u1 {
                let (x, y) = geom.center(u, v);
                let z = rock.elevation(x, y);
                if z > 0.0 {
                    let i = geom.index(u, v);
                    if z > grid.values()[i] {
                        grid.set_index(i, z);
                    }
                }
            }
        }
    }
    Ok(grid)
}

pub fn rocks_to_csv(rocks: &[RockSpec]) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("cx,cy,a,b,h,yaw\n");
    for r in rocks {
        let _ = writeln!(s, "{:?},{:?},{:?},{:?},{:?},{:?}", r.center_x, r.center_y, r.a, r.b, r.height, r.yaw);
    }
    s
}

pub fn write_rocks_csv(rocks: &[RockSpec], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, rocks_to_csv(rocks)).map_err(|e| Error::io(path, e))
}

pub fn read_rocks_csv(path: impl AsRef<Path>) -> Result<Vec<RockSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("cx,cy,a,b,h,yaw") {
        return Err(Error::format(path, "expected header cx,cy,a,b,h,yaw"));
    }
    let mut rocks = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(path, format!("line {}: bad number", n + 2)))?;
        if f.len() != 6 {
            return Err(Error::format(path, format!("line {}: expected 6 fields", n + 2)));
        }
        let rock = RockSpec {
            center_x: f[0],
            center_y: f[1],
            a: f[2],
            b: f[3],
            height: f[4],
            yaw: f[5],
        };
        rock.validate().map_err(|e| Error::format(path, e.to_string()))?;
        rocks.push(rock);
    }
    Ok(rocks)
}
