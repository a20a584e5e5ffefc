// SPDX-License-Identifier: Apache-2.0

//! Raster and point-cloud data model shared by every stage.
//!
//! Grids are row-major with row `v = 0` at the southern edge: cell `(u, v)`
//! has its center at `(origin_x + (u + 0.5) * cell_size, origin_y + (v + 0.5) * cell_size)`.
//! Files store rows north-first (see [`io`]), memory never does.

pub mod cloud;
pub mod io;
pub mod resample;

pub use cloud::PointCloud;
pub use io::{grid_read, grid_write, GridFormat};
pub use resample::{bilinear_upsample, nearest_resample};

use crate::error::{Error, Result};

/// Default sentinel written for invalid cells.
pub const DEFAULT_NODATA: f64 = -9999.0;

/// Georeferenced raster layout without any payload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub ncols: usize,
    pub nrows: usize,
}

impl GridGeometry {
    pub fn new(origin_x: f64, origin_y: f64, cell_size: f64, ncols: usize, nrows: usize) -> Result<Self> {
        let g = GridGeometry {
            origin_x,
            origin_y,
            cell_size,
            ncols,
            nrows,
        };
        g.validate()?;
        Ok(g)
    }

    /// Smallest grid of `cell_size` cells anchored at `(x0, y0)` covering a
    /// `width` x `height` rectangle.
    pub fn covering(x0: f64, y0: f64, width: f64, height: f64, cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0) || !(width > 0.0) || !(height > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "cannot cover {width} x {height} with cell size {cell_size}"
            )));
        }
        // Tolerate representation error so 36 / 0.1 gives 360 cells, not 361.
        let count = |len: f64| ((len / cell_size) - 1e-9).ceil().max(1.0) as usize;
        GridGeometry::new(x0, y0, cell_size, count(width), count(height))
    }

    pub fn validate(&self) -> Result<()> {
        if self.ncols == 0 || self.nrows == 0 {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be positive, got {} x {}",
                self.ncols, self.nrows
            )));
        }
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(Error::InvalidGrid(format!("cell size must be positive, got {}", self.cell_size)));
        }
        if !self.origin_x.is_finite() || !self.origin_y.is_finite() {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        debug_assert!(u < self.ncols && v < self.nrows);
        v * self.ncols + u
    }

    /// World coordinates of the center of cell `(u, v)`.
    #[inline]
    pub fn center(&self, u: usize, v: usize) -> (f64, f64) {
        (
            self.origin_x + (u as f64 + 0.5) * self.cell_size,
            self.origin_y + (v as f64 + 0.5) * self.cell_size,
        )
    }

    /// Continuous cell coordinates in which integers land on cell centers.
    #[inline]
    pub fn to_center_coords(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.origin_x) / self.cell_size - 0.5,
            (y - self.origin_y) / self.cell_size - 0.5,
        )
    }

    /// Cell containing `(x, y)`, if inside the grid extent.
    #[inline]
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fu = ((x - self.origin_x) / self.cell_size).floor();
        let fv = ((y - self.origin_y) / self.cell_size).floor();
        if fu < 0.0 || fv < 0.0 || fu >= self.ncols as f64 || fv >= self.nrows as f64 {
            return None;
        }
        Some((fu as usize, fv as usize))
    }

    pub fn width(&self) -> f64 {
        self.ncols as f64 * self.cell_size
    }

    pub fn height(&self) -> f64 {
        self.nrows as f64 * self.cell_size
    }

    /// `(xmin, ymin, xmax, ymax)` of the grid extent.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.width(),
            self.origin_y + self.height(),
        )
    }

    pub fn same_as(&self, other: &GridGeometry) -> bool {
        self == other
    }

    pub(crate) fn require_same(&self, other: &GridGeometry, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!("{what}: {self:?} vs {other:?}")))
        }
    }
}

/// A uniform elevation raster with a per-cell validity mask.
#[derive(Debug, Clone)]
pub struct GeoGrid {
    geom: GridGeometry,
    values: Vec<f64>,
    valid: Vec<bool>,
    nodata: f64,
}

impl GeoGrid {
    /// Grid with every cell set to `value`.
    pub fn filled(geom: GridGeometry, value: f64) -> Result<Self> {
        geom.validate()?;
        if !value.is_finite() {
            return Err(Error::InvalidGrid("fill value must be finite".into()));
        }
        Ok(GeoGrid {
            values: vec![value; geom.len()],
            valid: vec![true; geom.len()],
            geom,
            nodata: DEFAULT_NODATA,
        })
    }

    /// Grid with every cell invalid.
    pub fn empty(geom: GridGeometry) -> Result<Self> {
        geom.validate()?;
        Ok(GeoGrid {
            values: vec![DEFAULT_NODATA; geom.len()],
            valid: vec![false; geom.len()],
            geom,
            nodata: DEFAULT_NODATA,
        })
    }

    /// Builds a fully valid grid from row-major values (row 0 = south).
    pub fn from_values(geom: GridGeometry, values: Vec<f64>) -> Result<Self> {
        geom.validate()?;
        if values.len() != geom.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                geom.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|z| !z.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at index {i}")));
        }
        let n = values.len();
        Ok(GeoGrid {
            geom,
            values,
            valid: vec![true; n],
            nodata: DEFAULT_NODATA,
        })
    }

    /// Builds a grid from optional values; `None` (or non-finite) marks nodata.
    pub fn from_options(geom: GridGeometry, values: impl IntoIterator<Item = Option<f64>>) -> Result<Self> {
        let mut grid = GeoGrid::empty(geom)?;
        let mut count = 0;
        for (i, z) in values.into_iter().enumerate() {
            if i >= grid.values.len() {
                return Err(Error::InvalidGrid("too many values".into()));
            }
            if let Some(z) = z.filter(|z| z.is_finite()) {
                grid.values[i] = z;
                grid.valid[i] = true;
            }
            count += 1;
        }
        if count != grid.values.len() {
            return Err(Error::InvalidGrid(format!("expected {} values, got {count}", grid.values.len())));
        }
        Ok(grid)
    }

    /// Evaluates `f(x, y)` at every cell center.
    pub fn from_fn(geom: GridGeometry, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(geom.len());
        for v in 0..geom.nrows {
            for u in 0..geom.ncols {
                let (x, y) = geom.center(u, v);
                values.push(f(x, y));
            }
        }
        GeoGrid::from_values(geom, values)
    }

    #[inline]
    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.geom.ncols
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.geom.nrows
    }

    #[inline]
    pub fn cell_size(&self) -> f64 {
        self.geom.cell_size
    }

    pub fn nodata_value(&self) -> f64 {
        self.nodata
    }

    pub fn with_nodata_value(mut self, nodata: f64) -> Result<Self> {
        if !nodata.is_finite() {
            return Err(Error::InvalidGrid("nodata sentinel must be finite".into()));
        }
        self.nodata = nodata;
        for (z, ok) in self.values.iter_mut().zip(&self.valid) {
            if !ok {
                *z = nodata;
            }
        }
        Ok(self)
    }

    /// Raw row-major payload; invalid cells hold the nodata sentinel.
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let i = self.geom.index(u, v);
        self.valid[i].then(|| self.values[i])
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> Option<f64> {
        self.valid[i].then(|| self.values[i])
    }

    #[inline]
    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.valid[self.geom.index(u, v)]
    }

    /// Sets a cell; non-finite values mark it invalid.
    #[inline]
    pub fn set(&mut self, u: usize, v: usize, z: f64) {
        let i = self.geom.index(u, v);
        self.set_index(i, z);
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, z: f64) {
        if z.is_finite() {
            self.values[i] = z;
            self.valid[i] = true;
        } else {
            self.values[i] = self.nodata;
            self.valid[i] = false;
        }
    }

    #[inline]
    pub fn set_nodata(&mut self, u: usize, v: usize) {
        let i = self.geom.index(u, v);
        self.values[i] = self.nodata;
        self.valid[i] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&b| b).count()
    }

    pub fn is_fully_valid(&self) -> bool {
        self.valid.iter().all(|&b| b)
    }

    /// Applies `f` to every valid cell.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> GeoGrid {
        let mut out = self.clone();
        for i in 0..out.values.len() {
            if out.valid[i] {
                let z = f(out.values[i]);
                out.set_index(i, z);
            }
        }
        out
    }

    /// Cellwise combination over cells valid in both grids.
    pub fn zip_with(&self, other: &GeoGrid, mut f: impl FnMut(f64, f64) -> f64) -> Result<GeoGrid> {
        self.geom.require_same(&other.geom, "zip_with")?;
        let mut out = GeoGrid::empty(self.geom)?;
        out.nodata = self.nodata;
        for i in 0..self.values.len() {
            if self.valid[i] && other.valid[i] {
                out.set_index(i, f(self.values[i], other.values[i]));
            } else {
                out.values[i] = out.nodata;
            }
        }
        Ok(out)
    }

    /// `(min, max)` over valid cells.
    pub fn min_max(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .fold(None, |acc, (&z, _)| match acc {
                None => Some((z, z)),
                Some((lo, hi)) => Some((lo.min(z), hi.max(z))),
            })
    }

    /// Sub-grid of `ncols x nrows` cells starting at cell `(u0, v0)`.
    pub fn window(&self, u0: usize, v0: usize, ncols: usize, nrows: usize) -> Result<GeoGrid> {
        if u0 + ncols > self.geom.ncols || v0 + nrows > self.geom.nrows {
            return Err(Error::InvalidArgument(format!(
                "window {u0}+{ncols} x {v0}+{nrows} exceeds {} x {}",
                self.geom.ncols, self.geom.nrows
            )));
        }
        let geom = GridGeometry::new(
            self.geom.origin_x + u0 as f64 * self.geom.cell_size,
            self.geom.origin_y + v0 as f64 * self.geom.cell_size,
            self.geom.cell_size,
            ncols,
            nrows,
        )?;
        let mut out = GeoGrid::empty(geom)?.with_nodata_value(self.nodata)?;
        for v in 0..nrows {
            for u in 0..ncols {
                let i = self.geom.index(u0 + u, v0 + v);
                if self.valid[i] {
                    out.set(u, v, self.values[i]);
                }
            }
        }
        Ok(out)
    }

    /// Sub-grid covering the world rectangle; snaps to this grid's cells.
    pub fn crop(&self, x0: f64, y0: f64, width: f64, height: f64) -> Result<GeoGrid> {
        let cs = self.geom.cell_size;
        let u0 = ((x0 - self.geom.origin_x) / cs + 1e-9).floor().max(0.0) as usize;
        let v0 = ((y0 - self.geom.origin_y) / cs + 1e-9).floor().max(0.0) as usize;
        let nc = ((width / cs) - 1e-9).ceil().max(1.0) as usize;
        let nr = ((height / cs) - 1e-9).ceil().max(1.0) as usize;
        self.window(u0, v0, nc.min(self.geom.ncols - u0.min(self.geom.ncols)), nr.min(self.geom.nrows - v0.min(self.geom.nrows)))
    }
}

impl PartialEq for GeoGrid {
    /// Equal geometry, sentinel and mask, and bit-identical valid values.
    fn eq(&self, other: &Self) -> bool {
        self.geom == other.geom
            && self.nodata.to_bits() == other.nodata.to_bits()
            && self.valid == other.valid
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.valid)
                .all(|((a, b), &ok)| !ok || a.to_bits() == b.to_bits())
    }
}

/// Paired mean / variance rasters (the Gaussian DEM).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianGrid {
    pub mean: GeoGrid,
    pub variance: GeoGrid,
}

impl GaussianGrid {
    pub fn new(mean: GeoGrid, variance: GeoGrid) -> Result<Self> {
        mean.geometry().require_same(variance.geometry(), "gaussian grid")?;
        if mean.mask() != variance.mask() {
            return Err(Error::InvalidGrid("mean and variance masks differ".into()));
        }
        if let Some((lo, _)) = variance.min_max() {
            if lo < 0.0 {
                return Err(Error::InvalidGrid(format!("negative variance {lo}")));
            }
        }
        Ok(GaussianGrid { mean, variance })
    }

    /// Zero-variance Gaussian grid wrapping a deterministic DEM.
    pub fn deterministic(mean: GeoGrid) -> Self {
        let variance = mean.map(|_| 0.0);
        GaussianGrid { mean, variance }
    }

    pub fn geometry(&self) -> &GridGeometry {
        self.mean.geometry()
    }

    pub fn std_dev(&self) -> GeoGrid {
        self.variance.map(f64::sqrt)
    }
}
