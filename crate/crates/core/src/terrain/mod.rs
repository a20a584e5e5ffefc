// SPDX-License-Identifier: Apache-2.0

//! Ground-truth terrains: rock fields on a flat plane, fractal base terrains
//! and their complexity-scaled superposition `rock + c * base`.

mod fractal;
mod rocks;

pub use fractal::gen_fractal_base;
pub use rocks::{gen_rock_field, rasterize_rocks, read_rocks_csv, rocks_to_csv, write_rocks_csv, RockSpec, TerrainConfig};

use crate::error::{Error, Result};
use crate::grid::GeoGrid;

/// Cellwise `rock + c * base`.
pub fn superpose_complexity(rock: &GeoGrid, base: &GeoGrid, c: f64) -> Result<GeoGrid> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("complexity factor must be >= 0, got {c}")));
    }
    rock.zip_with(base, |r, b| r + c * b)
}
