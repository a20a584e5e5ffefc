// SPDX-License-Identifier: Apache-2.0

use super::{GeoGrid, GridGeometry};
use crate::error::{Error, Result};

/// Resamples `src` onto `target` by taking, for each target cell, the source
/// cell whose center is nearest (the one containing the target center).
/// Target cells outside the source extent are nodata.
pub fn nearest_resample(src: &GeoGrid, target: GridGeometry) -> Result<GeoGrid> {
    target.validate()?;
    let (sx0, sy0, sx1, sy1) = src.geometry().extent();
    let (tx0, ty0, tx1, ty1) = target.extent();
    if tx1 <= sx0 || tx0 >= sx1 || ty1 <= sy0 || ty0 >= sy1 {
        return Err(Error::GeometryMismatch("target does not overlap source".into()));
    }
    let sg = *src.geometry();
    let mut out = GeoGrid::empty(target)?.with_nodata_value(src.nodata_value())?;
    if sg == target {
        return Ok(src.clone());
    }
    // Column lookups are separable, so precompute them once.
    let cols: Vec<Option<usize>> = (0..target.ncols)
        .map(|u| {
            let (x, _) = target.center(u, 0);
            sg.cell_of(x, sg.origin_y).map(|(su, _)| su)
        })
        .collect();
    for v in 0..target.nrows {
        let (_, y) = target.center(0, v);
        let Some((_, sv)) = sg.cell_of(sg.origin_x, y) else {
            continue;
        };
        for (u, su) in cols.iter().enumerate() {
            if let Some(z) = su.and_then(|su| src.get(su, sv)) {
                out.set(u, v, z);
            }
        }
    }
    Ok(out)
}

/// Interpolates source cell centers bilinearly onto a grid `factor` times
/// finer with the same extent. Centers beyond the outermost source centers are
/// extrapolated from the nearest 2x2 block, so affine surfaces are reproduced
/// exactly everywhere. An output cell is nodata if any of its four source
/// nodes is.
pub fn bilinear_upsample(src: &GeoGrid, factor: usize) -> Result<GeoGrid> {
    if factor == 0 {
        return Err(Error::InvalidArgument("upsample factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(src.clone());
    }
    let sg = *src.geometry();
    let target = GridGeometry::new(
        sg.origin_x,
        sg.origin_y,
        sg.cell_size / factor as f64,
        sg.ncols * factor,
        sg.nrows * factor,
    )?;
    let mut out = GeoGrid::empty(target)?.with_nodata_value(src.nodata_value())?;
    let axis = |n_src: usize, k: usize| -> (usize, usize, f64) {
        // Source center coordinate of fine cell k: (k + 0.5) / factor - 0.5.
        let s = (k as f64 + 0.5) / factor as f64 - 0.5;
        if n_src == 1 {
            return (0, 0, 0.0);
        }
        let i0 = (s.floor().max(0.0) as usize).min(n_src - 2);
        (i0, i0 + 1, s - i0 as f64)
    };
    let xs: Vec<_> = (0..target.ncols).map(|k| axis(sg.ncols, k)).collect();
    for v in 0..target.nrows {
        let (j0, j1, q) = axis(sg.nrows, v);
        for (u, &(i0, i1, p)) in xs.iter().enumerate() {
            let (Some(z00), Some(z10), Some(z01), Some(z11)) =
                (src.get(i0, j0), src.get(i1, j0), src.get(i0, j1), src.get(i1, j1))
            else {
                continue;
            };
            let bottom = z00 + p * (z10 - z00);
            let top = z01 + p * (z11 - z01);
            out.set(u, v, bottom + q * (top - bottom));
        }
    }
    Ok(out)
}
