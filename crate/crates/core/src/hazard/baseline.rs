// SPDX-License-Identifier: Apache-2.0

//! Footpad-map detector with per-cell roughness probabilities.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;

use super::oracle::Body;
use super::stencil::{delta, per_pixel, u_mask, Stencil};
use super::{geometry, leg_offsets, orientation_lattice, prob_below, support_triples_into, LanderGeom, StochasticSafetyMap};
use crate::error::{Error, Result};
use crate::grid::GeoGrid;

/// Maximum of `dem` over the disk of `pad_radius` around each cell.
///
/// Only valid cells contribute; cells near the border use whatever part of
/// the disk lies inside the grid. Nodata cells stay nodata.
pub fn footpad_map(dem: &GeoGrid, pad_radius: f64) -> Result<GeoGrid> {
    if !(pad_radius >= 0.0 && pad_radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("pad radius must be >= 0, got {pad_radius}")));
    }
    let g = *dem.geometry();
    let cs = g.cell_size;
    let n = (pad_radius / cs).floor() as isize;
    let offs: Vec<(isize, isize)> = (-n..=n)
        .flat_map(|dv| (-n..=n).map(move |du| (du, dv)))
        .filter(|&(du, dv)| (du as f64 * cs).hypot(dv as f64 * cs) <= pad_radius)
        .collect();
    let rows: Vec<Vec<Option<f64>>> = (0..g.nrows)
        .into_par_iter()
        .map(|v| {
            (0..g.ncols)
                .map(|u| {
                    dem.get(u, v)?;
                    let mut m = f64::NEG_INFINITY;
                    for &(du, dv) in &offs {
                        let (uu, vv) = (u as isize + du, v as isize + dv);
                        if uu < 0 || vv < 0 || uu >= g.ncols as isize || vv >= g.nrows as isize {
                            continue;
                        }
                        if let Some(z) = dem.get(uu as usize, vv as usize) {
                            m = m.max(z);
                        }
                    }
                    Some(m)
                })
                .collect()
        })
        .collect();
    GeoGrid::from_options(g, rows.into_iter().flatten())?.with_nodata_value(dem.nodata_value())
}

/// Footpad-map detector.
///
/// Leg elevations are read from the footpad map at the cell nearest each
/// leg. Slope is deterministic: `p_slope` is 1 when every heading is below
/// the threshold. For each heading and body cell the roughness `r` gives a
/// probability `Phi((r_max - r) / (sqrt(2) sigma_pixel))`; `p_rough` is the
/// minimum over headings and cells. No cell is skipped, so the cost grows
/// with pixels times headings times footprint cells.
pub fn hd_baseline_stochastic(
    dem: &GeoGrid,
    sigma_pixel: f64,
    geom: &LanderGeom,
    dtheta: f64,
) -> Result<StochasticSafetyMap> {
    geom.validate()?;
    if !(sigma_pixel >= 0.0 && sigma_pixel.is_finite()) {
        return Err(Error::InvalidArgument(format!("pixel sigma must be >= 0, got {sigma_pixel}")));
    }
    let cs = dem.cell_size();
    let thetas = orientation_lattice(geom, dtheta)?;
    let pads = footpad_map(dem, geom.pad_radius)?;
    let n = geom.n_legs;
    let legs: Vec<Vec<[f64; 2]>> = thetas.iter().map(|&t| leg_offsets(geom, t)).collect();
    let nearest: Vec<(isize, isize)> = legs
        .iter()
        .flatten()
        .map(|p| ((p[0] / cs).round() as isize, (p[1] / cs).round() as isize))
        .collect();
    let mut support = u_mask(geom, cs);
    support.extend_from_slice(&nearest);
    let stencil = Stencil::new(dem, &support)?;
    let leg_delta: Vec<isize> = nearest.iter().map(|&(du, dv)| delta(dem.geometry(), du, dv)).collect();
    let body = Body::new(dem, geom);
    let (vals, fp) = (dem.values(), pads.values());
    let ncols = dem.ncols();
    let noise = SQRT_2 * sigma_pixel;
    let r_max = geom.roughness_threshold;
    // Slope is compared through tan^2 to keep trigonometry out of the heading loop.
    let tan2_max = geom.slope_threshold.to_radians().tan().powi(2);

    let [p_slope, p_rough] = per_pixel(dem, &stencil, |u, v| {
        let i = (v * ncols + u) as isize;
        let zs: Vec<f64> = body.deltas.iter().map(|&d| vals[(i + d) as usize]).collect();
        let mut steep = false;
        let mut worst_r = f64::NEG_INFINITY;
        let mut pts = vec![[0.0; 3]; n];
        let mut triples = Vec::with_capacity(4);
        for (k, pos) in legs.iter().enumerate() {
            for (j, p) in pos.iter().enumerate() {
                pts[j] = [p[0], p[1], fp[(i + leg_delta[k * n + j]) as usize]];
            }
            support_triples_into(&pts, &mut triples);
            for t in &triples {
                let [a, b, c] = geometry::cross(pts[t[0]], pts[t[1]], pts[t[2]]);
                // Support planes face up, so c > 0.
                steep |= a * a + b * b >= tan2_max * c * c;
                let d = -(a * pts[t[0]][0] + b * pts[t[0]][1] + c * pts[t[0]][2]);
                let norm = (a * a + b * b + c * c).sqrt();
                let r = (max_linear(a, b, c, &body.xs, &body.ys, &zs) + d) / norm;
                worst_r = worst_r.max(r);
            }
        }
        [
            (!steep) as u8 as f64,
            prob_below(r_max, worst_r, noise),
        ]
    })?;
    Ok(StochasticSafetyMap {
        p_slope,
        p_rough,
        moments: None,
    })
}

/// `max_k (a x_k + b y_k + c z_k)`.
#[inline]
fn max_linear(a: f64, b: f64, c: f64, xs: &[f64], ys: &[f64], zs: &[f64]) -> f64 {
    let mut acc = [f64::NEG_INFINITY; 4];
    let (xc, yc, zc) = (xs.chunks_exact(4), ys.chunks_exact(4), zs.chunks_exact(4));
    let (xr, yr, zr) = (xc.remainder(), yc.remainder(), zc.remainder());
    for ((x, y), z) in xc.zip(yc).zip(zc) {
        for l in 0..4 {
            let w = a * x[l] + b * y[l] + c * z[l];
            acc[l] = if w > acc[l] { w } else { acc[l] };
        }
    }
    let mut m = acc[0].max(acc[1]).max(acc[2].max(acc[3]));
    for ((x, y), z) in xr.iter().zip(yr).zip(zr) {
        m = m.max(a * x + b * y + c * z);
    }
    m
}
