// SPDX-License-Identifier: Apache-2.0

//! Exhaustive orientation sweep on a noise-free DEM.

use super::stencil::{body_mask, delta, l_mask, per_pixel, u_mask, Stencil};
use super::{geometry, leg_offsets, orientation_lattice, support_triples_into, LanderGeom, SafetyMap};
use crate::error::{Error, Result};
use crate::grid::GeoGrid;

/// Body footprint cells as relative coordinates plus index deltas.
pub(crate) struct Body {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub deltas: Vec<isize>,
    pub radius: f64,
}

impl Body {
    pub(crate) fn new(dem: &GeoGrid, geom: &LanderGeom) -> Self {
        let cs = dem.cell_size();
        let offs = body_mask(geom, cs);
        let xs: Vec<f64> = offs.iter().map(|o| o.0 as f64 * cs).collect();
        let ys: Vec<f64> = offs.iter().map(|o| o.1 as f64 * cs).collect();
        let radius = xs.iter().zip(&ys).map(|(x, y)| x.hypot(*y)).fold(0.0, f64::max);
        Body {
            deltas: offs.iter().map(|&(du, dv)| delta(dem.geometry(), du, dv)).collect(),
            xs,
            ys,
            radius,
        }
    }
}

/// Worst slope and roughness over every sampled heading.
///
/// For each heading the legs are placed on the leg circle. A leg's elevation
/// is the highest cell whose center lies within the pad radius of the leg
/// (the nearest annulus cell when no center is that close). The landing
/// plane through the legs gives the slope, and the roughness is the largest
/// signed distance from the body footprint cells to that plane. With more
/// than three legs every supporting facet is checked. A pixel is safe when
/// both worst cases are below the thresholds.
///
/// Output metrics are exact maxima over the lattice; the roughness scan
/// visits footprint cells from the highest down and stops once no remaining
/// cell can exceed the running maximum.
pub fn hd_exact_oracle(dem: &GeoGrid, geom: &LanderGeom, dtheta: f64) -> Result<SafetyMap> {
    geom.validate()?;
    let cs = dem.cell_size();
    let thetas = orientation_lattice(geom, dtheta)?;
    let annulus = l_mask(geom, cs);
    if annulus.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "leg annulus contains no cell centers at cell size {cs}"
        )));
    }
    let stencil = Stencil::new(dem, &u_mask(geom, cs))?;
    let n = geom.n_legs;
    let legs: Vec<Vec<[f64; 2]>> = thetas.iter().map(|&t| leg_offsets(geom, t)).collect();
    let leg_cells: Vec<Vec<isize>> = legs
        .iter()
        .flatten()
        .map(|&p| pad_cells(&annulus, cs, p, geom.pad_radius).into_iter().map(|(du, dv)| delta(dem.geometry(), du, dv)).collect())
        .collect();
    let body = Body::new(dem, geom);
    let vals = dem.values();
    let ncols = dem.ncols();
    let (s_max, r_max) = (geom.slope_threshold, geom.roughness_threshold);

    let [slope_safe, rough_safe, slope, rough] = per_pixel(dem, &stencil, |u, v| {
        let i = (v * ncols + u) as isize;
        let zs: Vec<f64> = body.deltas.iter().map(|&d| vals[(i + d) as usize]).collect();
        let mut order: Vec<usize> = (0..zs.len()).collect();
        order.sort_unstable_by(|&a, &b| zs[b].total_cmp(&zs[a]));
        let mut worst_s = 0.0f64;
        let mut worst_r = f64::NEG_INFINITY;
        let mut pts = vec![[0.0; 3]; n];
        let mut triples = Vec::with_capacity(4);
        for (k, pos) in legs.iter().enumerate() {
            for (j, p) in pos.iter().enumerate() {
                let z = leg_cells[k * n + j]
                    .iter()
                    .map(|&d| vals[(i + d) as usize])
                    .fold(f64::NEG_INFINITY, f64::max);
                pts[j] = [p[0], p[1], z];
            }
            support_triples_into(&pts, &mut triples);
            for t in &triples {
                let [a, b, c] = geometry::cross(pts[t[0]], pts[t[1]], pts[t[2]]);
                worst_s = worst_s.max(geometry::slope_deg_unchecked([a, b, c]));
                let d = -(a * pts[t[0]][0] + b * pts[t[0]][1] + c * pts[t[0]][2]);
                let norm = (a * a + b * b + c * c).sqrt();
                let lever = a.hypot(b) * body.radius;
                for &j in &order {
                    let z = zs[j];
                    let top = c * z + lever + d;
                    let slack = 1e-12 * ((c * z).abs() + lever + d.abs());
                    if (top + slack) / norm <= worst_r {
                        break;
                    }
                    let r = (a * body.xs[j] + b * body.ys[j] + c * z + d) / norm;
                    if r > worst_r {
                        worst_r = r;
                    }
                }
            }
        }
        [
            (worst_s < s_max) as u8 as f64,
            (worst_r < r_max) as u8 as f64,
            worst_s,
            worst_r,
        ]
    })?;
    Ok(SafetyMap {
        slope_safe,
        rough_safe,
        slope,
        roughness: rough,
    })
}

/// Annulus cells within `pad` of the leg at `p`, else the nearest one.
fn pad_cells(annulus: &[(isize, isize)], cs: f64, p: [f64; 2], pad: f64) -> Vec<(isize, isize)> {
    let dist = |c: &(isize, isize)| (c.0 as f64 * cs - p[0]).hypot(c.1 as f64 * cs - p[1]);
    let near: Vec<_> = annulus.iter().copied().filter(|c| dist(c) <= pad).collect();
    if !near.is_empty() {
        return near;
    }
    let best = annulus
        .iter()
        .copied()
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
        .expect("non-empty annulus");
    vec![best]
}
