// SPDX-License-Identifier: Apache-2.0

//! Conventional DEM construction: bilinear-weight accumulation of point
//! samples onto grid nodes, synchronous hole filling and the
//! resolution-from-spacing rule.

use crate::error::{Error, Result};
use crate::grid::{GeoGrid, GridGeometry, PointCloud};

/// Weighted elevation sums `E` and weight sums `W` per node (cell center).
#[derive(Debug, Clone)]
pub struct Accumulators {
    pub geometry: GridGeometry,
    pub e: Vec<f64>,
    pub w: Vec<f64>,
}

impl Accumulators {
    /// `E / W` where `W > 0`, nodata elsewhere.
    pub fn to_grid(&self) -> Result<GeoGrid> {
        GeoGrid::from_options(
            self.geometry,
            self.e.iter().zip(&self.w).map(|(&e, &w)| (w > 0.0).then(|| e / w)),
        )
    }
}

/// Bilinear weights `(1-p)(1-q), p(1-q), (1-p)q, pq` of a sample against
/// the four enclosing nodes, as `(du, dv, weight)`.
#[inline]
pub fn bilinear_weights(p: f64, q: f64) -> [(usize, usize, f64); 4] {
    [
        (0, 0, (1.0 - p) * (1.0 - q)),
        (1, 0, p * (1.0 - q)),
        (0, 1, (1.0 - p) * q),
        (1, 1, p * q),
    ]
}

/// Spreads every sample onto its four enclosing nodes. Nodes outside the
/// grid are dropped.
pub fn accumulate_bilinear(cloud: &PointCloud, geom: GridGeometry) -> Result<Accumulators> {
    geom.validate()?;
    let mut e = vec![0.0; geom.len()];
    let mut w = vec![0.0; geom.len()];
    let (nc, nr) = (geom.ncols as i64, geom.nrows as i64);
    for pt in cloud.points() {
        let (u, v) = geom.to_center_coords(pt[0], pt[1]);
        let (fu, fv) = (u.floor(), v.floor());
        if fu < -1.0 || fv < -1.0 || fu >= nc as f64 || fv >= nr as f64 {
            continue;
        }
        let (iu, iv) = (fu as i64, fv as i64);
        for (du, dv, wt) in bilinear_weights(u - fu, v - fv) {
            let (nu, nv) = (iu + du as i64, iv + dv as i64);
            if nu < 0 || nv < 0 || nu >= nc || nv >= nr {
                continue;
            }
            let i = (nv * nc + nu) as usize;
            e[i] += wt * pt[2];
            w[i] += wt;
        }
    }
    Ok(Accumulators { geometry: geom, e, w })
}

/// Bilinear-accumulation DEM: `D = E / W` where any weight landed.
pub fn build_dem_bilinear(cloud: &PointCloud, geom: GridGeometry) -> Result<GeoGrid> {
    accumulate_bilinear(cloud, geom)?.to_grid()
}

/// Fills nodata cells with the mean of their valid 8-neighbours, repeating
/// until no hole remains. Cells filled in one sweep only count as valid from
/// the next sweep on.
pub fn fill_holes(dem: &GeoGrid) -> Result<GeoGrid> {
    if dem.valid_count() == 0 {
        return Err(Error::InvalidGrid("cannot fill a grid with no valid cells".into()));
    }
    let (nc, nr) = (dem.ncols(), dem.nrows());
    let mut cur = dem.clone();
    let mut holes: Vec<usize> = (0..cur.values().len()).filter(|&i| !cur.mask()[i]).collect();
    while !holes.is_empty() {
        let mut fills = Vec::with_capacity(holes.len());
        let mut remaining = Vec::new();
        for &i in &holes {
            let (u, v) = ((i % nc) as i64, (i / nc) as i64);
            let (mut sum, mut count) = (0.0, 0u32);
            for dv in -1..=1 {
                for du in -1..=1 {
                    let (nu, nv) = (u + du, v + dv);
                    if (du, dv) == (0, 0) || nu < 0 || nv < 0 || nu >= nc as i64 || nv >= nr as i64 {
                        continue;
                    }
                    if let Some(z) = cur.get(nu as usize, nv as usize) {
                        sum += z;
                        count += 1;
                    }
                }
            }
            if count > 0 {
                fills.push((i, sum / count as f64));
            } else {
                remaining.push(i);
            }
        }
        for (i, z) in fills {
            cur.set_index(i, z);
        }
        holes = remaining;
    }
    Ok(cur)
}

/// Mean distance from each sample to its nearest distinct neighbour in the
/// horizontal plane.
pub fn baseline_resolution(cloud: &PointCloud) -> Result<f64> {
    if cloud.len() < 2 {
        return Err(Error::Degenerate("need at least two points".into()));
    }
    let (x0, y0, x1, y1) = cloud.bounds().expect("non-empty");
    let span = (x1 - x0).max(y1 - y0);
    if !(span > 0.0) {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let n = cloud.len();
    // About one point per bucket on average.
    let side = ((x1 - x0).max(span * 1e-6) * (y1 - y0).max(span * 1e-6) / n as f64).sqrt();
    let nbx = (((x1 - x0) / side) as usize + 1).min(1 << 16);
    let nby = (((y1 - y0) / side) as usize + 1).min(1 << 16);
    let side_x = (x1 - x0) / nbx as f64;
    let side_y = (y1 - y0) / nby as f64;
    let bucket_of = |x: f64, y: f64| {
        let bx = if side_x > 0.0 { (((x - x0) / side_x) as usize).min(nbx - 1) } else { 0 };
        let by = if side_y > 0.0 { (((y - y0) / side_y) as usize).min(nby - 1) } else { 0 };
        (bx, by)
    };
    let mut start = vec![0usize; nbx * nby + 1];
    let pts = cloud.points();
    for p in pts {
        let (bx, by) = bucket_of(p[0], p[1]);
        start[by * nbx + bx + 1] += 1;
    }
    for k in 1..start.len() {
        start[k] += start[k - 1];
    }
    let mut fill = start.clone();
    let mut order = vec![0usize; n];
    for (i, p) in pts.iter().enumerate() {
        let (bx, by) = bucket_of(p[0], p[1]);
        let b = by * nbx + bx;
        order[fill[b]] = i;
        fill[b] += 1;
    }
    let min_side = [side_x, side_y].into_iter().filter(|s| *s > 0.0).fold(f64::INFINITY, f64::min);

    let mut total = 0.0;
    let mut counted = 0usize;
    for p in pts {
        let (bx, by) = bucket_of(p[0], p[1]);
        let mut best = f64::INFINITY;
        let mut ring = 0usize;
        loop {
            let lo_x = bx.saturating_sub(ring);
            let hi_x = (bx + ring).min(nbx - 1);
            let lo_y = by.saturating_sub(ring);
            let hi_y = (by + ring).min(nby - 1);
            for cy in lo_y..=hi_y {
                for cx in lo_x..=hi_x {
                    let on_ring = cx + ring == bx || cx == bx + ring || cy + ring == by || cy == by + ring;
                    if !on_ring {
                        continue;
                    }
                    let b = cy * nbx + cx;
                    for &j in &order[start[b]..start[b + 1]] {
                        let d = (pts[j][0] - p[0]).hypot(pts[j][1] - p[1]);
                        if d > 0.0 && d < best {
                            best = d;
                        }
                    }
                }
            }
            let covered = lo_x == 0 && lo_y == 0 && hi_x == nbx - 1 && hi_y == nby - 1;
            // Everything outside the searched rings is at least `ring * side` away.
            if covered || best <= ring as f64 * min_side {
                break;
            }
            ring += 1;
        }
        if best.is_finite() {
            total += best;
            counted += 1;
        }
    }
    Ok(total / counted as f64)
}
