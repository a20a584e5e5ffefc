// SPDX-License-Identifier: Apache-2.0

//! Cell-offset masks and the shared per-pixel driver.

use rayon::prelude::*;

use super::LanderGeom;
use crate::error::{Error, Result};
use crate::grid::{GeoGrid, GridGeometry};

fn disk_offsets(cell_size: f64, keep: impl Fn(f64) -> bool, radius: f64) -> Vec<(isize, isize)> {
    let n = (radius / cell_size).floor() as isize + 1;
    let mut out = Vec::new();
    for dv in -n..=n {
        for du in -n..=n {
            let d = (du as f64 * cell_size).hypot(dv as f64 * cell_size);
            if keep(d) {
                out.push((du, dv));
            }
        }
    }
    out
}

/// Cell offsets whose centers lie in the all-orientation leg annulus
/// `[R - pad, R + pad]`.
pub fn l_mask(geom: &LanderGeom, cell_size: f64) -> Vec<(isize, isize)> {
    let (lo, hi) = (geom.leg_circle_radius - geom.pad_radius, geom.reach());
    disk_offsets(cell_size, |d| d >= lo && d <= hi, hi)
}

/// Cell offsets whose centers lie in the disk of radius `R + pad`.
pub fn u_mask(geom: &LanderGeom, cell_size: f64) -> Vec<(isize, isize)> {
    let hi = geom.reach();
    disk_offsets(cell_size, |d| d <= hi, hi)
}

/// Cell offsets whose centers lie in the body footprint disk.
pub fn body_mask(geom: &LanderGeom, cell_size: f64) -> Vec<(isize, isize)> {
    let r = geom.body_radius;
    disk_offsets(cell_size, |d| d <= r, r)
}

/// Inner part of [`u_mask`] not covered by [`l_mask`].
pub(crate) fn inner_mask(geom: &LanderGeom, cell_size: f64) -> Vec<(isize, isize)> {
    let lo = geom.leg_circle_radius - geom.pad_radius;
    disk_offsets(cell_size, |d| d < lo, lo)
}

/// Offsets of a stencil projected onto a raster's linear index.
pub(crate) struct Stencil {
    reach: usize,
    support: Vec<isize>,
    ncols: usize,
    nrows: usize,
    check_mask: bool,
}

impl Stencil {
    /// Stencil over `offsets`, validated against `dem`.
    pub(crate) fn new(dem: &GeoGrid, offsets: &[(isize, isize)]) -> Result<Self> {
        let g = dem.geometry();
        let reach = offsets
            .iter()
            .map(|&(du, dv)| du.unsigned_abs().max(dv.unsigned_abs()))
            .max()
            .unwrap_or(0);
        if 2 * reach + 1 > g.ncols || 2 * reach + 1 > g.nrows {
            return Err(Error::InvalidArgument(format!(
                "lander footprint ({} cells each side) does not fit a {} x {} grid",
                reach, g.ncols, g.nrows
            )));
        }
        Ok(Stencil {
            reach,
            support: offsets.iter().map(|&(du, dv)| delta(g, du, dv)).collect(),
            ncols: g.ncols,
            nrows: g.nrows,
            check_mask: !dem.is_fully_valid(),
        })
    }

    /// True when the pixel's whole stencil is inside the grid and valid.
    #[inline]
    pub(crate) fn evaluable(&self, dem: &GeoGrid, u: usize, v: usize) -> bool {
        let r = self.reach;
        if u < r || v < r || u + r >= self.ncols || v + r >= self.nrows {
            return false;
        }
        if !self.check_mask {
            return true;
        }
        let i = (v * self.ncols + u) as isize;
        let mask = dem.mask();
        self.support.iter().all(|&d| mask[(i + d) as usize])
    }
}

/// A mask as horizontal runs `(delta of first cell, length)`.
pub(crate) fn runs(g: &GridGeometry, offsets: &[(isize, isize)]) -> Vec<(isize, usize)> {
    let mut sorted = offsets.to_vec();
    sorted.sort_unstable_by_key(|&(du, dv)| (dv, du));
    let mut out: Vec<(isize, usize)> = Vec::new();
    let mut last: Option<(isize, isize)> = None;
    for (du, dv) in sorted {
        match (last, out.last_mut()) {
            (Some((pu, pv)), Some(run)) if pv == dv && pu + 1 == du => run.1 += 1,
            _ => out.push((delta(g, du, dv), 1)),
        }
        last = Some((du, dv));
    }
    out
}

/// Four-lane running minimum and maximum.
///
/// Runs are folded without reducing the lanes, so short runs cost little;
/// lane `k` sees elements whose offset within their run is `k` mod 4.
#[derive(Clone, Copy)]
pub(crate) struct Lanes {
    pub(crate) lo: [f64; 4],
    pub(crate) hi: [f64; 4],
}

impl Lanes {
    pub(crate) const EMPTY: Lanes = Lanes {
        lo: [f64::INFINITY; 4],
        hi: [f64::NEG_INFINITY; 4],
    };

    #[inline]
    pub(crate) fn fold(&mut self, xs: &[f64]) {
        let chunks = xs.chunks_exact(4);
        let rest = chunks.remainder();
        for c in chunks {
            for k in 0..4 {
                self.lo[k] = if c[k] < self.lo[k] { c[k] } else { self.lo[k] };
                self.hi[k] = if c[k] > self.hi[k] { c[k] } else { self.hi[k] };
            }
        }
        for (k, &z) in rest.iter().enumerate() {
            self.lo[k] = if z < self.lo[k] { z } else { self.lo[k] };
            self.hi[k] = if z > self.hi[k] { z } else { self.hi[k] };
        }
    }

    #[inline]
    pub(crate) fn fold_max(&mut self, xs: &[f64]) {
        let chunks = xs.chunks_exact(4);
        let rest = chunks.remainder();
        for c in chunks {
            for k in 0..4 {
                self.hi[k] = if c[k] > self.hi[k] { c[k] } else { self.hi[k] };
            }
        }
        for (k, &z) in rest.iter().enumerate() {
            self.hi[k] = if z > self.hi[k] { z } else { self.hi[k] };
        }
    }

    #[inline]
    pub(crate) fn min(&self) -> f64 {
        self.lo[0].min(self.lo[1]).min(self.lo[2].min(self.lo[3]))
    }

    #[inline]
    pub(crate) fn max(&self) -> f64 {
        self.hi[0].max(self.hi[1]).max(self.hi[2].max(self.hi[3]))
    }
}

#[inline]
pub(crate) fn delta(g: &GridGeometry, du: isize, dv: isize) -> isize {
    dv * g.ncols as isize + du
}

/// Runs `f` on every evaluable pixel in parallel; row order is preserved so
/// the result is independent of scheduling.
pub(crate) fn per_pixel<const N: usize>(
    dem: &GeoGrid,
    stencil: &Stencil,
    f: impl Fn(usize, usize) -> [f64; N] + Sync,
) -> Result<[GeoGrid; N]> {
    let g = *dem.geometry();
    let rows: Vec<Vec<Option<[f64; N]>>> = (0..g.nrows)
        .into_par_iter()
        .map(|v| {
            (0..g.ncols)
                .map(|u| stencil.evaluable(dem, u, v).then(|| f(u, v)))
                .collect()
        })
        .collect();
    let mut out: [GeoGrid; N] = std::array::from_fn(|_| GeoGrid::empty(g).expect("validated geometry"));
    for (v, row) in rows.into_iter().enumerate() {
        for (u, r) in row.into_iter().enumerate() {
            if let Some(vals) = r {
                for (grid, z) in out.iter_mut().zip(vals) {
                    grid.set(u, v, z);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_match_distance_audit() {
        let g = LanderGeom::default();
        for cs in [0.1, 0.2, 0.37] {
            let (l, u, inner) = (l_mask(&g, cs), u_mask(&g, cs), inner_mask(&g, cs));
            for dv in -40isize..=40 {
                for du in -40isize..=40 {
                    let d = ((du * du + dv * dv) as f64).sqrt() * cs;
                    let in_l = (2.35..=2.65).contains(&d);
                    if (d - 2.35).abs() > 1e-9 && (d - 2.65).abs() > 1e-9 {
                        assert_eq!(l.contains(&(du, dv)), in_l, "L at {du},{dv} cs {cs}");
                        assert_eq!(u.contains(&(du, dv)), d <= 2.65);
                    }
                }
            }
            assert_eq!(l.len() + inner.len(), u.len());
            assert!(inner.iter().all(|c| !l.contains(c)));
        }
    }

    #[test]
    fn runs_cover_mask() {
        let g = GridGeometry::new(0.0, 0.0, 0.1, 100, 100).unwrap();
        let mask = l_mask(&LanderGeom::default(), 0.1);
        let r = runs(&g, &mask);
        let mut cells: Vec<isize> = r.iter().flat_map(|&(d, n)| (0..n as isize).map(move |k| d + k)).collect();
        let mut want: Vec<isize> = mask.iter().map(|&(du, dv)| delta(&g, du, dv)).collect();
        cells.sort_unstable();
        want.sort_unstable();
        assert_eq!(cells, want);
        assert!(r.len() < mask.len() / 4);
    }

    #[test]
    fn lane_reductions() {
        let xs: Vec<f64> = (0..19).map(|k| ((k * 7919) % 23) as f64 - 11.0).collect();
        let mut l = Lanes::EMPTY;
        for part in [&xs[..3], &xs[3..4], &xs[4..11], &xs[11..]] {
            l.fold(part);
        }
        assert_eq!((l.min(), l.max()), (-11.0, 11.0));
        let mut m = Lanes::EMPTY;
        m.hi = [20.0; 4];
        m.fold_max(&xs);
        assert_eq!(m.max(), 20.0);
        let mut e = Lanes::EMPTY;
        e.fold_max(&xs[..2]);
        assert_eq!(e.max(), xs[..2].iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }

    #[test]
    fn stencil_domain() {
        let geom = GridGeometry::new(0.0, 0.0, 1.0, 7, 7).unwrap();
        let mut dem = GeoGrid::filled(geom, 0.0).unwrap();
        let s = Stencil::new(&dem, &[(-1, 0), (1, 1)]).unwrap();
        assert!(!s.evaluable(&dem, 0, 3) && s.evaluable(&dem, 1, 1) && !s.evaluable(&dem, 6, 3));
        dem.set_nodata(4, 4);
        let s = Stencil::new(&dem, &[(-1, 0), (1, 1)]).unwrap();
        assert!(!s.evaluable(&dem, 3, 3) && s.evaluable(&dem, 3, 2));
        assert!(Stencil::new(&dem, &[(4, 0)]).is_err());
    }
}
