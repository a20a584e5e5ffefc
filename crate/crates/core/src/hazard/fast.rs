// SPDX-License-Identifier: Apache-2.0

//! Height-difference detectors.

use super::stencil::{inner_mask, l_mask, per_pixel, runs, u_mask, Lanes, Stencil};
use super::{compute_h0, prob_below, ExtremumMoments, LanderGeom, SafetyMap, SlopeBound, StochasticSafetyMap};
use crate::error::{Error, Result};
use crate::grid::{GaussianGrid, GeoGrid};

struct Masks {
    stencil: Stencil,
    annulus: Vec<(isize, usize)>,
    inner: Vec<(isize, usize)>,
}

impl Masks {
    fn new(dem: &GeoGrid, geom: &LanderGeom) -> Result<Self> {
        let cs = dem.cell_size();
        let g = dem.geometry();
        let annulus = runs(g, &l_mask(geom, cs));
        if annulus.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "leg annulus contains no cell centers at cell size {cs}"
            )));
        }
        Ok(Masks {
            stencil: Stencil::new(dem, &u_mask(geom, cs))?,
            annulus,
            inner: runs(g, &inner_mask(geom, cs)),
        })
    }
}

/// Conservative detector for a deterministic DEM.
///
/// Over the leg annulus `L` it takes the highest and lowest elevations
/// `zl_max`, `zl_min`, and over the disk `U` the highest `zu_max`. The pixel
/// is slope-safe when `zl_max - zl_min < h0 sin(s_max)` and roughness-safe
/// when `zu_max - zl_min < r_max`. The reported slope is
/// `asin((zl_max - zl_min) / h0)`, 90 degrees once the ratio reaches 1.
pub fn hd_fast_deterministic(dem: &GeoGrid, geom: &LanderGeom) -> Result<SafetyMap> {
    geom.validate()?;
    let h0 = compute_h0(geom)?;
    let masks = Masks::new(dem, geom)?;
    let slope_bound = SlopeBound::Sin.threshold(h0, geom.slope_threshold);
    let r_max = geom.roughness_threshold;
    let vals = dem.values();
    let ncols = dem.ncols();
    let [slope_safe, rough_safe, slope, rough] = per_pixel(dem, &masks.stencil, |u, v| {
        let i = (v * ncols + u) as isize;
        let mut ring = Lanes::EMPTY;
        for &(d, n) in &masks.annulus {
            let a = (i + d) as usize;
            ring.fold(&vals[a..a + n]);
        }
        let (lo, hi) = (ring.min(), ring.max());
        let mut disk = Lanes::EMPTY;
        for &(d, n) in &masks.inner {
            let a = (i + d) as usize;
            disk.fold_max(&vals[a..a + n]);
        }
        let top = hi.max(disk.max());
        let dz = hi - lo;
        let ratio = dz / h0;
        let s = if ratio >= 1.0 { 90.0 } else { ratio.asin().to_degrees() };
        let r = top - lo;
        [(dz < slope_bound) as u8 as f64, (r < r_max) as u8 as f64, s, r]
    })?;
    Ok(SafetyMap {
        slope_safe,
        rough_safe,
        slope,
        roughness: rough,
    })
}

/// Running `3 sigma` envelope of a set of Gaussians.
#[derive(Debug, Clone, Copy)]
struct Envelope {
    max_hi: f64,
    max_lo: f64,
    min_hi: f64,
    min_lo: f64,
}

impl Envelope {
    const EMPTY: Envelope = Envelope {
        max_hi: f64::NEG_INFINITY,
        max_lo: f64::NEG_INFINITY,
        min_hi: f64::INFINITY,
        min_lo: f64::INFINITY,
    };

    #[inline]
    fn push(&mut self, hi: f64, lo: f64) {
        self.max_hi = self.max_hi.max(hi);
        self.max_lo = self.max_lo.max(lo);
        self.min_hi = self.min_hi.min(hi);
        self.min_lo = self.min_lo.min(lo);
    }

    #[inline]
    fn from_lanes(l: &Lanes) -> Envelope {
        Envelope {
            max_hi: l.hi[0].max(l.hi[2]),
            max_lo: l.hi[1].max(l.hi[3]),
            min_hi: l.lo[0].min(l.lo[2]),
            min_lo: l.lo[1].min(l.lo[3]),
        }
    }

    #[inline]
    fn max(&self) -> (f64, f64) {
        ((self.max_hi + self.max_lo) / 2.0, (self.max_hi - self.max_lo) / 6.0)
    }

    #[inline]
    fn min(&self) -> (f64, f64) {
        ((self.min_hi + self.min_lo) / 2.0, (self.min_hi - self.min_lo) / 6.0)
    }
}

/// Gaussian approximations `(mu, sigma)` of the maximum and minimum of
/// independent `N(mu_i, sigma_i^2)` from their `3 sigma` bounds.
pub fn gauss_extremum_approx(vars: &[(f64, f64)]) -> Result<((f64, f64), (f64, f64))> {
    if vars.is_empty() {
        return Err(Error::InvalidArgument("no variables".into()));
    }
    let mut env = Envelope::EMPTY;
    for &(mu, sigma) in vars {
        if !(sigma >= 0.0) || !mu.is_finite() || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid Gaussian ({mu}, {sigma})")));
        }
        env.push(mu + 3.0 * sigma, mu - 3.0 * sigma);
    }
    Ok((env.max(), env.min()))
}

/// Stochastic detector for a Gaussian DEM.
///
/// The maxima and minima over `L` and `U` are approximated by
/// [`gauss_extremum_approx`], giving `z_LL = zl_max - zl_min` and
/// `z_UL = zu_max - zl_min` as Gaussians with summed variances. Then
/// `p_slope = Phi((h0 b(s_max) - mu_LL) / sigma_LL)` with `b` chosen by
/// `bound`, and `p_rough = Phi((r_max - mu_UL) / sigma_UL)`; a zero sigma
/// gives a strict step.
pub fn hd_fast_stochastic(gdem: &GaussianGrid, geom: &LanderGeom, bound: SlopeBound) -> Result<StochasticSafetyMap> {
    geom.validate()?;
    let h0 = compute_h0(geom)?;
    let mean = &gdem.mean;
    let masks = Masks::new(mean, geom)?;
    let slope_bound = bound.threshold(h0, geom.slope_threshold);
    let r_max = geom.roughness_threshold;
    // Interleaved `[hi, lo]` pairs so each run is folded in one pass.
    let hl: Vec<f64> = mean
        .values()
        .iter()
        .zip(gdem.variance.values())
        .flat_map(|(&m, &s2)| {
            let s = s2.max(0.0).sqrt();
            [m + 3.0 * s, m - 3.0 * s]
        })
        .collect();
    let ncols = mean.ncols();
    let [p_slope, p_rough, mu_ll, sigma_ll, mu_ul, sigma_ul] = per_pixel(mean, &masks.stencil, |u, v| {
        let i = (v * ncols + u) as isize;
        // Runs have even length and start on a pair, so even lanes hold
        // upper bounds and odd lanes lower bounds.
        let mut lanes = Lanes::EMPTY;
        for &(d, n) in &masks.annulus {
            let a = 2 * (i + d) as usize;
            lanes.fold(&hl[a..a + 2 * n]);
        }
        let ring = Envelope::from_lanes(&lanes);
        for &(d, n) in &masks.inner {
            let a = 2 * (i + d) as usize;
            lanes.fold_max(&hl[a..a + 2 * n]);
        }
        let disk = Envelope::from_lanes(&lanes);
        let ((mu_lmax, s_lmax), (mu_lmin, s_lmin)) = (ring.max(), ring.min());
        let (mu_umax, s_umax) = disk.max();
        let (m_ll, v_ll) = (mu_lmax - mu_lmin, (s_lmax * s_lmax + s_lmin * s_lmin).sqrt());
        let (m_ul, v_ul) = (mu_umax - mu_lmin, (s_umax * s_umax + s_lmin * s_lmin).sqrt());
        [
            prob_below(slope_bound, m_ll, v_ll),
            prob_below(r_max, m_ul, v_ul),
            m_ll,
            v_ll,
            m_ul,
            v_ul,
        ]
    })?;
    Ok(StochasticSafetyMap {
        p_slope,
        p_rough,
        moments: Some(ExtremumMoments {
            mu_ll,
            sigma_ll,
            mu_ul,
            sigma_ul,
        }),
    })
}
