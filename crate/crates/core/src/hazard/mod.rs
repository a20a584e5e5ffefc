// SPDX-License-Identifier: Apache-2.0

//! Landing safety evaluation.
//!
//! Four detectors share the same lander model and raster conventions:
//!
//! - [`hd_exact_oracle`] sweeps orientations on a noise-free DEM and fits the
//!   landing plane explicitly.
//! - [`hd_baseline_stochastic`] is the footpad-map detector with per-cell
//!   roughness probabilities.
//! - [`hd_fast_deterministic`] bounds slope and roughness from elevation
//!   extremes over the leg annulus and footprint disk.
//! - [`hd_fast_stochastic`] propagates Gaussian DEM uncertainty through the
//!   same bounds.
//!
//! A pixel is evaluated only when every cell its stencil touches lies inside
//! the grid and holds data; other pixels are nodata in every output raster.

mod baseline;
mod fast;
mod geometry;
mod oracle;
mod stencil;

pub use baseline::{footpad_map, hd_baseline_stochastic};
pub use fast::{gauss_extremum_approx, hd_fast_deterministic, hd_fast_stochastic};
pub use geometry::{plane_normal, plane_through, roughness_at, slope_of, theorem1_max_slope, triangle_heights};
pub use oracle::hd_exact_oracle;
pub use stencil::{body_mask, l_mask, u_mask};

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::GeoGrid;

/// Default orientation step for the oracle and baseline, degrees.
pub const DEFAULT_DTHETA_DEG: f64 = 1.0;

/// Lander geometry and safety thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanderGeom {
    pub n_legs: usize,
    /// Radius of the circle through the footpad centers, m.
    pub leg_circle_radius: f64,
    pub pad_radius: f64,
    /// Radius of the body footprint over which roughness is measured, m.
    pub body_radius: f64,
    /// Critical slope, degrees.
    pub slope_threshold: f64,
    /// Critical roughness, m.
    pub roughness_threshold: f64,
}

impl Default for LanderGeom {
    /// Three legs on a 5 m diameter, 0.3 m pads, 10 degrees, 0.25 m, with
    /// the body footprint equal to the leg triangle's incircle.
    fn default() -> Self {
        LanderGeom {
            n_legs: 3,
            leg_circle_radius: 2.5,
            pad_radius: 0.15,
            body_radius: 2.5 * (PI / 3.0).cos(),
            slope_threshold: 10.0,
            roughness_threshold: 0.25,
        }
    }
}

impl LanderGeom {
    pub fn new(
        n_legs: usize,
        leg_circle_radius: f64,
        pad_radius: f64,
        body_radius: f64,
        slope_threshold: f64,
        roughness_threshold: f64,
    ) -> Result<Self> {
        let g = LanderGeom {
            n_legs,
            leg_circle_radius,
            pad_radius,
            body_radius,
            slope_threshold,
            roughness_threshold,
        };
        g.validate()?;
        Ok(g)
    }

    /// Inradius of the regular leg polygon.
    pub fn inradius(&self) -> f64 {
        self.leg_circle_radius * (PI / self.n_legs as f64).cos()
    }

    /// Checks ranges and that the body footprint lies inside the leg polygon.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_legs < 3 {
            return bad(format!("need at least 3 legs, got {}", self.n_legs));
        }
        if !(self.leg_circle_radius.is_finite() && self.leg_circle_radius >= 0.0) {
            return bad(format!("invalid leg circle radius {}", self.leg_circle_radius));
        }
        if !(self.pad_radius >= 0.0 && self.pad_radius < self.leg_circle_radius) {
            return bad(format!(
                "pad radius {} must be in [0, leg circle radius)",
                self.pad_radius
            ));
        }
        if !(self.body_radius >= 0.0) {
            return bad(format!("invalid body radius {}", self.body_radius));
        }
        if self.body_radius > self.inradius() * (1.0 + 1e-12) {
            return bad(format!(
                "body radius {} exceeds the leg polygon inradius {}",
                self.body_radius,
                self.inradius()
            ));
        }
        if !(self.slope_threshold > 0.0 && self.slope_threshold < 90.0) {
            return bad(format!("slope threshold {} outside (0, 90)", self.slope_threshold));
        }
        if !(self.roughness_threshold > 0.0 && self.roughness_threshold.is_finite()) {
            return bad(format!("roughness threshold {} must be > 0", self.roughness_threshold));
        }
        compute_h0(self).map(|_| ())
    }

    /// Outer radius of every stencil: leg circle plus pad.
    pub fn reach(&self) -> f64 {
        self.leg_circle_radius + self.pad_radius
    }

    /// Rotation period of the leg pattern.
    pub fn symmetry_period(&self) -> f64 {
        2.0 * PI / self.n_legs as f64
    }
}

/// Horizontal leg positions relative to the lander center at heading `theta`.
pub fn leg_offsets(geom: &LanderGeom, theta: f64) -> Vec<[f64; 2]> {
    let r = geom.leg_circle_radius;
    (0..geom.n_legs)
        .map(|i| {
            let a = theta + 2.0 * PI * i as f64 / geom.n_legs as f64;
            [r * a.cos(), r * a.sin()]
        })
        .collect()
}

/// Smallest vertex-to-opposite-edge distance over all leg triples.
pub fn compute_h0(geom: &LanderGeom) -> Result<f64> {
    let legs = leg_offsets(geom, 0.0);
    let n = legs.len();
    let mut h0 = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let h = triangle_heights(&[legs[i], legs[j], legs[k]])
                    .map_err(|_| Error::Degenerate("landing legs are coincident or collinear".into()))?;
                h0 = h0.min(h[0]).min(h[1]).min(h[2]);
            }
        }
    }
    if !(h0 > 0.0 && h0.is_finite()) {
        return Err(Error::Degenerate("landing legs are coincident".into()));
    }
    Ok(h0)
}

/// Slope bound used by the stochastic fast detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SlopeBound {
    /// `h0 * sin(s)`, as in the deterministic detector.
    Sin,
    /// `h0 * tan(s)`.
    #[default]
    Tan,
}

impl SlopeBound {
    pub fn threshold(self, h0: f64, slope_deg: f64) -> f64 {
        let s = slope_deg.to_radians();
        match self {
            SlopeBound::Sin => h0 * s.sin(),
            SlopeBound::Tan => h0 * s.tan(),
        }
    }
}

impl FromStr for SlopeBound {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sin" => Ok(SlopeBound::Sin),
            "tan" => Ok(SlopeBound::Tan),
            other => Err(Error::InvalidArgument(format!("unknown slope bound '{other}' (sin|tan)"))),
        }
    }
}

/// Binary safety rasters with the metric each decision was based on.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyMap {
    /// 1 where slope-safe, 0 otherwise.
    pub slope_safe: GeoGrid,
    /// 1 where roughness-safe, 0 otherwise.
    pub rough_safe: GeoGrid,
    /// Slope, degrees.
    pub slope: GeoGrid,
    /// Roughness, m.
    pub roughness: GeoGrid,
}

impl SafetyMap {
    /// 1 where both slope and roughness are safe.
    pub fn safe(&self) -> GeoGrid {
        self.slope_safe
            .zip_with(&self.rough_safe, |a, b| a.min(b))
            .expect("safety rasters share a geometry")
    }
}

/// Per-pixel moments of the approximated elevation differences.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremumMoments {
    pub mu_ll: GeoGrid,
    pub sigma_ll: GeoGrid,
    pub mu_ul: GeoGrid,
    pub sigma_ul: GeoGrid,
}

/// Probabilistic safety rasters.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticSafetyMap {
    pub p_slope: GeoGrid,
    pub p_rough: GeoGrid,
    /// Present for the fast detector.
    pub moments: Option<ExtremumMoments>,
}

impl StochasticSafetyMap {
    /// `p_slope * p_rough`.
    pub fn p_safe(&self) -> GeoGrid {
        self.p_slope
            .zip_with(&self.p_rough, |a, b| a * b)
            .expect("safety rasters share a geometry")
    }
}

/// Standard normal CDF.
#[inline]
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(X < threshold)` for `X ~ N(mu, sigma^2)`; a strict step at `sigma = 0`.
#[inline]
pub(crate) fn prob_below(threshold: f64, mu: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        phi((threshold - mu) / sigma)
    } else if mu < threshold {
        1.0
    } else {
        0.0
    }
}

/// Orientation samples `0, dtheta, 2 dtheta, ...` covering one symmetry period.
pub(crate) fn orientation_lattice(geom: &LanderGeom, dtheta: f64) -> Result<Vec<f64>> {
    if !(dtheta > 0.0 && dtheta.is_finite()) {
        return Err(Error::InvalidArgument(format!("orientation step must be > 0, got {dtheta}")));
    }
    let period = geom.symmetry_period();
    let n = ((period / dtheta) - 1e-9).ceil().max(1.0) as usize;
    Ok((0..n).map(|k| k as f64 * dtheta).collect())
}

/// Leg triples whose plane has every other leg on or below it. For three
/// legs this is the single triangle; in general these are the facets the
/// lander can rest on.
#[cfg(test)]
pub(crate) fn support_triples(legs: &[[f64; 3]]) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    support_triples_into(legs, &mut out);
    out
}

pub(crate) fn support_triples_into(legs: &[[f64; 3]], out: &mut Vec<[usize; 3]>) {
    out.clear();
    let n = legs.len();
    if n == 3 {
        out.push([0, 1, 2]);
        return;
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let [a, b, c] = geometry::cross(legs[i], legs[j], legs[k]);
                let d = -(a * legs[i][0] + b * legs[i][1] + c * legs[i][2]);
                let scale = (a * a + b * b + c * c).sqrt();
                let ok = (0..n)
                    .filter(|&m| m != i && m != j && m != k)
                    .all(|m| a * legs[m][0] + b * legs[m][1] + c * legs[m][2] + d <= 1e-12 * scale);
                if ok {
                    out.push([i, j, k]);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lander_h0() {
        let g = LanderGeom::default();
        g.validate().unwrap();
        assert!((compute_h0(&g).unwrap() - 3.75).abs() < 1e-12);
        assert!((g.body_radius - 1.25).abs() < 1e-12);
    }

    #[test]
    fn four_leg_h0_brute_force() {
        let g = LanderGeom::new(4, 2.0, 0.1, 1.0, 10.0, 0.25).unwrap();
        // Each triple is a right isoceles triangle with legs 2*sqrt(2);
        // its smallest height is the one onto the hypotenuse, equal to R.
        assert!((compute_h0(&g).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn assumption_one_enforced() {
        assert!(LanderGeom::new(3, 2.5, 0.15, 1.3, 10.0, 0.25).is_err());
        assert!(LanderGeom::new(3, 0.0, 0.0, 0.0, 10.0, 0.25).is_err());
        assert!(LanderGeom::new(2, 2.5, 0.15, 1.0, 10.0, 0.25).is_err());
        assert!(LanderGeom::new(6, 2.5, 0.15, 2.1, 10.0, 0.25).is_ok());
    }

    #[test]
    fn leg_offsets_rotate_cyclically() {
        let g = LanderGeom::default();
        let l0 = leg_offsets(&g, 0.0);
        assert_eq!(l0[0], [2.5, 0.0]);
        let l1 = leg_offsets(&g, g.symmetry_period());
        for i in 0..3 {
            let j = (i + 1) % 3;
            assert!((l1[i][0] - l0[j][0]).abs() < 1e-12 && (l1[i][1] - l0[j][1]).abs() < 1e-12);
        }
        for p in leg_offsets(&g, 0.731) {
            assert!((p[0].hypot(p[1]) - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn slope_bound_parse() {
        assert_eq!("sin".parse::<SlopeBound>().unwrap(), SlopeBound::Sin);
        assert_eq!(" TAN".parse::<SlopeBound>().unwrap(), SlopeBound::Tan);
        assert!("cos".parse::<SlopeBound>().is_err());
        assert!(SlopeBound::Tan.threshold(3.75, 10.0) > SlopeBound::Sin.threshold(3.75, 10.0));
    }

    #[test]
    fn lattice_covers_one_period() {
        let g = LanderGeom::default();
        let t = orientation_lattice(&g, 1f64.to_radians()).unwrap();
        assert_eq!(t.len(), 120);
        assert!(orientation_lattice(&g, 0.0).is_err());
    }

    #[test]
    fn support_triples_of_square() {
        let r = 2.0;
        let legs = [[r, 0.0, 0.0], [0.0, r, 0.0], [-r, 0.0, 0.5], [0.0, -r, 0.0]];
        let t = support_triples(&legs);
        // The raised leg 2 belongs to both supporting facets.
        assert_eq!(t, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn prob_below_limits() {
        assert_eq!(prob_below(1.0, 1.0, 0.3), 0.5);
        assert_eq!(prob_below(1.0, 0.9, 0.0), 1.0);
        assert_eq!(prob_below(1.0, 1.0, 0.0), 0.0);
        assert!((phi(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
    }
}
