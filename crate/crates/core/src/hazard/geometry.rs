// SPDX-License-Identifier: Apache-2.0

//! Landing-plane primitives.

use crate::error::{Error, Result};

/// `(p2 - p1) x (p3 - p1)`; counterclockwise input gives `c > 0`.
pub fn plane_normal(p1: [f64; 3], p2: [f64; 3], p3: [f64; 3]) -> Result<[f64; 3]> {
    let n = cross(p1, p2, p3);
    if n[0] == 0.0 && n[1] == 0.0 && n[2] == 0.0 {
        return Err(Error::Degenerate("collinear landing-leg points".into()));
    }
    Ok(n)
}

#[inline]
pub(crate) fn cross(p1: [f64; 3], p2: [f64; 3], p3: [f64; 3]) -> [f64; 3] {
    let u = [p2[0] - p1[0], p2[1] - p1[1], p2[2] - p1[2]];
    let w = [p3[0] - p1[0], p3[1] - p1[1], p3[2] - p1[2]];
    [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]]
}

/// Tilt of `n` from the vertical, degrees.
///
/// Evaluated as `atan2(|(a, b)|, c)`, which equals `acos(c / |n|)` but keeps
/// full precision near zero tilt.
pub fn slope_of(n: [f64; 3]) -> Result<f64> {
    if n[0] == 0.0 && n[1] == 0.0 && n[2] == 0.0 {
        return Err(Error::Degenerate("zero normal vector".into()));
    }
    if !(n[2] > 0.0) {
        return Err(Error::InvalidArgument(format!("normal must point up, got c = {}", n[2])));
    }
    Ok(slope_deg_unchecked(n))
}

#[inline]
pub(crate) fn slope_deg_unchecked(n: [f64; 3]) -> f64 {
    n[0].hypot(n[1]).atan2(n[2]).to_degrees()
}

/// Plane `ax + by + cz + d = 0` through three points.
pub fn plane_through(p1: [f64; 3], p2: [f64; 3], p3: [f64; 3]) -> Result<[f64; 4]> {
    let [a, b, c] = plane_normal(p1, p2, p3)?;
    Ok([a, b, c, -(a * p1[0] + b * p1[1] + c * p1[2])])
}

/// Signed distance from `(x, y, z)` to `plane`, positive above it when `c > 0`.
#[inline]
pub fn roughness_at(plane: [f64; 4], xy: [f64; 2], z: f64) -> f64 {
    let [a, b, c, d] = plane;
    (a * xy[0] + b * xy[1] + c * z + d) / (a * a + b * b + c * c).sqrt()
}

/// Vertex-to-opposite-edge distances of a 2-D triangle.
pub fn triangle_heights(tri: &[[f64; 2]; 3]) -> Result<[f64; 3]> {
    let area2 = ((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1])).abs();
    if !(area2 > 0.0) {
        return Err(Error::Degenerate("triangle has zero area".into()));
    }
    let edge = |i: usize, j: usize| (tri[i][0] - tri[j][0]).hypot(tri[i][1] - tri[j][1]);
    Ok([area2 / edge(1, 2), area2 / edge(0, 2), area2 / edge(0, 1)])
}

/// Largest slope, degrees, a rigid triangle can take while its vertex
/// elevations stay within a band of width `dz`: `asin(dz / h0)`.
///
/// Fails unless `0 <= dz < h_i` for every vertex height `h_i`.
pub fn theorem1_max_slope(tri: &[[f64; 2]; 3], dz: f64) -> Result<f64> {
    let h = triangle_heights(tri)?;
    let h0 = h[0].min(h[1]).min(h[2]);
    if !(dz >= 0.0 && dz < h0) {
        return Err(Error::InvalidArgument(format!("need 0 <= dz < {h0}, got {dz}")));
    }
    Ok((dz / h0).asin().to_degrees())
}
