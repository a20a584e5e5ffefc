// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};

/// Absolute-exponential GRF hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrfHyper {
    /// Prior standard deviation, m.
    pub sigma_f: f64,
    /// Length scale, m.
    pub length_scale: f64,
    /// Observation noise standard deviation, m.
    pub sigma_eps: f64,
}

impl GrfHyper {
    pub fn new(sigma_f: f64, length_scale: f64, sigma_eps: f64) -> Result<Self> {
        let h = GrfHyper {
            sigma_f,
            length_scale,
            sigma_eps,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_f > 0.0 && self.sigma_f.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma_f must be > 0, got {}", self.sigma_f)));
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "length scale must be > 0, got {}",
                self.length_scale
            )));
        }
        if !(self.sigma_eps >= 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma_eps must be >= 0, got {}", self.sigma_eps)));
        }
        Ok(())
    }
}

/// `sigma_f^2 * exp(-d / l)`.
#[inline]
pub fn ae_kernel(d: f64, hyper: &GrfHyper) -> f64 {
    hyper.sigma_f * hyper.sigma_f * (-d / hyper.length_scale).exp()
}

#[inline]
fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Posterior mean and variance at `query` from three noisy samples.
///
/// The prior mean is the sample mean of the three elevations. `(K + s^2 I)`
/// is inverted through its adjugate, and the variance is clamped at zero.
pub fn grf_predict_local(query: [f64; 2], verts: &[[f64; 3]; 3], hyper: &GrfHyper) -> Result<(f64, f64)> {
    let xy = verts.map(|v| [v[0], v[1]]);
    let noise = hyper.sigma_eps * hyper.sigma_eps;
    let prior = hyper.sigma_f * hyper.sigma_f;
    let d = prior + noise;
    let k01 = ae_kernel(dist(xy[0], xy[1]), hyper);
    let k02 = ae_kernel(dist(xy[0], xy[2]), hyper);
    let k12 = ae_kernel(dist(xy[1], xy[2]), hyper);

    // Cofactors of the symmetric matrix [[d, k01, k02], [k01, d, k12], [k02, k12, d]].
    let c00 = d * d - k12 * k12;
    let c01 = k02 * k12 - k01 * d;
    let c02 = k01 * k12 - k02 * d;
    let c11 = d * d - k02 * k02;
    let c12 = k01 * k02 - d * k12;
    let c22 = d * d - k01 * k01;
    let det = d * c00 + k01 * c01 + k02 * c02;
    if !(det > f64::EPSILON * d * d * d) {
        return Err(Error::Singular(det));
    }
    let inv = [[c00, c01, c02], [c01, c11, c12], [c02, c12, c22]].map(|r| r.map(|x| x / det));

    let m = (verts[0][2] + verts[1][2] + verts[2][2]) / 3.0;
    let r = verts.map(|v| v[2] - m);
    let ks = xy.map(|p| ae_kernel(dist(query, p), hyper));
    let mut mean = m;
    let mut quad = 0.0;
    for i in 0..3 {
        let row = inv[i][0] * ks[0] + inv[i][1] * ks[1] + inv[i][2] * ks[2];
        quad += ks[i] * row;
        mean += ks[i] * (inv[i][0] * r[0] + inv[i][1] * r[1] + inv[i][2] * r[2]);
    }
    Ok((mean, (prior - quad).max(0.0)))
}
