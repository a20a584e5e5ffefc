// SPDX-License-Identifier: Apache-2.0

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{GeoGrid, GridGeometry};
use crate::rng;

/// Fractional Brownian surface by spectral synthesis.
///
/// Complex white noise is shaped by `|k|^-(hurst + 1)` and inverse
/// transformed; the real part is centered and scaled to a sample standard
/// deviation of `amplitude`. The field is periodic over the grid extent.
pub fn gen_fractal_base(geom: GridGeometry, hurst: f64, amplitude: f64, seed: u64) -> Result<GeoGrid> {
    geom.validate()?;
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::InvalidArgument(format!("hurst exponent must lie in (0, 1), got {hurst}")));
    }
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(Error::InvalidArgument(format!("amplitude must be >= 0, got {amplitude}")));
    }
    let (nx, ny) = (geom.ncols, geom.nrows);
    if amplitude == 0.0 || nx * ny == 1 {
        return GeoGrid::filled(geom, 0.0);
    }

    let freq = |i: usize, n: usize| i.min(n - i) as f64 / (n as f64 * geom.cell_size);
    let mut spec = vec![Complex64::new(0.0, 0.0); nx * ny];
    for j in 0..ny {
        let mut stream = rng::keyed(seed, rng::domain::FRACTAL, j as u64);
        let fy = freq(j, ny);
        for i in 0..nx {
            let re: f64 = StandardNormal.sample(&mut stream);
            let im: f64 = StandardNormal.sample(&mut stream);
            let k = freq(i, nx).hypot(fy);
            if k > 0.0 {
                spec[j * nx + i] = Complex64::new(re, im) * k.powf(-(hurst + 1.0));
            }
        }
    }

    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_inverse(nx);
    for row in spec.chunks_exact_mut(nx) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_inverse(ny);
    let mut col = vec![Complex64::new(0.0, 0.0); ny];
    for i in 0..nx {
        for j in 0..ny {
            col[j] = spec[j * nx + i];
        }
        col_fft.process(&mut col);
        for j in 0..ny {
            spec[j * nx + i] = col[j];
        }
    }

    let raw: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let std = (raw.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(std > 0.0) {
        return GeoGrid::filled(geom, 0.0);
    }
    let scale = amplitude / std;
    GeoGrid::from_values(geom, raw.into_iter().map(|z| (z - mean) * scale).collect())
}
