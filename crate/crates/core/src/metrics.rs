// SPDX-License-Identifier: Apache-2.0

//! DEM and safety-map quality metrics.
//!
//! Estimates on a different grid are nearest-resampled onto the truth
//! geometry first. Only cells valid in both rasters are scored.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{nearest_resample, GaussianGrid, GeoGrid, GridGeometry};

fn aligned(est: &GeoGrid, truth: &GridGeometry) -> Result<GeoGrid> {
    if est.geometry().same_as(truth) {
        Ok(est.clone())
    } else {
        nearest_resample(est, *truth)
    }
}

/// Pairwise sum; the fixed split order keeps results reproducible.
fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn mean_of(terms: &[f64]) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::InvalidArgument("no common valid cells".into()));
    }
    Ok(pairwise_sum(terms) / terms.len() as f64)
}

/// Root-mean-square elevation error.
pub fn rmse(truth: &GeoGrid, est: &GeoGrid) -> Result<f64> {
    let est = aligned(est, truth.geometry())?;
    let terms: Vec<f64> = truth
        .values()
        .iter()
        .zip(est.values())
        .zip(truth.mask().iter().zip(est.mask()))
        .filter(|(_, (a, b))| **a && **b)
        .map(|((z, e), _)| (z - e) * (z - e))
        .collect();
    Ok(mean_of(&terms)?.sqrt())
}

/// Negative log predictive density of `truth` under a Gaussian DEM.
pub fn nlpd(truth: &GeoGrid, est: &GaussianGrid) -> Result<f64> {
    let mean = aligned(&est.mean, truth.geometry())?;
    let var = aligned(&est.variance, truth.geometry())?;
    nlpd_terms(truth, &mean, |i| var.get_index(i))
}

/// NLPD of a deterministic DEM scored with a fixed standard deviation.
pub fn nlpd_fixed_sigma(truth: &GeoGrid, est: &GeoGrid, sigma: f64) -> Result<f64> {
    let mean = aligned(est, truth.geometry())?;
    nlpd_terms(truth, &mean, |_| Some(sigma * sigma))
}

fn nlpd_terms(truth: &GeoGrid, mean: &GeoGrid, var: impl Fn(usize) -> Option<f64>) -> Result<f64> {
    let mut terms = Vec::with_capacity(truth.values().len());
    for i in 0..truth.values().len() {
        let (Some(z), Some(m)) = (truth.get_index(i), mean.get_index(i)) else {
            continue;
        };
        let Some(s2) = var(i) else {
            continue;
        };
        if !(s2 > 0.0) {
            return Err(Error::InvalidArgument(format!("zero predictive variance at cell {i}")));
        }
        let r = z - m;
        terms.push(r * r / (2.0 * s2) + 0.5 * (2.0 * PI * s2).ln());
    }
    mean_of(&terms)
}

/// Confusion counts and derived scores; "positive" means safe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    /// NaN when nothing was predicted safe.
    pub precision: f64,
    /// NaN when nothing is truly safe.
    pub recall: f64,
    pub true_safe: usize,
    pub false_safe: usize,
    pub false_unsafe: usize,
    pub true_unsafe: usize,
}

impl PrecisionRecall {
    pub fn evaluated(&self) -> usize {
        self.true_safe + self.false_safe + self.false_unsafe + self.true_unsafe
    }
}

/// Precision and recall of `pred > threshold` against a 0/1 truth raster.
pub fn precision_recall(pred: &GeoGrid, truth_safe: &GeoGrid, threshold: f64) -> Result<PrecisionRecall> {
    pred.geometry().require_same(truth_safe.geometry(), "precision_recall")?;
    let (mut ts, mut fs, mut fu, mut tu) = (0, 0, 0, 0);
    for i in 0..pred.values().len() {
        let (Some(p), Some(t)) = (pred.get_index(i), truth_safe.get_index(i)) else {
            continue;
        };
        match (p > threshold, t >= 0.5) {
            (true, true) => ts += 1,
            (true, false) => fs += 1,
            (false, true) => fu += 1,
            (false, false) => tu += 1,
        }
    }
    let ratio = |a: usize, b: usize| if a + b == 0 { f64::NAN } else { a as f64 / (a + b) as f64 };
    Ok(PrecisionRecall {
        precision: ratio(ts, fs),
        recall: ratio(ts, fu),
        true_safe: ts,
        false_safe: fs,
        false_unsafe: fu,
        true_unsafe: tu,
    })
}

/// Cellwise `truth - p` in `[-1, 1]`.
pub fn hazard_missing_map(truth_safe: &GeoGrid, pred_prob: &GeoGrid) -> Result<GeoGrid> {
    truth_safe.zip_with(pred_prob, |t, p| if t >= 0.5 { 1.0 - p } else { -p })
}

/// Copy of `grid` with cells whose centers lie within `width` of the grid
/// edge set to nodata.
pub fn mask_border(grid: &GeoGrid, width: f64) -> GeoGrid {
    let g = *grid.geometry();
    let (x0, y0, x1, y1) = g.extent();
    let mut out = grid.clone();
    for v in 0..g.nrows {
        for u in 0..g.ncols {
            let (x, y) = g.center(u, v);
            if x - x0 < width || x1 - x < width || y - y0 < width || y1 - y < width {
                out.set_nodata(u, v);
            }
        }
    }
    out
}
