// SPDX-License-Identifier: Apache-2.0

//! Point clouds: `(x, y, z)` samples sharing one elevation noise level.
//!
//! CSV files carry a `x,y,z` header. The binary stream is the magic
//! `PCLOUD01`, a `u64` point count, `sigma_eps: f64`, then `x, y, z` triples,
//! all little-endian.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CLOUD_MAGIC: &[u8; 8] = b"PCLOUD01";

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
    sigma_eps: f64,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>, sigma_eps: f64) -> Result<Self> {
        if !(sigma_eps >= 0.0) || !sigma_eps.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma_eps must be >= 0, got {sigma_eps}")));
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidArgument(format!("non-finite coordinate in point {i}")));
        }
        Ok(PointCloud { points, sigma_eps })
    }

    #[inline]
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn sigma_eps(&self) -> f64 {
        self.sigma_eps
    }

    pub fn with_sigma_eps(mut self, sigma_eps: f64) -> Result<Self> {
        if !(sigma_eps >= 0.0) || !sigma_eps.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma_eps must be >= 0, got {sigma_eps}")));
        }
        self.sigma_eps = sigma_eps;
        Ok(self)
    }

    /// Horizontal bounding box `(xmin, ymin, xmax, ymax)`.
    pub fn bounds(&self) -> Option<(f64, f64, f64, f64)> {
        let first = self.points.first()?;
        Some(self.points.iter().fold(
            (first[0], first[1], first[0], first[1]),
            |(x0, y0, x1, y1), p| (x0.min(p[0]), y0.min(p[1]), x1.max(p[0]), y1.max(p[1])),
        ))
    }

    pub fn xy(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| [p[0], p[1]]).collect()
    }

    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::with_capacity(16 + self.points.len() * 40);
        s.push_str("x,y,z\n");
        for p in &self.points {
            let _ = writeln!(s, "{:?},{:?},{:?}", p[0], p[1], p[2]);
        }
        s
    }

    /// Parses CSV text; `sigma_eps` is not stored in CSV and must be supplied.
    pub fn from_csv(text: &str, sigma_eps: f64) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or("empty file")?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["x", "y", "z"] {
            return Err(format!("expected header x,y,z, got {header:?}"));
        }
        let mut points = Vec::new();
        for (n, line) in lines.enumerate() {
            let mut p = [0.0; 3];
            let mut fields = line.split(',');
            for c in &mut p {
                let tok = fields.next().ok_or_else(|| format!("line {}: too few fields", n + 2))?;
                *c = tok
                    .trim()
                    .parse()
                    .map_err(|_| format!("line {}: bad number {tok:?}", n + 2))?;
            }
            if fields.next().is_some() {
                return Err(format!("line {}: too many fields", n + 2));
            }
            points.push(p);
        }
        PointCloud::new(points, sigma_eps).map_err(|e| e.to_string())
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.points.len() * 24);
        out.extend_from_slice(CLOUD_MAGIC);
        out.extend_from_slice(&(self.points.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.sigma_eps.to_le_bytes());
        for p in &self.points {
            for c in p {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 24 || !bytes.starts_with(CLOUD_MAGIC) {
            return Err("missing point cloud header".into());
        }
        let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let sigma = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let payload = &bytes[24..];
        if payload.len() != n.checked_mul(24).ok_or("point count overflow")? {
            return Err(format!("header declares {n} points, payload has {} bytes", payload.len()));
        }
        let points = payload
            .chunks_exact(24)
            .map(|c| {
                let f = |k: usize| f64::from_le_bytes(c[8 * k..8 * k + 8].try_into().unwrap());
                [f(0), f(1), f(2)]
            })
            .collect();
        PointCloud::new(points, sigma).map_err(|e| e.to_string())
    }

    /// Writes CSV unless the extension is `.bin`.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = if is_binary_path(path) {
            self.to_binary()
        } else {
            self.to_csv().into_bytes()
        };
        File::create(path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(|e| Error::io(path, e))
    }

    /// Reads either format; `sigma_eps` applies to CSV input only.
    pub fn read(path: impl AsRef<Path>, sigma_eps: f64) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let parsed = if bytes.starts_with(CLOUD_MAGIC) {
            PointCloud::from_binary(&bytes)
        } else {
            std::str::from_utf8(&bytes)
                .map_err(|_| "not valid UTF-8".to_string())
                .and_then(|s| PointCloud::from_csv(s, sigma_eps))
        };
        parsed.map_err(|reason| Error::format(path, reason))
    }
}

fn is_binary_path(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()) == Some("bin")
}
