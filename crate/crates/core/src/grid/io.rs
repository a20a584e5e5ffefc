// SPDX-License-Identifier: Apache-2.0

//! Grid file formats.
//!
//! ASCII: six `key value` header lines (`ncols`, `nrows`, `xllcorner`,
//! `yllcorner`, `cellsize`, `NODATA_value`) followed by whitespace-separated
//! rows, northernmost row first. Values are printed with the shortest
//! representation that parses back to the same `f64`.
//!
//! Binary: the 8-byte magic `GGRID001`, then `ncols: u64`, `nrows: u64`,
//! `xllcorner`, `yllcorner`, `cellsize`, `nodata: f64`, then `ncols * nrows`
//! values as `f64`, all little-endian, rows in the same north-first order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{GeoGrid, GridGeometry};
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"GGRID001";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    Ascii,
    Binary,
}

impl GridFormat {
    /// `.bin` / `.grd` select binary, anything else ASCII.
    pub fn from_path(path: &Path) -> GridFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("grd") => GridFormat::Binary,
            _ => GridFormat::Ascii,
        }
    }
}

impl std::str::FromStr for GridFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ascii" | "asc" => Ok(GridFormat::Ascii),
            "binary" | "bin" => Ok(GridFormat::Binary),
            other => Err(Error::InvalidArgument(format!("unknown grid format {other:?}"))),
        }
    }
}

fn check_writable(grid: &GeoGrid) -> Result<()> {
    let nodata = grid.nodata_value();
    for (i, (&z, &ok)) in grid.values().iter().zip(grid.mask()).enumerate() {
        if ok && !z.is_finite() {
            return Err(Error::InvalidGrid(format!("non-finite value at index {i}")));
        }
        if ok && z == nodata {
            return Err(Error::InvalidGrid(format!(
                "valid value at index {i} equals nodata sentinel {nodata}"
            )));
        }
    }
    Ok(())
}

/// Serializes a grid into an in-memory buffer.
pub fn encode_grid(grid: &GeoGrid, format: GridFormat) -> Result<Vec<u8>> {
    check_writable(grid)?;
    let g = grid.geometry();
    let nodata = grid.nodata_value();
    let mut out = Vec::new();
    match format {
        GridFormat::Ascii => {
            let mut s = String::with_capacity(g.len() * 8 + 128);
            use std::fmt::Write as _;
            let _ = writeln!(s, "ncols {}", g.ncols);
            let _ = writeln!(s, "nrows {}", g.nrows);
            let _ = writeln!(s, "xllcorner {:?}", g.origin_x);
            let _ = writeln!(s, "yllcorner {:?}", g.origin_y);
            let _ = writeln!(s, "cellsize {:?}", g.cell_size);
            let _ = writeln!(s, "NODATA_value {:?}", nodata);
            for v in (0..g.nrows).rev() {
                for u in 0..g.ncols {
                    if u > 0 {
                        s.push(' ');
                    }
                    let z = grid.get(u, v).unwrap_or(nodata);
                    let _ = write!(s, "{z:?}");
                }
                s.push('\n');
            }
            out.extend_from_slice(s.as_bytes());
        }
        GridFormat::Binary => {
            out.reserve(8 + 48 + g.len() * 8);
            out.extend_from_slice(BINARY_MAGIC);
            out.extend_from_slice(&(g.ncols as u64).to_le_bytes());
            out.extend_from_slice(&(g.nrows as u64).to_le_bytes());
            for x in [g.origin_x, g.origin_y, g.cell_size, nodata] {
                out.extend_from_slice(&x.to_le_bytes());
            }
            for v in (0..g.nrows).rev() {
                for u in 0..g.ncols {
                    let z = grid.get(u, v).unwrap_or(nodata);
                    out.extend_from_slice(&z.to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

pub fn grid_write(grid: &GeoGrid, path: impl AsRef<Path>, format: GridFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_grid(grid, format)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads either format, detected from the leading magic bytes.
pub fn grid_read(path: impl AsRef<Path>) -> Result<GeoGrid> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_grid(&bytes).map_err(|reason| Error::format(path, reason))
}

pub fn decode_grid(bytes: &[u8]) -> std::result::Result<GeoGrid, String> {
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(bytes)
    } else {
        decode_ascii(bytes)
    }
}

fn assemble(geom: GridGeometry, nodata: f64, north_first: Vec<f64>) -> std::result::Result<GeoGrid, String> {
    if north_first.len() != geom.len() {
        return Err(format!(
            "dimension mismatch: header says {} x {} = {} cells, payload has {}",
            geom.ncols,
            geom.nrows,
            geom.len(),
            north_first.len()
        ));
    }
    let mut grid = GeoGrid::empty(geom)
        .and_then(|g| g.with_nodata_value(nodata))
        .map_err(|e| e.to_string())?;
    for (row, chunk) in north_first.chunks(geom.ncols).enumerate() {
        let v = geom.nrows - 1 - row;
        for (u, &z) in chunk.iter().enumerate() {
            if z != nodata && z.is_finite() {
                grid.set(u, v, z);
            }
        }
    }
    Ok(grid)
}

fn decode_binary(bytes: &[u8]) -> std::result::Result<GeoGrid, String> {
    const HEADER: usize = 8 + 6 * 8;
    if bytes.len() < HEADER {
        return Err("truncated binary header".into());
    }
    let word = |k: usize| -> [u8; 8] { bytes[8 + 8 * k..16 + 8 * k].try_into().unwrap() };
    let ncols = u64::from_le_bytes(word(0)) as usize;
    let nrows = u64::from_le_bytes(word(1)) as usize;
    let [x0, y0, cs, nodata] = [2, 3, 4, 5].map(|k| f64::from_le_bytes(word(k)));
    let geom = GridGeometry::new(x0, y0, cs, ncols, nrows).map_err(|e| e.to_string())?;
    let payload = &bytes[HEADER..];
    if payload.len() % 8 != 0 {
        return Err("payload is not a whole number of f64 values".into());
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    assemble(geom, nodata, values)
}

fn decode_ascii(bytes: &[u8]) -> std::result::Result<GeoGrid, String> {
    let reader = BufReader::new(bytes);
    let mut lines = reader.lines();
    let mut header = [None::<f64>; 6];
    const KEYS: [&str; 6] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];
    for _ in 0..6 {
        let line = lines
            .next()
            .ok_or("truncated header")?
            .map_err(|e| e.to_string())?;
        let mut parts = line.split_whitespace();
        let key = parts.next().ok_or("empty header line")?.to_ascii_lowercase();
        let value = parts.next().ok_or_else(|| format!("missing value for {key}"))?;
        let slot = KEYS
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| format!("unexpected header key {key:?}"))?;
        let parsed: f64 = value.parse().map_err(|_| format!("bad value {value:?} for {key}"))?;
        header[slot] = Some(parsed);
    }
    let [ncols, nrows, x0, y0, cs, nodata] = header;
    let get = |v: Option<f64>, k: &str| v.ok_or_else(|| format!("missing header key {k}"));
    let ncols = get(ncols, "ncols")?;
    let nrows = get(nrows, "nrows")?;
    if ncols.fract() != 0.0 || nrows.fract() != 0.0 || ncols < 1.0 || nrows < 1.0 {
        return Err(format!("dimensions must be positive integers, got {ncols} x {nrows}"));
    }
    let geom = GridGeometry::new(
        get(x0, "xllcorner")?,
        get(y0, "yllcorner")?,
        get(cs, "cellsize")?,
        ncols as usize,
        nrows as usize,
    )
    .map_err(|e| e.to_string())?;
    let nodata = get(nodata, "NODATA_value")?;
    let mut values = Vec::with_capacity(geom.len());
    for line in lines {
        let line = line.map_err(|e| e.to_string())?;
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| format!("bad value {tok:?}"))?);
        }
    }
    assemble(geom, nodata, values)
}
