// SPDX-License-Identifier: Apache-2.0

//! Triangle scan conversion onto cell centers.
//!
//! A center belongs to a triangle when it lies strictly inside, or on an edge
//! the triangle owns under the top-left rule: with counterclockwise vertices
//! and y pointing up, a triangle owns its left edges (running downward) and
//! its top edges (horizontal, running toward -x). Two triangles sharing an
//! edge traverse it in opposite directions, so exactly one of them owns it.
//! Membership uses exact orientation predicates, so the partition holds for
//! any floating-point input.

use robust::{orient2d, Coord};

use crate::grid::GridGeometry;

#[inline]
fn owns_edge(a: [f64; 2], b: [f64; 2]) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    dy < 0.0 || (dy == 0.0 && dx < 0.0)
}

/// Exact membership test for a counterclockwise triangle.
#[inline]
pub fn covers(tri: &[[f64; 2]; 3], p: [f64; 2]) -> bool {
    (0..3).all(|k| {
        let (a, b) = (tri[k], tri[(k + 1) % 3]);
        let o = orient2d(Coord { x: a[0], y: a[1] }, Coord { x: b[0], y: b[1] }, Coord { x: p[0], y: p[1] });
        o > 0.0 || (o == 0.0 && owns_edge(a, b))
    })
}

/// Cells whose centers the triangle owns, row by row from the south.
/// Vertex order may be either orientation; degenerate triangles own nothing.
pub fn rasterize_triangle(tri: &[[f64; 2]; 3], geom: &GridGeometry) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for_each_cell(tri, geom, |u, v| out.push((u, v)));
    out
}

pub(crate) fn for_each_cell(tri: &[[f64; 2]; 3], geom: &GridGeometry, mut f: impl FnMut(usize, usize)) {
    let o = orient2d(
        Coord { x: tri[0][0], y: tri[0][1] },
        Coord { x: tri[1][0], y: tri[1][1] },
        Coord { x: tri[2][0], y: tri[2][1] },
    );
    if o == 0.0 {
        return;
    }
    let t = if o > 0.0 { *tri } else { [tri[0], tri[2], tri[1]] };
    let cs = geom.cell_size;
    let ymin = t.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let ymax = t.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    let xmin = t.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let xmax = t.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let row = |y: f64| (y - geom.origin_y) / cs - 0.5;
    let col = |x: f64| (x - geom.origin_x) / cs - 0.5;
    let clamp = |s: f64, n: usize| s.max(0.0).min(n as f64 - 1.0);
    if row(ymax) < 0.0 || row(ymin) > (geom.nrows - 1) as f64 || col(xmax) < 0.0 || col(xmin) > (geom.ncols - 1) as f64 {
        return;
    }
    let v0 = clamp(row(ymin).floor(), geom.nrows) as usize;
    let v1 = clamp(row(ymax).ceil(), geom.nrows) as usize;
    for v in v0..=v1 {
        let y = geom.origin_y + (v as f64 + 0.5) * cs;
        // Span of the scanline inside the triangle, widened by a cell so the
        // exact test below settles every borderline center.
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let (ya, yb) = (a[1].min(b[1]), a[1].max(b[1]));
            if y < ya || y > yb {
                continue;
            }
            if ya == yb {
                lo = lo.min(a[0].min(b[0]));
                hi = hi.max(a[0].max(b[0]));
            } else {
                let x = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        if lo > hi {
            continue;
        }
        let (cl, ch) = (col(lo.max(xmin)).floor() - 1.0, col(hi.min(xmax)).ceil() + 1.0);
        if ch < 0.0 || cl > (geom.ncols - 1) as f64 {
            continue;
        }
        let (u0, u1) = (clamp(cl, geom.ncols) as usize, clamp(ch, geom.ncols) as usize);
        for u in u0..=u1 {
            let x = geom.origin_x + (u as f64 + 0.5) * cs;
            if covers(&t, [x, y]) {
                f(u, v);
            }
        }
    }
}
