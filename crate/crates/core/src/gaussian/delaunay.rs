// SPDX-License-Identifier: Apache-2.0

//! Sweep-hull incremental Delaunay triangulation with exact predicates.
//!
//! Points are inserted in order of increasing distance from the circumcenter
//! of a seed triangle (ties broken by index), each new point is connected to
//! the visible part of the advancing convex hull, and edges are legalized by
//! flipping. An edge is flipped only when the opposite point lies strictly
//! inside the circumcircle, so for cocircular input the diagonal created
//! first by the fixed insertion order is kept. Points within `2 * f64::EPSILON`
//! of the previously inserted point are skipped.

use robust::{incircle, orient2d, Coord};

use crate::error::{Error, Result};

const EMPTY: usize = usize::MAX;

#[inline]
fn next_he(e: usize) -> usize {
    if e % 3 == 2 {
        e - 2
    } else {
        e + 1
    }
}

#[inline]
fn prev_he(e: usize) -> usize {
    if e % 3 == 0 {
        e + 2
    } else {
        e - 1
    }
}

#[inline]
fn c(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

#[inline]
fn orient(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    orient2d(c(a), c(b), c(p))
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    dx * dx + dy * dy
}

fn circumdelta(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> (f64, f64) {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let (ex, ey) = (p[0] - a[0], p[1] - a[1]);
    let bl = dx * dx + dy * dy;
    let cl = ex * ex + ey * ey;
    let d = 0.5 / (dx * ey - dy * ex);
    ((ey * bl - dy * cl) * d, (dx * cl - ex * bl) * d)
}

/// Delaunay triangulation of a planar point set.
///
/// `triangles[t]` lists the vertex indices of triangle `t` counterclockwise.
/// `halfedges[3 * t + k]` is the twin of the edge from vertex `k` to vertex
/// `k + 1` of triangle `t`, or `None` on the convex hull.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triangulation {
    pub triangles: Vec<[usize; 3]>,
    pub halfedges: Vec<Option<usize>>,
    /// Convex hull vertices, counterclockwise.
    pub hull: Vec<usize>,
}

impl Triangulation {
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Each undirected edge once, as `(a, b)` vertex pairs.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.triangles.len() * 3).filter_map(move |e| {
            let twin = self.halfedges[e];
            if twin.is_some_and(|t| t < e) {
                return None;
            }
            let t = &self.triangles[e / 3];
            Some((t[e % 3], t[(e % 3 + 1) % 3]))
        })
    }

    /// Median horizontal edge length.
    pub fn median_edge_length(&self, points: &[[f64; 2]]) -> Option<f64> {
        let mut lens: Vec<f64> = self.edges().map(|(a, b)| dist2(points[a], points[b]).sqrt()).collect();
        if lens.is_empty() {
            return None;
        }
        let mid = lens.len() / 2;
        let (_, m, _) = lens.select_nth_unstable_by(mid, f64::total_cmp);
        Some(*m)
    }
}

struct Builder<'a> {
    points: &'a [[f64; 2]],
    triangles: Vec<usize>,
    halfedges: Vec<usize>,
    prev: Vec<usize>,
    next: Vec<usize>,
    tri: Vec<usize>,
    hash: Vec<usize>,
    start: usize,
    center: [f64; 2],
    stack: Vec<usize>,
}

impl Builder<'_> {
    fn hash_key(&self, p: [f64; 2]) -> usize {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let r = dx / (dx.abs() + dy.abs());
        let a = (if dy > 0.0 { 3.0 - r } else { 1.0 + r }) / 4.0;
        let len = self.hash.len();
        ((len as f64 * a).floor() as usize) % len
    }

    fn hash_edge(&mut self, i: usize) {
        let key = self.hash_key(self.points[i]);
        self.hash[key] = i;
    }

    fn add_triangle(&mut self, i0: usize, i1: usize, i2: usize, a: usize, b: usize, c: usize) -> usize {
        let t = self.triangles.len();
        self.triangles.extend_from_slice(&[i0, i1, i2]);
        self.halfedges.extend_from_slice(&[a, b, c]);
        for (k, h) in [a, b, c].into_iter().enumerate() {
            if h != EMPTY {
                self.halfedges[h] = t + k;
            }
        }
        t
    }

    fn link(&mut self, a: usize, b: usize) {
        self.halfedges[a] = b;
        if b != EMPTY {
            self.halfedges[b] = a;
        }
    }

    /// Restores the Delaunay property around halfedge `a`; returns the
    /// halfedge that ends at the newly inserted point.
    fn legalize(&mut self, mut a: usize) -> usize {
        let pts = self.points;
        let mut ar;
        loop {
            let b = self.halfedges[a];
            ar = prev_he(a);
            let illegal = b != EMPTY && {
                let al = next_he(a);
                let bl = prev_he(b);
                let p0 = pts[self.triangles[ar]];
                let pr = pts[self.triangles[a]];
                let pl = pts[self.triangles[al]];
                let p1 = pts[self.triangles[bl]];
                // Internal triangles are clockwise, so "strictly inside" is negative.
                incircle(c(p0), c(pr), c(pl), c(p1)) < 0.0
            };
            if !illegal {
                match self.stack.pop() {
                    Some(e) => {
                        a = e;
                        continue;
                    }
                    None => return ar,
                }
            }
            let bl = prev_he(b);
            let br = next_he(b);
            let p0 = self.triangles[ar];
            let p1 = self.triangles[bl];
            self.triangles[a] = p1;
            self.triangles[b] = p0;
            let hbl = self.halfedges[bl];
            let har = self.halfedges[ar];
            if hbl == EMPTY {
                let mut e = self.start;
                loop {
                    if self.tri[e] == bl {
                        self.tri[e] = a;
                        break;
                    }
                    e = self.prev[e];
                    if e == self.start {
                        break;
                    }
                }
            }
            self.link(a, hbl);
            self.link(b, har);
            self.link(ar, bl);
            self.stack.push(br);
        }
    }

    fn find_visible_edge(&self, p: [f64; 2]) -> Option<(usize, bool)> {
        let key = self.hash_key(p);
        let len = self.hash.len();
        let mut start = 0;
        for j in 0..len {
            start = self.hash[(key + j) % len];
            if start != EMPTY && self.next[start] != EMPTY {
                break;
            }
        }
        start = self.prev[start];
        let mut e = start;
        while orient(p, self.points[e], self.points[self.next[e]]) <= 0.0 {
            e = self.next[e];
            if e == start {
                return None;
            }
        }
        Some((e, e == start))
    }
}

fn seed_triangle(points: &[[f64; 2]]) -> Option<(usize, usize, usize)> {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    let mid = [(x0 + x1) / 2.0, (y0 + y1) / 2.0];
    let closest = |q: [f64; 2]| {
        let mut best = (EMPTY, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = dist2(q, *p);
            if d > 0.0 && d < best.1 {
                best = (i, d);
            }
        }
        (best.0 != EMPTY).then_some(best.0)
    };
    let i0 = closest(mid)?;
    let i1 = closest(points[i0])?;
    let mut best = (EMPTY, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        if i == i0 || i == i1 {
            continue;
        }
        let (dx, dy) = circumdelta(points[i0], points[i1], *p);
        let r = dx * dx + dy * dy;
        if r < best.1 {
            best = (i, r);
        }
    }
    if !best.1.is_finite() {
        return None;
    }
    let i2 = best.0;
    // The sweep works on clockwise triangles.
    Some(if orient(points[i0], points[i1], points[i2]) > 0.0 {
        (i0, i2, i1)
    } else {
        (i0, i1, i2)
    })
}

/// Triangulates `points`; fails when fewer than three points are not collinear.
pub fn delaunay_triangulate(points: &[[f64; 2]]) -> Result<Triangulation> {
    if let Some(i) = points.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite point {i}")));
    }
    let (i0, i1, i2) =
        seed_triangle(points).ok_or_else(|| Error::Degenerate("points are collinear or too few".into()))?;
    let n = points.len();
    let (dx, dy) = circumdelta(points[i0], points[i1], points[i2]);
    let center = [points[i0][0] + dx, points[i0][1] + dy];

    let mut b = Builder {
        points,
        triangles: Vec::with_capacity(6 * n),
        halfedges: Vec::with_capacity(6 * n),
        prev: vec![0; n],
        next: vec![0; n],
        tri: vec![0; n],
        hash: vec![EMPTY; ((n as f64).sqrt().ceil() as usize).max(1)],
        start: i0,
        center,
        stack: Vec::new(),
    };
    b.add_triangle(i0, i1, i2, EMPTY, EMPTY, EMPTY);
    b.next[i0] = i1;
    b.next[i1] = i2;
    b.next[i2] = i0;
    b.prev[i0] = i2;
    b.prev[i1] = i0;
    b.prev[i2] = i1;
    b.tri[i0] = 0;
    b.tri[i1] = 1;
    b.tri[i2] = 2;
    for i in [i0, i1, i2] {
        b.hash_edge(i);
    }

    let mut order: Vec<(usize, f64)> = points.iter().enumerate().map(|(i, p)| (i, dist2(center, *p))).collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let mut last: Option<[f64; 2]> = None;
    for &(i, _) in &order {
        let p = points[i];
        if last.is_some_and(|q| (p[0] - q[0]).abs() <= 2.0 * f64::EPSILON && (p[1] - q[1]).abs() <= 2.0 * f64::EPSILON)
        {
            continue;
        }
        last = Some(p);
        if i == i0 || i == i1 || i == i2 {
            continue;
        }
        let Some((mut e, walk_back)) = b.find_visible_edge(p) else {
            continue;
        };

        let t = b.add_triangle(e, i, b.next[e], EMPTY, EMPTY, b.tri[e]);
        b.tri[i] = b.legalize(t + 2);
        b.tri[e] = t;

        let mut nx = b.next[e];
        loop {
            let q = b.next[nx];
            if orient(p, points[nx], points[q]) <= 0.0 {
                break;
            }
            let t = b.add_triangle(nx, i, q, b.tri[i], EMPTY, b.tri[nx]);
            b.tri[i] = b.legalize(t + 2);
            b.next[nx] = EMPTY;
            nx = q;
        }
        if walk_back {
            loop {
                let q = b.prev[e];
                if orient(p, points[q], points[e]) <= 0.0 {
                    break;
                }
                let t = b.add_triangle(q, i, e, EMPTY, b.tri[e], b.tri[q]);
                b.legalize(t + 2);
                b.tri[q] = t;
                b.next[e] = EMPTY;
                e = q;
            }
        }
        b.prev[i] = e;
        b.next[i] = nx;
        b.prev[nx] = i;
        b.next[e] = i;
        b.start = e;
        b.hash_edge(i);
        b.hash_edge(e);
    }

    let mut hull = Vec::new();
    let mut e = b.start;
    loop {
        hull.push(e);
        e = b.next[e];
        if e == b.start {
            break;
        }
    }
    hull.reverse();

    // Flip every triangle to counterclockwise: (a, b, c) becomes (a, c, b),
    // which maps local halfedge k to 2 - k.
    let remap = |h: usize| 3 * (h / 3) + (2 - h % 3);
    let nt = b.triangles.len() / 3;
    let mut triangles = Vec::with_capacity(nt);
    let mut halfedges = vec![None; nt * 3];
    for t in 0..nt {
        let [p, q, r] = [b.triangles[3 * t], b.triangles[3 * t + 1], b.triangles[3 * t + 2]];
        triangles.push([p, r, q]);
        for k in 0..3 {
            let h = b.halfedges[3 * t + k];
            halfedges[remap(3 * t + k)] = (h != EMPTY).then(|| remap(h));
        }
    }
    Ok(Triangulation {
        triangles,
        halfedges,
        hull,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn audit(points: &[[f64; 2]], tri: &Triangulation) {
        for (t, v) in tri.triangles.iter().enumerate() {
            let [a, b, cc] = v.map(|i| points[i]);
            assert!(orient(a, b, cc) > 0.0, "triangle {t} not counterclockwise");
            for k in 0..3 {
                let e = 3 * t + k;
                if let Some(h) = tri.halfedges[e] {
                    assert_eq!(tri.halfedges[h], Some(e));
                    let o = &tri.triangles[h / 3];
                    assert_eq!(o[h % 3], v[(k + 1) % 3]);
                    assert_eq!(o[(h % 3 + 1) % 3], v[k]);
                }
            }
        }
    }

    fn empty_circle(points: &[[f64; 2]], tri: &Triangulation) {
        for v in &tri.triangles {
            let [a, b, cc] = v.map(|i| points[i]);
            for (i, p) in points.iter().enumerate() {
                if v.contains(&i) {
                    continue;
                }
                assert!(incircle(c(a), c(b), c(cc), c(*p)) <= 0.0, "point {i} inside circumcircle of {v:?}");
            }
        }
    }

    #[test]
    fn single_triangle() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let t = delaunay_triangulate(&pts).unwrap();
        assert_eq!(t.len(), 1);
        audit(&pts, &t);
        assert_eq!(t.hull.len(), 3);
    }

    #[test]
    fn square_is_deterministic() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let t = delaunay_triangulate(&pts).unwrap();
        assert_eq!(t.len(), 2);
        audit(&pts, &t);
        let diag: Vec<_> = t
            .edges()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .filter(|&e| e == (0, 2) || e == (1, 3))
            .collect();
        assert_eq!(diag, vec![(0, 2)]);
        assert_eq!(delaunay_triangulate(&pts).unwrap(), t);
    }

    #[test]
    fn collinear_rejected() {
        let pts: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
        assert!(matches!(delaunay_triangulate(&pts), Err(Error::Degenerate(_))));
        assert!(delaunay_triangulate(&[[0.0, 0.0], [1.0, 1.0]]).is_err());
    }

    #[test]
    fn random_points_are_delaunay() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<[f64; 2]> = (0..1500).map(|_| [rng.random::<f64>() * 50.0, rng.random::<f64>() * 30.0]).collect();
        let t = delaunay_triangulate(&pts).unwrap();
        audit(&pts, &t);
        empty_circle(&pts, &t);
        // Euler: 2n - 2 - h triangles for points in general position.
        assert_eq!(t.len(), 2 * pts.len() - 2 - t.hull.len());
    }

    #[test]
    fn lattice_with_duplicates() {
        let mut pts: Vec<[f64; 2]> = (0..400).map(|k| [(k % 20) as f64, (k / 20) as f64]).collect();
        pts.extend_from_within(0..50);
        let t = delaunay_triangulate(&pts).unwrap();
        audit(&pts, &t);
        empty_circle(&pts, &t);
        let area: f64 = t
            .triangles
            .iter()
            .map(|v| {
                let [a, b, cc] = v.map(|i| pts[i]);
                0.5 * orient(a, b, cc)
            })
            .sum();
        assert!((area - 361.0).abs() < 1e-9);
    }
}
