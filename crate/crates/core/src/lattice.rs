//! Voronoi neighbourhood over monitoring sites.
//!
//! Each site's cell is the clip box intersected with the half-planes closer to
//! it than to any other site. All clipping happens in exact rational
//! arithmetic: every cell vertex is the intersection of two input lines
//! (perpendicular bisectors or box sides), computed straight from the line
//! coefficients, so no rounding ever decides whether two cells touch. Two
//! sites are neighbours iff their cells share a boundary segment of positive
//! length; cells that meet in a single point are not adjacent.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Site;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("need at least 2 sites, got {0}")]
    TooFewSites(usize),
    #[error("sites {0} and {1} coincide")]
    DuplicateSites(usize, usize),
    #[error("clip box is degenerate or does not strictly contain every site")]
    DegenerateBox,
    #[error("site coordinates must be finite (site {0})")]
    NonFinite(usize),
    #[error("index {index} out of range for {n} cells")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("self edge at {0}")]
    SelfEdge(usize),
}

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl ClipBox {
    /// Bounding box of the points inflated by a quarter of its extent on
    /// every side. A zero extent borrows the other axis.
    pub fn around(points: &[(f64, f64)]) -> ClipBox {
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in points {
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
        }
        let (w, h) = (max_x - min_x, max_y - min_y);
        let wx = if w > 0.0 { w } else if h > 0.0 { h } else { 1.0 };
        let wy = if h > 0.0 { h } else { wx };
        ClipBox {
            min_x: min_x - 0.25 * wx,
            min_y: min_y - 0.25 * wy,
            max_x: max_x + 0.25 * wx,
            max_y: max_y + 0.25 * wy,
        }
    }

    fn strictly_contains(&self, x: f64, y: f64) -> bool {
        x > self.min_x && x < self.max_x && y > self.min_y && y < self.max_y
    }
}

/// Undirected neighbour structure. Edges are stored once as `(i, j)` with
/// `i < j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adjacency {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    polygons: Option<Vec<Vec<(f64, f64)>>>,
}

impl Adjacency {
    fn from_set(n: usize, set: BTreeSet<(usize, usize)>, polygons: Option<Vec<Vec<(f64, f64)>>>) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &set {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Adjacency {
            n,
            edges: set.into_iter().collect(),
            neighbors,
            polygons,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sorted neighbour list; panics on an out-of-range index. See
    /// [`neighbors_of`] for the checked form.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i.min(j), i.max(j))).is_ok()
    }

    /// Clipped cell polygons (counter-clockwise, not closed), when the
    /// adjacency came from geometry.
    pub fn polygons(&self) -> Option<&[Vec<(f64, f64)>]> {
        self.polygons.as_deref()
    }

    /// `width × height` 4-neighbour grid, row-major.
    pub fn grid(width: usize, height: usize) -> Adjacency {
        let mut set = BTreeSet::new();
        for r in 0..height {
            for c in 0..width {
                let i = r * width + c;
                if c + 1 < width {
                    set.insert((i, i + 1));
                }
                if r + 1 < height {
                    set.insert((i, i + width));
                }
            }
        }
        Adjacency::from_set(width * height, set, None)
    }

    pub fn path(n: usize) -> Adjacency {
        Adjacency::from_set(n, (1..n).map(|i| (i - 1, i)).collect(), None)
    }

    pub fn cycle(n: usize) -> Adjacency {
        let mut set: BTreeSet<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n > 2 {
            set.insert((0, n - 1));
        }
        Adjacency::from_set(n, set, None)
    }
}

/// Builds an adjacency from an explicit edge list, deduplicating orientation.
pub fn adjacency_from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Adjacency, LatticeError> {
    let mut set = BTreeSet::new();
    for &(i, j) in edges {
        for index in [i, j] {
            if index >= n {
                return Err(LatticeError::IndexOutOfRange { index, n });
            }
        }
        if i == j {
            return Err(LatticeError::SelfEdge(i));
        }
        set.insert((i.min(j), i.max(j)));
    }
    Ok(Adjacency::from_set(n, set, None))
}

pub fn neighbors_of(a: &Adjacency, i: usize) -> Result<Vec<usize>, LatticeError> {
    if i >= a.n {
        return Err(LatticeError::IndexOutOfRange { index: i, n: a.n });
    }
    Ok(a.neighbors[i].clone())
}

// ---------------------------------------------------------------------------
// Exact geometry

type Q = BigRational;

/// Line `a·x + b·y = c`; the kept half-plane is `a·x + b·y ≤ c`.
#[derive(Clone, Debug)]
struct Line {
    a: Q,
    b: Q,
    c: Q,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tag {
    Box,
    Site(usize),
}

#[derive(Clone, Debug)]
struct Vertex {
    x: Q,
    y: Q,
    /// Line supporting the edge from this vertex to the next.
    edge: usize,
}

fn q(v: f64) -> Q {
    Q::from_float(v).expect("finite coordinate")
}

fn side(line: &Line, x: &Q, y: &Q) -> Q {
    &line.a * x + &line.b * y - &line.c
}

fn intersect(l1: &Line, l2: &Line) -> (Q, Q) {
    let det = &l1.a * &l2.b - &l1.b * &l2.a;
    debug_assert!(!det.is_zero(), "parallel lines never cross a kept edge");
    let x = (&l1.c * &l2.b - &l1.b * &l2.c) / &det;
    let y = (&l1.a * &l2.c - &l1.c * &l2.a) / det;
    (x, y)
}

/// Clips a convex polygon by the half-plane of `lines[clip]`.
fn clip(poly: Vec<Vertex>, lines: &[Line], clip: usize) -> Vec<Vertex> {
    let line = &lines[clip];
    let sides: Vec<Q> = poly.iter().map(|v| side(line, &v.x, &v.y)).collect();
    if sides.iter().all(|s| !s.is_positive()) {
        return poly;
    }
    let m = poly.len();
    let mut out = Vec::with_capacity(m + 1);
    for k in 0..m {
        let cur = &poly[k];
        let (s_cur, s_nxt) = (&sides[k], &sides[(k + 1) % m]);
        let cur_in = !s_cur.is_positive();
        let nxt_in = !s_nxt.is_positive();
        match (cur_in, nxt_in) {
            (true, true) => out.push(cur.clone()),
            (true, false) => {
                if s_cur.is_negative() {
                    out.push(cur.clone());
                    let (x, y) = intersect(&lines[cur.edge], line);
                    out.push(Vertex { x, y, edge: clip });
                } else {
                    out.push(Vertex {
                        x: cur.x.clone(),
                        y: cur.y.clone(),
                        edge: clip,
                    });
                }
            }
            (false, true) => {
                if s_nxt.is_negative() {
                    let (x, y) = intersect(&lines[cur.edge], line);
                    out.push(Vertex { x, y, edge: cur.edge });
                }
            }
            (false, false) => {}
        }
    }
    out
}

/// Computes the clipped Voronoi tessellation and its adjacency.
pub fn build_voronoi_adjacency(sites: &[Site], clip_box: Option<ClipBox>) -> Result<Adjacency, LatticeError> {
    let points: Vec<(f64, f64)> = sites.iter().map(|s| (s.x, s.y)).collect();
    voronoi_adjacency(&points, clip_box)
}

pub fn voronoi_adjacency(points: &[(f64, f64)], clip_box: Option<ClipBox>) -> Result<Adjacency, LatticeError> {
    let n = points.len();
    if n < 2 {
        return Err(LatticeError::TooFewSites(n));
    }
    for (i, &(x, y)) in points.iter().enumerate() {
        if !x.is_finite() || !y.is_finite() {
            return Err(LatticeError::NonFinite(i));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (dx, dy) = (points[i].0 - points[j].0, points[i].1 - points[j].1);
            if (dx * dx + dy * dy).sqrt() <= 1e-9 {
                return Err(LatticeError::DuplicateSites(i, j));
            }
        }
    }
    let bx = clip_box.unwrap_or_else(|| ClipBox::around(points));
    if !(bx.max_x > bx.min_x && bx.max_y > bx.min_y) || !points.iter().all(|&(x, y)| bx.strictly_contains(x, y)) {
        return Err(LatticeError::DegenerateBox);
    }

    let zero = Q::zero();
    let one = Q::from_integer(BigInt::from(1));
    let px: Vec<(Q, Q)> = points.iter().map(|&(x, y)| (q(x), q(y))).collect();

    let mut polygons = Vec::with_capacity(n);
    let mut set = BTreeSet::new();
    for i in 0..n {
        // Lines 0..4 are the box sides (bottom, right, top, left); line 4 + m
        // is the bisector against the m-th other site.
        let mut lines = vec![
            Line { a: zero.clone(), b: -one.clone(), c: -q(bx.min_y) },
            Line { a: one.clone(), b: zero.clone(), c: q(bx.max_x) },
            Line { a: zero.clone(), b: one.clone(), c: q(bx.max_y) },
            Line { a: -one.clone(), b: zero.clone(), c: -q(bx.min_x) },
        ];
        let mut tags = vec![Tag::Box; 4];
        let (xi, yi) = &px[i];
        for (j, (xj, yj)) in px.iter().enumerate() {
            if j == i {
                continue;
            }
            // |p - p_i|² ≤ |p - p_j|²  ⇔  2(p_j - p_i)·p ≤ |p_j|² - |p_i|²
            let two = Q::from_integer(BigInt::from(2));
            lines.push(Line {
                a: &two * (xj - xi),
                b: &two * (yj - yi),
                c: xj * xj + yj * yj - xi * xi - yi * yi,
            });
            tags.push(Tag::Site(j));
        }

        let corner = |x: f64, y: f64, edge: usize| Vertex { x: q(x), y: q(y), edge };
        let mut poly = vec![
            corner(bx.min_x, bx.min_y, 0),
            corner(bx.max_x, bx.min_y, 1),
            corner(bx.max_x, bx.max_y, 2),
            corner(bx.min_x, bx.max_y, 3),
        ];
        for l in 4..lines.len() {
            poly = clip(poly, &lines, l);
        }

        let m = poly.len();
        for k in 0..m {
            let (a, b) = (&poly[k], &poly[(k + 1) % m]);
            if let Tag::Site(j) = tags[a.edge] {
                if a.x != b.x || a.y != b.y {
                    set.insert((i.min(j), i.max(j)));
                }
            }
        }
        polygons.push(
            poly.iter()
                .map(|v| (v.x.to_f64().unwrap_or(f64::NAN), v.y.to_f64().unwrap_or(f64::NAN)))
                .collect(),
        );
    }
    Ok(Adjacency::from_set(n, set, Some(polygons)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sites_touch() {
        let a = voronoi_adjacency(&[(0.0, 0.0), (1.0, 0.3)], None).unwrap();
        assert_eq!(a.edges(), &[(0, 1)]);
        assert_eq!(a.polygons().unwrap().len(), 2);
    }

    #[test]
    fn collinear_sites_form_a_path() {
        let a = voronoi_adjacency(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], None).unwrap();
        assert_eq!(a.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn square_corners_exclude_diagonals() {
        let a = voronoi_adjacency(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], None).unwrap();
        assert_eq!(a.edges(), &[(0, 1), (0, 3), (1, 2), (2, 3)]);
        // Every cell is a quadrant with the shared corner at the centre.
        for poly in a.polygons().unwrap() {
            assert_eq!(poly.len(), 4);
            assert!(poly.contains(&(0.5, 0.5)));
        }
    }

    #[test]
    fn bad_geometry_is_rejected() {
        assert_eq!(
            voronoi_adjacency(&[(0.0, 0.0), (0.0, 0.0)], None),
            Err(LatticeError::DuplicateSites(0, 1))
        );
        let tight = ClipBox { min_x: 0.0, min_y: -1.0, max_x: 2.0, max_y: 1.0 };
        assert_eq!(
            voronoi_adjacency(&[(0.0, 0.0), (1.0, 0.0)], Some(tight)),
            Err(LatticeError::DegenerateBox)
        );
        assert_eq!(voronoi_adjacency(&[(0.0, 0.0)], None), Err(LatticeError::TooFewSites(1)));
    }

    #[test]
    fn explicit_edges() {
        let a = adjacency_from_edges(4, &[(0, 1), (1, 0), (1, 2)]).unwrap();
        assert_eq!(a.edges(), &[(0, 1), (1, 2)]);
        assert!(a.polygons().is_none());
        assert_eq!(adjacency_from_edges(3, &[(2, 2)]), Err(LatticeError::SelfEdge(2)));
        assert_eq!(
            adjacency_from_edges(3, &[(0, 3)]),
            Err(LatticeError::IndexOutOfRange { index: 3, n: 3 })
        );
        assert_eq!(adjacency_from_edges(2, &[]).unwrap().n_edges(), 0);
    }

    #[test]
    fn neighbour_lists() {
        assert_eq!(neighbors_of(&Adjacency::path(3), 1).unwrap(), vec![0, 2]);
        let isolated = adjacency_from_edges(3, &[(0, 1)]).unwrap();
        assert!(neighbors_of(&isolated, 2).unwrap().is_empty());
        assert_eq!(neighbors_of(&Adjacency::cycle(4), 0).unwrap(), vec![1, 3]);
        assert!(neighbors_of(&Adjacency::cycle(4), 4).is_err());
    }
}
