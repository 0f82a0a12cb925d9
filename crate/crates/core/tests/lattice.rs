use std::collections::BTreeMap;

use landmix::lattice::{voronoi_adjacency, Adjacency, ClipBox};
use proptest::prelude::*;

const PIXELS: usize = 500;

fn nearest(points: &[(f64, f64)], x: f64, y: f64) -> usize {
    (0..points.len())
        .min_by(|&a, &b| {
            let da = (points[a].0 - x).powi(2) + (points[a].1 - y).powi(2);
            let db = (points[b].0 - x).powi(2) + (points[b].1 - y).powi(2);
            da.total_cmp(&db)
        })
        .unwrap()
}

/// Number of 4-neighbour pixel contacts between every pair of cells.
fn pixel_contacts(points: &[(f64, f64)], bx: &ClipBox) -> BTreeMap<(usize, usize), usize> {
    let (w, h) = (bx.max_x - bx.min_x, bx.max_y - bx.min_y);
    let mut owner = vec![0usize; PIXELS * PIXELS];
    for r in 0..PIXELS {
        for c in 0..PIXELS {
            let x = bx.min_x + (c as f64 + 0.5) / PIXELS as f64 * w;
            let y = bx.min_y + (r as f64 + 0.5) / PIXELS as f64 * h;
            owner[r * PIXELS + c] = nearest(points, x, y);
        }
    }
    let mut contacts = BTreeMap::new();
    for r in 0..PIXELS {
        for c in 0..PIXELS {
            let a = owner[r * PIXELS + c];
            let mut touch = |b: usize| {
                if a != b {
                    *contacts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
                }
            };
            if c + 1 < PIXELS {
                touch(owner[r * PIXELS + c + 1]);
            }
            if r + 1 < PIXELS {
                touch(owner[(r + 1) * PIXELS + c]);
            }
        }
    }
    contacts
}

fn dist(p: (f64, f64), q: (f64, f64)) -> f64 {
    ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
}

/// Length of the boundary of cell `i` that lies on its bisector with `j`.
fn shared_length(points: &[(f64, f64)], polygon: &[(f64, f64)], i: usize, j: usize) -> f64 {
    let scale = dist(points[i], points[j]);
    let on_bisector = |p: (f64, f64)| (dist(p, points[i]) - dist(p, points[j])).abs() <= 1e-9 * (1.0 + scale);
    let m = polygon.len();
    (0..m)
        .map(|e| (polygon[e], polygon[(e + 1) % m]))
        .filter(|&(p, q)| on_bisector(p) && on_bisector(q))
        .map(|(p, q)| dist(p, q))
        .sum()
}

fn distinct(points: &[(f64, f64)]) -> bool {
    points
        .iter()
        .enumerate()
        .all(|(i, p)| points[..i].iter().all(|q| dist(*p, *q) > 0.05))
}

fn site_sets() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3..9).prop_filter("well separated", |p| distinct(p))
}

fn symmetric(a: &Adjacency) -> bool {
    (0..a.n()).all(|i| a.neighbors(i).iter().all(|&j| j != i && a.neighbors(j).contains(&i)))
}

#[test]
fn regular_grid_of_sites_is_four_connected() {
    let points: Vec<(f64, f64)> = (0..12).map(|i| ((i % 4) as f64, (i / 4) as f64)).collect();
    let a = voronoi_adjacency(&points, None).unwrap();
    assert_eq!(a.edges(), Adjacency::grid(4, 3).edges());
}

#[test]
fn polygons_tile_the_box() {
    let points = [(0.1, 0.2), (0.7, 0.3), (0.4, 0.9), (0.5, 0.5), (0.9, 0.8)];
    let bx = ClipBox { min_x: -1.0, min_y: -1.0, max_x: 2.0, max_y: 2.0 };
    let a = voronoi_adjacency(&points, Some(bx)).unwrap();
    let area: f64 = a
        .polygons()
        .unwrap()
        .iter()
        .map(|poly| {
            let m = poly.len();
            0.5 * (0..m)
                .map(|e| poly[e].0 * poly[(e + 1) % m].1 - poly[(e + 1) % m].0 * poly[e].1)
                .sum::<f64>()
        })
        .sum();
    assert!((area - 9.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn agrees_with_pixel_nearest_site_oracle(points in site_sets()) {
        let bx = ClipBox::around(&points);
        let a = voronoi_adjacency(&points, Some(bx)).unwrap();
        prop_assert!(symmetric(&a));
        let contacts = pixel_contacts(&points, &bx);
        let pixel = ((bx.max_x - bx.min_x) / PIXELS as f64).max((bx.max_y - bx.min_y) / PIXELS as f64);
        for (&(i, j), &count) in &contacts {
            if count >= 5 {
                prop_assert!(a.contains(i, j), "pixel contact {i}-{j} ({count}) missing");
            }
        }
        let polygons = a.polygons().unwrap();
        for &(i, j) in a.edges() {
            let len = shared_length(&points, &polygons[i], i, j);
            prop_assert!(len > 0.0, "edge {i}-{j} has no shared boundary");
            if len > 6.0 * pixel {
                prop_assert!(contacts.contains_key(&(i, j)), "edge {i}-{j} of length {len} not seen");
            }
        }
    }

    #[test]
    fn invariant_under_translation_and_scaling(
        points in site_sets(),
        shift in (-100.0f64..100.0, -100.0f64..100.0),
        scale in 0.01f64..100.0,
    ) {
        let base = voronoi_adjacency(&points, None).unwrap();
        let moved: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (scale * x + shift.0, scale * y + shift.1)).collect();
        let other = voronoi_adjacency(&moved, None).unwrap();
        prop_assert_eq!(base.edges(), other.edges());
    }

    #[test]
    fn relabelling_sites_permutes_edges(points in site_sets()) {
        let n = points.len();
        let reversed: Vec<(f64, f64)> = points.iter().rev().copied().collect();
        let a = voronoi_adjacency(&points, None).unwrap();
        let b = voronoi_adjacency(&reversed, None).unwrap();
        for &(i, j) in a.edges() {
            prop_assert!(b.contains(n - 1 - i, n - 1 - j));
        }
        prop_assert_eq!(a.n_edges(), b.n_edges());
    }
}
