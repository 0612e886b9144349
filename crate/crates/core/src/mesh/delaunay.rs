//! Bowyer–Watson Delaunay triangulation on exact orientation and in-circle
//! predicates.
//!
//! Points are inserted in index order. A point lying exactly on the
//! circumcircle of an existing triangle does not invalidate it, so among
//! cocircular configurations the diagonal formed by the earliest-inserted
//! vertices survives. Output faces have positive signed area.

use robust::{incircle, orient2d, Coord};

use crate::error::{Error, Result};

#[inline]
fn coord(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

/// Twice the signed area of `(a, b, c)`, exact sign.
pub fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    orient2d(coord(a), coord(b), coord(c))
}

/// Positive when `d` lies strictly inside the circumcircle of the positively
/// oriented triangle `(a, b, c)`.
pub fn in_circumcircle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    incircle(coord(a), coord(b), coord(c), coord(d))
}

pub fn delaunay(points: &[[f64; 2]]) -> Result<Vec<[usize; 3]>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::Degenerate(format!(
            "{n} points cannot be triangulated"
        )));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0);
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let big = extent * 1e6;
    let mut verts: Vec<[f64; 2]> = points.to_vec();
    verts.push([mid[0] - 2.0 * big, mid[1] - big]);
    verts.push([mid[0] + 2.0 * big, mid[1] - big]);
    verts.push([mid[0], mid[1] + 2.0 * big]);

    let mut tris: Vec<[usize; 3]> = vec![positive(&verts, [n, n + 1, n + 2])];
    let mut bad = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for k in 0..n {
        let p = verts[k];
        bad.clear();
        for (t, tri) in tris.iter().enumerate() {
            if in_circumcircle(verts[tri[0]], verts[tri[1]], verts[tri[2]], p) > 0.0 {
                bad.push(t);
            }
        }
        edges.clear();
        for &t in &bad {
            let tri = tris[t];
            for e in 0..3 {
                edges.push((tri[e], tri[(e + 1) % 3]));
            }
        }
        // Cavity boundary: directed edges whose reverse is not in the cavity.
        let boundary: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| !edges.contains(&(b, a)))
            .collect();
        for &t in bad.iter().rev() {
            tris.swap_remove(t);
        }
        for (a, b) in boundary {
            tris.push([a, b, k]);
        }
    }

    let mut faces: Vec<[usize; 3]> = tris
        .into_iter()
        .filter(|t| t.iter().all(|&v| v < n))
        .filter(|t| orient(points[t[0]], points[t[1]], points[t[2]]) > 0.0)
        .map(canonical)
        .collect();
    if faces.is_empty() {
        return Err(Error::Degenerate("all points are collinear".into()));
    }
    faces.sort_unstable();
    Ok(faces)
}

fn positive(verts: &[[f64; 2]], t: [usize; 3]) -> [usize; 3] {
    if orient(verts[t[0]], verts[t[1]], verts[t[2]]) > 0.0 {
        t
    } else {
        [t[0], t[2], t[1]]
    }
}

/// Rotates the index triple so the smallest index comes first, keeping
/// orientation.
fn canonical(t: [usize; 3]) -> [usize; 3] {
    let k = (0..3).min_by_key(|&k| t[k]).unwrap();
    [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
}
