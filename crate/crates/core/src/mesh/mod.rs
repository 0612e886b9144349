//! Per-image deformable triangle meshes over the labeled correspondences,
//! the deformation losses and dense barycentric warping.

pub mod delaunay;
pub mod rigid;
pub mod warp;

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::scene::{ImageRecord, Pixel};
pub use rigid::{best_fit_rigid_2d, Rigid2D, RigidFit};
pub use warp::{warp_dense, Warped};

/// Minimum face area, as a fraction of the face's area at construction.
pub const FLIP_AREA_FRACTION: f64 = 0.10;

/// Labeled points closer than this (pixels) to an earlier vertex are merged.
pub const MERGE_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshTopology {
    pub width: usize,
    pub height: usize,
    /// Vertex positions at construction, pixels.
    pub vertices0: Vec<Pixel>,
    /// Faces with positive signed area at construction.
    pub faces: Vec<[usize; 3]>,
    /// Signed area per face at construction, square pixels.
    pub areas0: Vec<f64>,
    /// `true` for synthetic vertices added along the image border.
    pub boundary: Vec<bool>,
}

/// Result of [`triangulate`]: the topology plus, for every input point, the
/// vertex it became (after merging near-duplicates).
#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    pub topology: MeshTopology,
    pub point_vertex: Vec<usize>,
}

/// Signed area `½ (b − a) × (c − a)`, positive for the orientation used by
/// every constructed face.
#[inline]
pub fn signed_area<T: Real>(a: [T; 2], b: [T; 2], c: [T; 2]) -> T {
    ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])) * 0.5
}

/// Image corners plus evenly spaced points along each border, at most
/// `min(w, h) / 4` apart.
pub fn boundary_vertices(width: usize, height: usize) -> Vec<Pixel> {
    let (w, h) = ((width - 1) as f64, (height - 1) as f64);
    let spacing = (width.min(height) as f64 / 4.0).max(1.0);
    let mut out = Vec::new();
    let corners = [[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]];
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let segs = ((len / spacing).ceil() as usize).max(1);
        for s in 0..segs {
            let t = s as f64 / segs as f64;
            let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}

/// Delaunay mesh over `points`, optionally augmented with border vertices so
/// that the whole image is covered. Border vertices come first in the vertex
/// list.
pub fn triangulate(
    points: &[Pixel],
    dims: (usize, usize),
    with_boundary: bool,
) -> Result<Triangulation> {
    let (width, height) = dims;
    if width == 0 || height == 0 {
        return Err(Error::Degenerate(format!("image size {width}x{height}")));
    }
    let mut vertices: Vec<Pixel> = Vec::new();
    let mut boundary = Vec::new();
    if with_boundary {
        if width < 2 || height < 2 {
            return Err(Error::Degenerate(format!("image size {width}x{height}")));
        }
        vertices = boundary_vertices(width, height);
        boundary = vec![true; vertices.len()];
    }
    let mut point_vertex = Vec::with_capacity(points.len());
    for (k, p) in points.iter().enumerate() {
        let near = vertices.iter().position(|q| {
            (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) <= MERGE_RADIUS * MERGE_RADIUS
        });
        match near {
            Some(v) => {
                log::warn!(
                    "point {k} at ({:.2}, {:.2}) merged into vertex {v} at ({:.2}, {:.2})",
                    p[0],
                    p[1],
                    vertices[v][0],
                    vertices[v][1]
                );
                point_vertex.push(v);
            }
            None => {
                point_vertex.push(vertices.len());
                vertices.push(*p);
                boundary.push(false);
            }
        }
    }
    let faces = delaunay::delaunay(&vertices)?;
    let areas0 = faces
        .iter()
        .map(|f| signed_area(vertices[f[0]], vertices[f[1]], vertices[f[2]]))
        .collect();
    Ok(Triangulation {
        topology: MeshTopology {
            width,
            height,
            vertices0: vertices,
            faces,
            areas0,
            boundary,
        },
        point_vertex,
    })
}

/// A mesh together with its optimized state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformableMesh {
    pub topology: MeshTopology,
    /// Depth sampled at each construction-time vertex.
    pub z0: Vec<f64>,
    /// Optimized `(u, v, z)` per vertex, pixels and raw depth units.
    pub positions: Vec<[f64; 3]>,
    /// Vertex of each correspondence in this image, `None` when not visible.
    pub point_vertex: Vec<Option<usize>>,
}

impl DeformableMesh {
    /// Mesh over the visible correspondences of one image, with border
    /// vertices, positioned at the labeled pixels and sampled depth.
    pub fn build(record: &ImageRecord, pixels: &[Option<Pixel>]) -> Result<Self> {
        let visible: Vec<(usize, Pixel)> = pixels
            .iter()
            .enumerate()
            .filter_map(|(c, p)| p.map(|p| (c, p)))
            .collect();
        let pts: Vec<Pixel> = visible.iter().map(|(_, p)| *p).collect();
        let tri = triangulate(&pts, record.dims(), true)?;
        let mut point_vertex = vec![None; pixels.len()];
        for ((c, _), v) in visible.iter().zip(&tri.point_vertex) {
            point_vertex[*c] = Some(*v);
        }
        let z0: Vec<f64> = tri
            .topology
            .vertices0
            .iter()
            .map(|p| record.depth.sample_clamped(p[0], p[1]))
            .collect();
        let positions = tri
            .topology
            .vertices0
            .iter()
            .zip(&z0)
            .map(|(p, z)| [p[0], p[1], *z])
            .collect();
        Ok(DeformableMesh {
            topology: tri.topology,
            z0,
            positions,
            point_vertex,
        })
    }

    pub fn from_topology(topology: MeshTopology, z0: Vec<f64>) -> Self {
        let positions = topology
            .vertices0
            .iter()
            .zip(&z0)
            .map(|(p, z)| [p[0], p[1], *z])
            .collect();
        DeformableMesh {
            topology,
            z0,
            positions,
            point_vertex: Vec::new(),
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.topology.vertices0.len()
    }

    pub fn is_undeformed(&self) -> bool {
        self.positions
            .iter()
            .zip(&self.topology.vertices0)
            .zip(&self.z0)
            .all(|((p, v), z)| p[0] == v[0] && p[1] == v[1] && p[2] == *z)
    }

    pub fn current_xy(&self) -> Vec<Pixel> {
        self.positions.iter().map(|p| [p[0], p[1]]).collect()
    }
}

/// Sum over faces of the best-rigid-fit residual, divided by the face count.
pub fn arap_image<T: Real>(faces: &[[usize; 3]], rest: &[Pixel], current: &[[T; 2]]) -> T {
    if faces.is_empty() {
        return T::zero();
    }
    let mut sum = T::zero();
    for f in faces {
        let src = [rest[f[0]], rest[f[1]], rest[f[2]]];
        let dst = [current[f[0]], current[f[1]], current[f[2]]];
        sum += rigid::rigid_residual(&src, &dst);
    }
    sum / faces.len() as f64
}

/// Mean over faces of `min(0, area − 0.1·area0)²`.
pub fn flip_image<T: Real>(faces: &[[usize; 3]], areas0: &[f64], current: &[[T; 2]]) -> T {
    if faces.is_empty() {
        return T::zero();
    }
    let mut sum = T::zero();
    for (f, a0) in faces.iter().zip(areas0) {
        let area = signed_area(current[f[0]], current[f[1]], current[f[2]]);
        sum += (area - FLIP_AREA_FRACTION * a0).min0().square();
    }
    sum / faces.len() as f64
}

/// Mean absolute deviation of vertex depth from its initial value.
pub fn z_image<T: Real>(z0: &[f64], z: &[T]) -> T {
    if z0.is_empty() {
        return T::zero();
    }
    let mut sum = T::zero();
    for (a, b) in z0.iter().zip(z) {
        sum += (*b - *a).abs();
    }
    sum / z0.len() as f64
}

fn mean_over_images(meshes: &[DeformableMesh], f: impl Fn(&DeformableMesh) -> f64) -> f64 {
    if meshes.is_empty() {
        return 0.0;
    }
    meshes.iter().map(f).sum::<f64>() / meshes.len() as f64
}

/// As-rigid-as-possible term in the image plane, pixel units.
///
/// Projecting a vertex's backprojected position with the camera it was
/// backprojected from returns its image coordinates, so the image-plane
/// positions are the vertices' `(u, v)`.
pub fn loss_arap2d(meshes: &[DeformableMesh]) -> f64 {
    mean_over_images(meshes, |m| {
        arap_image(&m.topology.faces, &m.topology.vertices0, &m.current_xy())
    })
}

pub fn loss_flip(meshes: &[DeformableMesh]) -> f64 {
    mean_over_images(meshes, |m| {
        flip_image(&m.topology.faces, &m.topology.areas0, &m.current_xy())
    })
}

pub fn loss_z(meshes: &[DeformableMesh]) -> f64 {
    mean_over_images(meshes, |m| {
        let z: Vec<f64> = m.positions.iter().map(|p| p[2]).collect();
        z_image(&m.z0, &z)
    })
}

/// Barycentric coordinates of `p` in triangle `(a, b, c)`.
#[inline]
pub fn barycentric(p: Pixel, a: Pixel, b: Pixel, c: Pixel) -> Option<[f64; 3]> {
    let area = signed_area(a, b, c);
    if area == 0.0 {
        return None;
    }
    let l0 = signed_area(p, b, c) / area;
    let l1 = signed_area(a, p, c) / area;
    Some([l0, l1, 1.0 - l0 - l1])
}

/// Face of `topology` (at construction positions) containing `p`, lowest
/// index first, with barycentric coordinates.
pub fn locate_rest(topology: &MeshTopology, p: Pixel) -> Option<(usize, [f64; 3])> {
    const EPS: f64 = -1e-9;
    topology.faces.iter().enumerate().find_map(|(k, f)| {
        let v = &topology.vertices0;
        barycentric(p, v[f[0]], v[f[1]], v[f[2]])
            .filter(|b| b.iter().all(|&x| x >= EPS))
            .map(|b| (k, b))
    })
}

/// Where a source pixel ends up under the deformation, with the depth offset
/// accumulated there. `None` outside the mesh.
pub fn forward_map(mesh: &DeformableMesh, p: Pixel) -> Option<(Pixel, f64)> {
    let (k, b) = locate_rest(&mesh.topology, p)?;
    let f = mesh.topology.faces[k];
    let mut out = [0.0, 0.0];
    let mut dz = 0.0;
    for (vi, w) in f.iter().zip(b) {
        let q = mesh.positions[*vi];
        out[0] += w * q[0];
        out[1] += w * q[1];
        dz += w * (q[2] - mesh.z0[*vi]);
    }
    Some((out, dz))
}
