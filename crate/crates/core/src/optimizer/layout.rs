//! Flat parameter vector layout.
//!
//! Cameras come first, eleven slots each; then, per image, `(u, v, z)` for
//! every mesh vertex with `u, v` in units of the image's longest side; then
//! free 3D points (bundle adjustment only).

use serde::{Deserialize, Serialize};

pub const CAM_BLOCK: usize = 11;
pub const Q: usize = 0;
pub const T: usize = 4;
pub const FX: usize = 7;
pub const FY: usize = 8;
pub const S: usize = 9;
pub const ETA: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    Rotation,
    Translation,
    Intrinsics,
    ScaleShift,
    Vertices,
    Points,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub n_cams: usize,
    pub vertex_offset: Vec<usize>,
    pub n_vertices: Vec<usize>,
    pub point_offset: usize,
    pub n_points: usize,
    pub len: usize,
}

impl Layout {
    pub fn new(n_vertices: Vec<usize>, n_points: usize) -> Self {
        let n_cams = n_vertices.len();
        let mut offset = n_cams * CAM_BLOCK;
        let vertex_offset = n_vertices
            .iter()
            .map(|n| {
                let o = offset;
                offset += 3 * n;
                o
            })
            .collect();
        let point_offset = offset;
        Layout {
            n_cams,
            vertex_offset,
            n_vertices,
            point_offset,
            n_points,
            len: point_offset + 3 * n_points,
        }
    }

    #[inline]
    pub fn cam(&self, i: usize) -> usize {
        i * CAM_BLOCK
    }

    #[inline]
    pub fn vertex(&self, image: usize, v: usize) -> usize {
        self.vertex_offset[image] + 3 * v
    }

    #[inline]
    pub fn point(&self, c: usize) -> usize {
        self.point_offset + 3 * c
    }

    /// Camera index and group of a coordinate.
    pub fn group(&self, k: usize) -> (Option<usize>, Group) {
        if k < self.n_cams * CAM_BLOCK {
            let slot = k % CAM_BLOCK;
            let g = match slot {
                0..=3 => Group::Rotation,
                4..=6 => Group::Translation,
                FX | FY => Group::Intrinsics,
                _ => Group::ScaleShift,
            };
            (Some(k / CAM_BLOCK), g)
        } else if k < self.point_offset {
            (None, Group::Vertices)
        } else {
            (None, Group::Points)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets() {
        let l = Layout::new(vec![4, 2], 3);
        assert_eq!(l.vertex(0, 0), 22);
        assert_eq!(l.vertex(1, 1), 22 + 12 + 3);
        assert_eq!(l.point(0), 22 + 18);
        assert_eq!(l.len, 22 + 18 + 9);
        assert_eq!(l.group(11 + FX), (Some(1), Group::Intrinsics));
        assert_eq!(l.group(3), (Some(0), Group::Rotation));
        assert_eq!(l.group(23), (None, Group::Vertices));
        assert_eq!(l.group(41), (None, Group::Points));
    }
}
