//! Dense barycentric warping of color and depth through a deformed mesh.

use image::RgbImage;
use rayon::prelude::*;

use super::{barycentric, signed_area, DeformableMesh};
use crate::scene::raster::bilinear_cell;
use crate::scene::{ImageRecord, Pixel, Raster};

const CELL: f64 = 16.0;
const INSIDE_EPS: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Warped {
    pub rgb: RgbImage,
    pub depth: Raster<f64>,
    /// `true` where a non-flipped face covers the pixel.
    pub valid: Raster<bool>,
    /// Source mask carried through the warp (nearest sample).
    pub mask: Raster<bool>,
}

/// Uniform grid over the deformed faces; each cell lists overlapping faces
/// in ascending index order.
struct FaceGrid {
    cols: usize,
    rows: usize,
    cells: Vec<Vec<usize>>,
}

impl FaceGrid {
    fn new(width: usize, height: usize, xy: &[Pixel], faces: &[[usize; 3]]) -> Self {
        let cols = (width as f64 / CELL).ceil().max(1.0) as usize;
        let rows = (height as f64 / CELL).ceil().max(1.0) as usize;
        let mut cells = vec![Vec::new(); cols * rows];
        for (k, f) in faces.iter().enumerate() {
            let (a, b, c) = (xy[f[0]], xy[f[1]], xy[f[2]]);
            if !(signed_area(a, b, c) > 0.0) {
                continue;
            }
            let lo_x = a[0].min(b[0]).min(c[0]);
            let hi_x = a[0].max(b[0]).max(c[0]);
            let lo_y = a[1].min(b[1]).min(c[1]);
            let hi_y = a[1].max(b[1]).max(c[1]);
            if hi_x < -1.0 || hi_y < -1.0 || lo_x > width as f64 || lo_y > height as f64 {
                continue;
            }
            let cx0 = (((lo_x - 1.0) / CELL).floor().max(0.0) as usize).min(cols - 1);
            let cy0 = (((lo_y - 1.0) / CELL).floor().max(0.0) as usize).min(rows - 1);
            let cx1 = (((hi_x + 1.0) / CELL).floor().max(0.0) as usize).min(cols - 1);
            let cy1 = (((hi_y + 1.0) / CELL).floor().max(0.0) as usize).min(rows - 1);
            for cy in cy0..=cy1 {
                for cx in cx0..=cx1 {
                    cells[cy * cols + cx].push(k);
                }
            }
        }
        FaceGrid { cols, rows, cells }
    }

    fn candidates(&self, p: Pixel) -> &[usize] {
        let cx = ((p[0] / CELL).floor().max(0.0) as usize).min(self.cols - 1);
        let cy = ((p[1] / CELL).floor().max(0.0) as usize).min(self.rows - 1);
        &self.cells[cy * self.cols + cx]
    }
}

fn sample_rgb(img: &RgbImage, u: f64, v: f64) -> [u8; 3] {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let u = u.clamp(0.0, w as f64 - 1.0);
    let v = v.clamp(0.0, h as f64 - 1.0);
    let (x0, y0, fx, fy) = bilinear_cell(w, h, u, v);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else { a + t * (b - a) };
    let px = |x: usize, y: usize| img.get_pixel(x as u32, y as u32).0;
    let (p00, p10, p01, p11) = (px(x0, y0), px(x1, y0), px(x0, y1), px(x1, y1));
    let acc: [f64; 3] = std::array::from_fn(|k| {
        let top = lerp(p00[k] as f64, p10[k] as f64, fx);
        let bottom = lerp(p01[k] as f64, p11[k] as f64, fx);
        lerp(top, bottom, fy)
    });
    acc.map(|a| a.round().clamp(0.0, 255.0) as u8)
}

/// Warps `record` so that content at the mesh's construction positions moves
/// to its optimized positions. Each output pixel is located in a deformed
/// face; its barycentric coordinates pick the source position from the
/// construction-time vertices. Depth additionally receives the interpolated
/// per-vertex depth offset. Pixels covered by no face, or only by flipped
/// faces, are invalid.
/// One output row: colors, depths, validity and mask.
type Row = (Vec<[u8; 3]>, Vec<f64>, Vec<bool>, Vec<bool>);

pub fn warp_dense(record: &ImageRecord, mesh: &DeformableMesh) -> Warped {
    let (w, h) = record.dims();
    let topo = &mesh.topology;
    let xy = mesh.current_xy();
    let grid = FaceGrid::new(w, h, &xy, &topo.faces);

    let rows: Vec<Row> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut rgb = vec![[0u8; 3]; w];
            let mut depth = vec![0.0; w];
            let mut valid = vec![false; w];
            let mut mask = vec![false; w];
            for x in 0..w {
                let p = [x as f64, y as f64];
                let hit = grid.candidates(p).iter().find_map(|&k| {
                    let f = topo.faces[k];
                    barycentric(p, xy[f[0]], xy[f[1]], xy[f[2]])
                        .filter(|b| b.iter().all(|&l| l >= INSIDE_EPS))
                        .map(|b| (f, b))
                });
                let Some((f, b)) = hit else { continue };
                let mut src = [0.0, 0.0];
                let mut dz = 0.0;
                for (vi, l) in f.iter().zip(b) {
                    let v0 = topo.vertices0[*vi];
                    src[0] += l * v0[0];
                    src[1] += l * v0[1];
                    dz += l * (mesh.positions[*vi][2] - mesh.z0[*vi]);
                }
                rgb[x] = sample_rgb(&record.rgb, src[0], src[1]);
                depth[x] = record.depth.sample_clamped(src[0], src[1]) + dz;
                valid[x] = true;
                let mx = (src[0].round().max(0.0) as usize).min(w - 1);
                let my = (src[1].round().max(0.0) as usize).min(h - 1);
                mask[x] = record.mask.get(mx, my);
            }
            (rgb, depth, valid, mask)
        })
        .collect();

    let mut out_rgb = RgbImage::new(w as u32, h as u32);
    let mut out_depth = Raster::filled(w, h, 0.0);
    let mut out_valid = Raster::filled(w, h, false);
    let mut out_mask = Raster::filled(w, h, false);
    for (y, (rgb, depth, valid, mask)) in rows.into_iter().enumerate() {
        for x in 0..w {
            out_rgb.put_pixel(x as u32, y as u32, image::Rgb(rgb[x]));
            out_depth.set(x, y, depth[x]);
            out_valid.set(x, y, valid[x]);
            out_mask.set(x, y, mask[x]);
        }
    }
    Warped {
        rgb: out_rgb,
        depth: out_depth,
        valid: out_valid,
        mask: out_mask,
    }
}

/// Per-pixel absolute color difference between the source and its warp;
/// black where the warp is invalid.
pub fn difference_image(record: &ImageRecord, warped: &Warped) -> RgbImage {
    let (w, h) = record.dims();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        if !warped.valid.get(x as usize, y as usize) {
            return image::Rgb([0, 0, 0]);
        }
        let a = record.rgb.get_pixel(x, y).0;
        let b = warped.rgb.get_pixel(x, y).0;
        image::Rgb([0, 1, 2].map(|k| a[k].abs_diff(b[k])))
    })
}
