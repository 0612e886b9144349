//! Synthetic scenes with known cameras: a textured box room seen from the
//! inside by pinhole cameras on an arc, with optional smooth per-image
//! deformations that break multi-view consistency.

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{CameraParams, Posed};
use crate::error::{Error, Result};
use crate::optimizer::axis_angle_quaternion;
use crate::scene::{CorrespondenceSet, ImageRecord, Raster, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Texture {
    Checkerboard,
    Gradient,
}

/// Cameras on a horizontal arc around `target`, all looking at it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraRing {
    pub target: [f64; 3],
    pub radius: f64,
    pub yaw_span_degrees: f64,
    pub pitch_jitter_degrees: f64,
    pub height_jitter: f64,
}

impl Default for CameraRing {
    fn default() -> Self {
        CameraRing {
            target: [0.0, 0.2, 1.0],
            radius: 2.5,
            yaw_span_degrees: 40.0,
            pitch_jitter_degrees: 4.0,
            height_jitter: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    /// Half extents of the room along x, y (down) and z.
    pub room: [f64; 3],
    pub texture: Texture,
    pub n_cameras: usize,
    pub ring: CameraRing,
    pub horizontal_fov_degrees: f64,
    pub n_correspondences: usize,
    /// Maximum per-image displacement as a fraction of the longest side.
    pub inconsistency: f64,
    /// Amplitude of smooth multiplicative depth noise.
    pub depth_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            width: 400,
            height: 300,
            room: [3.0, 1.5, 3.0],
            texture: Texture::Checkerboard,
            n_cameras: 5,
            ring: CameraRing::default(),
            horizontal_fov_degrees: 60.0,
            n_correspondences: 40,
            inconsistency: 0.0,
            depth_noise: 0.0,
            seed: 0,
        }
    }
}

/// Labeled points keep this fraction of the longest side away from the
/// image border.
const BORDER_MARGIN: f64 = 0.04;
/// Labeled points keep this distance (world units) from room edges.
const EDGE_MARGIN: f64 = 0.1;
const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// True cameras in world units with unit depth scale.
    pub cameras: Vec<CameraParams>,
    /// World position of each correspondence.
    pub points: Vec<[f64; 3]>,
}

impl GroundTruth {
    /// True cameras for a scene whose depths were divided by `normalizer`.
    pub fn cameras_for_normalizer(&self, normalizer: f64) -> Vec<CameraParams> {
        self.cameras
            .iter()
            .map(|c| CameraParams {
                depth_scale: c.depth_scale * normalizer,
                ..*c
            })
            .collect()
    }
}

fn rot_y(a: f64) -> [f64; 4] {
    axis_angle_quaternion([0.0, 1.0, 0.0], a)
}

/// Hamilton product `a·b`.
pub fn quaternion_product(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

fn ground_truth_cameras(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Result<Vec<CameraParams>> {
    let (w, h) = (spec.width, spec.height);
    let scale = w.max(h) as f64;
    let fx_px = (w as f64 / 2.0) / (spec.horizontal_fov_degrees.to_radians() / 2.0).tan();
    let ring = &spec.ring;
    let n = spec.n_cameras;
    (0..n)
        .map(|i| {
            let t = if n > 1 {
                i as f64 / (n - 1) as f64
            } else {
                0.5
            };
            let yaw = (t - 0.5) * ring.yaw_span_degrees.to_radians();
            let pitch = rng.gen_range(-1.0..=1.0) * ring.pitch_jitter_degrees.to_radians();
            let q = quaternion_product(rot_y(yaw), axis_angle_quaternion([1.0, 0.0, 0.0], pitch));
            let mut cam = CameraParams {
                rotation: q,
                translation: [0.0; 3],
                fx: fx_px / scale,
                fy: fx_px / scale,
                cx: w as f64 / 2.0 / scale,
                cy: h as f64 / 2.0 / scale,
                depth_scale: 1.0,
                depth_shift: 0.0,
            };
            let r = cam.rotation_matrix();
            let dy = rng.gen_range(-1.0..=1.0) * ring.height_jitter;
            for (k, t) in cam.translation.iter_mut().enumerate() {
                *t = ring.target[k] - r[k][2] * ring.radius;
            }
            cam.translation[1] += dy;
            for k in 0..3 {
                if cam.translation[k].abs() >= spec.room[k] - 0.05 {
                    return Err(Error::Synthetic(format!(
                        "camera {i} at {:?} is outside the room",
                        cam.translation
                    )));
                }
            }
            Ok(cam)
        })
        .collect()
}

/// Wall hit by the ray `o + t d` from inside the box: `(t, axis, sign)`.
fn cast(room: &[f64; 3], o: [f64; 3], d: [f64; 3]) -> (f64, usize, f64) {
    let mut best = (f64::INFINITY, 0, 1.0);
    for a in 0..3 {
        if d[a] == 0.0 {
            continue;
        }
        let sign = d[a].signum();
        let t = (sign * room[a] - o[a]) / d[a];
        if t < best.0 {
            best = (t, a, sign);
        }
    }
    best
}

const PALETTE: [[f64; 3]; 6] = [
    [0.85, 0.35, 0.30],
    [0.30, 0.65, 0.85],
    [0.90, 0.85, 0.40],
    [0.45, 0.35, 0.30],
    [0.40, 0.80, 0.45],
    [0.70, 0.45, 0.85],
];

fn shade(texture: Texture, room: &[f64; 3], p: [f64; 3], axis: usize, sign: f64) -> [u8; 3] {
    let face = 2 * axis + usize::from(sign > 0.0);
    let base = PALETTE[face];
    let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
    let factor = match texture {
        Texture::Checkerboard => {
            let parity = ((p[a1] / 0.5).floor() + (p[a2] / 0.5).floor()).rem_euclid(2.0);
            if parity < 0.5 {
                1.0
            } else {
                0.55
            }
        }
        Texture::Gradient => {
            0.4 + 0.3 * (p[a1] / room[a1] + 1.0) / 2.0 + 0.3 * (p[a2] / room[a2] + 1.0) / 2.0
        }
    };
    base.map(|c| (255.0 * c * factor).round().clamp(0.0, 255.0) as u8)
}

/// Ray direction in world coordinates through a normalized pixel.
fn ray(posed: &Posed<'_, f64>, pixel: [f64; 2]) -> [f64; 3] {
    let c = posed.cam;
    let d = [(pixel[0] - c.cx) / c.fx, (pixel[1] - c.cy) / c.fy, 1.0];
    let r = &posed.r;
    [
        r[0][0] * d[0] + r[0][1] * d[1] + r[0][2] * d[2],
        r[1][0] * d[0] + r[1][1] * d[1] + r[1][2] * d[2],
        r[2][0] * d[0] + r[2][1] * d[1] + r[2][2] * d[2],
    ]
}

/// Exact camera-frame depth of the room surface seen through a pixel
/// (pixel units).
pub fn depth_at(
    room: &[f64; 3],
    cam: &CameraParams,
    width: usize,
    height: usize,
    pixel: [f64; 2],
) -> f64 {
    let scale = width.max(height) as f64;
    let posed = Posed::new(cam);
    let d = ray(&posed, [pixel[0] / scale, pixel[1] / scale]);
    cast(room, cam.translation, d).0
}

fn render(spec: &SyntheticSpec, cam: &CameraParams) -> (RgbImage, Raster<f64>) {
    let (w, h) = (spec.width, spec.height);
    let scale = w.max(h) as f64;
    let posed = Posed::new(cam);
    let rows: Vec<Vec<([u8; 3], f64)>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let d = ray(&posed, [x as f64 / scale, y as f64 / scale]);
                    let (t, axis, sign) = cast(&spec.room, cam.translation, d);
                    let o = cam.translation;
                    let p = [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]];
                    (shade(spec.texture, &spec.room, p, axis, sign), t)
                })
                .collect()
        })
        .collect();
    let mut rgb = RgbImage::new(w as u32, h as u32);
    let mut depth = Raster::filled(w, h, 0.0);
    for (y, row) in rows.into_iter().enumerate() {
        for (x, (c, t)) in row.into_iter().enumerate() {
            rgb.put_pixel(x as u32, y as u32, image::Rgb(c));
            depth.set(x, y, t);
        }
    }
    (rgb, depth)
}

/// Smooth field on the image: a 3×3 cosine basis with random coefficients.
#[derive(Debug, Clone)]
struct CosineField {
    coeffs: [[f64; 3]; 3],
    width: f64,
    height: f64,
}

impl CosineField {
    fn random(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Self {
        let mut coeffs = [[0.0; 3]; 3];
        for row in &mut coeffs {
            for c in row.iter_mut() {
                *c = rng.gen_range(-1.0..=1.0);
            }
        }
        CosineField {
            coeffs,
            width: width as f64,
            height: height as f64,
        }
    }

    fn eval(&self, u: f64, v: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let mut s = 0.0;
        for (a, row) in self.coeffs.iter().enumerate() {
            let cu = (pi * a as f64 * u / self.width).cos();
            for (b, c) in row.iter().enumerate() {
                s += c * cu * (pi * b as f64 * v / self.height).cos();
            }
        }
        s
    }

    fn scaled(mut self, k: f64) -> Self {
        for row in &mut self.coeffs {
            for c in row.iter_mut() {
                *c *= k;
            }
        }
        self
    }
}

fn image_rng(seed: u64, salt: u64, image: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ (image as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9),
    )
}

pub fn generate_scene(spec: &SyntheticSpec) -> Result<(Scene, GroundTruth)> {
    if spec.n_cameras < 2 {
        return Err(Error::Synthetic("at least two cameras are needed".into()));
    }
    if spec.inconsistency < 0.0 || spec.depth_noise < 0.0 {
        return Err(Error::Synthetic(
            "inconsistency and noise must be non-negative".into(),
        ));
    }
    if spec.width < 8 || spec.height < 8 {
        return Err(Error::Synthetic("images must be at least 8x8".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cams = ground_truth_cameras(spec, &mut rng)?;
    let (w, h) = (spec.width, spec.height);
    let scale = w.max(h) as f64;
    let margin = BORDER_MARGIN * scale;

    let visible_at = |cam: &CameraParams, p: [f64; 3]| -> Option<[f64; 2]> {
        let (q, z) = Posed::new(cam).project_with_depth(p);
        let (u, v) = (q[0] * scale, q[1] * scale);
        (z > 0.0
            && u >= margin
            && v >= margin
            && u <= w as f64 - 1.0 - margin
            && v <= h as f64 - 1.0 - margin)
            .then_some([u, v])
    };

    let mut corrs = CorrespondenceSet::empty(spec.n_cameras);
    let mut points = Vec::with_capacity(spec.n_correspondences);
    for c in 0..spec.n_correspondences {
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            let src = rng.gen_range(0..spec.n_cameras);
            let px = [
                rng.gen_range(margin..w as f64 - 1.0 - margin),
                rng.gen_range(margin..h as f64 - 1.0 - margin),
            ];
            let posed = Posed::new(&cams[src]);
            let d = ray(&posed, [px[0] / scale, px[1] / scale]);
            let o = cams[src].translation;
            let (t, axis, _) = cast(&spec.room, o, d);
            let p = [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]];
            let near_edge = (0..3)
                .filter(|&a| a != axis)
                .any(|a| p[a].abs() > spec.room[a] - EDGE_MARGIN);
            if near_edge {
                continue;
            }
            let obs: Vec<Option<[f64; 2]>> = cams.iter().map(|cam| visible_at(cam, p)).collect();
            if obs.iter().flatten().count() >= 2 {
                accepted = Some((p, obs));
                break;
            }
        }
        let (p, obs) = accepted.ok_or_else(|| {
            Error::Synthetic(format!(
                "correspondence {c} not visible in two views after {MAX_ATTEMPTS} attempts"
            ))
        })?;
        points.push(p);
        corrs.push(c as u64, obs);
    }

    let images = cams
        .iter()
        .enumerate()
        .map(|(i, cam)| {
            let (rgb, mut depth) = render(spec, cam);
            if spec.depth_noise > 0.0 {
                let field = normalized_field(&mut image_rng(spec.seed, 1, i), w, h);
                for y in 0..h {
                    for x in 0..w {
                        let d = depth.get(x, y);
                        depth.set(
                            x,
                            y,
                            d * (1.0 + spec.depth_noise * field.eval(x as f64, y as f64)),
                        );
                    }
                }
            }
            ImageRecord {
                id: i,
                rgb,
                depth,
                mask: Raster::filled(w, h, true),
            }
        })
        .collect();
    let scene = Scene {
        images,
        correspondences: corrs,
        depth_normalizer: 1.0,
    };
    let scene = perturb_scene(&scene, spec.inconsistency, spec.seed)?;
    Ok((
        scene,
        GroundTruth {
            cameras: cams,
            points,
        },
    ))
}

/// Field rescaled so its largest magnitude over the pixel grid is 1.
fn normalized_field(rng: &mut ChaCha8Rng, w: usize, h: usize) -> CosineField {
    let f = CosineField::random(rng, w, h);
    let mut max = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            max = max.max(f.eval(x as f64, y as f64).abs());
        }
    }
    f.scaled(1.0 / max.max(1e-12))
}

/// Smooth 2D displacement of one image.
struct Displacement {
    dx: CosineField,
    dy: CosineField,
}

impl Displacement {
    fn random(rng: &mut ChaCha8Rng, w: usize, h: usize, max_len: f64) -> Self {
        let dx = CosineField::random(rng, w, h);
        let dy = CosineField::random(rng, w, h);
        let mut max = 0.0f64;
        for y in 0..h {
            for x in 0..w {
                let (a, b) = (dx.eval(x as f64, y as f64), dy.eval(x as f64, y as f64));
                max = max.max((a * a + b * b).sqrt());
            }
        }
        // Slightly under the target so the bound also holds between nodes.
        let k = 0.999 * max_len / max.max(1e-12);
        Displacement {
            dx: dx.scaled(k),
            dy: dy.scaled(k),
        }
    }

    fn at(&self, p: [f64; 2]) -> [f64; 2] {
        [self.dx.eval(p[0], p[1]), self.dy.eval(p[0], p[1])]
    }

    /// Source position `q` with `q + D(q) = p`, by fixed-point iteration.
    fn inverse(&self, p: [f64; 2]) -> [f64; 2] {
        let mut q = p;
        for _ in 0..30 {
            let d = self.at(q);
            q = [p[0] - d[0], p[1] - d[1]];
        }
        q
    }
}

/// Moves every image's content, depth and labeled pixels by an independent
/// smooth displacement field of maximum length `delta · max(w, h)`.
pub fn perturb_scene(scene: &Scene, delta: f64, seed: u64) -> Result<Scene> {
    if delta < 0.0 {
        return Err(Error::Synthetic(format!(
            "inconsistency {delta} is negative"
        )));
    }
    if delta == 0.0 {
        return Ok(scene.clone());
    }
    let mut out = scene.clone();
    for (i, rec) in scene.images.iter().enumerate() {
        let (w, h) = rec.dims();
        let disp = Displacement::random(&mut image_rng(seed, 2, i), w, h, delta * rec.scale());
        let mut rgb = RgbImage::new(w as u32, h as u32);
        let mut depth = Raster::filled(w, h, 0.0);
        let mut mask = Raster::filled(w, h, true);
        for y in 0..h {
            for x in 0..w {
                let q = disp.inverse([x as f64, y as f64]);
                let qx = q[0].clamp(0.0, w as f64 - 1.0);
                let qy = q[1].clamp(0.0, h as f64 - 1.0);
                depth.set(x, y, rec.depth.sample_clamped(qx, qy));
                let (nx, ny) = (qx.round() as u32, qy.round() as u32);
                rgb.put_pixel(x as u32, y as u32, *rec.rgb.get_pixel(nx, ny));
                mask.set(x, y, rec.mask.get(nx as usize, ny as usize));
            }
        }
        let target = &mut out.images[i];
        target.rgb = rgb;
        target.depth = depth;
        target.mask = mask;
        for px in out.correspondences.pixels[i].iter_mut().flatten() {
            let d = disp.at(*px);
            *px = [
                (px[0] + d[0]).clamp(0.0, w as f64 - 1.0),
                (px[1] + d[1]).clamp(0.0, h as f64 - 1.0),
            ];
        }
    }
    Ok(out)
}

/// Largest distance between backprojections of the same correspondence
/// from two views, depth sampled from the rasters.
pub fn max_backprojection_gap(scene: &Scene, cams: &[CameraParams]) -> Result<f64> {
    let corrs = &scene.correspondences;
    let mut worst = 0.0f64;
    for c in 0..corrs.n_points() {
        let mut pts = Vec::new();
        for (i, rec) in scene.images.iter().enumerate() {
            if let Some([u, v]) = corrs.pixel(i, c) {
                let d = rec.depth.sample(u, v)?;
                let s = rec.scale();
                pts.push(crate::camera::backproject([u / s, v / s], d, &cams[i]));
            }
        }
        for a in 0..pts.len() {
            for b in 0..a {
                let g = (0..3)
                    .map(|k| (pts[a][k] - pts[b][k]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(g);
            }
        }
    }
    Ok(worst)
}
