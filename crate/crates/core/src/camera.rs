//! Pinhole cameras with an affine depth correction, backprojection and the
//! camera-stage loss terms.
//!
//! Pixel coordinates and focal lengths are expressed in units of the image's
//! longest side, so focal lengths are O(1) for any resolution.

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;

/// Camera parameters, generic over the scalar so the same code evaluates
/// losses on floats and on taped variables.
///
/// `rotation` is a quaternion `[w, x, y, z]` mapping camera coordinates to
/// world coordinates; `translation` is the camera centre in world units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera<T = f64> {
    pub rotation: [T; 4],
    pub translation: [T; 3],
    pub fx: T,
    pub fy: T,
    /// Principal point, fixed during optimization.
    pub cx: f64,
    pub cy: f64,
    pub depth_scale: T,
    pub depth_shift: T,
}

pub type CameraParams = Camera<f64>;

impl CameraParams {
    /// Identity pose, unit focal lengths, principal point at the image centre.
    pub fn initial(width: usize, height: usize) -> Self {
        let scale = width.max(height) as f64;
        Camera {
            rotation: [1.0, 0.0, 0.0, 0.0],
            translation: [0.0; 3],
            fx: 1.0,
            fy: 1.0,
            cx: width as f64 / 2.0 / scale,
            cy: height as f64 / 2.0 / scale,
            depth_scale: 1.0,
            depth_shift: 0.0,
        }
    }

    pub fn lift<T: Real>(&self) -> Camera<T> {
        Camera {
            rotation: self.rotation.map(T::cst),
            translation: self.translation.map(T::cst),
            fx: T::cst(self.fx),
            fy: T::cst(self.fy),
            cx: self.cx,
            cy: self.cy,
            depth_scale: T::cst(self.depth_scale),
            depth_shift: T::cst(self.depth_shift),
        }
    }

    pub fn quaternion_norm(&self) -> f64 {
        self.rotation.iter().map(|q| q * q).sum::<f64>().sqrt()
    }

    pub fn normalize_rotation(&mut self) {
        let n = self.quaternion_norm();
        for q in &mut self.rotation {
            *q /= n;
        }
    }

    pub fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        rotation_matrix(&self.rotation)
    }
}

impl<T: Real> Camera<T> {
    pub fn value(&self) -> CameraParams {
        Camera {
            rotation: self.rotation.map(Real::value),
            translation: self.translation.map(Real::value),
            fx: self.fx.value(),
            fy: self.fy.value(),
            cx: self.cx,
            cy: self.cy,
            depth_scale: self.depth_scale.value(),
            depth_shift: self.depth_shift.value(),
        }
    }
}

/// Rotation matrix of a (not necessarily unit) quaternion `[w, x, y, z]`,
/// computed as the rotation of `q / |q|`.
pub fn rotation_matrix<T: Real>(q: &[T; 4]) -> [[T; 3]; 3] {
    let [w, x, y, z] = *q;
    let n2 = w * w + x * x + y * y + z * z;
    let s = T::cst(2.0) / n2;
    let (xx, yy, zz) = (x * x * s, y * y * s, z * z * s);
    let (xy, xz, yz) = (x * y * s, x * z * s, y * z * s);
    let (wx, wy, wz) = (w * x * s, w * y * s, w * z * s);
    let one = T::cst(1.0);
    [
        [one - (yy + zz), xy - wz, xz + wy],
        [xy + wz, one - (xx + zz), yz - wx],
        [xz - wy, yz + wx, one - (xx + yy)],
    ]
}

#[inline]
fn mat_vec<T: Real>(m: &[[T; 3]; 3], v: [T; 3]) -> [T; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

#[inline]
fn mat_t_vec<T: Real>(m: &[[T; 3]; 3], v: [T; 3]) -> [T; 3] {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

/// Camera with its rotation matrix evaluated once, for repeated projection.
pub struct Posed<'a, T> {
    pub cam: &'a Camera<T>,
    pub r: [[T; 3]; 3],
}

impl<'a, T: Real> Posed<'a, T> {
    pub fn new(cam: &'a Camera<T>) -> Self {
        Posed {
            cam,
            r: rotation_matrix(&cam.rotation),
        }
    }

    /// `R · (K⁻¹ [u, v, 1]ᵀ · (s·depth + η)) + t`.
    pub fn backproject(&self, pixel: [T; 2], depth: T) -> [T; 3] {
        let c = self.cam;
        let z = c.depth_scale * depth + c.depth_shift;
        let ray = [
            (pixel[0] - c.cx) / c.fx * z,
            (pixel[1] - c.cy) / c.fy * z,
            z,
        ];
        let p = mat_vec(&self.r, ray);
        [
            p[0] + c.translation[0],
            p[1] + c.translation[1],
            p[2] + c.translation[2],
        ]
    }

    /// Point in camera coordinates.
    pub fn to_camera(&self, point: [T; 3]) -> [T; 3] {
        let t = self.cam.translation;
        mat_t_vec(&self.r, [point[0] - t[0], point[1] - t[1], point[2] - t[2]])
    }

    /// Perspective projection; the caller checks the returned depth sign.
    pub fn project_with_depth(&self, point: [T; 3]) -> ([T; 2], T) {
        let p = self.to_camera(point);
        let c = self.cam;
        ([c.fx * p[0] / p[2] + c.cx, c.fy * p[1] / p[2] + c.cy], p[2])
    }
}

pub fn backproject(pixel: [f64; 2], depth: f64, cam: &CameraParams) -> [f64; 3] {
    Posed::new(cam).backproject(pixel, depth)
}

/// Projection into the camera, `None` behind the image plane.
pub fn project(point: [f64; 3], cam: &CameraParams) -> Option<[f64; 2]> {
    let (px, z) = Posed::new(cam).project_with_depth(point);
    (z > 0.0).then_some(px)
}

/// Loss weights. Every term's coefficient in the alignment objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub scale: f64,
    pub aspect: f64,
    pub focal: f64,
    pub neg: f64,
    pub arap2d: f64,
    pub flip: f64,
    pub z: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            scale: 1.0,
            aspect: 10.0,
            focal: 1e-5,
            neg: 100.0,
            arap2d: 1.0,
            flip: 10.0,
            z: 0.1,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        LossWeights {
            scale: 0.0,
            aspect: 0.0,
            focal: 0.0,
            neg: 0.0,
            arap2d: 0.0,
            flip: 0.0,
            z: 0.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        [
            self.scale,
            self.aspect,
            self.focal,
            self.neg,
            self.arap2d,
            self.flip,
            self.z,
        ]
        .iter()
        .all(|w| *w >= 0.0 && w.is_finite())
    }
}

/// Individual loss terms. Unused terms stay zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms<T = f64> {
    pub l3d: T,
    pub l2d: T,
    pub reprojection: T,
    pub scale: T,
    pub aspect: T,
    pub focal: T,
    pub neg_scale: T,
    pub neg_shift: T,
    pub arap2d: T,
    pub flip: T,
    pub z: T,
}

impl<T: Real> LossTerms<T> {
    pub fn zero() -> Self {
        let z = T::zero();
        LossTerms {
            l3d: z,
            l2d: z,
            reprojection: z,
            scale: z,
            aspect: z,
            focal: z,
            neg_scale: z,
            neg_shift: z,
            arap2d: z,
            flip: z,
            z,
        }
    }

    pub fn total(&self, w: &LossWeights) -> T {
        self.l3d
            + self.l2d
            + self.reprojection
            + self.scale * w.scale
            + self.aspect * w.aspect
            + self.focal * w.focal
            + (self.neg_scale + self.neg_shift) * w.neg
            + self.arap2d * w.arap2d
            + self.flip * w.flip
            + self.z * w.z
    }

    pub fn value(&self) -> LossTerms<f64> {
        LossTerms {
            l3d: self.l3d.value(),
            l2d: self.l2d.value(),
            reprojection: self.reprojection.value(),
            scale: self.scale.value(),
            aspect: self.aspect.value(),
            focal: self.focal.value(),
            neg_scale: self.neg_scale.value(),
            neg_shift: self.neg_shift.value(),
            arap2d: self.arap2d.value(),
            flip: self.flip.value(),
            z: self.z.value(),
        }
    }
}

impl LossTerms<f64> {
    pub fn named(&self) -> [(&'static str, f64); 11] {
        [
            ("l3d", self.l3d),
            ("l2d", self.l2d),
            ("reprojection", self.reprojection),
            ("scale", self.scale),
            ("aspect", self.aspect),
            ("focal", self.focal),
            ("neg_scale", self.neg_scale),
            ("neg_shift", self.neg_shift),
            ("arap2d", self.arap2d),
            ("flip", self.flip),
            ("z", self.z),
        ]
    }
}

/// Term values together with their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub terms: LossTerms<f64>,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(terms: LossTerms<f64>, weights: &LossWeights) -> Self {
        LossBreakdown {
            total: terms.total(weights),
            terms,
        }
    }
}

/// `obs[i][c]`: pixel and depth of correspondence `c` in image `i`, if
/// visible there.
pub type Observations<T> = Vec<Vec<Option<([T; 2], T)>>>;

/// Mean squared distance between backprojected correspondences over every
/// unordered image pair in which both observations are visible.
///
/// `obs[i][c]` holds the (normalized) pixel and raw depth of correspondence
/// `c` in image `i`.
pub fn loss_3d_terms<T: Real>(cams: &[Camera<T>], obs: &Observations<T>) -> T {
    let points: Vec<Vec<Option<[T; 3]>>> = cams
        .iter()
        .zip(obs)
        .map(|(cam, col)| {
            let posed = Posed::new(cam);
            col.iter()
                .map(|o| o.map(|(px, d)| posed.backproject(px, d)))
                .collect()
        })
        .collect();
    let mut sum = T::zero();
    let mut count = 0usize;
    for i in 0..points.len() {
        for j in 0..i {
            for (pi, pj) in points[i].iter().zip(&points[j]) {
                if let (Some(a), Some(b)) = (pi, pj) {
                    sum += (a[0] - b[0]).square() + (a[1] - b[1]).square() + (a[2] - b[2]).square();
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        T::zero()
    } else {
        sum / count as f64
    }
}

/// `loss_3d_terms` on a float scene. `depths[i][c]` is the depth used for
/// correspondence `c` in image `i`; pixel coordinates are taken from the
/// correspondence set and normalized by each image's longest side.
pub fn loss_3d(
    scene: &crate::scene::Scene,
    cams: &[CameraParams],
    depths: &[Vec<Option<f64>>],
) -> f64 {
    let corrs = &scene.correspondences;
    let obs: Observations<f64> = scene
        .images
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let s = rec.scale();
            (0..corrs.n_points())
                .map(|c| match (corrs.pixel(i, c), depths[i][c]) {
                    (Some([u, v]), Some(d)) => Some(([u / s, v / s], d)),
                    _ => None,
                })
                .collect()
        })
        .collect();
    loss_3d_terms(cams, &obs)
}

/// Camera regularizers: scale, aspect, focal and the two negativity hinges.
///
/// The aspect term compares `f_x / f_y` with `h / w` after expressing each
/// focal length in units of its own image dimension (`f_x / w`, `f_y / h`),
/// under which square pixels satisfy the target exactly.
pub fn regularizer_terms<T: Real>(cams: &[Camera<T>], dims: &[(usize, usize)]) -> LossTerms<T> {
    let n = cams.len() as f64;
    let mut terms = LossTerms::zero();
    if cams.is_empty() {
        return terms;
    }
    let mut mean_s = T::zero();
    let mut neg_s = T::zero();
    let mut neg_eta = T::zero();
    for (cam, &(w, h)) in cams.iter().zip(dims) {
        mean_s += cam.depth_scale;
        neg_s += (-cam.depth_scale).relu();
        neg_eta += (-cam.depth_shift).relu();
        let target = h as f64 / w as f64;
        let ratio = cam.fx / cam.fy * target;
        terms.aspect += (ratio - target).square();
        terms.focal += cam.fx + cam.fy;
    }
    terms.scale = (mean_s / n - 1.0).square();
    terms.neg_scale = (neg_s / n).square();
    terms.neg_shift = (neg_eta / n).square();
    terms
}

pub fn camera_regularizers(cams: &[CameraParams], dims: &[(usize, usize)]) -> LossBreakdown {
    let w = LossWeights::default();
    LossBreakdown::new(regularizer_terms(cams, dims), &w)
}

/// Full camera-stage objective on a float scene, with depths sampled at the
/// labeled pixels.
pub fn camera_objective(
    scene: &crate::scene::Scene,
    cams: &[CameraParams],
    weights: &LossWeights,
) -> crate::error::Result<LossBreakdown> {
    let corrs = &scene.correspondences;
    let mut depths = Vec::with_capacity(scene.n_images());
    for (i, rec) in scene.images.iter().enumerate() {
        let mut col = Vec::with_capacity(corrs.n_points());
        for c in 0..corrs.n_points() {
            col.push(match corrs.pixel(i, c) {
                Some(px) => Some(crate::scene::sample_depth(rec, px)?),
                None => None,
            });
        }
        depths.push(col);
    }
    let dims: Vec<_> = scene.images.iter().map(|r| r.dims()).collect();
    let mut terms = regularizer_terms(cams, &dims);
    terms.l3d = loss_3d(scene, cams, &depths);
    Ok(LossBreakdown::new(terms, weights))
}
