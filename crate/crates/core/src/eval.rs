//! Holdout protocol, correct-correspondence rate, relative rotation error
//! and the bundle adjustment baseline.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::camera::{CameraParams, LossTerms, LossWeights, Observations, Posed};
use crate::error::{Error, Result};
use crate::mesh::{forward_map, DeformableMesh};
use crate::optimizer::layout::{Group, Layout};
use crate::optimizer::objective::{camera_from_slice, loss_2d_terms, write_camera};
use crate::optimizer::{descend, AlignmentState, LossTrace, Objective, OptimizerConfig, Stage};
use crate::scene::{sample_depth, CorrespondenceSet, Scene};

/// Images must keep at least this many visible training correspondences.
pub const MIN_TRAIN_PER_IMAGE: usize = 6;
const SPLIT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSplit {
    pub train: CorrespondenceSet,
    pub holdout: CorrespondenceSet,
    pub seed: u64,
    /// Positions of the held-out correspondences in the original set.
    pub holdout_indices: Vec<usize>,
}

/// Moves `k` correspondences seen in at least two images to a holdout set.
pub fn holdout_split(corrs: &CorrespondenceSet, k: usize, seed: u64) -> Result<HoldoutSplit> {
    let all: Vec<usize> = (0..corrs.n_points()).collect();
    if k == 0 {
        return Ok(HoldoutSplit {
            train: corrs.clone(),
            holdout: corrs.select(&[]),
            seed,
            holdout_indices: Vec::new(),
        });
    }
    let candidates: Vec<usize> = all
        .iter()
        .copied()
        .filter(|&c| corrs.views(c) >= 2)
        .collect();
    if candidates.len() < k {
        return Err(Error::Split(format!(
            "{k} holdout points requested but only {} correspondences are seen twice",
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SPLIT_ATTEMPTS {
        let mut held: Vec<usize> = sample(&mut rng, candidates.len(), k)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        held.sort_unstable();
        let train_idx: Vec<usize> = all
            .iter()
            .copied()
            .filter(|c| held.binary_search(c).is_err())
            .collect();
        let train = corrs.select(&train_idx);
        if (0..corrs.n_images).all(|i| train.visible_count(i) >= MIN_TRAIN_PER_IMAGE) {
            return Ok(HoldoutSplit {
                train,
                holdout: corrs.select(&held),
                seed,
                holdout_indices: held,
            });
        }
    }
    Err(Error::Split(format!(
        "no split of {k} points leaves {MIN_TRAIN_PER_IMAGE} training correspondences in every image"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PccResult {
    pub alpha: f64,
    pub fraction_correct: f64,
    pub n_evaluated: usize,
    pub n_correct: usize,
}

/// Distances, in units of the target image's longest side, between each
/// transferred holdout observation and its labeled position, over every
/// ordered pair of images that both see the point. `None` marks a transfer
/// that lands behind the target camera.
///
/// The source pixel is carried through its image's deformation, backprojected
/// with the deformed depth and projected into the target camera; the labeled
/// target pixel is carried through the target image's deformation as well.
pub fn transfer_distances(
    scene: &Scene,
    state: &AlignmentState,
    holdout: &CorrespondenceSet,
) -> Result<Vec<Option<f64>>> {
    let n = scene.n_images();
    if holdout.n_images != n || state.cams.len() != n || state.meshes.len() != n {
        return Err(Error::Evaluation(
            "holdout, state and scene disagree on the image count".into(),
        ));
    }
    // Deformed position and depth of every holdout observation.
    let mut mapped: Observations<f64> = Vec::with_capacity(n);
    for (i, rec) in scene.images.iter().enumerate() {
        let mut col = Vec::with_capacity(holdout.n_points());
        for c in 0..holdout.n_points() {
            col.push(match holdout.pixel(i, c) {
                Some(px) => {
                    let d = sample_depth(rec, px)?;
                    let (q, dz) = forward_map(&state.meshes[i], px).unwrap_or((px, 0.0));
                    Some((q, d + dz))
                }
                None => None,
            });
        }
        mapped.push(col);
    }
    let posed: Vec<Posed<'_, f64>> = state.cams.iter().map(Posed::new).collect();
    let scales: Vec<f64> = scene.images.iter().map(|r| r.scale()).collect();
    let per_point: Vec<Vec<Option<f64>>> = (0..holdout.n_points())
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let (Some((pi, di)), Some((pj, _))) = (mapped[i][c], mapped[j][c]) else {
                        continue;
                    };
                    let p = posed[i].backproject([pi[0] / scales[i], pi[1] / scales[i]], di);
                    let (q, z) = posed[j].project_with_depth(p);
                    out.push((z > 0.0).then(|| {
                        let du = q[0] - pj[0] / scales[j];
                        let dv = q[1] - pj[1] / scales[j];
                        (du * du + dv * dv).sqrt()
                    }));
                }
            }
            out
        })
        .collect();
    Ok(per_point.into_iter().flatten().collect())
}

pub fn pcc_from_distances(distances: &[Option<f64>], alpha: f64) -> Result<PccResult> {
    if distances.is_empty() {
        return Err(Error::Evaluation("no holdout pair to evaluate".into()));
    }
    let n_correct = distances
        .iter()
        .filter(|d| matches!(d, Some(d) if *d <= alpha))
        .count();
    Ok(PccResult {
        alpha,
        fraction_correct: n_correct as f64 / distances.len() as f64,
        n_evaluated: distances.len(),
        n_correct,
    })
}

pub fn pcc(
    scene: &Scene,
    state: &AlignmentState,
    holdout: &CorrespondenceSet,
    alpha: f64,
) -> Result<PccResult> {
    pcc_from_distances(&transfer_distances(scene, state, holdout)?, alpha)
}

pub fn pcc_sweep(
    scene: &Scene,
    state: &AlignmentState,
    holdout: &CorrespondenceSet,
    alphas: &[f64],
) -> Result<Vec<PccResult>> {
    let d = transfer_distances(scene, state, holdout)?;
    alphas.iter().map(|&a| pcc_from_distances(&d, a)).collect()
}

fn mat_t_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    std::array::from_fn(|r| std::array::from_fn(|c| (0..3).map(|k| a[k][r] * b[k][c]).sum()))
}

/// Geodesic angle of a rotation matrix, in degrees.
pub fn rotation_angle_degrees(m: &[[f64; 3]; 3]) -> f64 {
    let cos = ((m[0][0] + m[1][1] + m[2][2] - 1.0) / 2.0).clamp(-1.0, 1.0);
    cos.acos().to_degrees()
}

/// Mean geodesic angle, over unordered image pairs, between the relative
/// rotations `R_iᵀ R_j` of two camera sets. Rotations map camera to world
/// coordinates, so this is invariant to a global rotation of either set.
pub fn relative_rotation_error(a: &[CameraParams], b: &[CameraParams]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Evaluation(format!(
            "camera counts differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let ra: Vec<_> = a.iter().map(|c| c.rotation_matrix()).collect();
    let rb: Vec<_> = b.iter().map(|c| c.rotation_matrix()).collect();
    let mut sum = 0.0;
    let mut count = 0;
    for i in 0..a.len() {
        for j in 0..i {
            let rel_a = mat_t_mul(&ra[i], &ra[j]);
            let rel_b = mat_t_mul(&rb[i], &rb[j]);
            sum += rotation_angle_degrees(&mat_t_mul(&rel_a, &rel_b));
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Mean squared pixel reprojection error between views, from the current
/// mesh positions and depths.
pub fn loss_2d(state: &AlignmentState) -> f64 {
    let obs: Observations<f64> = state
        .meshes
        .iter()
        .map(|m| {
            let s = m.topology.width.max(m.topology.height) as f64;
            m.point_vertex
                .iter()
                .map(|v| {
                    v.map(|v| {
                        let p = m.positions[v];
                        ([p[0] / s, p[1] / s], p[2])
                    })
                })
                .collect()
        })
        .collect();
    let scales: Vec<f64> = state
        .meshes
        .iter()
        .map(|m| m.topology.width.max(m.topology.height) as f64)
        .collect();
    loss_2d_terms(&state.cams, &obs, &scales)
}

/// Bundle adjustment: one free world point per correspondence, cameras
/// without depth correction, mean squared pixel reprojection error.
#[derive(Debug, Clone)]
pub struct BaProblem {
    pub layout: Layout,
    weights: LossWeights,
    principal: Vec<[f64; 2]>,
    scales: Vec<f64>,
    /// Normalized labeled pixels, `[image][point]`.
    obs: Vec<Vec<Option<[f64; 2]>>>,
}

impl BaProblem {
    pub fn new(scene: &Scene, cams: &[CameraParams]) -> Self {
        let corrs = &scene.correspondences;
        let scales: Vec<f64> = scene.images.iter().map(|r| r.scale()).collect();
        BaProblem {
            layout: Layout::new(vec![0; scene.n_images()], corrs.n_points()),
            weights: LossWeights::zero(),
            principal: cams.iter().map(|c| [c.cx, c.cy]).collect(),
            obs: (0..scene.n_images())
                .map(|i| {
                    (0..corrs.n_points())
                        .map(|c| {
                            corrs
                                .pixel(i, c)
                                .map(|[u, v]| [u / scales[i], v / scales[i]])
                        })
                        .collect()
                })
                .collect(),
            scales,
        }
    }

    pub fn pack(&self, cams: &[CameraParams], points: &[[f64; 3]]) -> Vec<f64> {
        let mut x = vec![0.0; self.layout.len];
        for (i, cam) in cams.iter().enumerate() {
            write_camera(&mut x, self.layout.cam(i), cam);
        }
        for (c, p) in points.iter().enumerate() {
            let k = self.layout.point(c);
            x[k..k + 3].copy_from_slice(p);
        }
        x
    }

    pub fn cameras<T: Real>(&self, x: &[T]) -> Vec<crate::camera::Camera<T>> {
        (0..self.layout.n_cams)
            .map(|i| {
                let [cx, cy] = self.principal[i];
                camera_from_slice(x, self.layout.cam(i), cx, cy)
            })
            .collect()
    }

    pub fn points(&self, x: &[f64]) -> Vec<[f64; 3]> {
        (0..self.layout.n_points)
            .map(|c| {
                let k = self.layout.point(c);
                [x[k], x[k + 1], x[k + 2]]
            })
            .collect()
    }
}

impl Objective for BaProblem {
    fn weights(&self) -> &LossWeights {
        &self.weights
    }

    fn terms<T: Real>(&self, x: &[T]) -> LossTerms<T> {
        let cams = self.cameras(x);
        let mut sum = T::zero();
        let mut count = 0usize;
        for (i, cam) in cams.iter().enumerate() {
            let posed = Posed::new(cam);
            let s = self.scales[i];
            for (c, o) in self.obs[i].iter().enumerate() {
                let Some(o) = o else { continue };
                let k = self.layout.point(c);
                let (q, _) = posed.project_with_depth([x[k], x[k + 1], x[k + 2]]);
                sum += ((q[0] - o[0]) * s).square() + ((q[1] - o[1]) * s).square();
                count += 1;
            }
        }
        let mut terms = LossTerms::zero();
        if count > 0 {
            terms.reprojection = sum / count as f64;
        }
        terms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaResult {
    /// Optimized cameras; depth scale and shift are fitted afterwards so the
    /// raw depth maps agree with the triangulated points.
    pub cams: Vec<CameraParams>,
    pub points: Vec<[f64; 3]>,
    /// Mean pixel distance between labeled and reprojected observations.
    pub reprojection_error: f64,
    pub trace: LossTrace,
}

impl BaResult {
    /// Alignment state with these cameras and undeformed meshes, for
    /// evaluation with the same protocol as the other methods.
    pub fn state(&self, meshes: Vec<DeformableMesh>, weights: LossWeights) -> AlignmentState {
        AlignmentState {
            cams: self.cams.clone(),
            meshes,
            weights,
            stage: Stage::CameraOnly,
        }
    }
}

/// Least squares `z ≈ s·d + η`; falls back to a pure scale for fewer than
/// two samples or constant `d`.
fn fit_scale_shift(samples: &[(f64, f64)]) -> (f64, f64) {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return (1.0, 0.0);
    }
    let (md, mz) = samples
        .iter()
        .fold((0.0, 0.0), |(a, b), (d, z)| (a + d / n, b + z / n));
    let var = samples.iter().map(|(d, _)| (d - md).powi(2)).sum::<f64>();
    if samples.len() >= 2 && var > 1e-12 * md.abs().max(1.0).powi(2) {
        let cov = samples
            .iter()
            .map(|(d, z)| (d - md) * (z - mz))
            .sum::<f64>();
        let s = cov / var;
        (s, mz - s * md)
    } else if md != 0.0 {
        (mz / md, 0.0)
    } else {
        (1.0, 0.0)
    }
}

/// Runs bundle adjustment from the given initial cameras for
/// `camera_iterations + deformation_iterations` steps, matching the total
/// budget of the two-stage alignment.
pub fn traditional_ba(
    scene: &Scene,
    initial: &[CameraParams],
    config: &OptimizerConfig,
) -> Result<BaResult> {
    config.validate()?;
    let corrs = &scene.correspondences;
    let n = scene.n_images();
    if initial.len() != n {
        return Err(Error::Evaluation(
            "one initial camera per image is required".into(),
        ));
    }
    if (0..corrs.n_points()).all(|c| corrs.views(c) < 2) {
        return Err(Error::Degenerate(
            "no correspondence is visible in two images".into(),
        ));
    }
    // Keep only correspondences that constrain something.
    let keep: Vec<usize> = (0..corrs.n_points())
        .filter(|&c| corrs.views(c) >= 2)
        .collect();
    let sub = scene.with_correspondences(corrs.select(&keep));
    let corrs = &sub.correspondences;

    let mut depths = vec![vec![None; corrs.n_points()]; n];
    for (i, rec) in sub.images.iter().enumerate() {
        for (c, slot) in depths[i].iter_mut().enumerate() {
            if let Some(px) = corrs.pixel(i, c) {
                *slot = Some(sample_depth(rec, px)?);
            }
        }
    }
    // Initial points: mean of the initial backprojections.
    let points0: Vec<[f64; 3]> = (0..corrs.n_points())
        .map(|c| {
            let mut acc = [0.0; 3];
            let mut m = 0.0;
            for (i, rec) in sub.images.iter().enumerate() {
                if let (Some([u, v]), Some(d)) = (corrs.pixel(i, c), depths[i][c]) {
                    let s = rec.scale();
                    let p = crate::camera::backproject([u / s, v / s], d, &initial[i]);
                    for k in 0..3 {
                        acc[k] += p[k];
                    }
                    m += 1.0;
                }
            }
            acc.map(|a| a / m)
        })
        .collect();

    let problem = BaProblem::new(&sub, initial);
    let mut x = problem.pack(initial, &points0);
    let rates = &config.learning_rates;
    let lrs: Vec<f64> = (0..problem.layout.len)
        .map(|k| match problem.layout.group(k) {
            (Some(0), Group::Rotation | Group::Translation) => 0.0,
            (_, Group::ScaleShift) => 0.0,
            (_, g) => rates.of(g),
        })
        .collect();
    let quats: Vec<usize> = (1..n).map(|i| problem.layout.cam(i)).collect();
    let iterations = config.camera_iterations + config.deformation_iterations;
    let trace = descend(&problem, &mut x, &lrs, &quats, iterations, &config.adam)?;

    let mut cams = problem.cameras(&x);
    let points = problem.points(&x);
    let mut err_sum = 0.0;
    let mut err_n = 0.0;
    for (i, cam) in cams.iter_mut().enumerate() {
        let posed = Posed::new(&*cam);
        let s = sub.images[i].scale();
        let mut samples = Vec::new();
        for (c, p) in points.iter().enumerate() {
            let (Some([u, v]), Some(d)) = (corrs.pixel(i, c), depths[i][c]) else {
                continue;
            };
            let (q, _) = posed.project_with_depth(*p);
            err_sum += ((q[0] * s - u).powi(2) + (q[1] * s - v).powi(2)).sqrt();
            err_n += 1.0;
            samples.push((d, posed.to_camera(*p)[2]));
        }
        let (scale, shift) = fit_scale_shift(&samples);
        cam.depth_scale = scale;
        cam.depth_shift = shift;
    }
    Ok(BaResult {
        cams,
        points,
        reprojection_error: err_sum / err_n,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::axis_angle_quaternion;

    fn cam_with(q: [f64; 4]) -> CameraParams {
        CameraParams {
            rotation: q,
            ..CameraParams::initial(100, 100)
        }
    }

    /// `n_points` correspondences, each seen by the images in `views`.
    fn corrs(views: &[usize], n_points: usize, n_images: usize) -> CorrespondenceSet {
        let mut set = CorrespondenceSet::empty(n_images);
        for c in 0..n_points {
            let v = views;
            let obs = (0..n_images)
                .map(|i| v.contains(&i).then_some([c as f64, i as f64]))
                .collect();
            set.push(c as u64, obs);
        }
        set
    }

    #[test]
    fn relative_rotation_identity_and_gauge() {
        let a: Vec<_> = (0..4)
            .map(|i| cam_with(axis_angle_quaternion([1.0, 2.0, i as f64], 0.3 * i as f64)))
            .collect();
        assert!(relative_rotation_error(&a, &a).unwrap() < 1e-6);
        let g = axis_angle_quaternion([0.3, -1.0, 0.5], 0.9);
        let rotated: Vec<_> = a
            .iter()
            .map(|c| {
                let r = crate::camera::rotation_matrix(&g);
                let m = c.rotation_matrix();
                let prod: [[f64; 3]; 3] = std::array::from_fn(|i| {
                    std::array::from_fn(|j| (0..3).map(|k| r[i][k] * m[k][j]).sum())
                });
                cam_with(quaternion_from_matrix(&prod))
            })
            .collect();
        assert!(relative_rotation_error(&a, &rotated).unwrap() < 1e-6);
    }

    fn quaternion_from_matrix(m: &[[f64; 3]; 3]) -> [f64; 4] {
        let w = (1.0 + m[0][0] + m[1][1] + m[2][2]).max(0.0).sqrt() / 2.0;
        [
            w,
            (m[2][1] - m[1][2]) / (4.0 * w),
            (m[0][2] - m[2][0]) / (4.0 * w),
            (m[1][0] - m[0][1]) / (4.0 * w),
        ]
    }

    #[test]
    fn relative_rotation_ten_degrees_about_z() {
        let a = vec![
            cam_with([1.0, 0.0, 0.0, 0.0]),
            cam_with([1.0, 0.0, 0.0, 0.0]),
        ];
        let b = vec![
            cam_with([1.0, 0.0, 0.0, 0.0]),
            cam_with(axis_angle_quaternion([0.0, 0.0, 1.0], 10f64.to_radians())),
        ];
        let e = relative_rotation_error(&a, &b).unwrap();
        assert!((e - 10.0).abs() < 1e-9, "{e}");
        assert_eq!(e, relative_rotation_error(&b, &a).unwrap());
        assert!(relative_rotation_error(&a, &b[..1]).is_err());
    }

    #[test]
    fn pcc_counts_pairs_within_radius() {
        let d = [Some(0.01), Some(0.05)];
        let r = pcc_from_distances(&d, 0.03).unwrap();
        assert_eq!((r.n_correct, r.n_evaluated), (1, 2));
        assert_eq!(r.fraction_correct, 0.5);
        let behind = [None, None];
        assert_eq!(
            pcc_from_distances(&behind, 0.03).unwrap().fraction_correct,
            0.0
        );
        assert!(pcc_from_distances(&[], 0.03).is_err());
    }

    #[test]
    fn split_zero_is_noop() {
        let set = corrs(&[0, 1], 8, 2);
        let s = holdout_split(&set, 0, 4).unwrap();
        assert_eq!(s.train, set);
        assert_eq!(s.holdout.n_points(), 0);
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let set = corrs(&[0, 1, 2], 20, 3);
        let a = holdout_split(&set, 5, 11).unwrap();
        let b = holdout_split(&set, 5, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.holdout.n_points(), 5);
        assert_eq!(a.train.n_points(), 15);
        let mut ids: Vec<u64> = a.train.ids.iter().chain(&a.holdout.ids).copied().collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..20).collect::<Vec<u64>>());
    }

    #[test]
    fn split_distinct_seeds_vary() {
        let set = corrs(&[0, 1], 20, 2);
        let first = holdout_split(&set, 5, 0).unwrap().holdout_indices;
        let differing = (1..100u64)
            .filter(|&s| holdout_split(&set, 5, s).unwrap().holdout_indices != first)
            .count();
        // C(20,5) = 15504 subsets; a repeat is rare.
        assert!(differing >= 95);
    }

    #[test]
    fn split_needs_enough_training_points() {
        let set = corrs(&[0, 1], 8, 2);
        assert!(matches!(holdout_split(&set, 5, 0), Err(Error::Split(_))));
        let single = corrs(&[0], 10, 2);
        assert!(holdout_split(&single, 1, 0).is_err());
    }

    fn consistent_scene() -> (Scene, Vec<CameraParams>) {
        let spec = crate::synthetic::SyntheticSpec {
            width: 160,
            height: 120,
            n_cameras: 4,
            n_correspondences: 30,
            seed: 2,
            ..Default::default()
        };
        let (scene, gt) = crate::synthetic::generate_scene(&spec).unwrap();
        let scene = crate::scene::normalize_depths(&scene).unwrap();
        let cams = gt.cameras_for_normalizer(scene.depth_normalizer);
        (scene, cams)
    }

    #[test]
    fn bundle_adjustment_recovers_consistent_scene() {
        let (scene, truth) = consistent_scene();
        // Ground truth moved by a few degrees and with unit focal length.
        let jitter = crate::optimizer::initial_cameras(
            &scene.images.iter().map(|r| r.dims()).collect::<Vec<_>>(),
            3.0,
            9,
        );
        let initial: Vec<CameraParams> = truth
            .iter()
            .zip(&jitter)
            .enumerate()
            .map(|(i, (t, j))| {
                let mut c = *t;
                if i > 0 {
                    c.rotation = crate::synthetic::quaternion_product(t.rotation, j.rotation);
                    c.translation = t.translation.map(|x| x + 0.05);
                }
                c.fx = 1.0;
                c.fy = 1.0;
                c
            })
            .collect();
        let before = relative_rotation_error(&initial, &truth).unwrap();
        let result = traditional_ba(&scene, &initial, &OptimizerConfig::default()).unwrap();
        let after = relative_rotation_error(&result.cams, &truth).unwrap();
        assert!(
            result.reprojection_error <= 0.5,
            "{} px",
            result.reprojection_error
        );
        assert!(after < 2.0, "{after} deg (from {before})");
    }

    #[test]
    fn bundle_adjustment_rejects_single_view_points() {
        let (scene, truth) = consistent_scene();
        let n = scene.n_images();
        let mut single = CorrespondenceSet::empty(n);
        for c in 0..scene.correspondences.n_points() {
            let i = (0..n)
                .find(|&i| scene.correspondences.visible(i, c))
                .unwrap();
            let obs = (0..n)
                .map(|k| (k == i).then(|| scene.correspondences.pixel(i, c).unwrap()))
                .collect();
            single.push(c as u64, obs);
        }
        let err = traditional_ba(
            &scene.with_correspondences(single),
            &truth,
            &OptimizerConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)), "{err}");
    }

    #[test]
    fn scale_shift_fit_recovers_line() {
        let samples: Vec<_> = (0..5).map(|k| (k as f64, 2.0 * k as f64 + 0.5)).collect();
        let (s, e) = fit_scale_shift(&samples);
        assert!((s - 2.0).abs() < 1e-12 && (e - 0.5).abs() < 1e-12);
        assert_eq!(fit_scale_shift(&[(2.0, 3.0)]), (1.5, 0.0));
    }
}
