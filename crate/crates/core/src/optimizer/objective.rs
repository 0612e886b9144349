use serde::{Deserialize, Serialize};

use super::layout::{self, Layout, CAM_BLOCK};
use super::AlignmentState;
use crate::autodiff::{value_and_gradient, Real, Tape};
use crate::camera::{
    loss_3d_terms, regularizer_terms, Camera, LossBreakdown, LossTerms, LossWeights, Observations,
    Posed,
};
use crate::mesh::{arap_image, flip_image, z_image};
use crate::scene::Pixel;

/// Correspondence term driving the alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataTerm {
    /// Squared 3D distance between backprojected correspondences.
    #[default]
    L3d,
    /// Squared pixel reprojection error between views.
    L2d,
}

/// A differentiable scalar objective over a flat parameter vector.
pub trait Objective {
    fn weights(&self) -> &LossWeights;
    fn terms<T: Real>(&self, x: &[T]) -> LossTerms<T>;

    fn evaluate(&self, x: &[f64]) -> LossBreakdown {
        LossBreakdown::new(self.terms(x), self.weights())
    }
}

/// Exact gradient of the weighted total by reverse accumulation.
pub fn gradient<O: Objective>(
    objective: &O,
    tape: &mut Tape,
    x: &[f64],
) -> (LossBreakdown, Vec<f64>) {
    let weights = *objective.weights();
    let (_, grad, terms) = value_and_gradient(tape, x, |v| {
        let t = objective.terms(v);
        (t.total(&weights), t.value())
    });
    (LossBreakdown::new(terms, &weights), grad)
}

/// Mean squared pixel distance, over ordered image pairs, between the
/// reprojection of a correspondence backprojected from one image and its
/// labeled position in the other. `scales` converts normalized coordinates
/// of each target image back to pixels.
pub fn loss_2d_terms<T: Real>(cams: &[Camera<T>], obs: &Observations<T>, scales: &[f64]) -> T {
    let posed: Vec<Posed<'_, T>> = cams.iter().map(Posed::new).collect();
    let mut sum = T::zero();
    let mut count = 0usize;
    for i in 0..cams.len() {
        for j in 0..cams.len() {
            if i == j {
                continue;
            }
            for (oi, oj) in obs[i].iter().zip(&obs[j]) {
                if let (Some((pi, di)), Some((pj, _))) = (oi, oj) {
                    let p = posed[i].backproject(*pi, *di);
                    let (q, _) = posed[j].project_with_depth(p);
                    sum += ((q[0] - pj[0]) * scales[j]).square()
                        + ((q[1] - pj[1]) * scales[j]).square();
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

pub(crate) fn camera_from_slice<T: Real>(x: &[T], base: usize, cx: f64, cy: f64) -> Camera<T> {
    Camera {
        rotation: [x[base], x[base + 1], x[base + 2], x[base + 3]],
        translation: [
            x[base + layout::T],
            x[base + layout::T + 1],
            x[base + layout::T + 2],
        ],
        fx: x[base + layout::FX],
        fy: x[base + layout::FY],
        cx,
        cy,
        depth_scale: x[base + layout::S],
        depth_shift: x[base + layout::ETA],
    }
}

pub(crate) fn write_camera(x: &mut [f64], base: usize, cam: &Camera) {
    x[base..base + 4].copy_from_slice(&cam.rotation);
    x[base + layout::T..base + layout::T + 3].copy_from_slice(&cam.translation);
    x[base + layout::FX] = cam.fx;
    x[base + layout::FY] = cam.fy;
    x[base + layout::S] = cam.depth_scale;
    x[base + layout::ETA] = cam.depth_shift;
}

/// Camera alignment objective, optionally extended with the deformation
/// terms. Mesh coordinates are normalized by each image's longest side.
#[derive(Debug, Clone)]
pub struct AlignProblem {
    pub layout: Layout,
    pub weights: LossWeights,
    pub data_term: DataTerm,
    pub deformation: bool,
    principal: Vec<[f64; 2]>,
    dims: Vec<(usize, usize)>,
    scales: Vec<f64>,
    rest: Vec<Vec<Pixel>>,
    faces: Vec<Vec<[usize; 3]>>,
    areas0: Vec<Vec<f64>>,
    z0: Vec<Vec<f64>>,
    point_vertex: Vec<Vec<Option<usize>>>,
}

impl AlignProblem {
    pub fn new(state: &AlignmentState, data_term: DataTerm, deformation: bool) -> Self {
        let meshes = &state.meshes;
        let layout = Layout::new(meshes.iter().map(|m| m.n_vertices()).collect(), 0);
        let dims: Vec<_> = meshes
            .iter()
            .map(|m| (m.topology.width, m.topology.height))
            .collect();
        let scales: Vec<f64> = dims.iter().map(|&(w, h)| w.max(h) as f64).collect();
        AlignProblem {
            layout,
            weights: state.weights,
            data_term,
            deformation,
            principal: state.cams.iter().map(|c| [c.cx, c.cy]).collect(),
            rest: meshes
                .iter()
                .zip(&scales)
                .map(|(m, s)| {
                    m.topology
                        .vertices0
                        .iter()
                        .map(|p| [p[0] / s, p[1] / s])
                        .collect()
                })
                .collect(),
            faces: meshes.iter().map(|m| m.topology.faces.clone()).collect(),
            areas0: meshes
                .iter()
                .zip(&scales)
                .map(|(m, s)| m.topology.areas0.iter().map(|a| a / (s * s)).collect())
                .collect(),
            z0: meshes.iter().map(|m| m.z0.clone()).collect(),
            point_vertex: meshes.iter().map(|m| m.point_vertex.clone()).collect(),
            dims,
            scales,
        }
    }

    pub fn pack(&self, state: &AlignmentState) -> Vec<f64> {
        let mut x = vec![0.0; self.layout.len];
        for (i, cam) in state.cams.iter().enumerate() {
            write_camera(&mut x, self.layout.cam(i), cam);
        }
        for (i, mesh) in state.meshes.iter().enumerate() {
            let s = self.scales[i];
            for (v, p) in mesh.positions.iter().enumerate() {
                let k = self.layout.vertex(i, v);
                x[k] = p[0] / s;
                x[k + 1] = p[1] / s;
                x[k + 2] = p[2];
            }
        }
        x
    }

    /// Writes `x` back into `state`, which must be the state `x` was packed
    /// from or a copy of it.
    pub fn unpack(&self, x: &[f64], state: &mut AlignmentState) {
        for (i, cam) in state.cams.iter_mut().enumerate() {
            *cam = camera_from_slice(x, self.layout.cam(i), cam.cx, cam.cy);
        }
        // Coordinates that did not move keep their exact value; scaling
        // there and back is not an identity in floating point.
        for (i, mesh) in state.meshes.iter_mut().enumerate() {
            let s = self.scales[i];
            for (v, p) in mesh.positions.iter_mut().enumerate() {
                let k = self.layout.vertex(i, v);
                if x[k] != p[0] / s {
                    p[0] = x[k] * s;
                }
                if x[k + 1] != p[1] / s {
                    p[1] = x[k + 1] * s;
                }
                p[2] = x[k + 2];
            }
        }
    }

    pub fn cameras<T: Real>(&self, x: &[T]) -> Vec<Camera<T>> {
        (0..self.layout.n_cams)
            .map(|i| {
                let [cx, cy] = self.principal[i];
                camera_from_slice(x, i * CAM_BLOCK, cx, cy)
            })
            .collect()
    }

    fn observations<T: Real>(&self, x: &[T]) -> Observations<T> {
        self.point_vertex
            .iter()
            .enumerate()
            .map(|(i, col)| {
                col.iter()
                    .map(|v| {
                        v.map(|v| {
                            let k = self.layout.vertex(i, v);
                            ([x[k], x[k + 1]], x[k + 2])
                        })
                    })
                    .collect()
            })
            .collect()
    }

    fn vertices_xy<T: Real>(&self, x: &[T], i: usize) -> Vec<[T; 2]> {
        (0..self.layout.n_vertices[i])
            .map(|v| {
                let k = self.layout.vertex(i, v);
                [x[k], x[k + 1]]
            })
            .collect()
    }
}

impl Objective for AlignProblem {
    fn weights(&self) -> &LossWeights {
        &self.weights
    }

    fn terms<T: Real>(&self, x: &[T]) -> LossTerms<T> {
        let cams = self.cameras(x);
        let mut terms = regularizer_terms(&cams, &self.dims);
        let obs = self.observations(x);
        match self.data_term {
            DataTerm::L3d => terms.l3d = loss_3d_terms(&cams, &obs),
            DataTerm::L2d => terms.l2d = loss_2d_terms(&cams, &obs, &self.scales),
        }
        if self.deformation {
            let n = self.layout.n_cams as f64;
            for i in 0..self.layout.n_cams {
                let xy = self.vertices_xy(x, i);
                terms.arap2d += arap_image(&self.faces[i], &self.rest[i], &xy);
                terms.flip += flip_image(&self.faces[i], &self.areas0[i], &xy);
                let z: Vec<T> = (0..self.layout.n_vertices[i])
                    .map(|v| x[self.layout.vertex(i, v) + 2])
                    .collect();
                terms.z += z_image(&self.z0[i], &z);
            }
            terms.arap2d = terms.arap2d / n;
            terms.flip = terms.flip / n;
            terms.z = terms.z / n;
        }
        terms
    }
}
