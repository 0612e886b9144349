//! Two-stage alignment: cameras first, then cameras and mesh vertices jointly.

pub mod adam;
pub mod layout;
pub mod objective;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::camera::{CameraParams, LossBreakdown, LossWeights};
use crate::error::{Error, Result};
use crate::mesh::DeformableMesh;
use crate::scene::{self, Scene};
pub use adam::{adam_step, AdamConfig, Moments};
pub use layout::{Group, Layout};
pub use objective::{gradient, AlignProblem, DataTerm, Objective};

/// Total loss may not grow beyond this multiple of its first value.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    CameraOnly,
    Deformation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentState {
    pub cams: Vec<CameraParams>,
    pub meshes: Vec<DeformableMesh>,
    pub weights: LossWeights,
    pub stage: Stage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningRates {
    pub rotation: f64,
    pub translation: f64,
    pub intrinsics: f64,
    pub scale_shift: f64,
    pub vertices: f64,
    pub points: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        LearningRates {
            rotation: 5e-3,
            translation: 1e-2,
            intrinsics: 5e-3,
            scale_shift: 1e-2,
            vertices: 1e-3,
            points: 1e-2,
        }
    }
}

impl LearningRates {
    pub fn of(&self, group: Group) -> f64 {
        match group {
            Group::Rotation => self.rotation,
            Group::Translation => self.translation,
            Group::Intrinsics => self.intrinsics,
            Group::ScaleShift => self.scale_shift,
            Group::Vertices => self.vertices,
            Group::Points => self.points,
        }
    }

    fn all(&self) -> [f64; 6] {
        [
            self.rotation,
            self.translation,
            self.intrinsics,
            self.scale_shift,
            self.vertices,
            self.points,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rates: LearningRates,
    pub adam: AdamConfig,
    pub camera_iterations: usize,
    pub deformation_iterations: usize,
    pub seed: u64,
    /// Upper bound of the random initial rotation of cameras after the first.
    pub jitter_degrees: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rates: LearningRates::default(),
            adam: AdamConfig::default(),
            camera_iterations: 2000,
            deformation_iterations: 2000,
            seed: 0,
            jitter_degrees: 2.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !self
            .learning_rates
            .all()
            .iter()
            .all(|lr| *lr > 0.0 && lr.is_finite())
        {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !self.adam.is_valid() {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Per-iteration loss history of one stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub entries: Vec<LossBreakdown>,
}

impl LossTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first(&self) -> Option<&LossBreakdown> {
        self.entries.first()
    }

    pub fn last(&self) -> Option<&LossBreakdown> {
        self.entries.last()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.total).collect()
    }
}

/// Adam descent on `x`. Coordinates with a zero learning rate never move;
/// the quaternions of the listed camera blocks are renormalized after every
/// step.
pub(crate) fn descend<O: Objective>(
    objective: &O,
    x: &mut [f64],
    learning_rates: &[f64],
    quaternion_blocks: &[usize],
    iterations: usize,
    adam: &AdamConfig,
) -> Result<LossTrace> {
    let mut tape = Tape::new();
    let mut moments = Moments::zeros(x.len());
    let mut trace = LossTrace::default();
    let mut initial = None;
    for it in 0..iterations {
        let (breakdown, mut grad) = gradient(objective, &mut tape, x);
        if let Some((name, _)) = breakdown
            .terms
            .named()
            .into_iter()
            .find(|(_, v)| !v.is_finite())
        {
            return Err(Error::NonFinite {
                term: name.to_string(),
                iteration: it,
            });
        }
        if !breakdown.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                term: "gradient".into(),
                iteration: it,
            });
        }
        let first = *initial.get_or_insert(breakdown.total);
        if first > 0.0 && breakdown.total > DIVERGENCE_FACTOR * first {
            return Err(Error::Divergence {
                iteration: it,
                loss: breakdown.total,
                initial: first,
            });
        }
        trace.entries.push(breakdown);
        for (g, lr) in grad.iter_mut().zip(learning_rates) {
            if *lr == 0.0 {
                *g = 0.0;
            }
        }
        adam_step(x, &grad, &mut moments, it + 1, learning_rates, adam);
        for &base in quaternion_blocks {
            let q = &mut x[base..base + 4];
            let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            q.iter_mut().for_each(|v| *v /= n);
        }
    }
    Ok(trace)
}

/// Learning rate per coordinate. Mesh vertices are frozen in the camera
/// stage; the first camera's pose is always frozen to fix the gauge.
pub fn learning_rates_for(layout: &Layout, stage: Stage, rates: &LearningRates) -> Vec<f64> {
    (0..layout.len)
        .map(|k| match layout.group(k) {
            (Some(0), Group::Rotation | Group::Translation) => 0.0,
            (_, Group::Vertices) if stage == Stage::CameraOnly => 0.0,
            (_, g) => rates.of(g),
        })
        .collect()
}

pub fn run_stage(
    state: &AlignmentState,
    stage: Stage,
    data_term: DataTerm,
    config: &OptimizerConfig,
) -> Result<(AlignmentState, LossTrace)> {
    let iterations = match stage {
        Stage::CameraOnly => config.camera_iterations,
        Stage::Deformation => config.deformation_iterations,
    };
    let problem = AlignProblem::new(state, data_term, stage == Stage::Deformation);
    let mut x = problem.pack(state);
    let lrs = learning_rates_for(&problem.layout, stage, &config.learning_rates);
    let quats: Vec<usize> = (1..state.cams.len())
        .map(|i| problem.layout.cam(i))
        .collect();
    let trace = descend(&problem, &mut x, &lrs, &quats, iterations, &config.adam)?;
    let mut out = state.clone();
    problem.unpack(&x, &mut out);
    out.stage = stage;
    Ok((out, trace))
}

/// Unit quaternion of a rotation by `angle` radians about `axis`.
pub fn axis_angle_quaternion(axis: [f64; 3], angle: f64) -> [f64; 4] {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let (s, c) = (angle / 2.0).sin_cos();
    [c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n]
}

/// Cameras at the identity pose; every camera after the first gets a random
/// rotation of at most `jitter_degrees`.
pub fn initial_cameras(
    dims: &[(usize, usize)],
    jitter_degrees: f64,
    seed: u64,
) -> Vec<CameraParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dims.iter()
        .enumerate()
        .map(|(i, &(w, h))| {
            let mut cam = CameraParams::initial(w, h);
            if i > 0 && jitter_degrees > 0.0 {
                let axis = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0f64),
                ];
                let angle = rng.gen_range(0.0..jitter_degrees).to_radians();
                if axis.iter().any(|a| *a != 0.0) {
                    cam.rotation = axis_angle_quaternion(axis, angle);
                }
            }
            cam
        })
        .collect()
}

/// Meshes over each image's visible correspondences and the initial cameras.
pub fn initial_state(
    scene: &Scene,
    weights: &LossWeights,
    config: &OptimizerConfig,
) -> Result<AlignmentState> {
    let corrs = &scene.correspondences;
    let meshes = scene
        .images
        .iter()
        .enumerate()
        .map(|(i, rec)| DeformableMesh::build(rec, &corrs.pixels[i]))
        .collect::<Result<Vec<_>>>()?;
    let dims: Vec<_> = scene.images.iter().map(|r| r.dims()).collect();
    Ok(AlignmentState {
        cams: initial_cameras(&dims, config.jitter_degrees, config.seed),
        meshes,
        weights: *weights,
        stage: Stage::CameraOnly,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignOptions {
    pub weights: LossWeights,
    pub data_term: DataTerm,
    /// Run the deformation stage after the camera stage.
    pub deformation: bool,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions {
            weights: LossWeights::default(),
            data_term: DataTerm::L3d,
            deformation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub state: AlignmentState,
    pub camera_trace: LossTrace,
    pub deformation_trace: LossTrace,
}

/// Aligns a validated scene whose depths are already normalized.
pub fn align(scene: &Scene, config: &OptimizerConfig, options: &AlignOptions) -> Result<Alignment> {
    config.validate()?;
    if !options.weights.is_valid() {
        return Err(Error::Config("loss weights must be non-negative".into()));
    }
    scene::validate(scene).into_result()?;
    let state = initial_state(scene, &options.weights, config)?;
    if scene.n_images() < 2 {
        return Ok(Alignment {
            state,
            camera_trace: LossTrace::default(),
            deformation_trace: LossTrace::default(),
        });
    }
    let (state, camera_trace) = run_stage(&state, Stage::CameraOnly, options.data_term, config)?;
    let (state, deformation_trace) = if options.deformation {
        run_stage(&state, Stage::Deformation, options.data_term, config)?
    } else {
        (state, LossTrace::default())
    };
    Ok(Alignment {
        state,
        camera_trace,
        deformation_trace,
    })
}
