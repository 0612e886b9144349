//! End-to-end runs behind the command-line subcommands.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{holdout_split, pcc_sweep, relative_rotation_error, traditional_ba, PccResult};
use crate::optimizer::{align, initial_state, AlignmentState, LossTrace};
use crate::output::{export_all, PointCloud, Report};
use crate::scene::{load_scene, normalize_depths, save_scene, validate, Scene};
use crate::synthetic::{generate_scene, GroundTruth, SyntheticSpec};

/// Name of the ground-truth file written next to a synthetic scene.
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub state: AlignmentState,
    pub camera_trace: LossTrace,
    pub deformation_trace: LossTrace,
}

/// Fits `method` to a normalized scene. Bundle adjustment starts from the
/// same initial cameras as the alignment and records its trace as the
/// camera trace.
pub fn run_method(scene: &Scene, config: &RunConfig, method: Method) -> Result<MethodRun> {
    match method {
        Method::Full | Method::CameraOnly => {
            let options = crate::optimizer::AlignOptions {
                deformation: method == Method::Full,
                ..config.align_options()
            };
            let a = align(scene, &config.optimizer, &options)?;
            Ok(MethodRun {
                state: a.state,
                camera_trace: a.camera_trace,
                deformation_trace: a.deformation_trace,
            })
        }
        Method::TraditionalBa => {
            validate(scene).into_result()?;
            let init = initial_state(scene, &config.weights, &config.optimizer)?;
            let ba = traditional_ba(scene, &init.cams, &config.optimizer)?;
            log::info!(
                "bundle adjustment: mean reprojection error {:.3} px",
                ba.reprojection_error
            );
            Ok(MethodRun {
                state: ba.state(init.meshes, config.weights),
                camera_trace: ba.trace,
                deformation_trace: LossTrace::default(),
            })
        }
    }
}

fn scene_path(config: &RunConfig) -> Result<&Path> {
    config
        .scene
        .as_deref()
        .ok_or_else(|| Error::Config("no scene directory given".into()))
}

fn out_path(config: &RunConfig) -> Result<&Path> {
    config
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("no output directory given".into()))
}

fn load_normalized(config: &RunConfig) -> Result<Scene> {
    let scene = load_scene(scene_path(config)?)?;
    for w in validate(&scene).into_result()? {
        log::warn!("{w}");
    }
    normalize_depths(&scene)
}

fn report_for(config: &RunConfig, run: &MethodRun) -> Report {
    Report {
        config: serde_json::to_value(config).expect("config serializes"),
        camera_final: run.camera_trace.last().copied(),
        deformation_final: run.deformation_trace.last().copied(),
        camera_trace: run.camera_trace.clone(),
        deformation_trace: run.deformation_trace.clone(),
        ..Report::default()
    }
}

/// Load, normalize, align with the configured method and export.
pub fn run_align(config: &RunConfig) -> Result<(Report, PointCloud)> {
    config.validate()?;
    let out = out_path(config)?;
    let scene = load_normalized(config)?;
    let run = run_method(&scene, config, config.method)?;
    let report = report_for(config, &run);
    let cloud = export_all(&scene, &run.state, &report, out, config.stride)?;
    log::info!("wrote {} points to {}", cloud.len(), out.display());
    Ok((report, cloud))
}

/// Re-exports a saved alignment state without optimizing. A `report.json`
/// next to the state file is carried over unchanged.
pub fn run_export(config: &RunConfig, state_path: &Path) -> Result<PointCloud> {
    config.validate()?;
    let out = out_path(config)?;
    let scene = load_normalized(config)?;
    let text = fs::read_to_string(state_path).map_err(|e| Error::io(state_path, e))?;
    let state: AlignmentState =
        serde_json::from_str(&text).map_err(|e| Error::decode(state_path, e))?;
    if state.cams.len() != scene.n_images() || state.meshes.len() != scene.n_images() {
        return Err(Error::Structure(format!(
            "state has {} cameras and {} meshes for a scene of {} images",
            state.cams.len(),
            state.meshes.len(),
            scene.n_images()
        )));
    }
    for (i, (rec, mesh)) in scene.images.iter().zip(&state.meshes).enumerate() {
        if (mesh.topology.width, mesh.topology.height) != rec.dims() {
            return Err(Error::Structure(format!(
                "mesh {i} does not match its image size"
            )));
        }
    }
    let report_path = state_path.with_file_name("report.json");
    let report = if report_path.is_file() {
        let text = fs::read_to_string(&report_path).map_err(|e| Error::io(&report_path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::decode(&report_path, e))?
    } else {
        Report {
            config: serde_json::to_value(config).expect("config serializes"),
            ..Report::default()
        }
    };
    export_all(&scene, &state, &report, out, config.stride)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEval {
    pub method: Method,
    pub pcc: Vec<PccResult>,
    /// Mean pairwise relative rotation error against ground truth, when the
    /// scene ships with one.
    pub rotation_error_degrees: Option<f64>,
    pub final_loss: Option<f64>,
}

/// Contents of `eval.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: serde_json::Value,
    pub alphas: Vec<f64>,
    pub holdout_ids: Vec<u64>,
    pub methods: Vec<MethodEval>,
}

impl EvalReport {
    pub fn method(&self, m: Method) -> Option<&MethodEval> {
        self.methods.iter().find(|e| e.method == m)
    }
}

/// Evaluates `methods` on one scene: the holdout correspondences are removed
/// before depth normalization and alignment, then transferred between views
/// with each method's result.
pub fn evaluate_scene(
    scene: &Scene,
    truth: Option<&GroundTruth>,
    config: &RunConfig,
    methods: &[Method],
) -> Result<EvalReport> {
    config.validate()?;
    let split = holdout_split(
        &scene.correspondences,
        config.eval.holdout,
        config.eval.seed,
    )?;
    let train = normalize_depths(&scene.with_correspondences(split.train.clone()))?;
    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let run = run_method(&train, config, method)?;
        let pcc = if split.holdout.n_points() > 0 {
            pcc_sweep(&train, &run.state, &split.holdout, &config.eval.alphas)?
        } else {
            Vec::new()
        };
        let rotation_error_degrees = truth
            .map(|t| relative_rotation_error(&run.state.cams, &t.cameras))
            .transpose()?;
        let final_loss = run
            .deformation_trace
            .last()
            .or(run.camera_trace.last())
            .map(|b| b.total);
        log::info!(
            "{}: pcc {:?}, rotation error {:?}",
            method.name(),
            pcc.iter().map(|p| p.fraction_correct).collect::<Vec<_>>(),
            rotation_error_degrees
        );
        out.push(MethodEval {
            method,
            pcc,
            rotation_error_degrees,
            final_loss,
        });
    }
    Ok(EvalReport {
        config: serde_json::to_value(config).expect("config serializes"),
        alphas: config.eval.alphas.clone(),
        holdout_ids: split.holdout.ids.clone(),
        methods: out,
    })
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::decode(path, e))
}

/// Loads the scene, evaluates and writes `eval.json` into the output
/// directory. Ground truth is read from the scene directory when present.
pub fn run_eval(config: &RunConfig, methods: &[Method]) -> Result<EvalReport> {
    let dir = scene_path(config)?;
    let out = out_path(config)?;
    let scene = load_scene(dir)?;
    for w in validate(&scene).into_result()? {
        log::warn!("{w}");
    }
    let gt_path = dir.join(GROUND_TRUTH_FILE);
    let truth = if gt_path.is_file() {
        Some(read_ground_truth(&gt_path)?)
    } else {
        None
    };
    let report = evaluate_scene(&scene, truth.as_ref(), config, methods)?;
    let export_err = |path: &Path, source| Error::Export {
        artifact: "eval.json".into(),
        path: path.to_path_buf(),
        source,
    };
    fs::create_dir_all(out).map_err(|e| export_err(out, e))?;
    let path = out.join("eval.json");
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| export_err(&path, e))?;
    Ok(report)
}

/// Generates a synthetic scene directory plus its ground truth. Ground-truth
/// cameras are in the world units of the raw (unnormalized) depth maps.
pub fn run_synth(spec: &SyntheticSpec, out: &Path) -> Result<(Scene, GroundTruth)> {
    let (scene, truth) = generate_scene(spec)?;
    save_scene(&scene, out)?;
    let path = out.join(GROUND_TRUTH_FILE);
    let mut text = serde_json::to_string_pretty(&truth).expect("ground truth serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|source| Error::Export {
        artifact: GROUND_TRUTH_FILE.into(),
        path,
        source,
    })?;
    Ok((scene, truth))
}

/// Checks a scene directory without optimizing; returns the warnings.
pub fn run_validate(dir: &Path) -> Result<(Scene, Vec<String>)> {
    let scene = load_scene(dir)?;
    let warnings = validate(&scene).into_result()?;
    Ok((scene, warnings))
}
