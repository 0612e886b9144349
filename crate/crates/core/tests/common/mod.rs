#![allow(dead_code)]

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use sparsewarp::autodiff::{central_differences, value_and_gradient, Tape, Var};
use sparsewarp::camera::{CameraParams, LossTerms, LossWeights};
use sparsewarp::eval::BaProblem;
use sparsewarp::optimizer::{
    gradient, initial_state, AlignProblem, AlignmentState, DataTerm, Objective, OptimizerConfig,
};
use sparsewarp::scene::{normalize_depths, Scene};
use sparsewarp::synthetic::{generate_scene, GroundTruth, SyntheticSpec};

pub fn synthetic(spec: SyntheticSpec) -> (Scene, GroundTruth) {
    generate_scene(&spec).expect("synthetic scene")
}

pub fn normalized(spec: SyntheticSpec) -> Scene {
    normalize_depths(&synthetic(spec).0).expect("normalizable")
}

/// Three 80x60 images with eight correspondences.
pub fn gradient_scene(seed: u64) -> Scene {
    normalized(SyntheticSpec {
        width: 80,
        height: 60,
        n_cameras: 3,
        n_correspondences: 8,
        seed,
        ..SyntheticSpec::default()
    })
}

fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let m = rng.gen_range(lo..hi);
    if rng.gen_bool(0.5) {
        m
    } else {
        -m
    }
}

/// Every camera and vertex parameter moved off its initial value. Depth
/// offsets are kept away from zero so finite differences do not straddle
/// the kink of `abs`. With `signed_scales` the depth scale and shift take
/// random signs, which activates the negativity penalty but can put
/// backprojected points behind a camera; otherwise the scale stays in
/// `[0.5, 1.5)` and the shift in `±[0.01, 0.1)` so camera-frame depth stays
/// positive.
pub fn perturbed_state(scene: &Scene, seed: u64, signed_scales: bool) -> AlignmentState {
    let mut state =
        initial_state(scene, &LossWeights::default(), &OptimizerConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for cam in &mut state.cams {
        for q in &mut cam.rotation {
            *q += rng.gen_range(-0.2..0.2);
        }
        for t in &mut cam.translation {
            *t = rng.gen_range(-0.3..0.3);
        }
        cam.fx = rng.gen_range(0.6..1.4);
        cam.fy = rng.gen_range(0.6..1.4);
        if signed_scales {
            cam.depth_scale = signed(&mut rng, 0.1, 1.5);
            cam.depth_shift = signed(&mut rng, 0.01, 0.2);
        } else {
            cam.depth_scale = rng.gen_range(0.5..1.5);
            cam.depth_shift = signed(&mut rng, 0.01, 0.1);
        }
    }
    for mesh in &mut state.meshes {
        for p in &mut mesh.positions {
            p[0] += rng.gen_range(-2.0..2.0);
            p[1] += rng.gen_range(-2.0..2.0);
            p[2] += signed(&mut rng, 0.01, 0.05);
        }
    }
    state
}

/// Richardson-extrapolated central differences, O(h^4).
pub fn numeric(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let coarse = central_differences(x, 1e-4, &f);
    let fine = central_differences(x, 5e-5, &f);
    coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| (4.0 * f - c) / 3.0)
        .collect()
}

/// Largest relative deviation over coordinates whose analytic gradient is
/// not negligible.
pub fn worst_relative(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .filter(|(g, _)| g.abs() > 1e-8)
        .map(|(g, n)| (g - n).abs() / g.abs().max(n.abs()))
        .fold(0.0, f64::max)
}

type Selector = (
    &'static str,
    for<'t> fn(&LossTerms<Var<'t>>) -> Var<'t>,
    fn(&LossTerms<f64>) -> f64,
);

pub const TERMS: [Selector; 9] = [
    ("l3d", |t| t.l3d, |t| t.l3d),
    ("l2d", |t| t.l2d, |t| t.l2d),
    ("scale", |t| t.scale, |t| t.scale),
    ("aspect", |t| t.aspect, |t| t.aspect),
    ("focal", |t| t.focal, |t| t.focal),
    (
        "neg",
        |t| t.neg_scale + t.neg_shift,
        |t| t.neg_scale + t.neg_shift,
    ),
    ("arap2d", |t| t.arap2d, |t| t.arap2d),
    ("flip", |t| t.flip, |t| t.flip),
    ("z", |t| t.z, |t| t.z),
];

/// Worst relative gradient error per checked quantity for one seed: every
/// individual term, both stage objectives with the 3D data term, and the
/// bundle adjustment reprojection term. The camera regularizers are checked
/// a second time with signed depth scales.
pub fn gradient_errors(seed: u64) -> Vec<(String, f64)> {
    let scene = gradient_scene(seed);
    let state = perturbed_state(&scene, seed, false);
    let mut tape = Tape::new();
    let mut out = Vec::new();
    for data in [DataTerm::L3d, DataTerm::L2d] {
        for deformation in [false, true] {
            let problem = AlignProblem::new(&state, data, deformation);
            let x = problem.pack(&state);
            let stage = if deformation { "deformation" } else { "camera" };
            if data == DataTerm::L3d {
                let (_, g) = gradient(&problem, &mut tape, &x);
                let n = numeric(&x, |p| problem.evaluate(p).total);
                out.push((format!("J_{stage}"), worst_relative(&g, &n)));
            }
            for (name, on_var, on_f64) in TERMS {
                let (_, g, _) =
                    value_and_gradient(&mut tape, &x, |v| (on_var(&problem.terms(v)), ()));
                let n = numeric(&x, |p| on_f64(&problem.terms(p)));
                out.push((format!("{name}/{data:?}/{stage}"), worst_relative(&g, &n)));
            }
        }
    }

    let signed = perturbed_state(&scene, seed, true);
    let problem = AlignProblem::new(&signed, DataTerm::L3d, false);
    let x = problem.pack(&signed);
    for (name, on_var, on_f64) in &TERMS[2..6] {
        let (_, g, _) = value_and_gradient(&mut tape, &x, |v| (on_var(&problem.terms(v)), ()));
        let n = numeric(&x, |p| on_f64(&problem.terms(p)));
        out.push((format!("{name}/signed"), worst_relative(&g, &n)));
    }

    let problem = BaProblem::new(&scene, &state.cams);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xba);
    let points: Vec<[f64; 3]> = (0..scene.correspondences.n_points())
        .map(|_| {
            [
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(1.5..3.0),
            ]
        })
        .collect();
    let cams: Vec<CameraParams> = state.cams.clone();
    let x = problem.pack(&cams, &points);
    let (_, g) = gradient(&problem, &mut tape, &x);
    let n = numeric(&x, |p| problem.evaluate(p).terms.reprojection);
    out.push(("reprojection".into(), worst_relative(&g, &n)));
    out
}

/// Sorted `(relative path, sha256)` of every file below `dir`.
pub fn tree_hashes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, Sha256::digest(fs::read(&p).unwrap()).to_vec()));
            }
        }
    }
    out.sort();
    out
}

pub fn file_hash(path: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

/// `true` when `d` is strictly inside the circumcircle of the
/// counter-clockwise (in y-down pixel space: positive signed area) triangle
/// `a b c`, beyond a relative tolerance. Plain lifted determinant, written
/// independently of the library's predicates.
pub fn strictly_inside_circumcircle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let rows = [a, b, c].map(|p| {
        let (x, y) = (p[0] - d[0], p[1] - d[1]);
        [x, y, x * x + y * y]
    });
    let det = rows[0][0] * (rows[1][1] * rows[2][2] - rows[2][1] * rows[1][2])
        - rows[0][1] * (rows[1][0] * rows[2][2] - rows[2][0] * rows[1][2])
        + rows[0][2] * (rows[1][0] * rows[2][1] - rows[2][0] * rows[1][1]);
    let orient = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let scale = rows.iter().map(|r| r[2]).fold(0.0, f64::max).powi(2);
    det * orient.signum() > 1e-9 * scale
}

/// Number of convex hull vertices by brute force: a point is on the hull
/// when some line through it has every other point on one side.
pub fn hull_size(points: &[[f64; 2]]) -> usize {
    let n = points.len();
    let mut on_hull = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (a, b) = (points[i], points[j]);
            let all_left = (0..n).all(|k| {
                let p = points[k];
                (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
            });
            if all_left {
                on_hull[i] = true;
                on_hull[j] = true;
            }
        }
    }
    on_hull.iter().filter(|&&h| h).count()
}

/// Empty-circumcircle violations plus an Euler face-count check
/// (`2n - h - 2` faces for points in general position).
pub fn delaunay_violations(points: &[[f64; 2]], faces: &[[usize; 3]]) -> Vec<String> {
    let mut out = Vec::new();
    for (k, f) in faces.iter().enumerate() {
        let [a, b, c] = f.map(|v| points[v]);
        for (v, p) in points.iter().enumerate() {
            if !f.contains(&v) && strictly_inside_circumcircle(a, b, c, *p) {
                out.push(format!("point {v} inside face {k}"));
            }
        }
    }
    let expected = 2 * points.len() - hull_size(points) - 2;
    if faces.len() != expected {
        out.push(format!("{} faces, expected {expected}", faces.len()));
    }
    out
}

pub fn random_points(seed: u64, n: usize) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [rng.gen_range(0.0..500.0), rng.gen_range(0.0..400.0)])
        .collect()
}
