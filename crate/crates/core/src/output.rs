//! Dense point cloud assembly and artifact export.
//!
//! Layout of an export directory:
//!
//! ```text
//! out/
//!   cameras.json               final cameras, pixel-unit intrinsics
//!   images/<id>_warped.png     warped color
//!   depths/<id>_warped.pfm     warped depth, normalized units
//!   validity/<id>.png          255 where a non-flipped face covers the pixel
//!   diff/<id>.png              |source - warped| per channel
//!   pointcloud.ply             binary little-endian, see PLY_HEADER
//!   report.json                effective config, loss traces, metrics
//!   state.json                 full alignment state, reloadable
//! ```

use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, GrayImage, ImageEncoder, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{backproject, CameraParams, LossBreakdown};
use crate::error::{Error, Result};
use crate::eval::PccResult;
use crate::mesh::warp::{difference_image, warp_dense, Warped};
use crate::optimizer::{AlignmentState, LossTrace};
use crate::scene::{file_stem, pfm, Scene};

/// Header written before the vertex payload; `{n}` is the vertex count.
pub const PLY_HEADER: &str = "ply\nformat binary_little_endian 1.0\nelement vertex {n}\n\
property float x\nproperty float y\nproperty float z\n\
property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";

const PLY_RECORD: usize = 15;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<[f32; 3]>,
    pub colors: Vec<[u8; 3]>,
    pub source_image: Vec<usize>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

fn cloud_from_warp(
    image: usize,
    scale: f64,
    cam: &CameraParams,
    warped: &Warped,
    stride: usize,
) -> PointCloud {
    let (w, h) = warped.depth.dims();
    let mut cloud = PointCloud::default();
    for y in (0..h).step_by(stride) {
        for x in (0..w).step_by(stride) {
            if !warped.valid.get(x, y) || !warped.mask.get(x, y) {
                continue;
            }
            let d = warped.depth.get(x, y);
            if !(cam.depth_scale * d + cam.depth_shift > 0.0) {
                continue;
            }
            let p = backproject([x as f64 / scale, y as f64 / scale], d, cam);
            if !p.iter().all(|c| c.is_finite()) {
                continue;
            }
            cloud.positions.push(p.map(|c| c as f32));
            cloud
                .colors
                .push(warped.rgb.get_pixel(x as u32, y as u32).0);
            cloud.source_image.push(image);
        }
    }
    cloud
}

fn warp_all(scene: &Scene, state: &AlignmentState) -> Vec<Warped> {
    scene
        .images
        .par_iter()
        .zip(&state.meshes)
        .map(|(rec, mesh)| warp_dense(rec, mesh))
        .collect()
}

fn merge(parts: Vec<PointCloud>) -> PointCloud {
    let mut out = PointCloud::default();
    for p in parts {
        out.positions.extend(p.positions);
        out.colors.extend(p.colors);
        out.source_image.extend(p.source_image);
    }
    out
}

fn assemble_from(
    scene: &Scene,
    state: &AlignmentState,
    warps: &[Warped],
    stride: usize,
) -> PointCloud {
    let parts = warps
        .par_iter()
        .enumerate()
        .map(|(i, warped)| {
            cloud_from_warp(i, scene.images[i].scale(), &state.cams[i], warped, stride)
        })
        .collect();
    merge(parts)
}

/// Backprojects every valid static pixel on the `stride` grid of every
/// warped image. Pixels whose camera-frame depth is not positive are
/// skipped. A stride of 0 is treated as 1.
pub fn assemble_point_cloud(scene: &Scene, state: &AlignmentState, stride: usize) -> PointCloud {
    let warps = warp_all(scene, state);
    assemble_from(scene, state, &warps, stride.max(1))
}

pub fn encode_ply(cloud: &PointCloud) -> Vec<u8> {
    let header = PLY_HEADER.replace("{n}", &cloud.len().to_string());
    let mut out = Vec::with_capacity(header.len() + cloud.len() * PLY_RECORD);
    out.extend_from_slice(header.as_bytes());
    for (p, c) in cloud.positions.iter().zip(&cloud.colors) {
        for x in p {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(c);
    }
    out
}

/// Parses exactly the layout written by [`encode_ply`]. Source image ids are
/// not stored and come back as zero.
pub fn decode_ply(bytes: &[u8]) -> std::result::Result<PointCloud, String> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or("missing end_header")?
        + END.len();
    let header = std::str::from_utf8(&bytes[..end]).map_err(|e| e.to_string())?;
    let n: usize = header
        .lines()
        .find_map(|l| l.strip_prefix("element vertex "))
        .ok_or("missing vertex element")?
        .trim()
        .parse()
        .map_err(|e| format!("vertex count: {e}"))?;
    if header != PLY_HEADER.replace("{n}", &n.to_string()) {
        return Err("unsupported PLY header".into());
    }
    let body = &bytes[end..];
    if body.len() != n * PLY_RECORD {
        return Err(format!(
            "expected {} payload bytes, found {}",
            n * PLY_RECORD,
            body.len()
        ));
    }
    let mut cloud = PointCloud::default();
    let mut cur = Cursor::new(body);
    let mut rec = [0u8; PLY_RECORD];
    for _ in 0..n {
        cur.read_exact(&mut rec).map_err(|e| e.to_string())?;
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
        cloud.positions.push([f(0), f(1), f(2)]);
        cloud.colors.push([rec[12], rec[13], rec[14]]);
        cloud.source_image.push(0);
    }
    Ok(cloud)
}

pub fn write_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    fs::write(path, encode_ply(cloud)).map_err(|source| Error::Export {
        artifact: "pointcloud.ply".into(),
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ply(&bytes).map_err(|r| Error::decode(path, r))
}

/// One camera of `cameras.json`. Intrinsics are in pixels; the pose and the
/// depth correction act on normalized depth, so world units are those of the
/// normalized scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub image: usize,
    pub file: String,
    pub width: usize,
    pub height: usize,
    /// World-from-camera rotation, row-major.
    pub rotation: [[f64; 3]; 3],
    /// Camera centre.
    pub translation: [f64; 3],
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub depth_scale: f64,
    pub depth_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CamerasFile {
    /// Divisor applied to the input depth maps.
    pub depth_normalizer: f64,
    pub cameras: Vec<CameraRecord>,
}

impl CamerasFile {
    pub fn new(scene: &Scene, cams: &[CameraParams]) -> Self {
        let n = scene.n_images();
        let cameras = scene
            .images
            .iter()
            .zip(cams)
            .map(|(rec, cam)| {
                let s = rec.scale();
                CameraRecord {
                    image: rec.id,
                    file: format!("{}.png", file_stem(rec.id, n)),
                    width: rec.width(),
                    height: rec.height(),
                    rotation: cam.rotation_matrix(),
                    translation: cam.translation,
                    fx: cam.fx * s,
                    fy: cam.fy * s,
                    cx: cam.cx * s,
                    cy: cam.cy * s,
                    depth_scale: cam.depth_scale,
                    depth_shift: cam.depth_shift,
                }
            })
            .collect();
        CamerasFile {
            depth_normalizer: scene.depth_normalizer,
            cameras,
        }
    }

    /// Cameras back in the optimizer's normalized units.
    pub fn to_params(&self) -> Vec<CameraParams> {
        self.cameras
            .iter()
            .map(|c| {
                let s = c.width.max(c.height) as f64;
                CameraParams {
                    rotation: quaternion_from_matrix(&c.rotation),
                    translation: c.translation,
                    fx: c.fx / s,
                    fy: c.fy / s,
                    cx: c.cx / s,
                    cy: c.cy / s,
                    depth_scale: c.depth_scale,
                    depth_shift: c.depth_shift,
                }
            })
            .collect()
    }
}

/// Unit quaternion `[w, x, y, z]` of a rotation matrix, `w ≥ 0`.
pub fn quaternion_from_matrix(m: &[[f64; 3]; 3]) -> [f64; 4] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let q = if tr > 0.0 {
        let s = (tr + 1.0).sqrt() * 2.0;
        [
            0.25 * s,
            (m[2][1] - m[1][2]) / s,
            (m[0][2] - m[2][0]) / s,
            (m[1][0] - m[0][1]) / s,
        ]
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
        [
            (m[2][1] - m[1][2]) / s,
            0.25 * s,
            (m[0][1] + m[1][0]) / s,
            (m[0][2] + m[2][0]) / s,
        ]
    } else if m[1][1] > m[2][2] {
        let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
        [
            (m[0][2] - m[2][0]) / s,
            (m[0][1] + m[1][0]) / s,
            0.25 * s,
            (m[1][2] + m[2][1]) / s,
        ]
    } else {
        let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
        [
            (m[1][0] - m[0][1]) / s,
            (m[0][2] + m[2][0]) / s,
            (m[1][2] + m[2][1]) / s,
            0.25 * s,
        ]
    };
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
    q.map(|x| sign * x / n)
}

/// Contents of `report.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Effective configuration after merging file and flags.
    pub config: serde_json::Value,
    pub camera_final: Option<LossBreakdown>,
    pub deformation_final: Option<LossBreakdown>,
    pub camera_trace: LossTrace,
    pub deformation_trace: LossTrace,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pcc: Vec<PccResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_error_degrees: Option<f64>,
}

/// Files written so far; removed again if a later artifact fails.
struct Transaction {
    root: PathBuf,
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl Transaction {
    fn fail(&self, artifact: &str, path: &Path, source: std::io::Error) -> Error {
        for f in self.files.iter().rev() {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
        Error::Export {
            artifact: artifact.to_string(),
            path: path.to_path_buf(),
            source,
        }
    }

    fn dir(&mut self, rel: &str) -> Result<PathBuf> {
        let p = if rel.is_empty() {
            self.root.clone()
        } else {
            self.root.join(rel)
        };
        if p.is_dir() {
            return Ok(p);
        }
        match fs::create_dir(&p) {
            Ok(()) => {
                self.dirs.push(p.clone());
                Ok(p)
            }
            Err(e) => Err(self.fail(
                if rel.is_empty() {
                    "output directory"
                } else {
                    rel
                },
                &p,
                e,
            )),
        }
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let p = self.root.join(rel);
        if let Err(e) = fs::write(&p, bytes) {
            return Err(self.fail(rel, &p, e));
        }
        self.files.push(p);
        Ok(())
    }
}

fn png_rgb(img: &RgbImage) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(
            img.as_raw(),
            img.width(),
            img.height(),
            ExtendedColorType::Rgb8,
        )
        .map_err(std::io::Error::other)?;
    Ok(out)
}

fn png_gray(img: &GrayImage) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(
            img.as_raw(),
            img.width(),
            img.height(),
            ExtendedColorType::L8,
        )
        .map_err(std::io::Error::other)?;
    Ok(out)
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

/// Writes every artifact into `out_dir`, creating it if needed. On failure
/// the files written by this call are removed and the error names the
/// artifact that could not be written.
pub fn export_all(
    scene: &Scene,
    state: &AlignmentState,
    report: &Report,
    out_dir: &Path,
    stride: usize,
) -> Result<PointCloud> {
    let mut tx = Transaction {
        root: out_dir.to_path_buf(),
        files: Vec::new(),
        dirs: Vec::new(),
    };
    tx.dir("")?;
    tx.write("cameras.json", &json(&CamerasFile::new(scene, &state.cams)))?;

    let warps = warp_all(scene, state);
    let n = scene.n_images();
    for sub in ["images", "depths", "validity", "diff"] {
        tx.dir(sub)?;
    }
    for (rec, warped) in scene.images.iter().zip(&warps) {
        let stem = file_stem(rec.id, n);
        let (w, h) = rec.dims();

        let rel = format!("images/{stem}_warped.png");
        let bytes = png_rgb(&warped.rgb);
        match bytes {
            Ok(b) => tx.write(&rel, &b)?,
            Err(e) => return Err(tx.fail(&rel, &out_dir.join(&rel), e)),
        }

        tx.write(
            &format!("depths/{stem}_warped.pfm"),
            &pfm::encode(&warped.depth),
        )?;

        let rel = format!("validity/{stem}.png");
        let valid = GrayImage::from_raw(
            w as u32,
            h as u32,
            warped
                .valid
                .as_slice()
                .iter()
                .map(|&v| if v { 255 } else { 0 })
                .collect(),
        )
        .expect("validity buffer matches dims");
        match png_gray(&valid) {
            Ok(b) => tx.write(&rel, &b)?,
            Err(e) => return Err(tx.fail(&rel, &out_dir.join(&rel), e)),
        }

        let rel = format!("diff/{stem}.png");
        match png_rgb(&difference_image(rec, warped)) {
            Ok(b) => tx.write(&rel, &b)?,
            Err(e) => return Err(tx.fail(&rel, &out_dir.join(&rel), e)),
        }
    }

    let cloud = assemble_from(scene, state, &warps, stride.max(1));
    tx.write("pointcloud.ply", &encode_ply(&cloud))?;
    tx.write("report.json", &json(report))?;
    tx.write("state.json", &json(state))?;
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{project, LossWeights};
    use crate::mesh::DeformableMesh;
    use crate::optimizer::Stage;
    use crate::scene::{CorrespondenceSet, ImageRecord, Raster};
    use sha2::{Digest, Sha256};

    fn flat_scene(w: usize, h: usize, lower_half_transient: bool) -> (Scene, AlignmentState) {
        let rgb = RgbImage::from_fn(w as u32, h as u32, |x, y| {
            image::Rgb([x as u8 * 20, y as u8 * 20, 7])
        });
        let mask = Raster::from_vec(
            w,
            h,
            (0..w * h)
                .map(|k| !(lower_half_transient && k / w >= h / 2))
                .collect(),
        )
        .unwrap();
        let rec = ImageRecord {
            id: 0,
            rgb,
            depth: Raster::filled(w, h, 1.0),
            mask,
        };
        let mesh = DeformableMesh::build(&rec, &[]).unwrap();
        let scene = Scene {
            images: vec![rec],
            correspondences: CorrespondenceSet::empty(1),
            depth_normalizer: 1.0,
        };
        let state = AlignmentState {
            cams: vec![CameraParams::initial(w, h)],
            meshes: vec![mesh],
            weights: LossWeights::default(),
            stage: Stage::CameraOnly,
        };
        (scene, state)
    }

    #[test]
    fn point_counts() {
        let (scene, state) = flat_scene(10, 10, false);
        assert_eq!(assemble_point_cloud(&scene, &state, 1).len(), 100);
        assert_eq!(assemble_point_cloud(&scene, &state, 2).len(), 25);

        let (scene, state) = flat_scene(10, 10, true);
        let expected = scene.images[0]
            .mask
            .as_slice()
            .iter()
            .filter(|&&m| m)
            .count();
        assert_eq!(expected, 50);
        assert_eq!(assemble_point_cloud(&scene, &state, 1).len(), expected);
    }

    #[test]
    fn points_reproject_onto_their_pixels() {
        let spec = crate::synthetic::SyntheticSpec {
            width: 120,
            height: 90,
            n_cameras: 3,
            n_correspondences: 12,
            inconsistency: 0.02,
            seed: 4,
            ..Default::default()
        };
        let (scene, _) = crate::synthetic::generate_scene(&spec).unwrap();
        let scene = crate::scene::normalize_depths(&scene).unwrap();
        let config = crate::optimizer::OptimizerConfig {
            camera_iterations: 30,
            deformation_iterations: 30,
            ..Default::default()
        };
        let state = crate::optimizer::align(&scene, &config, &Default::default())
            .unwrap()
            .state;
        let cloud = assemble_point_cloud(&scene, &state, 3);
        assert!(cloud.len() > 1000);
        let (w, _) = scene.images[0].dims();
        let s = scene.images[0].scale();
        let mut k = 0;
        for (i, rec) in scene.images.iter().enumerate() {
            let (w, h) = rec.dims();
            let warped = warp_dense(rec, &state.meshes[i]);
            for y in (0..h).step_by(3) {
                for x in (0..w).step_by(3) {
                    if k < cloud.len() && cloud.source_image[k] == i {
                        let cam = &state.cams[i];
                        let d = warped.depth.get(x, y);
                        if warped.valid.get(x, y)
                            && warped.mask.get(x, y)
                            && cam.depth_scale * d + cam.depth_shift > 0.0
                        {
                            let p = cloud.positions[k].map(|c| c as f64);
                            let uv = project(p, cam).unwrap();
                            let err = ((uv[0] * s - x as f64).powi(2)
                                + (uv[1] * s - y as f64).powi(2))
                            .sqrt();
                            assert!(err <= 0.5, "image {i} pixel ({x}, {y}) off by {err} px");
                            k += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(k, cloud.len());
        assert!(w > 0);
    }

    #[test]
    fn ply_round_trip() {
        let cloud = PointCloud {
            positions: vec![[1.0, 2.0, 3.0], [-0.1, f32::MIN_POSITIVE, 1e30]],
            colors: vec![[255, 255, 255], [0, 17, 200]],
            source_image: vec![0, 0],
        };
        let bytes = encode_ply(&cloud);
        assert_eq!(decode_ply(&bytes).unwrap(), cloud);

        let empty = encode_ply(&PointCloud::default());
        assert_eq!(empty, PLY_HEADER.replace("{n}", "0").into_bytes());
        assert!(decode_ply(&empty).unwrap().is_empty());
    }

    #[test]
    fn ply_is_readable_by_a_reference_parser() {
        use ply_rs::parser::Parser;
        use ply_rs::ply::{DefaultElement, Property};

        let cloud = PointCloud {
            positions: vec![[1.0, 2.0, 3.0]],
            colors: vec![[255, 255, 255]],
            source_image: vec![0],
        };
        let bytes = encode_ply(&cloud);
        let ply = Parser::<DefaultElement>::new()
            .read_ply(&mut &bytes[..])
            .unwrap();
        let verts = &ply.payload["vertex"];
        assert_eq!(verts.len(), 1);
        let f = |k: &str| match verts[0][k] {
            Property::Float(x) => x,
            ref other => panic!("{k}: {other:?}"),
        };
        let u = |k: &str| match verts[0][k] {
            Property::UChar(x) => x,
            ref other => panic!("{k}: {other:?}"),
        };
        assert_eq!([f("x"), f("y"), f("z")], [1.0, 2.0, 3.0]);
        assert_eq!([u("red"), u("green"), u("blue")], [255, 255, 255]);

        let empty = encode_ply(&PointCloud::default());
        let ply = Parser::<DefaultElement>::new()
            .read_ply(&mut &empty[..])
            .unwrap();
        assert!(ply.payload.get("vertex").is_none_or(|v| v.is_empty()));
    }

    #[test]
    fn corrupt_ply_is_rejected() {
        let mut bytes = encode_ply(&PointCloud {
            positions: vec![[0.0; 3]],
            colors: vec![[0; 3]],
            source_image: vec![0],
        });
        bytes.pop();
        assert!(decode_ply(&bytes).is_err());
        assert!(decode_ply(b"ply\nformat ascii 1.0\nend_header\n").is_err());
    }

    #[test]
    fn quaternion_matrix_round_trip() {
        for q in [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.5, -0.5, 0.5, 0.5],
            [0.1, 0.7, -0.2, 0.3],
        ] {
            let m = crate::camera::rotation_matrix(&q);
            let back = quaternion_from_matrix(&m);
            let m2 = crate::camera::rotation_matrix(&back);
            for r in 0..3 {
                for c in 0..3 {
                    assert!((m[r][c] - m2[r][c]).abs() < 1e-12);
                }
            }
        }
    }

    fn tree_hashes(dir: &Path) -> Vec<(String, Vec<u8>)> {
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

    fn small_aligned() -> (Scene, AlignmentState) {
        let spec = crate::synthetic::SyntheticSpec {
            width: 60,
            height: 40,
            n_cameras: 2,
            n_correspondences: 10,
            seed: 1,
            ..Default::default()
        };
        let scene =
            crate::scene::normalize_depths(&crate::synthetic::generate_scene(&spec).unwrap().0)
                .unwrap();
        let config = crate::optimizer::OptimizerConfig {
            camera_iterations: 5,
            deformation_iterations: 5,
            ..Default::default()
        };
        let state = crate::optimizer::align(&scene, &config, &Default::default())
            .unwrap()
            .state;
        (scene, state)
    }

    #[test]
    fn export_writes_everything_deterministically() {
        let (scene, state) = small_aligned();
        let tmp = tempfile::tempdir().unwrap();
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        let report = Report::default();
        let cloud = export_all(&scene, &state, &report, &a, 2).unwrap();
        export_all(&scene, &state, &report, &b, 2).unwrap();
        let ha = tree_hashes(&a);
        assert_eq!(ha, tree_hashes(&b));
        let names: Vec<&str> = ha.iter().map(|(n, _)| n.as_str()).collect();
        for expected in [
            "cameras.json",
            "depths/0_warped.pfm",
            "diff/1.png",
            "images/1_warped.png",
            "pointcloud.ply",
            "report.json",
            "state.json",
            "validity/0.png",
        ] {
            assert!(
                names.contains(&expected),
                "{expected} missing from {names:?}"
            );
        }

        assert_eq!(
            read_ply(&a.join("pointcloud.ply")).unwrap().positions,
            cloud.positions
        );
        let cams: CamerasFile =
            serde_json::from_slice(&fs::read(a.join("cameras.json")).unwrap()).unwrap();
        assert_eq!(cams.cameras.len(), 2);
        for (c, orig) in cams.to_params().iter().zip(&state.cams) {
            assert!((c.fx - orig.fx).abs() < 1e-12);
            let (m, m0) = (c.rotation_matrix(), orig.rotation_matrix());
            for r in 0..3 {
                for k in 0..3 {
                    assert!((m[r][k] - m0[r][k]).abs() < 1e-12);
                }
            }
        }
        let restored: AlignmentState =
            serde_json::from_slice(&fs::read(a.join("state.json")).unwrap()).unwrap();
        assert_eq!(restored, state);
        let _: Report = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
        pfm::read(&a.join("depths/1_warped.pfm")).unwrap();
        image::open(a.join("validity/1.png")).unwrap();
    }

    #[test]
    fn unwritable_output_is_reported() {
        let (scene, state) = small_aligned();
        let tmp = tempfile::tempdir().unwrap();
        let file = tmp.path().join("occupied");
        fs::write(&file, b"x").unwrap();
        let err = export_all(&scene, &state, &Report::default(), &file, 2).unwrap_err();
        assert!(
            matches!(err, Error::Export { ref artifact, .. } if artifact == "output directory"),
            "{err}"
        );
    }

    #[test]
    fn failed_export_removes_partial_output() {
        let (scene, state) = small_aligned();
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("out");
        fs::create_dir(&out).unwrap();
        fs::write(out.join("diff"), b"in the way").unwrap();
        let err = export_all(&scene, &state, &Report::default(), &out, 2).unwrap_err();
        assert!(
            matches!(err, Error::Export { ref artifact, .. } if artifact == "diff"),
            "{err}"
        );
        let mut left: Vec<_> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        left.sort();
        assert_eq!(left, ["diff"]);
    }
}
