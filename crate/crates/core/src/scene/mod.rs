//! Scene data model: images, depth rasters, transient masks and multi-view
//! correspondence annotations.

pub mod annotations;
pub mod pfm;
pub mod raster;

use std::fs;
use std::path::Path;

use image::{GrayImage, RgbImage};

use crate::error::{Error, Result};
use annotations::{Observation, PointEntry, PointsFile, FORMAT_VERSION};
pub use raster::Raster;

/// Pixel coordinate `[u, v]`, origin top-left, `u` rightward, `v` downward.
pub type Pixel = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: usize,
    pub rgb: RgbImage,
    pub depth: Raster<f64>,
    /// `true` = static scene, `false` = transient.
    pub mask: Raster<bool>,
}

impl ImageRecord {
    pub fn width(&self) -> usize {
        self.rgb.width() as usize
    }

    pub fn height(&self) -> usize {
        self.rgb.height() as usize
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    /// Longest side, the unit used to normalize pixel coordinates.
    pub fn scale(&self) -> f64 {
        self.width().max(self.height()) as f64
    }

    pub fn check_dims(&self) -> Result<()> {
        let dims = self.dims();
        if self.depth.dims() != dims {
            return Err(Error::Structure(format!(
                "image {} is {}x{} but its depth is {}x{}",
                self.id,
                dims.0,
                dims.1,
                self.depth.width(),
                self.depth.height()
            )));
        }
        if self.mask.dims() != dims {
            return Err(Error::Structure(format!(
                "image {} is {}x{} but its mask is {}x{}",
                self.id,
                dims.0,
                dims.1,
                self.mask.width(),
                self.mask.height()
            )));
        }
        Ok(())
    }
}

/// Bilinearly interpolated depth at a pixel.
pub fn sample_depth(record: &ImageRecord, pixel: Pixel) -> Result<f64> {
    record.depth.sample(pixel[0], pixel[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pub n_images: usize,
    /// Annotation ids, one per correspondence.
    pub ids: Vec<u64>,
    /// `pixels[image][correspondence]`, `None` when not visible.
    pub pixels: Vec<Vec<Option<Pixel>>>,
}

impl CorrespondenceSet {
    pub fn empty(n_images: usize) -> Self {
        CorrespondenceSet {
            n_images,
            ids: Vec::new(),
            pixels: vec![Vec::new(); n_images],
        }
    }

    pub fn n_points(&self) -> usize {
        self.ids.len()
    }

    pub fn pixel(&self, image: usize, c: usize) -> Option<Pixel> {
        self.pixels[image][c]
    }

    pub fn visible(&self, image: usize, c: usize) -> bool {
        self.pixels[image][c].is_some()
    }

    pub fn views(&self, c: usize) -> usize {
        (0..self.n_images).filter(|&i| self.visible(i, c)).count()
    }

    pub fn push(&mut self, id: u64, obs: Vec<Option<Pixel>>) {
        assert_eq!(obs.len(), self.n_images);
        self.ids.push(id);
        for (column, o) in self.pixels.iter_mut().zip(obs) {
            column.push(o);
        }
    }

    /// Correspondences at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        CorrespondenceSet {
            n_images: self.n_images,
            ids: indices.iter().map(|&c| self.ids[c]).collect(),
            pixels: self
                .pixels
                .iter()
                .map(|col| indices.iter().map(|&c| col[c]).collect())
                .collect(),
        }
    }

    pub fn visible_count(&self, image: usize) -> usize {
        self.pixels[image].iter().filter(|p| p.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub images: Vec<ImageRecord>,
    pub correspondences: CorrespondenceSet,
    /// Product of every divisor applied by [`normalize_depths`].
    pub depth_normalizer: f64,
}

impl Scene {
    pub fn n_images(&self) -> usize {
        self.images.len()
    }

    pub fn with_correspondences(&self, correspondences: CorrespondenceSet) -> Scene {
        Scene {
            images: self.images.clone(),
            correspondences,
            depth_normalizer: self.depth_normalizer,
        }
    }
}

/// Zero-padded file stem for image `id` in a scene of `n` images.
pub fn file_stem(id: usize, n: usize) -> String {
    let width = n.saturating_sub(1).max(1).to_string().len();
    format!("{id:0width$}")
}

pub fn load_scene(dir: &Path) -> Result<Scene> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "scene directory not found"),
        ));
    }
    let points_path = dir.join("points.json");
    let text = fs::read_to_string(&points_path).map_err(|e| Error::io(&points_path, e))?;
    let file = PointsFile::from_json(&text).map_err(|r| Error::decode(&points_path, r))?;

    let mut images = Vec::with_capacity(file.images.len());
    for (id, name) in file.images.iter().enumerate() {
        let stem = Path::new(name)
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::decode(&points_path, format!("bad image name {name:?}")))?;
        let img_path = dir.join("images").join(name);
        let rgb = image::open(&img_path)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(&img_path, io),
                other => Error::decode(&img_path, other),
            })?
            .to_rgb8();
        let depth = pfm::read(&dir.join("depths").join(format!("{stem}.pfm")))?;
        let mask_path = dir.join("masks").join(format!("{stem}.png"));
        let mask = if mask_path.exists() {
            let gray = image::open(&mask_path)
                .map_err(|e| Error::decode(&mask_path, e))?
                .to_luma8();
            let (w, h) = (gray.width() as usize, gray.height() as usize);
            Raster::from_vec(w, h, gray.as_raw().iter().map(|&g| g >= 128).collect())?
        } else {
            Raster::filled(rgb.width() as usize, rgb.height() as usize, true)
        };
        let record = ImageRecord {
            id,
            rgb,
            depth,
            mask,
        };
        record.check_dims()?;
        images.push(record);
    }

    let n = images.len();
    let mut correspondences = CorrespondenceSet::empty(n);
    for point in &file.points {
        let mut obs = vec![None; n];
        for o in &point.obs {
            if o.visible {
                if let (Some(u), Some(v)) = (o.u, o.v) {
                    obs[o.image] = Some([u, v]);
                }
            }
        }
        correspondences.push(point.id, obs);
    }

    Ok(Scene {
        images,
        correspondences,
        depth_normalizer: 1.0,
    })
}

pub fn points_file(scene: &Scene) -> PointsFile {
    let n = scene.n_images();
    let corrs = &scene.correspondences;
    PointsFile {
        version: FORMAT_VERSION,
        images: (0..n).map(|i| format!("{}.png", file_stem(i, n))).collect(),
        points: (0..corrs.n_points())
            .map(|c| PointEntry {
                id: corrs.ids[c],
                obs: (0..n)
                    .map(|i| match corrs.pixel(i, c) {
                        Some([u, v]) => Observation {
                            image: i,
                            u: Some(u),
                            v: Some(v),
                            visible: true,
                        },
                        None => Observation {
                            image: i,
                            u: None,
                            v: None,
                            visible: false,
                        },
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// Writes the scene directory layout read by [`load_scene`]. Depth is stored
/// as float32.
pub fn save_scene(scene: &Scene, dir: &Path) -> Result<()> {
    let n = scene.n_images();
    for sub in ["images", "depths", "masks"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    for rec in &scene.images {
        let stem = file_stem(rec.id, n);
        let img_path = dir.join("images").join(format!("{stem}.png"));
        rec.rgb
            .save(&img_path)
            .map_err(|e| Error::decode(&img_path, e))?;
        let depth_path = dir.join("depths").join(format!("{stem}.pfm"));
        pfm::write(&depth_path, &rec.depth).map_err(|e| Error::io(&depth_path, e))?;
        let mask_path = dir.join("masks").join(format!("{stem}.png"));
        let (w, h) = rec.mask.dims();
        let mask = GrayImage::from_raw(
            w as u32,
            h as u32,
            rec.mask
                .as_slice()
                .iter()
                .map(|&m| if m { 255 } else { 0 })
                .collect(),
        )
        .expect("mask buffer matches dims");
        mask.save(&mask_path)
            .map_err(|e| Error::decode(&mask_path, e))?;
    }
    let points_path = dir.join("points.json");
    fs::write(&points_path, points_file(scene).to_json()).map_err(|e| Error::io(&points_path, e))
}

/// Largest bilinearly sampled depth over all visible correspondences.
pub fn max_correspondence_depth(scene: &Scene) -> Result<Option<f64>> {
    let corrs = &scene.correspondences;
    let mut max: Option<f64> = None;
    for (i, rec) in scene.images.iter().enumerate() {
        for px in corrs.pixels[i].iter().flatten() {
            let d = sample_depth(rec, *px)?;
            max = Some(match max {
                Some(m) if m >= d => m,
                _ => d,
            });
        }
    }
    Ok(max)
}

/// Divides every depth raster by the largest depth found at a visible
/// correspondence.
pub fn normalize_depths(scene: &Scene) -> Result<Scene> {
    let m = max_correspondence_depth(scene)?
        .ok_or_else(|| Error::Normalization("no visible correspondence".into()))?;
    if !m.is_finite() || m <= 0.0 {
        return Err(Error::Normalization(format!(
            "maximum correspondence depth is {m}"
        )));
    }
    let mut out = scene.clone();
    for rec in &mut out.images {
        for d in rec.depth.as_mut_slice() {
            *d /= m;
        }
    }
    out.depth_normalizer *= m;
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn into_result(self) -> Result<Vec<String>> {
        if self.errors.is_empty() {
            Ok(self.warnings)
        } else {
            Err(Error::Structure(self.errors.join("; ")))
        }
    }
}

pub fn validate(scene: &Scene) -> ValidationReport {
    let mut report = ValidationReport::default();
    let corrs = &scene.correspondences;
    if corrs.n_images != scene.n_images() {
        report.errors.push(format!(
            "annotations cover {} images, scene has {}",
            corrs.n_images,
            scene.n_images()
        ));
        return report;
    }
    if !(scene.depth_normalizer > 0.0) {
        report.errors.push(format!(
            "depth normalizer {} is not positive",
            scene.depth_normalizer
        ));
    }
    for rec in &scene.images {
        if let Err(e) = rec.check_dims() {
            report.errors.push(e.to_string());
        }
    }
    for c in 0..corrs.n_points() {
        let id = corrs.ids[c];
        if corrs.views(c) < 2 {
            report.errors.push(format!(
                "correspondence {id} is visible in {} image(s), needs at least 2",
                corrs.views(c)
            ));
        }
        for (i, rec) in scene.images.iter().enumerate() {
            let Some([u, v]) = corrs.pixel(i, c) else {
                continue;
            };
            if !rec.depth.contains(u, v) {
                report.errors.push(format!(
                    "correspondence {id} at ({u}, {v}) lies outside image {i}"
                ));
                continue;
            }
            match sample_depth(rec, [u, v]) {
                Ok(d) if d.is_finite() && d > 0.0 => {}
                Ok(d) => report
                    .errors
                    .push(format!("correspondence {id} in image {i} has depth {d}")),
                Err(e) => report.errors.push(e.to_string()),
            }
            let (x, y) = (u.round() as usize, v.round() as usize);
            if !rec.mask.get(x, y) {
                report.warnings.push(format!(
                    "correspondence {id} in image {i} lies on a transient pixel"
                ));
            }
        }
    }
    report
}
