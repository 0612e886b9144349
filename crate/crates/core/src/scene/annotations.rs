//! `points.json`: the correspondence annotation file shared with the labeler.

use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointsFile {
    pub version: u32,
    pub images: Vec<String>,
    pub points: Vec<PointEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEntry {
    pub id: u64,
    pub obs: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub image: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    pub visible: bool,
}

impl PointsFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("points file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let file: PointsFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.version != FORMAT_VERSION {
            return Err(format!("unsupported version {}", file.version));
        }
        for p in &file.points {
            for o in &p.obs {
                if o.image >= file.images.len() {
                    return Err(format!("point {} references image {}", p.id, o.image));
                }
                if o.visible && (o.u.is_none() || o.v.is_none()) {
                    return Err(format!(
                        "point {} visible in image {} without u/v",
                        p.id, o.image
                    ));
                }
            }
        }
        Ok(file)
    }
}
