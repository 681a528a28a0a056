use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::renderer::Render;
use crate::scalar::Scalar;

pub const ANNOTATION_FORMAT: &str = "keypoints2d";
pub const ANNOTATION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedKeypoint {
    pub id: u32,
    pub u: f64,
    pub v: f64,
    pub visible: bool,
}

/// Sparse 2D keypoints of one image, in the same versioned JSON style as
/// template files:
///
/// ```json
/// {"format": "keypoints2d", "version": 1, "class_name": "chair",
///  "resolution": [64, 64], "keypoints": [{"id": 0, "u": 12.5, "v": 40.0, "visible": true}]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeypointAnnotation {
    pub format: String,
    pub version: u32,
    pub class_name: String,
    /// `[height, width]` in pixels.
    pub resolution: [usize; 2],
    pub keypoints: Vec<AnnotatedKeypoint>,
}

impl KeypointAnnotation {
    pub fn from_render<T: Scalar>(render: &Render<T>, class_name: &str) -> Self {
        let (h, w) = render.resolution();
        Self {
            format: ANNOTATION_FORMAT.into(),
            version: ANNOTATION_VERSION,
            class_name: class_name.into(),
            resolution: [h, w],
            keypoints: render
                .keypoints()
                .iter()
                .map(|k| AnnotatedKeypoint { id: k.id, u: k.u.as_f64(), v: k.v.as_f64(), visible: k.visible })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != ANNOTATION_FORMAT || self.version != ANNOTATION_VERSION {
            return Err(Error::Config(format!(
                "expected format \"{ANNOTATION_FORMAT}\" version {ANNOTATION_VERSION}, got \"{}\" version {}",
                self.format, self.version
            )));
        }
        let [h, w] = self.resolution;
        for k in &self.keypoints {
            if !(k.u >= 0.0 && k.v >= 0.0 && k.u <= (w as f64 - 1.0) && k.v <= (h as f64 - 1.0)) {
                return Err(Error::OutOfBounds { u: k.u, v: k.v, height: h, width: w });
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let a: Self =
            serde_json::from_str(&text).map_err(|e| Error::Format { path: path.display().to_string(), reason: e.to_string() })?;
        a.validate()?;
        Ok(a)
    }

    /// Visible keypoint positions by id.
    pub fn visible_points<T: Scalar>(&self) -> BTreeMap<u32, [T; 2]> {
        self.keypoints.iter().filter(|k| k.visible).map(|k| (k.id, [T::lit(k.u), T::lit(k.v)])).collect()
    }
}
