use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TEMPLATE_FORMAT: &str = "template";
pub const TEMPLATE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keypoint {
    pub id: u32,
    pub name: String,
    /// Model-frame position: x right, y up, z out of the object's front.
    pub position: [f64; 3],
}

/// Annotated 3D keypoint template for one object class.
///
/// Stored as JSON:
///
/// ```json
/// {
///   "format": "template", "version": 1, "class_name": "chair",
///   "keypoints": [{"id": 0, "name": "seat_front_left", "position": [-0.45, 0.0, 0.45]}],
///   "edges": [[0, 4]],
///   "part_labels": {"0": 0}
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TemplateFile", into = "TemplateFile")]
pub struct TemplateModel {
    class_name: String,
    keypoints: Vec<Keypoint>,
    edges: Vec<(u32, u32)>,
    part_labels: BTreeMap<u32, u32>,
    index: BTreeMap<u32, usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    format: String,
    version: u32,
    class_name: String,
    keypoints: Vec<Keypoint>,
    edges: Vec<(u32, u32)>,
    part_labels: BTreeMap<u32, u32>,
}

impl TryFrom<TemplateFile> for TemplateModel {
    type Error = Error;

    fn try_from(f: TemplateFile) -> Result<Self> {
        if f.format != TEMPLATE_FORMAT || f.version != TEMPLATE_VERSION {
            return Err(Error::InvalidModel(format!(
                "expected format \"{TEMPLATE_FORMAT}\" version {TEMPLATE_VERSION}, got \"{}\" version {}",
                f.format, f.version
            )));
        }
        TemplateModel::new(f.class_name, f.keypoints, f.edges, f.part_labels)
    }
}

impl From<TemplateModel> for TemplateFile {
    fn from(m: TemplateModel) -> Self {
        TemplateFile {
            format: TEMPLATE_FORMAT.into(),
            version: TEMPLATE_VERSION,
            class_name: m.class_name,
            keypoints: m.keypoints,
            edges: m.edges,
            part_labels: m.part_labels,
        }
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// Whether some four of `points` span a tetrahedron of non-negligible volume.
fn spans_volume(points: &[[f64; 3]]) -> bool {
    let Some(&p0) = points.first() else { return false };
    let farthest = |f: &dyn Fn([f64; 3]) -> f64| points.iter().copied().max_by(|a, b| f(*a).total_cmp(&f(*b)));
    let Some(p1) = farthest(&|p| norm3(sub(p, p0))) else { return false };
    let e1 = sub(p1, p0);
    let scale = norm3(e1);
    if scale == 0.0 {
        return false;
    }
    let Some(p2) = farthest(&|p| norm3(cross(e1, sub(p, p0)))) else { return false };
    let n = cross(e1, sub(p2, p0));
    if norm3(n) <= 1e-9 * scale * scale {
        return false;
    }
    points.iter().any(|&p| dot3(n, sub(p, p0)).abs() > 1e-9 * scale.powi(3))
}

impl TemplateModel {
    pub fn new(
        class_name: impl Into<String>,
        keypoints: Vec<Keypoint>,
        edges: Vec<(u32, u32)>,
        part_labels: BTreeMap<u32, u32>,
    ) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, k) in keypoints.iter().enumerate() {
            if !k.position.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidModel(format!("keypoint {} has a non-finite position", k.id)));
            }
            if index.insert(k.id, i).is_some() {
                return Err(Error::InvalidModel(format!("duplicate keypoint id {}", k.id)));
            }
        }
        for &(a, b) in &edges {
            if !index.contains_key(&a) || !index.contains_key(&b) || a == b {
                return Err(Error::InvalidModel(format!("edge ({a}, {b}) references unknown or repeated ids")));
            }
        }
        if let Some(id) = part_labels.keys().find(|id| !index.contains_key(id)) {
            return Err(Error::InvalidModel(format!("part label for unknown keypoint {id}")));
        }
        let positions: Vec<_> = keypoints.iter().map(|k| k.position).collect();
        if keypoints.len() < 4 || !spans_volume(&positions) {
            return Err(Error::InvalidModel("need at least 4 non-coplanar keypoints".into()));
        }
        Ok(Self { class_name: class_name.into(), keypoints, edges, part_labels, index })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format { path: path.display().to_string(), reason: e.to_string() })
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    pub fn keypoints(&self) -> &[Keypoint] {
        &self.keypoints
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn part_labels(&self) -> &BTreeMap<u32, u32> {
        &self.part_labels
    }

    pub fn part_of(&self, id: u32) -> Option<u32> {
        self.part_labels.get(&id).copied()
    }

    /// Position of keypoint `id` in [`Self::keypoints`].
    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn ids(&self) -> BTreeSet<u32> {
        self.index.keys().copied().collect()
    }

    /// Largest distance of any keypoint from the model origin.
    pub fn radius(&self) -> f64 {
        self.keypoints.iter().map(|k| norm3(k.position)).fold(0.0, f64::max)
    }

    /// Copy with every coordinate scaled per axis and then jittered by
    /// isotropic Gaussian noise of standard deviation `sigma` model units.
    pub fn perturbed<R: Rng>(&self, scale: [f64; 3], sigma: f64, rng: &mut R) -> Result<Self> {
        let noise = Normal::new(0.0, sigma.max(0.0)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let keypoints = self
            .keypoints
            .iter()
            .map(|k| {
                let mut position = k.position;
                for (p, s) in position.iter_mut().zip(scale) {
                    *p = *p * s + noise.sample(rng);
                }
                Keypoint { position, ..k.clone() }
            })
            .collect();
        Self::new(self.class_name.clone(), keypoints, self.edges.clone(), self.part_labels.clone())
    }
}
