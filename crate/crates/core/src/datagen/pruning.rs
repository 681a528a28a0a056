//! Heuristics that remove skeletal samples a real image would not show.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::frame::SkeletalFrame;
use crate::error::{Error, Result};
use crate::renderer::Render;
use crate::scalar::Scalar;

pub const PRUNING_FORMAT: &str = "pruning";
pub const PRUNING_VERSION: u32 = 1;
pub const DEFAULT_MIXED_KEEP_FRACTION: f64 = 0.5;

/// Coarse in-image orientation of the seat's back-to-front vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrant {
    Right,
    Up,
    Left,
    Down,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::Right, Quadrant::Up, Quadrant::Left, Quadrant::Down];

    /// Quadrant of an image-space vector `(du, dv)` with `v` pointing down;
    /// sectors are 90° wide and centered on the four screen directions.
    /// `None` for a zero vector.
    pub fn of_vector<T: Scalar>(du: T, dv: T) -> Option<Self> {
        if du == T::zero() && dv == T::zero() {
            return None;
        }
        let deg = (-dv).atan2(du).as_f64().to_degrees();
        let sector = ((deg + 45.0).rem_euclid(360.0) / 90.0).floor() as usize;
        Some(Self::ALL[sector.min(3)])
    }
}

/// Keypoint roles and tables used by the pruning rules; stored as JSON next
/// to the template it describes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruningConfig {
    pub format: String,
    pub version: u32,
    /// Keypoint ids of the seat outline, in polygon order.
    pub seat_polygon: Vec<u32>,
    /// Indices into the template's edge list.
    pub leg_edges: Vec<usize>,
    pub seat_back: Vec<u32>,
    pub seat_front: Vec<u32>,
    /// Leg edges hidden behind the rest of the object for each quadrant.
    pub occluded_legs: BTreeMap<Quadrant, Vec<usize>>,
    /// Share of a mixed-visibility edge kept on the visible side.
    #[serde(default = "default_keep_fraction")]
    pub mixed_keep_fraction: f64,
}

fn default_keep_fraction() -> f64 {
    DEFAULT_MIXED_KEEP_FRACTION
}

impl PruningConfig {
    /// Visibility pruning only.
    pub fn visibility_only() -> Self {
        Self {
            format: PRUNING_FORMAT.into(),
            version: PRUNING_VERSION,
            seat_polygon: vec![],
            leg_edges: vec![],
            seat_back: vec![],
            seat_front: vec![],
            occluded_legs: BTreeMap::new(),
            mixed_keep_fraction: DEFAULT_MIXED_KEEP_FRACTION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != PRUNING_FORMAT || self.version != PRUNING_VERSION {
            return Err(Error::Config(format!(
                "expected format \"{PRUNING_FORMAT}\" version {PRUNING_VERSION}, got \"{}\" version {}",
                self.format, self.version
            )));
        }
        if !(0.0..=1.0).contains(&self.mixed_keep_fraction) {
            return Err(Error::Config(format!("mixed_keep_fraction {} not in [0, 1]", self.mixed_keep_fraction)));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::Format { path: path.display().to_string(), reason: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn visibility<T: Scalar>(render: &Render<T>, id: u32) -> bool {
    render.keypoint(id).is_some_and(|k| k.visible)
}

/// Drops samples of edges whose endpoints are both hidden. On an edge with
/// one hidden endpoint, the `keep_fraction` share of samples nearest the
/// visible endpoint survive.
pub fn prune_visibility<T: Scalar>(frame: &SkeletalFrame<T>, render: &Render<T>, keep_fraction: f64) -> SkeletalFrame<T> {
    let mut out = frame.clone();
    let n = frame.samples_per_edge;
    let keep = ((n as f64) * keep_fraction).round() as usize;
    for e in 0..out.polylines.len() {
        let (a, b) = out.polylines[e].endpoints;
        let removed = match (visibility(render, a), visibility(render, b)) {
            (true, true) => 0,
            (false, false) => out.remove_where(e, |_, _| true),
            (true, false) => out.remove_where(e, |i, _| i >= keep),
            (false, true) => out.remove_where(e, |i, _| i < n - keep),
        };
        out.provenance.visibility += removed;
    }
    out
}

/// Whether `p` lies strictly inside `polygon` (boundary points excluded).
pub fn strictly_inside<T: Scalar>(p: [T; 2], polygon: &[[T; 2]]) -> bool {
    if polygon.len() < 3 {
        return false;
    }
    let mut inside = false;
    for i in 0..polygon.len() {
        let a = polygon[i];
        let b = polygon[(i + 1) % polygon.len()];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let within = p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1]);
        if cross == T::zero() && within {
            return false;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Drops leg-edge samples strictly inside the seat polygon.
pub fn prune_seat<T: Scalar>(frame: &SkeletalFrame<T>, seat_polygon: &[[T; 2]], leg_edges: &[usize]) -> SkeletalFrame<T> {
    let mut out = frame.clone();
    let edges: Vec<usize> = leg_edges.iter().copied().filter(|&e| e < out.polylines.len()).collect();
    for e in edges {
        out.provenance.seat += out.remove_where(e, |_, p| strictly_inside(p, seat_polygon));
    }
    out
}

/// Quadrant of the back-to-front seat vector in `render`, using the mean
/// position of each keypoint group.
pub fn pose_quadrant<T: Scalar>(render: &Render<T>, back: &[u32], front: &[u32]) -> Option<Quadrant> {
    let mean = |ids: &[u32]| -> Option<[T; 2]> {
        let pts: Vec<_> = ids.iter().map(|id| render.keypoint(*id)).collect::<Option<_>>()?;
        if pts.is_empty() {
            return None;
        }
        let n = T::lit(pts.len() as f64);
        Some([pts.iter().map(|k| k.u).sum::<T>() / n, pts.iter().map(|k| k.v).sum::<T>() / n])
    };
    let (b, f) = (mean(back)?, mean(front)?);
    Quadrant::of_vector(f[0] - b[0], f[1] - b[1])
}

/// Drops samples on the legs the table marks as occluded for `quadrant`.
/// With no quadrant the frame is returned unchanged and a warning recorded.
pub fn prune_self_occluded_legs<T: Scalar>(
    frame: &SkeletalFrame<T>,
    quadrant: Option<Quadrant>,
    table: &BTreeMap<Quadrant, Vec<usize>>,
) -> SkeletalFrame<T> {
    let mut out = frame.clone();
    let Some(q) = quadrant else {
        out.provenance.warnings.push("degenerate seat orientation; leg self-occlusion skipped".into());
        return out;
    };
    let edges: Vec<usize> = table.get(&q).into_iter().flatten().copied().filter(|&e| e < out.polylines.len()).collect();
    for e in edges {
        out.provenance.self_occlusion += out.remove_where(e, |_, _| true);
    }
    out
}

/// Applies visibility, seat and leg self-occlusion pruning as configured.
pub fn prune_all<T: Scalar>(frame: &SkeletalFrame<T>, render: &Render<T>, config: &PruningConfig) -> SkeletalFrame<T> {
    let mut out = prune_visibility(frame, render, config.mixed_keep_fraction);
    let polygon: Option<Vec<[T; 2]>> =
        config.seat_polygon.iter().map(|id| render.keypoint(*id).map(|k| [k.u, k.v])).collect();
    if let Some(polygon) = polygon.filter(|p| p.len() >= 3) {
        out = prune_seat(&out, &polygon, &config.leg_edges);
    }
    if !config.occluded_legs.is_empty() {
        let q = pose_quadrant(render, &config.seat_back, &config.seat_front);
        out = prune_self_occluded_legs(&out, q, &config.occluded_legs);
    }
    out
}
