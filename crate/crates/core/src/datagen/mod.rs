//! Dense correspondence annotations from sparse skeletal keypoints.

mod annotation;
mod frame;
mod pairing;
mod pruning;

pub use annotation::{AnnotatedKeypoint, KeypointAnnotation, ANNOTATION_FORMAT, ANNOTATION_VERSION};
pub use frame::{frame_from_render, skeletal_frame, Polyline, Provenance, SkeletalFrame, DEFAULT_SAMPLES_PER_EDGE};
pub use pairing::{pair_frames, read_pairs_csv, write_pairs_csv, CorrespondenceSet, DEFAULT_NEGATIVES_PER_POSITIVE};
pub use pruning::{
    pose_quadrant, prune_all, prune_seat, prune_self_occluded_legs, prune_visibility, strictly_inside, PruningConfig,
    Quadrant, DEFAULT_MIXED_KEEP_FRACTION, PRUNING_FORMAT, PRUNING_VERSION,
};

use crate::error::Result;
use crate::renderer::{render_with, Camera, TemplateModel};
use crate::scalar::Scalar;
use crate::viewpoint::Viewpoint;

/// Options for [`generate_correspondences`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub resolution: (usize, usize),
    pub samples_per_edge: usize,
    pub negatives_per_positive: usize,
    pub pruning: PruningConfig,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            resolution: crate::renderer::DEFAULT_RESOLUTION,
            samples_per_edge: DEFAULT_SAMPLES_PER_EDGE,
            negatives_per_positive: DEFAULT_NEGATIVES_PER_POSITIVE,
            pruning: PruningConfig::visibility_only(),
        }
    }
}

/// Renders `model` at two viewpoints, prunes both skeletal frames and pairs them.
pub fn generate_correspondences<T: Scalar>(
    model: &TemplateModel,
    va: &Viewpoint<T>,
    vb: &Viewpoint<T>,
    config: &GenerationConfig,
    seed: u64,
) -> Result<CorrespondenceSet> {
    config.pruning.validate()?;
    let camera = Camera::fit(model, config.resolution)?;
    let ra = render_with(model, &camera, va, config.resolution)?;
    let rb = render_with(model, &camera, vb, config.resolution)?;
    let fa = prune_all(&frame_from_render(&ra, model, config.samples_per_edge)?, &ra, &config.pruning);
    let fb = prune_all(&frame_from_render(&rb, model, config.samples_per_edge)?, &rb, &config.pruning);
    pair_frames(&fa, &fb, config.negatives_per_positive, seed)
}
