//! Template models and their keypoint renders, descriptor maps and stereo disparity.

mod descriptor;
mod disparity;
mod projection;
mod template;

pub use descriptor::{
    descriptor_at, descriptor_map, embeddings, part_label_map, DescriptorConfig, EmbeddingKind, NoiseSpec, DEFAULT_DESCRIPTOR_DIM,
    DEFAULT_SPREAD_CELLS,
};
pub use disparity::{default_stereo_disparity, stereo_disparity, DisparityMap, STEREO_SHIFT_DEG};
pub use projection::{
    render, render_with, Camera, ProjectedKeypoint, Render, DEFAULT_ALPHA_DILATION_PX, DEFAULT_OCCLUSION_RADIUS_PX,
    DEFAULT_RESOLUTION, MIN_RESOLUTION,
};
pub use template::{Keypoint, TemplateModel, TEMPLATE_FORMAT, TEMPLATE_VERSION};
