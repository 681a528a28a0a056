//! Dense descriptor maps, their normalized correlation, argmax matching and
//! the contrastive training objective.

mod contrastive;
mod correlation;
mod feature_map;
mod matching;

pub use contrastive::{contrastive_gradient, contrastive_loss, nearest_cell, ContrastiveGradient, CorrespondencePair};
pub use correlation::{correlate, correlate_column, correlate_query, CorrelationTensor};
pub use feature_map::{DescriptorView, FeatureMap};
pub use matching::{argmax_positive, best_matches, transfer_labels};

pub(crate) use feature_map::dot;


