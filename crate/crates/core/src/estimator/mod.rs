//! Estimators of the quantized viewpoint difference between a target
//! descriptor map and the current render, plus the azimuth initializer.

mod coarse;
mod oracle;
mod reprojection;

pub use coarse::{
    coarse_init, hypothesis_scores, hypothesis_viewpoints, score_columns, select_hypothesis, CoarseConfig,
    DEFAULT_HYPOTHESES, DEFAULT_PEAK_RATIO, DEFAULT_SCORE_RADIUS_PX,
};
pub use oracle::{NoisyOracle, Oracle};
pub use reprojection::{
    observe, reprojection_error, reprojection_search, Observation, Reprojection, SearchGrid, MIN_MATCH_SCORE,
    MIN_OBSERVATIONS,
};

use serde::{Deserialize, Serialize};

use crate::correspondence::{correlate, CorrelationTensor, FeatureMap};
use crate::error::{Error, Result};
use crate::mulaw::BinningScheme;
use crate::renderer::{
    default_stereo_disparity, descriptor_map, embeddings, render_with, Camera, DescriptorConfig, DisparityMap,
    NoiseSpec, Render, TemplateModel,
};
use crate::scalar::Scalar;
use crate::viewpoint::{Viewpoint, ViewpointDelta};

/// Number of sectors of the absolute-azimuth output.
pub const ABSOLUTE_AZIMUTH_BINS: usize = 16;

/// Per-axis scores over the bins of a [`BinningScheme`].
#[derive(Debug, Clone, PartialEq)]
pub struct BinLogits<T: Scalar> {
    pub azimuth: Vec<T>,
    pub elevation: Vec<T>,
    pub tilt: Vec<T>,
    /// Scores over [`ABSOLUTE_AZIMUTH_BINS`] sectors centered on multiples of
    /// `360 / ABSOLUTE_AZIMUTH_BINS` degrees, when the estimator can supply them.
    pub absolute_azimuth: Option<Vec<T>>,
}

fn peaked<T: Scalar>(n: usize, k: usize) -> Vec<T> {
    (0..n).map(|i| -T::lit(i.abs_diff(k) as f64)).collect()
}

/// Index of the first maximum.
fn first_argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl<T: Scalar> BinLogits<T> {
    /// Logits `-|i - k|` peaking at the given per-axis bins.
    pub fn from_bins(n_bins: usize, bins: [usize; 3]) -> Self {
        Self {
            azimuth: peaked(n_bins, bins[0]),
            elevation: peaked(n_bins, bins[1]),
            tilt: peaked(n_bins, bins[2]),
            absolute_azimuth: None,
        }
    }

    pub fn axes(&self) -> [&[T]; 3] {
        [&self.azimuth, &self.elevation, &self.tilt]
    }

    pub fn validate(&self, n_bins: usize) -> Result<()> {
        for axis in self.axes() {
            if axis.len() != n_bins {
                return Err(Error::ShapeMismatch(format!("{} logits for {n_bins} bins", axis.len())));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("logit"));
            }
        }
        if let Some(abs) = &self.absolute_azimuth {
            if abs.len() != ABSOLUTE_AZIMUTH_BINS || abs.iter().any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch("malformed absolute azimuth logits".into()));
            }
        }
        Ok(())
    }

    /// Per-axis bin index, first index on ties.
    pub fn argmax(&self) -> [usize; 3] {
        self.axes().map(first_argmax)
    }

    /// Bin centers of the per-axis argmax.
    pub fn decode(&self, scheme: &BinningScheme<T>) -> Result<ViewpointDelta<T>> {
        self.validate(scheme.n_bins())?;
        let [a, e, t] = self.argmax();
        ViewpointDelta::new(scheme.dequantize(a)?, scheme.dequantize(e)?, scheme.dequantize(t)?)
    }

    /// Absolute azimuth sector center in degrees, if supplied.
    pub fn decode_absolute_azimuth(&self) -> Option<T> {
        let abs = self.absolute_azimuth.as_ref()?;
        let k = first_argmax(abs);
        crate::viewpoint::wrap_angle(T::lit(k as f64 * 360.0 / ABSOLUTE_AZIMUTH_BINS as f64)).ok()
    }
}

/// Everything an estimator may look at for one iteration: the target map,
/// the render at the current viewpoint and its descriptors, and stereo disparity.
#[derive(Debug, Clone)]
pub struct EstimatorInput<'a, T: Scalar> {
    target: &'a FeatureMap<T>,
    model: &'a TemplateModel,
    camera: Camera<T>,
    descriptor: DescriptorConfig,
    render: Render<T>,
    rendered: FeatureMap<T>,
    embeddings: Vec<Vec<T>>,
    disparity: DisparityMap<T>,
    seed: u64,
}

impl<'a, T: Scalar> EstimatorInput<'a, T> {
    /// Renders `model` at `view` through `camera` at the target's resolution.
    pub fn new(
        target: &'a FeatureMap<T>,
        model: &'a TemplateModel,
        camera: Camera<T>,
        view: &Viewpoint<T>,
        descriptor: DescriptorConfig,
    ) -> Result<Self> {
        let resolution = (target.height(), target.width());
        if target.dim() != descriptor.dim {
            return Err(Error::ShapeMismatch(format!(
                "target descriptors have {} channels, configuration expects {}",
                target.dim(),
                descriptor.dim
            )));
        }
        let render = render_with(model, &camera, view, resolution)?;
        let rendered = descriptor_map(&render, model, &descriptor, &NoiseSpec::NONE, 0)?;
        let embeddings = embeddings(model, &descriptor)?;
        let disparity = default_stereo_disparity(model, &camera, view, resolution)?;
        Ok(Self { target, model, camera, descriptor, render, rendered, embeddings, disparity, seed: 0 })
    }

    /// Seed for estimators that draw random numbers.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Replaces the render-slot descriptors with an observed map of the same
    /// shape, keeping the render's keypoints and alpha mask.
    pub fn with_reference(mut self, reference: &FeatureMap<T>) -> Result<Self> {
        let r = &self.rendered;
        if (reference.height(), reference.width(), reference.dim()) != (r.height(), r.width(), r.dim()) {
            return Err(Error::ShapeMismatch("reference map does not match the render".into()));
        }
        self.rendered = reference.clone();
        Ok(self)
    }

    pub fn target(&self) -> &FeatureMap<T> {
        self.target
    }

    pub fn model(&self) -> &TemplateModel {
        self.model
    }

    pub fn camera(&self) -> &Camera<T> {
        &self.camera
    }

    pub fn descriptor(&self) -> &DescriptorConfig {
        &self.descriptor
    }

    pub fn render(&self) -> &Render<T> {
        &self.render
    }

    pub fn view(&self) -> Viewpoint<T> {
        self.render.viewpoint()
    }

    pub fn resolution(&self) -> (usize, usize) {
        self.render.resolution()
    }

    /// Descriptor map of the current render.
    pub fn rendered(&self) -> &FeatureMap<T> {
        &self.rendered
    }

    /// Keypoint and background embeddings used for the render.
    pub fn embeddings(&self) -> &[Vec<T>] {
        &self.embeddings
    }

    pub fn disparity(&self) -> &DisparityMap<T> {
        &self.disparity
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Correlation of every render location against the target, zeroed off
    /// the render's alpha mask. Computed on demand; O((h·w)²).
    pub fn correlation(&self) -> Result<CorrelationTensor<T>> {
        correlate(self.target, &self.rendered)?.apply_alpha(self.render.alpha())
    }
}

/// A predictor of the bin containing the difference from the current render
/// to the target.
pub trait DifferenceEstimator<T: Scalar>: Send + Sync {
    /// `truth` is the exact difference from the rendered viewpoint to the
    /// target's viewpoint; only oracle estimators read it.
    fn estimate(
        &self,
        input: &EstimatorInput<'_, T>,
        truth: Option<&ViewpointDelta<T>>,
        scheme: &BinningScheme<T>,
    ) -> Result<BinLogits<T>>;

    fn requires_truth(&self) -> bool {
        false
    }
}

/// Serializable choice of estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum EstimatorKind {
    Oracle {},
    NoisyOracle { noise: f64 },
    Reprojection {
        #[serde(default)]
        grid: SearchGrid,
    },
}

impl EstimatorKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Oracle {} => Ok(()),
            Self::NoisyOracle { noise } => NoisyOracle::new(*noise).map(|_| ()),
            Self::Reprojection { grid } => grid.validate(),
        }
    }

    pub fn build<T: Scalar>(&self) -> Result<Box<dyn DifferenceEstimator<T>>> {
        Ok(match self {
            Self::Oracle {} => Box::new(Oracle),
            Self::NoisyOracle { noise } => Box::new(NoisyOracle::new(*noise)?),
            Self::Reprojection { grid } => Box::new(Reprojection::new(grid.clone())?),
        })
    }
}

/// [`DifferenceEstimator::estimate`] for a serializable estimator choice.
pub fn estimate<T: Scalar>(
    input: &EstimatorInput<'_, T>,
    truth: Option<&ViewpointDelta<T>>,
    kind: &EstimatorKind,
    scheme: &BinningScheme<T>,
) -> Result<BinLogits<T>> {
    kind.build::<T>()?.estimate(input, truth, scheme)
}
