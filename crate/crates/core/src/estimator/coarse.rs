use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correspondence::{argmax_positive, correlate_query, FeatureMap};
use crate::error::{Error, Result};
use crate::renderer::{descriptor_at, embeddings, render_with, Camera, DescriptorConfig, TemplateModel};
use crate::scalar::Scalar;
use crate::viewpoint::Viewpoint;

pub const DEFAULT_HYPOTHESES: usize = 16;
pub const DEFAULT_SCORE_RADIUS_PX: f64 = 3.0;
/// A keypoint column counts only when its peak is this many times its mean.
pub const DEFAULT_PEAK_RATIO: f64 = 8.0;

/// Azimuth hypotheses and scoring parameters for [`coarse_init`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoarseConfig {
    pub hypotheses: usize,
    pub elevation_prior: f64,
    pub tilt_prior: f64,
    /// Falloff of the credit a keypoint earns with the distance between its
    /// hypothesized position and its best match, in pixels.
    pub score_radius_px: f64,
    pub peak_ratio: f64,
}

impl Default for CoarseConfig {
    fn default() -> Self {
        Self {
            hypotheses: DEFAULT_HYPOTHESES,
            elevation_prior: 20.0,
            tilt_prior: 0.0,
            score_radius_px: DEFAULT_SCORE_RADIUS_PX,
            peak_ratio: DEFAULT_PEAK_RATIO,
        }
    }
}

impl CoarseConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.elevation_prior, self.tilt_prior].iter().all(|x| x.is_finite());
        let positive = self.score_radius_px > 0.0 && self.peak_ratio >= 1.0;
        if self.hypotheses == 0 || !finite || !positive {
            return Err(Error::InvalidArgument(format!("invalid coarse initializer settings {self:?}")));
        }
        Ok(())
    }
}

/// Equispaced azimuths starting at 0°, at the configured elevation and tilt.
pub fn hypothesis_viewpoints<T: Scalar>(config: &CoarseConfig) -> Result<Vec<Viewpoint<T>>> {
    config.validate()?;
    let step = 360.0 / config.hypotheses as f64;
    (0..config.hypotheses)
        .map(|h| Viewpoint::new(T::lit(h as f64 * step), T::lit(config.elevation_prior), T::lit(config.tilt_prior)))
        .collect()
}

/// Score of one hypothesis from the target-side correlation column of each of
/// its keypoints and the keypoint's hypothesized position `[u, v]`.
///
/// A column contributes `max · exp(−d² / 2r²)`, with `d` the distance from its
/// argmax to the hypothesized position, if its max is at least `peak_ratio`
/// times its mean. Both tests are invariant to positive rescaling of a column.
pub fn score_columns<T: Scalar>(columns: &[(Vec<T>, [T; 2])], width: usize, config: &CoarseConfig) -> T {
    let inv = T::lit(-0.5 / (config.score_radius_px * config.score_radius_px));
    let ratio = T::lit(config.peak_ratio);
    let mut score = T::zero();
    for (column, [u, v]) in columns {
        let Some(best) = argmax_positive(column) else { continue };
        let peak = column[best];
        let mean = column.iter().copied().sum::<T>() / T::lit(column.len() as f64);
        if peak < ratio * mean {
            continue;
        }
        let du = T::lit((best % width) as f64) - *u;
        let dv = T::lit((best / width) as f64) - *v;
        score += peak * ((du * du + dv * dv) * inv).exp();
    }
    score
}

fn hypothesis_columns<T: Scalar>(
    fa: &FeatureMap<T>,
    model: &TemplateModel,
    camera: &Camera<T>,
    descriptor: &DescriptorConfig,
    emb: &[Vec<T>],
    view: &Viewpoint<T>,
) -> Result<Vec<(Vec<T>, [T; 2])>> {
    let render = render_with(model, camera, view, (fa.height(), fa.width()))?;
    render
        .visible()
        .filter(|k| render.alpha().get((k.v.round().as_f64() as usize, k.u.round().as_f64() as usize)))
        .map(|k| Ok((correlate_query(fa, &descriptor_at(&render, emb, descriptor.spread, [k.u, k.v]))?, [k.u, k.v])))
        .collect()
}

/// Score of every hypothesis, in hypothesis order. Hypotheses are scored in
/// parallel.
pub fn hypothesis_scores<T: Scalar>(
    fa: &FeatureMap<T>,
    model: &TemplateModel,
    camera: &Camera<T>,
    descriptor: &DescriptorConfig,
    config: &CoarseConfig,
) -> Result<Vec<T>> {
    if fa.dim() != descriptor.dim {
        return Err(Error::ShapeMismatch(format!("target has {} channels, expected {}", fa.dim(), descriptor.dim)));
    }
    let emb = embeddings::<T>(model, descriptor)?;
    hypothesis_viewpoints::<T>(config)?
        .par_iter()
        .map(|view| {
            let columns = hypothesis_columns(fa, model, camera, descriptor, &emb, view)?;
            Ok(score_columns(&columns, fa.width(), config))
        })
        .collect()
}

/// Index of the highest score; the first one on ties.
pub fn select_hypothesis<T: Scalar>(scores: &[T]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Viewpoint of the best-scoring azimuth hypothesis for target map `fa`.
pub fn coarse_init<T: Scalar>(
    fa: &FeatureMap<T>,
    model: &TemplateModel,
    camera: &Camera<T>,
    descriptor: &DescriptorConfig,
    config: &CoarseConfig,
) -> Result<Viewpoint<T>> {
    let scores = hypothesis_scores(fa, model, camera, descriptor, config)?;
    Ok(hypothesis_viewpoints(config)?[select_hypothesis(&scores)])
}
