use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{BinLogits, DifferenceEstimator, EstimatorInput, ABSOLUTE_AZIMUTH_BINS};
use crate::correspondence::{argmax_positive, correlate_query, dot};
use crate::error::{Error, Result};
use crate::mulaw::BinningScheme;
use crate::renderer::{descriptor_at, Camera, TemplateModel};
use crate::scalar::Scalar;
use crate::viewpoint::{apply_delta, wrap_angle, Viewpoint, ViewpointDelta};

/// Fewest matched keypoints accepted by [`reprojection_search`].
pub const MIN_OBSERVATIONS: usize = 4;
/// Smallest raw descriptor dot product accepted as a keypoint match.
pub const MIN_MATCH_SCORE: f64 = 0.5;
const REFINE_RADIUS_CELLS: usize = 4;

/// Coarse-to-fine search ranges, in degrees.
///
/// The first level scans `±range` per axis at `coarse_step`; each later level
/// scans `±ceil(previous / step)·step` around the best point so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchGrid {
    pub range: [f64; 3],
    pub coarse_step: f64,
    pub refine_steps: Vec<f64>,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self { range: [90.0; 3], coarse_step: 10.0, refine_steps: vec![3.0, 1.0] }
    }
}

impl SearchGrid {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let steps_ok = positive(self.coarse_step)
            && self.refine_steps.iter().all(|&s| positive(s))
            && std::iter::once(self.coarse_step).chain(self.refine_steps.iter().copied()).is_sorted_by(|a, b| a > b);
        if !steps_ok || self.range.iter().any(|r| !(r.is_finite() && *r >= 0.0 && *r < 180.0)) {
            return Err(Error::InvalidArgument(format!("invalid search grid {self:?}")));
        }
        Ok(())
    }

    /// Resolution of the last level.
    pub fn final_step(&self) -> f64 {
        self.refine_steps.last().copied().unwrap_or(self.coarse_step)
    }

    /// `(step, half-extent)` for every level.
    fn levels(&self) -> Vec<(f64, [f64; 3])> {
        let mut out = vec![(self.coarse_step, self.range)];
        let mut previous = self.coarse_step;
        for &step in &self.refine_steps {
            out.push((step, [(previous / step).ceil() * step; 3]));
            previous = step;
        }
        out
    }
}

/// Image location in the target matched to a template keypoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<T: Scalar> {
    pub id: u32,
    pub point: [T; 2],
}

/// Locates each visible render keypoint in the target.
///
/// The render's descriptor at the exact keypoint position is correlated
/// against every target location; the argmax is accepted when its raw dot
/// product reaches [`MIN_MATCH_SCORE`] and is refined to the score-weighted
/// centroid of the surrounding window.
pub fn observe<T: Scalar>(input: &EstimatorInput<'_, T>) -> Result<Vec<Observation<T>>> {
    let fa = input.target();
    let (h, w) = input.resolution();
    let render = input.render();
    let mut out = Vec::new();
    for k in render.visible() {
        let cell = (k.v.round().as_f64() as usize, k.u.round().as_f64() as usize);
        if !render.alpha().get(cell) {
            continue;
        }
        let query = descriptor_at(render, input.embeddings(), input.descriptor().spread, [k.u, k.v]);
        let column = correlate_query(fa, &query)?;
        let Some(best) = argmax_positive(&column) else { continue };
        if dot(fa.cell((best / w, best % w)), &query) < T::lit(MIN_MATCH_SCORE) {
            continue;
        }
        let (r0, c0) = (best / w, best % w);
        let r = REFINE_RADIUS_CELLS;
        let (mut su, mut sv, mut sw) = (T::zero(), T::zero(), T::zero());
        for row in r0.saturating_sub(r)..=(r0 + r).min(h - 1) {
            for col in c0.saturating_sub(r)..=(c0 + r).min(w - 1) {
                let s = column[row * w + col];
                su += s * T::lit(col as f64);
                sv += s * T::lit(row as f64);
                sw += s;
            }
        }
        out.push(Observation { id: k.id, point: [su / sw, sv / sw] });
    }
    Ok(out)
}

/// Mean squared distance between observed points and the template keypoints
/// projected at `view`.
pub fn reprojection_error<T: Scalar>(
    observations: &[Observation<T>],
    model: &TemplateModel,
    camera: &Camera<T>,
    resolution: (usize, usize),
    view: &Viewpoint<T>,
) -> Result<T> {
    if observations.is_empty() {
        return Err(Error::InsufficientMatches { found: 0, required: 1 });
    }
    let rotation = view.to_rotation();
    let mut total = T::zero();
    for o in observations {
        let i = model
            .index_of(o.id)
            .ok_or_else(|| Error::InvalidArgument(format!("observation of unknown keypoint {}", o.id)))?;
        let (u, v, _) = camera.project(&rotation, model.keypoints()[i].position.map(T::lit), resolution);
        let (du, dv) = (u - o.point[0], v - o.point[1]);
        total += du * du + dv * dv;
    }
    Ok(total / T::lit(observations.len() as f64))
}

#[derive(Clone, Copy)]
struct Candidate<T> {
    error: T,
    offset: [T; 3],
}

impl<T: Scalar> Candidate<T> {
    fn l1(&self) -> T {
        self.offset.iter().map(|x| x.abs()).sum()
    }

    /// Lower error first; errors equal up to rounding tie-break toward the
    /// smaller L1 norm, then lexicographically smaller offsets.
    fn cmp(&self, other: &Self) -> Ordering {
        let tol = T::epsilon() * T::lit(64.0) * T::one().max(self.error.abs().max(other.error.abs()));
        if (self.error - other.error).abs() > tol {
            return self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal);
        }
        self.l1().partial_cmp(&other.l1()).unwrap_or(Ordering::Equal).then_with(|| {
            self.offset
                .iter()
                .zip(&other.offset)
                .map(|(a, b)| a.partial_cmp(b).unwrap_or(Ordering::Equal))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    }
}

/// Difference from `current` minimizing [`reprojection_error`] over a
/// coarse-to-fine grid.
pub fn reprojection_search<T: Scalar>(
    observations: &[Observation<T>],
    model: &TemplateModel,
    camera: &Camera<T>,
    resolution: (usize, usize),
    current: &Viewpoint<T>,
    grid: &SearchGrid,
) -> Result<ViewpointDelta<T>> {
    grid.validate()?;
    if observations.len() < MIN_OBSERVATIONS {
        return Err(Error::InsufficientMatches { found: observations.len(), required: MIN_OBSERVATIONS });
    }
    let evaluate = |offset: [T; 3]| -> Result<Candidate<T>> {
        let view = apply_delta(current, &ViewpointDelta::from_components(offset)?);
        Ok(Candidate { error: reprojection_error(observations, model, camera, resolution, &view)?, offset })
    };
    let mut best = evaluate([T::zero(); 3])?;
    for (step, half) in grid.levels() {
        let center = best.offset;
        let counts = half.map(|x| (x / step + 1e-9).floor() as i64);
        for i in -counts[0]..=counts[0] {
            for j in -counts[1]..=counts[1] {
                for k in -counts[2]..=counts[2] {
                    let offset = [
                        center[0] + T::lit(i as f64 * step),
                        center[1] + T::lit(j as f64 * step),
                        center[2] + T::lit(k as f64 * step),
                    ];
                    let c = evaluate(offset)?;
                    if c.cmp(&best).is_lt() {
                        best = c;
                    }
                }
            }
        }
    }
    ViewpointDelta::from_components(best.offset)
}

/// Estimates the difference by matching render keypoints into the target
/// and searching for the viewpoint that best reprojects them.
///
/// Also supplies the absolute azimuth sector of the implied target viewpoint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Reprojection {
    grid: SearchGrid,
}

impl Reprojection {
    pub fn new(grid: SearchGrid) -> Result<Self> {
        grid.validate()?;
        Ok(Self { grid })
    }

    pub fn grid(&self) -> &SearchGrid {
        &self.grid
    }

    /// The continuous difference before quantization.
    pub fn search<T: Scalar>(&self, input: &EstimatorInput<'_, T>) -> Result<ViewpointDelta<T>> {
        let observations = observe(input)?;
        reprojection_search(&observations, input.model(), input.camera(), input.resolution(), &input.view(), &self.grid)
    }
}

impl<T: Scalar> DifferenceEstimator<T> for Reprojection {
    fn estimate(
        &self,
        input: &EstimatorInput<'_, T>,
        _truth: Option<&ViewpointDelta<T>>,
        scheme: &BinningScheme<T>,
    ) -> Result<BinLogits<T>> {
        let d = self.search(input)?;
        let mut logits = BinLogits::from_bins(scheme.n_bins(), d.components().map(|x| scheme.quantize(x)));
        let azimuth = wrap_angle(input.view().azimuth() + d.d_azimuth())?.as_f64();
        let sector = 360.0 / ABSOLUTE_AZIMUTH_BINS as f64;
        let k = (azimuth / sector).round().rem_euclid(ABSOLUTE_AZIMUTH_BINS as f64) as usize;
        logits.absolute_azimuth = Some(
            (0..ABSOLUTE_AZIMUTH_BINS)
                .map(|i| {
                    let d = i.abs_diff(k);
                    -T::lit(d.min(ABSOLUTE_AZIMUTH_BINS - d) as f64)
                })
                .collect(),
        );
        Ok(logits)
    }
}
