//! Iterative render-and-compare alignment: initialize, render, estimate the
//! difference, correct, and stop on a small estimated difference or at the
//! iteration limit.

mod trajectory;

pub use trajectory::{AlignmentTrajectory, IterationRecord, TerminalStatus, TrajectorySummary};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::correspondence::FeatureMap;
use crate::error::{Error, Result};
use crate::estimator::{coarse_init, CoarseConfig, DifferenceEstimator, EstimatorInput};
use crate::mulaw::BinningScheme;
use crate::renderer::{descriptor_map, render_with, Camera, DescriptorConfig, NoiseSpec, TemplateModel};
use crate::scalar::Scalar;
use crate::viewpoint::{apply_delta, delta, geodesic_distance, Viewpoint, ViewpointDelta};

pub const DEFAULT_TAU_DEG: f64 = 2.0;
pub const DEFAULT_MAX_ITERATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopCriteria {
    /// Per-axis thresholds on the estimated difference, in degrees.
    pub tau: [f64; 3],
    pub max_iterations: usize,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self { tau: [DEFAULT_TAU_DEG; 3], max_iterations: DEFAULT_MAX_ITERATIONS }
    }
}

impl StopCriteria {
    pub fn validate(&self) -> Result<()> {
        if self.tau.iter().any(|t| !(t.is_finite() && *t > 0.0)) || self.max_iterations == 0 {
            return Err(Error::InvalidArgument(format!(
                "stop criteria need positive thresholds and at least one iteration, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Whether every component of `d` is within its threshold.
    pub fn is_satisfied<T: Scalar>(&self, d: &ViewpointDelta<T>) -> bool {
        d.components().iter().zip(self.tau).all(|(x, t)| x.abs() <= T::lit(t))
    }
}

/// How the first rendered viewpoint is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum InitMode {
    /// Best of the azimuth hypotheses.
    Coarse {
        #[serde(default)]
        config: CoarseConfig,
    },
    /// A given `[azimuth, elevation, tilt]`.
    Fixed { viewpoint: [f64; 3] },
    /// The true viewpoint offset by a seeded uniform draw in `±max_offset` per axis.
    Perturbed { max_offset: [f64; 3] },
}

impl Default for InitMode {
    fn default() -> Self {
        Self::Coarse { config: CoarseConfig::default() }
    }
}

impl InitMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Coarse { config } => config.validate(),
            Self::Fixed { viewpoint } => Viewpoint::<f64>::from_components(*viewpoint).map(|_| ()),
            Self::Perturbed { max_offset } => {
                if max_offset.iter().any(|m| !(m.is_finite() && (0.0..=180.0).contains(m))) {
                    return Err(Error::InvalidArgument(format!("perturbation bounds must be in [0, 180], got {max_offset:?}")));
                }
                Ok(())
            }
        }
    }

    pub fn requires_truth(&self) -> bool {
        matches!(self, Self::Perturbed { .. })
    }
}

/// Draws a uniform offset in `±max_offset` per axis.
pub fn random_offset<T: Scalar, R: Rng>(max_offset: [f64; 3], rng: &mut R) -> Result<ViewpointDelta<T>> {
    let c = max_offset.map(|m| if m > 0.0 { rng.random_range(-m..=m) } else { 0.0 });
    ViewpointDelta::from_components(c.map(T::lit))
}

/// Seed of the estimator stream at a given iteration.
fn iteration_seed(seed: u64, iteration: usize) -> u64 {
    seed ^ (iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Everything fixed across the iterations of one run.
pub struct AlignmentContext<'a, T: Scalar> {
    pub model: &'a TemplateModel,
    pub camera: Camera<T>,
    pub scheme: &'a BinningScheme<T>,
    pub estimator: &'a dyn DifferenceEstimator<T>,
    pub stop: StopCriteria,
    pub descriptor: DescriptorConfig,
}

impl<'a, T: Scalar> AlignmentContext<'a, T> {
    /// Context with a camera fitted to `resolution` and default descriptors.
    pub fn new(
        model: &'a TemplateModel,
        resolution: (usize, usize),
        scheme: &'a BinningScheme<T>,
        estimator: &'a dyn DifferenceEstimator<T>,
        stop: StopCriteria,
    ) -> Result<Self> {
        Ok(Self {
            model,
            camera: Camera::fit(model, resolution)?,
            scheme,
            estimator,
            stop,
            descriptor: DescriptorConfig::default(),
        })
    }

    fn check(&self, has_truth: bool) -> Result<()> {
        self.stop.validate()?;
        if self.estimator.requires_truth() && !has_truth {
            return Err(Error::MissingTruth);
        }
        Ok(())
    }

    /// Initial viewpoint for `target` under `init`.
    pub fn initial_viewpoint(
        &self,
        target: &FeatureMap<T>,
        truth: Option<&Viewpoint<T>>,
        init: &InitMode,
        seed: u64,
    ) -> Result<Viewpoint<T>> {
        init.validate()?;
        match init {
            InitMode::Coarse { config } => coarse_init(target, self.model, &self.camera, &self.descriptor, config),
            InitMode::Fixed { viewpoint } => Viewpoint::from_components(viewpoint.map(T::lit)),
            InitMode::Perturbed { max_offset } => {
                let truth = truth.ok_or(Error::MissingTruth)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(apply_delta(truth, &random_offset(*max_offset, &mut rng)?))
            }
        }
    }

    /// Aligns the template to `target`, starting from the viewpoint chosen by
    /// `init`. `truth` is the target's viewpoint, used by oracle estimators
    /// and for error reporting.
    pub fn align(
        &self,
        target: &FeatureMap<T>,
        truth: Option<&Viewpoint<T>>,
        init: &InitMode,
        seed: u64,
    ) -> Result<AlignmentTrajectory<T>> {
        self.check(truth.is_some())?;
        let start = self.initial_viewpoint(target, truth, init, seed)?;
        self.align_from(target, truth, start, seed)
    }

    /// [`align`](Self::align) from an explicit starting viewpoint.
    pub fn align_from(
        &self,
        target: &FeatureMap<T>,
        truth: Option<&Viewpoint<T>>,
        start: Viewpoint<T>,
        seed: u64,
    ) -> Result<AlignmentTrajectory<T>> {
        self.check(truth.is_some())?;
        self.run(start, |view, iteration| {
            let input = EstimatorInput::new(target, self.model, self.camera, view, self.descriptor)?
                .with_seed(iteration_seed(seed, iteration));
            let truth_delta = truth.map(|t| delta(view, t));
            Ok(self
                .estimator
                .estimate(&input, truth_delta.as_ref(), self.scheme)
                .and_then(|l| l.decode(self.scheme)))
        }, |v| truth.map(|t| geodesic_distance(v, t)))
    }

    /// Moves a simulated camera until its view matches a fixed reference.
    ///
    /// `reference` fills the render slot at its viewpoint `reference_view`;
    /// each step the camera feed is the template seen from the camera pose,
    /// corrupted per `feed_noise`. The estimate is the difference from the
    /// reference to the camera pose, so the camera moves by its negation; the
    /// trajectory records the applied correction.
    pub fn localize(
        &self,
        reference: &FeatureMap<T>,
        reference_view: &Viewpoint<T>,
        start: Viewpoint<T>,
        feed_noise: &NoiseSpec,
        seed: u64,
    ) -> Result<AlignmentTrajectory<T>> {
        self.check(true)?;
        let resolution = (reference.height(), reference.width());
        self.run(start, |camera_view, iteration| {
            let feed_render = render_with(self.model, &self.camera, camera_view, resolution)?;
            let feed = descriptor_map(&feed_render, self.model, &self.descriptor, feed_noise, iteration_seed(!seed, iteration))?;
            let input = EstimatorInput::new(&feed, self.model, self.camera, reference_view, self.descriptor)?
                .with_reference(reference)?
                .with_seed(iteration_seed(seed, iteration));
            let truth_delta = delta(reference_view, camera_view);
            Ok(self.estimator.estimate(&input, Some(&truth_delta), self.scheme).and_then(|l| l.decode(self.scheme)).map(|d| -d))
        }, |v| Some(geodesic_distance(v, reference_view)))
    }

    /// The shared loop. `step` returns the correction for the viewpoint it is
    /// given, an inner error for estimator failures, or an outer error that
    /// aborts the run.
    fn run(
        &self,
        start: Viewpoint<T>,
        mut step: impl FnMut(&Viewpoint<T>, usize) -> Result<Result<ViewpointDelta<T>>>,
        error_of: impl Fn(&Viewpoint<T>) -> Option<T>,
    ) -> Result<AlignmentTrajectory<T>> {
        let mut records = Vec::new();
        let mut view = start;
        for iteration in 1..=self.stop.max_iterations {
            match step(&view, iteration)? {
                Err(e) => {
                    records.push(IterationRecord {
                        iteration,
                        viewpoint: view,
                        delta: None,
                        geodesic_error: error_of(&view),
                        event: Some(e.to_string()),
                    });
                    return Ok(AlignmentTrajectory { records, status: TerminalStatus::EstimatorFailure });
                }
                Ok(d) => {
                    let next = apply_delta(&view, &d);
                    records.push(IterationRecord {
                        iteration,
                        viewpoint: view,
                        delta: Some(d),
                        geodesic_error: error_of(&next),
                        event: None,
                    });
                    if self.stop.is_satisfied(&d) {
                        return Ok(AlignmentTrajectory { records, status: TerminalStatus::Converged });
                    }
                    view = next;
                }
            }
        }
        Ok(AlignmentTrajectory { records, status: TerminalStatus::IterationLimit })
    }
}

/// Free-function form of [`AlignmentContext::align`].
pub fn align<T: Scalar>(
    context: &AlignmentContext<'_, T>,
    target: &FeatureMap<T>,
    truth: Option<&Viewpoint<T>>,
    init: &InitMode,
    seed: u64,
) -> Result<AlignmentTrajectory<T>> {
    context.align(target, truth, init, seed)
}

/// Free-function form of [`AlignmentContext::localize`].
pub fn localization_session<T: Scalar>(
    context: &AlignmentContext<'_, T>,
    reference: &FeatureMap<T>,
    reference_view: &Viewpoint<T>,
    start: Viewpoint<T>,
    feed_noise: &NoiseSpec,
    seed: u64,
) -> Result<AlignmentTrajectory<T>> {
    context.localize(reference, reference_view, start, feed_noise, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{NoisyOracle, Oracle, Reprojection};
    use crate::renderer::Render;

    const RES: (usize, usize) = (64, 64);

    fn chair() -> TemplateModel {
        TemplateModel::from_json_str(include_str!("../../../../templates/chair.json")).unwrap()
    }

    fn target(m: &TemplateModel, view: &Viewpoint<f64>) -> FeatureMap<f64> {
        let camera = Camera::fit(m, RES).unwrap();
        let r: Render<f64> = render_with(m, &camera, view, RES).unwrap();
        descriptor_map(&r, m, &DescriptorConfig::default(), &NoiseSpec::NONE, 0).unwrap()
    }

    fn scheme() -> BinningScheme<f64> {
        BinningScheme::new(20, 255.0).unwrap()
    }

    fn fixed(v: [f64; 3]) -> InitMode {
        InitMode::Fixed { viewpoint: v }
    }

    #[test]
    fn starting_at_truth_converges_immediately() {
        let m = chair();
        let s = scheme();
        let ctx = AlignmentContext::new(&m, RES, &s, &Oracle, StopCriteria::default()).unwrap();
        let truth = Viewpoint::new(30.0, 15.0, 0.0).unwrap();
        let t = ctx.align(&target(&m, &truth), Some(&truth), &fixed([30.0, 15.0, 0.0]), 0).unwrap();
        assert_eq!(t.status, TerminalStatus::Converged);
        assert_eq!(t.iterations(), 1);
        let d = t.records[0].delta.unwrap();
        assert!(d.components().iter().all(|&x| x == s.dequantize(s.quantize(0.0)).unwrap()));
    }

    #[test]
    fn oracle_converges_from_large_azimuth_offset() {
        let m = chair();
        let s = scheme();
        let stop = StopCriteria { tau: [1.0; 3], max_iterations: 10 };
        let ctx = AlignmentContext::new(&m, RES, &s, &Oracle, stop).unwrap();
        let truth = Viewpoint::new(100.0, 0.0, 0.0).unwrap();
        let t = ctx.align(&target(&m, &truth), Some(&truth), &fixed([0.0; 3]), 0).unwrap();
        assert_eq!(t.status, TerminalStatus::Converged);
        assert!(t.iterations() <= 6);
        let residual = delta(&t.final_viewpoint().unwrap(), &truth);
        assert!(residual.max_abs() <= s.finest_half_width());
        t.validate().unwrap();
    }

    #[test]
    fn per_axis_error_strictly_decreases_until_finest_bin() {
        let m = chair();
        let s = scheme();
        let hw = s.finest_half_width();
        let stop = StopCriteria { tau: [hw; 3], max_iterations: 10 };
        let ctx = AlignmentContext::new(&m, RES, &s, &Oracle, stop).unwrap();
        let start = Viewpoint::new(10.0, 5.0, 0.0).unwrap();
        let fa = target(&m, &start);
        for d in (-179..=180).step_by(7) {
            let truth = apply_delta(&start, &ViewpointDelta::new(d as f64, 0.0, 0.0).unwrap());
            let t = ctx.align_from(&fa, Some(&truth), start, 0).unwrap();
            assert_eq!(t.status, TerminalStatus::Converged, "offset {d}");
            assert!(t.iterations() <= 6);
            let mut previous = (d as f64).abs();
            for r in &t.records {
                let e = delta(&r.estimate(), &truth).d_azimuth().abs();
                if previous > hw {
                    assert!(e < previous, "offset {d}: {e} after {previous}");
                }
                previous = e;
            }
            assert!(previous <= hw);
        }
    }

    #[test]
    fn single_iteration_is_single_shot() {
        let m = chair();
        let s = scheme();
        let stop = StopCriteria { max_iterations: 1, ..Default::default() };
        let ctx = AlignmentContext::new(&m, RES, &s, &Oracle, stop).unwrap();
        let truth = Viewpoint::new(60.0, 0.0, 0.0).unwrap();
        let t = ctx.align(&target(&m, &truth), Some(&truth), &fixed([0.0; 3]), 0).unwrap();
        assert_eq!(t.iterations(), 1);
        assert_eq!(t.status, TerminalStatus::IterationLimit);
        let d = t.records[0].delta.unwrap();
        assert_eq!(d.d_azimuth(), s.dequantize(s.quantize(60.0)).unwrap());
    }

    #[test]
    fn oracle_without_truth_is_rejected() {
        let m = chair();
        let s = scheme();
        let ctx = AlignmentContext::new(&m, RES, &s, &Oracle, StopCriteria::default()).unwrap();
        let fa = target(&m, &Viewpoint::zero());
        assert!(matches!(ctx.align(&fa, None, &fixed([0.0; 3]), 0), Err(Error::MissingTruth)));
        let est = Reprojection::default();
        let ctx = AlignmentContext::new(&m, RES, &s, &est, StopCriteria::default()).unwrap();
        let perturbed = InitMode::Perturbed { max_offset: [10.0; 3] };
        assert!(matches!(ctx.align(&fa, None, &perturbed, 0), Err(Error::MissingTruth)));
    }

    #[test]
    fn estimator_failure_ends_the_run() {
        let m = chair();
        let s = scheme();
        let cfg = DescriptorConfig::default();
        let data: Vec<f64> =
            (0..RES.0 * RES.1).flat_map(|_| (0..cfg.dim).map(|j| if j == m.len() { 1.0 } else { 0.0 })).collect();
        let fa = FeatureMap::new(RES.0, RES.1, cfg.dim, data).unwrap();
        let est = Reprojection::default();
        let ctx = AlignmentContext::new(&m, RES, &s, &est, StopCriteria::default()).unwrap();
        let t = ctx.align(&fa, None, &fixed([0.0; 3]), 0).unwrap();
        assert_eq!(t.status, TerminalStatus::EstimatorFailure);
        assert_eq!(t.iterations(), 1);
        assert!(t.records[0].delta.is_none());
        assert!(t.summary().events[0].1.contains("match"));
        t.validate().unwrap();
    }

    #[test]
    fn reprojection_alignment_reaches_truth() {
        let m = chair();
        let s = scheme();
        let est = Reprojection::default();
        let ctx = AlignmentContext::new(&m, RES, &s, &est, StopCriteria::default()).unwrap();
        let truth = Viewpoint::new(60.0, 20.0, 0.0).unwrap();
        let t = ctx.align(&target(&m, &truth), Some(&truth), &fixed([20.0, 10.0, 0.0]), 0).unwrap();
        assert_eq!(t.status, TerminalStatus::Converged);
        assert!(t.final_error().unwrap() <= 2.0, "{:?}", t.errors());
    }

    #[test]
    fn noisy_runs_are_reproducible() {
        let m = chair();
        let s = scheme();
        let noisy = NoisyOracle::new(0.3).unwrap();
        let ctx = AlignmentContext::new(&m, RES, &s, &noisy, StopCriteria::default()).unwrap();
        let truth = Viewpoint::new(-120.0, 30.0, 10.0).unwrap();
        let fa = target(&m, &truth);
        let init = InitMode::Perturbed { max_offset: [180.0, 90.0, 45.0] };
        let a = ctx.align(&fa, Some(&truth), &init, 42).unwrap();
        assert_eq!(a, ctx.align(&fa, Some(&truth), &init, 42).unwrap());
        assert_ne!(a.records[0].viewpoint, ctx.align(&fa, Some(&truth), &init, 43).unwrap().records[0].viewpoint);
    }

    #[test]
    fn coarse_init_feeds_the_loop() {
        let m = chair();
        let s = scheme();
        let est = Reprojection::default();
        let ctx = AlignmentContext::new(&m, RES, &s, &est, StopCriteria::default()).unwrap();
        let truth = Viewpoint::new(-95.0, 18.0, 0.0).unwrap();
        let fa = target(&m, &truth);
        let start = ctx.initial_viewpoint(&fa, None, &InitMode::default(), 0).unwrap();
        assert_eq!(start.azimuth(), -90.0);
        let t = ctx.align(&fa, Some(&truth), &InitMode::default(), 0).unwrap();
        assert_eq!(t.records[0].viewpoint, start);
        assert!(t.final_error().unwrap() <= 2.0);
    }

    #[test]
    fn localization_from_reference_pose_is_immediate() {
        let m = chair();
        let s = scheme();
        let ctx = AlignmentContext::new(&m, RES, &s, &Oracle, StopCriteria::default()).unwrap();
        let reference_view = Viewpoint::new(45.0, 20.0, 0.0).unwrap();
        let reference = target(&m, &reference_view);
        let t = ctx.localize(&reference, &reference_view, reference_view, &NoiseSpec::NONE, 0).unwrap();
        assert_eq!(t.status, TerminalStatus::Converged);
        assert_eq!(t.iterations(), 1);
    }

    #[test]
    fn localization_closes_a_large_gap() {
        let m = chair();
        let s = scheme();
        let ctx = AlignmentContext::new(&m, RES, &s, &Oracle, StopCriteria::default()).unwrap();
        let reference_view = Viewpoint::new(45.0, 20.0, 0.0).unwrap();
        let reference = target(&m, &reference_view);
        let start = Viewpoint::new(165.0, 20.0, 0.0).unwrap();
        let t = localization_session(&ctx, &reference, &reference_view, start, &NoiseSpec::NONE, 0).unwrap();
        assert_eq!(t.status, TerminalStatus::Converged);
        let residual = delta(&t.final_viewpoint().unwrap(), &reference_view);
        assert!(residual.max_abs() <= 2.0, "{residual}");
        let errors: Vec<f64> = t.errors().into_iter().map(Option::unwrap).collect();
        assert!(errors.windows(2).all(|w| w[1] <= w[0]), "{errors:?}");
        t.validate().unwrap();
    }

    #[test]
    fn stop_and_init_validation() {
        assert!(StopCriteria { tau: [0.0, 1.0, 1.0], max_iterations: 3 }.validate().is_err());
        assert!(StopCriteria { tau: [1.0; 3], max_iterations: 0 }.validate().is_err());
        assert!(InitMode::Perturbed { max_offset: [190.0, 0.0, 0.0] }.validate().is_err());
        let text = serde_json::to_string(&InitMode::default()).unwrap();
        assert_eq!(serde_json::from_str::<InitMode>(&text).unwrap(), InitMode::default());
        assert_eq!(serde_json::from_str::<InitMode>(r#"{"mode":"coarse"}"#).unwrap(), InitMode::default());
    }
}
