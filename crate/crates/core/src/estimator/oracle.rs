use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{BinLogits, DifferenceEstimator, EstimatorInput};
use crate::error::{Error, Result};
use crate::mulaw::BinningScheme;
use crate::scalar::Scalar;
use crate::viewpoint::ViewpointDelta;

fn true_bins<T: Scalar>(truth: Option<&ViewpointDelta<T>>, scheme: &BinningScheme<T>) -> Result<[usize; 3]> {
    let truth = truth.ok_or(Error::MissingTruth)?;
    Ok(truth.components().map(|d| scheme.quantize(d)))
}

/// Returns the bin containing the true difference on every axis.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Oracle;

impl<T: Scalar> DifferenceEstimator<T> for Oracle {
    fn estimate(
        &self,
        _input: &EstimatorInput<'_, T>,
        truth: Option<&ViewpointDelta<T>>,
        scheme: &BinningScheme<T>,
    ) -> Result<BinLogits<T>> {
        Ok(BinLogits::from_bins(scheme.n_bins(), true_bins(truth, scheme)?))
    }

    fn requires_truth(&self) -> bool {
        true
    }
}

/// The true bin shifted by a rounded Gaussian offset whose standard deviation,
/// in bins, is `noise · (n/2) · |compand(Δ)|`: exact near zero difference and
/// increasingly approximate for large differences. Offsets wrap around the
/// bin range, as the angle does.
///
/// One standard normal draw per axis comes from a stream seeded by the
/// input's seed, so equal seeds share draws across different differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyOracle {
    noise: f64,
}

impl NoisyOracle {
    pub fn new(noise: f64) -> Result<Self> {
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::InvalidArgument(format!("oracle noise must be >= 0, got {noise}")));
        }
        Ok(Self { noise })
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Bin offsets for the given true difference and standard normal draws.
    pub fn offsets<T: Scalar>(&self, truth: &ViewpointDelta<T>, scheme: &BinningScheme<T>, draws: [f64; 3]) -> [i64; 3] {
        let half = scheme.n_bins() as f64 / 2.0;
        let mut out = [0; 3];
        for ((o, d), z) in out.iter_mut().zip(truth.components()).zip(draws) {
            let sigma = self.noise * half * scheme.compand(d).abs().as_f64();
            *o = (sigma * z).round() as i64;
        }
        out
    }
}

impl<T: Scalar> DifferenceEstimator<T> for NoisyOracle {
    fn estimate(
        &self,
        input: &EstimatorInput<'_, T>,
        truth: Option<&ViewpointDelta<T>>,
        scheme: &BinningScheme<T>,
    ) -> Result<BinLogits<T>> {
        let bins = true_bins(truth, scheme)?;
        let mut rng = ChaCha8Rng::seed_from_u64(input.seed());
        let draws: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let offsets = self.offsets(truth.ok_or(Error::MissingTruth)?, scheme, draws);
        let n = scheme.n_bins() as i64;
        let noisy = std::array::from_fn(|i| (bins[i] as i64 + offsets[i]).rem_euclid(n) as usize);
        Ok(BinLogits::from_bins(scheme.n_bins(), noisy))
    }

    fn requires_truth(&self) -> bool {
        true
    }
}
