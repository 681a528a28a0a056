use serde::{Deserialize, Serialize};

use crate::alignment::{AlignmentTrajectory, TerminalStatus};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const REPORT_FORMAT: &str = "report";
pub const REPORT_VERSION: u32 = 1;
/// 30°, 22.5° and 15°.
pub const DEFAULT_THRESHOLDS_DEG: [f64; 3] = [30.0, 22.5, 15.0];

fn check_errors<T: Scalar>(errors: &[T]) -> Result<()> {
    if errors.is_empty() {
        return Err(Error::InvalidArgument("no errors to summarize".into()));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("error value"));
    }
    Ok(())
}

/// Median in degrees; the mean of the two central values for even counts.
pub fn med_err<T: Scalar>(errors: &[T]) -> Result<T> {
    check_errors(errors)?;
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    Ok(if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / T::lit(2.0) })
}

/// Fraction of errors strictly below `theta` degrees.
pub fn acc_at<T: Scalar>(errors: &[T], theta: T) -> Result<T> {
    check_errors(errors)?;
    if !(theta.is_finite() && theta > T::zero()) {
        return Err(Error::InvalidArgument(format!("accuracy threshold must be positive, got {theta}")));
    }
    let hits = errors.iter().filter(|&&e| e < theta).count();
    Ok(T::lit(hits as f64 / errors.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracyAt {
    pub theta_deg: f64,
    pub value: f64,
}

/// Aggregate metrics of a batch of alignment runs. Runs that ended in an
/// estimator failure are counted but excluded from the error statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub format: String,
    pub version: u32,
    pub trials: usize,
    pub evaluated: usize,
    pub failed: usize,
    pub converged: usize,
    pub iteration_limit: usize,
    /// Median final geodesic error in degrees.
    pub med_err: Option<f64>,
    /// Sorted by increasing threshold.
    pub accuracy: Vec<AccuracyAt>,
    /// Median error after each iteration; a run that stopped earlier
    /// contributes its final error.
    pub median_error_by_iteration: Vec<f64>,
}

impl MetricsReport {
    /// Report over `trajectories`, which must all carry ground-truth errors.
    pub fn from_trajectories<T: Scalar>(
        trajectories: &[AlignmentTrajectory<T>],
        thresholds_deg: &[f64],
        max_iterations: usize,
    ) -> Result<Self> {
        let mut thresholds = thresholds_deg.to_vec();
        if thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidArgument(format!("accuracy thresholds must be positive, got {thresholds:?}")));
        }
        thresholds.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let count = |s| trajectories.iter().filter(|t| t.status == s).count();
        let ok: Vec<&AlignmentTrajectory<T>> =
            trajectories.iter().filter(|t| t.status != TerminalStatus::EstimatorFailure).collect();
        let mut curves = Vec::with_capacity(ok.len());
        for t in &ok {
            let errors: Option<Vec<f64>> = t.errors().into_iter().map(|e| e.map(|x| x.as_f64())).collect();
            let errors = errors.ok_or_else(|| Error::InvalidArgument("trajectory without ground-truth errors".into()))?;
            if errors.len() > max_iterations {
                return Err(Error::InvalidArgument(format!(
                    "trajectory has {} iterations, limit is {max_iterations}",
                    errors.len()
                )));
            }
            curves.push(errors);
        }
        let finals: Vec<f64> = curves.iter().map(|c| c[c.len() - 1]).collect();
        let (med, accuracy, by_iteration) = if finals.is_empty() {
            (None, Vec::new(), Vec::new())
        } else {
            let accuracy = thresholds
                .iter()
                .map(|&theta| Ok(AccuracyAt { theta_deg: theta, value: acc_at(&finals, theta)? }))
                .collect::<Result<_>>()?;
            let by_iteration = (1..=max_iterations)
                .map(|i| {
                    let at: Vec<f64> = curves.iter().map(|c| c[i.min(c.len()) - 1]).collect();
                    med_err(&at)
                })
                .collect::<Result<_>>()?;
            (Some(med_err(&finals)?), accuracy, by_iteration)
        };
        Ok(Self {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            trials: trajectories.len(),
            evaluated: ok.len(),
            failed: count(TerminalStatus::EstimatorFailure),
            converged: count(TerminalStatus::Converged),
            iteration_limit: count(TerminalStatus::IterationLimit),
            med_err: med,
            accuracy,
            median_error_by_iteration: by_iteration,
        })
    }

    pub fn accuracy_at(&self, theta_deg: f64) -> Option<f64> {
        self.accuracy.iter().find(|a| a.theta_deg == theta_deg).map(|a| a.value)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
