use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::viewpoint::{apply_delta, Viewpoint, ViewpointDelta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Converged,
    IterationLimit,
    EstimatorFailure,
}

impl TerminalStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::IterationLimit => "iteration_limit",
            Self::EstimatorFailure => "estimator_failure",
        }
    }
}

impl fmt::Display for TerminalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TerminalStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(Self::Converged),
            "iteration_limit" => Ok(Self::IterationLimit),
            "estimator_failure" => Ok(Self::EstimatorFailure),
            other => Err(Error::InvalidArgument(format!("unknown terminal status \"{other}\""))),
        }
    }
}

const RUNNING: &str = "running";

/// One render-estimate-update step.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T: Scalar> {
    /// 1-based.
    pub iteration: usize,
    /// Viewpoint rendered at this step.
    pub viewpoint: Viewpoint<T>,
    /// Correction applied to `viewpoint`; `None` when the estimator failed.
    pub delta: Option<ViewpointDelta<T>>,
    /// Geodesic error in degrees of the corrected viewpoint (or of `viewpoint`
    /// when the estimator failed), when ground truth is known.
    pub geodesic_error: Option<T>,
    /// Estimator diagnostics, such as a failure message.
    pub event: Option<String>,
}

impl<T: Scalar> IterationRecord<T> {
    /// The viewpoint after this step's correction.
    pub fn estimate(&self) -> Viewpoint<T> {
        self.delta.map_or(self.viewpoint, |d| apply_delta(&self.viewpoint, &d))
    }
}

/// Sequence of iteration records with the reason the loop stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentTrajectory<T: Scalar> {
    pub records: Vec<IterationRecord<T>>,
    pub status: TerminalStatus,
}

/// JSON-friendly digest of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub status: TerminalStatus,
    pub iterations: usize,
    pub initial: [f64; 3],
    pub final_viewpoint: [f64; 3],
    pub final_error: Option<f64>,
    pub events: Vec<(usize, String)>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    iter: usize,
    azimuth: f64,
    elevation: f64,
    tilt: f64,
    d_azimuth: Option<f64>,
    d_elevation: Option<f64>,
    d_tilt: Option<f64>,
    geodesic_error: Option<f64>,
    status: String,
}

fn format_err(reason: String) -> Error {
    Error::Format { path: "<trajectory>".into(), reason }
}

impl<T: Scalar> AlignmentTrajectory<T> {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn initial_viewpoint(&self) -> Option<Viewpoint<T>> {
        self.records.first().map(|r| r.viewpoint)
    }

    /// Viewpoint after the last applied correction.
    pub fn final_viewpoint(&self) -> Option<Viewpoint<T>> {
        self.records.last().map(IterationRecord::estimate)
    }

    pub fn final_error(&self) -> Option<T> {
        self.records.last().and_then(|r| r.geodesic_error)
    }

    /// Error after each iteration.
    pub fn errors(&self) -> Vec<Option<T>> {
        self.records.iter().map(|r| r.geodesic_error).collect()
    }

    /// Checks record ordering, status placement and that every rendered
    /// viewpoint is the previous one with its correction applied.
    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(format_err("trajectory has no records".into()));
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.iteration != i + 1 {
                return Err(format_err(format!("record {i} has iteration {}", r.iteration)));
            }
            let last = i + 1 == self.records.len();
            if r.delta.is_none() && !(last && self.status == TerminalStatus::EstimatorFailure) {
                return Err(format_err(format!("iteration {} has no correction", r.iteration)));
            }
            if let Some(next) = self.records.get(i + 1) {
                if r.estimate() != next.viewpoint {
                    return Err(format_err(format!(
                        "iteration {} renders {} but the previous step leads to {}",
                        next.iteration,
                        next.viewpoint,
                        r.estimate()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> TrajectorySummary {
        let angles = |v: Option<Viewpoint<T>>| v.map_or([f64::NAN; 3], |v| v.components().map(|x| x.as_f64()));
        TrajectorySummary {
            status: self.status,
            iterations: self.iterations(),
            initial: angles(self.initial_viewpoint()),
            final_viewpoint: angles(self.final_viewpoint()),
            final_error: self.final_error().map(|x| x.as_f64()),
            events: self.records.iter().filter_map(|r| r.event.clone().map(|e| (r.iteration, e))).collect(),
        }
    }

    /// One row per iteration: `iter, azimuth, elevation, tilt, d_azimuth,
    /// d_elevation, d_tilt, geodesic_error, status`. Missing values are empty;
    /// `status` is `running` except on the last row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (i, r) in self.records.iter().enumerate() {
            let [a, e, t] = r.viewpoint.components().map(|x| x.as_f64());
            let d = r.delta.map(|d| d.components().map(|x| x.as_f64()));
            w.serialize(CsvRow {
                iter: r.iteration,
                azimuth: a,
                elevation: e,
                tilt: t,
                d_azimuth: d.map(|d| d[0]),
                d_elevation: d.map(|d| d[1]),
                d_tilt: d.map(|d| d[2]),
                geodesic_error: r.geodesic_error.map(|x| x.as_f64()),
                status: if i + 1 == self.records.len() { self.status.to_string() } else { RUNNING.into() },
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses [`write_csv`](Self::write_csv) output and validates it.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows: Vec<CsvRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
        let Some(last) = rows.last() else { return Err(format_err("trajectory has no rows".into())) };
        let status: TerminalStatus = last.status.parse()?;
        let mut records = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if i + 1 < rows.len() && row.status != RUNNING {
                return Err(format_err(format!("terminal status on non-final iteration {}", row.iter)));
            }
            let delta = match (row.d_azimuth, row.d_elevation, row.d_tilt) {
                (Some(a), Some(e), Some(t)) => Some(ViewpointDelta::new(T::lit(a), T::lit(e), T::lit(t))?),
                (None, None, None) => None,
                _ => return Err(format_err(format!("partial correction on iteration {}", row.iter))),
            };
            records.push(IterationRecord {
                iteration: row.iter,
                viewpoint: Viewpoint::new(T::lit(row.azimuth), T::lit(row.elevation), T::lit(row.tilt))?,
                delta,
                geodesic_error: row.geodesic_error.map(T::lit),
                event: None,
            });
        }
        let t = Self { records, status };
        t.validate()?;
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(status: TerminalStatus) -> AlignmentTrajectory<f64> {
        let mut records = Vec::new();
        let mut v = Viewpoint::new(100.0, -10.0, 3.0).unwrap();
        for (i, d) in [[-81.0, 7.5, 0.1], [-19.1, 2.2, -0.3], [0.2, 0.1, 0.0]].into_iter().enumerate() {
            let d = ViewpointDelta::from_components(d).unwrap();
            let r = IterationRecord { iteration: i + 1, viewpoint: v, delta: Some(d), geodesic_error: Some(1.0 / (i + 1) as f64), event: None };
            v = r.estimate();
            records.push(r);
        }
        if status == TerminalStatus::EstimatorFailure {
            records.push(IterationRecord { iteration: 4, viewpoint: v, delta: None, geodesic_error: None, event: Some("no matches".into()) });
        }
        AlignmentTrajectory { records, status }
    }

    #[test]
    fn csv_round_trip_preserves_records() {
        for status in [TerminalStatus::Converged, TerminalStatus::IterationLimit, TerminalStatus::EstimatorFailure] {
            let t = sample(status);
            t.validate().unwrap();
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            let text = String::from_utf8(buf.clone()).unwrap();
            assert!(text.starts_with("iter,azimuth,elevation,tilt,d_azimuth,d_elevation,d_tilt,geodesic_error,status\n"));
            assert!(text.trim_end().ends_with(status.as_str()));
            let back = AlignmentTrajectory::<f64>::read_csv(buf.as_slice()).unwrap();
            let mut expected = t.clone();
            expected.records.iter_mut().for_each(|r| r.event = None);
            assert_eq!(back, expected);
        }
    }

    #[test]
    fn broken_chain_is_rejected_on_read() {
        let t = sample(TerminalStatus::Converged);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut fields: Vec<&str> = lines[1].split(',').collect();
        fields[4] = "-80.0";
        lines[1] = fields.join(",");
        let text = lines.join("\n");
        assert!(AlignmentTrajectory::<f64>::read_csv(text.as_bytes()).is_err());
        let mut gap = t.clone();
        gap.records[1].iteration = 5;
        assert!(gap.validate().is_err());
        let mut early = t;
        early.records[0].delta = None;
        assert!(early.validate().is_err());
    }

    #[test]
    fn status_only_on_last_row() {
        let t = sample(TerminalStatus::Converged);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("running", "converged", 1);
        assert!(AlignmentTrajectory::<f64>::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn summary_reports_final_state() {
        let t = sample(TerminalStatus::EstimatorFailure);
        let s = t.summary();
        assert_eq!(s.iterations, 4);
        assert_eq!(s.status, TerminalStatus::EstimatorFailure);
        assert_eq!(s.events, vec![(4, "no matches".to_string())]);
        assert_eq!(s.final_viewpoint, t.records[3].viewpoint.components());
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"estimator_failure\""));
    }
}
