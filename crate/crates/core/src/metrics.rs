//! Session outcome metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::MonitorSample;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("need at least two monitored samples, got {0}")]
    InsufficientData(usize),
    #[error("metrics inputs must be finite with non-negative duration")]
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub start_ppm: f64,
    pub end_ppm: f64,
    /// Positive when concentration fell.
    pub reduction_ppm: f64,
    pub duration_min: f64,
    /// Minutes per 100 ppm reduced; absent when nothing was reduced.
    pub min_per_100ppm: Option<f64>,
}

impl SessionMetrics {
    pub fn from_endpoints(start_ppm: f64, end_ppm: f64, duration_min: f64) -> Result<Self, MetricsError> {
        if !(start_ppm.is_finite() && end_ppm.is_finite() && duration_min.is_finite()) || duration_min < 0.0 {
            return Err(MetricsError::Invalid);
        }
        let reduction_ppm = start_ppm - end_ppm;
        let min_per_100ppm = (reduction_ppm > 0.0).then(|| duration_min / (reduction_ppm / 100.0));
        Ok(Self {
            start_ppm,
            end_ppm,
            reduction_ppm,
            duration_min,
            min_per_100ppm,
        })
    }

    /// Uses the mean of the monitored points at the first and last sample.
    pub fn from_trace(trace: &[MonitorSample]) -> Result<Self, MetricsError> {
        match (trace.first(), trace.last()) {
            (Some(a), Some(b)) if trace.len() >= 2 => Self::from_endpoints(a.mean_ppm, b.mean_ppm, (b.t - a.t) / 60.0),
            _ => Err(MetricsError::InsufficientData(trace.len())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_and_rate() {
        let m = SessionMetrics::from_endpoints(1207.0, 728.0, 12.0).unwrap();
        assert_eq!(m.reduction_ppm, 479.0);
        let m = SessionMetrics::from_endpoints(1300.0, 800.0, 10.0).unwrap();
        assert_eq!(m.min_per_100ppm, Some(2.0));
    }

    #[test]
    fn no_reduction_has_no_rate() {
        let m = SessionMetrics::from_endpoints(900.0, 900.0, 5.0).unwrap();
        assert_eq!(m.reduction_ppm, 0.0);
        assert_eq!(m.min_per_100ppm, None);
        let m = SessionMetrics::from_endpoints(900.0, 950.0, 5.0).unwrap();
        assert_eq!(m.min_per_100ppm, None);
    }

    #[test]
    fn short_traces_are_rejected() {
        let s = MonitorSample {
            t: 0.0,
            mean_ppm: 900.0,
            max_ppm: 900.0,
        };
        assert_eq!(SessionMetrics::from_trace(&[]), Err(MetricsError::InsufficientData(0)));
        assert_eq!(SessionMetrics::from_trace(&[s]), Err(MetricsError::InsufficientData(1)));
        let later = MonitorSample {
            t: 600.0,
            mean_ppm: 700.0,
            ..s
        };
        let m = SessionMetrics::from_trace(&[s, later]).unwrap();
        assert_eq!(m.duration_min, 10.0);
        assert_eq!(m.min_per_100ppm, Some(5.0));
    }
}
