//! Fitting source strengths so a scenario's corner peak lands on a target.
//!
//! The corner peak is the largest concentration seen at any of the four
//! corner probes of one height over a run. It grows monotonically with the
//! emission scale applied to every source, so a secant search on that scale
//! converges in a handful of runs.

use serde::Serialize;

use crate::scenario::{HeightLabel, Scenario};
use crate::session::SessionError;
use crate::trace::run_headless;

/// Time (s) and value (ppm) of the largest corner-probe sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CornerPeak {
    pub t_s: f64,
    pub ppm: f64,
    pub probe_row: usize,
    pub probe_col: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    pub scale: f64,
    pub peak: CornerPeak,
    pub runs: usize,
    #[serde(skip)]
    pub scenario: Scenario,
}

pub const PEAK_SAMPLE_INTERVAL_S: f64 = 60.0;

/// Runs `scenario` headless for `horizon_s` and finds its corner peak.
pub fn corner_peak(scenario: &Scenario, height: HeightLabel, horizon_s: f64) -> Result<CornerPeak, SessionError> {
    let run = run_headless(scenario, horizon_s, PEAK_SAMPLE_INTERVAL_S, scenario.session.seed)?;
    let (xs, ys) = scenario.probe_axes();
    let (last_row, last_col) = (ys.len() - 1, xs.len() - 1);
    let mut best = CornerPeak {
        t_s: 0.0,
        ppm: f64::NEG_INFINITY,
        probe_row: 0,
        probe_col: 0,
    };
    for (row, col) in [(0, 0), (0, last_col), (last_row, 0), (last_row, last_col)] {
        let name = format!("r{row}c{col}_{height}");
        let Some(series) = run.trace.column(&name) else {
            continue;
        };
        for (t, v) in run.trace.times.iter().zip(series) {
            if v > best.ppm {
                best = CornerPeak {
                    t_s: *t,
                    ppm: v,
                    probe_row: row,
                    probe_col: col,
                };
            }
        }
    }
    Ok(best)
}

/// Copy of `scenario` with every source's emission multiplied by `scale`.
pub fn scale_emissions(scenario: &Scenario, scale: f64) -> Scenario {
    let mut out = scenario.clone();
    for s in &mut out.sources {
        let rate = s.emission_rate.unwrap_or_else(|| s.kind.default_emission());
        s.emission_rate = Some(rate * scale);
    }
    out
}

/// Searches for the emission scale whose table-height corner peak equals
/// `target_ppm`, running each candidate for `target_minutes + 60` minutes.
pub fn calibrate_emissions(
    scenario: &Scenario,
    target_ppm: f64,
    target_minutes: f64,
    tolerance_ppm: f64,
) -> Result<Calibration, SessionError> {
    let horizon = (target_minutes + 60.0) * 60.0;
    let height = HeightLabel::T;
    let mut runs = 0;
    let mut eval = |s: f64| {
        runs += 1;
        corner_peak(&scale_emissions(scenario, s), height, horizon)
    };
    let (mut s0, mut p0) = (0.0, eval(0.0)?);
    let (mut s1, mut p1) = (1.0, eval(1.0)?);
    for _ in 0..8 {
        if (p1.ppm - target_ppm).abs() <= tolerance_ppm || (p1.ppm - p0.ppm).abs() < 1e-9 {
            break;
        }
        let next = (s1 + (target_ppm - p1.ppm) * (s1 - s0) / (p1.ppm - p0.ppm)).max(0.0);
        (s0, p0) = (s1, p1);
        s1 = next;
        p1 = eval(s1)?;
    }
    Ok(Calibration {
        scale: s1,
        peak: p1,
        runs,
        scenario: scale_emissions(scenario, s1),
    })
}
