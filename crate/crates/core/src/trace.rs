//! Headless scenario runs and the probe trace format.
//!
//! A trace is a CSV with a `t_s` column followed by one column per probe,
//! named `r{row}c{col}_{G|T|C}`.

use std::io::Read;

use thiserror::Error;

use crate::event::EventLog;
use crate::heatmap::HeatmapGrid;
use crate::scenario::{HeightLabel, Mode, Scenario};
use crate::session::{Session, SessionConfig, SessionError};

pub const DEFAULT_SAMPLE_INTERVAL_S: f64 = 10.0;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace format: {0}")]
    Format(String),
    #[error("time {t} s is outside the trace span {first}..={last}")]
    OutOfSpan { t: f64, first: f64, last: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTrace {
    pub columns: Vec<String>,
    pub times: Vec<f64>,
    /// `rows[i][j]` is column `j` at `times[i]`.
    pub rows: Vec<Vec<f64>>,
}

impl ProbeTrace {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            times: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.times.push(t);
        self.rows.push(values);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t_s".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (t, row) in self.times.iter().zip(&self.rows) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, TraceError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.get(0) != Some("t_s") {
            return Err(TraceError::Format("first column must be t_s".into()));
        }
        let mut trace = Self::new(header.iter().skip(1).map(str::to_string).collect());
        for rec in r.records() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| TraceError::Format(format!("not a number: {s:?}")))
            };
            let t = parse(&rec[0])?;
            let values = rec.iter().skip(1).map(parse).collect::<Result<Vec<_>, _>>()?;
            trace.push(t, values);
        }
        Ok(trace)
    }

    pub fn from_csv_str(text: &str) -> Result<Self, TraceError> {
        Self::from_reader(text.as_bytes())
    }

    /// Row with the largest `t_s <= t`.
    pub fn row_at(&self, t: f64) -> Result<usize, TraceError> {
        let (first, last) = match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => return Err(TraceError::Format("trace has no rows".into())),
        };
        if !(t >= first && t <= last) {
            return Err(TraceError::OutOfSpan { t, first, last });
        }
        Ok(self.times.partition_point(|x| *x <= t) - 1)
    }

    /// Rebuilds a plan-view grid at `height` from the row for time `t`.
    pub fn heatmap(&self, t: f64, height: HeightLabel) -> Result<HeatmapGrid, TraceError> {
        let i = self.row_at(t)?;
        let suffix = format!("_{height}");
        let mut cells = Vec::new();
        for (j, name) in self.columns.iter().enumerate() {
            if let Some(rc) = name.strip_suffix(&suffix) {
                let (row, col) = parse_rc(rc).ok_or_else(|| TraceError::Format(format!("bad column {name:?}")))?;
                cells.push((row, col, self.rows[i][j]));
            }
        }
        if cells.is_empty() {
            return Err(TraceError::Format(format!("no columns at height {height}")));
        }
        let rows = cells.iter().map(|c| c.0).max().unwrap_or(0) + 1;
        let cols = cells.iter().map(|c| c.1).max().unwrap_or(0) + 1;
        let mut values = vec![vec![f64::NAN; cols]; rows];
        for (r, c, v) in cells {
            values[r][c] = v;
        }
        Ok(HeatmapGrid {
            height,
            t: self.times[i],
            xs: (0..cols).map(|c| c as f64).collect(),
            ys: (0..rows).map(|r| r as f64).collect(),
            values,
        })
    }
}

fn parse_rc(s: &str) -> Option<(usize, usize)> {
    let rest = s.strip_prefix('r')?;
    let (row, col) = rest.split_once('c')?;
    Some((row.parse().ok()?, col.parse().ok()?))
}

#[derive(Debug, Clone)]
pub struct HeadlessRun {
    pub trace: ProbeTrace,
    pub events: EventLog,
    pub session: Session,
}

/// Runs `scenario` with no player input for `duration_s` simulated seconds,
/// sampling every probe each `interval_s` (first row at `interval_s`).
pub fn run_headless(
    scenario: &Scenario,
    duration_s: f64,
    interval_s: f64,
    seed: u64,
) -> Result<HeadlessRun, SessionError> {
    if !(duration_s.is_finite() && duration_s >= 0.0) {
        return Err(SessionError::InvalidStep(duration_s));
    }
    if !(interval_s.is_finite() && interval_s > 0.0) {
        return Err(SessionError::InvalidStep(interval_s));
    }
    let mut session = Session::start("headless", scenario, Mode::ArBubbles, seed, SessionConfig::default())?;
    let probes = scenario.probes();
    let mut trace = ProbeTrace::new(probes.iter().map(|p| p.id.clone()).collect());
    let samples = (duration_s / interval_s + 1e-9).floor() as usize;
    for k in 1..=samples {
        let t = k as f64 * interval_s;
        session.run_until(t)?;
        let field = session.field();
        let values = probes
            .iter()
            .map(|p| field.sample(p.position).unwrap_or(f64::NAN))
            .collect();
        trace.push(t, values);
    }
    session.run_until(duration_s)?;
    Ok(HeadlessRun {
        trace,
        events: session.events().clone(),
        session,
    })
}
