//! Scenario files: room layout, sources, devices, probe layout and a
//! scripted command timeline, in TOML with SI units throughout.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::command::{Verb, SESSION_TARGET};
use crate::field::{SimParams, Source, SourceKind};
use crate::flow::{DeviceKind, FlowParams, VentilationDevice};
use crate::geometry::{normalize, BoxRegion, Point3, RoomGeometry};
use crate::sensor::Climate;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("no bundled scenario named {0:?}")]
    UnknownBundled(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    ArBubbles,
    HeatmapBaseline,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ArBubbles => "ar_bubbles",
            Mode::HeatmapBaseline => "heatmap_baseline",
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ar_bubbles" | "ar" => Ok(Mode::ArBubbles),
            "heatmap_baseline" | "heatmap" | "baseline" => Ok(Mode::HeatmapBaseline),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

/// Probe layer: ground, table or ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HeightLabel {
    G,
    T,
    C,
}

impl HeightLabel {
    pub const ALL: [HeightLabel; 3] = [HeightLabel::G, HeightLabel::T, HeightLabel::C];

    pub fn as_str(self) -> &'static str {
        match self {
            HeightLabel::G => "G",
            HeightLabel::T => "T",
            HeightLabel::C => "C",
        }
    }
}

impl fmt::Display for HeightLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeightLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "G" | "g" => Ok(HeightLabel::G),
            "T" | "t" => Ok(HeightLabel::T),
            "C" | "c" => Ok(HeightLabel::C),
            other => Err(format!("unknown height label {other:?}, expected G, T or C")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Heights {
    #[serde(rename = "G")]
    pub ground: f64,
    #[serde(rename = "T")]
    pub table: f64,
    #[serde(rename = "C")]
    pub ceiling: f64,
}

impl Default for Heights {
    fn default() -> Self {
        Self {
            ground: 0.1,
            table: 0.75,
            ceiling: 2.4,
        }
    }
}

impl Heights {
    pub fn get(&self, label: HeightLabel) -> f64 {
        match label {
            HeightLabel::G => self.ground,
            HeightLabel::T => self.table,
            HeightLabel::C => self.ceiling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    pub dims_m: Point3,
    #[serde(default = "default_cell")]
    pub cell_m: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocked: Vec<BoxRegion>,
}

fn default_cell() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSpec {
    pub mode: Mode,
    pub seed: u64,
    /// Seconds simulated before the session clock starts, so bubbles exist
    /// when play begins. Sources may be scheduled at negative times.
    pub prerun_s: f64,
    /// Uniform starting concentration; defaults to ambient.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_ppm: Option<f64>,
    /// Avatar floor position at start.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wearable_spawn: Option<[f64; 2]>,
    pub climate: Climate,
}

impl Default for SessionSpec {
    fn default() -> Self {
        Self {
            mode: Mode::ArBubbles,
            seed: 0,
            prerun_s: 0.0,
            initial_ppm: None,
            wearable_spawn: None,
            climate: Climate::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSpec {
    /// Column positions along x; rows run along y.
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub heights: Heights,
    /// Fixed sensors for the heatmap baseline.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub static_sensors: Vec<Point3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub id: String,
    pub kind: SourceKind,
    pub position: Point3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emission_rate: Option<f64>,
    /// `[t_on, t_off)` intervals; empty means always on.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FlowOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jet_speed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jet_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exchange_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aperture_m: Option<f64>,
}

impl FlowOverride {
    fn apply(&self, mut base: FlowParams) -> FlowParams {
        if let Some(v) = self.jet_speed {
            base.jet_speed = v;
        }
        if let Some(v) = self.jet_radius {
            base.jet_radius = v;
        }
        if let Some(v) = self.decay_length {
            base.decay_length = v;
        }
        if let Some(v) = self.exchange_rate {
            base.exchange_rate = v;
        }
        if let Some(v) = self.aperture_m {
            base.aperture_m = v;
        }
        base
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub id: String,
    pub kind: DeviceKind,
    pub position: Point3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Point3>,
    #[serde(default)]
    pub on: bool,
    /// Travels with the wearer's wrist (hand fans).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub carried: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimelineEntry {
    pub t: f64,
    pub target: String,
    pub verb: Verb,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub args: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub room: RoomSpec,
    #[serde(default)]
    pub params: SimParams,
    #[serde(default)]
    pub session: SessionSpec,
    #[serde(default)]
    pub probes: ProbeSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<SourceSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub devices: Vec<DeviceSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub timeline: Vec<TimelineEntry>,
}

/// One probe column of a trace: id `r{row}c{col}_{H}` and its position.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub id: String,
    pub row: usize,
    pub col: usize,
    pub height: HeightLabel,
    pub position: Point3,
}

const BUNDLED: &[(&str, &str)] = &[
    ("pilot-office", include_str!("../scenarios/pilot-office.toml")),
    ("r1", include_str!("../scenarios/r1.toml")),
    ("r2", include_str!("../scenarios/r2.toml")),
    ("diner", include_str!("../scenarios/diner.toml")),
    ("home", include_str!("../scenarios/home.toml")),
    ("lab", include_str!("../scenarios/lab.toml")),
];

impl Scenario {
    pub fn bundled_names() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(n, _)| *n)
    }

    pub fn bundled(name: &str) -> Result<Self, ScenarioError> {
        let key = name.to_ascii_lowercase();
        let text = BUNDLED
            .iter()
            .find(|(n, _)| *n == key)
            .map(|(_, t)| *t)
            .ok_or_else(|| ScenarioError::UnknownBundled(name.to_string()))?;
        Self::from_toml_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// A bundled name, or else a path on disk.
    pub fn resolve(name_or_path: &str) -> Result<Self, ScenarioError> {
        match Self::bundled(name_or_path) {
            Ok(s) => Ok(s),
            Err(ScenarioError::UnknownBundled(_)) => Self::load(name_or_path),
            Err(e) => Err(e),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn geometry(&self) -> Result<RoomGeometry, ScenarioError> {
        let mut g =
            RoomGeometry::new(self.room.dims_m, self.room.cell_m).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        for region in &self.room.blocked {
            g.block_region(region);
        }
        Ok(g)
    }

    pub fn initial_ppm(&self) -> f64 {
        self.session.initial_ppm.unwrap_or(self.params.ambient_ppm)
    }

    /// Field sources, one per schedule interval.
    pub fn sources(&self) -> Vec<Source> {
        let mut out = Vec::new();
        for s in &self.sources {
            let base = Source::new(s.id.clone(), s.kind, s.position)
                .with_rate(s.emission_rate.unwrap_or_else(|| s.kind.default_emission()));
            if s.schedule.is_empty() {
                out.push(base);
            } else {
                for [on, off] in &s.schedule {
                    out.push(base.clone().active_between(*on, *off));
                }
            }
        }
        out
    }

    pub fn devices(&self) -> Vec<VentilationDevice> {
        self.devices
            .iter()
            .map(|d| {
                let orientation = d.orientation.unwrap_or_else(|| default_orientation(d.kind));
                let flow = d.flow.unwrap_or_default().apply(FlowParams::default_for(d.kind));
                VentilationDevice::new(d.id.clone(), d.kind, d.position, orientation)
                    .with_flow(flow)
                    .switched(d.on)
            })
            .collect()
    }

    pub fn carried_devices(&self) -> Vec<bool> {
        self.devices.iter().map(|d| d.carried).collect()
    }

    /// Column and row coordinates, falling back to an even 3×3 layout.
    pub fn probe_axes(&self) -> (Vec<f64>, Vec<f64>) {
        let dims = self.room.dims_m;
        let even = |d: f64| (0..3).map(|i| (i as f64 + 0.5) * d / 3.0).collect::<Vec<_>>();
        let xs = if self.probes.xs.is_empty() {
            even(dims[0])
        } else {
            self.probes.xs.clone()
        };
        let ys = if self.probes.ys.is_empty() {
            even(dims[1])
        } else {
            self.probes.ys.clone()
        };
        (xs, ys)
    }

    pub fn probes_at(&self, height: HeightLabel) -> Vec<Probe> {
        let (xs, ys) = self.probe_axes();
        let z = self.probes.heights.get(height);
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for (row, y) in ys.iter().enumerate() {
            for (col, x) in xs.iter().enumerate() {
                out.push(Probe {
                    id: format!("r{row}c{col}_{height}"),
                    row,
                    col,
                    height,
                    position: [*x, *y, z],
                });
            }
        }
        out
    }

    /// All probes, grouped by height in G, T, C order.
    pub fn probes(&self) -> Vec<Probe> {
        HeightLabel::ALL.iter().flat_map(|h| self.probes_at(*h)).collect()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.trim().is_empty() {
            return invalid("name must not be empty");
        }
        let g = self.geometry()?;
        self.params
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if let Some(c) = self.session.initial_ppm {
            if !(c.is_finite() && c >= 0.0) {
                return invalid("session.initial_ppm must be non-negative");
            }
        }
        if !(self.session.prerun_s.is_finite() && self.session.prerun_s >= 0.0) {
            return invalid("session.prerun_s must be non-negative");
        }

        let mut intervals: BTreeMap<&str, Vec<[f64; 2]>> = BTreeMap::new();
        for s in &self.sources {
            if !g.contains(s.position) {
                return invalid(format!("placement outside room: source {} at {:?}", s.id, s.position));
            }
            if !g.is_open(s.position) {
                return invalid(format!("source {} sits inside blocked furniture", s.id));
            }
            if let Some(r) = s.emission_rate {
                if !(r.is_finite() && r >= 0.0) {
                    return invalid(format!("source {} emission_rate must be non-negative", s.id));
                }
            }
            let list = intervals.entry(s.id.as_str()).or_default();
            if s.schedule.is_empty() {
                list.push([f64::NEG_INFINITY, f64::INFINITY]);
            }
            for iv in &s.schedule {
                if iv[0].is_nan() || iv[1].is_nan() || iv[0] >= iv[1] {
                    return invalid(format!("source {} has an empty schedule interval {:?}", s.id, iv));
                }
                list.push(*iv);
            }
        }
        for (id, list) in &mut intervals {
            list.sort_by(|a, b| a[0].total_cmp(&b[0]));
            if list.windows(2).any(|w| w[1][0] < w[0][1]) {
                return invalid(format!("source {id} has overlapping schedule intervals"));
            }
        }

        let mut ids = BTreeSet::new();
        for d in &self.devices {
            if d.id == SESSION_TARGET || !ids.insert(d.id.as_str()) {
                return invalid(format!("duplicate or reserved device id {:?}", d.id));
            }
            if !g.contains(d.position) {
                return invalid(format!("placement outside room: device {} at {:?}", d.id, d.position));
            }
            if let Some(o) = d.orientation {
                if normalize(o).is_none() {
                    return invalid(format!("device {} orientation must be non-zero", d.id));
                }
            }
            if d.carried && d.kind != DeviceKind::HandFan {
                return invalid(format!("device {}: only hand fans can be carried", d.id));
            }
        }
        for dev in self.devices() {
            if dev.kind == DeviceKind::SplitAc && dev.flow.exchange_rate != 0.0 {
                return invalid(format!(
                    "device {}: split AC recirculates and must have exchange_rate 0",
                    dev.id
                ));
            }
            let f = dev.flow;
            let fields = [f.jet_speed, f.jet_radius, f.exchange_rate, f.aperture_m];
            if fields.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || f.decay_length.is_nan() || f.decay_length <= 0.0
            {
                return invalid(format!("device {}: flow parameters must be non-negative", dev.id));
            }
        }

        let (xs, ys) = self.probe_axes();
        let dims = self.room.dims_m;
        if xs.iter().any(|x| !(0.0..=dims[0]).contains(x)) || ys.iter().any(|y| !(0.0..=dims[1]).contains(y)) {
            return invalid("probe grid extends outside the room");
        }
        for p in self.probes() {
            if !g.is_open(p.position) {
                return invalid(format!("probe {} at {:?} is not in open air", p.id, p.position));
            }
        }
        for (i, p) in self.probes.static_sensors.iter().enumerate() {
            if !g.is_open(*p) {
                return invalid(format!("static sensor {i} at {p:?} is not in open air"));
            }
        }
        if let Some([x, y]) = self.session.wearable_spawn {
            if !g.contains([x, y, 0.0]) {
                return invalid(format!("placement outside room: wearable spawn at {:?}", [x, y]));
            }
        }

        let mut last_t = f64::NEG_INFINITY;
        for e in &self.timeline {
            if !(e.t.is_finite() && e.t >= 0.0) || e.t < last_t {
                return invalid("timeline entries need non-negative, non-decreasing times");
            }
            last_t = e.t;
            if e.target != SESSION_TARGET && !ids.contains(e.target.as_str()) {
                return invalid(format!("timeline targets unknown device {:?}", e.target));
            }
        }
        Ok(())
    }
}

fn default_orientation(kind: DeviceKind) -> Point3 {
    match kind {
        DeviceKind::CeilingFan => [0.0, 0.0, -1.0],
        _ => [1.0, 0.0, 0.0],
    }
}
