//! A running ventilation game.
//!
//! The session owns the field, the sensors, the devices and the bubbles, and
//! advances them together in fixed ticks of `params.dt` simulated seconds.
//! Commands are validated on submission but only take effect at the start of
//! the next tick, so every field step sees a consistent set of device states.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::bubble::{merge_bubbles, update_bubbles, Bubble, BubbleConfig, HealthThresholds};
use crate::command::{
    parse_direction, parse_floor_point, parse_on, Action, ActionCommand, CommandError, Verb, SESSION_TARGET,
};
use crate::event::{EventKind, EventLog};
use crate::field::{ConcentrationField, FieldError, SimParams, Source};
use crate::flow::VentilationDevice;
use crate::geometry::{distance, Point3};
use crate::heatmap::HeatmapGrid;
use crate::metrics::{MetricsError, SessionMetrics};
use crate::protocol::{BubblePayload, DevicePayload, ReadingPayload};
use crate::scenario::{HeightLabel, Mode, Scenario, ScenarioError, TimelineEntry};
use crate::sensor::{Reading, ReadingStatus, SensorSpec, VirtualSensor};

pub const WEARABLE_ID: &str = "wrist-1";

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("scenario does not support mode {mode}: {reason}")]
    ModeMismatch { mode: &'static str, reason: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("solver fault: {0}")]
    Solver(#[from] FieldError),
    #[error("session is not running")]
    NotRunning,
    #[error("wall-clock step must be finite and non-negative, got {0}")]
    InvalidStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Running,
    /// Target reached; play may continue.
    Complete,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub thresholds: HealthThresholds,
    /// Monitored points must stay at or below target this long.
    pub sustain_s: f64,
    /// m/s
    pub avatar_speed: f64,
    pub wrist_offset: Point3,
    pub bubbles: BubbleConfig,
    pub sensor: SensorSpec,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            thresholds: HealthThresholds::default(),
            sustain_s: 60.0,
            avatar_speed: 1.5,
            wrist_offset: [0.0, 0.0, 0.75],
            bubbles: BubbleConfig::default(),
            sensor: SensorSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorRole {
    Wearable,
    Static,
}

#[derive(Debug, Clone)]
struct SensorSlot {
    sensor: VirtualSensor,
    role: SensorRole,
    last_truth: f64,
    latest: Reading,
    emitted: Option<(f64, ReadingStatus)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandOutcome {
    pub id: u64,
    pub command: ActionCommand,
    pub t: f64,
    /// Resulting state on success, or the rejection.
    pub result: Result<Value, String>,
    #[serde(skip)]
    pub error: Option<CommandError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorSample {
    pub t: f64,
    pub mean_ppm: f64,
    pub max_ppm: f64,
}

/// Read-only view published after each tick.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSnapshot {
    pub id: String,
    pub scenario: String,
    pub mode: Mode,
    pub status: SessionStatus,
    pub t: f64,
    pub avatar: [f64; 2],
    pub wrist: Point3,
    pub devices: Vec<DevicePayload>,
    pub bubbles: Vec<BubblePayload>,
    pub readings: Vec<ReadingPayload>,
    pub target_ppm: f64,
    pub below_target_since: Option<f64>,
    pub completed_at: Option<f64>,
    pub last_seq: u64,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    scenario: Scenario,
    mode: Mode,
    seed: u64,
    config: SessionConfig,
    params: SimParams,
    field: ConcentrationField,
    sources: Vec<Source>,
    devices: Vec<VentilationDevice>,
    carried: Vec<bool>,
    sensors: Vec<SensorSlot>,
    bubbles: Vec<Bubble>,
    next_bubble_id: u64,
    avatar: [f64; 2],
    avatar_target: [f64; 2],
    events: EventLog,
    status: SessionStatus,
    below_since: Option<f64>,
    completed_at: Option<f64>,
    pending: VecDeque<(u64, ActionCommand, Action)>,
    outcomes: Vec<CommandOutcome>,
    next_command_id: u64,
    timeline: Vec<TimelineEntry>,
    timeline_next: usize,
    accumulator: f64,
    monitor: Vec<MonitorSample>,
}

/// Starts a session with the default configuration and id `"session"`.
pub fn start_session(scenario: &Scenario, mode: Mode, seed: u64) -> Result<Session, SessionError> {
    Session::start("session", scenario, mode, seed, SessionConfig::default())
}

fn sensor_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

impl Session {
    pub fn start(
        id: impl Into<String>,
        scenario: &Scenario,
        mode: Mode,
        seed: u64,
        config: SessionConfig,
    ) -> Result<Self, SessionError> {
        scenario.validate()?;
        if mode == Mode::HeatmapBaseline && scenario.probes.static_sensors.len() != 6 {
            return Err(SessionError::ModeMismatch {
                mode: mode.as_str(),
                reason: format!(
                    "heatmap baseline needs six static sensor positions, scenario {} has {}",
                    scenario.name,
                    scenario.probes.static_sensors.len()
                ),
            });
        }
        let params = scenario.params;
        let geometry = scenario.geometry()?;
        let sources = scenario.sources();
        let devices = scenario.devices();

        let prerun = scenario.session.prerun_s;
        let mut field = ConcentrationField::new(geometry, scenario.initial_ppm())?.with_time(-prerun);
        if prerun > 0.0 {
            let steps = (prerun / params.dt).round() as usize;
            for _ in 0..steps {
                field = field.step(&sources, &devices, &params, params.dt)?;
            }
        }
        let field = field.with_time(0.0);

        let dims = field.geometry().dims_m();
        let avatar = scenario
            .session
            .wearable_spawn
            .unwrap_or([dims[0] / 2.0, dims[1] / 2.0]);

        let mut session = Self {
            id: id.into(),
            scenario: scenario.clone(),
            mode,
            seed,
            config,
            params,
            field,
            sources,
            devices,
            carried: scenario.carried_devices(),
            sensors: Vec::new(),
            bubbles: Vec::new(),
            next_bubble_id: 1,
            avatar,
            avatar_target: avatar,
            events: EventLog::default(),
            status: SessionStatus::Running,
            below_since: None,
            completed_at: None,
            pending: VecDeque::new(),
            outcomes: Vec::new(),
            next_command_id: 1,
            timeline: scenario.timeline.clone(),
            timeline_next: 0,
            accumulator: 0.0,
            monitor: Vec::new(),
        };

        let anchors: Vec<(String, SensorRole, Point3)> = match mode {
            Mode::ArBubbles => vec![(WEARABLE_ID.to_string(), SensorRole::Wearable, session.wrist())],
            Mode::HeatmapBaseline => scenario
                .probes
                .static_sensors
                .iter()
                .enumerate()
                .map(|(i, p)| (format!("probe-{}", i + 1), SensorRole::Static, *p))
                .collect(),
        };
        for (i, (device_id, role, anchor)) in anchors.into_iter().enumerate() {
            let truth = session.field.sample(anchor).unwrap_or(params.ambient_ppm);
            let mut sensor = VirtualSensor::power_on(
                device_id,
                config.sensor,
                anchor,
                0.0,
                truth,
                params.ambient_ppm,
                sensor_seed(seed, i as u64),
            )
            .with_climate(scenario.session.climate);
            let latest = sensor.read(0.0);
            session.sensors.push(SensorSlot {
                sensor,
                role,
                last_truth: truth,
                latest,
                emitted: None,
            });
        }
        session.sync_carried();

        let devices_json: Vec<DevicePayload> = session.device_payloads();
        session.events.push(
            0.0,
            EventKind::SessionStarted,
            json!({
                "id": session.id,
                "scenario": scenario.name,
                "mode": mode,
                "seed": seed,
                "avatar": session.avatar,
                "devices": devices_json,
                "target_ppm": config.thresholds.session_target_ppm,
            }),
        );
        session.emit_readings();
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn field(&self) -> &ConcentrationField {
        &self.field
    }

    pub fn t(&self) -> f64 {
        self.field.t()
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn completed_at(&self) -> Option<f64> {
        self.completed_at
    }

    pub fn devices(&self) -> &[VentilationDevice] {
        &self.devices
    }

    pub fn bubbles(&self) -> &[Bubble] {
        &self.bubbles
    }

    pub fn avatar(&self) -> [f64; 2] {
        self.avatar
    }

    pub fn avatar_target(&self) -> [f64; 2] {
        self.avatar_target
    }

    pub fn wrist(&self) -> Point3 {
        let o = self.config.wrist_offset;
        let dims = self.field.geometry().dims_m();
        [
            (self.avatar[0] + o[0]).clamp(0.0, dims[0]),
            (self.avatar[1] + o[1]).clamp(0.0, dims[1]),
            o[2].clamp(0.0, dims[2]),
        ]
    }

    pub fn events(&self) -> &EventLog {
        &self.events
    }

    pub fn monitor_trace(&self) -> &[MonitorSample] {
        &self.monitor
    }

    pub fn sensor_ids(&self) -> impl Iterator<Item = &str> {
        self.sensors.iter().map(|s| s.sensor.device_id())
    }

    pub fn latest_reading(&self, device_id: &str) -> Option<&Reading> {
        self.sensors
            .iter()
            .find(|s| s.sensor.device_id() == device_id)
            .map(|s| &s.latest)
    }

    /// Latest wearable reading (ar mode only).
    pub fn wearable_reading(&self) -> Option<&Reading> {
        self.sensors
            .iter()
            .find(|s| s.role == SensorRole::Wearable)
            .map(|s| &s.latest)
    }

    pub fn sensor(&self, device_id: &str) -> Option<&VirtualSensor> {
        self.sensors
            .iter()
            .find(|s| s.sensor.device_id() == device_id)
            .map(|s| &s.sensor)
    }

    /// Concentrations currently monitored for completion: bubble readings in
    /// ar mode, the six probes' latest readings in baseline mode.
    pub fn monitored_ppm(&self) -> Vec<f64> {
        match self.mode {
            Mode::ArBubbles => self.bubbles.iter().map(|b| b.last_ppm).collect(),
            Mode::HeatmapBaseline => self
                .sensors
                .iter()
                .filter(|s| s.role == SensorRole::Static)
                .filter_map(|s| s.latest.co2_ppm.filter(|_| s.latest.is_ok()))
                .collect(),
        }
    }

    pub fn metrics(&self) -> Result<SessionMetrics, MetricsError> {
        SessionMetrics::from_trace(&self.monitor)
    }

    pub fn heatmap(&self, height: HeightLabel) -> HeatmapGrid {
        HeatmapGrid::from_field(&self.field, &self.scenario, height)
    }

    pub fn device_payloads(&self) -> Vec<DevicePayload> {
        self.devices.iter().map(device_payload).collect()
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            id: self.id.clone(),
            scenario: self.scenario.name.clone(),
            mode: self.mode,
            status: self.status,
            t: self.t(),
            avatar: self.avatar,
            wrist: self.wrist(),
            devices: self.device_payloads(),
            bubbles: self.bubbles.iter().map(BubblePayload::from).collect(),
            readings: self.sensors.iter().map(|s| ReadingPayload::from(&s.latest)).collect(),
            target_ppm: self.config.thresholds.session_target_ppm,
            below_target_since: self.below_since,
            completed_at: self.completed_at,
            last_seq: self.events.last_seq(),
        }
    }

    /// Validates `cmd` and queues it for the next tick boundary.
    pub fn submit(&mut self, cmd: ActionCommand) -> Result<u64, CommandError> {
        let action = self.validate(&cmd)?;
        let id = self.next_command_id;
        self.next_command_id += 1;
        self.pending.push_back((id, cmd, action));
        Ok(id)
    }

    pub fn pending_commands(&self) -> usize {
        self.pending.len()
    }

    /// Outcomes of commands applied since the last call.
    pub fn take_outcomes(&mut self) -> Vec<CommandOutcome> {
        std::mem::take(&mut self.outcomes)
    }

    fn validate(&self, cmd: &ActionCommand) -> Result<Action, CommandError> {
        if self.status == SessionStatus::Aborted {
            return Err(CommandError::NotRunning);
        }
        let invalid = || CommandError::InvalidForTarget {
            verb: cmd.verb.as_str(),
            target: cmd.target.clone(),
        };
        if cmd.target == SESSION_TARGET || cmd.target == self.id {
            return match cmd.verb {
                Verb::MoveAvatar => {
                    let to = parse_floor_point(&cmd.args)?;
                    let dims = self.field.geometry().dims_m();
                    if !(0.0..=dims[0]).contains(&to[0]) || !(0.0..=dims[1]).contains(&to[1]) {
                        return Err(CommandError::Malformed(format!(
                            "avatar target {to:?} is outside the room"
                        )));
                    }
                    Ok(Action::MoveAvatar { to })
                }
                Verb::PlaceBubble if self.mode == Mode::ArBubbles => Ok(Action::PlaceBubble),
                Verb::Start => Ok(Action::Start),
                Verb::Stop => Ok(Action::Stop),
                _ => Err(invalid()),
            };
        }
        if let Some(device) = self.devices.iter().position(|d| d.id == cmd.target) {
            let kind = self.devices[device].kind;
            return match cmd.verb {
                Verb::SetState => Ok(Action::SetState {
                    device,
                    on: parse_on(&cmd.args)?,
                }),
                Verb::Aim if kind.is_directed() => Ok(Action::Aim {
                    device,
                    direction: parse_direction(&cmd.args)?,
                }),
                _ => Err(invalid()),
            };
        }
        let is_bubble = cmd
            .target
            .strip_prefix("bubble-")
            .and_then(|n| n.parse::<u64>().ok())
            .is_some_and(|n| self.bubbles.iter().any(|b| b.id == n));
        if is_bubble || self.sensor_ids().any(|s| s == cmd.target) {
            return Err(invalid());
        }
        Err(CommandError::UnknownTarget(cmd.target.clone()))
    }

    /// Advances by `wall_dt` wall-clock seconds scaled by `time_scale`,
    /// in whole ticks; leftover time carries to the next call.
    pub fn advance(&mut self, wall_dt: f64) -> Result<(), SessionError> {
        if !(wall_dt.is_finite() && wall_dt >= 0.0) {
            return Err(SessionError::InvalidStep(wall_dt));
        }
        if self.status == SessionStatus::Aborted {
            return Err(SessionError::NotRunning);
        }
        self.accumulator += wall_dt * self.params.time_scale;
        let dt = self.params.dt;
        while self.accumulator + 1e-9 >= dt {
            self.accumulator -= dt;
            self.tick()?;
        }
        Ok(())
    }

    /// Runs whole ticks until simulated time reaches `t` (or the session ends).
    pub fn run_until(&mut self, t: f64) -> Result<(), SessionError> {
        while self.t() + 1e-9 < t && self.status != SessionStatus::Aborted {
            self.tick()?;
        }
        Ok(())
    }

    /// One solver tick of `params.dt` simulated seconds.
    pub fn tick(&mut self) -> Result<(), SessionError> {
        if self.status == SessionStatus::Aborted {
            return Err(SessionError::NotRunning);
        }
        let t0 = self.t();
        self.queue_timeline(t0);
        self.apply_pending(t0);
        if self.status == SessionStatus::Aborted {
            return Ok(());
        }

        let dt = self.params.dt;
        self.move_avatar(dt);
        self.sync_carried();

        let next = match self.field.step(&self.sources, &self.devices, &self.params, dt) {
            Ok(f) => f,
            Err(e) => {
                self.status = SessionStatus::Aborted;
                self.events
                    .push(t0, EventKind::Fault, json!({ "error": e.to_string() }));
                return Err(e.into());
            }
        };
        self.field = next;
        let t = self.t();

        let wrist = self.wrist();
        let mut fresh_wearable: Option<Reading> = None;
        let mut any_fresh = false;
        for slot in &mut self.sensors {
            let anchor = match slot.role {
                SensorRole::Wearable => wrist,
                SensorRole::Static => slot.sensor.position(),
            };
            slot.sensor.set_position(anchor);
            if let Ok(v) = self.field.sample(anchor) {
                slot.last_truth = v;
            }
            slot.sensor.tick(slot.last_truth, dt);
            slot.latest = slot.sensor.read(t);
            if slot.latest.is_ok() && slot.latest.t == t {
                any_fresh = true;
                if slot.role == SensorRole::Wearable {
                    fresh_wearable = Some(slot.latest.clone());
                }
            }
        }
        self.emit_readings();

        if let Some(reading) = fresh_wearable {
            let bubbles = std::mem::take(&mut self.bubbles);
            self.bubbles = update_bubbles(bubbles, wrist, &reading, t, &self.config.bubbles);
            if !self.bubbles.is_empty() {
                self.emit_bubbles(t);
            }
        }
        if any_fresh {
            self.record_monitor(t);
        }
        self.check_completion();
        Ok(())
    }

    fn queue_timeline(&mut self, t: f64) {
        while let Some(entry) = self.timeline.get(self.timeline_next) {
            if entry.t > t + 1e-9 {
                break;
            }
            let cmd = ActionCommand::new(entry.target.clone(), entry.verb, entry.args.clone());
            self.timeline_next += 1;
            if let Err(e) = self.submit(cmd.clone()) {
                self.events.push(
                    t,
                    EventKind::CommandRejected,
                    json!({ "command": cmd, "error": e.to_string(), "source": "timeline" }),
                );
            }
        }
    }

    fn apply_pending(&mut self, t: f64) {
        while let Some((id, cmd, action)) = self.pending.pop_front() {
            let result = self.apply(t, action);
            let (result, error) = match result {
                Ok(v) => (Ok(v), None),
                Err(e) => {
                    self.events.push(
                        t,
                        EventKind::CommandRejected,
                        json!({ "command": cmd, "error": e.to_string() }),
                    );
                    (Err(e.to_string()), Some(e))
                }
            };
            self.outcomes.push(CommandOutcome {
                id,
                command: cmd,
                t,
                result,
                error,
            });
        }
    }

    fn apply(&mut self, t: f64, action: Action) -> Result<Value, CommandError> {
        if self.status == SessionStatus::Aborted {
            return Err(CommandError::NotRunning);
        }
        match action {
            Action::SetState { device, on } => {
                self.devices[device].on = on;
                let payload = serde_json::to_value(device_payload(&self.devices[device])).expect("json");
                self.events.push(t, EventKind::DeviceState, payload.clone());
                Ok(payload)
            }
            Action::Aim { device, direction } => {
                self.devices[device].orientation = direction;
                let payload = serde_json::to_value(device_payload(&self.devices[device])).expect("json");
                self.events.push(t, EventKind::DeviceState, payload.clone());
                Ok(payload)
            }
            Action::MoveAvatar { to } => {
                self.avatar_target = to;
                let payload = json!({ "avatar": self.avatar, "target": to });
                self.events.push(t, EventKind::Avatar, payload.clone());
                Ok(payload)
            }
            Action::PlaceBubble => {
                let reading = self
                    .wearable_reading()
                    .filter(|r| r.is_ok())
                    .cloned()
                    .ok_or_else(|| CommandError::Rejected("sensor has no valid reading yet (warming up)".into()))?;
                let ppm = reading.co2_ppm.expect("ok reading has a value");
                let bubble = Bubble::new(self.next_bubble_id, self.wrist(), ppm, t);
                self.next_bubble_id += 1;
                let placed = BubblePayload::from(&bubble);
                let mut bubbles = std::mem::take(&mut self.bubbles);
                bubbles.push(bubble);
                self.bubbles = merge_bubbles(bubbles, self.config.bubbles.merge_radius_m);
                self.events
                    .push(t, EventKind::BubblePlaced, json!({ "placed": placed }));
                self.emit_bubbles(t);
                // A new hot bubble restarts the sustain window.
                self.refresh_below_since(t);
                Ok(serde_json::to_value(placed).expect("json"))
            }
            Action::Start => Ok(json!({ "status": self.status })),
            Action::Stop => {
                self.status = SessionStatus::Aborted;
                self.events
                    .push(t, EventKind::SessionEnded, json!({ "reason": "stopped" }));
                Ok(json!({ "status": self.status }))
            }
        }
    }

    fn move_avatar(&mut self, dt: f64) {
        let dx = self.avatar_target[0] - self.avatar[0];
        let dy = self.avatar_target[1] - self.avatar[1];
        let d = (dx * dx + dy * dy).sqrt();
        let reach = self.config.avatar_speed * dt;
        if d <= reach {
            self.avatar = self.avatar_target;
        } else {
            self.avatar = [self.avatar[0] + dx / d * reach, self.avatar[1] + dy / d * reach];
        }
    }

    fn sync_carried(&mut self) {
        let wrist = self.wrist();
        for (d, carried) in self.devices.iter_mut().zip(&self.carried) {
            if *carried {
                d.position = wrist;
            }
        }
    }

    fn emit_readings(&mut self) {
        for slot in &mut self.sensors {
            let r = &slot.latest;
            let is_new = match slot.emitted {
                None => true,
                Some((t, status)) => r.status != status || (r.is_ok() && r.t != t),
            };
            if !is_new {
                continue;
            }
            slot.emitted = Some((r.t, r.status));
            let mut payload = serde_json::to_value(ReadingPayload::from(r)).expect("json");
            payload["anchor"] = json!(slot.sensor.position());
            self.events.push(r.t, EventKind::Reading, payload);
        }
    }

    fn emit_bubbles(&mut self, t: f64) {
        let payload: Vec<BubblePayload> = self.bubbles.iter().map(BubblePayload::from).collect();
        self.events.push(t, EventKind::Bubbles, json!({ "bubbles": payload }));
    }

    fn record_monitor(&mut self, t: f64) {
        let values = self.monitored_ppm();
        if values.is_empty() {
            return;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let max = values.iter().copied().fold(f64::MIN, f64::max);
        self.monitor.push(MonitorSample {
            t,
            mean_ppm: mean,
            max_ppm: max,
        });
    }

    fn all_monitored_below(&self) -> bool {
        let target = self.config.thresholds.session_target_ppm;
        let values = self.monitored_ppm();
        let expected = match self.mode {
            Mode::ArBubbles => self.bubbles.len(),
            Mode::HeatmapBaseline => self.sensors.len(),
        };
        !values.is_empty() && values.len() == expected && values.iter().all(|v| *v <= target)
    }

    fn refresh_below_since(&mut self, t: f64) {
        if self.all_monitored_below() {
            self.below_since.get_or_insert(t);
        } else {
            self.below_since = None;
        }
    }

    /// Evaluates the stopping criterion; completion is flagged once and play
    /// continues.
    pub fn check_completion(&mut self) -> SessionStatus {
        let t = self.t();
        self.refresh_below_since(t);
        if self.status == SessionStatus::Running {
            if let Some(since) = self.below_since {
                if t - since + 1e-9 >= self.config.sustain_s {
                    self.status = SessionStatus::Complete;
                    self.completed_at = Some(t);
                    let metrics = self.metrics().ok();
                    self.events.push(
                        t,
                        EventKind::Completion,
                        json!({
                            "target_ppm": self.config.thresholds.session_target_ppm,
                            "below_since": since,
                            "metrics": metrics,
                        }),
                    );
                }
            }
        }
        self.status
    }
}

fn device_payload(d: &VentilationDevice) -> DevicePayload {
    DevicePayload {
        id: d.id.clone(),
        kind: d.kind.as_str().to_string(),
        pos: d.position,
        orientation: d.orientation,
        on: d.on,
    }
}

/// Distance helper for policies: nearest bubble to a point.
pub fn nearest_bubble(bubbles: &[Bubble], p: Point3) -> Option<&Bubble> {
    bubbles
        .iter()
        .min_by(|a, b| distance(a.position, p).total_cmp(&distance(b.position, p)))
}
