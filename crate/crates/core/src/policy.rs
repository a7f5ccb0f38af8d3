//! Scripted players for comparing how well bubbles guide ventilation.
//!
//! Both players walk the same survey route and drop a bubble at each stop.
//! The informed player then acts on what the bubbles show: it walks to the
//! nearest bubble above target, opens the window device closest to it and
//! points the closest fan at it. The uniform player ignores bubble colors,
//! patrols every bubble in turn and cycles the devices on one at a time on a
//! fixed clock.

use serde::Serialize;

use crate::command::ActionCommand;
use crate::flow::DeviceKind;
use crate::geometry::{distance, normalize, sub, Point3};
use crate::metrics::SessionMetrics;
use crate::scenario::{Mode, Scenario};
use crate::session::{Session, SessionConfig, SessionError, SessionStatus};

/// Seconds to stand at a stop before trusting the wrist reading.
pub const DWELL_S: f64 = 20.0;
/// Uniform player's device rotation period.
pub const ROTATE_S: f64 = 120.0;
/// Informed player re-aims a fan when the bearing moves more than this (rad).
const REAIM_RAD: f64 = 0.2;

pub trait Policy {
    fn name(&self) -> &'static str;
    /// Commands to submit before the next tick.
    fn decide(&mut self, session: &Session) -> Vec<ActionCommand>;
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyOutcome {
    pub policy: &'static str,
    pub seed: u64,
    pub completed_at: Option<f64>,
    pub metrics: Option<SessionMetrics>,
    pub bubbles: usize,
    pub commands: usize,
}

/// Plays `policy` on `scenario` until completion or `horizon_s`.
pub fn run_policy(
    scenario: &Scenario,
    policy: &mut dyn Policy,
    seed: u64,
    horizon_s: f64,
) -> Result<PolicyOutcome, SessionError> {
    let mut session = Session::start("policy", scenario, Mode::ArBubbles, seed, SessionConfig::default())?;
    let mut commands = 0;
    while session.t() < horizon_s && session.status() == SessionStatus::Running {
        for cmd in policy.decide(&session) {
            // Scripted commands are well formed; a refusal just means the
            // action is not possible yet.
            if session.submit(cmd).is_ok() {
                commands += 1;
            }
        }
        session.tick()?;
    }
    Ok(PolicyOutcome {
        policy: policy.name(),
        seed,
        completed_at: session.completed_at(),
        metrics: session.metrics().ok(),
        bubbles: session.bubbles().len(),
        commands,
    })
}

/// Survey stops on the scenario's probe grid, in boustrophedon order.
pub fn survey_route(scenario: &Scenario) -> Vec<[f64; 2]> {
    let (xs, ys) = scenario.probe_axes();
    let mut route = Vec::with_capacity(xs.len() * ys.len());
    for (row, y) in ys.iter().enumerate() {
        let cols: Vec<f64> = if row % 2 == 0 {
            xs.clone()
        } else {
            xs.iter().rev().copied().collect()
        };
        route.extend(cols.into_iter().map(|x| [x, *y]));
    }
    route
}

/// Walks to a point and waits there for `DWELL_S`.
#[derive(Debug, Clone, Default)]
struct Visit {
    target: Option<[f64; 2]>,
    arrived_at: Option<f64>,
}

impl Visit {
    fn start(&mut self, target: [f64; 2], out: &mut Vec<ActionCommand>) {
        self.target = Some(target);
        self.arrived_at = None;
        out.push(ActionCommand::move_avatar(target));
    }

    /// True once the dwell at the current target is over.
    fn done(&mut self, s: &Session) -> bool {
        let Some(target) = self.target else { return true };
        if s.avatar() != target || s.avatar_target() != target {
            return false;
        }
        let arrived = *self.arrived_at.get_or_insert(s.t());
        s.t() - arrived >= DWELL_S
    }
}

#[derive(Debug, Clone)]
struct Survey {
    route: Vec<[f64; 2]>,
    next: usize,
    visit: Visit,
}

impl Survey {
    fn new(route: Vec<[f64; 2]>) -> Self {
        Self {
            route,
            next: 0,
            visit: Visit::default(),
        }
    }

    fn finished(&self) -> bool {
        self.next >= self.route.len()
    }

    fn step(&mut self, s: &Session, out: &mut Vec<ActionCommand>) {
        if self.finished() {
            return;
        }
        if self.visit.target.is_none() {
            self.visit.start(self.route[self.next], out);
            return;
        }
        let warm = s.wearable_reading().is_some_and(|r| r.is_ok());
        if self.visit.done(s) && warm {
            out.push(ActionCommand::place_bubble());
            self.next += 1;
            if let Some(next) = self.route.get(self.next) {
                self.visit.start(*next, out);
            }
        }
    }
}

fn floor(p: Point3) -> [f64; 2] {
    [p[0], p[1]]
}

fn floor_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    distance([a[0], a[1], 0.0], [b[0], b[1], 0.0])
}

#[derive(Debug, Clone)]
pub struct InformedPolicy {
    survey: Survey,
    visit: Visit,
    last_visited: Option<u64>,
    target_ppm: f64,
}

impl InformedPolicy {
    pub fn new(scenario: &Scenario) -> Self {
        Self {
            survey: Survey::new(survey_route(scenario)),
            visit: Visit::default(),
            last_visited: None,
            target_ppm: SessionConfig::default().thresholds.session_target_ppm,
        }
    }

    fn act_on(&self, s: &Session, spot: Point3, out: &mut Vec<ActionCommand>) {
        let devices = s.devices();
        let nearest = |pred: fn(DeviceKind) -> bool| {
            devices
                .iter()
                .filter(|d| pred(d.kind))
                .min_by(|a, b| distance(a.position, spot).total_cmp(&distance(b.position, spot)))
        };
        if let Some(w) = nearest(DeviceKind::is_window) {
            if !w.on {
                out.push(ActionCommand::set_state(&w.id, true));
            }
        }
        if let Some(f) = nearest(|k| k == DeviceKind::PedestalFan) {
            if !f.on {
                out.push(ActionCommand::set_state(&f.id, true));
            }
            if let Some(dir) = normalize(sub(spot, f.position)) {
                let cos = dir.iter().zip(f.orientation).map(|(a, b)| a * b).sum::<f64>();
                if cos.clamp(-1.0, 1.0).acos() > REAIM_RAD {
                    out.push(ActionCommand::aim(&f.id, dir));
                }
            }
        }
    }
}

impl Policy for InformedPolicy {
    fn name(&self) -> &'static str {
        "informed"
    }

    fn decide(&mut self, s: &Session) -> Vec<ActionCommand> {
        let mut out = Vec::new();
        let here = s.avatar();
        let hot: Vec<_> = s.bubbles().iter().filter(|b| b.last_ppm > self.target_ppm).collect();
        if let Some(b) = hot
            .iter()
            .min_by(|a, b| floor_distance(floor(a.position), here).total_cmp(&floor_distance(floor(b.position), here)))
        {
            self.act_on(s, b.position, &mut out);
        }
        if !self.survey.finished() {
            self.survey.step(s, &mut out);
            return out;
        }
        if self.visit.target.is_some() && !self.visit.done(s) {
            return out;
        }
        // Nearest hot bubble, moving on from the one just checked if possible.
        let pick = hot
            .iter()
            .filter(|b| hot.len() == 1 || Some(b.id) != self.last_visited)
            .min_by(|a, b| floor_distance(floor(a.position), here).total_cmp(&floor_distance(floor(b.position), here)));
        if let Some(b) = pick {
            self.last_visited = Some(b.id);
            self.visit.start(floor(b.position), &mut out);
        } else {
            self.visit.target = None;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct UniformPolicy {
    survey: Survey,
    visit: Visit,
    patrol_next: usize,
    active_device: Option<usize>,
    next_rotation_t: f64,
}

impl UniformPolicy {
    pub fn new(scenario: &Scenario) -> Self {
        Self {
            survey: Survey::new(survey_route(scenario)),
            visit: Visit::default(),
            patrol_next: 0,
            active_device: None,
            next_rotation_t: 0.0,
        }
    }
}

impl Policy for UniformPolicy {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn decide(&mut self, s: &Session) -> Vec<ActionCommand> {
        let mut out = Vec::new();
        let devices = s.devices();
        if !devices.is_empty() && s.t() >= self.next_rotation_t {
            let next = self.active_device.map_or(0, |i| (i + 1) % devices.len());
            if let Some(prev) = self.active_device {
                out.push(ActionCommand::set_state(&devices[prev].id, false));
            }
            out.push(ActionCommand::set_state(&devices[next].id, true));
            self.active_device = Some(next);
            self.next_rotation_t += ROTATE_S;
        }
        if !self.survey.finished() {
            self.survey.step(s, &mut out);
            return out;
        }
        let bubbles = s.bubbles();
        if bubbles.is_empty() || (self.visit.target.is_some() && !self.visit.done(s)) {
            return out;
        }
        let b = &bubbles[self.patrol_next % bubbles.len()];
        self.patrol_next += 1;
        self.visit.start(floor(b.position), &mut out);
        out
    }
}
