//! Ventilation devices and the parametric airflow they induce.
//!
//! Fans are axial jets: speed decays exponentially along the axis and as a
//! Gaussian across it, and nothing moves behind the fan plane. A window
//! ventilator draws room air toward its aperture with the same exponential
//! falloff and exchanges aperture air with outdoors. Open windows only
//! exchange. The split AC is a jet with no exchange at all: it recirculates.

use serde::{Deserialize, Serialize};

use crate::field::FieldError;
use crate::geometry::{dot, norm, normalize, sub, Point3, RoomGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    WindowVentilator,
    OpenWindow,
    CeilingFan,
    PedestalFan,
    HandFan,
    SplitAc,
}

impl DeviceKind {
    /// Kinds whose flow has a direction that can be re-aimed.
    pub fn is_directed(self) -> bool {
        matches!(
            self,
            DeviceKind::CeilingFan | DeviceKind::PedestalFan | DeviceKind::HandFan | DeviceKind::SplitAc
        )
    }

    /// Kinds that trade indoor air for outdoor air.
    pub fn is_window(self) -> bool {
        matches!(self, DeviceKind::WindowVentilator | DeviceKind::OpenWindow)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceKind::WindowVentilator => "window_ventilator",
            DeviceKind::OpenWindow => "open_window",
            DeviceKind::CeilingFan => "ceiling_fan",
            DeviceKind::PedestalFan => "pedestal_fan",
            DeviceKind::HandFan => "hand_fan",
            DeviceKind::SplitAc => "split_ac",
        }
    }
}

/// Flow parameters. Jet kinds use `jet_speed`, `jet_radius` and
/// `decay_length`; window kinds use `exchange_rate` and `aperture_m`, and the
/// ventilator additionally uses `jet_speed`/`decay_length` for its intake.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    /// m/s
    pub jet_speed: f64,
    /// m
    pub jet_radius: f64,
    /// m
    pub decay_length: f64,
    /// 1/s, relaxation rate of aperture voxels toward ambient
    pub exchange_rate: f64,
    /// m, radius around the device position whose voxels exchange with outdoors
    pub aperture_m: f64,
}

impl FlowParams {
    pub fn default_for(kind: DeviceKind) -> Self {
        let zero = FlowParams {
            jet_speed: 0.0,
            jet_radius: 0.0,
            decay_length: 1.0,
            exchange_rate: 0.0,
            aperture_m: 0.0,
        };
        match kind {
            DeviceKind::PedestalFan => FlowParams {
                jet_speed: 2.0,
                jet_radius: 0.5,
                decay_length: 4.0,
                ..zero
            },
            DeviceKind::HandFan => FlowParams {
                jet_speed: 1.0,
                jet_radius: 0.25,
                decay_length: 1.5,
                ..zero
            },
            DeviceKind::CeilingFan => FlowParams {
                jet_speed: 1.5,
                jet_radius: 0.8,
                decay_length: 2.0,
                ..zero
            },
            DeviceKind::SplitAc => FlowParams {
                jet_speed: 1.5,
                jet_radius: 0.4,
                decay_length: 3.0,
                ..zero
            },
            DeviceKind::WindowVentilator => FlowParams {
                jet_speed: 1.0,
                jet_radius: 0.0,
                decay_length: 3.0,
                exchange_rate: 0.5,
                aperture_m: 0.5,
            },
            DeviceKind::OpenWindow => FlowParams {
                exchange_rate: 0.05,
                aperture_m: 0.75,
                ..zero
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VentilationDevice {
    pub id: String,
    pub kind: DeviceKind,
    pub position: Point3,
    /// Unit vector. For a window ventilator it points into the room.
    pub orientation: Point3,
    pub on: bool,
    pub flow: FlowParams,
}

impl VentilationDevice {
    pub fn new(id: impl Into<String>, kind: DeviceKind, position: Point3, orientation: Point3) -> Self {
        Self {
            id: id.into(),
            kind,
            position,
            orientation: normalize(orientation).unwrap_or([1.0, 0.0, 0.0]),
            on: false,
            flow: FlowParams::default_for(kind),
        }
    }

    pub fn with_flow(mut self, flow: FlowParams) -> Self {
        self.flow = flow;
        self
    }

    pub fn switched(mut self, on: bool) -> Self {
        self.on = on;
        self
    }

    /// Outdoor exchange rate in effect right now (1/s).
    pub fn active_exchange_rate(&self) -> f64 {
        if self.on && self.kind.is_window() {
            self.flow.exchange_rate
        } else {
            0.0
        }
    }

    /// Velocity this device alone induces at `p`.
    pub fn velocity_contribution(&self, p: Point3) -> Point3 {
        if !self.on {
            return [0.0; 3];
        }
        let f = &self.flow;
        let rel = sub(p, self.position);
        match self.kind {
            DeviceKind::OpenWindow => [0.0; 3],
            DeviceKind::WindowVentilator => {
                if f.jet_speed == 0.0 || dot(rel, self.orientation) < 0.0 {
                    return [0.0; 3];
                }
                let d = norm(rel);
                if d < 1e-9 {
                    return [0.0; 3];
                }
                let speed = f.jet_speed * (-d / f.decay_length).exp();
                [-speed * rel[0] / d, -speed * rel[1] / d, -speed * rel[2] / d]
            }
            _ => {
                let o = self.orientation;
                let s = dot(rel, o);
                if s < 0.0 || f.jet_speed == 0.0 || f.jet_radius <= 0.0 {
                    return [0.0; 3];
                }
                let r2 = (dot(rel, rel) - s * s).max(0.0);
                let speed =
                    f.jet_speed * (-s / f.decay_length).exp() * (-r2 / (2.0 * f.jet_radius * f.jet_radius)).exp();
                [speed * o[0], speed * o[1], speed * o[2]]
            }
        }
    }

    pub(crate) fn validate(&self) -> Result<(), FieldError> {
        let f = &self.flow;
        let finite = [f.jet_speed, f.jet_radius, f.decay_length, f.exchange_rate, f.aperture_m]
            .iter()
            .all(|v| v.is_finite());
        if !finite || f.jet_speed < 0.0 || f.jet_radius < 0.0 || f.exchange_rate < 0.0 || f.aperture_m < 0.0 {
            return Err(FieldError::InvalidDevice(format!(
                "{}: flow parameters must be finite and non-negative",
                self.id
            )));
        }
        if f.decay_length <= 0.0 {
            return Err(FieldError::InvalidDevice(format!(
                "{}: decay_length must be positive",
                self.id
            )));
        }
        if (norm(self.orientation) - 1.0).abs() > 1e-9 {
            return Err(FieldError::InvalidDevice(format!(
                "{}: orientation must be a unit vector",
                self.id
            )));
        }
        if self.kind == DeviceKind::SplitAc && f.exchange_rate != 0.0 {
            return Err(FieldError::InvalidDevice(format!(
                "{}: split AC recirculates indoor air and cannot exchange",
                self.id
            )));
        }
        Ok(())
    }
}

/// Superposition of every device's flow kernel at `point`.
pub fn velocity_at(
    geometry: &RoomGeometry,
    devices: &[VentilationDevice],
    point: Point3,
) -> Result<Point3, FieldError> {
    if !geometry.contains(point) {
        return Err(FieldError::OutsideRoom(point));
    }
    Ok(superpose(devices, point))
}

pub(crate) fn superpose(devices: &[VentilationDevice], point: Point3) -> Point3 {
    let mut v = [0.0; 3];
    for d in devices {
        let c = d.velocity_contribution(point);
        v[0] += c[0];
        v[1] += c[1];
        v[2] += c[2];
    }
    v
}
