//! JSON payloads shared by the HTTP API, the event feed and the browser demo.
//!
//! Field names are part of the wire contract; golden fixtures in the service
//! crate pin their byte layout.

use serde::{Deserialize, Serialize};

use crate::bubble::Bubble;
use crate::geometry::Point3;
use crate::sensor::Reading;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingPayload {
    pub device_id: String,
    /// Simulated time of the sample in milliseconds.
    pub ts_ms: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub co2_ppm: Option<f64>,
    pub temp_c: f64,
    pub rh_pct: f64,
    pub status: String,
}

/// Simulated seconds to whole milliseconds.
pub fn to_ms(t: f64) -> i64 {
    (t * 1000.0).round() as i64
}

impl From<&Reading> for ReadingPayload {
    fn from(r: &Reading) -> Self {
        Self {
            device_id: r.device_id.clone(),
            ts_ms: to_ms(r.t),
            co2_ppm: if r.is_ok() { r.co2_ppm } else { None },
            temp_c: r.temp_c,
            rh_pct: r.rh_pct,
            status: r.status.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubblePayload {
    pub id: u64,
    pub pos: Point3,
    pub ppm: f64,
    pub diameter_m: f64,
    pub hue_deg: f64,
    pub opacity: f64,
    pub updated_t: f64,
}

impl From<&Bubble> for BubblePayload {
    fn from(b: &Bubble) -> Self {
        Self {
            id: b.id,
            pos: b.position,
            ppm: b.last_ppm,
            diameter_m: b.style.diameter_m,
            hue_deg: b.style.hue_deg,
            opacity: b.style.opacity,
            updated_t: b.updated_t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevicePayload {
    pub id: String,
    pub kind: String,
    pub pos: Point3,
    pub orientation: Point3,
    pub on: bool,
}
