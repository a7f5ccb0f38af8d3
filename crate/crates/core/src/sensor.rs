//! Virtual wrist-worn CO₂ sensor.
//!
//! The sensor follows the true concentration at its anchor through a
//! first-order lag, refuses to report during preheat, samples at a fixed
//! poll interval and adds a per-instance bias, slow drift and truncated
//! Gaussian repeatability noise to each sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::Point3;

pub const SECONDS_PER_YEAR: f64 = 365.25 * 24.0 * 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub range_ppm: (f64, f64),
    /// Accuracy bound `±(abs + rel·value)`.
    pub accuracy_abs_ppm: f64,
    pub accuracy_rel: f64,
    pub repeatability_sd_ppm: f64,
    pub preheat_s: f64,
    pub poll_interval_s: f64,
    pub yearly_drift_abs_ppm: f64,
    pub yearly_drift_rel: f64,
    /// First-order response time constant.
    pub time_constant_s: f64,
    pub temp_range_c: (f64, f64),
    pub temp_repeatability_c: f64,
    pub rh_range_pct: (f64, f64),
    pub rh_repeatability_pct: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            range_ppm: (400.0, 5000.0),
            accuracy_abs_ppm: 40.0,
            accuracy_rel: 0.05,
            repeatability_sd_ppm: 10.0,
            preheat_s: 60.0,
            poll_interval_s: 5.0,
            yearly_drift_abs_ppm: 5.0,
            yearly_drift_rel: 0.005,
            time_constant_s: 10.0,
            temp_range_c: (-10.0, 60.0),
            temp_repeatability_c: 0.1,
            rh_range_pct: (0.0, 95.0),
            rh_repeatability_pct: 0.4,
        }
    }
}

impl SensorSpec {
    pub fn accuracy_bound(&self, ppm: f64) -> f64 {
        self.accuracy_abs_ppm + self.accuracy_rel * ppm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadingStatus {
    Ok,
    Warming,
    OutOfRange,
}

impl ReadingStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ReadingStatus::Ok => "ok",
            ReadingStatus::Warming => "warming",
            ReadingStatus::OutOfRange => "out_of_range",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub device_id: String,
    pub t: f64,
    /// Present only when `status` is ok.
    pub co2_ppm: Option<f64>,
    pub temp_c: f64,
    pub rh_pct: f64,
    pub status: ReadingStatus,
}

impl Reading {
    pub fn is_ok(&self) -> bool {
        self.status == ReadingStatus::Ok
    }
}

/// Ambient conditions reported alongside CO₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Climate {
    pub temp_c: f64,
    pub rh_pct: f64,
}

impl Default for Climate {
    fn default() -> Self {
        Self {
            temp_c: 24.0,
            rh_pct: 55.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VirtualSensor {
    spec: SensorSpec,
    device_id: String,
    position: Point3,
    power_on_t: f64,
    lagged_ppm: f64,
    bias_ppm: f64,
    drift_sign: f64,
    drift_enabled: bool,
    climate: Climate,
    rng: ChaCha8Rng,
    last_sample: Option<Reading>,
}

impl VirtualSensor {
    /// Powers a sensor on at `power_on_t` with its lag state at `initial_ppm`.
    /// The bias is drawn uniformly within the accuracy bound at `ambient_ppm`.
    pub fn power_on(
        device_id: impl Into<String>,
        spec: SensorSpec,
        position: Point3,
        power_on_t: f64,
        initial_ppm: f64,
        ambient_ppm: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = spec.accuracy_bound(ambient_ppm);
        let bias_ppm = rng.random_range(-bound..=bound);
        let drift_sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        Self {
            spec,
            device_id: device_id.into(),
            position,
            power_on_t,
            lagged_ppm: initial_ppm.max(0.0),
            bias_ppm,
            drift_sign,
            drift_enabled: true,
            climate: Climate::default(),
            rng,
            last_sample: None,
        }
    }

    pub fn with_bias(mut self, bias_ppm: f64) -> Self {
        self.bias_ppm = bias_ppm;
        self
    }

    pub fn with_drift(mut self, enabled: bool) -> Self {
        self.drift_enabled = enabled;
        self
    }

    pub fn with_climate(mut self, climate: Climate) -> Self {
        self.climate = climate;
        self
    }

    pub fn spec(&self) -> &SensorSpec {
        &self.spec
    }

    pub fn device_id(&self) -> &str {
        &self.device_id
    }

    pub fn position(&self) -> Point3 {
        self.position
    }

    pub fn power_on_t(&self) -> f64 {
        self.power_on_t
    }

    pub fn lagged_ppm(&self) -> f64 {
        self.lagged_ppm
    }

    pub fn bias_ppm(&self) -> f64 {
        self.bias_ppm
    }

    pub fn last_sample(&self) -> Option<&Reading> {
        self.last_sample.as_ref()
    }

    pub fn is_warm(&self, now: f64) -> bool {
        now - self.power_on_t >= self.spec.preheat_s
    }

    /// Relaxes the lag state toward `true_ppm` over `dt` seconds.
    pub fn tick(&mut self, true_ppm: f64, dt: f64) {
        debug_assert!(dt >= 0.0);
        let true_ppm = true_ppm.max(0.0);
        let decay = (-dt / self.spec.time_constant_s).exp();
        self.lagged_ppm = true_ppm + (self.lagged_ppm - true_ppm) * decay;
    }

    /// Moves the wrist anchor; the lag state is kept.
    pub fn set_position(&mut self, point: Point3) {
        self.position = point;
    }

    /// Systematic offset in effect at `now`: the fixed bias, clamped to the
    /// accuracy bound at the current level, plus accumulated drift.
    pub fn offset_ppm(&self, now: f64) -> f64 {
        let bound = self.spec.accuracy_bound(self.lagged_ppm);
        let bias = self.bias_ppm.clamp(-bound, bound);
        let drift = if self.drift_enabled {
            let years = (now - self.power_on_t).max(0.0) / SECONDS_PER_YEAR;
            self.drift_sign * (self.spec.yearly_drift_abs_ppm + self.spec.yearly_drift_rel * self.lagged_ppm) * years
        } else {
            0.0
        };
        bias + drift
    }

    pub fn read(&mut self, now: f64) -> Reading {
        if !self.is_warm(now) {
            return Reading {
                device_id: self.device_id.clone(),
                t: now,
                co2_ppm: None,
                temp_c: self.climate.temp_c,
                rh_pct: self.climate.rh_pct,
                status: ReadingStatus::Warming,
            };
        }
        if let Some(last) = &self.last_sample {
            if now - last.t < self.spec.poll_interval_s {
                return last.clone();
            }
        }
        let noise = truncated_normal(&mut self.rng, self.spec.repeatability_sd_ppm);
        let temp_noise = truncated_normal(&mut self.rng, self.spec.temp_repeatability_c);
        let rh_noise = truncated_normal(&mut self.rng, self.spec.rh_repeatability_pct);

        let raw = self.lagged_ppm + self.offset_ppm(now) + noise;
        let (lo, hi) = self.spec.range_ppm;
        let (co2_ppm, status) = if raw > hi {
            (None, ReadingStatus::OutOfRange)
        } else {
            (Some(raw.max(lo)), ReadingStatus::Ok)
        };
        let reading = Reading {
            device_id: self.device_id.clone(),
            t: now,
            co2_ppm,
            temp_c: (self.climate.temp_c + temp_noise).clamp(self.spec.temp_range_c.0, self.spec.temp_range_c.1),
            rh_pct: (self.climate.rh_pct + rh_noise).clamp(self.spec.rh_range_pct.0, self.spec.rh_range_pct.1),
            status,
        };
        self.last_sample = Some(reading.clone());
        reading
    }
}

/// Gaussian with standard deviation `sd`, resampled until within ±3 sd.
fn truncated_normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd <= 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, sd).expect("positive sd");
    loop {
        let x = normal.sample(rng);
        if x.abs() <= 3.0 * sd {
            return x;
        }
    }
}
