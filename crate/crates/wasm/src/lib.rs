//! Browser bindings for the demo page in `www/`.
//!
//! Three things are exposed: the bubble style law, a sensor step response,
//! and a live room session that can be stepped, acted on and drawn as a
//! voxel slice. Structured results cross the boundary as JSON strings so
//! the page needs no glue beyond `JSON.parse`.

use airbubble_core::bubble::{bubble_visual, hue_to_rgb};
use airbubble_core::command::{ActionCommand, Verb};
use airbubble_core::scenario::{HeightLabel, Mode, Scenario};
use airbubble_core::sensor::{SensorSpec, VirtualSensor};
use airbubble_core::session::{Session, SessionConfig};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Color scale bounds used for slices, matching the bubble law.
const SCALE_LOW_PPM: f64 = 400.0;
const SCALE_HIGH_PPM: f64 = 3000.0;

#[wasm_bindgen]
pub fn scenario_names() -> String {
    json!(Scenario::bundled_names().collect::<Vec<_>>()).to_string()
}

/// Style of a bubble showing `ppm`, with a CSS color.
#[wasm_bindgen]
pub fn bubble_style(ppm: f64) -> String {
    let s = bubble_visual(ppm);
    let [r, g, b] = s.rgb();
    json!({
        "ppm": ppm,
        "diameter_m": s.diameter_m,
        "hue_deg": s.hue_deg,
        "opacity": s.opacity,
        "color": s.color_name(),
        "css": format!("#{r:02x}{g:02x}{b:02x}"),
    })
    .to_string()
}

/// What the wrist sensor reports when the air at the wrist jumps from
/// `from_ppm` to `to_ppm` at t = 0 on a warm sensor, polled every second.
#[wasm_bindgen]
pub fn sensor_step_response(from_ppm: f64, to_ppm: f64, seconds: f64, noisy: bool, seed: u64) -> String {
    let defaults = SensorSpec::default();
    let spec = if noisy {
        defaults
    } else {
        SensorSpec {
            repeatability_sd_ppm: 0.0,
            ..defaults
        }
    };
    // Powered on one preheat period ago so t = 0 is the first warm sample.
    let mut s =
        VirtualSensor::power_on("wrist-1", spec, [0.0; 3], -spec.preheat_s, from_ppm, from_ppm, seed).with_drift(false);
    if !noisy {
        s = s.with_bias(0.0);
    }
    let dt = 0.5;
    let (mut t, mut ts, mut lagged, mut reported) = (0.0, vec![], vec![], vec![]);
    while t <= seconds.max(0.0) {
        let r = s.read(t);
        ts.push(t);
        lagged.push(s.lagged_ppm());
        reported.push(r.co2_ppm.map_or(Value::Null, Value::from));
        s.tick(to_ppm, dt);
        t += dt;
    }
    json!({
        "t": ts,
        "truth": to_ppm,
        "lagged": lagged,
        "reported": reported,
        "time_constant_s": spec.time_constant_s,
        "poll_interval_s": spec.poll_interval_s,
    })
    .to_string()
}

/// A running game session in the page.
#[wasm_bindgen]
pub struct RoomDemo {
    session: Session,
}

#[wasm_bindgen]
impl RoomDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(scenario: &str, seed: u64) -> Result<RoomDemo, String> {
        let sc = Scenario::bundled(scenario).map_err(|e| e.to_string())?;
        let session = Session::start("browser", &sc, Mode::ArBubbles, seed, SessionConfig::default())
            .map_err(|e| e.to_string())?;
        Ok(Self { session })
    }

    pub fn t(&self) -> f64 {
        self.session.t()
    }

    /// Runs the session forward by `seconds` of simulated time.
    pub fn advance(&mut self, seconds: f64) -> Result<(), String> {
        let target = self.session.t() + seconds;
        self.session.run_until(target).map_err(|e| e.to_string())
    }

    /// Queues a command; `args` is a JSON object or empty.
    pub fn act(&mut self, target: &str, verb: &str, args: &str) -> Result<u64, String> {
        let verb: Verb = serde_json::from_value(Value::from(verb)).map_err(|e| e.to_string())?;
        let args: Value = if args.trim().is_empty() {
            Value::Null
        } else {
            serde_json::from_str(args).map_err(|e| e.to_string())?
        };
        self.session
            .submit(ActionCommand::new(target, verb, args))
            .map_err(|e| e.to_string())
    }

    /// Outcomes of commands applied since the last call, as JSON.
    pub fn outcomes(&mut self) -> String {
        let out: Vec<Value> = self
            .session
            .take_outcomes()
            .into_iter()
            .map(|o| match o.result {
                Ok(v) => json!({ "id": o.id, "ok": v }),
                Err(e) => json!({ "id": o.id, "error": e }),
            })
            .collect();
        Value::from(out).to_string()
    }

    pub fn snapshot(&self) -> String {
        serde_json::to_string(&self.session.snapshot()).expect("snapshot serializes")
    }

    /// Probe-grid heatmap at `height` ("G", "T" or "C") as JSON.
    pub fn heatmap(&self, height: &str) -> Result<String, String> {
        let h: HeightLabel = height.parse()?;
        Ok(serde_json::to_string(&self.session.heatmap(h)).expect("grid serializes"))
    }

    pub fn slice_width(&self) -> usize {
        self.session.field().geometry().counts()[0]
    }

    pub fn slice_height(&self) -> usize {
        self.session.field().geometry().counts()[1]
    }

    /// Horizontal voxel slice through `z_m` as RGBA rows, y = 0 at the
    /// bottom. Blocked voxels are dark gray.
    pub fn slice_rgba(&self, z_m: f64) -> Vec<u8> {
        let field = self.session.field();
        let g = field.geometry();
        let [nx, ny, nz] = g.counts();
        let k = ((z_m / g.cell_m()).floor().max(0.0) as usize).min(nz - 1);
        let mut out = Vec::with_capacity(nx * ny * 4);
        for row in 0..ny {
            let j = ny - 1 - row;
            for i in 0..nx {
                if g.is_blocked(g.index(i, j, k)) {
                    out.extend_from_slice(&[60, 60, 60, 255]);
                    continue;
                }
                let f = ((field.value(i, j, k) - SCALE_LOW_PPM) / (SCALE_HIGH_PPM - SCALE_LOW_PPM)).clamp(0.0, 1.0);
                let [r, gr, b] = hue_to_rgb(120.0 * (1.0 - f));
                out.extend_from_slice(&[r, gr, b, 255]);
            }
        }
        out
    }
}
