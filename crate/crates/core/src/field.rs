//! CO₂ concentration field on a voxel grid and its time stepping.
//!
//! One [`ConcentrationField::step`] applies, per internal substep:
//!
//! 1. source injection into the voxel holding each active source,
//! 2. semi-Lagrangian advection along the device flow plus downward settling,
//!    followed by a global mass fix so transport never creates or destroys CO₂,
//! 3. explicit 7-point diffusion with no-flux walls and furniture,
//! 4. relaxation of window/ventilator aperture voxels toward ambient.
//!
//! The step subdivides `dt` whenever it exceeds the diffusion, transport or
//! exchange stability limits, unless substepping is disabled in [`SimParams`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{superpose, VentilationDevice};
use crate::geometry::{distance, Point3, RoomGeometry};

/// Converts a voxel ppm value to m³ of CO₂ per m³ of air.
pub const PPM_TO_FRACTION: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid device: {0}")]
    InvalidDevice(String),
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("point {0:?} is outside the room")]
    OutsideRoom(Point3),
    #[error("point {0:?} is inside a blocked voxel")]
    BlockedPoint(Point3),
    #[error("timestep {dt} s exceeds the stability limit {limit} s and substepping is disabled")]
    StabilityViolated { dt: f64, limit: f64 },
    #[error("non-finite concentration detected at t = {t} s")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Occupant,
    Candle,
    HeatedBakingSoda,
    Cooking,
}

impl SourceKind {
    /// Typical emission in m³ CO₂ per second.
    pub fn default_emission(self) -> f64 {
        match self {
            SourceKind::Occupant => 5e-6,
            SourceKind::Candle => 1e-6,
            SourceKind::HeatedBakingSoda => 3e-6,
            SourceKind::Cooking => 2e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub id: String,
    pub kind: SourceKind,
    pub position: Point3,
    /// m³ CO₂ per second
    pub emission_rate: f64,
    /// `[t_on, t_off)` in simulated seconds.
    pub active_interval: (f64, f64),
}

impl Source {
    pub fn new(id: impl Into<String>, kind: SourceKind, position: Point3) -> Self {
        Self {
            id: id.into(),
            kind,
            position,
            emission_rate: kind.default_emission(),
            active_interval: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn active_between(mut self, t_on: f64, t_off: f64) -> Self {
        self.active_interval = (t_on, t_off);
        self
    }

    pub fn with_rate(mut self, emission_rate: f64) -> Self {
        self.emission_rate = emission_rate;
        self
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.active_interval.0 && t < self.active_interval.1
    }

    /// Seconds of emission inside `[t0, t1)`.
    pub fn overlap(&self, t0: f64, t1: f64) -> f64 {
        (t1.min(self.active_interval.1) - t0.max(self.active_interval.0)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// m²/s, molecular plus turbulent mixing
    pub diffusivity: f64,
    /// m/s, downward drift from CO₂ being denser than air
    pub settling_velocity: f64,
    pub ambient_ppm: f64,
    /// Solver step in simulated seconds.
    pub dt: f64,
    /// Simulated seconds per wall-clock second.
    pub time_scale: f64,
    /// Split oversized steps instead of failing.
    pub substepping: bool,
}

pub const MOLECULAR_DIFFUSIVITY: f64 = 1.6e-5;
pub const TURBULENT_MIXING_FLOOR: f64 = 5e-3;

impl Default for SimParams {
    fn default() -> Self {
        Self {
            diffusivity: MOLECULAR_DIFFUSIVITY + TURBULENT_MIXING_FLOOR,
            settling_velocity: 2e-3,
            ambient_ppm: 400.0,
            dt: 0.5,
            time_scale: 1.0,
            substepping: true,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), FieldError> {
        let bad = |m: &str| Err(FieldError::InvalidParams(m.to_string()));
        if !(self.diffusivity.is_finite() && self.diffusivity > 0.0) {
            return bad("diffusivity must be positive");
        }
        if !(self.settling_velocity.is_finite() && self.settling_velocity >= 0.0) {
            return bad("settling_velocity must be non-negative");
        }
        if !(self.ambient_ppm.is_finite() && self.ambient_ppm >= 0.0) {
            return bad("ambient_ppm must be non-negative");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.time_scale.is_finite() && self.time_scale > 0.0) {
            return bad("time_scale must be positive");
        }
        Ok(())
    }
}

/// Running account of CO₂ that entered or left the field, in m³.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MassLedger {
    pub injected_m3: f64,
    /// Net exchange with outdoors; negative when ventilation removes CO₂.
    pub exchanged_m3: f64,
    /// Volume added back when negative values were clamped to zero.
    pub clamped_m3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationField {
    geometry: Arc<RoomGeometry>,
    values: Vec<f64>,
    t: f64,
    ledger: MassLedger,
}

impl ConcentrationField {
    /// Uniform field at `ambient_ppm`; blocked voxels hold zero.
    pub fn new(geometry: RoomGeometry, ambient_ppm: f64) -> Result<Self, FieldError> {
        Self::from_shared(Arc::new(geometry), ambient_ppm)
    }

    pub fn from_shared(geometry: Arc<RoomGeometry>, ambient_ppm: f64) -> Result<Self, FieldError> {
        if !(ambient_ppm.is_finite() && ambient_ppm >= 0.0) {
            return Err(FieldError::InvalidParams(format!(
                "initial concentration must be non-negative, got {ambient_ppm}"
            )));
        }
        let values = (0..geometry.len())
            .map(|i| if geometry.is_blocked(i) { 0.0 } else { ambient_ppm })
            .collect();
        Ok(Self {
            geometry,
            values,
            t: 0.0,
            ledger: MassLedger::default(),
        })
    }

    /// Builds a field from explicit voxel values (blocked entries are zeroed).
    pub fn from_values(geometry: RoomGeometry, values: Vec<f64>, t: f64) -> Result<Self, FieldError> {
        if values.len() != geometry.len() {
            return Err(FieldError::InvalidParams(format!(
                "expected {} voxel values, got {}",
                geometry.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FieldError::InvalidParams(
                "voxel values must be finite and non-negative".into(),
            ));
        }
        let mut values = values;
        for (i, v) in values.iter_mut().enumerate() {
            if geometry.is_blocked(i) {
                *v = 0.0;
            }
        }
        Ok(Self {
            geometry: Arc::new(geometry),
            values,
            t,
            ledger: MassLedger::default(),
        })
    }

    pub fn geometry(&self) -> &RoomGeometry {
        &self.geometry
    }

    pub fn shared_geometry(&self) -> Arc<RoomGeometry> {
        Arc::clone(&self.geometry)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn ledger(&self) -> MassLedger {
        self.ledger
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.geometry.index(i, j, k)]
    }

    /// Σ over open voxels of c·1e-6·cell volume, in m³.
    pub fn total_co2_volume(&self) -> f64 {
        let sum: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.geometry.is_blocked(*i))
            .map(|(_, v)| *v)
            .sum();
        sum * PPM_TO_FRACTION * self.geometry.cell_volume()
    }

    pub fn mean_ppm(&self) -> f64 {
        let n = self.geometry.open_count();
        if n == 0 {
            return 0.0;
        }
        let sum: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.geometry.is_blocked(*i))
            .map(|(_, v)| *v)
            .sum();
        sum / n as f64
    }

    pub fn max_ppm(&self) -> f64 {
        self.open_values().fold(0.0, f64::max)
    }

    pub fn open_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.geometry.is_blocked(*i))
            .map(|(_, v)| *v)
    }

    /// Trilinear interpolation between the 8 voxel centers around `point`.
    pub fn sample(&self, point: Point3) -> Result<f64, FieldError> {
        let g = &*self.geometry;
        if !g.contains(point) {
            return Err(FieldError::OutsideRoom(point));
        }
        if !g.is_open(point) {
            return Err(FieldError::BlockedPoint(point));
        }
        Ok(interpolate(g, &self.values, point).unwrap_or_else(|| {
            // All eight neighbors blocked; fall back to the holding voxel.
            self.values[g.voxel_index_of(point).expect("contained point")]
        }))
    }

    /// Largest `dt` a single explicit substep may take with these inputs.
    pub fn stability_limit(&self, devices: &[VentilationDevice], params: &SimParams) -> f64 {
        let plan = StepPlan::build(&self.geometry, devices, params);
        plan.limit(&self.geometry, params)
    }

    /// Advances the field by `dt` simulated seconds. Pure: `self` is untouched.
    pub fn step(
        &self,
        sources: &[Source],
        devices: &[VentilationDevice],
        params: &SimParams,
        dt: f64,
    ) -> Result<ConcentrationField, FieldError> {
        params.validate()?;
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(FieldError::InvalidParams(format!("dt must be non-negative, got {dt}")));
        }
        let g = &*self.geometry;
        for d in devices {
            d.validate()?;
        }
        let mut source_voxels = Vec::with_capacity(sources.len());
        for s in sources {
            if !(s.emission_rate.is_finite() && s.emission_rate >= 0.0) {
                return Err(FieldError::InvalidSource(format!(
                    "{}: emission rate must be non-negative",
                    s.id
                )));
            }
            let idx = g
                .voxel_index_of(s.position)
                .ok_or_else(|| FieldError::InvalidSource(format!("{}: outside the room", s.id)))?;
            if g.is_blocked(idx) {
                return Err(FieldError::InvalidSource(format!("{}: inside a blocked voxel", s.id)));
            }
            source_voxels.push(idx);
        }

        let mut next = self.clone();
        if dt == 0.0 {
            return Ok(next);
        }

        let plan = StepPlan::build(g, devices, params);
        let limit = plan.limit(g, params);
        let substeps = if dt <= limit {
            1
        } else if params.substepping {
            (dt / limit).ceil() as usize
        } else {
            return Err(FieldError::StabilityViolated { dt, limit });
        };
        let h = dt / substeps as f64;
        let mut scratch = vec![0.0; g.len()];
        let t_end = self.t + dt;
        for n in 0..substeps {
            let t0 = self.t + h * n as f64;
            let t1 = if n + 1 == substeps { t_end } else { t0 + h };
            next.substep(sources, &source_voxels, &plan, params, t0, t1, &mut scratch)?;
        }
        next.t = t_end;
        Ok(next)
    }

    #[allow(clippy::too_many_arguments)]
    fn substep(
        &mut self,
        sources: &[Source],
        source_voxels: &[usize],
        plan: &StepPlan,
        params: &SimParams,
        t0: f64,
        t1: f64,
        scratch: &mut [f64],
    ) -> Result<(), FieldError> {
        let geometry = Arc::clone(&self.geometry);
        let g = &*geometry;
        let h = t1 - t0;
        let cell_volume = g.cell_volume();

        // (1) sources
        for (s, &idx) in sources.iter().zip(source_voxels) {
            let seconds = s.overlap(t0, t1);
            if seconds > 0.0 {
                let m3 = s.emission_rate * seconds;
                self.values[idx] += m3 / cell_volume / PPM_TO_FRACTION;
                self.ledger.injected_m3 += m3;
            }
        }

        // (2) advection
        if plan.max_speed > 0.0 {
            let before = open_sum(g, &self.values);
            for (idx, out) in scratch.iter_mut().enumerate() {
                if g.is_blocked(idx) {
                    *out = 0.0;
                    continue;
                }
                let v = plan.velocity[idx];
                let c = g.center_of(idx);
                let departure = [c[0] - v[0] * h, c[1] - v[1] * h, c[2] - v[2] * h];
                *out = interpolate(g, &self.values, departure).unwrap_or(self.values[idx]);
            }
            let after = open_sum(g, scratch);
            if after > 0.0 && before > 0.0 {
                let scale = before / after;
                for v in scratch.iter_mut() {
                    *v *= scale;
                }
            }
            self.values.copy_from_slice(scratch);
        }

        // (3) diffusion
        let lambda = params.diffusivity * h / (g.cell_m() * g.cell_m());
        for (idx, out) in scratch.iter_mut().enumerate() {
            if g.is_blocked(idx) {
                *out = 0.0;
                continue;
            }
            let c = self.values[idx];
            let mut flux = 0.0;
            for nb in g.open_neighbors(idx) {
                flux += self.values[nb] - c;
            }
            *out = c + lambda * flux;
        }
        self.values.copy_from_slice(scratch);

        // (4) exchange with outdoors
        for &(idx, rate) in &plan.exchange {
            let c = self.values[idx];
            let delta = rate * h * (params.ambient_ppm - c);
            self.values[idx] = c + delta;
            self.ledger.exchanged_m3 += delta * PPM_TO_FRACTION * cell_volume;
        }

        for v in self.values.iter_mut() {
            if !v.is_finite() {
                return Err(FieldError::NonFinite { t: t1 });
            }
            if *v < 0.0 {
                self.ledger.clamped_m3 += -*v * PPM_TO_FRACTION * cell_volume;
                *v = 0.0;
            }
        }
        self.t = t1;
        Ok(())
    }
}

fn open_sum(g: &RoomGeometry, values: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        if !g.is_blocked(i) {
            sum += *v;
        }
    }
    sum
}

/// Trilinear interpolation over open voxel centers around `p`, with `p`
/// clamped to the span of centers. Blocked corners drop out and the
/// remaining weights are renormalized; `None` when all eight are blocked.
pub(crate) fn interpolate(g: &RoomGeometry, values: &[f64], p: Point3) -> Option<f64> {
    let h = g.cell_m();
    let counts = g.counts();
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        let hi = (counts[a] - 1) as f64;
        let f = (p[a] / h - 0.5).clamp(0.0, hi);
        let i0 = (f.floor() as usize).min(counts[a] - 2);
        base[a] = i0;
        frac[a] = f - i0 as f64;
    }
    let mut acc = 0.0;
    let mut weight = 0.0;
    for dk in 0..2 {
        let wz = if dk == 0 { 1.0 - frac[2] } else { frac[2] };
        for dj in 0..2 {
            let wy = if dj == 0 { 1.0 - frac[1] } else { frac[1] };
            for di in 0..2 {
                let wx = if di == 0 { 1.0 - frac[0] } else { frac[0] };
                let w = wx * wy * wz;
                if w == 0.0 {
                    continue;
                }
                let idx = g.index(base[0] + di, base[1] + dj, base[2] + dk);
                if g.is_blocked(idx) {
                    continue;
                }
                acc += w * values[idx];
                weight += w;
            }
        }
    }
    if weight <= 1e-12 {
        None
    } else {
        Some(acc / weight)
    }
}

/// Per-step quantities that depend only on geometry, devices and params.
struct StepPlan {
    velocity: Vec<Point3>,
    max_speed: f64,
    /// (voxel, rate) pairs in device order.
    exchange: Vec<(usize, f64)>,
    max_exchange: f64,
}

impl StepPlan {
    fn build(g: &RoomGeometry, devices: &[VentilationDevice], params: &SimParams) -> Self {
        let mut velocity = vec![[0.0; 3]; g.len()];
        let mut max_speed = 0.0f64;
        for (idx, v) in velocity.iter_mut().enumerate() {
            if g.is_blocked(idx) {
                continue;
            }
            let mut u = superpose(devices, g.center_of(idx));
            u[2] -= params.settling_velocity;
            max_speed = max_speed.max((u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt());
            *v = u;
        }

        let mut exchange = Vec::new();
        let mut per_voxel = vec![0.0f64; g.len()];
        for d in devices {
            let rate = d.active_exchange_rate();
            if rate <= 0.0 {
                continue;
            }
            for idx in aperture_voxels(g, d.position, d.flow.aperture_m) {
                exchange.push((idx, rate));
                per_voxel[idx] += rate;
            }
        }
        let max_exchange = per_voxel.iter().copied().fold(0.0, f64::max);
        Self {
            velocity,
            max_speed,
            exchange,
            max_exchange,
        }
    }

    fn limit(&self, g: &RoomGeometry, params: &SimParams) -> f64 {
        let h = g.cell_m();
        let mut limit = h * h / (6.0 * params.diffusivity);
        if self.max_speed > 0.0 {
            limit = limit.min(h / self.max_speed);
        }
        if self.max_exchange > 0.0 {
            limit = limit.min(1.0 / self.max_exchange);
        }
        limit
    }
}

/// Open voxels whose centers are within `radius` of `position`, plus the
/// voxel holding the (wall-clamped) position itself.
pub fn aperture_voxels(g: &RoomGeometry, position: Point3, radius: f64) -> Vec<usize> {
    let dims = g.dims_m();
    let clamped = [
        position[0].clamp(0.0, dims[0]),
        position[1].clamp(0.0, dims[1]),
        position[2].clamp(0.0, dims[2]),
    ];
    let home = g.voxel_index_of(clamped);
    (0..g.len())
        .filter(|&idx| !g.is_blocked(idx))
        .filter(|&idx| Some(idx) == home || distance(g.center_of(idx), clamped) <= radius)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::DeviceKind;
    use approx::assert_relative_eq;

    fn sealed() -> SimParams {
        SimParams {
            settling_velocity: 0.0,
            ..SimParams::default()
        }
    }

    #[test]
    fn init_fills_open_voxels() {
        let g = RoomGeometry::new([5.0, 8.0, 3.0], 0.5)
            .unwrap()
            .with_blocked([[0, 0, 0]])
            .unwrap();
        let f = ConcentrationField::new(g, 400.0).unwrap();
        assert_eq!(f.t(), 0.0);
        assert_eq!(f.values()[0], 0.0);
        assert!(f.values()[1..].iter().all(|v| *v == 400.0));
    }

    #[test]
    fn uniform_room_volume() {
        // 4 × 5 × 2 m = 40 m³
        let f = ConcentrationField::new(RoomGeometry::new([4.0, 5.0, 2.0], 0.5).unwrap(), 400.0).unwrap();
        assert_relative_eq!(f.total_co2_volume(), 0.016, max_relative = 1e-12);
        let z = ConcentrationField::new(RoomGeometry::new([4.0, 5.0, 2.0], 0.5).unwrap(), 0.0).unwrap();
        assert_eq!(z.total_co2_volume(), 0.0);
    }

    #[test]
    fn volume_is_linear() {
        let g = RoomGeometry::new([2.0, 2.0, 2.0], 0.5).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|i| 400.0 + i as f64).collect();
        let doubled: Vec<f64> = vals.iter().map(|v| 2.0 * v).collect();
        let a = ConcentrationField::from_values(g.clone(), vals, 0.0).unwrap();
        let b = ConcentrationField::from_values(g, doubled, 0.0).unwrap();
        assert_relative_eq!(b.total_co2_volume(), 2.0 * a.total_co2_volume(), max_relative = 1e-15);
    }

    #[test]
    fn sample_hits_voxel_centers_and_midpoints() {
        let g = RoomGeometry::new([2.0, 2.0, 2.0], 0.5).unwrap();
        let mut vals = vec![400.0; g.len()];
        vals[g.index(1, 1, 1)] = 1400.0;
        let f = ConcentrationField::from_values(g.clone(), vals, 0.0).unwrap();
        assert_eq!(f.sample(g.center(1, 1, 1)).unwrap(), 1400.0);
        assert_eq!(f.sample(g.center(0, 1, 1)).unwrap(), 400.0);
        let mid = [0.5, 0.75, 0.75];
        assert_relative_eq!(f.sample(mid).unwrap(), 900.0, max_relative = 1e-15);
    }

    #[test]
    fn sample_rejects_outside_and_blocked() {
        let g = RoomGeometry::new([2.0, 2.0, 2.0], 0.5)
            .unwrap()
            .with_blocked([[3, 3, 3]])
            .unwrap();
        let f = ConcentrationField::new(g, 400.0).unwrap();
        assert!(matches!(f.sample([-1.0, 0.0, 0.0]), Err(FieldError::OutsideRoom(_))));
        assert!(matches!(f.sample([1.8, 1.8, 1.8]), Err(FieldError::BlockedPoint(_))));
    }

    #[test]
    fn blocked_neighbors_do_not_leak_into_samples() {
        let g = RoomGeometry::new([2.0, 1.0, 1.0], 0.5)
            .unwrap()
            .with_blocked([[1, 0, 0], [1, 1, 0], [1, 0, 1], [1, 1, 1]])
            .unwrap();
        let f = ConcentrationField::new(g, 700.0).unwrap();
        assert_relative_eq!(f.sample([0.4, 0.5, 0.5]).unwrap(), 700.0);
    }

    #[test]
    fn uniform_sealed_room_is_a_fixed_point() {
        let g = RoomGeometry::new([3.0, 3.0, 3.0], 0.5).unwrap();
        let mut f = ConcentrationField::new(g, 800.0).unwrap();
        let p = sealed();
        for _ in 0..1000 {
            f = f.step(&[], &[], &p, p.dt).unwrap();
        }
        let dev = f.open_values().map(|v| (v - 800.0).abs() / 800.0).fold(0.0, f64::max);
        assert!(dev < 1e-9, "{dev}");
        assert_relative_eq!(f.t(), 500.0);
    }

    #[test]
    fn source_mass_is_booked_exactly() {
        let g = RoomGeometry::new([3.0, 3.0, 3.0], 0.5).unwrap();
        let f0 = ConcentrationField::new(g, 400.0).unwrap();
        let src = Source::new("p", SourceKind::Occupant, [1.5, 1.5, 0.75]).with_rate(5e-6);
        let p = SimParams::default();
        let mut f = f0.clone();
        for _ in 0..20 {
            f = f.step(std::slice::from_ref(&src), &[], &p, 0.5).unwrap();
        }
        let added = f.total_co2_volume() - f0.total_co2_volume();
        assert_relative_eq!(added, 5e-5, max_relative = 1e-12);
        assert_relative_eq!(f.ledger().injected_m3, 5e-5, max_relative = 1e-12);
    }

    #[test]
    fn source_schedule_clips_partial_steps() {
        let g = RoomGeometry::new([2.0, 2.0, 2.0], 0.5).unwrap();
        let f0 = ConcentrationField::new(g, 400.0).unwrap();
        let src = Source::new("c", SourceKind::Candle, [1.0, 1.0, 1.0])
            .with_rate(1e-6)
            .active_between(0.25, 0.75);
        let f = f0.step(&[src], &[], &sealed(), 1.0).unwrap();
        assert_relative_eq!(f.ledger().injected_m3, 0.5e-6, max_relative = 1e-12);
    }

    #[test]
    fn misplaced_sources_are_rejected() {
        let g = RoomGeometry::new([2.0, 2.0, 2.0], 0.5)
            .unwrap()
            .with_blocked([[0, 0, 0]])
            .unwrap();
        let f = ConcentrationField::new(g, 400.0).unwrap();
        let out = Source::new("o", SourceKind::Candle, [99.0, 0.0, 0.0]);
        let blocked = Source::new("b", SourceKind::Candle, [0.1, 0.1, 0.1]);
        assert!(f.step(&[out], &[], &sealed(), 0.5).is_err());
        assert!(f.step(&[blocked], &[], &sealed(), 0.5).is_err());
    }

    #[test]
    fn oversized_step_fails_without_substepping() {
        let g = RoomGeometry::new([2.0, 2.0, 2.0], 0.5).unwrap();
        let f = ConcentrationField::new(g, 400.0).unwrap();
        let p = SimParams {
            substepping: false,
            ..SimParams::default()
        };
        // Diffusion limit 0.25/(6·5.016e-3) ≈ 8.3 s.
        assert!(matches!(
            f.step(&[], &[], &p, 20.0),
            Err(FieldError::StabilityViolated { .. })
        ));
        assert!(f.step(&[], &[], &p, 5.0).is_ok());
        let p = SimParams::default();
        let g = f.step(&[], &[], &p, 20.0).unwrap();
        assert_relative_eq!(g.t(), 20.0);
    }

    #[test]
    fn fast_fans_trigger_substeps() {
        let g = RoomGeometry::new([4.0, 2.0, 2.0], 0.5).unwrap();
        let f = ConcentrationField::new(g, 400.0).unwrap();
        let fan = VentilationDevice::new("f", DeviceKind::PedestalFan, [0.0, 1.0, 1.0], [1.0, 0.0, 0.0]).switched(true);
        let p = SimParams::default();
        let limit = f.stability_limit(std::slice::from_ref(&fan), &p);
        assert!(limit < 0.5 && limit > 0.2, "{limit}");
        let strict = SimParams {
            substepping: false,
            ..p
        };
        assert!(f.step(&[], std::slice::from_ref(&fan), &strict, 0.5).is_err());
        assert!(f.step(&[], &[fan], &p, 0.5).is_ok());
    }

    #[test]
    fn ventilator_pulls_toward_ambient() {
        let g = RoomGeometry::new([3.0, 2.0, 2.0], 0.5).unwrap();
        let f0 = ConcentrationField::new(g, 1200.0).unwrap();
        let vent =
            VentilationDevice::new("v", DeviceKind::WindowVentilator, [3.0, 1.0, 1.0], [-1.0, 0.0, 0.0]).switched(true);
        let p = SimParams::default();
        let mut f = f0.clone();
        for _ in 0..100 {
            f = f.step(&[], std::slice::from_ref(&vent), &p, p.dt).unwrap();
        }
        assert!(f.mean_ppm() < 1200.0);
        assert!(f.open_values().all(|v| v >= 400.0 - 1e-9));
        let removed = f0.total_co2_volume() - f.total_co2_volume();
        assert_relative_eq!(-f.ledger().exchanged_m3, removed, max_relative = 1e-9);
    }

    #[test]
    fn zero_dt_is_identity() {
        let g = RoomGeometry::new([2.0, 2.0, 2.0], 0.5).unwrap();
        let f = ConcentrationField::new(g, 400.0).unwrap();
        let src = Source::new("p", SourceKind::Occupant, [1.0, 1.0, 1.0]);
        assert_eq!(f.step(&[src], &[], &SimParams::default(), 0.0).unwrap(), f);
    }

    #[test]
    fn aperture_includes_home_voxel_for_wall_mounted_devices() {
        let g = RoomGeometry::new([3.0, 2.0, 2.0], 0.5).unwrap();
        let v = aperture_voxels(&g, [3.0, 1.0, 1.0], 0.0);
        assert_eq!(v, vec![g.index(5, 2, 2)]);
        assert!(aperture_voxels(&g, [3.0, 1.0, 1.0], 0.5).len() > 1);
    }
}
