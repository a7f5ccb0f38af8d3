//! Naive reference for one field step, written from the update rules:
//! per-voxel loops, no cached plan, no shared helpers with the solver.

#![allow(dead_code)]

use airbubble_core::field::{ConcentrationField, SimParams, Source, SourceKind};
use airbubble_core::flow::{DeviceKind, VentilationDevice};
use airbubble_core::geometry::RoomGeometry;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const N: usize = 8;
pub const H: f64 = 0.5;
const PPM: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Case {
    pub n: usize,
    pub blocked: Vec<bool>,
    pub values: Vec<f64>,
    pub sources: Vec<Source>,
    pub devices: Vec<VentilationDevice>,
    pub params: SimParams,
    pub t: f64,
    pub dt: f64,
}

pub fn idx(n: usize, i: usize, j: usize, k: usize) -> usize {
    (k * n + j) * n + i
}

pub fn center(i: usize, j: usize, k: usize) -> [f64; 3] {
    [(i as f64 + 0.5) * H, (j as f64 + 0.5) * H, (k as f64 + 0.5) * H]
}

fn device_velocity(d: &VentilationDevice, p: [f64; 3]) -> [f64; 3] {
    if !d.on {
        return [0.0; 3];
    }
    let f = d.flow;
    let rel = [p[0] - d.position[0], p[1] - d.position[1], p[2] - d.position[2]];
    let o = d.orientation;
    let along = rel[0] * o[0] + rel[1] * o[1] + rel[2] * o[2];
    match d.kind {
        DeviceKind::OpenWindow => [0.0; 3],
        DeviceKind::WindowVentilator => {
            // Intake: flow toward the device, in front of it only.
            let dist = (rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2]).sqrt();
            if along < 0.0 || dist < 1e-9 || f.jet_speed == 0.0 {
                return [0.0; 3];
            }
            let speed = f.jet_speed * (-dist / f.decay_length).exp();
            [-speed * rel[0] / dist, -speed * rel[1] / dist, -speed * rel[2] / dist]
        }
        _ => {
            if along < 0.0 || f.jet_speed == 0.0 || f.jet_radius <= 0.0 {
                return [0.0; 3];
            }
            let r2 = (rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2] - along * along).max(0.0);
            let speed =
                f.jet_speed * (-along / f.decay_length).exp() * (-r2 / (2.0 * f.jet_radius * f.jet_radius)).exp();
            [speed * o[0], speed * o[1], speed * o[2]]
        }
    }
}

fn trilinear(c: &Case, values: &[f64], p: [f64; 3]) -> Option<f64> {
    let n = c.n;
    let mut lo = [0usize; 3];
    let mut fr = [0.0; 3];
    for a in 0..3 {
        let f = (p[a] / H - 0.5).max(0.0).min((n - 1) as f64);
        let i0 = (f.floor() as usize).min(n - 2);
        lo[a] = i0;
        fr[a] = f - i0 as f64;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for dk in 0..2 {
        for dj in 0..2 {
            for di in 0..2 {
                let wx = if di == 1 { fr[0] } else { 1.0 - fr[0] };
                let wy = if dj == 1 { fr[1] } else { 1.0 - fr[1] };
                let wz = if dk == 1 { fr[2] } else { 1.0 - fr[2] };
                let w = wx * wy * wz;
                let q = idx(n, lo[0] + di, lo[1] + dj, lo[2] + dk);
                if w == 0.0 || c.blocked[q] {
                    continue;
                }
                num += w * values[q];
                den += w;
            }
        }
    }
    (den > 1e-12).then(|| num / den)
}

fn aperture(c: &Case, d: &VentilationDevice) -> Vec<usize> {
    let n = c.n;
    let size = n as f64 * H;
    let p = d.position.map(|x| x.clamp(0.0, size));
    let home = p.map(|x| ((x / H).floor() as usize).min(n - 1));
    let mut out = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let q = idx(n, i, j, k);
                if c.blocked[q] {
                    continue;
                }
                let m = center(i, j, k);
                let dist = ((m[0] - p[0]).powi(2) + (m[1] - p[1]).powi(2) + (m[2] - p[2]).powi(2)).sqrt();
                if [i, j, k] == home || dist <= d.flow.aperture_m {
                    out.push(q);
                }
            }
        }
    }
    out
}

pub fn reference_step(c: &Case) -> Vec<f64> {
    let n = c.n;
    let total = n * n * n;
    let p = &c.params;

    let mut velocity = vec![[0.0; 3]; total];
    let mut vmax: f64 = 0.0;
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let q = idx(n, i, j, k);
                if c.blocked[q] {
                    continue;
                }
                let mut v = [0.0; 3];
                for d in &c.devices {
                    let u = device_velocity(d, center(i, j, k));
                    v = [v[0] + u[0], v[1] + u[1], v[2] + u[2]];
                }
                v[2] -= p.settling_velocity;
                vmax = vmax.max((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt());
                velocity[q] = v;
            }
        }
    }
    let mut exchange_sum = vec![0.0; total];
    let mut exchange = Vec::new();
    for d in &c.devices {
        let rate = if d.on && d.kind.is_window() {
            d.flow.exchange_rate
        } else {
            0.0
        };
        if rate > 0.0 {
            for q in aperture(c, d) {
                exchange.push((q, rate));
                exchange_sum[q] += rate;
            }
        }
    }
    let max_rate = exchange_sum.iter().cloned().fold(0.0, f64::max);

    let mut limit = H * H / (6.0 * p.diffusivity);
    if vmax > 0.0 {
        limit = limit.min(H / vmax);
    }
    if max_rate > 0.0 {
        limit = limit.min(1.0 / max_rate);
    }
    let substeps = if c.dt <= limit {
        1
    } else {
        (c.dt / limit).ceil() as usize
    };
    let h = c.dt / substeps as f64;
    let cell_volume = H * H * H;

    let mut u = c.values.clone();
    for s in 0..substeps {
        let t0 = c.t + h * s as f64;
        let t1 = if s + 1 == substeps { c.t + c.dt } else { t0 + h };

        for src in &c.sources {
            let (on, off) = src.active_interval;
            let secs = (t1.min(off) - t0.max(on)).max(0.0);
            if secs > 0.0 {
                let q = idx(
                    n,
                    (src.position[0] / H) as usize,
                    (src.position[1] / H) as usize,
                    (src.position[2] / H) as usize,
                );
                u[q] += src.emission_rate * secs / cell_volume / PPM;
            }
        }

        if vmax > 0.0 {
            let before: f64 = (0..total).filter(|q| !c.blocked[*q]).map(|q| u[q]).sum();
            let mut adv = vec![0.0; total];
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        let q = idx(n, i, j, k);
                        if c.blocked[q] {
                            continue;
                        }
                        let m = center(i, j, k);
                        let v = velocity[q];
                        let dep = [m[0] - v[0] * h, m[1] - v[1] * h, m[2] - v[2] * h];
                        adv[q] = trilinear(c, &u, dep).unwrap_or(u[q]);
                    }
                }
            }
            let after: f64 = adv.iter().sum();
            if before > 0.0 && after > 0.0 {
                for x in adv.iter_mut() {
                    *x *= before / after;
                }
            }
            u = adv;
        }

        let lambda = p.diffusivity * h / (H * H);
        let mut diff = vec![0.0; total];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let q = idx(n, i, j, k);
                    if c.blocked[q] {
                        continue;
                    }
                    let mut flux = 0.0;
                    let nbrs = [
                        (i > 0).then(|| idx(n, i - 1, j, k)),
                        (i + 1 < n).then(|| idx(n, i + 1, j, k)),
                        (j > 0).then(|| idx(n, i, j - 1, k)),
                        (j + 1 < n).then(|| idx(n, i, j + 1, k)),
                        (k > 0).then(|| idx(n, i, j, k - 1)),
                        (k + 1 < n).then(|| idx(n, i, j, k + 1)),
                    ];
                    for r in nbrs.into_iter().flatten() {
                        if !c.blocked[r] {
                            flux += u[r] - u[q];
                        }
                    }
                    diff[q] = u[q] + lambda * flux;
                }
            }
        }
        u = diff;

        for &(q, rate) in &exchange {
            u[q] += rate * h * (p.ambient_ppm - u[q]);
        }
        for x in u.iter_mut() {
            *x = x.max(0.0);
        }
    }
    u
}

pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = N;
    let total = n * n * n;
    let size = n as f64 * H;
    let blocked: Vec<bool> = (0..total).map(|_| rng.random_bool(0.1)).collect();
    let values: Vec<f64> = blocked
        .iter()
        .map(|b| if *b { 0.0 } else { rng.random_range(0.0..3000.0) })
        .collect();
    let open: Vec<usize> = (0..total).filter(|q| !blocked[*q]).collect();
    let t = rng.random_range(0.0..100.0);
    let dt = rng.random_range(0.05..3.0);

    let mut sources = Vec::new();
    for s in 0..rng.random_range(0..=3) {
        let q = open[rng.random_range(0..open.len())];
        let (i, j, k) = (q % n, (q / n) % n, q / (n * n));
        let c = center(i, j, k);
        let on = t + rng.random_range(-2.0..2.0);
        let off = on + rng.random_range(0.1..3.0);
        sources.push(
            Source::new(format!("s{s}"), SourceKind::Occupant, c)
                .with_rate(rng.random_range(0.0..2e-5))
                .active_between(on, off),
        );
    }

    let kinds = [
        DeviceKind::PedestalFan,
        DeviceKind::CeilingFan,
        DeviceKind::HandFan,
        DeviceKind::SplitAc,
        DeviceKind::WindowVentilator,
        DeviceKind::OpenWindow,
    ];
    let mut devices = Vec::new();
    for d in 0..rng.random_range(0..=3) {
        let kind = kinds[rng.random_range(0..kinds.len())];
        let pos = [
            rng.random_range(0.0..size),
            rng.random_range(0.0..size),
            rng.random_range(0.0..size),
        ];
        let o = loop {
            let v: [f64; 3] = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if len > 0.1 {
                break v.map(|x| x / len);
            }
        };
        let on = rng.random_bool(0.8);
        devices.push(VentilationDevice::new(format!("d{d}"), kind, pos, o).switched(on));
    }

    let params = SimParams {
        diffusivity: rng.random_range(1e-5..2e-2),
        settling_velocity: rng.random_range(0.0..5e-3),
        ambient_ppm: rng.random_range(380.0..450.0),
        dt,
        ..SimParams::default()
    };
    Case {
        n,
        blocked,
        values,
        sources,
        devices,
        params,
        t,
        dt,
    }
}

pub fn solver_step(c: &Case) -> ConcentrationField {
    let size = c.n as f64 * H;
    let blocked_coords: Vec<[usize; 3]> = (0..c.blocked.len())
        .filter(|q| c.blocked[*q])
        .map(|q| [q % c.n, (q / c.n) % c.n, q / (c.n * c.n)])
        .collect();
    let g = RoomGeometry::new([size; 3], H)
        .unwrap()
        .with_blocked(blocked_coords)
        .unwrap();
    let f = ConcentrationField::from_values(g, c.values.clone(), c.t).unwrap();
    f.step(&c.sources, &c.devices, &c.params, c.dt).unwrap()
}

/// Largest per-voxel error scaled by max(1, |reference|).
pub fn max_scaled_error(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    got.iter()
        .zip(want)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max)
}

pub fn assert_matches(got: &[f64], want: &[f64]) {
    assert_eq!(got.len(), want.len());
    for (q, (a, b)) in got.iter().zip(want).enumerate() {
        let tol = 1e-12 * b.abs().max(1.0);
        assert!((a - b).abs() <= tol, "voxel {q}: solver {a} vs reference {b}");
    }
}
