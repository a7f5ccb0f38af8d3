//! Bubble visual law and bubble lifecycle.
//!
//! A reading maps to a bubble whose diameter grows and hue shifts from green
//! through yellow to red between 400 and 3000 ppm. Bubbles only refresh when
//! the wearer's wrist is close, fade as their reading ages, and bubbles placed
//! on top of each other merge.

use serde::{Deserialize, Serialize};

use crate::geometry::{distance, Point3};
use crate::sensor::Reading;

pub const LOW_PPM: f64 = 400.0;
pub const HIGH_PPM: f64 = 3000.0;
pub const MIN_DIAMETER_M: f64 = 0.2;
pub const MAX_DIAMETER_M: f64 = 1.5;
pub const GREEN_HUE_DEG: f64 = 120.0;
pub const RED_HUE_DEG: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleStyle {
    /// Degrees on the HSV wheel: 120 green, 60 yellow, 0 red.
    pub hue_deg: f64,
    pub diameter_m: f64,
    pub opacity: f64,
}

impl BubbleStyle {
    /// sRGB bytes for the hue at full saturation and value.
    pub fn rgb(&self) -> [u8; 3] {
        hue_to_rgb(self.hue_deg)
    }

    pub fn color_name(&self) -> &'static str {
        match self.hue_deg {
            h if h >= 90.0 => "green",
            h if h >= 30.0 => "yellow",
            _ => "red",
        }
    }
}

/// Fully saturated HSV → RGB for hues in [0, 120].
pub fn hue_to_rgb(hue_deg: f64) -> [u8; 3] {
    let h = hue_deg.clamp(0.0, 360.0) / 60.0;
    let x = 1.0 - ((h % 2.0) - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let to_byte = |c: f64| (c * 255.0).round() as u8;
    [to_byte(r), to_byte(g), to_byte(b)]
}

/// Position of `ppm` along the 400 → 3000 ppm scale, clamped to [0, 1].
fn level(ppm: f64) -> f64 {
    ((ppm - LOW_PPM) / (HIGH_PPM - LOW_PPM)).clamp(0.0, 1.0)
}

pub fn bubble_visual(ppm: f64) -> BubbleStyle {
    let f = level(ppm);
    let diameter_m = if f >= 1.0 {
        MAX_DIAMETER_M
    } else {
        (MIN_DIAMETER_M + (MAX_DIAMETER_M - MIN_DIAMETER_M) * f).min(MAX_DIAMETER_M)
    };
    let hue_deg = if f >= 1.0 {
        RED_HUE_DEG
    } else {
        (GREEN_HUE_DEG - (GREEN_HUE_DEG - RED_HUE_DEG) * f).max(RED_HUE_DEG)
    };
    BubbleStyle {
        hue_deg,
        diameter_m,
        opacity: 1.0,
    }
}

/// Concentration levels the game reports against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HealthThresholds {
    /// Level above which thinking measurably slows.
    pub cognition_ppm: f64,
    /// Level above which headaches and drowsiness are common.
    pub symptoms_ppm: f64,
    /// A session is complete once every monitored point stays at or below this.
    pub session_target_ppm: f64,
}

impl Default for HealthThresholds {
    fn default() -> Self {
        Self {
            cognition_ppm: 1000.0,
            symptoms_ppm: 2000.0,
            session_target_ppm: 800.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleConfig {
    /// Wearer must be this close for a bubble to take a new reading.
    pub proximity_m: f64,
    pub staleness_half_life_s: f64,
    pub min_opacity: f64,
    pub merge_radius_m: f64,
}

impl Default for BubbleConfig {
    fn default() -> Self {
        Self {
            proximity_m: 1.0,
            staleness_half_life_s: 300.0,
            min_opacity: 0.15,
            merge_radius_m: 0.5,
        }
    }
}

impl BubbleConfig {
    pub fn opacity(&self, age_s: f64) -> f64 {
        0.5f64
            .powf(age_s.max(0.0) / self.staleness_half_life_s)
            .max(self.min_opacity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    pub id: u64,
    pub position: Point3,
    pub last_ppm: f64,
    pub placed_t: f64,
    pub updated_t: f64,
    pub style: BubbleStyle,
}

impl Bubble {
    pub fn new(id: u64, position: Point3, ppm: f64, t: f64) -> Self {
        Self {
            id,
            position,
            last_ppm: ppm,
            placed_t: t,
            updated_t: t,
            style: bubble_visual(ppm),
        }
    }

    fn restyle(&mut self, now: f64, config: &BubbleConfig) {
        self.style = BubbleStyle {
            opacity: config.opacity(now - self.updated_t),
            ..bubble_visual(self.last_ppm)
        };
    }
}

/// Refreshes bubbles near the wearer with an ok reading and recomputes
/// staleness opacity for all of them.
pub fn update_bubbles(
    mut bubbles: Vec<Bubble>,
    wearer_position: Point3,
    reading: &Reading,
    now: f64,
    config: &BubbleConfig,
) -> Vec<Bubble> {
    let fresh = reading.co2_ppm.filter(|_| reading.is_ok());
    for b in &mut bubbles {
        if let Some(ppm) = fresh {
            if distance(b.position, wearer_position) <= config.proximity_m {
                b.last_ppm = ppm;
                b.updated_t = now;
            }
        }
        b.restyle(now, config);
    }
    bubbles
}

/// Recomputes staleness opacity without touching readings.
pub fn fade_bubbles(bubbles: &mut [Bubble], now: f64, config: &BubbleConfig) {
    for b in bubbles {
        b.restyle(now, config);
    }
}

/// Collapses bubbles within `merge_radius_m` of each other (transitively)
/// into one at their centroid. The lowest id survives and the freshest
/// reading wins; repeats until no two bubbles are within the radius.
pub fn merge_bubbles(bubbles: Vec<Bubble>, merge_radius_m: f64) -> Vec<Bubble> {
    let mut current = bubbles;
    current.sort_by_key(|b| b.id);
    loop {
        let (merged, changed) = merge_pass(&current, merge_radius_m);
        current = merged;
        if !changed {
            return current;
        }
    }
}

fn merge_pass(bubbles: &[Bubble], radius: f64) -> (Vec<Bubble>, bool) {
    let n = bubbles.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut changed = false;
    for i in 0..n {
        for j in (i + 1)..n {
            if distance(bubbles[i].position, bubbles[j].position) <= radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                    changed = true;
                }
            }
        }
    }
    if !changed {
        return (bubbles.to_vec(), false);
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let root = find(&mut parent, i);
        groups[root].push(i);
    }
    let merged = groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|members| {
            let count = members.len() as f64;
            let mut centroid = [0.0; 3];
            for &m in &members {
                for (c, p) in centroid.iter_mut().zip(bubbles[m].position) {
                    *c += p;
                }
            }
            for c in &mut centroid {
                *c /= count;
            }
            // Members are in id order, so ties go to the lowest id.
            let freshest = members.iter().copied().fold(members[0], |best, m| {
                if bubbles[m].updated_t > bubbles[best].updated_t {
                    m
                } else {
                    best
                }
            });
            let placed_t = members
                .iter()
                .map(|&m| bubbles[m].placed_t)
                .fold(f64::INFINITY, f64::min);
            let src = &bubbles[freshest];
            Bubble {
                id: bubbles[members[0]].id,
                position: centroid,
                last_ppm: src.last_ppm,
                placed_t,
                updated_t: src.updated_t,
                style: src.style,
            }
        })
        .collect();
    (merged, true)
}
