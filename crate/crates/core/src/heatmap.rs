//! Plan-view concentration grids at one of the three probe heights.

use serde::{Deserialize, Serialize};

use crate::bubble::bubble_visual;
use crate::field::ConcentrationField;
use crate::scenario::{HeightLabel, Scenario};

const MISSING_RGB: [u8; 3] = [96, 96, 96];

/// Concentrations on the probe grid: `values[row][col]`, rows over y and
/// columns over x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub height: HeightLabel,
    pub t: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Packed 8-bit RGB pixels, row-major, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl HeatmapGrid {
    pub fn from_field(field: &ConcentrationField, scenario: &Scenario, height: HeightLabel) -> Self {
        let (xs, ys) = scenario.probe_axes();
        let mut values = vec![vec![f64::NAN; xs.len()]; ys.len()];
        for probe in scenario.probes_at(height) {
            values[probe.row][probe.col] = field.sample(probe.position).unwrap_or(f64::NAN);
        }
        Self {
            height,
            t: field.t(),
            xs,
            ys,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn cols(&self) -> usize {
        self.xs.len()
    }

    pub fn max_ppm(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::NAN, f64::max)
    }

    /// `row,col,x_m,y_m,ppm` lines under a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,x_m,y_m,ppm\n");
        for (row, y) in self.ys.iter().enumerate() {
            for (col, x) in self.xs.iter().enumerate() {
                out.push_str(&format!("{row},{col},{x},{y},{}\n", self.values[row][col]));
            }
        }
        out
    }

    /// Colors each cell with the bubble hue law, `cell_px` pixels per cell,
    /// highest y at the top.
    pub fn to_rgb(&self, cell_px: u32) -> RgbImage {
        let cell_px = cell_px.max(1);
        let width = self.cols() as u32 * cell_px;
        let height = self.rows() as u32 * cell_px;
        let mut pixels = Vec::with_capacity((width * height * 3) as usize);
        for py in 0..height {
            let row = self.rows() - 1 - (py / cell_px) as usize;
            for px in 0..width {
                let v = self.values[row][(px / cell_px) as usize];
                let rgb = if v.is_finite() {
                    bubble_visual(v).rgb()
                } else {
                    MISSING_RGB
                };
                pixels.extend_from_slice(&rgb);
            }
        }
        RgbImage { width, height, pixels }
    }
}
