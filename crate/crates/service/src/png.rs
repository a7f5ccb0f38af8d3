//! PNG export of heatmap grids.

use std::path::Path;

use airbubble_core::heatmap::HeatmapGrid;
use image::{ImageBuffer, Rgb};

/// Pixels per probe cell in exported images.
pub const CELL_PX: u32 = 40;

pub fn write_heatmap_png(grid: &HeatmapGrid, path: &Path) -> image::ImageResult<()> {
    let img = grid.to_rgb(CELL_PX);
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width, img.height, img.pixels).expect("buffer matches dimensions");
    buf.save(path)
}
