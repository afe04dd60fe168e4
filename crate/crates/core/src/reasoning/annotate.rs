//! Normalized coordinate-grid overlay for egocentric views.

use crate::draw::{digits_width, Raster, Rgb};

const GRID_COLOR: Rgb = [0, 220, 0];
const GRID_CELLS: u32 = 1000;

/// Overlays the normalized `[0, 1000]^2` grid: one line every 100 units plus
/// tick labels along the top and left borders. Returns a new buffer; the
/// geometry is a pure function of the image size, so re-annotating an
/// annotated image paints the same pixels again.
pub fn annotate_grid(pixels: &[u8], width: u32, height: u32) -> Vec<u8> {
    assert!(width > 0 && height > 0, "image must be nonempty");
    assert_eq!(pixels.len(), (width * height * 3) as usize);
    let mut out = pixels.to_vec();
    let mut raster = Raster::new(&mut out, width, height);
    for step in (0..=GRID_CELLS).step_by(100) {
        let x = (step as f64 / GRID_CELLS as f64 * (width - 1) as f64).round() as i64;
        let y = (step as f64 / GRID_CELLS as f64 * (height - 1) as f64).round() as i64;
        raster.line(x, 0, x, height as i64 - 1, GRID_COLOR);
        raster.line(0, y, width as i64 - 1, y, GRID_COLOR);
    }
    for step in (0..=GRID_CELLS).step_by(200) {
        let x = (step as f64 / GRID_CELLS as f64 * (width - 1) as f64).round() as i64;
        let y = (step as f64 / GRID_CELLS as f64 * (height - 1) as f64).round() as i64;
        let text = step.to_string();
        let tx = (x + 2).min(width as i64 - digits_width(&text) - 1);
        raster.digits(tx, 2, &text, GRID_COLOR);
        if step > 0 {
            raster.digits(2, (y + 2).min(height as i64 - 7), &text, GRID_COLOR);
        }
    }
    out
}
