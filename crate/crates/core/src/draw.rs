//! Integer raster helpers for the BEV and grid overlays: lines, discs,
//! arrows, and a tiny built-in digit font so axis labels need no font files.
//! Everything here is pure integer math and therefore deterministic.

pub type Rgb = [u8; 3];

/// Mutable view over a row-major RGB byte buffer.
pub struct Raster<'a> {
    pub buf: &'a mut [u8],
    pub width: u32,
    pub height: u32,
}

impl<'a> Raster<'a> {
    pub fn new(buf: &'a mut [u8], width: u32, height: u32) -> Self {
        debug_assert_eq!(buf.len(), (width * height * 3) as usize);
        Self { buf, width, height }
    }

    pub fn put(&mut self, x: i64, y: i64, color: Rgb) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = ((y as u32 * self.width + x as u32) * 3) as usize;
        self.buf[i..i + 3].copy_from_slice(&color);
    }

    /// Bresenham line, clipped at the raster edges.
    pub fn line(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgb) {
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        let (mut x, mut y) = (x0, y0);
        loop {
            self.put(x, y, color);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    pub fn disc(&mut self, cx: i64, cy: i64, radius: i64, color: Rgb) {
        for y in -radius..=radius {
            for x in -radius..=radius {
                if x * x + y * y <= radius * radius {
                    self.put(cx + x, cy + y, color);
                }
            }
        }
    }

    /// Arrow from `(x, y)` along `angle` (raster convention: y grows down,
    /// angle counterclockwise from +x on screen).
    pub fn arrow(&mut self, x: i64, y: i64, angle: f64, len: f64, color: Rgb) {
        let tip_x = x + (angle.cos() * len).round() as i64;
        let tip_y = y - (angle.sin() * len).round() as i64;
        self.line(x, y, tip_x, tip_y, color);
        for side in [-1.0, 1.0] {
            let a = angle + std::f64::consts::PI - side * 0.5;
            let hx = tip_x + (a.cos() * len * 0.35).round() as i64;
            let hy = tip_y - (a.sin() * len * 0.35).round() as i64;
            self.line(tip_x, tip_y, hx, hy, color);
        }
        self.disc(x, y, 2, color);
    }

    /// Renders a digit string with the 3x5 font, top-left anchored.
    pub fn digits(&mut self, x: i64, y: i64, text: &str, color: Rgb) {
        let mut cx = x;
        for ch in text.chars() {
            if let Some(glyph) = digit_glyph(ch) {
                for (row, bits) in glyph.iter().enumerate() {
                    for col in 0..3 {
                        if bits & (0b100 >> col) != 0 {
                            self.put(cx + col as i64, y + row as i64, color);
                        }
                    }
                }
            }
            cx += 4;
        }
    }
}

/// 3x5 bitmaps for '0'..'9'; one byte per row, low 3 bits used.
fn digit_glyph(ch: char) -> Option<[u8; 5]> {
    Some(match ch {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b010, 0b010, 0b010],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        _ => return None,
    })
}

/// Width in pixels of a digit string in the built-in font.
pub fn digits_width(text: &str) -> i64 {
    (text.len() as i64) * 4 - 1
}

/// PNG-encodes a row-major RGB buffer. The encoder settings are fixed, so
/// identical pixels give identical bytes.
pub fn encode_png(pixels: &[u8], width: u32, height: u32) -> Vec<u8> {
    use image::codecs::png::{CompressionType, FilterType, PngEncoder};
    use image::ImageEncoder;

    let mut out = Vec::new();
    let encoder =
        PngEncoder::new_with_quality(&mut out, CompressionType::Default, FilterType::Adaptive);
    encoder
        .write_image(pixels, width, height, image::ExtendedColorType::Rgb8)
        .expect("in-memory png encode cannot fail");
    out
}

/// Decodes a PNG back into a row-major RGB buffer; used by golden-image tests.
pub fn decode_png(bytes: &[u8]) -> Result<(Vec<u8>, u32, u32), image::ImageError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok((img.into_raw(), w, h))
}
