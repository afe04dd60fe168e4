//! Bird's-eye-view rendering of the fused volume with the normalized
//! coordinate grid, trail, waypoint, and agent-pose overlays.

use crate::draw::{digits_width, Raster, Rgb};
use crate::geometry::AgentState;
use crate::scalar::Scalar;

use super::{TsdfError, TsdfVolume};

/// Side length of the rendered map in pixels.
pub const BEV_PIXELS: u32 = 500;
/// Resolution of the normalized coordinate grid overlaid on every view.
pub const BEV_GRID_CELLS: u32 = 1000;

/// Extra margin in meters around the observed bounding box.
const EXTENT_PAD_M: f64 = 1.0;
/// Occupancy slab above the floor, in meters: excludes floor and ceiling hits.
const SLAB_LO_M: f64 = 0.1;
const SLAB_HI_M: f64 = 1.5;

const COLOR_UNKNOWN: Rgb = [120, 120, 120];
const COLOR_FREE: Rgb = [235, 235, 235];
const COLOR_OCCUPIED: Rgb = [30, 30, 30];
const COLOR_GRID: Rgb = [80, 80, 80];
const COLOR_LABEL: Rgb = [10, 10, 60];
const COLOR_TRAIL: Rgb = [255, 215, 0];
const COLOR_WAYPOINT: Rgb = [30, 100, 255];
const COLOR_AGENT: Rgb = [230, 40, 40];

/// Per-pixel occupancy class of the rendered slab.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BevClass {
    Unknown,
    Free,
    Occupied,
}

/// Rendered top-down map. Pixel `(0, 0)` is the north-west corner:
/// `world_origin` holds its world coordinates `(min_x, max_y)`, columns grow
/// toward +x and rows toward -y.
#[derive(Debug, Clone)]
pub struct BevImage {
    pub pixels: Vec<u8>,
    pub width: u32,
    pub height: u32,
    pub meters_per_pixel: f64,
    pub world_origin: (f64, f64),
    pub grid_cells: u32,
    pub floor_height: f64,
    classes: Vec<BevClass>,
}

impl BevImage {
    fn side_m(&self) -> f64 {
        self.meters_per_pixel * self.width as f64
    }

    /// World position of a normalized grid coordinate in `[0, grid_cells]^2`.
    pub fn normalized_to_world(&self, u: f64, v: f64) -> Result<(f64, f64), TsdfError> {
        let cells = self.grid_cells as f64;
        if !(0.0..=cells).contains(&u) || !(0.0..=cells).contains(&v) {
            return Err(TsdfError::OutOfBounds { x: u, y: v, z: 0.0 });
        }
        let side = self.side_m();
        Ok((
            self.world_origin.0 + u / cells * side,
            self.world_origin.1 - v / cells * side,
        ))
    }

    /// Inverse of [`normalized_to_world`](Self::normalized_to_world); does not
    /// clamp, so callers can detect off-map points.
    pub fn world_to_normalized(&self, x: f64, y: f64) -> (f64, f64) {
        let side = self.side_m();
        let cells = self.grid_cells as f64;
        (
            (x - self.world_origin.0) / side * cells,
            (self.world_origin.1 - y) / side * cells,
        )
    }

    pub fn pixel_for_world(&self, x: f64, y: f64) -> Option<(u32, u32)> {
        let col = ((x - self.world_origin.0) / self.meters_per_pixel).floor();
        let row = ((self.world_origin.1 - y) / self.meters_per_pixel).floor();
        if col < 0.0 || row < 0.0 || col >= self.width as f64 || row >= self.height as f64 {
            return None;
        }
        Some((col as u32, row as u32))
    }

    /// World coordinates of a pixel center.
    pub fn world_center_of_pixel(&self, col: u32, row: u32) -> (f64, f64) {
        (
            self.world_origin.0 + (col as f64 + 0.5) * self.meters_per_pixel,
            self.world_origin.1 - (row as f64 + 0.5) * self.meters_per_pixel,
        )
    }

    pub fn class_at(&self, col: u32, row: u32) -> BevClass {
        self.classes[(row * self.width + col) as usize]
    }

    /// Deterministic PNG encoding of the rendered pixels.
    pub fn to_png_bytes(&self) -> Vec<u8> {
        crate::draw::encode_png(&self.pixels, self.width, self.height)
    }
}

/// Converts a normalized BEV grid coordinate into world meters.
pub fn bev_pixel_to_world(bev: &BevImage, normalized: (f64, f64)) -> Result<(f64, f64), TsdfError> {
    bev.normalized_to_world(normalized.0, normalized.1)
}

/// Renders the volume's occupancy slab into an annotated top-down map.
/// Identical inputs produce byte-identical pixels.
pub fn render_bev<S: Scalar>(
    volume: &TsdfVolume<S>,
    agent: &AgentState<S>,
    trail: &[(f64, f64)],
    waypoints: &[(f64, f64)],
    floor_height: f64,
) -> BevImage {
    // Fixed square window: observed bounding box padded by one meter, or the
    // whole volume when nothing has been fused yet.
    let (center, side) = match volume.observed_bounds() {
        Some(bb) => {
            let min = (bb.min.x.to_f64_lossy(), bb.min.y.to_f64_lossy());
            let max = (bb.max.x.to_f64_lossy(), bb.max.y.to_f64_lossy());
            let side = (max.0 - min.0).max(max.1 - min.1) + 2.0 * EXTENT_PAD_M;
            (((min.0 + max.0) / 2.0, (min.1 + max.1) / 2.0), side)
        }
        None => {
            let bb = volume.bounds();
            let min = (bb.min.x.to_f64_lossy(), bb.min.y.to_f64_lossy());
            let max = (bb.max.x.to_f64_lossy(), bb.max.y.to_f64_lossy());
            let side = (max.0 - min.0).max(max.1 - min.1) + 2.0 * EXTENT_PAD_M;
            (((min.0 + max.0) / 2.0, (min.1 + max.1) / 2.0), side)
        }
    };
    let width = BEV_PIXELS;
    let height = BEV_PIXELS;
    let mpp = side / width as f64;
    let world_origin = (center.0 - side / 2.0, center.1 + side / 2.0);

    let mut image = BevImage {
        pixels: vec![0; (width * height * 3) as usize],
        width,
        height,
        meters_per_pixel: mpp,
        world_origin,
        grid_cells: BEV_GRID_CELLS,
        floor_height,
        classes: vec![BevClass::Unknown; (width * height) as usize],
    };

    classify_slab(volume, &mut image, floor_height);
    for (i, class) in image.classes.iter().enumerate() {
        let color = match class {
            BevClass::Unknown => COLOR_UNKNOWN,
            BevClass::Free => COLOR_FREE,
            BevClass::Occupied => COLOR_OCCUPIED,
        };
        image.pixels[i * 3..i * 3 + 3].copy_from_slice(&color);
    }

    let origin = image.world_origin;
    let meters_per_pixel = image.meters_per_pixel;
    let px_of = |x: f64, y: f64| -> (i64, i64) {
        (
            ((x - origin.0) / meters_per_pixel).floor() as i64,
            ((origin.1 - y) / meters_per_pixel).floor() as i64,
        )
    };

    let mut raster = Raster::new(&mut image.pixels, width, height);

    // Grid every 100 normalized units, labels along the top and left borders.
    for step in (0..=BEV_GRID_CELLS).step_by(100) {
        let p = (step as f64 / BEV_GRID_CELLS as f64 * (width - 1) as f64).round() as i64;
        raster.line(p, 0, p, height as i64 - 1, COLOR_GRID);
        raster.line(0, p, width as i64 - 1, p, COLOR_GRID);
    }
    for step in (0..=BEV_GRID_CELLS).step_by(100) {
        let p = (step as f64 / BEV_GRID_CELLS as f64 * (width - 1) as f64).round() as i64;
        let text = step.to_string();
        let tx = (p + 2).min(width as i64 - digits_width(&text) - 1);
        raster.digits(tx, 2, &text, COLOR_LABEL);
        if step > 0 {
            raster.digits(2, (p + 2).min(height as i64 - 7), &text, COLOR_LABEL);
        }
    }

    for pair in trail.windows(2) {
        let (x0, y0) = px_of(pair[0].0, pair[0].1);
        let (x1, y1) = px_of(pair[1].0, pair[1].1);
        raster.line(x0, y0, x1, y1, COLOR_TRAIL);
    }

    for &(wx, wy) in waypoints {
        let (x, y) = px_of(wx, wy);
        raster.disc(x, y, 3, COLOR_WAYPOINT);
    }

    let (ax, ay) = px_of(agent.x.to_f64_lossy(), agent.y.to_f64_lossy());
    raster.arrow(ax, ay, agent.theta.to_f64_lossy(), 12.0, COLOR_AGENT);

    image
}

fn classify_slab<S: Scalar>(volume: &TsdfVolume<S>, image: &mut BevImage, floor_height: f64) {
    let dims = volume.dims();
    let voxel = volume.voxel_size().to_f64_lossy();
    let origin = volume.origin();
    let origin_f = (
        origin.x.to_f64_lossy(),
        origin.y.to_f64_lossy(),
        origin.z.to_f64_lossy(),
    );

    // Voxel layers whose centers fall inside the occupancy slab.
    let k_of = |z: f64| ((z - origin_f.2) / voxel - 0.5).round() as i64;
    let k_lo = k_of(floor_height + SLAB_LO_M).max(0) as usize;
    let k_hi = (k_of(floor_height + SLAB_HI_M).max(0) as usize).min(dims[2].saturating_sub(1));

    for row in 0..image.height {
        for col in 0..image.width {
            let (wx, wy) = image.world_center_of_pixel(col, row);
            let i = ((wx - origin_f.0) / voxel).floor();
            let j = ((wy - origin_f.1) / voxel).floor();
            if i < 0.0 || j < 0.0 || i >= dims[0] as f64 || j >= dims[1] as f64 {
                continue;
            }
            let (i, j) = (i as usize, j as usize);
            let mut observed = false;
            let mut occupied = false;
            for k in k_lo..=k_hi {
                let (sdf, w) = volume.voxel(i, j, k);
                if w > S::zero() {
                    observed = true;
                    if sdf < S::zero() {
                        occupied = true;
                        break;
                    }
                }
            }
            let class = if occupied {
                BevClass::Occupied
            } else if observed {
                BevClass::Free
            } else {
                BevClass::Unknown
            };
            image.classes[(row * image.width + col) as usize] = class;
        }
    }
}
