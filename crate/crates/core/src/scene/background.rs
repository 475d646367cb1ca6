//! Static background points and the grid motion field they induce.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, Intrinsics, Pose6D, Vec3};

/// Cells per image side.
pub const GRID: usize = 8;
pub const CELLS: usize = GRID * GRID;
pub const BG_DIM: usize = 2 * CELLS;

/// Per-cell mean displacement of background points between two frames,
/// normalized by image width (x) and height (y). Cells are row-major from the
/// top-left; cell `i` stores `(dx, dy)` at `values[2i], values[2i + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BgFeature {
    pub values: Vec<f64>,
    /// Bit `i` set when cell `i` contained at least one tracked point.
    pub mask: u64,
}

impl BgFeature {
    pub fn zeros() -> Self {
        Self {
            values: vec![0.0; BG_DIM],
            mask: 0,
        }
    }

    pub fn cell(&self, row: usize, col: usize) -> [f64; 2] {
        let i = row * GRID + col;
        [self.values[2 * i], self.values[2 * i + 1]]
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.mask >> (row * GRID + col) & 1 == 1
    }

    pub fn valid_count(&self) -> u32 {
        self.mask.count_ones()
    }

    /// Horizontal image flip: columns mirrored, horizontal motion negated.
    pub fn flipped(&self) -> Self {
        let mut out = Self::zeros();
        for r in 0..GRID {
            for c in 0..GRID {
                let src = r * GRID + c;
                let dst = r * GRID + (GRID - 1 - c);
                out.values[2 * dst] = -self.values[2 * src];
                out.values[2 * dst + 1] = self.values[2 * src + 1];
                out.mask |= (self.mask >> src & 1) << dst;
            }
        }
        out
    }
}

/// Static world points used as stand-ins for KLT tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    /// Scatters ground points and vertical structures around the given camera
    /// positions: a sparse field over the padded bounding box, a dense strip
    /// near the path, and poles for coverage above the horizon.
    pub fn scatter<R: Rng>(cameras: &[Vec3], rng: &mut R) -> Self {
        let margin = 60.0;
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for c in cameras {
            for a in 0..2 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        for a in 0..2 {
            lo[a] -= margin;
            hi[a] += margin;
        }
        let area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
        let mut points = Vec::new();
        let sparse = (area / 16.0) as usize;
        for _ in 0..sparse {
            points.push(Vec3::new(
                rng.random_range(lo[0]..hi[0]),
                rng.random_range(lo[1]..hi[1]),
                0.0,
            ));
        }
        // Dense ground near the path, about one point per square metre.
        let step = (cameras.len() / 40).max(1);
        for c in cameras.iter().step_by(step) {
            for _ in 0..600 {
                let r = 14.0 * rng.random::<f64>().sqrt();
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                points.push(Vec3::new(c.x + r * a.cos(), c.y + r * a.sin(), 0.0));
            }
        }
        let poles = (area / 150.0) as usize;
        for _ in 0..poles {
            let x = rng.random_range(lo[0]..hi[0]);
            let y = rng.random_range(lo[1]..hi[1]);
            let top = rng.random_range(4.0..25.0);
            let mut z = rng.random_range(0.0..0.5);
            while z < top {
                points.push(Vec3::new(x, y, z));
                z += 0.6;
            }
        }
        Self { points }
    }
}

/// Mean image displacement per grid cell of the static points between two
/// camera poses. Points are binned by their position in the first frame and
/// must be in front of both cameras.
pub fn render_motion_field(cam_t: &Pose6D, cam_t1: &Pose6D, k: &Intrinsics, cloud: &PointCloud) -> Result<BgFeature> {
    let c0 = Camera::new(*cam_t, *k);
    let c1 = Camera::new(*cam_t1, *k);
    let mut sum = [[0.0f64; 2]; CELLS];
    let mut count = [0u32; CELLS];
    let cw = k.width / GRID as f64;
    let ch = k.height / GRID as f64;
    for p in &cloud.points {
        let Some((u0, v0, _)) = c0.project(p) else {
            continue;
        };
        if !k.in_image(u0, v0) {
            continue;
        }
        let Some((u1, v1, _)) = c1.project(p) else {
            continue;
        };
        let (du, dv) = (u1 - u0, v1 - v0);
        if !du.is_finite() || !dv.is_finite() {
            return Err(Error::Numeric("non-finite background projection".into()));
        }
        let col = ((u0 / cw) as usize).min(GRID - 1);
        let row = ((v0 / ch) as usize).min(GRID - 1);
        let i = row * GRID + col;
        sum[i][0] += du;
        sum[i][1] += dv;
        count[i] += 1;
    }
    let mut out = BgFeature::zeros();
    for i in 0..CELLS {
        if count[i] > 0 {
            out.values[2 * i] = sum[i][0] / count[i] as f64 / k.width;
            out.values[2 * i + 1] = sum[i][1] / count[i] as f64 / k.height;
            out.mask |= 1 << i;
        }
    }
    Ok(out)
}
