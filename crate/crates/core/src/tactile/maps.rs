use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pixel grid of the sensing field. Pixel `(col, row)` has its center at
/// `((col + 0.5)·res − W·res/2, (row + 0.5)·res − H·res/2)` mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub resolution_mm: f64,
}

impl Default for Grid {
    /// 64×64 at 0.25 mm: a 16 mm field, the inner diameter of the sensor tube.
    fn default() -> Self {
        Grid {
            width: 64,
            height: 64,
            resolution_mm: 0.25,
        }
    }
}

impl Grid {
    pub fn new(width: usize, height: usize, resolution_mm: f64) -> Self {
        Grid {
            width,
            height,
            resolution_mm,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn half_extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution_mm / 2.0,
            self.height as f64 * self.resolution_mm / 2.0,
        )
    }

    pub fn center_of(&self, col: usize, row: usize) -> (f64, f64) {
        let (hx, hy) = self.half_extent();
        (
            (col as f64 + 0.5) * self.resolution_mm - hx,
            (row as f64 + 0.5) * self.resolution_mm - hy,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || !(self.resolution_mm > 0.0) {
            return Err(Error::domain(
                "grid needs positive width, height and resolution",
            ));
        }
        Ok(())
    }
}

/// Gel indentation depth per pixel, mm (0 = undeformed). Positive depth
/// moves the gel surface toward the camera, so it acts as a height field.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    pub grid: Grid,
    /// Row-major depths.
    pub depths: Vec<f64>,
}

impl HeightMap {
    pub fn zeros(grid: Grid) -> Self {
        HeightMap {
            grid,
            depths: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut depths = Vec::with_capacity(grid.len());
        for row in 0..grid.height {
            for col in 0..grid.width {
                let (x, y) = grid.center_of(col, row);
                depths.push(f(x, y));
            }
        }
        HeightMap { grid, depths }
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.depths[row * self.grid.width + col]
    }

    pub fn max_depth(&self) -> f64 {
        self.depths.iter().cloned().fold(0.0, f64::max)
    }

    /// Pixels at the deepest level: the flat face of a pressed object.
    pub fn footprint(&self) -> Vec<bool> {
        let max = self.max_depth();
        if max <= 0.0 {
            return vec![false; self.depths.len()];
        }
        let floor = max * (1.0 - 1e-9);
        self.depths.iter().map(|&d| d >= floor).collect()
    }
}

/// Unit surface normals per pixel, pointing toward the camera (`nz > 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    pub grid: Grid,
    pub normals: Vec<[f64; 3]>,
}

impl NormalMap {
    pub fn flat(grid: Grid) -> Self {
        NormalMap {
            grid,
            normals: vec![[0.0, 0.0, 1.0]; grid.len()],
        }
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }
}

/// Three-channel sensor image with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TactileImage {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB.
    pub pixels: Vec<[f64; 3]>,
}

impl TactileImage {
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        TactileImage {
            width,
            height,
            pixels: vec![rgb; width * height],
        }
    }

    pub fn same_size(&self, other: &TactileImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Channel-planar copy (`C×H×W`), the layout the classifier consumes.
    pub fn to_planar(&self) -> Vec<f64> {
        let n = self.pixels.len();
        let mut out = vec![0.0; 3 * n];
        for (i, px) in self.pixels.iter().enumerate() {
            for c in 0..3 {
                out[c * n + i] = px[c];
            }
        }
        out
    }

    /// Quantizes to 8 bits per channel, as stored on disk.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|px| px.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect()
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Self {
        assert_eq!(bytes.len(), width * height * 3);
        TactileImage {
            width,
            height,
            pixels: bytes
                .chunks_exact(3)
                .map(|c| {
                    [
                        c[0] as f64 / 255.0,
                        c[1] as f64 / 255.0,
                        c[2] as f64 / 255.0,
                    ]
                })
                .collect(),
        }
    }
}

/// Angle between two unit vectors, degrees. Accurate for tiny angles.
pub fn angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let sin = cross.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cos: f64 = (0..3).map(|i| a[i] * b[i]).sum();
    sin.atan2(cos).to_degrees()
}
