use super::maps::{Grid, HeightMap, NormalMap};
use super::shape::{ShapeSpec, GEL_THICKNESS_MM};
use crate::{Error, Result};

/// Offsets of a digital disc and their normalized smoothing weights.
struct DiscKernel {
    offsets: Vec<(isize, isize)>,
    weights: Vec<f64>,
}

impl DiscKernel {
    /// Biweight profile `(1 − (r/(R+1))²)²` over the integer disc of radius `R` pixels.
    fn new(radius_px: f64) -> Self {
        let reach = radius_px.floor() as isize;
        let scale = radius_px + 1.0;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let r2 = (dx * dx + dy * dy) as f64;
                if r2 <= radius_px * radius_px {
                    offsets.push((dx, dy));
                    let u = 1.0 - r2 / (scale * scale);
                    weights.push(u * u);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        DiscKernel { offsets, weights }
    }
}

/// Indents the gel with `shape`.
///
/// The footprint is dilated by a disc of radius half the gel thickness and
/// then convolved with a smooth kernel on that same disc. Every footprint
/// pixel therefore sits exactly at the press depth, and the gel relaxes to
/// zero over one gel thickness outside the boundary.
pub fn press_shape(shape: &ShapeSpec, grid: &Grid) -> Result<HeightMap> {
    shape.validate()?;
    grid.validate()?;
    let (ex, ey) = shape.extent();
    let (hx, hy) = grid.half_extent();
    if ex + GEL_THICKNESS_MM > hx || ey + GEL_THICKNESS_MM > hy {
        return Err(Error::domain(format!(
            "{} footprint plus {GEL_THICKNESS_MM} mm falloff exceeds the {:.2}×{:.2} mm field",
            shape.kind.name(),
            2.0 * hx,
            2.0 * hy
        )));
    }
    if shape.press_depth_mm == 0.0 {
        return Ok(HeightMap::zeros(*grid));
    }

    let (w, h) = (grid.width, grid.height);
    let footprint: Vec<bool> = (0..grid.len())
        .map(|i| {
            let (x, y) = grid.center_of(i % w, i / w);
            shape.contains(x, y)
        })
        .collect();

    let kernel = DiscKernel::new(GEL_THICKNESS_MM / 2.0 / grid.resolution_mm);
    let inside = |c: isize, r: isize| c >= 0 && r >= 0 && (c as usize) < w && (r as usize) < h;

    let mut dilated = vec![false; grid.len()];
    for (i, _) in footprint.iter().enumerate().filter(|(_, &f)| f) {
        let (c, r) = ((i % w) as isize, (i / w) as isize);
        for &(dx, dy) in &kernel.offsets {
            if inside(c + dx, r + dy) {
                dilated[(r + dy) as usize * w + (c + dx) as usize] = true;
            }
        }
    }

    let mut depths = vec![0.0; grid.len()];
    for (i, d) in depths.iter_mut().enumerate() {
        if footprint[i] {
            *d = shape.press_depth_mm;
            continue;
        }
        let (c, r) = ((i % w) as isize, (i / w) as isize);
        let acc: f64 = kernel
            .offsets
            .iter()
            .zip(&kernel.weights)
            .filter(|((dx, dy), _)| {
                inside(c + dx, r + dy) && dilated[(r + dy) as usize * w + (c + dx) as usize]
            })
            .map(|(_, wt)| wt)
            .sum();
        *d = shape.press_depth_mm * acc.min(1.0);
    }
    Ok(HeightMap {
        grid: *grid,
        depths,
    })
}

/// Normals `∝ (−∂h/∂x, −∂h/∂y, 1)` from central differences, one-sided on the border.
pub fn normals_from_heightmap(hm: &HeightMap) -> NormalMap {
    let (w, h) = (hm.width(), hm.height());
    let res = hm.grid.resolution_mm;
    let mut normals = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let gx = derivative(c, w, res, |k| hm.at(k, r));
            let gy = derivative(r, h, res, |k| hm.at(c, k));
            let norm = (gx * gx + gy * gy + 1.0).sqrt();
            normals.push([-gx / norm, -gy / norm, 1.0 / norm]);
        }
    }
    NormalMap {
        grid: hm.grid,
        normals,
    }
}

fn derivative(i: usize, n: usize, res: f64, f: impl Fn(usize) -> f64) -> f64 {
    if n < 2 {
        0.0
    } else if i == 0 {
        (f(1) - f(0)) / res
    } else if i == n - 1 {
        (f(n - 1) - f(n - 2)) / res
    } else {
        (f(i + 1) - f(i - 1)) / (2.0 * res)
    }
}
