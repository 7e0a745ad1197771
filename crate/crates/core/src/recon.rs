//! Inverse sensing: image → normals → heights, and contact masks.
//!
//! Normals are recovered per pixel by inverting the three-light Lambertian
//! response. Heights come from a Poisson solve on the mirrored (even-extended)
//! domain, where the central-difference gradient and divergence are
//! diagonalized by a 2-D FFT. With gradients produced by
//! [`normals_from_heightmap`](crate::tactile::normals_from_heightmap) the
//! solve is exact up to a constant, which is fixed by setting the median of
//! the border pixels to zero.

use nalgebra::Vector3;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::tactile::{Grid, HeightMap, LightingModel, NormalMap, TactileImage};
use crate::{Error, Result};

/// Difference threshold used by the toolkit when none is given.
pub const DEFAULT_CONTACT_THRESHOLD: f64 = 0.02;

/// Tolerance on channel values for shadow/saturation tests.
pub const RESPONSE_EPS: f64 = 1e-6;

/// Recovered normals with a per-pixel trust flag.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEstimate {
    pub normals: NormalMap,
    /// `true` where a channel was shadowed or saturated.
    pub untrusted: Vec<bool>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-channel ambient level implied by a background (flat gel) image:
/// the channel median minus the modeled response of a flat surface.
pub fn estimate_ambient(background: &TactileImage, lighting: &LightingModel) -> [f64; 3] {
    std::array::from_fn(|c| {
        let m = median(background.pixels.iter().map(|p| p[c]).collect());
        m - lighting.intensities[c] * lighting.directions[c][2].max(0.0)
    })
}

/// Photometric stereo with one light per color channel.
pub fn normals_from_image(
    img: &TactileImage,
    lighting: &LightingModel,
    background: &TactileImage,
    grid: &Grid,
) -> Result<NormalEstimate> {
    if !img.same_size(background) {
        return Err(Error::config(format!(
            "image is {}×{} but background is {}×{}",
            img.width, img.height, background.width, background.height
        )));
    }
    if img.width != grid.width || img.height != grid.height {
        return Err(Error::config("image size does not match the grid"));
    }
    lighting.validate()?;
    let inverse = lighting
        .response_matrix()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::config("lighting direction matrix is singular"))?;
    let ambient = estimate_ambient(background, lighting);

    let mut normals = Vec::with_capacity(img.pixels.len());
    let mut untrusted = Vec::with_capacity(img.pixels.len());
    for px in &img.pixels {
        let saturated = px.iter().any(|&v| v >= 1.0 - RESPONSE_EPS);
        let shadowed: Vec<bool> = (0..3).map(|c| px[c] <= ambient[c] + RESPONSE_EPS).collect();
        if saturated || shadowed.iter().all(|&s| s) {
            normals.push([0.0, 0.0, 1.0]);
            untrusted.push(true);
            continue;
        }
        let shading = Vector3::new(px[0] - ambient[0], px[1] - ambient[1], px[2] - ambient[2]);
        let scaled = inverse * shading;
        let norm = scaled.norm();
        if !(norm > 0.0) || scaled.z <= 0.0 {
            normals.push([0.0, 0.0, 1.0]);
            untrusted.push(true);
            continue;
        }
        normals.push([scaled.x / norm, scaled.y / norm, scaled.z / norm]);
        untrusted.push(shadowed.iter().any(|&s| s));
    }
    Ok(NormalEstimate {
        normals: NormalMap {
            grid: *grid,
            normals,
        },
        untrusted,
    })
}

/// Heights from unit normals.
pub fn integrate_normals(nm: &NormalMap) -> Result<HeightMap> {
    let mut gx = Vec::with_capacity(nm.normals.len());
    let mut gy = Vec::with_capacity(nm.normals.len());
    for n in &nm.normals {
        if !(n[2] > 0.0) {
            return Err(Error::domain("normals must have positive z"));
        }
        gx.push(-n[0] / n[2]);
        gy.push(-n[1] / n[2]);
    }
    integrate_gradients(&gx, &gy, &nm.grid)
}

/// Heights from slope fields `∂h/∂x`, `∂h/∂y` (row-major, mm per mm).
///
/// Slopes are expected in the convention of the forward model: central
/// differences inside, one-sided differences on the border.
pub fn integrate_gradients(gx: &[f64], gy: &[f64], grid: &Grid) -> Result<HeightMap> {
    let (w, h) = (grid.width, grid.height);
    if gx.len() != w * h || gy.len() != w * h {
        return Err(Error::config("gradient fields do not match the grid"));
    }
    if w < 2 || h < 2 {
        return Err(Error::domain("need at least 2×2 pixels to integrate"));
    }
    let res = grid.resolution_mm;

    // One-sided border differences equal twice the central difference of the
    // even extension; rescale so the data is exactly that extension's gradient.
    let px = |c: usize, r: usize| {
        let v = gx[r * w + c] * res;
        if c == 0 || c == w - 1 {
            v / 2.0
        } else {
            v
        }
    };
    let py = |c: usize, r: usize| {
        let v = gy[r * w + c] * res;
        if r == 0 || r == h - 1 {
            v / 2.0
        } else {
            v
        }
    };

    // Mirror index: even extension over a period of 2n, with the sign the
    // odd (derivative) extension picks up in the reflected half.
    let mirror = |e: isize, n: usize| -> (usize, f64) {
        let p = 2 * n as isize;
        let e = e.rem_euclid(p) as usize;
        if e < n {
            (e, 1.0)
        } else {
            (2 * n - 1 - e, -1.0)
        }
    };

    let (ew, eh) = (2 * w, 2 * h);
    let mut buf = vec![Complex::new(0.0, 0.0); ew * eh];
    for er in 0..eh {
        let (r, _) = mirror(er as isize, h);
        for ec in 0..ew {
            let (c, _) = mirror(ec as isize, w);
            let (cp, sp) = mirror(ec as isize + 1, w);
            let (cm, sm) = mirror(ec as isize - 1, w);
            let (rp, tp) = mirror(er as isize + 1, h);
            let (rm, tm) = mirror(er as isize - 1, h);
            let div =
                0.5 * (sp * px(cp, r) - sm * px(cm, r)) + 0.5 * (tp * py(c, rp) - tm * py(c, rm));
            buf[er * ew + ec] = Complex::new(div, 0.0);
        }
    }

    let mut planner = FftPlanner::new();
    fft2(&mut buf, ew, eh, &mut planner, false);
    for ky in 0..eh {
        let sy = (std::f64::consts::PI * ky as f64 / h as f64).sin();
        for kx in 0..ew {
            let sx = (std::f64::consts::PI * kx as f64 / w as f64).sin();
            let lambda = -(sx * sx + sy * sy);
            let slot = &mut buf[ky * ew + kx];
            *slot = if lambda.abs() < 1e-12 {
                Complex::new(0.0, 0.0)
            } else {
                *slot / lambda
            };
        }
    }
    fft2(&mut buf, ew, eh, &mut planner, true);
    let scale = 1.0 / (ew * eh) as f64;

    let mut depths: Vec<f64> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .map(|(r, c)| buf[r * ew + c].re * scale)
        .collect();
    let border: Vec<f64> = (0..w * h)
        .filter(|&i| {
            let (c, r) = (i % w, i / w);
            c == 0 || r == 0 || c == w - 1 || r == h - 1
        })
        .map(|i| depths[i])
        .collect();
    let offset = median(border);
    depths.iter_mut().for_each(|d| *d -= offset);
    Ok(HeightMap {
        grid: *grid,
        depths,
    })
}

fn fft2(
    buf: &mut [Complex<f64>],
    w: usize,
    h: usize,
    planner: &mut FftPlanner<f64>,
    inverse: bool,
) {
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    for row in buf.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            col[r] = buf[r * w + c];
        }
        col_fft.process(&mut col);
        for r in 0..h {
            buf[r * w + c] = col[r];
        }
    }
}

/// Pixels where the gel differs visibly from the undeformed background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactMask {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
}

impl ContactMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Sizes of 8-connected components, largest first.
    pub fn component_sizes(&self) -> Vec<usize> {
        let (w, h) = (self.width, self.height);
        let mut seen = vec![false; w * h];
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for start in 0..w * h {
            if !self.mask[start] || seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let mut size = 0;
            while let Some(i) = stack.pop() {
                size += 1;
                let (c, r) = ((i % w) as isize, (i / w) as isize);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (cc, rr) = (c + dx, r + dy);
                        if cc < 0 || rr < 0 || cc >= w as isize || rr >= h as isize {
                            continue;
                        }
                        let j = rr as usize * w + cc as usize;
                        if self.mask[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
            sizes.push(size);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    pub fn largest_component(&self) -> usize {
        self.component_sizes().first().copied().unwrap_or(0)
    }
}

/// Thresholded channel-max difference from the background, then one 3×3
/// majority pass.
pub fn contact_mask(
    img: &TactileImage,
    background: &TactileImage,
    threshold: f64,
) -> Result<ContactMask> {
    if !img.same_size(background) {
        return Err(Error::config("image and background sizes differ"));
    }
    if !(threshold > 0.0) {
        return Err(Error::domain(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let (w, h) = (img.width, img.height);
    let raw: Vec<bool> = img
        .pixels
        .iter()
        .zip(&background.pixels)
        .map(|(a, b)| (0..3).map(|c| (a[c] - b[c]).abs()).fold(0.0, f64::max) > threshold)
        .collect();
    let mut mask = vec![false; w * h];
    for r in 0..h {
        for c in 0..w {
            let (mut on, mut total) = (0, 0);
            for rr in r.saturating_sub(1)..=(r + 1).min(h - 1) {
                for cc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
                    total += 1;
                    on += raw[rr * w + cc] as usize;
                }
            }
            mask[r * w + c] = 2 * on > total;
        }
    }
    Ok(ContactMask {
        width: w,
        height: h,
        mask,
    })
}
