use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::tactile::TactileImage;
use crate::{Error, Result};

/// Training-time image perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub enabled: bool,
    /// Chance that a training image is perturbed at all; the rest pass through
    /// unchanged.
    pub probability: f64,
    /// Smallest crop, as a fraction of the image area. 1 disables cropping.
    pub crop_min_area: f64,
    /// Rotations are drawn from `[−max, max)` degrees. 0 disables rotation.
    pub max_rotation_deg: f64,
    /// Per-channel Gaussian noise standard deviation.
    pub noise_sigma: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            enabled: true,
            probability: 0.5,
            crop_min_area: 0.85,
            max_rotation_deg: 180.0,
            noise_sigma: 0.02,
        }
    }
}

impl AugmentConfig {
    pub const IDENTITY: AugmentConfig = AugmentConfig {
        enabled: true,
        probability: 1.0,
        crop_min_area: 1.0,
        max_rotation_deg: 0.0,
        noise_sigma: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::config(format!(
                "augment.probability must be in [0, 1], got {}",
                self.probability
            )));
        }
        if !(self.crop_min_area > 0.0 && self.crop_min_area <= 1.0) {
            return Err(Error::config(format!(
                "augment.crop_min_area must be in (0, 1], got {}",
                self.crop_min_area
            )));
        }
        if !(self.max_rotation_deg >= 0.0 && self.max_rotation_deg <= 180.0) {
            return Err(Error::config(
                "augment.max_rotation_deg must be in [0, 180]",
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("augment.noise_sigma must be non-negative"));
        }
        Ok(())
    }
}

/// With probability `cfg.probability`: random square crop resized back to
/// full size, random rotation about the center (edge pixels replicated
/// outward), then per-channel Gaussian noise. Output is clamped to [0, 1].
pub fn augment(img: &TactileImage, cfg: &AugmentConfig, rng: &mut impl Rng) -> TactileImage {
    if !cfg.enabled || rng.random::<f64>() >= cfg.probability {
        return img.clone();
    }
    let (w, h) = (img.width, img.height);
    let area = if cfg.crop_min_area < 1.0 {
        rng.random_range(cfg.crop_min_area..=1.0)
    } else {
        1.0
    };
    let scale = area.sqrt();
    let slack_x = (1.0 - scale) * w as f64 / 2.0;
    let slack_y = (1.0 - scale) * h as f64 / 2.0;
    let (ox, oy) = if slack_x > 0.0 {
        (
            rng.random_range(-slack_x..=slack_x),
            rng.random_range(-slack_y..=slack_y),
        )
    } else {
        (0.0, 0.0)
    };
    let theta = if cfg.max_rotation_deg > 0.0 {
        rng.random_range(-cfg.max_rotation_deg..cfg.max_rotation_deg)
            .to_radians()
    } else {
        0.0
    };

    let mut out = warp(img, scale, (ox, oy), theta);

    if cfg.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma).expect("finite sigma");
        for px in &mut out.pixels {
            for v in px.iter_mut() {
                *v += normal.sample(rng);
            }
        }
    }
    for px in &mut out.pixels {
        for v in px.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }
    out
}

/// Output pixel `p` samples the source at `center + offset + scale·R(θ)·(p − center)`.
fn warp(img: &TactileImage, scale: f64, offset: (f64, f64), theta: f64) -> TactileImage {
    if scale == 1.0 && theta == 0.0 && offset == (0.0, 0.0) {
        return img.clone();
    }
    let (w, h) = (img.width, img.height);
    let (sin, cos) = theta.sin_cos();
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let mut pixels = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let (u, v) = (c as f64 + 0.5 - cx, r as f64 + 0.5 - cy);
            let x = cx + offset.0 + scale * (cos * u - sin * v);
            let y = cy + offset.1 + scale * (sin * u + cos * v);
            pixels.push(bilinear(img, x - 0.5, y - 0.5));
        }
    }
    TactileImage {
        width: w,
        height: h,
        pixels,
    }
}

/// Samples at continuous pixel coordinates, clamping to the edge.
fn bilinear(img: &TactileImage, x: f64, y: f64) -> [f64; 3] {
    let x = x.clamp(0.0, (img.width - 1) as f64);
    let y = y.clamp(0.0, (img.height - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(img.width - 1), (y0 + 1).min(img.height - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let at = |c: usize, r: usize| img.pixels[r * img.width + c];
    let (a, b, c, d) = (at(x0, y0), at(x1, y0), at(x0, y1), at(x1, y1));
    std::array::from_fn(|k| {
        (1.0 - fy) * ((1.0 - fx) * a[k] + fx * b[k]) + fy * ((1.0 - fx) * c[k] + fx * d[k])
    })
}
