use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::maps::HeightMap;
use crate::seed;
use crate::sim::{occlusion_fraction, ClearingAction, InteractionMode, MediumSpec};

/// Expected lodged fine grains per mm² of boundary band.
pub const STICKS_GRAIN_DENSITY: f64 = 0.6;

/// Upper bound on blocking grains placed per image.
const MAX_BLOCKING_GRAINS: usize = 64;

/// Height of a loosely resting grain relative to its pressed height.
const LOOSE_GRAIN_SCALE: f64 = 0.4;

/// Distorts or blocks an imprint with grains of `medium`.
///
/// * `Sticks`: hemispherical bumps of the grain radius are added along the
///   footprint boundary band (half-width one grain diameter). Depths never
///   decrease.
/// * `Blocks`: elongated grains are laid over the footprint until the
///   [`occlusion_fraction`] of its area is covered; the object no longer
///   touches the gel there, so covered footprint pixels take the grain's
///   profile.
/// * `Slips`: returned unchanged.
pub fn add_grains(
    hm: &HeightMap,
    medium: &MediumSpec,
    action: ClearingAction,
    seed: u64,
) -> HeightMap {
    match medium.interaction {
        InteractionMode::Slips => hm.clone(),
        InteractionMode::Sticks => stick_grains(hm, medium, seed),
        InteractionMode::Blocks => {
            block_grains(hm, medium, occlusion_fraction(medium, action, seed), seed)
        }
    }
}

fn stick_grains(hm: &HeightMap, medium: &MediumSpec, seed: u64) -> HeightMap {
    let footprint = hm.footprint();
    let (w, h) = (hm.width(), hm.height());
    let res = hm.grid.resolution_mm;
    let grain_d = medium.grain_diameter * 1e3;

    let is_fp = |c: isize, r: isize| {
        c >= 0
            && r >= 0
            && (c as usize) < w
            && (r as usize) < h
            && footprint[r as usize * w + c as usize]
    };
    let boundary: Vec<(isize, isize)> = (0..w * h)
        .filter(|&i| footprint[i])
        .map(|i| ((i % w) as isize, (i / w) as isize))
        .filter(|&(c, r)| {
            !(is_fp(c - 1, r) && is_fp(c + 1, r) && is_fp(c, r - 1) && is_fp(c, r + 1))
        })
        .collect();
    if boundary.is_empty() {
        return hm.clone();
    }

    let reach = (grain_d / res).floor() as isize;
    let mut band = vec![false; w * h];
    for &(c, r) in &boundary {
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (cc, rr) = (c + dx, r + dy);
                if cc < 0 || rr < 0 || cc as usize >= w || rr as usize >= h {
                    continue;
                }
                if ((dx * dx + dy * dy) as f64).sqrt() * res <= grain_d {
                    band[rr as usize * w + cc as usize] = true;
                }
            }
        }
    }
    let band_px: Vec<usize> = (0..w * h).filter(|&i| band[i]).collect();
    let band_area = band_px.len() as f64 * res * res;

    let mut rng = seed::rng(seed::derive(seed, &[0x57]));
    let count = Poisson::new(STICKS_GRAIN_DENSITY * band_area)
        .map(|p| p.sample(&mut rng) as usize)
        .unwrap_or(0);
    let radius = grain_d / 2.0;
    let mut bumps = vec![0.0f64; w * h];
    for _ in 0..count {
        let i = band_px[rng.random_range(0..band_px.len())];
        let (px, py) = hm.grid.center_of(i % w, i / w);
        let cx = px + rng.random_range(-0.5..0.5) * res;
        let cy = py + rng.random_range(-0.5..0.5) * res;
        stamp(hm, &mut bumps, cx, cy, radius, |dx, dy| {
            let s2 = dx * dx + dy * dy;
            (s2 < radius * radius).then(|| (radius * radius - s2).sqrt())
        });
    }
    let mut out = hm.clone();
    for (d, b) in out.depths.iter_mut().zip(&bumps) {
        *d += b;
    }
    out
}

/// Rice-like grain: ellipsoid with in-plane semi-axes (length/2, diameter/2)
/// and the given height, rotated by `angle`.
fn grain_profile(medium: &MediumSpec, angle: f64, height: f64) -> impl Fn(f64, f64) -> Option<f64> {
    let a = medium.grain_length * 1e3 / 2.0;
    let b = medium.grain_diameter * 1e3 / 2.0;
    let (sin, cos) = angle.sin_cos();
    move |dx, dy| {
        let u = (dx * cos + dy * sin) / a;
        let v = (-dx * sin + dy * cos) / b;
        let q = 1.0 - u * u - v * v;
        (q > 0.0).then(|| height * q.sqrt())
    }
}

fn block_grains(hm: &HeightMap, medium: &MediumSpec, fraction: f64, seed: u64) -> HeightMap {
    let footprint = hm.footprint();
    let fp_px: Vec<usize> = (0..footprint.len()).filter(|&i| footprint[i]).collect();
    let target = (fraction * fp_px.len() as f64).ceil() as usize;
    if fp_px.is_empty() || target == 0 {
        return hm.clone();
    }
    let w = hm.width();
    let res = hm.grid.resolution_mm;
    let height = medium.grain_diameter * 1e3 / 2.0;
    let reach = medium.grain_length * 1e3 / 2.0;

    let mut rng = seed::rng(seed::derive(seed, &[0xb10c]));
    let mut grains = vec![0.0f64; footprint.len()];
    let mut covered = 0usize;
    for _ in 0..MAX_BLOCKING_GRAINS {
        if covered >= target {
            break;
        }
        let i = fp_px[rng.random_range(0..fp_px.len())];
        let (px, py) = hm.grid.center_of(i % w, i / w);
        let cx = px + rng.random_range(-0.5..0.5) * res;
        let cy = py + rng.random_range(-0.5..0.5) * res;
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        let profile = grain_profile(medium, angle, height);
        stamp(hm, &mut grains, cx, cy, reach, profile);
        covered = fp_px.iter().filter(|&&j| grains[j] > 0.0).count();
    }

    let mut out = hm.clone();
    for (i, d) in out.depths.iter_mut().enumerate() {
        if grains[i] > 0.0 {
            *d = if footprint[i] {
                grains[i]
            } else {
                d.max(grains[i])
            };
        }
    }
    out
}

/// Scatters `count` non-touching loose grains of `medium` over the field, as
/// seen when the finger brushes through the medium without an object.
pub fn scatter_loose_grains(
    hm: &HeightMap,
    medium: &MediumSpec,
    count: usize,
    seed: u64,
) -> HeightMap {
    let (hx, hy) = hm.grid.half_extent();
    let a = medium.grain_length * 1e3 / 2.0;
    let b = medium.grain_diameter * 1e3 / 2.0;
    let margin = a + hm.grid.resolution_mm;
    let min_gap = 2.0 * a + 1.0;
    let height = b * LOOSE_GRAIN_SCALE;
    if hx <= margin || hy <= margin {
        return hm.clone();
    }

    let mut rng = seed::rng(seed::derive(seed, &[0x1005e]));
    let mut centers: Vec<(f64, f64)> = Vec::new();
    let mut grains = vec![0.0f64; hm.depths.len()];
    for _ in 0..count * 50 {
        if centers.len() == count {
            break;
        }
        let cx = rng.random_range(-hx + margin..hx - margin);
        let cy = rng.random_range(-hy + margin..hy - margin);
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        if centers
            .iter()
            .any(|&(x, y)| (x - cx).hypot(y - cy) < min_gap)
        {
            continue;
        }
        centers.push((cx, cy));
        stamp(
            hm,
            &mut grains,
            cx,
            cy,
            a,
            grain_profile(medium, angle, height),
        );
    }
    let mut out = hm.clone();
    for (d, g) in out.depths.iter_mut().zip(&grains) {
        *d = d.max(*g);
    }
    out
}

/// Max-composites `profile` (relative to `(cx, cy)`) into `acc` over the pixels within `reach` mm.
fn stamp(
    hm: &HeightMap,
    acc: &mut [f64],
    cx: f64,
    cy: f64,
    reach: f64,
    profile: impl Fn(f64, f64) -> Option<f64>,
) {
    let g = &hm.grid;
    let (hx, hy) = g.half_extent();
    let res = g.resolution_mm;
    let to_col = |x: f64| ((x + hx) / res - 0.5).floor();
    let to_row = |y: f64| ((y + hy) / res - 0.5).floor();
    let c0 = to_col(cx - reach).max(0.0) as usize;
    let c1 = (to_col(cx + reach) + 1.0).min(g.width as f64 - 1.0);
    let r0 = to_row(cy - reach).max(0.0) as usize;
    let r1 = (to_row(cy + reach) + 1.0).min(g.height as f64 - 1.0);
    if c1 < 0.0 || r1 < 0.0 {
        return;
    }
    for r in r0..=r1 as usize {
        for c in c0..=c1 as usize {
            let (x, y) = g.center_of(c, r);
            if let Some(v) = profile(x - cx, y - cy) {
                let slot = &mut acc[r * g.width + c];
                *slot = slot.max(v);
            }
        }
    }
}
