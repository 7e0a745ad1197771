use granusense::dsp::{spectral_peak, spectrum, synth_tone};
use granusense::recon::{
    contact_mask, integrate_normals, normals_from_image, DEFAULT_CONTACT_THRESHOLD,
};
use granusense::sim::{
    analytic_stall_depth, dimensionless_acceleration, simulate_penetration, Calibration,
    ClearingAction, PenetrationConfig, VibrationProfile,
};
use granusense::tactile::{
    background, render_scene, Grid, LightingModel, Pose, ShapeKind, ShapeSpec,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Most points drawn per force curve.
const MAX_CURVE_POINTS: usize = 400;
const ACCEL_SAMPLE_RATE: f64 = 500.0;
const ACCEL_DURATION: f64 = 5.0;

/// Rendered and recovered views of one scene. Images are RGBA, row-major.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct TactileView {
    width: usize,
    height: usize,
    image: Vec<u8>,
    depth: Vec<u8>,
    contact: Vec<u8>,
    contact_pixels: usize,
    true_depth_mm: f64,
    recovered_depth_mm: f64,
}

#[wasm_bindgen]
impl TactileView {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Shaded gel as the camera sees it.
    pub fn image_rgba(&self) -> Vec<u8> {
        self.image.clone()
    }

    /// Depth recovered from the image, white = deepest.
    pub fn depth_rgba(&self) -> Vec<u8> {
        self.depth.clone()
    }

    /// Contact mask from the image difference against the flat gel.
    pub fn contact_rgba(&self) -> Vec<u8> {
        self.contact.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn contact_pixels(&self) -> usize {
        self.contact_pixels
    }

    #[wasm_bindgen(getter)]
    pub fn true_depth_mm(&self) -> f64 {
        self.true_depth_mm
    }

    #[wasm_bindgen(getter)]
    pub fn recovered_depth_mm(&self) -> f64 {
        self.recovered_depth_mm
    }
}

fn shape_kind(name: &str) -> Result<ShapeKind, String> {
    ShapeKind::ALL
        .into_iter()
        .find(|k| k.name().eq_ignore_ascii_case(name))
        .ok_or_else(|| format!("unknown shape {name:?}"))
}

fn clearing_action(name: &str) -> Result<ClearingAction, String> {
    match name {
        "none" => Ok(ClearingAction::None),
        "vibrate" => Ok(ClearingAction::Vibrate),
        "twist" => Ok(ClearingAction::Twist),
        _ => Err(format!("unknown clearing action {name:?}")),
    }
}

fn gray(v: f64) -> [u8; 4] {
    let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    [g, g, g, 255]
}

pub fn tactile_scene(
    shape: &str,
    rotation_deg: f64,
    press_depth_mm: f64,
    medium: &str,
    action: &str,
    seed: u64,
) -> Result<TactileView, String> {
    let spec = ShapeSpec::new(
        shape_kind(shape)?,
        10.0,
        Pose {
            x_mm: 0.0,
            y_mm: 0.0,
            rotation_deg,
        },
        press_depth_mm,
    );
    let medium = match medium {
        "none" => None,
        name => Some(
            Calibration::shipped()
                .medium(name)
                .map_err(|e| e.to_string())?,
        ),
    };
    let grid = Grid::default();
    let lighting = LightingModel::default();
    let scene = render_scene(
        &spec,
        medium,
        clearing_action(action)?,
        &lighting,
        &grid,
        seed,
    )
    .map_err(|e| e.to_string())?;
    let bg = background(&lighting, &grid);

    let est = normals_from_image(&scene.image, &lighting, &bg, &grid).map_err(|e| e.to_string())?;
    let recovered = integrate_normals(&est.normals).map_err(|e| e.to_string())?;
    let deepest = recovered.depths.iter().cloned().fold(0.0, f64::max);
    let scale = if deepest > 0.0 { 1.0 / deepest } else { 0.0 };
    let mask =
        contact_mask(&scene.image, &bg, DEFAULT_CONTACT_THRESHOLD).map_err(|e| e.to_string())?;

    Ok(TactileView {
        width: grid.width,
        height: grid.height,
        image: scene
            .image
            .to_rgb8()
            .chunks(3)
            .flat_map(|p| [p[0], p[1], p[2], 255])
            .collect(),
        depth: recovered
            .depths
            .iter()
            .flat_map(|d| gray(d * scale))
            .collect(),
        contact: mask
            .mask
            .iter()
            .flat_map(|&m| gray(if m { 1.0 } else { 0.0 }))
            .collect(),
        contact_pixels: mask.count(),
        true_depth_mm: scene.heightmap.max_depth(),
        recovered_depth_mm: deepest,
    })
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub voltage: f64,
    pub gamma: f64,
    /// Depth in mm and force in N, decimated.
    pub depth_mm: Vec<f64>,
    pub force_n: Vec<f64>,
    pub stall_depth_mm: Option<f64>,
    pub analytic_stall_mm: Option<f64>,
}

pub fn penetration_curves(medium: &str, noise: bool, seed: u64) -> Result<String, String> {
    let cal = Calibration::shipped();
    let m = cal.medium(medium).map_err(|e| e.to_string())?;
    let cfg = PenetrationConfig {
        noise,
        ripple: noise,
        ..Default::default()
    };
    let mut curves = Vec::new();
    for (i, vib) in VibrationProfile::sweep().into_iter().enumerate() {
        let trace = simulate_penetration(m, &cal.probe, &vib, &cfg, seed.wrapping_add(i as u64))
            .map_err(|e| e.to_string())?;
        let stride = trace.samples.len().div_ceil(MAX_CURVE_POINTS).max(1);
        let kept: Vec<_> = trace.samples.iter().step_by(stride).collect();
        curves.push(Curve {
            voltage: vib.voltage,
            gamma: dimensionless_acceleration(&vib),
            depth_mm: kept.iter().map(|s| s.depth * 1e3).collect(),
            force_n: kept.iter().map(|s| s.force).collect(),
            stall_depth_mm: trace.stall_depth.map(|d| d * 1e3),
            analytic_stall_mm: analytic_stall_depth(m, &cal.probe, &vib).map(|d| d * 1e3),
        });
    }
    serde_json::to_string(&curves).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct SpectrumView {
    pub true_hz: f64,
    pub estimated_hz: f64,
    pub amplitude: f64,
    pub frequency_hz: Vec<f64>,
    /// Single-sided magnitude in dB relative to the largest bin.
    pub magnitude_db: Vec<f64>,
}

pub fn vibration_spectrum(voltage: f64, snr_db: f64, seed: u64) -> Result<String, String> {
    let vib = VibrationProfile::for_voltage(voltage)
        .filter(|v| !v.is_off())
        .ok_or_else(|| format!("no measured vibration at {voltage} V"))?;
    let x = synth_tone(
        vib.frequency,
        vib.accel_amplitude,
        ACCEL_SAMPLE_RATE,
        ACCEL_DURATION,
        snr_db,
        seed,
    )
    .map_err(|e| e.to_string())?;
    let peak = spectral_peak(&x).map_err(|e| e.to_string())?;
    let n = x.values.len();
    let mags: Vec<f64> = spectrum(&x.values)[..n / 2 + 1]
        .iter()
        .map(|c| c.norm())
        .collect();
    let top = mags.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    let view = SpectrumView {
        true_hz: vib.frequency,
        estimated_hz: peak.frequency,
        amplitude: peak.amplitude,
        frequency_hz: (0..mags.len())
            .map(|k| k as f64 * ACCEL_SAMPLE_RATE / n as f64)
            .collect(),
        magnitude_db: mags
            .iter()
            .map(|m| 20.0 * (m.max(top * 1e-6) / top).log10())
            .collect(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}
