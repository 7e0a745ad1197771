//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export has a plain Rust counterpart in [`demo`] so the logic can be
//! tested natively; the wrappers only convert errors into `JsError`.

pub mod demo;

use wasm_bindgen::prelude::*;

pub use demo::TactileView;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// Presses a shape into the gel, shades it, then recovers depth and contact
/// from the image alone.
#[wasm_bindgen]
pub fn tactile_scene(
    shape: &str,
    rotation_deg: f64,
    press_depth_mm: f64,
    medium: &str,
    action: &str,
    seed: u32,
) -> Result<TactileView, JsError> {
    demo::tactile_scene(
        shape,
        rotation_deg,
        press_depth_mm,
        medium,
        action,
        seed as u64,
    )
    .map_err(js)
}

/// Force/depth curves for every operating voltage, as JSON.
#[wasm_bindgen]
pub fn penetration_curves(medium: &str, noise: bool, seed: u32) -> Result<String, JsError> {
    demo::penetration_curves(medium, noise, seed as u64).map_err(js)
}

/// Magnitude spectrum of a synthetic tip accelerometer recording, as JSON.
#[wasm_bindgen]
pub fn vibration_spectrum(voltage: f64, snr_db: f64, seed: u32) -> Result<String, JsError> {
    demo::vibration_spectrum(voltage, snr_db, seed as u64).map_err(js)
}
