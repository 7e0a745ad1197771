//! Desk-scale toolkit for probing buried objects in granular media.
//!
//! The crate covers five stages:
//!
//! * [`sim`]: jamming resistance on a wedge-tipped probe and its reduction
//!   under vibration, integrated into penetration runs that stop at stall.
//! * [`dsp`]: exponential smoothing and FFT fundamental-frequency extraction.
//! * [`tactile`]: forward model of the sensing gel (indentation, grain
//!   distortion, Lambertian shading under three colored lights).
//! * [`recon`]: photometric inversion back to normals, Poisson integration to
//!   heights, and contact masks.
//! * [`classify`]: nine-class synthetic corpus, augmentation, a small CNN
//!   trained from scratch, and confusion-matrix evaluation.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod dsp;
pub mod error;
pub mod recon;
pub mod seed;
pub mod sim;
pub mod tactile;

pub use error::{Error, Result};

/// Standard gravity in m/s².
pub const GRAVITY: f64 = 9.81;
