//! Granular jamming resistance and vibration-assisted penetration.
//!
//! The probe descends at constant speed. Past an onset depth the medium
//! jams and resistance grows as a power of the excess depth; vibration both
//! delays the onset and divides the resistance by `1 + c·Γ`, where Γ is the
//! dimensionless acceleration of the tip.

mod calibration;
mod occlusion;
mod trace;

pub use calibration::Calibration;
pub use occlusion::{occlusion_fraction, ClearingAction, STICKS_BOUNDARY_FRACTION};
pub use trace::{ForceSample, ForceTrace};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result, GRAVITY};

/// How grains behave when trapped between the gel and a buried object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionMode {
    /// Fine grains lodge permanently and distort the imprint boundary (sand).
    Sticks,
    /// Grains comparable to the object can hide it entirely (rice).
    Blocks,
    /// Slippery grains squeeze out and leave no trace (lentils, mung beans).
    Slips,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    pub name: String,
    pub bulk_density: f64,
    /// Minor grain diameter, m.
    pub grain_diameter: f64,
    /// Major grain length, m. Equal to `grain_diameter` for round grains.
    pub grain_length: f64,
    pub interaction: InteractionMode,
    /// Jamming coefficient `k`.
    pub jamming: f64,
    /// Power-law exponent of excess depth.
    pub exponent: f64,
    /// Fluidization constant `c` in `1 + c·Γ`.
    pub fluidization: f64,
    /// Onset depth with the vibrator off, m.
    pub onset_depth: f64,
    /// Additional onset depth at saturated vibration (Γ ≥ 1), m.
    pub onset_extension: f64,
    /// Standard deviation of additive force-sensor noise, N.
    pub noise_sigma: f64,
    /// Force ripple amplitude per unit Γ, N.
    pub ripple_per_gamma: f64,
}

impl MediumSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bulk_density", self.bulk_density),
            ("grain_diameter", self.grain_diameter),
            ("grain_length", self.grain_length),
            ("k", self.jamming),
            ("exponent", self.exponent),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!(
                    "{}: {field} must be positive, got {v}",
                    self.name
                )));
            }
        }
        let non_negative = [
            ("fluidization", self.fluidization),
            ("onset_depth", self.onset_depth),
            ("onset_extension", self.onset_extension),
            ("noise_sigma", self.noise_sigma),
            ("ripple_per_gamma", self.ripple_per_gamma),
        ];
        for (field, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(format!(
                    "{}: {field} must be non-negative, got {v}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Sand from the shipped calibration.
    pub fn sand() -> Self {
        Calibration::shipped()
            .medium("sand")
            .expect("shipped sand")
            .clone()
    }

    /// Rice from the shipped calibration.
    pub fn rice() -> Self {
        Calibration::shipped()
            .medium("rice")
            .expect("shipped rice")
            .clone()
    }
}

/// Vibration at the probe tip for one motor operating voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VibrationProfile {
    pub voltage: f64,
    pub frequency: f64,
    pub accel_amplitude: f64,
}

/// Motor rated 18000 rpm at 12 V.
pub const MAX_VIBRATION_HZ: f64 = 300.0;

/// Measured tip vibration per operating voltage.
pub const MEASURED_PROFILES: [VibrationProfile; 4] = [
    VibrationProfile {
        voltage: 6.0,
        frequency: 156.0,
        accel_amplitude: 9.6,
    },
    VibrationProfile {
        voltage: 8.0,
        frequency: 189.0,
        accel_amplitude: 19.8,
    },
    VibrationProfile {
        voltage: 10.0,
        frequency: 213.0,
        accel_amplitude: 23.6,
    },
    VibrationProfile {
        voltage: 12.0,
        frequency: 172.0,
        accel_amplitude: 14.7,
    },
];

impl VibrationProfile {
    pub const OFF: VibrationProfile = VibrationProfile {
        voltage: 0.0,
        frequency: 0.0,
        accel_amplitude: 0.0,
    };

    /// Looks up the measured profile for an operating voltage (0 = off).
    pub fn for_voltage(voltage: f64) -> Option<Self> {
        if voltage == 0.0 {
            return Some(Self::OFF);
        }
        MEASURED_PROFILES
            .iter()
            .copied()
            .find(|p| p.voltage == voltage)
    }

    /// Off plus every measured profile, in increasing voltage.
    pub fn sweep() -> Vec<Self> {
        std::iter::once(Self::OFF)
            .chain(MEASURED_PROFILES)
            .collect()
    }

    pub fn is_off(&self) -> bool {
        self.voltage == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency >= 0.0 && self.accel_amplitude >= 0.0) {
            return Err(Error::domain(
                "vibration frequency and amplitude must be non-negative",
            ));
        }
        if self.frequency > MAX_VIBRATION_HZ {
            return Err(Error::domain(format!(
                "vibration frequency {} Hz exceeds the motor limit of {MAX_VIBRATION_HZ} Hz",
                self.frequency
            )));
        }
        if self.is_off() && (self.frequency != 0.0 || self.accel_amplitude != 0.0) {
            return Err(Error::domain(
                "0 V profile must have zero frequency and amplitude",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    /// Effective cross-section of the tip, m².
    pub tip_area: f64,
    pub descent_speed: f64,
    /// Force at which the arm stalls, N. `f64::INFINITY` disables stalling.
    pub force_limit: f64,
}

impl ProbeSpec {
    pub fn from_diameter(outer_diameter: f64, descent_speed: f64, force_limit: f64) -> Self {
        let r = outer_diameter / 2.0;
        ProbeSpec {
            tip_area: std::f64::consts::PI * r * r,
            descent_speed,
            force_limit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tip_area > 0.0 && self.descent_speed > 0.0 && self.force_limit > 0.0) {
            return Err(Error::domain(
                "probe tip area, descent speed and force limit must be positive",
            ));
        }
        Ok(())
    }
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Calibration::shipped().probe
    }
}

/// Γ = acceleration amplitude / g.
pub fn dimensionless_acceleration(v: &VibrationProfile) -> f64 {
    v.accel_amplitude.max(0.0) / GRAVITY
}

/// Depth at which jamming resistance begins.
pub fn onset_depth(medium: &MediumSpec, vib: &VibrationProfile) -> f64 {
    if vib.is_off() {
        medium.onset_depth
    } else {
        let gamma = dimensionless_acceleration(vib);
        medium.onset_depth + medium.onset_extension * gamma.min(1.0)
    }
}

/// Quasi-static resistance on the probe at `depth`, without noise or ripple.
pub fn resistance_force(
    depth: f64,
    medium: &MediumSpec,
    probe: &ProbeSpec,
    vib: &VibrationProfile,
) -> Result<f64> {
    if !(depth >= 0.0) {
        return Err(Error::domain(format!(
            "depth must be non-negative, got {depth}"
        )));
    }
    let z_on = onset_depth(medium, vib);
    if depth <= z_on {
        return Ok(0.0);
    }
    let gamma = dimensionless_acceleration(vib);
    let jammed = medium.jamming * medium.bulk_density * GRAVITY * probe.tip_area;
    Ok(jammed * (depth - z_on).powf(medium.exponent) / (1.0 + medium.fluidization * gamma))
}

/// Depth at which the noise-free force reaches the probe's limit.
pub fn analytic_stall_depth(
    medium: &MediumSpec,
    probe: &ProbeSpec,
    vib: &VibrationProfile,
) -> Option<f64> {
    if !probe.force_limit.is_finite() {
        return None;
    }
    let gamma = dimensionless_acceleration(vib);
    let jammed = medium.jamming * medium.bulk_density * GRAVITY * probe.tip_area;
    let excess = (probe.force_limit * (1.0 + medium.fluidization * gamma) / jammed)
        .powf(1.0 / medium.exponent);
    Some(onset_depth(medium, vib) + excess)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenetrationConfig {
    /// Deepest commanded depth, m. Defaults to the 6 inch bed.
    pub max_depth: f64,
    /// Force sampling rate, Hz.
    pub sample_rate: f64,
    /// Adds the medium's sensor noise.
    pub noise: bool,
    /// Adds the vibration ripple.
    pub ripple: bool,
}

impl Default for PenetrationConfig {
    fn default() -> Self {
        PenetrationConfig {
            max_depth: 0.1524,
            sample_rate: 500.0,
            noise: true,
            ripple: true,
        }
    }
}

/// Runs a constant-speed descent until stall or `cfg.max_depth`.
pub fn simulate_penetration(
    medium: &MediumSpec,
    probe: &ProbeSpec,
    vib: &VibrationProfile,
    cfg: &PenetrationConfig,
    noise_seed: u64,
) -> Result<ForceTrace> {
    medium.validate()?;
    probe.validate()?;
    vib.validate()?;
    if !(cfg.max_depth > 0.0 && cfg.sample_rate > 0.0) {
        return Err(Error::domain("max_depth and sample_rate must be positive"));
    }

    let mut rng = seed::rng(noise_seed);
    let noise = Normal::new(0.0, medium.noise_sigma).map_err(|e| Error::domain(e.to_string()))?;
    let gamma = dimensionless_acceleration(vib);
    let ripple_amp = if cfg.ripple {
        medium.ripple_per_gamma * gamma
    } else {
        0.0
    };
    let omega = 2.0 * std::f64::consts::PI * vib.frequency;

    let dt = 1.0 / cfg.sample_rate;
    let n_max = (cfg.max_depth / (probe.descent_speed * dt) + 1e-9).floor() as usize;
    let mut samples = Vec::with_capacity(n_max + 1);
    let mut stall_depth = None;

    for i in 0..=n_max {
        let time = i as f64 * dt;
        let depth = probe.descent_speed * time;
        let mut force = resistance_force(depth, medium, probe, vib)?;
        if force > 0.0 {
            force += ripple_amp * (omega * time).sin();
        }
        if cfg.noise {
            force += noise.sample(&mut rng);
        }
        let force = force.max(0.0);
        samples.push(ForceSample { time, depth, force });
        if force >= probe.force_limit {
            stall_depth = Some(depth);
            break;
        }
    }

    Ok(ForceTrace {
        samples,
        stalled: stall_depth.is_some(),
        stall_depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p10() -> VibrationProfile {
        VibrationProfile::for_voltage(10.0).unwrap()
    }

    #[test]
    fn gamma_of_measured_profiles() {
        let p6 = VibrationProfile::for_voltage(6.0).unwrap();
        assert_relative_eq!(dimensionless_acceleration(&p6), 0.979, epsilon = 5e-4);
        assert_relative_eq!(dimensionless_acceleration(&p10()), 2.406, epsilon = 5e-4);
        assert_eq!(dimensionless_acceleration(&VibrationProfile::OFF), 0.0);
    }

    #[test]
    fn zero_force_above_onset() {
        let probe = ProbeSpec::default();
        for m in [MediumSpec::sand(), MediumSpec::rice()] {
            assert_eq!(
                resistance_force(0.0, &m, &probe, &VibrationProfile::OFF).unwrap(),
                0.0
            );
            assert_eq!(resistance_force(0.0, &m, &probe, &p10()).unwrap(), 0.0);
        }
    }

    #[test]
    fn negative_depth_is_domain_error() {
        let err = resistance_force(
            -1e-3,
            &MediumSpec::sand(),
            &ProbeSpec::default(),
            &VibrationProfile::OFF,
        );
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn vibration_reduces_force_at_depth() {
        let sand = MediumSpec::sand();
        let probe = ProbeSpec::default();
        let mut last = f64::INFINITY;
        // Γ ∈ {0, 0.98, 2.02, 2.406}
        for v in [0.0, 6.0, 8.0, 10.0] {
            let f = resistance_force(
                0.10,
                &sand,
                &probe,
                &VibrationProfile::for_voltage(v).unwrap(),
            )
            .unwrap();
            assert!(f < last, "{v} V: {f} !< {last}");
            last = f;
        }
    }

    #[test]
    fn onset_shift_matches_calibration() {
        let rice = MediumSpec::rice();
        let shift = onset_depth(&rice, &p10()) - onset_depth(&rice, &VibrationProfile::OFF);
        assert_relative_eq!(shift, 0.04, epsilon = 1e-12);
    }

    #[test]
    fn rice_stall_roughly_doubles_with_vibration() {
        let rice = MediumSpec::rice();
        let probe = ProbeSpec::default();
        let cfg = PenetrationConfig::default();
        let off = simulate_penetration(&rice, &probe, &VibrationProfile::OFF, &cfg, 1).unwrap();
        let on = simulate_penetration(&rice, &probe, &p10(), &cfg, 1).unwrap();
        assert!(off.stalled && on.stalled);
        let ratio = on.stall_depth.unwrap() / off.stall_depth.unwrap();
        assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn unlimited_force_reaches_max_depth() {
        let probe = ProbeSpec {
            force_limit: f64::INFINITY,
            ..ProbeSpec::default()
        };
        let cfg = PenetrationConfig::default();
        let trace =
            simulate_penetration(&MediumSpec::sand(), &probe, &VibrationProfile::OFF, &cfg, 3)
                .unwrap();
        assert!(!trace.stalled);
        assert_eq!(trace.stall_depth, None);
        let last = trace.samples.last().unwrap().depth;
        assert_relative_eq!(last, cfg.max_depth, epsilon = 1e-9);
    }

    #[test]
    fn same_seed_same_trace() {
        let cfg = PenetrationConfig::default();
        let probe = ProbeSpec::default();
        let a = simulate_penetration(&MediumSpec::sand(), &probe, &p10(), &cfg, 42).unwrap();
        let b = simulate_penetration(&MediumSpec::sand(), &probe, &p10(), &cfg, 42).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        let c = simulate_penetration(&MediumSpec::sand(), &probe, &p10(), &cfg, 43).unwrap();
        assert_ne!(a.to_csv_string(), c.to_csv_string());
    }

    #[test]
    fn trace_invariants() {
        let cfg = PenetrationConfig::default();
        let t = simulate_penetration(&MediumSpec::rice(), &ProbeSpec::default(), &p10(), &cfg, 9)
            .unwrap();
        assert!(t.samples.windows(2).all(|w| w[1].depth >= w[0].depth));
        assert!(t.samples.iter().all(|s| s.force >= 0.0));
        assert_eq!(t.stalled, t.stall_depth.is_some());
    }

    #[test]
    fn profile_validation() {
        assert!(VibrationProfile::for_voltage(7.0).is_none());
        let too_fast = VibrationProfile {
            voltage: 12.0,
            frequency: 320.0,
            accel_amplitude: 1.0,
        };
        assert!(too_fast.validate().is_err());
        let bad_off = VibrationProfile {
            voltage: 0.0,
            frequency: 10.0,
            accel_amplitude: 0.0,
        };
        assert!(bad_off.validate().is_err());
        for p in VibrationProfile::sweep() {
            p.validate().unwrap();
        }
    }
}
