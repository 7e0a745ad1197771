//! Experiment configuration file (TOML).
//!
//! Every table and field is optional; missing values take the defaults shown
//! by `granusense --print-defaults`. Command-line flags override the file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use granusense::classify::{hex_sha256, DatasetConfig, Split, TrainConfig};
use granusense::sim::{Calibration, PenetrationConfig, VibrationProfile};
use serde::{Deserialize, Serialize};

use crate::run::config_error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct ExperimentConfig {
    /// Base seed for every stochastic stage.
    pub seed: u64,
    /// Output directory; defaults to `runs/<command>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Alternative calibration file; the bundled one is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<PathBuf>,
    pub penetrate: PenetrateConfig,
    pub sweep: SweepConfig,
    pub synth_accel: SynthAccelConfig,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub evaluate: EvaluateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenetrateConfig {
    pub medium: String,
    /// Vibrator drive voltage; 0 for a still probe.
    pub voltage: f64,
    pub filter_alpha: f64,
    pub simulation: PenetrationConfig,
}

impl Default for PenetrateConfig {
    fn default() -> Self {
        PenetrateConfig {
            medium: "sand".into(),
            voltage: 10.0,
            filter_alpha: 0.1,
            simulation: PenetrationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub media: Vec<String>,
    pub voltages: Vec<f64>,
    /// Smoothing factor of the exponential filter applied to force.
    pub filter_alpha: f64,
    pub simulation: PenetrationConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            media: vec!["sand".into(), "rice".into()],
            voltages: vec![0.0, 6.0, 8.0, 10.0, 12.0],
            filter_alpha: 0.1,
            simulation: PenetrationConfig::default(),
        }
    }
}

/// Synthetic accelerometer recordings of the vibrating tip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthAccelConfig {
    pub voltages: Vec<f64>,
    pub trials: usize,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub snr_db: f64,
}

impl Default for SynthAccelConfig {
    fn default() -> Self {
        SynthAccelConfig {
            voltages: vec![6.0, 8.0, 10.0, 12.0],
            trials: 2,
            sample_rate_hz: 500.0,
            duration_s: 5.0,
            snr_db: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub split: Split,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig { split: Split::Test }
    }
}

/// Vibration profile for a drive voltage, or a config error naming `field`.
pub fn profile_for(voltage: f64, field: &str) -> Result<VibrationProfile> {
    VibrationProfile::for_voltage(voltage).ok_or_else(|| {
        let known: Vec<String> = VibrationProfile::sweep()
            .iter()
            .map(|p| p.voltage.to_string())
            .collect();
        config_error(format!(
            "{field}: no vibration profile for {voltage} V (known: {})",
            known.join(", ")
        ))
    })
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the resolved configuration as TOML. The output directory is
    /// excluded so identical experiments written to different places share a
    /// hash.
    pub fn hash(&self) -> String {
        let cfg = ExperimentConfig {
            out: None,
            ..self.clone()
        };
        hex_sha256(cfg.to_toml().as_bytes())
    }

    pub fn calibration(&self) -> Result<Calibration> {
        match &self.calibration {
            Some(p) => Ok(Calibration::load(p)?),
            None => Ok(Calibration::shipped().clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cal = self.calibration()?;
        for (i, m) in self.sweep.media.iter().enumerate() {
            cal.medium(m).with_context(|| format!("sweep.media[{i}]"))?;
        }
        for (i, &v) in self.sweep.voltages.iter().enumerate() {
            profile_for(v, &format!("sweep.voltages[{i}]"))?;
        }
        cal.medium(&self.penetrate.medium)
            .context("penetrate.medium")?;
        profile_for(self.penetrate.voltage, "penetrate.voltage")?;
        for a in [self.sweep.filter_alpha, self.penetrate.filter_alpha] {
            if !(a > 0.0 && a <= 1.0) {
                return Err(config_error(format!(
                    "filter_alpha must be in (0, 1], got {a}"
                )));
            }
        }
        for (i, &v) in self.synth_accel.voltages.iter().enumerate() {
            let p = profile_for(v, &format!("synth_accel.voltages[{i}]"))?;
            if p.is_off() {
                return Err(config_error(format!(
                    "synth_accel.voltages[{i}]: a still probe has no tone"
                )));
            }
        }
        if self.synth_accel.trials == 0
            || !(self.synth_accel.sample_rate_hz > 0.0 && self.synth_accel.duration_s > 0.0)
        {
            return Err(config_error(
                "synth_accel needs trials ≥ 1 and positive rate and duration".to_string(),
            ));
        }
        self.dataset.validate()?;
        self.train.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let back: ExperimentConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn documented_defaults_match_builtin() {
        let cfg: ExperimentConfig = toml::from_str(crate::cli::DEFAULTS_TOML).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let cfg: ExperimentConfig = toml::from_str("seed = 9\n[train]\nepochs = 3\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.batch_size, 64);
        assert_eq!(cfg.dataset, DatasetConfig::default());
    }

    #[test]
    fn unknown_voltage_names_field() {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep.voltages = vec![0.0, 7.0];
        let err = format!("{:#}", cfg.validate().unwrap_err());
        assert!(
            err.contains("sweep.voltages[1]") && err.contains("7 V"),
            "{err}"
        );
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("[train]\nepoch = 3\n").is_err());
    }
}
