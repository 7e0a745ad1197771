use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{InteractionMode, MediumSpec, ProbeSpec};
use crate::{Error, Result};

const SHIPPED: &str = include_str!("../../data/calibration.toml");

/// Probe parameters plus per-medium force-law constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub probe: ProbeSpec,
    pub media: BTreeMap<String, MediumSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProbeFile {
    outer_diameter_m: f64,
    descent_speed_m_s: f64,
    force_limit_n: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MediumFile {
    bulk_density_kg_m3: f64,
    grain_diameter_m: f64,
    grain_length_m: f64,
    interaction: InteractionMode,
    k: f64,
    exponent: f64,
    fluidization: f64,
    onset_depth_m: f64,
    onset_extension_m: f64,
    noise_sigma_n: f64,
    ripple_n_per_gamma: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationFile {
    probe: ProbeFile,
    media: BTreeMap<String, MediumFile>,
}

impl Calibration {
    /// The calibration bundled with the crate.
    pub fn shipped() -> &'static Calibration {
        static CELL: OnceLock<Calibration> = OnceLock::new();
        CELL.get_or_init(|| {
            Calibration::from_toml_str(SHIPPED).expect("shipped calibration parses")
        })
    }

    pub fn shipped_text() -> &'static str {
        SHIPPED
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: CalibrationFile =
            toml::from_str(text).map_err(|e| Error::config(format!("calibration: {e}")))?;
        let probe = ProbeSpec::from_diameter(
            file.probe.outer_diameter_m,
            file.probe.descent_speed_m_s,
            file.probe.force_limit_n,
        );
        probe.validate()?;
        let mut media = BTreeMap::new();
        for (name, m) in file.media {
            let spec = MediumSpec {
                name: name.clone(),
                bulk_density: m.bulk_density_kg_m3,
                grain_diameter: m.grain_diameter_m,
                grain_length: m.grain_length_m,
                interaction: m.interaction,
                jamming: m.k,
                exponent: m.exponent,
                fluidization: m.fluidization,
                onset_depth: m.onset_depth_m,
                onset_extension: m.onset_extension_m,
                noise_sigma: m.noise_sigma_n,
                ripple_per_gamma: m.ripple_n_per_gamma,
            };
            spec.validate()?;
            media.insert(name, spec);
        }
        Ok(Calibration { probe, media })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn medium(&self, name: &str) -> Result<&MediumSpec> {
        self.media
            .get(name)
            .ok_or_else(|| Error::config(format!("medium {name:?} not in calibration")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_media() {
        let cal = Calibration::shipped();
        let sand = cal.medium("sand").unwrap();
        assert_eq!(sand.bulk_density, 1578.56);
        assert_eq!(sand.interaction, InteractionMode::Sticks);
        let rice = cal.medium("rice").unwrap();
        assert_eq!(rice.bulk_density, 941.48);
        assert_eq!(rice.interaction, InteractionMode::Blocks);
        assert_eq!(cal.probe.descent_speed, 0.002);
        assert!(cal.medium("gravel").is_err());
    }

    #[test]
    fn rejects_invalid_medium() {
        let bad = SHIPPED.replace("bulk_density_kg_m3 = 941.48", "bulk_density_kg_m3 = -1.0");
        assert!(Calibration::from_toml_str(&bad).is_err());
    }
}
