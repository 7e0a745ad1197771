use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::maps::{NormalMap, TactileImage};
use crate::{Error, Result};

/// Largest acceptable condition number of the light direction matrix.
pub const MAX_CONDITION: f64 = 100.0;

/// One effective directional light per color channel (R, G, B).
///
/// The sensor excites red and green fluorescent paint with blue LEDs; only the
/// net directional response of each channel matters, so each is modeled as a
/// single distant light.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightingModel {
    /// Unit directions toward each light, rows R, G, B.
    pub directions: [[f64; 3]; 3],
    pub intensities: [f64; 3],
    pub ambient: [f64; 3],
}

impl Default for LightingModel {
    /// Three lights 120° apart in azimuth at 45° elevation.
    fn default() -> Self {
        LightingModel::ring(45.0, [90.0, 210.0, 330.0], [0.8; 3], [0.1; 3])
    }
}

impl LightingModel {
    pub fn ring(
        elevation_deg: f64,
        azimuths_deg: [f64; 3],
        intensities: [f64; 3],
        ambient: [f64; 3],
    ) -> Self {
        let el = elevation_deg.to_radians();
        let directions = azimuths_deg.map(|az| {
            let az = az.to_radians();
            [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
        });
        LightingModel {
            directions,
            intensities,
            ambient,
        }
    }

    pub fn direction_matrix(&self) -> Matrix3<f64> {
        let d = &self.directions;
        Matrix3::new(
            d[0][0], d[0][1], d[0][2], d[1][0], d[1][1], d[1][2], d[2][0], d[2][1], d[2][2],
        )
    }

    /// Direction matrix with each row scaled by its channel intensity.
    pub fn response_matrix(&self) -> Matrix3<f64> {
        let mut m = self.direction_matrix();
        for c in 0..3 {
            m.row_mut(c).scale_mut(self.intensities[c]);
        }
        m
    }

    pub fn condition_number(&self) -> f64 {
        let sv = self.direction_matrix().singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (c, d) in self.directions.iter().enumerate() {
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!(
                    "light {c} direction is not unit length ({norm})"
                )));
            }
        }
        if !self.intensities.iter().all(|&i| i > 0.0 && i.is_finite()) {
            return Err(Error::config("light intensities must be positive"));
        }
        if !self.ambient.iter().all(|a| a.is_finite()) {
            return Err(Error::config("ambient levels must be finite"));
        }
        let cond = self.condition_number();
        if !(cond < MAX_CONDITION) {
            return Err(Error::config(format!(
                "light directions are nearly dependent (condition number {cond:.1} ≥ {MAX_CONDITION})"
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("lighting serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let model: LightingModel =
            toml::from_str(text).map_err(|e| Error::config(format!("lighting: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Channel values for one normal, before clamping.
    pub fn response(&self, n: &[f64; 3]) -> [f64; 3] {
        std::array::from_fn(|c| {
            let d = &self.directions[c];
            let cos = n[0] * d[0] + n[1] * d[1] + n[2] * d[2];
            self.ambient[c] + self.intensities[c] * cos.max(0.0)
        })
    }
}

/// Lambertian shading, clamped to [0, 1].
pub fn shade(nm: &NormalMap, lighting: &LightingModel) -> TactileImage {
    TactileImage {
        width: nm.width(),
        height: nm.height(),
        pixels: nm
            .normals
            .iter()
            .map(|n| lighting.response(n).map(|v| v.clamp(0.0, 1.0)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tactile::Grid;

    #[test]
    fn default_is_well_conditioned() {
        let l = LightingModel::default();
        l.validate().unwrap();
        assert!(l.condition_number() < 3.0);
    }

    #[test]
    fn degenerate_directions_rejected() {
        let l = LightingModel::ring(45.0, [90.0, 90.0, 330.0], [0.8; 3], [0.1; 3]);
        assert!(matches!(l.validate(), Err(Error::Config(_))));
        let overhead = LightingModel::ring(89.9, [0.0, 120.0, 240.0], [0.8; 3], [0.1; 3]);
        assert!(overhead.validate().is_err());
    }

    #[test]
    fn flat_gel_is_uniform() {
        let img = shade(
            &NormalMap::flat(Grid::new(8, 8, 0.25)),
            &LightingModel::default(),
        );
        assert!(img.pixels.iter().all(|p| *p == img.pixels[0]));
    }

    #[test]
    fn normal_along_light_gives_full_intensity() {
        let l = LightingModel::default();
        let mut nm = NormalMap::flat(Grid::new(2, 1, 0.25));
        nm.normals[0] = l.directions[0];
        let img = shade(&nm, &l);
        let expected = (l.ambient[0] + l.intensities[0]).clamp(0.0, 1.0);
        assert!((img.pixels[0][0] - expected).abs() < 1e-12);
    }

    #[test]
    fn toml_round_trip() {
        let l = LightingModel::default();
        assert_eq!(LightingModel::from_toml_str(&l.to_toml()).unwrap(), l);
    }
}
