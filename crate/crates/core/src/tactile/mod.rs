//! Forward model of the sensing gel.
//!
//! An object is pressed into the gel ([`press_shape`]), grains of the
//! surrounding medium may distort or hide the imprint ([`add_grains`]), and
//! the deformed surface is shaded by three colored directional lights
//! ([`shade`]). [`render`] chains the stages.

mod grains;
pub mod io;
mod lighting;
mod maps;
mod press;
mod shape;

pub use grains::{add_grains, scatter_loose_grains, STICKS_GRAIN_DENSITY};
pub use lighting::{shade, LightingModel, MAX_CONDITION};
pub use maps::{angle_deg, Grid, HeightMap, NormalMap, TactileImage};
pub use press::{normals_from_heightmap, press_shape};
pub use shape::{Pose, ShapeKind, ShapeSpec, GEL_THICKNESS_MM};

use crate::sim::{ClearingAction, MediumSpec};
use crate::Result;

/// Geometry behind a rendered image, kept for ground-truth comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub heightmap: HeightMap,
    pub image: TactileImage,
}

/// press → grains (when a medium is given) → normals → shading.
pub fn render_scene(
    shape: &ShapeSpec,
    medium: Option<&MediumSpec>,
    action: ClearingAction,
    lighting: &LightingModel,
    grid: &Grid,
    seed: u64,
) -> Result<Scene> {
    lighting.validate()?;
    let mut hm = press_shape(shape, grid)?;
    if let Some(m) = medium {
        hm = add_grains(&hm, m, action, seed);
    }
    let image = shade(&normals_from_heightmap(&hm), lighting);
    Ok(Scene {
        heightmap: hm,
        image,
    })
}

pub fn render(
    shape: &ShapeSpec,
    medium: Option<&MediumSpec>,
    action: ClearingAction,
    lighting: &LightingModel,
    grid: &Grid,
    seed: u64,
) -> Result<TactileImage> {
    render_scene(shape, medium, action, lighting, grid, seed).map(|s| s.image)
}

/// The undeformed gel.
pub fn background(lighting: &LightingModel, grid: &Grid) -> TactileImage {
    shade(&NormalMap::flat(*grid), lighting)
}
