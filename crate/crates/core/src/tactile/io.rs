//! PNG persistence for images and maps.

use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma, Rgb};
use serde::{Deserialize, Serialize};

use super::maps::{Grid, HeightMap, NormalMap, TactileImage};
use crate::{Error, Result};

/// Default height quantum for 16-bit height PNGs: 0.1 µm per unit.
pub const DEFAULT_MM_PER_UNIT: f64 = 1e-4;

/// Sidecar record that gives a 16-bit height PNG its physical scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightPngMeta {
    pub width: usize,
    pub height: usize,
    pub resolution_mm: f64,
    pub mm_per_unit: f64,
}

fn encode<P, C>(buf: ImageBuffer<P, C>) -> Vec<u8>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .expect("png encode to memory");
    out.into_inner()
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn image_to_png(img: &TactileImage) -> Vec<u8> {
    let buf: ImageBuffer<Rgb<u8>, _> =
        ImageBuffer::from_raw(img.width as u32, img.height as u32, img.to_rgb8())
            .expect("buffer size");
    encode(buf)
}

/// Decodes a PNG to `(width, height, interleaved RGB bytes)`.
pub fn rgb8_from_png(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| {
        Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    })?;
    let rgb = decoded.to_rgb8();
    Ok((rgb.width() as usize, rgb.height() as usize, rgb.into_raw()))
}

pub fn image_from_png(bytes: &[u8], path: &Path) -> Result<TactileImage> {
    let (w, h, raw) = rgb8_from_png(bytes, path)?;
    Ok(TactileImage::from_rgb8(w, h, &raw))
}

pub fn save_image(img: &TactileImage, path: &Path) -> Result<()> {
    write_bytes(path, &image_to_png(img))
}

pub fn load_image(path: &Path) -> Result<TactileImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    image_from_png(&bytes, path)
}

/// Single-channel 16-bit PNG; depths are rounded to multiples of `mm_per_unit`.
pub fn heightmap_to_png(hm: &HeightMap, mm_per_unit: f64) -> (Vec<u8>, HeightPngMeta) {
    let units: Vec<u16> = hm
        .depths
        .iter()
        .map(|d| (d / mm_per_unit).round().clamp(0.0, u16::MAX as f64) as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, _> =
        ImageBuffer::from_raw(hm.width() as u32, hm.height() as u32, units).expect("buffer size");
    let meta = HeightPngMeta {
        width: hm.width(),
        height: hm.height(),
        resolution_mm: hm.grid.resolution_mm,
        mm_per_unit,
    };
    (encode(buf), meta)
}

pub fn heightmap_from_png(bytes: &[u8], meta: &HeightPngMeta, path: &Path) -> Result<HeightMap> {
    let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| {
        Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    })?;
    let gray = decoded.to_luma16();
    if gray.width() as usize != meta.width || gray.height() as usize != meta.height {
        return Err(Error::config(format!(
            "{}: image is {}×{}, sidecar says {}×{}",
            path.display(),
            gray.width(),
            gray.height(),
            meta.width,
            meta.height
        )));
    }
    Ok(HeightMap {
        grid: Grid::new(meta.width, meta.height, meta.resolution_mm),
        depths: gray
            .as_raw()
            .iter()
            .map(|&u| u as f64 * meta.mm_per_unit)
            .collect(),
    })
}

/// Writes `path` and a `path.json` sidecar.
pub fn save_heightmap(hm: &HeightMap, path: &Path) -> Result<()> {
    let (png, meta) = heightmap_to_png(hm, DEFAULT_MM_PER_UNIT);
    write_bytes(path, &png)?;
    let sidecar = path.with_extension("json");
    write_bytes(
        &sidecar,
        serde_json::to_string_pretty(&meta)
            .expect("meta json")
            .as_bytes(),
    )
}

pub fn load_heightmap(path: &Path) -> Result<HeightMap> {
    let sidecar = path.with_extension("json");
    let meta_text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let meta: HeightPngMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
        path: sidecar.clone(),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    heightmap_from_png(&bytes, &meta, path)
}

/// Three-channel PNG with each component mapped `[-1, 1] → [0, 255]`.
pub fn normalmap_to_png(nm: &NormalMap) -> Vec<u8> {
    let bytes: Vec<u8> = nm
        .normals
        .iter()
        .flat_map(|n| n.map(|v| ((v.clamp(-1.0, 1.0) + 1.0) / 2.0 * 255.0).round() as u8))
        .collect();
    let buf: ImageBuffer<Rgb<u8>, _> =
        ImageBuffer::from_raw(nm.width() as u32, nm.height() as u32, bytes).expect("buffer size");
    encode(buf)
}

pub fn save_normalmap(nm: &NormalMap, path: &Path) -> Result<()> {
    write_bytes(path, &normalmap_to_png(nm))
}
