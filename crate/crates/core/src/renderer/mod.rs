//! Deterministic software renderer: scene building, rasterization and PNG
//! output.

mod camera;
mod png_io;
mod raster;
mod scene;

pub use camera::{default_camera, Camera, CameraError, ViewBasis, DEFAULT_BACKGROUND, DEFAULT_FOV};
pub use png_io::{encode_png, Image};
pub use raster::{rasterize, RenderError, RenderSettings};
pub use scene::{build_scene, parallel_transport, projection_axes, Batch, Scene};

use crate::asset_library::AssetLibrary;
use crate::composition::Composition;
use crate::data_model::Dataset;

pub const DEFAULT_SIZE: u32 = 512;

#[derive(Debug, Clone)]
pub struct Rendered {
    pub image: Image,
    pub png: Vec<u8>,
    /// Palette ids that could not be imported.
    pub missing_assets: Vec<String>,
    pub warnings: Vec<String>,
}

/// Full path from session state to PNG bytes. `camera` defaults to
/// [`default_camera`] at the given size.
pub fn render_composition(
    comp: &Composition,
    dataset: &Dataset,
    library: &AssetLibrary,
    camera: Option<Camera>,
    width: u32,
    height: u32,
    settings: &RenderSettings,
) -> Result<Rendered, RenderError> {
    let camera = camera
        .unwrap_or_else(|| default_camera(&dataset.bounds, width, height))
        .with_size(width, height);
    camera.validate()?;
    let (palette, failed) = library.palette_for(&comp.palette);
    let mut warnings: Vec<String> = failed.iter().map(|(id, e)| format!("{id}: {e}")).collect();
    let scene = build_scene(comp, dataset, &palette);
    warnings.extend(scene.warnings);
    let image = rasterize(&scene.batches, &camera, settings)?;
    let png = encode_png(&image);
    Ok(Rendered {
        image,
        png,
        missing_assets: failed.into_iter().map(|(id, _)| id).collect(),
        warnings,
    })
}
