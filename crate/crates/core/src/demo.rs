//! Bundled demo session: the synthetic "gulf-mini" dataset, a small asset
//! library and a saved state using both.
//!
//! Everything is built from fixed seeds with arithmetic only (no
//! trigonometry), so regenerating gives identical bytes on every platform.

use std::fs;
use std::io;
use std::path::Path;

use crate::asset_library::{AssetLibrary, AssetManifest, ImageTexture};
use crate::colormap::{Colormap, ControlPoint};
use crate::composition::{
    apply_command, save_state, Command, Composition, Context, DatasetRef, Event,
};
use crate::data_model::{
    dataset_to_json, Bounds, Dataset, KeyData, ScalarField, VariableArray, Vec3,
};
use crate::plate::{PieceRef, PlateType};
use crate::renderer::encode_png;
use crate::sampling::{sample_density, SamplerConfig, Xorshift64Star};

pub const DATASET_NAME: &str = "gulf-mini";
pub const DATASET_FILE: &str = "gulf-mini.json";
pub const ASSETS_DIR: &str = "assets";
pub const STATE_FILE: &str = "demo-state.json";
pub const GOLDEN_FILE: &str = "demo-golden.png";
pub const GOLDEN_SIZE: u32 = 256;

pub const SURFACE: &str = "seafloor";
pub const LINES: &str = "currents";
pub const CHLOROPHYLL_POINTS: &str = "Chlorophyll-points";
pub const NITRATE_POINTS: &str = "Nitrate-points";

pub const GLYPH_IMPRESSION: &str = "chlorophyll-glyphs";
pub const RIBBON_IMPRESSION: &str = "current-ribbons";
pub const SURFACE_IMPRESSION: &str = "seafloor-surface";

const BOUNDS_MAX: Vec3 = [2.0, 1.0, 1.5];
const POINT_COUNT: usize = 1500;
const STREAMLINES: usize = 10;
const STREAMLINE_STEPS: usize = 40;

fn temperature(p: Vec3) -> f64 {
    10.0 + 16.0 * p[1] + 2.0 * p[0]
}

fn salinity(p: Vec3) -> f64 {
    34.0 + p[0] * p[2] - p[1] + 0.5 * (p[0] - 1.0) * (p[0] - 1.0)
}

/// Slow gyre around (1, *, 0.75) with upwelling toward the center.
fn current(p: Vec3) -> Vec3 {
    let dx = p[0] - 1.0;
    let dz = p[2] - 0.75;
    [
        -dz,
        0.15 * (1.0 - dx * dx - dz * dz) * (1.0 - p[1]),
        0.8 * dx,
    ]
}

fn field(name: &str, dims: [usize; 3], f: impl Fn(Vec3) -> f64) -> ScalarField {
    let spacing = [0, 1, 2].map(|a| BOUNDS_MAX[a] / (dims[a] - 1) as f64);
    let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                values.push(f([
                    i as f64 * spacing[0],
                    j as f64 * spacing[1],
                    k as f64 * spacing[2],
                ]));
            }
        }
    }
    ScalarField {
        name: name.into(),
        dims,
        origin: [0.0; 3],
        spacing,
        values,
    }
}

fn chlorophyll_field() -> ScalarField {
    field("Chlorophyll", [17, 9, 13], |p| {
        let shelf = (2.2 - p[0]).max(0.0);
        0.05 + p[1] * p[1] * shelf
    })
}

fn nitrate_field() -> ScalarField {
    field("Nitrate", [17, 9, 13], |p| {
        0.1 + (1.0 - p[1]) * (1.0 - p[1]) * (0.5 + p[2])
    })
}

fn seafloor_height(x: f64, z: f64) -> f64 {
    let u = x / BOUNDS_MAX[0];
    let w = z / BOUNDS_MAX[2];
    0.08 + 0.18 * u * u + 0.1 * w * (1.0 - w) * (1.0 + u)
}

fn with_analytic(mut kd: KeyData, salinity_too: bool) -> KeyData {
    let t: Vec<f64> = kd.vertices.iter().map(|&p| temperature(p)).collect();
    let c: Vec<Vec3> = kd.vertices.iter().map(|&p| current(p)).collect();
    kd = kd.with_variable(VariableArray::scalar("Temperature", t));
    if salinity_too {
        let s: Vec<f64> = kd.vertices.iter().map(|&p| salinity(p)).collect();
        kd = kd.with_variable(VariableArray::scalar("Salinity", s));
    }
    kd.with_variable(VariableArray::vector("Current", c))
}

fn seafloor() -> KeyData {
    let (nx, nz) = (25usize, 19usize);
    let mut vertices = Vec::with_capacity(nx * nz);
    for k in 0..nz {
        for i in 0..nx {
            let x = BOUNDS_MAX[0] * i as f64 / (nx - 1) as f64;
            let z = BOUNDS_MAX[2] * k as f64 / (nz - 1) as f64;
            vertices.push([x, seafloor_height(x, z), z]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (nz - 1));
    for k in 0..nz - 1 {
        for i in 0..nx - 1 {
            let a = (k * nx + i) as u32;
            let b = a + 1;
            let c = a + nx as u32;
            let d = c + 1;
            triangles.push([a, c, b]);
            triangles.push([b, c, d]);
        }
    }
    let depth: Vec<f64> = vertices.iter().map(|v| 1.0 - v[1]).collect();
    with_analytic(KeyData::surface(SURFACE, vertices, triangles), true)
        .with_variable(VariableArray::scalar("Depth", depth))
}

fn currents() -> KeyData {
    let mut vertices = Vec::new();
    let mut lines = Vec::new();
    for s in 0..STREAMLINES {
        let f = s as f64 / (STREAMLINES - 1) as f64;
        let mut p = [1.0 + 0.15 + 0.6 * f, 0.35 + 0.4 * f, 0.75];
        let mut line = Vec::with_capacity(STREAMLINE_STEPS);
        for _ in 0..STREAMLINE_STEPS {
            line.push(vertices.len() as u32);
            vertices.push(p);
            let v = current(p);
            for a in 0..3 {
                p[a] = (p[a] + 0.06 * v[a]).clamp(0.0, BOUNDS_MAX[a]);
            }
        }
        lines.push(line);
    }
    with_analytic(KeyData::polylines(LINES, vertices, lines), true)
}

pub fn demo_dataset() -> Dataset {
    let chl = chlorophyll_field();
    let no3 = nitrate_field();
    let chl_points = sample_density(&chl, &SamplerConfig::new(POINT_COUNT, 7), &[&no3])
        .expect("demo fields are valid densities")
        .key_data;
    let no3_points = sample_density(&no3, &SamplerConfig::new(POINT_COUNT, 11), &[&chl])
        .expect("demo fields are valid densities")
        .key_data;
    Dataset {
        name: DATASET_NAME.into(),
        bounds: Bounds::new([0.0; 3], BOUNDS_MAX),
        key_data: vec![
            seafloor(),
            currents(),
            with_analytic(chl_points, true),
            // no Salinity here, so swapping onto it detaches a color variable
            with_analytic(no3_points, false),
        ],
        fields: vec![chl, no3],
    }
}

// Assets.

/// Twelve unit directions in the xy plane, 30 degrees apart.
fn ring12() -> Vec<(f64, f64)> {
    let h = 3f64.sqrt() / 2.0;
    vec![
        (1.0, 0.0),
        (h, 0.5),
        (0.5, h),
        (0.0, 1.0),
        (-0.5, h),
        (-h, 0.5),
        (-1.0, 0.0),
        (-h, -0.5),
        (-0.5, -h),
        (0.0, -1.0),
        (0.5, -h),
        (h, -0.5),
    ]
}

/// Lathe mesh along z from `(z, radius)` rings, capped at both ends.
fn lathe_obj(profile: &[(f64, f64)]) -> String {
    let ring = ring12();
    let n = ring.len();
    let mut out = String::new();
    for &(z, r) in profile {
        for &(c, s) in &ring {
            out.push_str(&format!("v {:.6} {:.6} {:.6}\n", r * c, r * s, z));
        }
    }
    let first_z = profile[0].0;
    let last_z = profile[profile.len() - 1].0;
    out.push_str(&format!("v 0 0 {first_z:.6}\nv 0 0 {last_z:.6}\n"));
    let bottom = profile.len() * n + 1;
    let top = bottom + 1;
    for ring_i in 0..profile.len() - 1 {
        for i in 0..n {
            let a = ring_i * n + i + 1;
            let b = ring_i * n + (i + 1) % n + 1;
            let c = a + n;
            let d = b + n;
            out.push_str(&format!("f {a} {b} {d} {c}\n"));
        }
    }
    let last = (profile.len() - 1) * n;
    for i in 0..n {
        let a = i + 1;
        let b = (i + 1) % n + 1;
        out.push_str(&format!("f {bottom} {b} {a}\n"));
        out.push_str(&format!("f {top} {} {}\n", last + a, last + b));
    }
    out
}

fn drum_obj() -> String {
    lathe_obj(&[(-0.5, 0.5), (-0.4, 0.55), (0.4, 0.55), (0.5, 0.5)])
}

fn long_clay_obj() -> String {
    let profile: Vec<(f64, f64)> = (0..=10)
        .map(|i| {
            let z = -2.0 + 0.4 * i as f64;
            let bulge = 1.0 - (z / 2.1) * (z / 2.1);
            let lump = if i % 3 == 1 { 0.04 } else { 0.0 };
            (z, (0.28 * bulge.sqrt() + lump).max(0.05))
        })
        .collect();
    lathe_obj(&profile)
}

fn colormap(points: &[(f64, [u8; 3])]) -> Colormap {
    Colormap::from_points(
        points
            .iter()
            .map(|&(t, rgb)| ControlPoint::new(t, rgb))
            .collect(),
    )
    .expect("demo colormaps are valid")
}

fn colormaps() -> Vec<(&'static str, &'static str, Colormap)> {
    vec![
        (
            "ocean",
            "Deep ocean",
            colormap(&[
                (0.0, [8, 29, 88]),
                (0.5, [65, 182, 196]),
                (1.0, [255, 255, 204]),
            ]),
        ),
        (
            "ember",
            "Ember",
            colormap(&[
                (0.0, [0, 0, 0]),
                (0.4, [178, 24, 43]),
                (0.8, [253, 174, 97]),
                (1.0, [255, 255, 255]),
            ]),
        ),
        (
            "grayscale",
            "Grayscale",
            colormap(&[(0.0, [0, 0, 0]), (1.0, [255, 255, 255])]),
        ),
        (
            "clay",
            "Clay",
            colormap(&[
                (0.0, [84, 48, 5]),
                (0.5, [223, 194, 125]),
                (1.0, [199, 234, 229]),
            ]),
        ),
    ]
}

/// Brush stroke along u with ragged alpha edges across v.
fn stroke_texture(seed: u64, tint: [u8; 3]) -> ImageTexture {
    let (w, h) = (64u32, 16u32);
    let mut rng = Xorshift64Star::new(seed).expect("nonzero seed");
    let mut edge = Vec::with_capacity(w as usize);
    for _ in 0..w {
        edge.push(1 + (rng.next_u64() % 4) as u32);
    }
    let mut pixels = Vec::with_capacity((w * h * 4) as usize);
    for y in 0..h {
        for x in 0..w {
            let e = edge[x as usize];
            let inside = y >= e && y < h - e;
            let grain = (rng.next_u64() % 48) as u8;
            let shade = |c: u8| c.saturating_sub(grain);
            let alpha = if inside { 255 } else { 0 };
            pixels.extend_from_slice(&[shade(tint[0]), shade(tint[1]), shade(tint[2]), alpha]);
        }
    }
    ImageTexture {
        width: w,
        height: h,
        pixels,
    }
}

fn paper_texture() -> ImageTexture {
    let (w, h) = (64u32, 64u32);
    let mut rng = Xorshift64Star::new(99).expect("nonzero seed");
    let mut pixels = Vec::with_capacity((w * h * 4) as usize);
    for y in 0..h {
        for x in 0..w {
            let fiber = if (x * 7 + y * 3) % 11 == 0 { 18 } else { 0 };
            let n = (rng.next_u64() % 20) as u8 + fiber;
            pixels.extend_from_slice(&[235 - n, 225 - n, 205 - n, 255]);
        }
    }
    ImageTexture {
        width: w,
        height: h,
        pixels,
    }
}

fn write_asset(root: &Path, manifest: &AssetManifest, payload: &[u8]) -> io::Result<()> {
    let dir = root.join(&manifest.id);
    fs::create_dir_all(&dir)?;
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(dir.join("manifest.json"), text + "\n")?;
    fs::write(dir.join(&manifest.file), payload)
}

fn manifest(
    id: &str,
    kind: crate::asset_library::AssetKind,
    name: &str,
    file: &str,
) -> AssetManifest {
    AssetManifest {
        id: id.into(),
        kind,
        name: name.into(),
        file: file.into(),
        canonical_axis: None,
    }
}

pub fn write_assets(root: &Path) -> io::Result<()> {
    use crate::asset_library::AssetKind;
    let axis = Some([0.0, 0.0, 1.0]);
    write_asset(
        root,
        &AssetManifest {
            canonical_axis: axis,
            ..manifest("drum", AssetKind::Glyph, "Drum", "drum.obj")
        },
        drum_obj().as_bytes(),
    )?;
    write_asset(
        root,
        &AssetManifest {
            canonical_axis: axis,
            ..manifest("long-clay", AssetKind::Glyph, "Long clay", "long-clay.obj")
        },
        long_clay_obj().as_bytes(),
    )?;
    for (id, name, cmap) in colormaps() {
        let text = serde_json::to_string_pretty(&cmap).expect("colormap serializes");
        write_asset(
            root,
            &manifest(id, AssetKind::Colormap, name, "colormap.json"),
            text.as_bytes(),
        )?;
    }
    let tints: [[u8; 3]; 8] = [
        [40, 40, 40],
        [180, 60, 40],
        [40, 90, 160],
        [220, 180, 60],
        [60, 140, 80],
        [120, 70, 150],
        [230, 230, 230],
        [150, 100, 60],
    ];
    for (i, tint) in tints.iter().enumerate() {
        let id = format!("stroke-{}", i + 1);
        let png = encode_png(&stroke_texture(1000 + i as u64, *tint));
        write_asset(
            root,
            &manifest(
                &id,
                AssetKind::LineTexture,
                &format!("Stroke {}", i + 1),
                "stroke.png",
            ),
            &png,
        )?;
    }
    write_asset(
        root,
        &manifest("paper", AssetKind::Texture, "Paper", "paper.png"),
        &encode_png(&paper_texture()),
    )
}

/// Commands that build the demo composition from an empty one.
pub fn demo_commands() -> Vec<Command> {
    let ds = DATASET_NAME;
    let assign = |imp: &str, slot: &str, piece: PieceRef| Command::Assign {
        impression: imp.into(),
        slot: slot.into(),
        piece,
    };
    let create = |plate, id: &str| Command::CreateImpression {
        plate,
        id: Some(id.into()),
        position: None,
    };
    let mut cmds: Vec<Command> = ["drum", "ocean", "ember", "clay", "stroke-2", "paper"]
        .into_iter()
        .map(|id| Command::ImportAsset { id: id.into() })
        .collect();
    cmds.extend([
        create(PlateType::Surface, SURFACE_IMPRESSION),
        assign(
            SURFACE_IMPRESSION,
            "key_data",
            PieceRef::key_data(ds, SURFACE),
        ),
        assign(SURFACE_IMPRESSION, "texture", PieceRef::asset("paper")),
        assign(
            SURFACE_IMPRESSION,
            "color_variable",
            PieceRef::scalar(ds, "Depth"),
        ),
        assign(SURFACE_IMPRESSION, "colormap", PieceRef::asset("clay")),
        create(PlateType::Ribbons, RIBBON_IMPRESSION),
        assign(RIBBON_IMPRESSION, "key_data", PieceRef::key_data(ds, LINES)),
        assign(
            RIBBON_IMPRESSION,
            "line_texture",
            PieceRef::asset("stroke-2"),
        ),
        assign(
            RIBBON_IMPRESSION,
            "color_variable",
            PieceRef::scalar(ds, "Temperature"),
        ),
        assign(RIBBON_IMPRESSION, "colormap", PieceRef::asset("ember")),
        assign(RIBBON_IMPRESSION, "width", PieceRef::number(0.03)),
        assign(RIBBON_IMPRESSION, "texture_repeat", PieceRef::number(4.0)),
        create(PlateType::Glyphs, GLYPH_IMPRESSION),
        assign(
            GLYPH_IMPRESSION,
            "key_data",
            PieceRef::key_data(ds, CHLOROPHYLL_POINTS),
        ),
        assign(GLYPH_IMPRESSION, "glyph", PieceRef::asset("drum")),
        assign(
            GLYPH_IMPRESSION,
            "color_variable",
            PieceRef::scalar(ds, "Salinity"),
        ),
        assign(GLYPH_IMPRESSION, "colormap", PieceRef::asset("ocean")),
        assign(
            GLYPH_IMPRESSION,
            "size_variable",
            PieceRef::scalar(ds, "Nitrate"),
        ),
        assign(
            GLYPH_IMPRESSION,
            "orientation_variable",
            PieceRef::vector(ds, "Current"),
        ),
        assign(GLYPH_IMPRESSION, "size_range", PieceRef::pair(0.006, 0.014)),
    ]);
    cmds
}

/// Applies [`demo_commands`] and checks that every one was accepted.
pub fn demo_composition(
    dataset: &Dataset,
    library: &AssetLibrary,
    dataset_ref: Option<DatasetRef>,
) -> Composition {
    let ctx = Context { dataset, library };
    let mut comp = Composition::new(dataset_ref);
    for cmd in demo_commands() {
        let (next, events) = apply_command(&comp, &cmd, &ctx);
        if let Some(Event::Refused { reason }) =
            events.iter().find(|e| matches!(e, Event::Refused { .. }))
        {
            panic!("demo command {cmd:?} refused: {}", reason.message);
        }
        comp = next;
    }
    comp
}

/// Writes the dataset, asset library and state file into `dir`.
pub fn write_demo(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let ds = demo_dataset();
    fs::write(dir.join(DATASET_FILE), dataset_to_json(&ds))?;
    let assets = dir.join(ASSETS_DIR);
    if assets.exists() {
        fs::remove_dir_all(&assets)?;
    }
    write_assets(&assets)?;
    let (library, _) = AssetLibrary::open(&assets).map_err(io::Error::other)?;
    let mut dataset_ref = DatasetRef::for_file(dir.join(DATASET_FILE))?;
    dataset_ref.path = DATASET_FILE.into();
    let comp = demo_composition(&ds, &library, Some(dataset_ref));
    save_state(&comp, dir.join(STATE_FILE)).map_err(io::Error::other)
}
