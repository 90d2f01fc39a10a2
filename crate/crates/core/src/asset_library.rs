//! Local library of digitized visual assets: glyph meshes, colormaps, line
//! textures and surface textures.
//!
//! Layout on disk is `<root>/<id>/manifest.json` plus the payload file named
//! by the manifest. Glyphs are OBJ, textures PNG, colormaps JSON.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colormap::Colormap;
use crate::data_model::Vec3;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    Glyph,
    Colormap,
    LineTexture,
    Texture,
}

impl AssetKind {
    pub const ALL: [AssetKind; 4] = [
        AssetKind::Glyph,
        AssetKind::Colormap,
        AssetKind::LineTexture,
        AssetKind::Texture,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AssetKind::Glyph => "glyph",
            AssetKind::Colormap => "colormap",
            AssetKind::LineTexture => "line_texture",
            AssetKind::Texture => "texture",
        }
    }
}

impl fmt::Display for AssetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Triangle mesh fitted to the unit box centered at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphMesh {
    pub vertices: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub canonical_axis: Vec3,
}

/// RGBA8, row-major, top-left origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageTexture {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl ImageTexture {
    pub fn solid(width: u32, height: u32, rgba: [u8; 4]) -> Self {
        let pixels = rgba
            .iter()
            .copied()
            .cycle()
            .take(4 * width as usize * height as usize)
            .collect();
        ImageTexture {
            width,
            height,
            pixels,
        }
    }

    pub fn texel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = 4 * (y as usize * self.width as usize + x as usize);
        [
            self.pixels[i],
            self.pixels[i + 1],
            self.pixels[i + 2],
            self.pixels[i + 3],
        ]
    }

    /// Nearest-neighbour lookup with repeat wrapping; `v = 0` is the top row.
    pub fn sample_nearest(&self, u: f64, v: f64) -> [u8; 4] {
        let wrap = |c: f64, n: u32| -> u32 {
            let f = c - c.floor();
            ((f * n as f64).floor() as u32).min(n - 1)
        };
        self.texel(wrap(u, self.width), wrap(v, self.height))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AssetPayload {
    Glyph(GlyphMesh),
    Colormap(Colormap),
    Image(ImageTexture),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisualAsset {
    pub id: String,
    pub kind: AssetKind,
    pub name: String,
    pub payload: AssetPayload,
}

impl VisualAsset {
    pub fn glyph(&self) -> Option<&GlyphMesh> {
        match &self.payload {
            AssetPayload::Glyph(g) => Some(g),
            _ => None,
        }
    }

    pub fn colormap(&self) -> Option<&Colormap> {
        match &self.payload {
            AssetPayload::Colormap(c) => Some(c),
            _ => None,
        }
    }

    pub fn image(&self) -> Option<&ImageTexture> {
        match &self.payload {
            AssetPayload::Image(i) => Some(i),
            _ => None,
        }
    }
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetManifest {
    pub id: String,
    pub kind: AssetKind,
    pub name: String,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_axis: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetDescriptor {
    pub id: String,
    pub kind: AssetKind,
    pub name: String,
}

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("asset library {0} does not exist or is not a directory")]
    MissingLibrary(PathBuf),
    #[error("unknown asset id \"{0}\"")]
    UnknownId(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("corrupt payload for asset \"{id}\": {message}")]
    Corrupt { id: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanWarning {
    /// Asset id when the manifest could be read, otherwise the directory name.
    pub id: String,
    pub message: String,
}

impl fmt::Display for ScanWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.id, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Catalog {
    root: PathBuf,
    entries: BTreeMap<String, (AssetManifest, PathBuf)>,
}

impl Catalog {
    pub fn descriptors(&self) -> Vec<AssetDescriptor> {
        self.entries
            .values()
            .map(|(m, _)| AssetDescriptor {
                id: m.id.clone(),
                kind: m.kind,
                name: m.name.clone(),
            })
            .collect()
    }

    pub fn kind_of(&self, id: &str) -> Option<AssetKind> {
        self.entries.get(id).map(|(m, _)| m.kind)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

/// Scans `<root>/*/manifest.json`. Unreadable or inconsistent entries become
/// warnings; only a missing root is fatal.
pub fn scan_library(root: impl AsRef<Path>) -> Result<(Catalog, Vec<ScanWarning>), AssetError> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(AssetError::MissingLibrary(root.to_path_buf()));
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|source| AssetError::Io {
            path: root.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();

    let mut catalog = Catalog {
        root: root.to_path_buf(),
        entries: BTreeMap::new(),
    };
    let mut warnings = Vec::new();
    for dir in dirs {
        let dir_name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        match read_manifest(&dir.join("manifest.json")) {
            Ok(manifest) => {
                if manifest.id != dir_name {
                    warnings.push(ScanWarning {
                        id: manifest.id.clone(),
                        message: format!("manifest id does not match directory \"{dir_name}\""),
                    });
                    continue;
                }
                let payload = dir.join(&manifest.file);
                if !payload.is_file() {
                    warnings.push(ScanWarning {
                        id: manifest.id.clone(),
                        message: format!("payload file {} is missing", payload.display()),
                    });
                    continue;
                }
                catalog
                    .entries
                    .insert(manifest.id.clone(), (manifest, payload));
            }
            Err(e) => warnings.push(ScanWarning {
                id: dir_name,
                message: e.to_string(),
            }),
        }
    }
    Ok((catalog, warnings))
}

pub fn read_manifest(path: &Path) -> Result<AssetManifest, AssetError> {
    let text = std::fs::read_to_string(path).map_err(|source| AssetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| AssetError::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Loads the payload a manifest points at, with normalization applied.
pub fn load_payload(
    manifest: &AssetManifest,
    payload_path: &Path,
) -> Result<VisualAsset, AssetError> {
    let corrupt = |message: String| AssetError::Corrupt {
        id: manifest.id.clone(),
        message,
    };
    let bytes = std::fs::read(payload_path).map_err(|source| AssetError::Io {
        path: payload_path.to_path_buf(),
        source,
    })?;
    let payload = match manifest.kind {
        AssetKind::Glyph => {
            let text = String::from_utf8(bytes).map_err(|e| corrupt(e.to_string()))?;
            let mut mesh = parse_obj(&text).map_err(corrupt)?;
            if let Some(axis) = manifest.canonical_axis {
                mesh.canonical_axis = math::normalize(axis)
                    .ok_or_else(|| corrupt("canonical_axis is zero".into()))?;
            }
            AssetPayload::Glyph(mesh)
        }
        AssetKind::Colormap => {
            let cmap: Colormap =
                serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
            AssetPayload::Colormap(cmap)
        }
        AssetKind::LineTexture | AssetKind::Texture => {
            AssetPayload::Image(decode_png(&bytes).map_err(corrupt)?)
        }
    };
    Ok(VisualAsset {
        id: manifest.id.clone(),
        kind: manifest.kind,
        name: manifest.name.clone(),
        payload,
    })
}

/// Scanned catalog plus a cache of imported payloads.
#[derive(Debug, Default)]
pub struct AssetLibrary {
    catalog: Catalog,
    cache: RwLock<HashMap<String, Arc<VisualAsset>>>,
}

impl AssetLibrary {
    pub fn open(root: impl AsRef<Path>) -> Result<(Self, Vec<ScanWarning>), AssetError> {
        let (catalog, warnings) = scan_library(root)?;
        Ok((AssetLibrary::from_catalog(catalog), warnings))
    }

    pub fn from_catalog(catalog: Catalog) -> Self {
        AssetLibrary {
            catalog,
            cache: RwLock::new(HashMap::new()),
        }
    }

    /// An empty library; only built-in defaults are available.
    pub fn empty() -> Self {
        AssetLibrary::default()
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn import(&self, id: &str) -> Result<Arc<VisualAsset>, AssetError> {
        if let Some(hit) = self.cache.read().expect("asset cache poisoned").get(id) {
            return Ok(hit.clone());
        }
        let (manifest, path) = self
            .catalog
            .entries
            .get(id)
            .ok_or_else(|| AssetError::UnknownId(id.to_string()))?;
        let asset = Arc::new(load_payload(manifest, path)?);
        self.cache
            .write()
            .expect("asset cache poisoned")
            .insert(id.to_string(), asset.clone());
        Ok(asset)
    }

    /// Imports every id, collecting the ones that failed.
    pub fn palette_for<'a>(
        &self,
        ids: impl IntoIterator<Item = &'a String>,
    ) -> (Palette, Vec<(String, AssetError)>) {
        let mut palette = Palette::default();
        let mut failed = Vec::new();
        for id in ids {
            match self.import(id) {
                Ok(asset) => {
                    palette.insert(asset);
                }
                Err(e) => failed.push((id.clone(), e)),
            }
        }
        (palette, failed)
    }
}

/// Imported assets available to the renderer, in import order.
#[derive(Debug, Clone, Default)]
pub struct Palette {
    assets: Vec<Arc<VisualAsset>>,
}

impl Palette {
    /// Adds an asset unless one with the same id is present. Returns whether
    /// it was added.
    pub fn insert(&mut self, asset: Arc<VisualAsset>) -> bool {
        if self.get(&asset.id).is_some() {
            return false;
        }
        self.assets.push(asset);
        true
    }

    pub fn get(&self, id: &str) -> Option<&Arc<VisualAsset>> {
        self.assets.iter().find(|a| a.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<VisualAsset>> {
        self.assets.iter()
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }
}

// Built-in defaults for unassigned slots.

pub const DEFAULT_GRAY: [u8; 3] = [200, 200, 200];

pub fn default_colormap() -> Colormap {
    Colormap::constant(DEFAULT_GRAY)
}

pub fn default_texture() -> ImageTexture {
    ImageTexture::solid(1, 1, [255, 255, 255, 255])
}

/// Icosphere with two subdivisions (162 vertices, 320 triangles), radius 0.5.
pub fn default_glyph() -> GlyphMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .into_iter()
    .map(|v| math::normalize(v).expect("nonzero"))
    .collect();
    let mut triangles: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..2 {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = math::scale(math::add(vertices[a as usize], vertices[b as usize]), 0.5);
                vertices.push(math::normalize(m).expect("nonzero"));
                (vertices.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for [a, b, c] in triangles {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    let normals = vertices.clone();
    let vertices = vertices.into_iter().map(|v| math::scale(v, 0.5)).collect();
    GlyphMesh {
        vertices,
        normals,
        triangles,
        canonical_axis: [0.0, 0.0, 1.0],
    }
}

/// Parses positions, normals and faces from OBJ text and fits the result to
/// the unit box. Polygons are fan-triangulated; missing normals are computed
/// by area-weighted averaging of face normals.
pub fn parse_obj(text: &str) -> Result<GlyphMesh, String> {
    let mut positions: Vec<Vec3> = Vec::new();
    let mut obj_normals: Vec<Vec3> = Vec::new();
    let mut corners: Vec<(usize, Option<usize>)> = Vec::new();
    let mut index_of: HashMap<(usize, Option<usize>), u32> = HashMap::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        let err = |m: &str| format!("line {}: {m}", lineno + 1);
        match tag {
            "v" | "vn" => {
                let nums: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|_| err("bad number")))
                    .collect::<Result<_, _>>()?;
                if nums.len() != 3 || nums.iter().any(|n| !n.is_finite()) {
                    return Err(err("expected three finite coordinates"));
                }
                let v = [nums[0], nums[1], nums[2]];
                if tag == "v" {
                    positions.push(v);
                } else {
                    obj_normals.push(v);
                }
            }
            "f" => {
                let mut poly = Vec::new();
                for tok in tokens {
                    let mut parts = tok.split('/');
                    let resolve =
                        |raw: Option<&str>, len: usize| -> Result<Option<usize>, String> {
                            match raw {
                                None | Some("") => Ok(None),
                                Some(s) => {
                                    let i: i64 = s.parse().map_err(|_| err("bad index"))?;
                                    let idx = if i > 0 { i - 1 } else { len as i64 + i };
                                    if i == 0 || idx < 0 || idx as usize >= len {
                                        return Err(err("index out of range"));
                                    }
                                    Ok(Some(idx as usize))
                                }
                            }
                        };
                    let v = resolve(parts.next(), positions.len())?
                        .ok_or_else(|| err("face without vertex"))?;
                    let _uv = parts.next();
                    let n = resolve(parts.next(), obj_normals.len())?;
                    let key = (v, n);
                    let idx = *index_of.entry(key).or_insert_with(|| {
                        corners.push(key);
                        (corners.len() - 1) as u32
                    });
                    poly.push(idx);
                }
                if poly.len() < 3 {
                    return Err(err("face needs at least 3 vertices"));
                }
                for k in 1..poly.len() - 1 {
                    faces.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if faces.is_empty() {
        return Err("mesh has no faces".into());
    }

    let vertices: Vec<Vec3> = corners.iter().map(|&(v, _)| positions[v]).collect();
    // drop triangles that collapse onto a repeated position
    let triangles: Vec<[u32; 3]> = faces
        .into_iter()
        .filter(|t| {
            let [a, b, c] = t.map(|i| corners[i as usize].0);
            a != b && b != c && a != c
        })
        .collect();
    if triangles.is_empty() {
        return Err("mesh has only degenerate faces".into());
    }

    let all_have_normals = corners.iter().all(|(_, n)| n.is_some());
    let mut normals: Vec<Vec3> = if all_have_normals {
        corners
            .iter()
            .map(|&(_, n)| obj_normals[n.expect("checked")])
            .collect()
    } else {
        area_weighted_normals(&vertices, &triangles)
    };
    for n in &mut normals {
        *n = math::normalize(*n).unwrap_or([0.0, 0.0, 1.0]);
    }

    let mut mesh = GlyphMesh {
        vertices,
        normals,
        triangles,
        canonical_axis: [0.0, 0.0, 1.0],
    };
    fit_unit_box(&mut mesh);
    Ok(mesh)
}

pub fn area_weighted_normals(vertices: &[Vec3], triangles: &[[u32; 3]]) -> Vec<Vec3> {
    let mut acc = vec![[0.0; 3]; vertices.len()];
    for t in triangles {
        let [a, b, c] = t.map(|i| vertices[i as usize]);
        // cross product magnitude is twice the area
        let n = math::cross(math::sub(b, a), math::sub(c, a));
        for &i in t {
            acc[i as usize] = math::add(acc[i as usize], n);
        }
    }
    acc.into_iter()
        .map(|n| math::normalize(n).unwrap_or([0.0, 0.0, 1.0]))
        .collect()
}

/// Centers the bounding box on the origin and scales uniformly so the longest
/// side is 1.
pub fn fit_unit_box(mesh: &mut GlyphMesh) {
    let Some(first) = mesh.vertices.first().copied() else {
        return;
    };
    let (mut lo, mut hi) = (first, first);
    for v in &mesh.vertices {
        for i in 0..3 {
            lo[i] = lo[i].min(v[i]);
            hi[i] = hi[i].max(v[i]);
        }
    }
    let center = math::scale(math::add(lo, hi), 0.5);
    let longest = (0..3).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
    let s = if longest > 0.0 { 1.0 / longest } else { 1.0 };
    for v in &mut mesh.vertices {
        *v = math::scale(math::sub(*v, center), s);
    }
}

/// Decodes any PNG color type into RGBA8.
pub fn decode_png(bytes: &[u8]) -> Result<ImageTexture, String> {
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    let (w, h) = (info.width, info.height);
    if w == 0 || h == 0 {
        return Err("image has zero size".into());
    }
    let data = &buf[..info.buffer_size()];
    let pixels: Vec<u8> = match info.color_type {
        png::ColorType::Rgba => data.to_vec(),
        png::ColorType::Rgb => data
            .chunks_exact(3)
            .flat_map(|p| [p[0], p[1], p[2], 255])
            .collect(),
        png::ColorType::Grayscale => data.iter().flat_map(|&g| [g, g, g, 255]).collect(),
        png::ColorType::GrayscaleAlpha => data
            .chunks_exact(2)
            .flat_map(|p| [p[0], p[0], p[0], p[1]])
            .collect(),
        png::ColorType::Indexed => return Err("indexed PNG was not expanded".into()),
    };
    Ok(ImageTexture {
        width: w,
        height: h,
        pixels,
    })
}
