use std::sync::Arc;

use crate::asset_library::{default_glyph, default_texture, GlyphMesh, ImageTexture, Palette};
use crate::colormap::{normalize, Colormap, Rgb};
use crate::composition::Composition;
use crate::data_model::{Bounds, Dataset, GeometryKind, KeyData, Vec3};
use crate::math;
use crate::plate::{effective_config, EffectiveConfig, PlateType};

/// World-space triangles for one impression.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub impression: String,
    pub plate: PlateType,
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub colors: Vec<Rgb>,
    pub uvs: Vec<[f64; 2]>,
    pub triangles: Vec<[u32; 3]>,
    pub texture: Option<Arc<ImageTexture>>,
    /// Glyph instances, ribbons, or 1 for a surface.
    pub instance_count: usize,
}

impl Batch {
    fn new(impression: &str, plate: PlateType) -> Self {
        Batch {
            impression: impression.to_string(),
            plate,
            positions: Vec::new(),
            normals: Vec::new(),
            colors: Vec::new(),
            uvs: Vec::new(),
            triangles: Vec::new(),
            texture: None,
            instance_count: 0,
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Positions, normals, uvs and indices as little-endian bytes; colors
    /// are excluded.
    pub fn geometry_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for v in self.positions.iter().chain(&self.normals) {
            for c in v {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        for uv in &self.uvs {
            for c in uv {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        for t in &self.triangles {
            for i in t {
                out.extend_from_slice(&i.to_le_bytes());
            }
        }
        out
    }

    fn push_vertex(&mut self, p: Vec3, n: Vec3, color: Rgb, uv: [f64; 2]) -> u32 {
        self.positions.push(p);
        self.normals.push(n);
        self.colors.push(color);
        self.uvs.push(uv);
        (self.positions.len() - 1) as u32
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scene {
    pub batches: Vec<Batch>,
    pub warnings: Vec<String>,
}

/// One batch per visible, renderable impression, in composition order.
pub fn build_scene(comp: &Composition, dataset: &Dataset, palette: &Palette) -> Scene {
    let mut scene = Scene::default();
    for imp in comp.impressions.values() {
        if !imp.visible {
            continue;
        }
        let cfg = match effective_config(imp) {
            Ok(cfg) => cfg,
            Err(_) => continue,
        };
        match build_batch(&imp.id, &cfg, dataset, palette) {
            Ok(batch) => scene.batches.push(batch),
            Err(msg) => scene.warnings.push(format!("{}: {msg}", imp.id)),
        }
    }
    scene
}

fn build_batch(
    id: &str,
    cfg: &EffectiveConfig,
    dataset: &Dataset,
    palette: &Palette,
) -> Result<Batch, String> {
    let kd = dataset.key_data(&cfg.key_data).ok_or_else(|| {
        format!(
            "key data \"{}\" is not in dataset \"{}\"",
            cfg.key_data, dataset.name
        )
    })?;
    let colors = vertex_colors(cfg, kd, palette)?;
    let mut batch = Batch::new(id, cfg.plate);
    match cfg.plate {
        PlateType::Glyphs => glyphs(&mut batch, cfg, kd, dataset, palette, &colors)?,
        PlateType::Ribbons => ribbons(&mut batch, cfg, kd, palette, &colors)?,
        PlateType::Surface => surface(&mut batch, cfg, kd, palette, &colors)?,
    }
    Ok(batch)
}

fn resolve_colormap(cfg: &EffectiveConfig, palette: &Palette) -> Result<Colormap, String> {
    if let Some(edited) = cfg.colormap_edit("colormap") {
        return Ok(edited.clone());
    }
    match cfg.asset("colormap") {
        None => Ok(crate::asset_library::default_colormap()),
        Some(id) => palette
            .get(id)
            .and_then(|a| a.colormap().cloned())
            .ok_or_else(|| format!("colormap asset \"{id}\" is not in the palette")),
    }
}

fn resolve_image(
    cfg: &EffectiveConfig,
    slot: &str,
    palette: &Palette,
) -> Result<Arc<ImageTexture>, String> {
    match cfg.asset(slot) {
        None => Ok(Arc::new(default_texture())),
        Some(id) => palette
            .get(id)
            .and_then(|a| a.image().cloned())
            .map(Arc::new)
            .ok_or_else(|| format!("texture asset \"{id}\" is not in the palette")),
    }
}

fn resolve_glyph(cfg: &EffectiveConfig, palette: &Palette) -> Result<GlyphMesh, String> {
    match cfg.asset("glyph") {
        None => Ok(default_glyph()),
        Some(id) => palette
            .get(id)
            .and_then(|a| a.glyph().cloned())
            .ok_or_else(|| format!("glyph asset \"{id}\" is not in the palette")),
    }
}

fn scalar_values<'k>(kd: &'k KeyData, var: &str) -> Result<(&'k [f64], (f64, f64)), String> {
    let values = kd
        .variable(var)
        .and_then(|v| v.scalars())
        .ok_or_else(|| format!("key data \"{}\" has no scalar variable \"{var}\"", kd.name))?;
    let range = kd.variable_range(var).map_err(|e| e.to_string())?;
    Ok((values, range))
}

/// Colormap color per key-data vertex.
fn vertex_colors(
    cfg: &EffectiveConfig,
    kd: &KeyData,
    palette: &Palette,
) -> Result<Vec<Rgb>, String> {
    let cmap = resolve_colormap(cfg, palette)?;
    match cfg.variable("color_variable") {
        Some(var) => {
            let (values, range) = scalar_values(kd, var)?;
            Ok(values.iter().map(|v| cmap.apply(*v, range)).collect())
        }
        None => Ok(vec![cmap.color_at(0.0); kd.vertices.len()]),
    }
}

fn glyphs(
    batch: &mut Batch,
    cfg: &EffectiveConfig,
    kd: &KeyData,
    dataset: &Dataset,
    palette: &Palette,
    colors: &[Rgb],
) -> Result<(), String> {
    let mesh = resolve_glyph(cfg, palette)?;
    let diagonal = dataset.bounds.diagonal();
    let sizes: Vec<f64> = match cfg.variable("size_variable") {
        Some(var) => {
            let (values, range) = scalar_values(kd, var)?;
            let [lo, hi] = cfg.pair("size_range").ok_or("size_range unresolved")?;
            values
                .iter()
                .map(|v| (lo + normalize(*v, range) * (hi - lo)) * diagonal)
                .collect()
        }
        None => {
            let s = cfg
                .number("uniform_size")
                .ok_or("uniform_size unresolved")?;
            vec![s * diagonal; kd.vertices.len()]
        }
    };
    let orientations: Option<&[Vec3]> =
        match cfg.variable("orientation_variable") {
            Some(var) => Some(kd.variable(var).and_then(|v| v.vectors()).ok_or_else(|| {
                format!("key data \"{}\" has no vector variable \"{var}\"", kd.name)
            })?),
            None => None,
        };
    let axis = mesh.canonical_axis;
    batch
        .positions
        .reserve(kd.vertices.len() * mesh.vertices.len());
    for (i, &center) in kd.vertices.iter().enumerate() {
        let target = orientations.and_then(|o| math::normalize(o[i]));
        let orient = |v: Vec3| match target {
            Some(t) => math::rotate_onto(v, axis, t),
            None => v,
        };
        let base = batch.positions.len() as u32;
        for (v, n) in mesh.vertices.iter().zip(&mesh.normals) {
            let p = math::add(center, orient(math::scale(*v, sizes[i])));
            batch.push_vertex(p, orient(*n), colors[i], [0.0, 0.0]);
        }
        batch.triangles.extend(
            mesh.triangles
                .iter()
                .map(|t| [t[0] + base, t[1] + base, t[2] + base]),
        );
    }
    batch.instance_count = kd.vertices.len();
    Ok(())
}

/// Per-vertex tangent, normal, side vectors of a parallel-transport frame.
/// The first side vector comes from the world axis least aligned with the
/// first tangent.
pub fn parallel_transport(points: &[Vec3]) -> Option<Vec<(Vec3, Vec3)>> {
    if points.len() < 2 {
        return None;
    }
    let segs: Vec<Vec3> = points
        .windows(2)
        .map(|w| math::normalize(math::sub(w[1], w[0])))
        .collect::<Option<_>>()?;
    let tangents: Vec<Vec3> = (0..points.len())
        .map(|i| {
            if i == 0 {
                segs[0]
            } else if i == segs.len() {
                segs[i - 1]
            } else {
                math::normalize(math::add(segs[i - 1], segs[i])).unwrap_or(segs[i])
            }
        })
        .collect();
    let t0 = tangents[0];
    let a = math::least_aligned_axis(t0);
    let mut side = math::normalize(math::sub(a, math::scale(t0, math::dot(a, t0))))?;
    let mut frames = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        let t = tangents[i];
        if i > 0 {
            side = math::rotate_onto(side, tangents[i - 1], t);
            side = math::normalize(math::sub(side, math::scale(t, math::dot(side, t))))?;
        }
        frames.push((t, side));
    }
    Some(frames)
}

fn ribbons(
    batch: &mut Batch,
    cfg: &EffectiveConfig,
    kd: &KeyData,
    palette: &Palette,
    colors: &[Rgb],
) -> Result<(), String> {
    if kd.kind != GeometryKind::Lines {
        return Err(format!(
            "ribbons need lines key data, \"{}\" is {}",
            kd.name, kd.kind
        ));
    }
    let width = cfg.number("width").ok_or("width unresolved")?;
    let repeat = cfg
        .number("texture_repeat")
        .ok_or("texture_repeat unresolved")?;
    batch.texture = Some(resolve_image(cfg, "line_texture", palette)?);
    for line in &kd.lines {
        // drop repeated vertices so every segment has a direction
        let mut idx: Vec<usize> = Vec::with_capacity(line.len());
        for &i in line {
            let i = i as usize;
            if idx.last().is_none_or(|&j| kd.vertices[j] != kd.vertices[i]) {
                idx.push(i);
            }
        }
        let pts: Vec<Vec3> = idx.iter().map(|&i| kd.vertices[i]).collect();
        let Some(frames) = parallel_transport(&pts) else {
            continue;
        };
        let base = batch.positions.len() as u32;
        let mut arc = 0.0;
        for (k, (&i, &(t, side))) in idx.iter().zip(&frames).enumerate() {
            if k > 0 {
                arc += math::length(math::sub(pts[k], pts[k - 1]));
            }
            let normal = math::cross(t, side);
            let half = math::scale(side, width / 2.0);
            let u = arc * repeat;
            batch.push_vertex(math::sub(pts[k], half), normal, colors[i], [u, 0.0]);
            batch.push_vertex(math::add(pts[k], half), normal, colors[i], [u, 1.0]);
        }
        for k in 0..(idx.len() as u32 - 1) {
            let a = base + 2 * k;
            batch.triangles.push([a, a + 1, a + 2]);
            batch.triangles.push([a + 1, a + 3, a + 2]);
        }
        batch.instance_count += 1;
    }
    Ok(())
}

/// The two axes of largest extent, larger first; ties go to the lower index.
pub fn projection_axes(bounds: &Bounds) -> (usize, usize) {
    let e = bounds.extent();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        e[b].partial_cmp(&e[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    (order[0], order[1])
}

fn surface(
    batch: &mut Batch,
    cfg: &EffectiveConfig,
    kd: &KeyData,
    palette: &Palette,
    colors: &[Rgb],
) -> Result<(), String> {
    if kd.kind != GeometryKind::Surface {
        return Err(format!(
            "surface plate needs surface key data, \"{}\" is {}",
            kd.name, kd.kind
        ));
    }
    let scale = cfg
        .number("texture_scale")
        .ok_or("texture_scale unresolved")?;
    batch.texture = Some(resolve_image(cfg, "texture", palette)?);
    let bounds = kd.bounds().unwrap_or_else(Bounds::unit);
    let (a, b) = projection_axes(&bounds);
    let span = bounds.extent()[a];
    let span = if span > 0.0 { span } else { 1.0 };
    let normals = crate::asset_library::area_weighted_normals(&kd.vertices, &kd.triangles);
    for (i, p) in kd.vertices.iter().enumerate() {
        let uv = [
            (p[a] - bounds.min[a]) / span * scale,
            (p[b] - bounds.min[b]) / span * scale,
        ];
        batch.push_vertex(*p, normals[i], colors[i], uv);
    }
    batch.triangles.extend_from_slice(&kd.triangles);
    batch.instance_count = 1;
    Ok(())
}
