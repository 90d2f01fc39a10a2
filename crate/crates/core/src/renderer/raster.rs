use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::camera::{Camera, CameraError, ViewBasis};
use super::png_io::Image;
use super::scene::Batch;
use crate::asset_library::ImageTexture;
use crate::data_model::Vec3;
use crate::math;

/// Rows per work unit.
const BAND: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub ambient: f64,
    pub diffuse: f64,
    pub alpha_cutout_threshold: f64,
    /// Worker threads; `None` uses the global pool, `Some(1)` renders on the
    /// calling thread. Output does not depend on this.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            ambient: 0.3,
            diffuse: 0.7,
            alpha_cutout_threshold: 0.5,
            threads: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error("ambient + diffuse must equal 1, got {0}")]
    Lighting(f64),
    #[error("cannot start render threads: {0}")]
    Threads(String),
}

#[derive(Clone, Copy)]
struct Vertex {
    /// Camera space; `z` is depth along the view direction.
    cam: Vec3,
    normal: Vec3,
    color: [f64; 3],
    uv: [f64; 2],
}

#[derive(Clone, Copy)]
struct ScreenVertex {
    x: f64,
    y: f64,
    inv_z: f64,
    // attributes premultiplied by inv_z
    normal: Vec3,
    color: [f64; 3],
    uv: [f64; 2],
}

struct ScreenTri {
    v: [ScreenVertex; 3],
    texture: Option<usize>,
    min: [f64; 2],
    max: [f64; 2],
}

struct Projection {
    width: f64,
    height: f64,
    focal: f64,
    aspect: f64,
    near: f64,
}

impl Projection {
    fn project(&self, v: &Vertex) -> ScreenVertex {
        let inv_z = 1.0 / v.cam[2];
        let x = self.width * 0.5 * (1.0 + self.focal * v.cam[0] * inv_z / self.aspect);
        let y = self.height * 0.5 * (1.0 - self.focal * v.cam[1] * inv_z);
        ScreenVertex {
            x,
            y,
            inv_z,
            normal: math::scale(v.normal, inv_z),
            color: math::scale(v.color, inv_z),
            uv: [v.uv[0] * inv_z, v.uv[1] * inv_z],
        }
    }
}

fn lerp_vertex(a: &Vertex, b: &Vertex, t: f64) -> Vertex {
    let l3 = |p: Vec3, q: Vec3| math::add(p, math::scale(math::sub(q, p), t));
    Vertex {
        cam: l3(a.cam, b.cam),
        normal: l3(a.normal, b.normal),
        color: l3(a.color, b.color),
        uv: [
            a.uv[0] + (b.uv[0] - a.uv[0]) * t,
            a.uv[1] + (b.uv[1] - a.uv[1]) * t,
        ],
    }
}

/// Clips a triangle to `z >= near`, returning 0, 1 or 2 triangles.
fn clip_near(tri: [Vertex; 3], near: f64) -> Vec<[Vertex; 3]> {
    let inside: Vec<bool> = tri.iter().map(|v| v.cam[2] >= near).collect();
    if inside.iter().all(|&i| i) {
        return vec![tri];
    }
    let mut poly: Vec<Vertex> = Vec::with_capacity(4);
    for i in 0..3 {
        let a = &tri[i];
        let b = &tri[(i + 1) % 3];
        if inside[i] {
            poly.push(*a);
        }
        if inside[i] != inside[(i + 1) % 3] {
            let t = (near - a.cam[2]) / (b.cam[2] - a.cam[2]);
            poly.push(lerp_vertex(a, b, t));
        }
    }
    (1..poly.len().saturating_sub(1))
        .map(|k| [poly[0], poly[k], poly[k + 1]])
        .collect()
}

fn to_camera(p: Vec3, eye: Vec3, basis: &ViewBasis) -> Vec3 {
    let d = math::sub(p, eye);
    [
        math::dot(d, basis.right),
        math::dot(d, basis.up),
        math::dot(d, basis.forward),
    ]
}

fn setup(
    batches: &[Batch],
    camera: &Camera,
    basis: &ViewBasis,
) -> (Vec<ScreenTri>, Vec<Arc<ImageTexture>>) {
    let proj = Projection {
        width: camera.width as f64,
        height: camera.height as f64,
        focal: 1.0 / (camera.vertical_fov.to_radians() * 0.5).tan(),
        aspect: camera.width as f64 / camera.height as f64,
        near: 1e-4 * math::length(math::sub(camera.look_at, camera.position)),
    };
    let mut textures = Vec::new();
    let mut tris = Vec::new();
    for batch in batches {
        let texture = batch.texture.as_ref().map(|t| {
            textures.push(t.clone());
            textures.len() - 1
        });
        let verts: Vec<Vertex> = (0..batch.positions.len())
            .map(|i| Vertex {
                cam: to_camera(batch.positions[i], camera.position, basis),
                normal: batch.normals[i],
                color: batch.colors[i].map(f64::from),
                uv: batch.uvs[i],
            })
            .collect();
        for t in &batch.triangles {
            let tri = [
                verts[t[0] as usize],
                verts[t[1] as usize],
                verts[t[2] as usize],
            ];
            for clipped in clip_near(tri, proj.near) {
                let v = clipped.map(|v| proj.project(&v));
                let min = [
                    v[0].x.min(v[1].x).min(v[2].x),
                    v[0].y.min(v[1].y).min(v[2].y),
                ];
                let max = [
                    v[0].x.max(v[1].x).max(v[2].x),
                    v[0].y.max(v[1].y).max(v[2].y),
                ];
                if max[0] < 0.0 || max[1] < 0.0 || min[0] > proj.width || min[1] > proj.height {
                    continue;
                }
                tris.push(ScreenTri {
                    v,
                    texture,
                    min,
                    max,
                });
            }
        }
    }
    (tris, textures)
}

/// Edge function, evaluated from a canonical endpoint so that
/// `edge(a, b, p) == -edge(b, a, p)` exactly and shared edges split pixels
/// cleanly.
#[inline]
fn edge(a: &ScreenVertex, b: &ScreenVertex, px: f64, py: f64) -> f64 {
    let raw =
        |a: &ScreenVertex, b: &ScreenVertex| (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
    if (a.y, a.x) <= (b.y, b.x) {
        raw(a, b)
    } else {
        -raw(b, a)
    }
}

#[inline]
fn top_left(a: &ScreenVertex, b: &ScreenVertex) -> bool {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    (dy == 0.0 && dx > 0.0) || dy < 0.0
}

/// First and last pixel index whose center lies in `[lo, hi]`.
fn pixel_span(lo: f64, hi: f64, n: usize) -> Option<(usize, usize)> {
    let first = (lo - 0.5).ceil().max(0.0);
    let last = (hi - 0.5).floor().min(n as f64 - 1.0);
    if first > last {
        None
    } else {
        Some((first as usize, last as usize))
    }
}

struct Shader<'a> {
    light: Vec3,
    settings: &'a RenderSettings,
    textures: &'a [Arc<ImageTexture>],
}

impl Shader<'_> {
    /// Final RGB for a fragment, or `None` when cut out.
    fn shade(
        &self,
        normal: Vec3,
        color: [f64; 3],
        uv: [f64; 2],
        texture: Option<usize>,
    ) -> Option<[u8; 3]> {
        let mut texel = [1.0; 3];
        if let Some(t) = texture {
            let s = self.textures[t].sample_nearest(uv[0], uv[1]);
            if (s[3] as f64 / 255.0) < self.settings.alpha_cutout_threshold {
                return None;
            }
            texel = [
                s[0] as f64 / 255.0,
                s[1] as f64 / 255.0,
                s[2] as f64 / 255.0,
            ];
        }
        let n_dot_l = math::normalize(normal).map_or(0.0, |n| math::dot(n, self.light).abs());
        let intensity = self.settings.ambient + self.settings.diffuse * n_dot_l;
        let out = |c: usize| {
            (color[c] * texel[c] * intensity + 0.5)
                .floor()
                .clamp(0.0, 255.0) as u8
        };
        Some([out(0), out(1), out(2)])
    }
}

fn raster_band(
    y0: usize,
    pixels: &mut [u8],
    depth: &mut [f32],
    width: usize,
    tris: &[ScreenTri],
    order: &[u32],
    shader: &Shader<'_>,
) {
    let rows = depth.len() / width;
    for &ti in order {
        let tri = &tris[ti as usize];
        let [a, mut b, mut c] = tri.v;
        let mut area = edge(&a, &b, c.x, c.y);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        if area < 0.0 {
            std::mem::swap(&mut b, &mut c);
            area = -area;
        }
        let Some((ys, ye)) = pixel_span(tri.min[1], tri.max[1], y0 + rows) else {
            continue;
        };
        let Some((xs, xe)) = pixel_span(tri.min[0], tri.max[0], width) else {
            continue;
        };
        let (tl0, tl1, tl2) = (top_left(&b, &c), top_left(&c, &a), top_left(&a, &b));
        for y in ys.max(y0)..=ye {
            let py = y as f64 + 0.5;
            for x in xs..=xe {
                let px = x as f64 + 0.5;
                let w0 = edge(&b, &c, px, py);
                let w1 = edge(&c, &a, px, py);
                let w2 = edge(&a, &b, px, py);
                let inside = |w: f64, tl: bool| w > 0.0 || (w == 0.0 && tl);
                if !(inside(w0, tl0) && inside(w1, tl1) && inside(w2, tl2)) {
                    continue;
                }
                let (b0, b1, b2) = (w0 / area, w1 / area, w2 / area);
                let inv_z = b0 * a.inv_z + b1 * b.inv_z + b2 * c.inv_z;
                let z = 1.0 / inv_z;
                let zf = z as f32;
                let di = (y - y0) * width + x;
                if !(zf < depth[di]) {
                    continue;
                }
                let mix3 = |p: Vec3, q: Vec3, r: Vec3| {
                    math::scale(
                        math::add(
                            math::add(math::scale(p, b0), math::scale(q, b1)),
                            math::scale(r, b2),
                        ),
                        z,
                    )
                };
                let normal = mix3(a.normal, b.normal, c.normal);
                let color = mix3(a.color, b.color, c.color);
                let uv = [
                    (b0 * a.uv[0] + b1 * b.uv[0] + b2 * c.uv[0]) * z,
                    (b0 * a.uv[1] + b1 * b.uv[1] + b2 * c.uv[1]) * z,
                ];
                if let Some(rgb) = shader.shade(normal, color, uv, tri.texture) {
                    depth[di] = zf;
                    pixels[4 * di..4 * di + 3].copy_from_slice(&rgb);
                }
            }
        }
    }
}

/// Renders batches to an RGBA image. The result is bit-identical for any
/// thread count.
pub fn rasterize(
    batches: &[Batch],
    camera: &Camera,
    settings: &RenderSettings,
) -> Result<Image, RenderError> {
    let basis = camera.validate()?;
    let sum = settings.ambient + settings.diffuse;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(RenderError::Lighting(sum));
    }
    let (width, height) = (camera.width as usize, camera.height as usize);
    let bg = camera.background;
    let mut image = Image::solid(camera.width, camera.height, [bg[0], bg[1], bg[2], 255]);
    let mut depth = vec![f32::INFINITY; width * height];

    let (tris, textures) = setup(batches, camera, &basis);
    let bands = height.div_ceil(BAND);
    let mut binned: Vec<Vec<u32>> = vec![Vec::new(); bands];
    for (i, t) in tris.iter().enumerate() {
        if let Some((ys, ye)) = pixel_span(t.min[1], t.max[1], height) {
            for list in &mut binned[ys / BAND..=ye / BAND] {
                list.push(i as u32);
            }
        }
    }
    let shader = Shader {
        light: math::scale(basis.forward, -1.0),
        settings,
        textures: &textures,
    };

    let work = |(band, (pixels, depth)): (usize, (&mut [u8], &mut [f32]))| {
        raster_band(
            band * BAND,
            pixels,
            depth,
            width,
            &tris,
            &binned[band],
            &shader,
        );
    };
    let chunks = image
        .pixels
        .chunks_mut(4 * BAND * width)
        .zip(depth.chunks_mut(BAND * width));
    match settings.threads {
        Some(1) => chunks.enumerate().for_each(work),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RenderError::Threads(e.to_string()))?;
            pool.install(|| {
                image
                    .pixels
                    .par_chunks_mut(4 * BAND * width)
                    .zip(depth.par_chunks_mut(BAND * width))
                    .enumerate()
                    .for_each(work)
            });
        }
        None => image
            .pixels
            .par_chunks_mut(4 * BAND * width)
            .zip(depth.par_chunks_mut(BAND * width))
            .enumerate()
            .for_each(work),
    }
    Ok(image)
}
