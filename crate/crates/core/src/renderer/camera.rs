use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{Bounds, Vec3};
use crate::math;

pub const DEFAULT_BACKGROUND: [u8; 3] = [255, 255, 255];
pub const DEFAULT_FOV: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    /// Degrees.
    pub vertical_fov: f64,
    #[serde(default)]
    pub width: u32,
    #[serde(default)]
    pub height: u32,
    #[serde(default = "default_background")]
    pub background: [u8; 3],
}

fn default_background() -> [u8; 3] {
    DEFAULT_BACKGROUND
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    #[error("image size {0}x{1} has zero area")]
    ZeroSize(u32, u32),
    #[error("camera position equals look_at")]
    Coincident,
    #[error("up vector is parallel to the view direction")]
    ParallelUp,
    #[error("vertical fov {0} is outside (0, 180)")]
    BadFov(f64),
    #[error("non-finite camera parameter")]
    NonFinite,
    #[error("camera flag needs 10 comma-separated numbers, got \"{0}\"")]
    BadFlag(String),
}

/// Orthonormal view basis: `right`, `up`, `forward`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewBasis {
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
}

impl Camera {
    pub fn with_size(mut self, width: u32, height: u32) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self) -> Result<ViewBasis, CameraError> {
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::ZeroSize(self.width, self.height));
        }
        let all = self
            .position
            .iter()
            .chain(&self.look_at)
            .chain(&self.up)
            .chain(std::iter::once(&self.vertical_fov));
        if !all.into_iter().all(|c| c.is_finite()) {
            return Err(CameraError::NonFinite);
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < 180.0) {
            return Err(CameraError::BadFov(self.vertical_fov));
        }
        let forward = math::normalize(math::sub(self.look_at, self.position))
            .ok_or(CameraError::Coincident)?;
        let right =
            math::normalize(math::cross(forward, self.up)).ok_or(CameraError::ParallelUp)?;
        if math::length(math::cross(
            forward,
            math::normalize(self.up).ok_or(CameraError::ParallelUp)?,
        )) < 1e-9
        {
            return Err(CameraError::ParallelUp);
        }
        let up = math::cross(right, forward);
        Ok(ViewBasis { right, up, forward })
    }

    /// Parses `px,py,pz,lx,ly,lz,ux,uy,uz,fov`.
    pub fn parse_flag(text: &str, width: u32, height: u32) -> Result<Camera, CameraError> {
        let nums: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CameraError::BadFlag(text.to_string()))?;
        if nums.len() != 10 {
            return Err(CameraError::BadFlag(text.to_string()));
        }
        let cam = Camera {
            position: [nums[0], nums[1], nums[2]],
            look_at: [nums[3], nums[4], nums[5]],
            up: [nums[6], nums[7], nums[8]],
            vertical_fov: nums[9],
            width,
            height,
            background: DEFAULT_BACKGROUND,
        };
        cam.validate()?;
        Ok(cam)
    }
}

/// Frames `bounds` from the (1,1,1) diagonal direction at twice the bounds
/// diagonal. Zero-size or non-finite bounds fall back to a unit box.
pub fn default_camera(bounds: &Bounds, width: u32, height: u32) -> Camera {
    let framed = if bounds.is_finite() && bounds.diagonal() > 0.0 {
        *bounds
    } else {
        let c = if bounds.is_finite() {
            bounds.center()
        } else {
            [0.0; 3]
        };
        Bounds::new(math::sub(c, [0.5; 3]), math::add(c, [0.5; 3]))
    };
    let center = framed.center();
    let dir = [1.0 / 3f64.sqrt(); 3];
    Camera {
        position: math::add(center, math::scale(dir, 2.0 * framed.diagonal())),
        look_at: center,
        up: [0.0, 1.0, 0.0],
        vertical_fov: DEFAULT_FOV,
        width,
        height,
        background: DEFAULT_BACKGROUND,
    }
}
