//! Piecewise-linear colormaps with editable control points.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPoint {
    pub t: f64,
    pub rgb: Rgb,
}

impl ControlPoint {
    pub fn new(t: f64, rgb: Rgb) -> Self {
        ControlPoint { t, rgb }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ColormapError {
    #[error("a colormap needs at least 2 control points, got {0}")]
    TooFewPoints(usize),
    #[error("control point position {0} is outside [0, 1]")]
    PositionOutOfRange(f64),
    #[error("control point index {index} out of range for {len} points")]
    BadIndex { index: usize, len: usize },
}

/// Control points with non-decreasing `t`, pinned to 0 and 1 at the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ColormapFile", into = "ColormapFile")]
pub struct Colormap {
    points: Vec<ControlPoint>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColormapFile {
    points: Vec<ControlPoint>,
}

impl TryFrom<ColormapFile> for Colormap {
    type Error = ColormapError;

    fn try_from(file: ColormapFile) -> Result<Self, Self::Error> {
        Colormap::from_points(file.points)
    }
}

impl From<Colormap> for ColormapFile {
    fn from(c: Colormap) -> Self {
        ColormapFile { points: c.points }
    }
}

impl Colormap {
    /// Sorts the points stably by `t` and rescales them so the first sits at
    /// 0 and the last at 1.
    pub fn from_points(mut points: Vec<ControlPoint>) -> Result<Self, ColormapError> {
        if points.len() < 2 {
            return Err(ColormapError::TooFewPoints(points.len()));
        }
        if let Some(p) = points.iter().find(|p| !p.t.is_finite()) {
            return Err(ColormapError::PositionOutOfRange(p.t));
        }
        points.sort_by(|a, b| a.t.total_cmp(&b.t));
        let lo = points[0].t;
        let hi = points[points.len() - 1].t;
        if hi > lo {
            for p in &mut points {
                p.t = ((p.t - lo) / (hi - lo)).clamp(0.0, 1.0);
            }
        } else {
            for p in &mut points {
                p.t = 0.0;
            }
        }
        let mut cmap = Colormap { points };
        cmap.pin_ends();
        Ok(cmap)
    }

    pub fn constant(rgb: Rgb) -> Self {
        Colormap {
            points: vec![ControlPoint::new(0.0, rgb), ControlPoint::new(1.0, rgb)],
        }
    }

    pub fn points(&self) -> &[ControlPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn pin_ends(&mut self) {
        let last = self.points.len() - 1;
        self.points[0].t = 0.0;
        self.points[last].t = 1.0;
    }

    /// Checks every structural invariant.
    pub fn is_valid(&self) -> bool {
        self.points.len() >= 2
            && self.points[0].t == 0.0
            && self.points[self.points.len() - 1].t == 1.0
            && self.points.windows(2).all(|w| w[0].t <= w[1].t)
            && self.points.iter().all(|p| (0.0..=1.0).contains(&p.t))
    }

    /// Color at normalized position `t`. Among points sharing a position the
    /// last one wins.
    pub fn color_at(&self, t: f64) -> Rgb {
        let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
        let upper = self.points.partition_point(|p| p.t <= t);
        if upper == 0 {
            return self.points[0].rgb;
        }
        let lo = self.points[upper - 1];
        let Some(hi) = self.points.get(upper) else {
            return lo.rgb;
        };
        let frac = (t - lo.t) / (hi.t - lo.t);
        let mut out = [0u8; 3];
        for c in 0..3 {
            let a = f64::from(lo.rgb[c]);
            let b = f64::from(hi.rgb[c]);
            // round half up
            out[c] = (a + (b - a) * frac + 0.5).floor().clamp(0.0, 255.0) as u8;
        }
        out
    }

    /// Maps `value` over `range` to a color; a degenerate range maps to t = 0.
    pub fn apply(&self, value: f64, range: (f64, f64)) -> Rgb {
        self.color_at(normalize(value, range))
    }

    /// Inserts a point after any existing points at the same position.
    pub fn add_point(&self, t: f64, rgb: Rgb) -> Result<Colormap, ColormapError> {
        check_position(t)?;
        let mut points = self.points.clone();
        let at = points.partition_point(|p| p.t <= t);
        points.insert(at, ControlPoint::new(t, rgb));
        let mut out = Colormap { points };
        out.pin_ends();
        Ok(out)
    }

    /// Removes a point; the surviving end points are re-pinned to 0 and 1.
    pub fn remove_point(&self, index: usize) -> Result<Colormap, ColormapError> {
        self.check_index(index)?;
        if self.points.len() <= 2 {
            return Err(ColormapError::TooFewPoints(self.points.len() - 1));
        }
        let mut points = self.points.clone();
        points.remove(index);
        let mut out = Colormap { points };
        out.pin_ends();
        Ok(out)
    }

    /// Moves a point and re-sorts stably. End points stay pinned.
    pub fn move_point(&self, index: usize, t: f64) -> Result<Colormap, ColormapError> {
        self.check_index(index)?;
        check_position(t)?;
        let mut points = self.points.clone();
        points[index].t = t;
        let last = points.len() - 1;
        if index != 0 && index != last {
            points.sort_by(|a, b| a.t.total_cmp(&b.t));
        }
        let mut out = Colormap { points };
        out.pin_ends();
        Ok(out)
    }

    pub fn edit(&self, edit: &ColormapEdit) -> Result<Colormap, ColormapError> {
        match *edit {
            ColormapEdit::AddPoint { t, rgb } => self.add_point(t, rgb),
            ColormapEdit::RemovePoint { index } => self.remove_point(index),
            ColormapEdit::MovePoint { index, t } => self.move_point(index, t),
        }
    }

    fn check_index(&self, index: usize) -> Result<(), ColormapError> {
        if index < self.points.len() {
            Ok(())
        } else {
            Err(ColormapError::BadIndex {
                index,
                len: self.points.len(),
            })
        }
    }
}

fn check_position(t: f64) -> Result<(), ColormapError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(ColormapError::PositionOutOfRange(t))
    }
}

/// `clamp((value - min) / (max - min), 0, 1)`, with degenerate ranges mapped to 0.
pub fn normalize(value: f64, (min, max): (f64, f64)) -> f64 {
    if !(max > min) {
        return 0.0;
    }
    let t = (value - min) / (max - min);
    if t.is_nan() {
        0.0
    } else {
        t.clamp(0.0, 1.0)
    }
}

/// One control-point edit from the colormap editor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "edit", rename_all = "snake_case")]
pub enum ColormapEdit {
    AddPoint { t: f64, rgb: Rgb },
    RemovePoint { index: usize },
    MovePoint { index: usize, t: f64 },
}
