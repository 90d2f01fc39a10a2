//! Small 3-vector helpers over `[f64; 3]`.

use crate::data_model::Vec3;

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn length(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Unit vector along `a`, or `None` for a zero or non-finite input.
pub fn normalize(a: Vec3) -> Option<Vec3> {
    let len = length(a);
    if len > 0.0 && len.is_finite() {
        Some(scale(a, 1.0 / len))
    } else {
        None
    }
}

/// Rotates `v` about unit `axis` by the angle with the given cosine and sine.
pub fn rotate(v: Vec3, axis: Vec3, cos: f64, sin: f64) -> Vec3 {
    // Rodrigues
    let term1 = scale(v, cos);
    let term2 = scale(cross(axis, v), sin);
    let term3 = scale(axis, dot(axis, v) * (1.0 - cos));
    add(add(term1, term2), term3)
}

/// Rotation taking unit vector `from` onto unit vector `to`, applied to `v`.
pub fn rotate_onto(v: Vec3, from: Vec3, to: Vec3) -> Vec3 {
    let c = dot(from, to);
    let axis = cross(from, to);
    let s = length(axis);
    if s < 1e-12 {
        if c > 0.0 {
            return v;
        }
        // antiparallel: half turn about any axis perpendicular to `from`
        let perp = normalize(cross(from, least_aligned_axis(from))).expect("perpendicular exists");
        return rotate(v, perp, -1.0, 0.0);
    }
    rotate(v, scale(axis, 1.0 / s), c, s)
}

/// World axis with the smallest absolute component along `v` (ties go to
/// the lower axis index).
pub fn least_aligned_axis(v: Vec3) -> Vec3 {
    let mut best = 0;
    for i in 1..3 {
        if v[i].abs() < v[best].abs() {
            best = i;
        }
    }
    let mut axis = [0.0; 3];
    axis[best] = 1.0;
    axis
}
