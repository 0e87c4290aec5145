//! Numeric kernels shared by the corruptions and the metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Aabb, Axis, Scene};

/// Maps a scene into the unit sphere: `(p - center) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub center: [f64; 3],
    /// Largest distance from `center` to any point.
    pub scale: f64,
}

impl Normalization {
    /// Centroid and maximum radius of `points`.
    pub fn fit(points: &[[f64; 3]]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Degenerate("cannot normalize an empty point set".into()));
        }
        let n = points.len() as f64;
        let mut center = [0.0; 3];
        for p in points {
            for i in 0..3 {
                center[i] += p[i];
            }
        }
        for c in &mut center {
            *c /= n;
        }
        let scale = points
            .iter()
            .map(|p| norm(sub(*p, center)))
            .fold(0.0_f64, f64::max);
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Degenerate(
                "all points coincide; normalization scale is zero".into(),
            ));
        }
        Ok(Self { center, scale })
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let d = sub(p, self.center);
        [d[0] / self.scale, d[1] / self.scale, d[2] / self.scale]
    }

    pub fn invert(&self, q: [f64; 3]) -> [f64; 3] {
        [
            q[0] * self.scale + self.center[0],
            q[1] * self.scale + self.center[1],
            q[2] * self.scale + self.center[2],
        ]
    }
}

/// Scene mapped into the normalized frame, plus the transform to undo it.
pub fn normalize(scene: &Scene) -> Result<(Scene, Normalization)> {
    let t = Normalization::fit(&scene.positions)?;
    let mut out = scene.clone();
    for p in &mut out.positions {
        *p = t.apply(*p);
    }
    Ok((out, t))
}

pub fn denormalize(scene: &Scene, t: &Normalization) -> Scene {
    let mut out = scene.clone();
    for p in &mut out.positions {
        *p = t.invert(*p);
    }
    out
}

/// Linearly interpolated `q`-th percentile (`q` in `[0, 100]`) of `values`,
/// using order statistics at fractional rank `q/100 * (n - 1)`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty set");
    let q = q.clamp(0.0, 100.0);
    let mut v = values.to_vec();
    let rank = q / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    let (_, lo_val, right) = v.select_nth_unstable_by(lo, f64::total_cmp);
    let lo_val = *lo_val;
    if hi == lo {
        return lo_val;
    }
    // hi == lo + 1: the smallest element of the right partition
    let hi_val = right.iter().copied().fold(f64::INFINITY, f64::min);
    lo_val + (hi_val - lo_val) * frac
}

pub fn percentile_along_axis(scene: &Scene, axis: Axis, q: f64) -> f64 {
    let a = axis.index();
    let values: Vec<f64> = scene.positions.iter().map(|p| p[a]).collect();
    percentile(&values, q)
}

/// Rotation matrix for `angle_deg` about the unit vector `axis`.
pub fn rotation_matrix(axis: [f64; 3], angle_deg: f64) -> Result<[[f64; 3]; 3]> {
    let len = norm(axis);
    if !(len > 0.0) {
        return Err(Error::ZeroAxis);
    }
    let [x, y, z] = [axis[0] / len, axis[1] / len, axis[2] / len];
    let (s, c) = angle_deg.to_radians().sin_cos();
    let t = 1.0 - c;
    Ok([
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ])
}

/// Rigid rotation of `points` by `angle_deg` about the line through `pivot`
/// along `axis`. The axis is renormalized; a zero axis is an error.
pub fn rotate_about_axis(
    points: &[[f64; 3]],
    axis: [f64; 3],
    pivot: [f64; 3],
    angle_deg: f64,
) -> Result<Vec<[f64; 3]>> {
    let r = rotation_matrix(axis, angle_deg)?;
    // pivot round-trip is not exact in floating point
    if angle_deg == 0.0 {
        return Ok(points.to_vec());
    }
    Ok(points
        .iter()
        .map(|p| add(mat_vec(&r, sub(*p, pivot)), pivot))
        .collect())
}

/// Tight box around the selected points.
pub fn aabb_of(points: &[[f64; 3]], indices: &[usize]) -> Result<Aabb> {
    let (&first, rest) = indices.split_first().ok_or(Error::EmptySubset)?;
    let mut b = Aabb::new(points[first], points[first]);
    for &i in rest {
        let p = points[i];
        for a in 0..3 {
            b.min[a] = b.min[a].min(p[a]);
            b.max[a] = b.max[a].max(p[a]);
        }
    }
    Ok(b)
}

/// Intersection over union of two axis-aligned boxes.
pub fn iou3d(a: &Aabb, b: &Aabb) -> f64 {
    let inter = a.intersection_volume(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub(crate) fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = sub(a, b);
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}
