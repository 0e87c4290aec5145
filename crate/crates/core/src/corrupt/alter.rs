//! Position-altering corruptions. Point count, labels and colors are never
//! touched; only positions change.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::corruption::{inclination_degrees, jitter_sigma, InclinationAxis, SeverityLevel};
use crate::error::{Error, Result};
use crate::geometry::{aabb_of, rotate_about_axis, Normalization};
use crate::rng::SeededRng;
use crate::scene::{AnnotationSet, Axis, Scene};

#[derive(Debug, Clone)]
pub struct AlterationResult {
    pub scene: Scene,
    /// Per-axis displacement of the altered points, in normalized units.
    pub displacement_stats: DisplacementStats,
    /// Number of points whose position was altered.
    pub touched: usize,
    /// Boxes refitted to rotated instances, when requested.
    pub annotations: Option<AnnotationSet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct DisplacementStats {
    pub mean: [f64; 3],
    /// Sample standard deviation (n - 1 denominator).
    pub std: [f64; 3],
    pub count: usize,
}

impl DisplacementStats {
    fn from_samples(samples: &[[f64; 3]]) -> Self {
        let count = samples.len();
        if count == 0 {
            return Self::default();
        }
        let mut mean = [0.0; 3];
        for s in samples {
            for a in 0..3 {
                mean[a] += s[a];
            }
        }
        mean = mean.map(|m| m / count as f64);
        let mut std = [0.0; 3];
        if count > 1 {
            for s in samples {
                for a in 0..3 {
                    std[a] += (s[a] - mean[a]).powi(2);
                }
            }
            std = std.map(|v| (v / (count - 1) as f64).sqrt());
        }
        Self { mean, std, count }
    }
}

fn identity(scene: &Scene) -> AlterationResult {
    AlterationResult {
        scene: scene.clone(),
        displacement_stats: DisplacementStats::default(),
        touched: 0,
        annotations: None,
    }
}

fn jitter_with_sigma(
    scene: &Scene,
    sigma: f64,
    rng: &mut SeededRng,
    mask: Option<&[usize]>,
) -> Result<AlterationResult> {
    if mask.is_some_and(<[usize]>::is_empty) {
        return Ok(identity(scene));
    }
    let t = Normalization::fit(&scene.positions)?;
    let mut out = scene.clone();
    let all: Vec<usize>;
    let indices = match mask {
        Some(m) => m,
        None => {
            all = (0..scene.len()).collect();
            &all
        }
    };
    let mut samples = Vec::with_capacity(indices.len());
    for &i in indices {
        let d = [sigma * rng.normal(), sigma * rng.normal(), sigma * rng.normal()];
        // denormalize(normalize(p) + d) == p + scale * d
        let p = &mut out.positions[i];
        for a in 0..3 {
            p[a] += t.scale * d[a];
        }
        samples.push(d);
    }
    Ok(AlterationResult {
        scene: out,
        displacement_stats: DisplacementStats::from_samples(&samples),
        touched: indices.len(),
        annotations: None,
    })
}

/// Adds i.i.d. Gaussian noise with standard deviation `0.004 * level`
/// (normalized units) to every coordinate of the masked points, or of all
/// points when `mask` is `None`.
pub fn jitter(
    scene: &Scene,
    level: SeverityLevel,
    rng: &mut SeededRng,
    mask: Option<&[usize]>,
) -> Result<AlterationResult> {
    jitter_with_sigma(scene, jitter_sigma(level), rng, mask)
}

fn check_class(target_class: i32, classes: &BTreeMap<i32, String>) -> Result<()> {
    if classes.contains_key(&target_class) {
        Ok(())
    } else {
        Err(Error::UnknownClass(target_class))
    }
}

/// Level-5 jitter restricted to points of `target_class`.
pub fn local_noise(
    scene: &Scene,
    rng: &mut SeededRng,
    target_class: i32,
    classes: &BTreeMap<i32, String>,
) -> Result<AlterationResult> {
    check_class(target_class, classes)?;
    let mask = scene.class_mask(target_class);
    jitter(scene, SeverityLevel::MAX, rng, Some(&mask))
}

/// Level-5 jitter on every point except those of `target_class`.
pub fn background_noise(
    scene: &Scene,
    rng: &mut SeededRng,
    target_class: i32,
    classes: &BTreeMap<i32, String>,
) -> Result<AlterationResult> {
    check_class(target_class, classes)?;
    let mask: Vec<usize> = (0..scene.len())
        .filter(|&i| scene.semantic_labels[i] != target_class)
        .collect();
    jitter(scene, SeverityLevel::MAX, rng, Some(&mask))
}

/// Rigid rotation by `5 * level` degrees about an axis through the centroid.
pub fn floor_inclination(
    scene: &Scene,
    level: SeverityLevel,
    axis: InclinationAxis,
    up: Axis,
) -> Result<AlterationResult> {
    rotate_scene(scene, inclination_degrees(level), axis, up)
}

/// Rotation about the inclination axis by an arbitrary angle.
pub fn rotate_scene(
    scene: &Scene,
    angle_deg: f64,
    axis: InclinationAxis,
    up: Axis,
) -> Result<AlterationResult> {
    let direction = match axis {
        InclinationAxis::Up => up.unit(),
        InclinationAxis::Horizontal(a) => a.unit(),
    };
    let (pivot, scale) = match Normalization::fit(&scene.positions) {
        Ok(t) => (t.center, t.scale),
        Err(_) => (scene.positions.first().copied().unwrap_or_default(), 1.0),
    };
    let rotated = rotate_about_axis(&scene.positions, direction, pivot, angle_deg)?;
    let samples: Vec<[f64; 3]> = rotated
        .iter()
        .zip(&scene.positions)
        .map(|(q, p)| [(q[0] - p[0]) / scale, (q[1] - p[1]) / scale, (q[2] - p[2]) / scale])
        .collect();
    let mut out = scene.clone();
    out.positions = rotated;
    Ok(AlterationResult {
        scene: out,
        displacement_stats: DisplacementStats::from_samples(&samples),
        touched: scene.len(),
        annotations: None,
    })
}

/// Tight boxes around each annotated instance's points in `scene`.
/// Instances without points keep their original box.
pub fn refit_annotations(scene: &Scene, annotations: &AnnotationSet) -> Result<AnnotationSet> {
    let groups = scene.instance_groups();
    let mut out = annotations.clone();
    for inst in &mut out.instances {
        if let Some(idx) = groups.get(&inst.instance_id) {
            let b = aabb_of(&scene.positions, idx)?;
            if b.is_valid() {
                inst.bbox = b;
            }
        }
    }
    Ok(out)
}
