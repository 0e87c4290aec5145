//! Scene, annotation and box types shared by every corruption and metric.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Coordinate axis. `Z` is the default up axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    #[default]
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn unit(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.index()] = 1.0;
        v
    }

    /// The two axes orthogonal to `self`, in ascending order.
    pub fn others(self) -> [Axis; 2] {
        match self {
            Axis::X => [Axis::Y, Axis::Z],
            Axis::Y => [Axis::X, Axis::Z],
            Axis::Z => [Axis::X, Axis::Y],
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(format!("unknown axis `{other}`")),
        }
    }
}

/// Axis-aligned box. Construction does not enforce `min < max`; use
/// [`Aabb::is_valid`] where a proper box is required.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn center(&self) -> [f64; 3] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e[0].max(0.0) * e[1].max(0.0) * e[2].max(0.0)
    }

    /// Strictly positive extent on all three axes and finite corners.
    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| {
            self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] < self.max[i]
        })
    }

    /// Zero extent on at least one axis.
    pub fn is_degenerate(&self) -> bool {
        (0..3).any(|i| self.max[i] <= self.min[i])
    }

    pub fn contains_point(&self, p: &[f64; 3]) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.min[i] && other.max[i] <= self.max[i])
    }

    pub fn intersection_volume(&self, other: &Aabb) -> f64 {
        let mut v = 1.0;
        for i in 0..3 {
            let lo = self.min[i].max(other.min[i]);
            let hi = self.max[i].min(other.max[i]);
            if hi <= lo {
                return 0.0;
            }
            v *= hi - lo;
        }
        v
    }

    /// Box scaled about its center by `factor` on every axis.
    pub fn scaled(&self, factor: f64) -> Aabb {
        let c = self.center();
        let e = self.extent();
        let mut out = *self;
        for i in 0..3 {
            out.min[i] = c[i] - 0.5 * factor * e[i];
            out.max[i] = c[i] + 0.5 * factor * e[i];
        }
        out
    }
}

/// A labeled point cloud. All per-point arrays are parallel.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scene_id: String,
    pub positions: Vec<[f64; 3]>,
    pub colors: Option<Vec<[u8; 3]>>,
    /// Per-point class id, `-1` for unlabeled.
    pub semantic_labels: Vec<i32>,
    /// Per-point instance id, `-1` for background.
    pub instance_labels: Vec<i32>,
}

impl Scene {
    /// Unlabeled scene without colors.
    pub fn from_positions(scene_id: impl Into<String>, positions: Vec<[f64; 3]>) -> Self {
        let n = positions.len();
        Self {
            scene_id: scene_id.into(),
            positions,
            colors: None,
            semantic_labels: vec![-1; n],
            instance_labels: vec![-1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Indices whose instance label equals `instance_id`, ascending.
    pub fn instance_mask(&self, instance_id: i32) -> Vec<usize> {
        self.instance_labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == instance_id)
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices not belonging to any instance.
    pub fn unassigned_mask(&self) -> Vec<usize> {
        self.instance_mask(-1)
    }

    /// Indices grouped by instance id, for all non-negative ids present.
    pub fn instance_groups(&self) -> BTreeMap<i32, Vec<usize>> {
        let mut groups: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        for (i, &l) in self.instance_labels.iter().enumerate() {
            if l >= 0 {
                groups.entry(l).or_default().push(i);
            }
        }
        groups
    }

    /// Points whose semantic class is in `classes` or that are unlabeled.
    pub fn background_mask(&self, classes: &[i32]) -> Vec<usize> {
        self.semantic_labels
            .iter()
            .enumerate()
            .filter(|(_, &c)| c < 0 || classes.contains(&c))
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices whose semantic class equals `class_id`.
    pub fn class_mask(&self, class_id: i32) -> Vec<usize> {
        self.semantic_labels
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == class_id)
            .map(|(i, _)| i)
            .collect()
    }

    /// Tight componentwise bounds of all positions. Degenerate (zero extent)
    /// for a single point; check [`Aabb::is_degenerate`] before sampling.
    ///
    /// Panics on an empty scene.
    pub fn bounds(&self) -> Aabb {
        assert!(!self.positions.is_empty(), "bounds of an empty scene");
        let mut b = Aabb::new(self.positions[0], self.positions[0]);
        for p in &self.positions[1..] {
            for i in 0..3 {
                b.min[i] = b.min[i].min(p[i]);
                b.max[i] = b.max[i].max(p[i]);
            }
        }
        b
    }

    /// Copies every attribute of point `src` into slot `dst`.
    pub(crate) fn copy_point(&mut self, dst: usize, src: usize) {
        self.positions[dst] = self.positions[src];
        if let Some(colors) = self.colors.as_mut() {
            colors[dst] = colors[src];
        }
        self.semantic_labels[dst] = self.semantic_labels[src];
        self.instance_labels[dst] = self.instance_labels[src];
    }

    /// Scene restricted to the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Scene {
        Scene {
            scene_id: self.scene_id.clone(),
            positions: indices.iter().map(|&i| self.positions[i]).collect(),
            colors: self
                .colors
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
            semantic_labels: indices.iter().map(|&i| self.semantic_labels[i]).collect(),
            instance_labels: indices.iter().map(|&i| self.instance_labels[i]).collect(),
        }
    }

    /// Rounds every coordinate to the nearest `f32`, the on-disk precision.
    pub fn quantize_to_f32(&mut self) {
        for p in &mut self.positions {
            for c in p.iter_mut() {
                *c = *c as f32 as f64;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub instance_id: i32,
    pub class_id: i32,
    #[serde(rename = "box")]
    pub bbox: Aabb,
}

/// Ground-truth boxes for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub scene_id: String,
    pub instances: Vec<Instance>,
}

impl AnnotationSet {
    pub fn get(&self, instance_id: i32) -> Option<&Instance> {
        self.instances.iter().find(|i| i.instance_id == instance_id)
    }
}

/// One broken invariant found by [`validate_scene`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyScene,
    LengthMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    NonFinitePosition { index: usize },
    InstanceWithoutClass { index: usize },
    SceneIdMismatch { scene: String, annotations: String },
    DuplicateInstance { instance_id: i32 },
    DanglingInstance { instance_id: i32 },
    DegenerateBox { instance_id: i32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyScene => write!(f, "scene has no points"),
            Violation::LengthMismatch {
                field,
                expected,
                found,
            } => write!(f, "length mismatch: {field} has {found} entries, expected {expected}"),
            Violation::NonFinitePosition { index } => {
                write!(f, "non-finite position at index {index}")
            }
            Violation::InstanceWithoutClass { index } => {
                write!(f, "point {index} has an instance label but no semantic label")
            }
            Violation::SceneIdMismatch { scene, annotations } => {
                write!(f, "annotations are for `{annotations}`, scene is `{scene}`")
            }
            Violation::DuplicateInstance { instance_id } => {
                write!(f, "duplicate instance id {instance_id}")
            }
            Violation::DanglingInstance { instance_id } => {
                write!(f, "dangling instance {instance_id}: no point carries this label")
            }
            Violation::DegenerateBox { instance_id } => {
                write!(f, "degenerate box for instance {instance_id}")
            }
        }
    }
}

/// Checks every scene and annotation invariant. An empty list means valid.
pub fn validate_scene(scene: &Scene, annotations: Option<&AnnotationSet>) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = scene.positions.len();
    if n == 0 {
        out.push(Violation::EmptyScene);
    }
    let mut check_len = |field: &'static str, found: usize| {
        if found != n {
            out.push(Violation::LengthMismatch {
                field,
                expected: n,
                found,
            });
        }
    };
    check_len("semantic_labels", scene.semantic_labels.len());
    check_len("instance_labels", scene.instance_labels.len());
    if let Some(colors) = &scene.colors {
        check_len("colors", colors.len());
    }

    for (index, p) in scene.positions.iter().enumerate() {
        if !p.iter().all(|c| c.is_finite()) {
            out.push(Violation::NonFinitePosition { index });
        }
    }
    for (index, (&inst, &sem)) in scene
        .instance_labels
        .iter()
        .zip(&scene.semantic_labels)
        .enumerate()
    {
        if inst >= 0 && sem < 0 {
            out.push(Violation::InstanceWithoutClass { index });
        }
    }

    if let Some(ann) = annotations {
        if ann.scene_id != scene.scene_id {
            out.push(Violation::SceneIdMismatch {
                scene: scene.scene_id.clone(),
                annotations: ann.scene_id.clone(),
            });
        }
        let present: BTreeSet<i32> = scene.instance_labels.iter().copied().collect();
        let mut seen = BTreeSet::new();
        for inst in &ann.instances {
            if !seen.insert(inst.instance_id) {
                out.push(Violation::DuplicateInstance {
                    instance_id: inst.instance_id,
                });
            }
            if !present.contains(&inst.instance_id) {
                out.push(Violation::DanglingInstance {
                    instance_id: inst.instance_id,
                });
            }
            if !inst.bbox.is_valid() {
                out.push(Violation::DegenerateBox {
                    instance_id: inst.instance_id,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled_scene(n: usize) -> Scene {
        let positions = (0..n)
            .map(|i| [i as f64, (i * 2) as f64, (i % 7) as f64])
            .collect();
        let mut s = Scene::from_positions("s0", positions);
        for i in 0..10.min(n) {
            s.instance_labels[i] = 3;
            s.semantic_labels[i] = 5;
        }
        s
    }

    fn annotation_for(scene: &Scene, id: i32) -> AnnotationSet {
        AnnotationSet {
            scene_id: scene.scene_id.clone(),
            instances: vec![Instance {
                instance_id: id,
                class_id: 5,
                bbox: Aabb::new([0.0; 3], [1.0; 3]),
            }],
        }
    }

    #[test]
    fn well_formed_scene_is_ok() {
        let s = labeled_scene(100);
        let a = annotation_for(&s, 3);
        assert!(validate_scene(&s, Some(&a)).is_empty());
    }

    #[test]
    fn nan_coordinate_is_reported_with_index() {
        let mut s = labeled_scene(100);
        s.positions[42][1] = f64::NAN;
        let v = validate_scene(&s, None);
        assert_eq!(v, vec![Violation::NonFinitePosition { index: 42 }]);
        assert_eq!(v[0].to_string(), "non-finite position at index 42");
    }

    #[test]
    fn dangling_instance_is_reported() {
        let s = labeled_scene(100);
        let a = annotation_for(&s, 99);
        let v = validate_scene(&s, Some(&a));
        assert_eq!(v, vec![Violation::DanglingInstance { instance_id: 99 }]);
        assert!(v[0].to_string().starts_with("dangling instance"));
    }

    #[test]
    fn length_mismatch_and_degenerate_box() {
        let mut s = labeled_scene(20);
        s.semantic_labels.pop();
        s.colors = Some(vec![[0, 0, 0]; 19]);
        let mut a = annotation_for(&s, 3);
        a.instances[0].bbox = Aabb::new([0.0; 3], [1.0, 0.0, 1.0]);
        let v = validate_scene(&s, Some(&a));
        assert!(v.contains(&Violation::LengthMismatch {
            field: "semantic_labels",
            expected: 20,
            found: 19
        }));
        assert!(v.contains(&Violation::LengthMismatch {
            field: "colors",
            expected: 20,
            found: 19
        }));
        assert!(v.contains(&Violation::DegenerateBox { instance_id: 3 }));
    }

    #[test]
    fn instance_without_class_is_reported() {
        let mut s = labeled_scene(20);
        s.semantic_labels[4] = -1;
        assert_eq!(
            validate_scene(&s, None),
            vec![Violation::InstanceWithoutClass { index: 4 }]
        );
    }

    #[test]
    fn instance_mask_selects_exact_indices() {
        let s = labeled_scene(100);
        assert_eq!(s.instance_mask(3), (0..10).collect::<Vec<_>>());
        assert!(s.instance_mask(17).is_empty());
    }

    #[test]
    fn masks_partition_the_scene() {
        let mut s = labeled_scene(50);
        for i in 20..30 {
            s.instance_labels[i] = 8;
            s.semantic_labels[i] = 7;
        }
        let mut all: Vec<usize> = s.unassigned_mask();
        for (_, idx) in s.instance_groups() {
            all.extend(idx);
        }
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn unit_cube_bounds() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push([x, y, z]);
                }
            }
        }
        let s = Scene::from_positions("cube", pts);
        assert_eq!(s.bounds(), Aabb::new([0.0; 3], [1.0; 3]));
    }

    #[test]
    fn single_point_bounds_are_degenerate() {
        let s = Scene::from_positions("p", vec![[0.5, -2.0, 3.0]]);
        let b = s.bounds();
        assert_eq!(b.min, b.max);
        assert!(b.is_degenerate());
        assert!(!b.is_valid());
    }
}
