//! Deterministic synthetic rooms: a floor plane at up-coordinate 0, four
//! walls, an optional ceiling and box-shaped objects sampled on their
//! surfaces. Annotations are the tight boxes of the stored points.

use serde::{Deserialize, Serialize};

use crate::corruption::classes;
use crate::error::{Error, Result};
use crate::geometry::aabb_of;
use crate::rng::{child_seed, SeededRng};
use crate::scene::{Aabb, AnnotationSet, Instance, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSceneSpec {
    pub scene_count: usize,
    /// Room size along x, y and z (up).
    pub room_extent: [f64; 3],
    pub object_count: usize,
    /// Classes drawn uniformly for each object.
    pub object_classes: Vec<i32>,
    pub object_size_min: [f64; 3],
    pub object_size_max: [f64; 3],
    pub points_per_object: usize,
    pub floor_points: usize,
    /// Points on each of the four walls; 0 disables walls.
    pub wall_points: usize,
    pub ceiling_points: usize,
    /// Floor points are spread over `[0, floor_thickness]` in z.
    pub floor_thickness: f64,
    /// Gap between the floor and the bottom of every object.
    pub object_elevation: f64,
    pub colors: bool,
    pub seed: u64,
    pub id_prefix: String,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        Self {
            scene_count: 1,
            room_extent: [6.0, 5.0, 3.0],
            object_count: 5,
            object_classes: vec![3, 4, 5, 6, 7, 14],
            object_size_min: [0.4, 0.4, 0.4],
            object_size_max: [1.2, 1.2, 1.0],
            points_per_object: 2000,
            floor_points: 5000,
            wall_points: 3000,
            ceiling_points: 0,
            floor_thickness: 0.0,
            object_elevation: 0.05,
            colors: true,
            seed: 0,
            id_prefix: "synth".into(),
        }
    }
}

impl SyntheticSceneSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("synthetic spec: {m}")));
        let positive = |v: &[f64; 3]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        if self.scene_count == 0 {
            return fail("scene_count must be positive");
        }
        if !positive(&self.room_extent) {
            return fail("room_extent must be positive");
        }
        if self.floor_points == 0 {
            return fail("floor_points must be positive");
        }
        if !(self.floor_thickness >= 0.0 && self.object_elevation >= 0.0) {
            return fail("floor_thickness and object_elevation must be >= 0");
        }
        if self.object_count > 0 {
            if self.points_per_object == 0 {
                return fail("points_per_object must be positive");
            }
            if self.object_classes.is_empty() {
                return fail("object_classes is empty");
            }
            if !positive(&self.object_size_min) {
                return fail("object_size_min must be positive");
            }
            for i in 0..3 {
                if self.object_size_min[i] > self.object_size_max[i] {
                    return fail("object_size_min exceeds object_size_max");
                }
            }
            let room = self.room_extent;
            let max = self.object_size_max;
            if max[0] >= room[0] || max[1] >= room[1] || max[2] + self.object_elevation >= room[2] {
                return fail("objects do not fit in the room");
            }
        }
        Ok(())
    }

    pub fn points_per_scene(&self) -> usize {
        self.floor_points + 4 * self.wall_points + self.ceiling_points + self.object_count * self.points_per_object
    }

    pub fn scene_id(&self, index: usize) -> String {
        format!("{}_{index:04}", self.id_prefix)
    }
}

struct Builder {
    scene: Scene,
    colors: Vec<[u8; 3]>,
}

impl Builder {
    fn push(&mut self, p: [f64; 3], semantic: i32, instance: i32, color: [u8; 3]) {
        self.scene.positions.push(p.map(|c| c as f32 as f64));
        self.scene.semantic_labels.push(semantic);
        self.scene.instance_labels.push(instance);
        self.colors.push(color);
    }
}

/// Uniform point on the surface of `b`, faces weighted by area.
fn surface_point(b: &Aabb, rng: &mut SeededRng) -> [f64; 3] {
    let e = b.extent();
    let areas = [e[1] * e[2], e[0] * e[2], e[0] * e[1]];
    let total = 2.0 * (areas[0] + areas[1] + areas[2]);
    let mut t = rng.uniform() * total;
    let mut axis = 2;
    for (i, a) in areas.iter().enumerate() {
        if t < 2.0 * a {
            axis = i;
            break;
        }
        t -= 2.0 * a;
    }
    let mut p = [0.0; 3];
    for (i, c) in p.iter_mut().enumerate() {
        *c = if i == axis {
            if rng.coin() {
                b.max[i]
            } else {
                b.min[i]
            }
        } else {
            rng.uniform_in(b.min[i], b.max[i])
        };
    }
    p
}

fn place_objects(spec: &SyntheticSceneSpec, rng: &mut SeededRng) -> Vec<Aabb> {
    let room = spec.room_extent;
    let mut placed: Vec<Aabb> = Vec::new();
    for _ in 0..spec.object_count {
        let size: [f64; 3] = std::array::from_fn(|i| rng.uniform_in(spec.object_size_min[i], spec.object_size_max[i]));
        let mut candidate = None;
        for attempt in 0..100 {
            let x = rng.uniform_in(0.0, room[0] - size[0]);
            let y = rng.uniform_in(0.0, room[1] - size[1]);
            let z = spec.object_elevation;
            let b = Aabb::new([x, y, z], [x + size[0], y + size[1], z + size[2]]);
            // overlap is tolerated once free space runs out
            if attempt == 99 || placed.iter().all(|o| o.intersection_volume(&b) == 0.0) {
                candidate = Some(b);
                break;
            }
        }
        placed.extend(candidate);
    }
    placed
}

fn random_color(rng: &mut SeededRng) -> [u8; 3] {
    std::array::from_fn(|_| rng.index(256) as u8)
}

/// Scene `index` of `spec`. Independent of every other index.
pub fn generate_scene(spec: &SyntheticSceneSpec, index: usize) -> Result<(Scene, AnnotationSet)> {
    spec.validate()?;
    let id = spec.scene_id(index);
    let mut rng = SeededRng::new(child_seed(spec.seed, &id, "synthetic", 0));
    let room = spec.room_extent;
    let mut b = Builder {
        scene: Scene::from_positions(id.clone(), Vec::with_capacity(spec.points_per_scene())),
        colors: Vec::with_capacity(spec.points_per_scene()),
    };

    for _ in 0..spec.floor_points {
        let z = if spec.floor_thickness > 0.0 {
            rng.uniform_in(0.0, spec.floor_thickness)
        } else {
            0.0
        };
        let p = [rng.uniform_in(0.0, room[0]), rng.uniform_in(0.0, room[1]), z];
        b.push(p, classes::FLOOR, -1, [120, 110, 100]);
    }
    for wall in 0..4 {
        for _ in 0..spec.wall_points {
            let z = rng.uniform_in(0.0, room[2]);
            let p = match wall {
                0 => [0.0, rng.uniform_in(0.0, room[1]), z],
                1 => [room[0], rng.uniform_in(0.0, room[1]), z],
                2 => [rng.uniform_in(0.0, room[0]), 0.0, z],
                _ => [rng.uniform_in(0.0, room[0]), room[1], z],
            };
            b.push(p, classes::WALL, -1, [200, 200, 190]);
        }
    }
    for _ in 0..spec.ceiling_points {
        let p = [rng.uniform_in(0.0, room[0]), rng.uniform_in(0.0, room[1]), room[2]];
        b.push(p, classes::CEILING, -1, [230, 230, 230]);
    }

    let boxes = place_objects(spec, &mut rng);
    let mut instances = Vec::with_capacity(boxes.len());
    for (i, bx) in boxes.iter().enumerate() {
        let class_id = spec.object_classes[rng.index(spec.object_classes.len())];
        let color = random_color(&mut rng);
        let start = b.scene.positions.len();
        for _ in 0..spec.points_per_object {
            let p = surface_point(bx, &mut rng);
            b.push(p, class_id, i as i32, color);
        }
        let idx: Vec<usize> = (start..b.scene.positions.len()).collect();
        instances.push(Instance {
            instance_id: i as i32,
            class_id,
            bbox: aabb_of(&b.scene.positions, &idx)?,
        });
    }

    let mut scene = b.scene;
    if spec.colors {
        scene.colors = Some(b.colors);
    }
    Ok((scene, AnnotationSet { scene_id: id, instances }))
}

pub fn generate(spec: &SyntheticSceneSpec) -> Result<Vec<(Scene, AnnotationSet)>> {
    (0..spec.scene_count).map(|i| generate_scene(spec, i)).collect()
}
