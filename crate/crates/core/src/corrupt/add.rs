//! Point-addition corruptions.
//!
//! Each addition first removes `M` uniformly chosen original points and then
//! appends `M` new points, so the output keeps the input's point count and
//! the added points occupy the contiguous tail `[N - M, N)`. Added points
//! carry no labels (`-1`) and black color.

use std::ops::Range;

use serde::Serialize;

use crate::corruption::{add_count, SeverityLevel};
use crate::error::{Error, Result};
use crate::geometry::{percentile, Normalization};
use crate::rng::SeededRng;
use crate::scene::{Aabb, Axis, Scene};

#[derive(Debug, Clone)]
pub struct AdditionResult {
    pub scene: Scene,
    /// Indices of the added points in the output scene.
    pub added: Range<usize>,
    /// Indices (into the input scene) removed to make room, ascending.
    pub removed_original: Vec<usize>,
    pub trace: AdditionTrace,
}

impl AdditionResult {
    pub fn removed_original_count(&self) -> usize {
        self.removed_original.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum AdditionTrace {
    Global { bounds: Aabb },
    Local {
        normalization: Normalization,
        blobs: Vec<BlobRecord>,
    },
    Expansion {
        plane_height: f64,
        /// Footprint of the patch; the up axis has zero extent.
        patch: Aabb,
        side: String,
    },
}

/// One Gaussian blob of add-local, in normalized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlobRecord {
    pub centroid_index: usize,
    pub center: [f64; 3],
    pub sigma: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AddLocalParams {
    /// Inclusive range for the number of blobs.
    pub centroids: [usize; 2],
    pub sigma: [f64; 2],
}

impl Default for AddLocalParams {
    fn default() -> Self {
        Self {
            centroids: [1, 10],
            sigma: [0.075, 0.125],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionParams {
    pub up_axis: Axis,
    pub gap_ratio: f64,
    pub offset_ratio: f64,
}

impl Default for ExpansionParams {
    fn default() -> Self {
        Self {
            up_axis: Axis::Z,
            gap_ratio: 0.3,
            offset_ratio: 0.1,
        }
    }
}

/// Keeps the survivors in input order and appends `points` as unlabeled.
fn assemble(scene: &Scene, removed: &[usize], points: Vec<[f64; 3]>) -> Scene {
    let n = scene.len();
    let mut gone = vec![false; n];
    for &i in removed {
        gone[i] = true;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| !gone[i]).collect();
    let mut out = scene.select(&keep);
    let m = points.len();
    out.positions.extend(points);
    if let Some(colors) = out.colors.as_mut() {
        colors.extend(std::iter::repeat_n([0u8; 3], m));
    }
    out.semantic_labels.extend(std::iter::repeat_n(-1, m));
    out.instance_labels.extend(std::iter::repeat_n(-1, m));
    out
}

fn draw_removed(n: usize, m: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut removed = rng.sample_indices(n, m);
    removed.sort_unstable();
    removed
}

/// Adds points sampled uniformly inside the scene's bounding box.
pub fn add_global(
    scene: &Scene,
    level: SeverityLevel,
    rng: &mut SeededRng,
) -> Result<AdditionResult> {
    let n = scene.len();
    let bounds = scene.bounds();
    if bounds.is_degenerate() {
        return Err(Error::Degenerate(
            "scene bounds have zero extent on some axis".into(),
        ));
    }
    let m = add_count(level, n);
    let removed = draw_removed(n, m, rng);
    let points = (0..m)
        .map(|_| {
            [
                rng.uniform_in(bounds.min[0], bounds.max[0]),
                rng.uniform_in(bounds.min[1], bounds.max[1]),
                rng.uniform_in(bounds.min[2], bounds.max[2]),
            ]
        })
        .collect();
    Ok(AdditionResult {
        scene: assemble(scene, &removed, points),
        added: n - m..n,
        removed_original: removed,
        trace: AdditionTrace::Global { bounds },
    })
}

/// Uniform random composition of `total` into `parts` positive integers.
fn random_composition(total: usize, parts: usize, rng: &mut SeededRng) -> Vec<usize> {
    debug_assert!(parts >= 1 && parts <= total);
    let mut cuts: Vec<usize> = rng
        .sample_indices(total - 1, parts - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0;
    for c in cuts {
        out.push(c - prev);
        prev = c;
    }
    out.push(total - prev);
    out
}

/// Adds Gaussian blobs around randomly chosen scene points. Blob spreads are
/// drawn in the unit-sphere frame of the scene and mapped back to meters.
pub fn add_local(
    scene: &Scene,
    level: SeverityLevel,
    rng: &mut SeededRng,
    params: &AddLocalParams,
) -> Result<AdditionResult> {
    let n = scene.len();
    let t = Normalization::fit(&scene.positions)?;
    let m = add_count(level, n);
    let removed = draw_removed(n, m, rng);
    let mut points = Vec::with_capacity(m);
    let mut blobs = Vec::new();
    if m > 0 {
        let [cmin, cmax] = params.centroids;
        let c = rng
            .int_inclusive(cmin.max(1), cmax.max(cmin.max(1)))
            .min(m)
            .min(n);
        let centers = rng.sample_indices(n, c);
        let counts = random_composition(m, c, rng);
        for (&ci, &count) in centers.iter().zip(&counts) {
            let center = t.apply(scene.positions[ci]);
            let sigma = rng.uniform_in(params.sigma[0], params.sigma[1]);
            for _ in 0..count {
                let q = [
                    center[0] + sigma * rng.normal(),
                    center[1] + sigma * rng.normal(),
                    center[2] + sigma * rng.normal(),
                ];
                points.push(t.invert(q));
            }
            blobs.push(BlobRecord {
                centroid_index: ci,
                center,
                sigma,
                count,
            });
        }
    }
    Ok(AdditionResult {
        scene: assemble(scene, &removed, points),
        added: n - m..n,
        removed_original: removed,
        trace: AdditionTrace::Local {
            normalization: t,
            blobs,
        },
    })
}

/// Adds a horizontal patch below the floor, beside the scene's footprint,
/// mimicking a second floor level such as a stairwell landing.
pub fn scene_expansion(
    scene: &Scene,
    level: SeverityLevel,
    rng: &mut SeededRng,
    params: &ExpansionParams,
) -> Result<AdditionResult> {
    let n = scene.len();
    let bounds = scene.bounds();
    let up = params.up_axis;
    let u = up.index();
    let [h0, h1] = up.others().map(Axis::index);
    let widths = [bounds.max[h0] - bounds.min[h0], bounds.max[h1] - bounds.min[h1]];
    if !(widths[0] > 0.0 && widths[1] > 0.0) {
        return Err(Error::Degenerate("scene footprint has zero area".into()));
    }
    let height = bounds.max[u] - bounds.min[u];
    if !(height > 0.0) {
        return Err(Error::Degenerate("scene has zero extent along the up axis".into()));
    }

    let heights: Vec<f64> = scene.positions.iter().map(|p| p[u]).collect();
    let floor = percentile(&heights, 1.0);
    let gap = params.gap_ratio * height;
    let mut plane = floor - gap;
    if plane >= bounds.min[u] {
        plane = bounds.min[u] - gap;
    }

    let mut patch = bounds;
    patch.min[u] = plane;
    patch.max[u] = plane;
    let side = rng.index(4);
    let (axis, positive) = [(h0, true), (h0, false), (h1, true), (h1, false)][side];
    let w = bounds.max[axis] - bounds.min[axis];
    let offset = params.offset_ratio * w;
    if positive {
        patch.min[axis] = bounds.max[axis] + offset;
        patch.max[axis] = patch.min[axis] + w;
    } else {
        patch.max[axis] = bounds.min[axis] - offset;
        patch.min[axis] = patch.max[axis] - w;
    }

    let m = add_count(level, n);
    let removed = draw_removed(n, m, rng);
    let points = (0..m)
        .map(|_| {
            let mut p = [0.0; 3];
            p[u] = plane;
            p[h0] = rng.uniform_in(patch.min[h0], patch.max[h0]);
            p[h1] = rng.uniform_in(patch.min[h1], patch.max[h1]);
            p
        })
        .collect();
    let side = format!("{}{:?}", if positive { "+" } else { "-" }, Axis::ALL[axis]);
    Ok(AdditionResult {
        scene: assemble(scene, &removed, points),
        added: n - m..n,
        removed_original: removed,
        trace: AdditionTrace::Expansion {
            plane_height: plane,
            patch,
            side,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lvl(v: u8) -> SeverityLevel {
        SeverityLevel::new(v).unwrap()
    }

    fn room(n: usize, seed: u64) -> Scene {
        let mut r = SeededRng::new(seed);
        let mut s = Scene::from_positions(
            "room",
            (0..n)
                .map(|_| [r.uniform_in(0.0, 5.0), r.uniform_in(0.0, 4.0), r.uniform_in(0.0, 2.5)])
                .collect(),
        );
        s.colors = Some(vec![[200, 100, 50]; n]);
        for i in 0..n / 3 {
            s.semantic_labels[i] = 7;
            s.instance_labels[i] = (i % 4) as i32;
        }
        s
    }

    fn check_common(input: &Scene, r: &AdditionResult, level: SeverityLevel) {
        let n = input.len();
        let m = ((level.get() as usize * n) as f64 / 100.0).round() as usize;
        assert_eq!(r.scene.len(), n);
        assert_eq!(r.added.len(), m);
        assert_eq!(r.removed_original_count(), m);
        assert_eq!(r.added, n - m..n);
        for i in r.added.clone() {
            assert_eq!(r.scene.semantic_labels[i], -1);
            assert_eq!(r.scene.instance_labels[i], -1);
            assert_eq!(r.scene.colors.as_ref().unwrap()[i], [0, 0, 0]);
        }
        // survivors keep order and content
        let mut gone = vec![false; n];
        for &i in &r.removed_original {
            gone[i] = true;
        }
        let kept: Vec<usize> = (0..n).filter(|&i| !gone[i]).collect();
        for (slot, &i) in kept.iter().enumerate() {
            assert_eq!(r.scene.positions[slot], input.positions[i]);
            assert_eq!(r.scene.instance_labels[slot], input.instance_labels[i]);
        }
    }

    #[test]
    fn add_global_count_and_domain() {
        let s = room(5000, 1);
        let b = s.bounds();
        for l in 1..=5 {
            let r = add_global(&s, lvl(l), &mut SeededRng::new(l as u64)).unwrap();
            check_common(&s, &r, lvl(l));
            for i in r.added.clone() {
                assert!(b.contains_point(&r.scene.positions[i]));
            }
        }
    }

    #[test]
    fn add_global_forty_thousand_adds_four_hundred() {
        let s = room(40_000, 2);
        let r = add_global(&s, lvl(1), &mut SeededRng::new(0)).unwrap();
        assert_eq!(r.added.len(), 400);
    }

    #[test]
    fn add_global_rejects_flat_scene() {
        let s = Scene::from_positions("flat", (0..100).map(|i| [i as f64, 1.0, 0.0]).collect());
        assert!(matches!(
            add_global(&s, lvl(1), &mut SeededRng::new(0)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn add_global_is_uniform_per_axis() {
        // KS statistic against the uniform CDF; level 5 of 2e6 points adds 1e5
        let mut pts = vec![[1.0, 1.5, 2.5]; 2_000_000];
        pts[0] = [0.0, 0.0, 0.0];
        pts[1] = [2.0, 3.0, 5.0];
        let s = Scene::from_positions("ks", pts);
        let r = add_global(&s, lvl(5), &mut SeededRng::new(17)).unwrap();
        assert_eq!(r.added.len(), 100_000);
        let b = s.bounds();
        for a in 0..3 {
            let mut u: Vec<f64> = r
                .added
                .clone()
                .map(|i| (r.scene.positions[i][a] - b.min[a]) / (b.max[a] - b.min[a]))
                .collect();
            u.sort_by(f64::total_cmp);
            let m = u.len() as f64;
            let d = u
                .iter()
                .enumerate()
                .map(|(i, &x)| f64::max((i as f64 + 1.0) / m - x, x - i as f64 / m))
                .fold(0.0, f64::max);
            // p > 0.01 iff sqrt(m) * D < 1.628
            assert!(m.sqrt() * d < 1.628, "axis {a}: D = {d}");
        }
    }

    #[test]
    fn add_local_counts_and_labels() {
        let s = room(3000, 3);
        for l in 1..=5 {
            let r = add_local(&s, lvl(l), &mut SeededRng::new(l as u64), &AddLocalParams::default()).unwrap();
            check_common(&s, &r, lvl(l));
            let AdditionTrace::Local { blobs, .. } = &r.trace else {
                panic!()
            };
            assert!((1..=10).contains(&blobs.len()));
            assert_eq!(blobs.iter().map(|b| b.count).sum::<usize>(), r.added.len());
            assert!(blobs.iter().all(|b| b.count >= 1 && (0.075..=0.125).contains(&b.sigma)));
        }
    }

    #[test]
    fn add_local_small_scene_still_adds() {
        let s = room(60, 4);
        let r = add_local(&s, lvl(1), &mut SeededRng::new(0), &AddLocalParams::default()).unwrap();
        assert_eq!(r.added.len(), 1);
    }

    #[test]
    fn add_local_single_blob_spread() {
        // 1e6 points at 1% gives a 1e4-point blob
        let s = room(1_000_000, 5);
        let params = AddLocalParams {
            centroids: [1, 1],
            sigma: [0.075, 0.125],
        };
        let r = add_local(&s, lvl(1), &mut SeededRng::new(8), &params).unwrap();
        let AdditionTrace::Local { normalization, blobs } = &r.trace else {
            panic!()
        };
        assert_eq!(blobs.len(), 1);
        assert_eq!(blobs[0].count, 10_000);
        let q: Vec<[f64; 3]> = r.added.clone().map(|i| normalization.apply(r.scene.positions[i])).collect();
        for a in 0..3 {
            let mean = q.iter().map(|p| p[a]).sum::<f64>() / q.len() as f64;
            let var = q.iter().map(|p| (p[a] - mean).powi(2)).sum::<f64>() / (q.len() - 1) as f64;
            let sd = var.sqrt();
            assert!((0.06..=0.14).contains(&sd), "axis {a}: sd {sd}");
            assert!((sd - blobs[0].sigma).abs() < 0.05 * blobs[0].sigma);
        }
    }

    #[test]
    fn random_composition_is_positive_and_exact() {
        let mut r = SeededRng::new(1);
        for (total, parts) in [(10, 1), (10, 10), (1000, 7), (2, 2)] {
            let c = random_composition(total, parts, &mut r);
            assert_eq!(c.len(), parts);
            assert_eq!(c.iter().sum::<usize>(), total);
            assert!(c.iter().all(|&x| x >= 1));
        }
    }

    #[test]
    fn scene_expansion_lies_below_and_outside() {
        let s = room(4000, 6);
        let b = s.bounds();
        let mut sides = std::collections::BTreeSet::new();
        for seed in 0..16 {
            for l in 1..=5 {
                let r = scene_expansion(&s, lvl(l), &mut SeededRng::new(seed), &ExpansionParams::default()).unwrap();
                check_common(&s, &r, lvl(l));
                let AdditionTrace::Expansion { side, patch, .. } = &r.trace else {
                    panic!()
                };
                sides.insert(side.clone());
                let disjoint = patch.max[0] < b.min[0]
                    || patch.min[0] > b.max[0]
                    || patch.max[1] < b.min[1]
                    || patch.min[1] > b.max[1];
                assert!(disjoint);
                for i in r.added.clone() {
                    let p = r.scene.positions[i];
                    assert!(p[2] < b.min[2]);
                    assert!(p[0] < b.min[0] || p[0] > b.max[0] || p[1] < b.min[1] || p[1] > b.max[1]);
                }
            }
        }
        assert_eq!(sides.len(), 4);
    }

    #[test]
    fn scene_expansion_rejects_degenerate_footprint() {
        let s = Scene::from_positions("line", (0..100).map(|i| [i as f64, 0.0, i as f64]).collect());
        assert!(matches!(
            scene_expansion(&s, lvl(1), &mut SeededRng::new(0), &ExpansionParams::default()),
            Err(Error::Degenerate(_))
        ));
    }
}
