//! Point-removal corruptions.
//!
//! Every removal keeps the point count fixed: each dropped slot is
//! overwritten with a copy (position, color, labels) of a surviving point
//! drawn uniformly from the corruption's source pool.

use std::cmp::Ordering;

use serde::Serialize;

use crate::corruption::{drop_count, part_count, QuotaMode, SeverityLevel};
use crate::error::{Error, Result};
use crate::geometry::{aabb_of, dist2, percentile};
use crate::rng::SeededRng;
use crate::scene::{AnnotationSet, Axis, Scene};

/// Padding applied to an updated box axis on which all survivors coincide.
const MIN_BOX_EXTENT: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct ReductionResult {
    /// Same point count as the input.
    pub scene: Scene,
    /// Indices whose content was replaced, ascending.
    pub dropped: Vec<usize>,
    /// `(dropped index, source index)` pairs, ascending by dropped index.
    pub duplicate_map: Vec<(usize, usize)>,
    /// Updated (modal) boxes; only emitted by [`drop_object_parts`].
    pub annotations: Option<AnnotationSet>,
    pub trace: ReductionTrace,
}

/// Construction record of the kind-specific geometry, for auditing.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ReductionTrace {
    None,
    Clusters { clusters: Vec<ClusterRecord> },
    Slices { slices: Vec<SliceRecord> },
    Floor { percentile_height: f64, cutoff: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterRecord {
    pub centroid_index: usize,
    pub centroid: [f64; 3],
    pub quota: usize,
    /// Distance from the centroid to the farthest point this cluster took.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceRecord {
    pub instance_id: i32,
    pub axis: Axis,
    /// Slice taken from the high end of the axis.
    pub positive: bool,
    pub removed: usize,
    /// Boundary coordinate: survivors satisfy `coord <= threshold` when
    /// `positive`, `coord >= threshold` otherwise.
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropLocalParams {
    pub clusters: [usize; 2],
    pub quota: QuotaMode,
}

impl Default for DropLocalParams {
    fn default() -> Self {
        Self {
            clusters: [3, 10],
            quota: QuotaMode::Random,
        }
    }
}

/// Copies a uniformly chosen member of `pool` into every dropped slot.
fn fill_duplicates(
    scene: &mut Scene,
    dropped: &[usize],
    pool: &[usize],
    rng: &mut SeededRng,
    map: &mut Vec<(usize, usize)>,
) {
    if dropped.is_empty() {
        return;
    }
    assert!(!pool.is_empty(), "no surviving point to duplicate");
    for &d in dropped {
        let src = pool[rng.index(pool.len())];
        scene.copy_point(d, src);
        map.push((d, src));
    }
}

/// Members not in `dropped`, order preserved.
fn complement(members: &[usize], dropped: &[usize], n: usize) -> Vec<usize> {
    let mut flag = vec![false; n];
    for &d in dropped {
        flag[d] = true;
    }
    members.iter().copied().filter(|&i| !flag[i]).collect()
}

/// Removal count for a pool, capped so that one point survives.
fn capped(count: usize, pool: usize) -> usize {
    count.min(pool.saturating_sub(1))
}

fn finish(
    scene: Scene,
    mut dropped: Vec<usize>,
    mut map: Vec<(usize, usize)>,
    annotations: Option<AnnotationSet>,
    trace: ReductionTrace,
) -> ReductionResult {
    dropped.sort_unstable();
    map.sort_unstable();
    ReductionResult {
        scene,
        dropped,
        duplicate_map: map,
        annotations,
        trace,
    }
}

/// Drops a uniformly random subset of all points.
pub fn drop_global(scene: &Scene, level: SeverityLevel, rng: &mut SeededRng) -> ReductionResult {
    let n = scene.len();
    let k = capped(drop_count(level, n), n);
    let mut dropped = rng.sample_indices(n, k);
    dropped.sort_unstable();
    let all: Vec<usize> = (0..n).collect();
    let survivors = complement(&all, &dropped, n);
    let mut out = scene.clone();
    let mut map = Vec::with_capacity(k);
    fill_duplicates(&mut out, &dropped, &survivors, rng, &mut map);
    finish(out, dropped, map, None, ReductionTrace::None)
}

fn split_quotas(total: usize, k: usize, mode: QuotaMode, rng: &mut SeededRng) -> Vec<usize> {
    match mode {
        QuotaMode::Equal => (0..k)
            .map(|i| total / k + usize::from(i < total % k))
            .collect(),
        QuotaMode::Random => {
            let mut weights: Vec<f64> = (0..k).map(|_| rng.uniform()).collect();
            let sum: f64 = weights.iter().sum();
            if !(sum > 0.0) {
                weights = vec![1.0; k];
            }
            let sum: f64 = weights.iter().sum();
            // largest-remainder apportionment keeps the exact total
            let raw: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
            let mut quotas: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
            let assigned: usize = quotas.iter().sum();
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| {
                let fa = raw[a] - raw[a].floor();
                let fb = raw[b] - raw[b].floor();
                fb.total_cmp(&fa).then(a.cmp(&b))
            });
            for &i in order.iter().take(total.saturating_sub(assigned)) {
                quotas[i] += 1;
            }
            quotas
        }
    }
}

/// Drops points in clusters around randomly chosen scene points; each
/// cluster removes its quota of nearest not-yet-dropped neighbors.
pub fn drop_local(
    scene: &Scene,
    level: SeverityLevel,
    rng: &mut SeededRng,
    params: &DropLocalParams,
) -> ReductionResult {
    let n = scene.len();
    let total = capped(drop_count(level, n), n);
    let mut out = scene.clone();
    if total == 0 {
        return finish(out, vec![], vec![], None, ReductionTrace::Clusters { clusters: vec![] });
    }
    let [kmin, kmax] = params.clusters;
    let k = rng.int_inclusive(kmin.max(1), kmax.max(kmin.max(1))).min(n);
    let centroids = rng.sample_indices(n, k);
    let quotas = split_quotas(total, k, params.quota, rng);

    let mut taken = vec![false; n];
    let mut dropped = Vec::with_capacity(total);
    let mut clusters = Vec::with_capacity(k);
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n);
    for (&c, &quota) in centroids.iter().zip(&quotas) {
        let center = scene.positions[c];
        let mut radius = 0.0;
        if quota > 0 {
            candidates.clear();
            candidates.extend(
                (0..n)
                    .filter(|&i| !taken[i])
                    .map(|i| (dist2(scene.positions[i], center), i)),
            );
            let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if quota < candidates.len() {
                candidates.select_nth_unstable_by(quota - 1, by_dist);
            }
            for &(d2, i) in &candidates[..quota] {
                taken[i] = true;
                dropped.push(i);
                radius = f64::max(radius, d2.sqrt());
            }
        }
        clusters.push(ClusterRecord {
            centroid_index: c,
            centroid: center,
            quota,
            radius,
        });
    }
    let survivors: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
    dropped.sort_unstable();
    let mut map = Vec::with_capacity(total);
    fill_duplicates(&mut out, &dropped, &survivors, rng, &mut map);
    finish(out, dropped, map, None, ReductionTrace::Clusters { clusters })
}

/// Drops the same fraction of every annotated instance, duplicating
/// survivors of that instance. Background points are left untouched.
pub fn drop_object(
    scene: &Scene,
    annotations: &AnnotationSet,
    level: SeverityLevel,
    rng: &mut SeededRng,
) -> ReductionResult {
    let n = scene.len();
    let groups = scene.instance_groups();
    let mut out = scene.clone();
    let mut dropped_all = Vec::new();
    let mut map = Vec::new();
    for inst in &annotations.instances {
        let Some(members) = groups.get(&inst.instance_id) else {
            continue;
        };
        let k = capped(drop_count(level, members.len()), members.len());
        let mut dropped = rng.sample_from(members, k);
        dropped.sort_unstable();
        let survivors = complement(members, &dropped, n);
        fill_duplicates(&mut out, &dropped, &survivors, rng, &mut map);
        dropped_all.extend(dropped);
    }
    finish(out, dropped_all, map, None, ReductionTrace::None)
}

/// Drops a fraction of the background (classes in `background_classes`
/// or unlabeled), duplicating surviving background points.
pub fn drop_background(
    scene: &Scene,
    level: SeverityLevel,
    rng: &mut SeededRng,
    background_classes: &[i32],
) -> Result<ReductionResult> {
    let mask = scene.background_mask(background_classes);
    if mask.is_empty() {
        return Err(Error::EmptyBackground);
    }
    let k = capped(drop_count(level, mask.len()), mask.len());
    let mut dropped = rng.sample_from(&mask, k);
    dropped.sort_unstable();
    let survivors = complement(&mask, &dropped, scene.len());
    let mut out = scene.clone();
    let mut map = Vec::with_capacity(k);
    fill_duplicates(&mut out, &dropped, &survivors, rng, &mut map);
    Ok(finish(out, dropped, map, None, ReductionTrace::None))
}

/// Slices away the most extreme points of every annotated instance along a
/// random axis and direction, and fits updated boxes to what remains.
pub fn drop_object_parts(
    scene: &Scene,
    annotations: &AnnotationSet,
    level: SeverityLevel,
    rng: &mut SeededRng,
) -> Result<ReductionResult> {
    let groups = scene.instance_groups();
    let mut out = scene.clone();
    let mut updated = annotations.clone();
    let mut dropped_all = Vec::new();
    let mut map = Vec::new();
    let mut slices = Vec::new();

    for (slot, inst) in annotations.instances.iter().enumerate() {
        let Some(members) = groups.get(&inst.instance_id) else {
            continue;
        };
        let axis = Axis::ALL[rng.index(3)];
        let positive = rng.coin();
        let a = axis.index();
        let sign = if positive { 1.0 } else { -1.0 };
        let k = capped(part_count(level, members.len()), members.len());

        // most extreme first along the signed axis; ties by index
        let mut order = members.clone();
        order.sort_by(|&i, &j| {
            let ci = sign * scene.positions[i][a];
            let cj = sign * scene.positions[j][a];
            cj.total_cmp(&ci).then(i.cmp(&j))
        });
        let (removed, kept) = order.split_at(k);
        let threshold = kept
            .iter()
            .map(|&i| sign * scene.positions[i][a])
            .fold(f64::NEG_INFINITY, f64::max)
            * sign;

        let mut removed = removed.to_vec();
        removed.sort_unstable();
        let mut kept = kept.to_vec();
        kept.sort_unstable();
        fill_duplicates(&mut out, &removed, &kept, rng, &mut map);

        let mut bbox = aabb_of(&scene.positions, &kept)?;
        for ax in 0..3 {
            if bbox.max[ax] <= bbox.min[ax] {
                bbox.min[ax] -= 0.5 * MIN_BOX_EXTENT;
                bbox.max[ax] += 0.5 * MIN_BOX_EXTENT;
            }
        }
        updated.instances[slot].bbox = bbox;
        slices.push(SliceRecord {
            instance_id: inst.instance_id,
            axis,
            positive,
            removed: removed.len(),
            threshold,
        });
        dropped_all.extend(removed);
    }
    Ok(finish(
        out,
        dropped_all,
        map,
        Some(updated),
        ReductionTrace::Slices { slices },
    ))
}

/// Drops every point whose up coordinate is at most the 1st percentile
/// plus `epsilon`. With `epsilon = 0` this removes the bottom 1%; a small
/// positive `epsilon` removes a whole flat floor.
pub fn drop_floor(
    scene: &Scene,
    rng: &mut SeededRng,
    up: Axis,
    epsilon: f64,
) -> Result<ReductionResult> {
    let n = scene.len();
    if n < 100 {
        return Err(Error::Degenerate(format!(
            "drop_floor needs at least 100 points, scene has {n}"
        )));
    }
    let a = up.index();
    let heights: Vec<f64> = scene.positions.iter().map(|p| p[a]).collect();
    let level = percentile(&heights, 1.0);
    let cutoff = level + epsilon;
    let (dropped, survivors): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| heights[i].partial_cmp(&cutoff) != Some(Ordering::Greater));
    if survivors.is_empty() {
        return Err(Error::Degenerate(
            "drop_floor would remove every point".into(),
        ));
    }
    let mut out = scene.clone();
    let mut map = Vec::with_capacity(dropped.len());
    fill_duplicates(&mut out, &dropped, &survivors, rng, &mut map);
    Ok(finish(
        out,
        dropped,
        map,
        None,
        ReductionTrace::Floor {
            percentile_height: level,
            cutoff,
        },
    ))
}
