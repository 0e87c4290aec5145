//! Detection scoring: greedy box matching, all-point interpolated AP,
//! mAP pooled across scenes, Corruption Error and mean Corruption Error.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corruption::{CorruptionGroup, CorruptionKind};
use crate::error::{Error, Result};
use crate::geometry::iou3d;
use crate::scene::{Aabb, AnnotationSet};

/// Default IoU threshold for a true positive.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.25;

/// Tolerance used when checking stored CE/mCE against the grid.
pub const REPORT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_id: i32,
    pub score: f64,
    #[serde(rename = "box")]
    pub bbox: Aabb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub scene_id: String,
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    pub fn empty(scene_id: impl Into<String>) -> Self {
        Self {
            scene_id: scene_id.into(),
            detections: Vec::new(),
        }
    }

    /// Detections equal to the ground-truth boxes, all with score 1.
    pub fn echo(gt: &AnnotationSet) -> Self {
        Self {
            scene_id: gt.scene_id.clone(),
            detections: gt
                .instances
                .iter()
                .map(|i| Detection {
                    class_id: i.class_id,
                    score: 1.0,
                    bbox: i.bbox,
                })
                .collect(),
        }
    }
}

/// Matching outcome for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneMatch {
    /// True-positive flag per detection, in input order.
    pub true_positive: Vec<bool>,
    /// Ground-truth instance matched by each detection, if any.
    pub matched_gt: Vec<Option<usize>>,
    pub gt_counts: BTreeMap<i32, usize>,
}

/// Indices of `scores` sorted by descending score, ties by index.
fn by_descending_score(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Greedy per-class matching: detections in descending score order each
/// claim the unmatched same-class ground truth of highest IoU, provided that
/// IoU reaches `iou_threshold`.
pub fn match_detections(
    detections: &DetectionSet,
    gt: &AnnotationSet,
    iou_threshold: f64,
) -> Result<SceneMatch> {
    if detections.scene_id != gt.scene_id {
        return Err(Error::SceneMismatch {
            detections: detections.scene_id.clone(),
            ground_truth: gt.scene_id.clone(),
        });
    }
    let mut gt_counts = BTreeMap::new();
    for inst in &gt.instances {
        *gt_counts.entry(inst.class_id).or_insert(0) += 1;
    }
    let dets = &detections.detections;
    let mut true_positive = vec![false; dets.len()];
    let mut matched_gt = vec![None; dets.len()];
    let mut used = vec![false; gt.instances.len()];
    for d in by_descending_score(dets.iter().map(|d| d.score)) {
        let det = &dets[d];
        let mut best: Option<(usize, f64)> = None;
        for (g, inst) in gt.instances.iter().enumerate() {
            if used[g] || inst.class_id != det.class_id {
                continue;
            }
            let iou = iou3d(&det.bbox, &inst.bbox);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, iou)) = best {
            if iou >= iou_threshold {
                used[g] = true;
                true_positive[d] = true;
                matched_gt[d] = Some(g);
            }
        }
    }
    Ok(SceneMatch {
        true_positive,
        matched_gt,
        gt_counts,
    })
}

/// Area under the all-point interpolated precision/recall curve.
///
/// `flags` are true-positive flags in descending score order. Returns
/// `None` when `gt_count` is zero. The sum is carried in exact rational
/// arithmetic while it fits in 128 bits, so small cases such as 5/6 come out
/// correctly rounded.
pub fn average_precision(flags: &[bool], gt_count: usize) -> Option<f64> {
    if gt_count == 0 {
        return None;
    }
    let n = flags.len();
    let mut tp = vec![0u128; n];
    let mut running = 0u128;
    for (i, &f) in flags.iter().enumerate() {
        running += u128::from(f);
        tp[i] = running;
    }
    // best[i]: index j >= i with the highest precision tp[j] / (j + 1)
    let mut best = vec![0usize; n];
    for i in (0..n).rev() {
        best[i] = if i + 1 < n && tp[best[i + 1]] * (i as u128 + 1) > tp[i] * (best[i + 1] as u128 + 1) {
            best[i + 1]
        } else {
            i
        };
    }
    // each true positive raises recall by 1 / gt_count
    let terms = (0..n)
        .filter(|&i| flags[i])
        .take(gt_count)
        .map(|i| (tp[best[i]], (best[i] as u128 + 1) * gt_count as u128));
    let ap = exact_sum(terms.clone()).unwrap_or_else(|| terms.map(|(a, b)| a as f64 / b as f64).sum());
    Some(ap.clamp(0.0, 1.0))
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Sum of fractions `a / b`, or `None` on overflow.
fn exact_sum(terms: impl Iterator<Item = (u128, u128)>) -> Option<f64> {
    const EXACT: u128 = 1 << f64::MANTISSA_DIGITS;
    let (mut num, mut den) = (0u128, 1u128);
    for (a, b) in terms {
        let g = gcd(den, b);
        let lcm = (den / g).checked_mul(b)?;
        num = num.checked_mul(lcm / den)?.checked_add(a.checked_mul(lcm / b)?)?;
        den = lcm;
        let r = gcd(num, den).max(1);
        num /= r;
        den /= r;
    }
    (num < EXACT && den < EXACT).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class_id: i32,
    pub ap: f64,
    pub gt_count: usize,
    pub detection_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    /// Mean AP over classes with at least one ground-truth box; 0 when no
    /// class has any.
    pub map: f64,
    pub iou_threshold: f64,
    pub scene_count: usize,
    pub per_class: Vec<ClassAp>,
}

/// mAP over a set of scenes. Detections are pooled across scenes per class
/// before the precision/recall curve is built; equal scores keep scene order,
/// then input order.
pub fn mean_ap(scenes: &[(DetectionSet, AnnotationSet)], iou_threshold: f64) -> Result<MapSummary> {
    let mut pooled: BTreeMap<i32, Vec<(f64, bool)>> = BTreeMap::new();
    let mut gt_counts: BTreeMap<i32, usize> = BTreeMap::new();
    for (dets, gt) in scenes {
        let m = match_detections(dets, gt, iou_threshold)?;
        for (class, count) in m.gt_counts {
            *gt_counts.entry(class).or_insert(0) += count;
        }
        for (d, det) in dets.detections.iter().enumerate() {
            pooled
                .entry(det.class_id)
                .or_default()
                .push((det.score, m.true_positive[d]));
        }
    }
    let mut per_class = Vec::new();
    for (&class_id, &gt_count) in &gt_counts {
        if gt_count == 0 {
            continue;
        }
        let entries = pooled.get(&class_id).map(Vec::as_slice).unwrap_or(&[]);
        let flags: Vec<bool> = by_descending_score(entries.iter().map(|e| e.0))
            .into_iter()
            .map(|i| entries[i].1)
            .collect();
        per_class.push(ClassAp {
            class_id,
            ap: average_precision(&flags, gt_count).unwrap_or(0.0),
            gt_count,
            detection_count: entries.len(),
        });
    }
    let map = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|c| c.ap).sum::<f64>() / per_class.len() as f64
    };
    Ok(MapSummary {
        map,
        iou_threshold,
        scene_count: scenes.len(),
        per_class,
    })
}

/// mAP per corruption and level for one method, plus its clean mAP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodGrid {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_map: Option<f64>,
    /// corruption name -> level -> mAP
    pub maps: BTreeMap<String, BTreeMap<u8, f64>>,
}

impl MethodGrid {
    pub fn new(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            clean_map: None,
            maps: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, corruption: impl Into<String>, level: u8, map: f64) {
        self.maps.entry(corruption.into()).or_default().insert(level, map);
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MapGrid {
    pub methods: BTreeMap<String, MethodGrid>,
}

impl MapGrid {
    pub fn insert(&mut self, grid: MethodGrid) {
        self.methods.insert(grid.method.clone(), grid);
    }

    pub fn method(&self, name: &str) -> Result<&MethodGrid> {
        self.methods
            .get(name)
            .ok_or_else(|| Error::MissingMethod(name.to_string()))
    }

    /// Every mAP must be finite and in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        for g in self.methods.values() {
            let clean = g.clean_map.iter().map(|&m| ("clean".to_string(), 0u8, m));
            let entries = g
                .maps
                .iter()
                .flat_map(|(c, lv)| lv.iter().map(move |(&l, &m)| (c.clone(), l, m)));
            for (c, l, m) in clean.chain(entries) {
                if !(0.0..=1.0).contains(&m) {
                    return Err(Error::Config(format!(
                        "mAP {m} for {} / {c} / level {l} is outside [0, 1]",
                        g.method
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `sum_l (1 - mAP_l) / sum_l (1 - mAP_baseline_l)` over every level present
/// for either method; both must cover the same levels.
pub fn corruption_error(grid: &MapGrid, method: &str, corruption: &str, baseline: &str) -> Result<f64> {
    let m = grid.method(method)?;
    let b = grid.method(baseline)?;
    let empty = BTreeMap::new();
    let ml = m.maps.get(corruption).unwrap_or(&empty);
    let bl = b.maps.get(corruption).unwrap_or(&empty);
    let levels: BTreeSet<u8> = ml.keys().chain(bl.keys()).copied().collect();
    if levels.is_empty() {
        return Err(Error::MissingLevel {
            method: baseline.to_string(),
            corruption: corruption.to_string(),
            level: 1,
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for l in levels {
        let missing = |who: &str| Error::MissingLevel {
            method: who.to_string(),
            corruption: corruption.to_string(),
            level: l,
        };
        num += 1.0 - ml.get(&l).ok_or_else(|| missing(method))?;
        den += 1.0 - bl.get(&l).ok_or_else(|| missing(baseline))?;
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator(corruption.to_string()));
    }
    Ok(num / den)
}

/// Arithmetic mean of [`corruption_error`] over `corruptions`.
pub fn mean_corruption_error(
    grid: &MapGrid,
    method: &str,
    corruptions: &[String],
    baseline: &str,
) -> Result<f64> {
    if corruptions.is_empty() {
        return Err(Error::EmptyCorruptionSet);
    }
    let mut sum = 0.0;
    for c in corruptions {
        sum += corruption_error(grid, method, c, baseline)?;
    }
    Ok(sum / corruptions.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_map: Option<f64>,
    pub ce: BTreeMap<String, f64>,
    pub mce: f64,
    /// mCE restricted to each corruption family present in the set.
    #[serde(default)]
    pub group_mce: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub baseline: String,
    pub corruption_set: Vec<String>,
    pub note: String,
    pub methods: Vec<MethodReport>,
    pub grid: MapGrid,
}

fn canonical_order(names: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut names: Vec<String> = names.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    let rank = |n: &String| {
        n.parse::<CorruptionKind>()
            .ok()
            .and_then(|k| CorruptionKind::ALL.iter().position(|&x| x == k))
            .unwrap_or(usize::MAX)
    };
    names.sort_by(|a, b| rank(a).cmp(&rank(b)).then(a.cmp(b)));
    names
}

fn group_name(g: CorruptionGroup) -> &'static str {
    match g {
        CorruptionGroup::Reduction => "reduction",
        CorruptionGroup::Addition => "addition",
        CorruptionGroup::Alteration => "alteration",
    }
}

pub fn report_note(corruption_set: &[String]) -> String {
    format!(
        "mCE is the arithmetic mean of CE over the {} corruption(s) listed in corruption_set; \
         group_mce averages only within each corruption family, so an mCE over a subset \
         differs from one over all corruptions",
        corruption_set.len()
    )
}

/// CE for every (method, corruption) and mCE for every method in `grid`.
/// The corruption set defaults to every corruption the baseline covers.
pub fn build_report(
    grid: &MapGrid,
    baseline: &str,
    corruption_set: Option<&[String]>,
) -> Result<RobustnessReport> {
    grid.validate()?;
    let base = grid.method(baseline)?;
    let set = match corruption_set {
        Some(s) => canonical_order(s.iter().cloned()),
        None => canonical_order(base.maps.keys().cloned()),
    };
    if set.is_empty() {
        return Err(Error::EmptyCorruptionSet);
    }
    let mut methods = Vec::new();
    for (name, g) in &grid.methods {
        let mut ce = BTreeMap::new();
        for c in &set {
            ce.insert(c.clone(), corruption_error(grid, name, c, baseline)?);
        }
        let mce = mean_corruption_error(grid, name, &set, baseline)?;
        let mut group_mce = BTreeMap::new();
        for group in [
            CorruptionGroup::Reduction,
            CorruptionGroup::Addition,
            CorruptionGroup::Alteration,
        ] {
            let members: Vec<String> = set
                .iter()
                .filter(|c| c.parse::<CorruptionKind>().is_ok_and(|k| k.group() == group))
                .cloned()
                .collect();
            if !members.is_empty() {
                group_mce.insert(
                    group_name(group).to_string(),
                    mean_corruption_error(grid, name, &members, baseline)?,
                );
            }
        }
        methods.push(MethodReport {
            method: name.clone(),
            clean_map: g.clean_map,
            ce,
            mce,
            group_mce,
        });
    }
    // baseline first, then by name
    methods.sort_by(|a, b| (a.method != baseline).cmp(&(b.method != baseline)).then(a.method.cmp(&b.method)));
    Ok(RobustnessReport {
        baseline: baseline.to_string(),
        note: report_note(&set),
        corruption_set: set,
        methods,
        grid: grid.clone(),
    })
}

impl RobustnessReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// Recomputes every CE and mCE from the embedded grid.
    pub fn verify(&self) -> Result<()> {
        self.verify_with_tolerance(REPORT_TOLERANCE)
    }

    pub fn verify_with_tolerance(&self, tolerance: f64) -> Result<()> {
        for m in &self.methods {
            for c in &self.corruption_set {
                let stored = *m.ce.get(c).ok_or_else(|| {
                    Error::Inconsistent(format!("{}: no CE stored for {c}", m.method))
                })?;
                let fresh = corruption_error(&self.grid, &m.method, c, &self.baseline)?;
                if (stored - fresh).abs() > tolerance {
                    return Err(Error::Inconsistent(format!(
                        "{} / {c}: stored CE {stored} vs recomputed {fresh}",
                        m.method
                    )));
                }
            }
            let fresh = mean_corruption_error(&self.grid, &m.method, &self.corruption_set, &self.baseline)?;
            if (m.mce - fresh).abs() > tolerance {
                return Err(Error::Inconsistent(format!(
                    "{}: stored mCE {} vs recomputed {fresh}",
                    m.method, m.mce
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::scene::Instance;

    fn unit(offset: f64) -> Aabb {
        Aabb::new([offset, 0.0, 0.0], [offset + 1.0, 1.0, 1.0])
    }

    fn gt(boxes: &[(i32, Aabb)]) -> AnnotationSet {
        AnnotationSet {
            scene_id: "s".into(),
            instances: boxes
                .iter()
                .enumerate()
                .map(|(i, &(class_id, bbox))| Instance {
                    instance_id: i as i32,
                    class_id,
                    bbox,
                })
                .collect(),
        }
    }

    fn dets(items: &[(i32, f64, Aabb)]) -> DetectionSet {
        DetectionSet {
            scene_id: "s".into(),
            detections: items
                .iter()
                .map(|&(class_id, score, bbox)| Detection { class_id, score, bbox })
                .collect(),
        }
    }

    #[test]
    fn exact_detection_is_true_positive() {
        let g = gt(&[(1, unit(0.0))]);
        let m = match_detections(&dets(&[(1, 0.9, unit(0.0))]), &g, 0.25).unwrap();
        assert_eq!(m.true_positive, vec![true]);
        assert_eq!(m.gt_counts[&1], 1);
    }

    #[test]
    fn two_detections_one_ground_truth() {
        let g = gt(&[(1, unit(0.0))]);
        let m = match_detections(
            &dets(&[(1, 0.4, unit(0.0)), (1, 0.8, unit(0.1))]),
            &g,
            0.25,
        )
        .unwrap();
        assert_eq!(m.true_positive, vec![false, true]);
    }

    #[test]
    fn class_and_threshold_gate_matches() {
        let g = gt(&[(1, unit(0.0))]);
        let m = match_detections(&dets(&[(2, 0.9, unit(0.0)), (1, 0.5, unit(0.0).scaled(0.6))]), &g, 0.25).unwrap();
        assert_eq!(m.true_positive, vec![false, false]);
    }

    #[test]
    fn scene_mismatch_is_an_error() {
        let g = gt(&[(1, unit(0.0))]);
        let mut d = dets(&[]);
        d.scene_id = "other".into();
        assert!(matches!(match_detections(&d, &g, 0.25), Err(Error::SceneMismatch { .. })));
    }

    #[test]
    fn hand_computed_ap() {
        // TP, FP, TP with 2 GT: envelope 1, 2/3, 2/3 -> 0.5 * 1 + 0.5 * 2/3
        assert_eq!(average_precision(&[true, false, true], 2), Some(5.0 / 6.0));
        assert_eq!(average_precision(&[true, true], 2), Some(1.0));
        assert_eq!(average_precision(&[], 3), Some(0.0));
        assert_eq!(average_precision(&[false, false], 0), None);
    }

    #[test]
    fn perfect_and_empty_detectors() {
        let g = gt(&[(1, unit(0.0)), (2, unit(3.0)), (1, unit(6.0))]);
        let perfect = mean_ap(&[(DetectionSet::echo(&g), g.clone())], 0.25).unwrap();
        assert_eq!(perfect.map, 1.0);
        assert!(perfect.per_class.iter().all(|c| c.ap == 1.0));
        let none = mean_ap(&[(DetectionSet::empty("s"), g.clone())], 0.25).unwrap();
        assert_eq!(none.map, 0.0);
        assert_eq!(none.per_class.len(), 2);
    }

    #[test]
    fn classes_without_ground_truth_are_excluded() {
        let g = gt(&[(1, unit(0.0))]);
        let d = dets(&[(1, 0.9, unit(0.0)), (7, 0.9, unit(4.0))]);
        let s = mean_ap(&[(d, g)], 0.25).unwrap();
        assert_eq!(s.per_class.len(), 1);
        assert_eq!(s.map, 1.0);
    }

    /// Exhaustive re-implementation of the greedy protocol: repeatedly take
    /// the first unprocessed detection of maximal score, scanning all GT.
    fn oracle_flags(d: &DetectionSet, g: &AnnotationSet, thr: f64) -> Vec<bool> {
        let n = d.detections.len();
        let mut done = vec![false; n];
        let mut used = vec![false; g.instances.len()];
        let mut out = vec![false; n];
        for _ in 0..n {
            let mut pick = None;
            for i in 0..n {
                if done[i] {
                    continue;
                }
                match pick {
                    None => pick = Some(i),
                    Some(p) if d.detections[i].score > d.detections[p].score => pick = Some(i),
                    _ => {}
                }
            }
            let i = pick.unwrap();
            done[i] = true;
            let mut best_iou = -1.0;
            let mut best_g = None;
            for (gi, inst) in g.instances.iter().enumerate() {
                if !used[gi] && inst.class_id == d.detections[i].class_id {
                    let v = iou3d(&inst.bbox, &d.detections[i].bbox);
                    if v > best_iou {
                        best_iou = v;
                        best_g = Some(gi);
                    }
                }
            }
            if let Some(gi) = best_g {
                if best_iou >= thr {
                    used[gi] = true;
                    out[i] = true;
                }
            }
        }
        out
    }

    fn random_instance(r: &mut SeededRng, ndet: usize, ngt: usize) -> (DetectionSet, AnnotationSet) {
        let rand_box = |r: &mut SeededRng| {
            let o = [r.uniform_in(0.0, 3.0), r.uniform_in(0.0, 3.0), r.uniform_in(0.0, 1.0)];
            let e = [r.uniform_in(0.3, 1.5), r.uniform_in(0.3, 1.5), r.uniform_in(0.3, 1.5)];
            Aabb::new(o, [o[0] + e[0], o[1] + e[1], o[2] + e[2]])
        };
        let g: Vec<(i32, Aabb)> = (0..ngt).map(|_| (r.int_inclusive(0, 2) as i32, rand_box(r))).collect();
        let d: Vec<(i32, f64, Aabb)> = (0..ndet)
            .map(|_| {
                // coarse scores force ties
                let score = (r.int_inclusive(0, 4) as f64) / 4.0;
                if !g.is_empty() && r.coin() {
                    let (c, b) = g[r.index(g.len())];
                    let jitter = r.uniform_in(-0.3, 0.3);
                    (c, score, Aabb::new(b.min.map(|v| v + jitter), b.max.map(|v| v + jitter)))
                } else {
                    (r.int_inclusive(0, 2) as i32, score, rand_box(r))
                }
            })
            .collect();
        (dets(&d), gt(&g))
    }

    #[test]
    fn greedy_matching_matches_exhaustive_oracle() {
        let mut r = SeededRng::new(2024);
        for _ in 0..200 {
            let (d, g) = random_instance(&mut r, 20, 10);
            let m = match_detections(&d, &g, 0.25).unwrap();
            assert_eq!(m.true_positive, oracle_flags(&d, &g, 0.25));
        }
    }

    /// Integrates the interpolated precision p(r) = max{precision_j : recall_j >= r}
    /// over each recall interval, scanning every cutoff.
    fn brute_force_ap(flags: &[bool], gt: usize) -> f64 {
        let n = flags.len();
        let pr: Vec<(f64, f64)> = (1..=n)
            .map(|k| {
                let tp = flags[..k].iter().filter(|&&f| f).count() as f64;
                (tp / gt as f64, tp / k as f64)
            })
            .collect();
        let mut recalls: Vec<f64> = pr.iter().map(|p| p.0).filter(|&r| r > 0.0).collect();
        recalls.sort_by(f64::total_cmp);
        recalls.dedup();
        let mut area = 0.0;
        let mut prev = 0.0;
        for r in recalls {
            let p = pr.iter().filter(|q| q.0 >= r).map(|q| q.1).fold(0.0, f64::max);
            area += (r - prev) * p;
            prev = r;
        }
        area
    }

    #[test]
    fn ap_matches_brute_force_integration() {
        let mut r = SeededRng::new(99);
        for _ in 0..500 {
            let n = r.int_inclusive(0, 20);
            let flags: Vec<bool> = (0..n).map(|_| r.coin()).collect();
            let tps = flags.iter().filter(|&&f| f).count();
            let gt = tps.max(1) + r.int_inclusive(0, 10 - tps.min(10));
            let ap = average_precision(&flags, gt).unwrap();
            assert!((ap - brute_force_ap(&flags, gt)).abs() < 1e-12, "{flags:?} {gt}");
        }
    }

    #[test]
    fn exact_path_agrees_with_float_fallback() {
        let flags: Vec<bool> = (0..400).map(|i| i % 3 != 1).collect();
        let ap = average_precision(&flags, 300).unwrap();
        assert!((ap - brute_force_ap(&flags, 300)).abs() < 1e-12);
    }

    #[test]
    fn deleting_a_false_positive_never_lowers_ap() {
        let mut r = SeededRng::new(5);
        for _ in 0..200 {
            let n = r.int_inclusive(1, 20);
            let flags: Vec<bool> = (0..n).map(|_| r.coin()).collect();
            let gt_count = flags.iter().filter(|&&f| f).count() + r.int_inclusive(0, 3);
            if gt_count == 0 {
                continue;
            }
            let ap = average_precision(&flags, gt_count).unwrap();
            assert!((0.0..=1.0).contains(&ap));
            for i in (0..n).filter(|&i| !flags[i]) {
                let mut fewer = flags.clone();
                fewer.remove(i);
                assert!(average_precision(&fewer, gt_count).unwrap() >= ap - 1e-15);
            }
        }
    }

    fn grid_with(method: &str, corruption: &str, maps: &[f64]) -> MethodGrid {
        let mut g = MethodGrid::new(method);
        for (i, &m) in maps.iter().enumerate() {
            g.set(corruption, i as u8 + 1, m);
        }
        g
    }

    #[test]
    fn ce_hand_cases() {
        let mut grid = MapGrid::default();
        grid.insert(grid_with("m", "c", &[0.6, 0.5, 0.4]));
        grid.insert(grid_with("base", "c", &[0.5, 0.4, 0.3]));
        grid.insert(grid_with("perfect", "c", &[1.0, 1.0, 1.0]));
        let ce = corruption_error(&grid, "m", "c", "base").unwrap();
        assert!((ce - 1.5 / 1.8).abs() < 1e-12);
        assert_eq!(corruption_error(&grid, "base", "c", "base").unwrap(), 1.0);
        assert_eq!(corruption_error(&grid, "perfect", "c", "base").unwrap(), 0.0);
        assert!(matches!(
            corruption_error(&grid, "m", "c", "perfect"),
            Err(Error::ZeroDenominator(_))
        ));
    }

    #[test]
    fn ce_missing_level_and_method() {
        let mut grid = MapGrid::default();
        grid.insert(grid_with("m", "c", &[0.6, 0.5]));
        grid.insert(grid_with("base", "c", &[0.5, 0.4, 0.3]));
        assert!(matches!(
            corruption_error(&grid, "m", "c", "base"),
            Err(Error::MissingLevel { level: 3, .. })
        ));
        assert!(matches!(
            corruption_error(&grid, "nobody", "c", "base"),
            Err(Error::MissingMethod(_))
        ));
    }

    #[test]
    fn ce_is_scale_consistent() {
        let mut r = SeededRng::new(8);
        for _ in 0..50 {
            let m: Vec<f64> = (0..5).map(|_| r.uniform_in(0.2, 0.9)).collect();
            let b: Vec<f64> = (0..5).map(|_| r.uniform_in(0.2, 0.9)).collect();
            let c = r.uniform_in(0.1, 1.0);
            let scale = |v: &[f64]| v.iter().map(|x| 1.0 - c * (1.0 - x)).collect::<Vec<_>>();
            let mut g1 = MapGrid::default();
            g1.insert(grid_with("m", "k", &m));
            g1.insert(grid_with("b", "k", &b));
            let mut g2 = MapGrid::default();
            g2.insert(grid_with("m", "k", &scale(&m)));
            g2.insert(grid_with("b", "k", &scale(&b)));
            let a = corruption_error(&g1, "m", "k", "b").unwrap();
            let s = corruption_error(&g2, "m", "k", "b").unwrap();
            assert!((a - s).abs() < 1e-9);
        }
    }

    #[test]
    fn mce_cases() {
        let mut grid = MapGrid::default();
        let mut m = MethodGrid::new("m");
        m.set("a", 1, 0.6);
        m.set("b", 1, 0.4);
        let mut b = MethodGrid::new("base");
        b.set("a", 1, 0.5);
        b.set("b", 1, 0.5);
        grid.insert(m);
        grid.insert(b);
        let set = vec!["a".to_string(), "b".to_string()];
        // CEs 0.8 and 1.2
        assert!((mean_corruption_error(&grid, "m", &set, "base").unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(mean_corruption_error(&grid, "base", &set, "base").unwrap(), 1.0);
        assert!(matches!(
            mean_corruption_error(&grid, "m", &[], "base"),
            Err(Error::EmptyCorruptionSet)
        ));
    }

    #[test]
    fn report_is_self_consistent_and_baseline_is_one() {
        let mut grid = MapGrid::default();
        let mut m = MethodGrid::new("m");
        let mut b = MethodGrid::new("base");
        m.clean_map = Some(0.65);
        b.clean_map = Some(0.58);
        for (ci, kind) in ["drop_global", "add_local", "jitter"].iter().enumerate() {
            for l in 1..=5u8 {
                m.set(*kind, l, 0.6 - 0.03 * l as f64 + 0.01 * ci as f64);
                b.set(*kind, l, 0.55 - 0.04 * l as f64);
            }
        }
        grid.insert(m);
        grid.insert(b);
        let rep = build_report(&grid, "base", None).unwrap();
        assert_eq!(rep.corruption_set, vec!["drop_global", "add_local", "jitter"]);
        assert_eq!(rep.methods[0].method, "base");
        assert_eq!(rep.methods[0].mce, 1.0);
        assert!(rep.methods[0].ce.values().all(|&c| c == 1.0));
        assert_eq!(rep.methods[0].group_mce.len(), 3);
        rep.verify().unwrap();

        let mut broken = rep.clone();
        broken.methods[1].mce += 1e-6;
        assert!(matches!(broken.verify(), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn grid_rejects_out_of_range_maps() {
        let mut grid = MapGrid::default();
        grid.insert(grid_with("base", "c", &[1.2]));
        assert!(build_report(&grid, "base", None).is_err());
    }
}
