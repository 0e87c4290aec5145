//! Batch pipeline behind the `pcc` binary.
//!
//! Dataset layout: `<dataset_dir>/<scene_id>.ply` with optional
//! `<scene_id>.json` annotations. Corrupted tree:
//! `<output_dir>/<kind>/<level>/<scene_id>.ply` plus the original
//! annotations as `<scene_id>.json` and, where a corruption emits new boxes,
//! `<scene_id>.updated.json`. Clean copies go to `<output_dir>/clean/` and a
//! `manifest.json` sits at the root.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corruption::{
    self, add_ratio, drop_ratio, inclination_degrees, jitter_sigma, part_fraction, CorruptionConfig,
    CorruptionKind, CorruptionOutcome, CorruptionSpec, SeverityLevel,
};
use crate::error::{Error, Result};
use crate::io::json::{read_json, write_json};
use crate::io::{self as pio, PlyFormat};
use crate::metrics::{self, mean_ap, DetectionSet, MapSummary, MethodGrid, RobustnessReport};
use crate::rng::child_seed;
use crate::scene::{validate_scene, AnnotationSet, Scene};
use crate::synth::{self, SyntheticSceneSpec};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CLEAN_DIR: &str = "clean";
pub const UPDATED_SUFFIX: &str = ".updated.json";
pub const SEED_ENV: &str = "PCC_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSelection {
    pub kind: CorruptionKind,
    /// Defaults to every level the kind supports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Binary,
    Ascii,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Empty selects all kinds at all levels.
    #[serde(default)]
    pub corruptions: Vec<CorruptionSelection>,
    #[serde(default)]
    pub global_seed: u64,
    /// Scene-level worker threads; 0 uses one per core.
    #[serde(default)]
    pub worker_count: usize,
    #[serde(default)]
    pub params: CorruptionConfig,
    #[serde(default)]
    pub ply_format: OutputFormat,
}

impl RunConfig {
    pub fn new(dataset_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset_dir: dataset_dir.into(),
            output_dir: output_dir.into(),
            corruptions: Vec::new(),
            global_seed: 0,
            worker_count: 0,
            params: CorruptionConfig::default(),
            ply_format: OutputFormat::Binary,
        }
    }

    /// Reads a JSON config; relative directories resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for dir in [&mut cfg.dataset_dir, &mut cfg.output_dir] {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        Ok(cfg)
    }

    /// Expanded (kind, level) task list in canonical order.
    pub fn tasks(&self) -> Result<Vec<(CorruptionKind, SeverityLevel)>> {
        let selections: Vec<CorruptionSelection> = if self.corruptions.is_empty() {
            CorruptionKind::ALL
                .iter()
                .map(|&kind| CorruptionSelection { kind, levels: None })
                .collect()
        } else {
            self.corruptions.clone()
        };
        let mut out = Vec::new();
        for sel in selections {
            let levels = match &sel.levels {
                None => sel.kind.levels(),
                Some(ls) => ls.iter().map(|&l| SeverityLevel::new(l)).collect::<Result<Vec<_>>>()?,
            };
            for level in levels {
                CorruptionSpec::new(sel.kind, level, 0)?;
                out.push((sel.kind, level));
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config("no corruption tasks selected".into()));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dataset_dir.is_dir() {
            return Err(Error::Config(format!(
                "dataset_dir {} is not a directory",
                self.dataset_dir.display()
            )));
        }
        self.params.validate()?;
        self.tasks().map(|_| ())
    }

    /// Restricts the selection to `kinds` and/or `levels`. Single-level kinds
    /// keep level 1 whatever `levels` says.
    pub fn restrict(&mut self, kinds: Option<&[CorruptionKind]>, levels: Option<&[u8]>) -> Result<()> {
        for &l in levels.unwrap_or(&[]) {
            SeverityLevel::new(l)?;
        }
        let current = self.tasks()?;
        let mut by_kind: BTreeMap<CorruptionKind, Vec<u8>> = BTreeMap::new();
        for (k, l) in current {
            if kinds.is_some_and(|ks| !ks.contains(&k)) {
                continue;
            }
            if !k.is_single_level() && levels.is_some_and(|ls| !ls.contains(&l.get())) {
                continue;
            }
            by_kind.entry(k).or_default().push(l.get());
        }
        self.corruptions = by_kind
            .into_iter()
            .map(|(kind, levels)| CorruptionSelection { kind, levels: Some(levels) })
            .collect();
        if self.corruptions.is_empty() {
            return Err(Error::Config("filters select no corruption tasks".into()));
        }
        Ok(())
    }
}

/// Seed precedence: explicit value, then `PCC_SEED`, then the config.
pub fn resolve_seed(cli: Option<u64>, env: Option<&str>, config: u64) -> Result<u64> {
    if let Some(s) = cli {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV}=`{v}` is not an unsigned 64-bit integer"))),
        None => Ok(config),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub kind: CorruptionKind,
    pub level: u8,
    pub scene_id: String,
    pub child_seed: u64,
    pub point_count: usize,
    pub dropped: usize,
    pub added: usize,
    /// Original points displaced by additions.
    pub removed_original: usize,
    pub updated_annotations: bool,
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedTask {
    pub scene_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<CorruptionKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u8>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub global_seed: u64,
    pub params: CorruptionConfig,
    pub scenes: Vec<String>,
    pub entries: Vec<ManifestEntry>,
    pub skipped: Vec<SkippedTask>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

fn schedule_params(kind: CorruptionKind, level: SeverityLevel, cfg: &CorruptionConfig) -> Value {
    use CorruptionKind::*;
    match kind {
        DropGlobal | DropObject => json!({ "ratio": drop_ratio(level) }),
        DropLocal => json!({
            "ratio": drop_ratio(level),
            "clusters": cfg.drop_local_clusters,
            "quota": cfg.drop_local_quota,
        }),
        DropBackground => json!({ "ratio": drop_ratio(level), "classes": cfg.background_classes }),
        DropObjectParts => json!({ "fraction": part_fraction(level) }),
        DropFloor => json!({ "percentile": 1.0, "epsilon": cfg.floor_epsilon, "up_axis": cfg.up_axis }),
        AddGlobal => json!({ "ratio": add_ratio(level) }),
        AddLocal => json!({
            "ratio": add_ratio(level),
            "centroids": cfg.add_local_centroids,
            "sigma": cfg.add_local_sigma,
        }),
        SceneExpansion => json!({
            "ratio": add_ratio(level),
            "gap_ratio": cfg.expansion_gap_ratio,
            "offset_ratio": cfg.expansion_offset_ratio,
        }),
        Jitter => json!({ "sigma": jitter_sigma(level) }),
        LocalNoise => json!({ "sigma": jitter_sigma(SeverityLevel::MAX), "target_class": cfg.noise_target_class }),
        BackgroundNoise => json!({ "sigma": jitter_sigma(SeverityLevel::MAX), "spared_class": cfg.noise_target_class }),
        FloorInclination => json!({
            "degrees": inclination_degrees(level),
            "axis": cfg.inclination_axis,
            "rotate_annotations": cfg.rotate_annotations,
        }),
    }
}

fn outcome_trace(outcome: &CorruptionOutcome) -> Value {
    let v = match outcome {
        CorruptionOutcome::Reduction(r) => serde_json::to_value(&r.trace),
        CorruptionOutcome::Addition(r) => serde_json::to_value(&r.trace),
        CorruptionOutcome::Alteration(r) => serde_json::to_value(r.displacement_stats),
    };
    v.unwrap_or(Value::Null)
}

fn ply_format(f: OutputFormat) -> PlyFormat {
    match f {
        OutputFormat::Binary => PlyFormat::BinaryLittleEndian,
        OutputFormat::Ascii => PlyFormat::Ascii,
    }
}

/// `<dir>/*.ply`, sorted by file name.
pub fn list_scene_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "ply") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn annotation_path(ply: &Path) -> PathBuf {
    ply.with_extension("json")
}

fn load_pair(ply: &Path) -> Result<(Scene, Option<AnnotationSet>)> {
    let scene = pio::load_scene(ply)?;
    let ann_path = annotation_path(ply);
    let ann = if ann_path.is_file() {
        Some(pio::load_annotations(&ann_path)?)
    } else {
        None
    };
    let violations = validate_scene(&scene, ann.as_ref());
    if !violations.is_empty() {
        return Err(Error::InvalidScene {
            scene_id: scene.scene_id.clone(),
            violations: violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        });
    }
    Ok((scene, ann))
}

struct SceneReport {
    scene_id: Option<String>,
    entries: Vec<ManifestEntry>,
    skipped: Vec<SkippedTask>,
}

fn set_dir(root: &Path, kind: CorruptionKind, level: SeverityLevel) -> PathBuf {
    root.join(kind.name()).join(level.get().to_string())
}

/// Runs every task on one scene. Errors are fatal only for output IO.
fn corrupt_scene(
    ply: &Path,
    cfg: &RunConfig,
    seed: u64,
    tasks: &[(CorruptionKind, SeverityLevel)],
) -> Result<SceneReport> {
    let stem = ply.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let (scene, ann) = match load_pair(ply) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("skipping {}: {e}", ply.display());
            return Ok(SceneReport {
                scene_id: None,
                entries: Vec::new(),
                skipped: vec![SkippedTask {
                    scene_id: stem,
                    kind: None,
                    level: None,
                    reason: e.to_string(),
                }],
            });
        }
    };
    let id = scene.scene_id.clone();
    let format = ply_format(cfg.ply_format);
    let out = &cfg.output_dir;
    pio::save_scene_as(&scene, &out.join(CLEAN_DIR).join(format!("{id}.ply")), format)?;
    if let Some(a) = &ann {
        pio::save_annotations(a, &out.join(CLEAN_DIR).join(format!("{id}.json")))?;
    }

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for &(kind, level) in tasks {
        let cs = child_seed(seed, &id, kind.name(), level.get());
        let spec = CorruptionSpec::new(kind, level, cs)?;
        let outcome = corruption::apply(&spec, &scene, ann.as_ref(), &cfg.params).and_then(|o| {
            // original boxes stay amodal and may outlive a fully erased object
            let violations = validate_scene(o.scene(), o.annotations());
            if violations.is_empty() {
                Ok(o)
            } else {
                Err(Error::InvalidScene {
                    scene_id: id.clone(),
                    violations: violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
                })
            }
        });
        let outcome = match outcome {
            Ok(o) => o,
            Err(e) => {
                log::warn!("{id} {kind} level {level}: {e}");
                skipped.push(SkippedTask {
                    scene_id: id.clone(),
                    kind: Some(kind),
                    level: Some(level.get()),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let dir = set_dir(out, kind, level);
        pio::save_scene_as(outcome.scene(), &dir.join(format!("{id}.ply")), format)?;
        if let Some(a) = &ann {
            pio::save_annotations(a, &dir.join(format!("{id}.json")))?;
        }
        if let Some(updated) = outcome.annotations() {
            pio::save_annotations(updated, &dir.join(format!("{id}{UPDATED_SUFFIX}")))?;
        }
        let mut params = schedule_params(kind, level, &cfg.params);
        params["trace"] = outcome_trace(&outcome);
        entries.push(ManifestEntry {
            kind,
            level: level.get(),
            scene_id: id.clone(),
            child_seed: cs,
            point_count: outcome.scene().len(),
            dropped: outcome.dropped_count(),
            added: outcome.added_count(),
            removed_original: match &outcome {
                CorruptionOutcome::Addition(r) => r.removed_original_count(),
                _ => 0,
            },
            updated_annotations: outcome.annotations().is_some(),
            params,
        });
    }
    Ok(SceneReport {
        scene_id: Some(id),
        entries,
        skipped,
    })
}

/// Corrupts every scene of the dataset and writes the manifest. Unreadable
/// or invalid scenes and failing tasks are listed under `skipped`.
pub fn run_corrupt(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let tasks = cfg.tasks()?;
    let seed = cfg.global_seed;
    let scenes = list_scene_files(&cfg.dataset_dir)?;
    let out = &cfg.output_dir;
    for dir in std::iter::once(out.join(CLEAN_DIR)).chain(tasks.iter().map(|&(k, l)| set_dir(out, k, l))) {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.worker_count)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let reports: Vec<Result<SceneReport>> =
        pool.install(|| scenes.par_iter().map(|p| corrupt_scene(p, cfg, seed, &tasks)).collect());

    let mut manifest = Manifest {
        global_seed: seed,
        params: cfg.params.clone(),
        scenes: Vec::new(),
        entries: Vec::new(),
        skipped: Vec::new(),
    };
    for r in reports {
        let r = r?;
        manifest.scenes.extend(r.scene_id);
        manifest.entries.extend(r.entries);
        manifest.skipped.extend(r.skipped);
    }
    manifest.scenes.sort();
    manifest
        .entries
        .sort_by(|a, b| (a.kind, a.level, &a.scene_id).cmp(&(b.kind, b.level, &b.scene_id)));
    manifest
        .skipped
        .sort_by(|a, b| (a.kind, a.level, &a.scene_id).cmp(&(b.kind, b.level, &b.scene_id)));
    write_json(&manifest, &out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Which ground-truth boxes to score against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GtVariant {
    /// Original full-object boxes.
    #[default]
    Amodal,
    /// `<scene_id>.updated.json` where present, the original boxes otherwise.
    Updated,
}

impl std::str::FromStr for GtVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amodal" => Ok(GtVariant::Amodal),
            "updated" => Ok(GtVariant::Updated),
            other => Err(Error::Config(format!("unknown ground-truth variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetEvaluation {
    pub corruption: String,
    pub level: u8,
    pub missing_detections: usize,
    pub summary: MapSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub method: String,
    pub iou_threshold: f64,
    pub gt_variant: GtVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean: Option<MapSummary>,
    pub sets: Vec<SetEvaluation>,
}

impl EvaluationResult {
    pub fn to_method_grid(&self) -> MethodGrid {
        let mut g = MethodGrid::new(self.method.clone());
        g.clean_map = self.clean.as_ref().map(|c| c.map);
        for s in &self.sets {
            g.set(s.corruption.clone(), s.level, s.summary.map);
        }
        g
    }

    pub fn set(&self, corruption: &str, level: u8) -> Option<&SetEvaluation> {
        self.sets.iter().find(|s| s.corruption == corruption && s.level == level)
    }
}

fn is_annotation_file(p: &Path) -> bool {
    let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
    p.is_file() && name.ends_with(".json") && name != MANIFEST_FILE && !name.ends_with(UPDATED_SUFFIX)
}

fn updated_path(gt_path: &Path) -> PathBuf {
    let stem = gt_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    gt_path.with_file_name(format!("{stem}{UPDATED_SUFFIX}"))
}

fn annotation_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if is_annotation_file(&p) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Ground-truth sets under `gt_dir`, as paths relative to it: `""` or
/// `clean` for the clean set, `<kind>/<level>` for corrupted ones.
fn discover_sets(gt_dir: &Path) -> Result<(Option<PathBuf>, Vec<(CorruptionKind, u8, PathBuf)>)> {
    let mut clean = None;
    if !annotation_files(gt_dir)?.is_empty() {
        clean = Some(PathBuf::new());
    } else if gt_dir.join(CLEAN_DIR).is_dir() {
        clean = Some(PathBuf::from(CLEAN_DIR));
    }
    let mut sets = Vec::new();
    for kind in CorruptionKind::ALL {
        let kdir = gt_dir.join(kind.name());
        if !kdir.is_dir() {
            continue;
        }
        for level in 1..=SeverityLevel::MAX.get() {
            let rel = PathBuf::from(kind.name()).join(level.to_string());
            if gt_dir.join(&rel).is_dir() {
                sets.push((kind, level, rel));
            }
        }
    }
    Ok((clean, sets))
}

fn evaluate_set(
    gt_dir: &Path,
    det_dir: &Path,
    iou: f64,
    variant: GtVariant,
) -> Result<(MapSummary, usize)> {
    let mut pairs = Vec::new();
    let mut missing = 0;
    for gt_path in annotation_files(gt_dir)? {
        let updated = updated_path(&gt_path);
        let gt = if variant == GtVariant::Updated && updated.is_file() {
            pio::load_annotations(&updated)?
        } else {
            pio::load_annotations(&gt_path)?
        };
        let det_path = det_dir.join(format!("{}.json", gt.scene_id));
        let dets = if det_path.is_file() {
            pio::load_detections(&det_path)?
        } else {
            log::warn!("no detections at {}; scoring {} as empty", det_path.display(), gt.scene_id);
            missing += 1;
            DetectionSet::empty(gt.scene_id.clone())
        };
        pairs.push((dets, gt));
    }
    Ok((mean_ap(&pairs, iou)?, missing))
}

/// mAP for the clean set and every `<kind>/<level>` set found under
/// `gt_dir`, reading detections from the mirrored layout under `det_dir`.
pub fn run_evaluate(
    gt_dir: &Path,
    det_dir: &Path,
    iou_threshold: f64,
    method: &str,
    variant: GtVariant,
) -> Result<EvaluationResult> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::Config(format!("IoU threshold {iou_threshold} is outside (0, 1]")));
    }
    let (clean_rel, sets) = discover_sets(gt_dir)?;
    let clean = match clean_rel {
        Some(rel) => Some(evaluate_set(&gt_dir.join(&rel), &det_dir.join(&rel), iou_threshold, variant)?.0),
        None => None,
    };
    let evaluated: Vec<Result<SetEvaluation>> = sets
        .par_iter()
        .map(|(kind, level, rel)| {
            let (summary, missing) =
                evaluate_set(&gt_dir.join(rel), &det_dir.join(rel), iou_threshold, variant)?;
            Ok(SetEvaluation {
                corruption: kind.name().to_string(),
                level: *level,
                missing_detections: missing,
                summary,
            })
        })
        .collect();
    Ok(EvaluationResult {
        method: method.to_string(),
        iou_threshold,
        gt_variant: variant,
        clean,
        sets: evaluated.into_iter().collect::<Result<_>>()?,
    })
}

/// Writes detections equal to the ground truth (score 1) for every set under
/// `gt_dir`, mirroring its layout under `det_dir`.
pub fn write_echo_detections(gt_dir: &Path, det_dir: &Path, variant: GtVariant) -> Result<usize> {
    let (clean, sets) = discover_sets(gt_dir)?;
    let mut written = 0;
    for rel in clean.into_iter().chain(sets.into_iter().map(|s| s.2)) {
        let out = det_dir.join(&rel);
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        for gt_path in annotation_files(&gt_dir.join(&rel))? {
            let updated = updated_path(&gt_path);
            let src = if variant == GtVariant::Updated && updated.is_file() { updated } else { gt_path };
            let gt = pio::load_annotations(&src)?;
            pio::save_detections(&DetectionSet::echo(&gt), &out.join(format!("{}.json", gt.scene_id)))?;
            written += 1;
        }
    }
    Ok(written)
}

/// Loads an evaluation result or a bare method grid.
pub fn load_method_grid(path: &Path) -> Result<MethodGrid> {
    let value: Value = read_json(path)?;
    if value.get("sets").is_some() {
        let eval: EvaluationResult = serde_json::from_value(value).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            field: "$".into(),
            message: e.to_string(),
        })?;
        Ok(eval.to_method_grid())
    } else {
        serde_json::from_value(value).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            field: "$".into(),
            message: e.to_string(),
        })
    }
}

pub fn build_report_from_files(
    grid_files: &[PathBuf],
    baseline: &str,
    corruption_set: Option<&[String]>,
) -> Result<RobustnessReport> {
    let mut grid = metrics::MapGrid::default();
    for p in grid_files {
        let g = load_method_grid(p)?;
        if grid.methods.contains_key(&g.method) {
            return Err(Error::Config(format!("method `{}` appears in more than one grid", g.method)));
        }
        grid.insert(g);
    }
    let report = metrics::build_report(&grid, baseline, corruption_set)?;
    report.verify()?;
    Ok(report)
}

/// Writes `<scene_id>.ply` and `<scene_id>.json` for each generated scene.
pub fn gen_synthetic(spec: &SyntheticSceneSpec, out_dir: &Path, format: OutputFormat) -> Result<Vec<String>> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let ids: Vec<Result<String>> = (0..spec.scene_count)
        .into_par_iter()
        .map(|i| {
            let (scene, ann) = synth::generate_scene(spec, i)?;
            pio::save_scene_as(&scene, &out_dir.join(format!("{}.ply", scene.scene_id)), ply_format(format))?;
            pio::save_annotations(&ann, &out_dir.join(format!("{}.json", scene.scene_id)))?;
            Ok(scene.scene_id)
        })
        .collect();
    ids.into_iter().collect()
}
