//! Corruption kinds, severity schedules, configuration and dispatch.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corrupt::add::{self, AdditionResult};
use crate::corrupt::alter::{self, AlterationResult};
use crate::corrupt::reduce::{self, ReductionResult};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scene::{AnnotationSet, Axis, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    DropGlobal,
    DropLocal,
    DropObject,
    DropBackground,
    DropObjectParts,
    DropFloor,
    AddGlobal,
    AddLocal,
    SceneExpansion,
    Jitter,
    LocalNoise,
    BackgroundNoise,
    FloorInclination,
}

/// Which of the three corruption families a kind belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionGroup {
    Reduction,
    Addition,
    Alteration,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 13] = [
        CorruptionKind::DropGlobal,
        CorruptionKind::DropLocal,
        CorruptionKind::DropObject,
        CorruptionKind::DropBackground,
        CorruptionKind::DropObjectParts,
        CorruptionKind::DropFloor,
        CorruptionKind::AddGlobal,
        CorruptionKind::AddLocal,
        CorruptionKind::SceneExpansion,
        CorruptionKind::Jitter,
        CorruptionKind::LocalNoise,
        CorruptionKind::BackgroundNoise,
        CorruptionKind::FloorInclination,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::DropGlobal => "drop_global",
            CorruptionKind::DropLocal => "drop_local",
            CorruptionKind::DropObject => "drop_object",
            CorruptionKind::DropBackground => "drop_background",
            CorruptionKind::DropObjectParts => "drop_object_parts",
            CorruptionKind::DropFloor => "drop_floor",
            CorruptionKind::AddGlobal => "add_global",
            CorruptionKind::AddLocal => "add_local",
            CorruptionKind::SceneExpansion => "scene_expansion",
            CorruptionKind::Jitter => "jitter",
            CorruptionKind::LocalNoise => "local_noise",
            CorruptionKind::BackgroundNoise => "background_noise",
            CorruptionKind::FloorInclination => "floor_inclination",
        }
    }

    pub fn group(self) -> CorruptionGroup {
        use CorruptionKind::*;
        match self {
            DropGlobal | DropLocal | DropObject | DropBackground | DropObjectParts | DropFloor => {
                CorruptionGroup::Reduction
            }
            AddGlobal | AddLocal | SceneExpansion => CorruptionGroup::Addition,
            Jitter | LocalNoise | BackgroundNoise | FloorInclination => {
                CorruptionGroup::Alteration
            }
        }
    }

    /// Kinds with a single severity level, stored as level 1.
    pub fn is_single_level(self) -> bool {
        matches!(
            self,
            CorruptionKind::DropFloor | CorruptionKind::LocalNoise | CorruptionKind::BackgroundNoise
        )
    }

    pub fn levels(self) -> Vec<SeverityLevel> {
        if self.is_single_level() {
            vec![SeverityLevel::MIN]
        } else {
            SeverityLevel::all().collect()
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        CorruptionKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown corruption kind `{s}`")))
    }
}

/// Severity in `1..=5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SeverityLevel(u8);

impl SeverityLevel {
    pub const MIN: SeverityLevel = SeverityLevel(1);
    pub const MAX: SeverityLevel = SeverityLevel(5);

    pub fn new(value: u8) -> Result<Self> {
        if (1..=5).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::Config(format!("severity level {value} is outside 1..=5")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = SeverityLevel> {
        (1..=5).map(SeverityLevel)
    }
}

impl TryFrom<u8> for SeverityLevel {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        SeverityLevel::new(v)
    }
}

impl From<SeverityLevel> for u8 {
    fn from(l: SeverityLevel) -> u8 {
        l.0
    }
}

impl fmt::Display for SeverityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `round(num / den * pool)` with halves rounded away from zero, in exact
/// integer arithmetic.
pub(crate) fn round_ratio(num: usize, den: usize, pool: usize) -> usize {
    (2 * num * pool + den) / (2 * den)
}

/// Fraction of points removed by the drop corruptions: 25% at level 1,
/// +12.5% per level, 75% at level 5.
pub fn drop_ratio(level: SeverityLevel) -> f64 {
    0.25 + 0.125 * (level.get() as f64 - 1.0)
}

/// `round(drop_ratio(level) * pool)`.
pub fn drop_count(level: SeverityLevel, pool: usize) -> usize {
    // ratio = (level + 1) / 8
    round_ratio(level.get() as usize + 1, 8, pool)
}

/// Fraction of each object sliced away by drop-object-parts: 10% per level.
pub fn part_fraction(level: SeverityLevel) -> f64 {
    0.1 * level.get() as f64
}

pub fn part_count(level: SeverityLevel, pool: usize) -> usize {
    round_ratio(level.get() as usize, 10, pool)
}

/// Fraction of the scene's point count added by the addition corruptions.
pub fn add_ratio(level: SeverityLevel) -> f64 {
    0.01 * level.get() as f64
}

pub fn add_count(level: SeverityLevel, n: usize) -> usize {
    round_ratio(level.get() as usize, 100, n)
}

/// Jitter standard deviation in normalized units.
pub fn jitter_sigma(level: SeverityLevel) -> f64 {
    0.004 * level.get() as f64
}

pub fn inclination_degrees(level: SeverityLevel) -> f64 {
    5.0 * level.get() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuotaMode {
    /// Cluster quotas proportional to one uniform draw per cluster.
    #[default]
    Random,
    Equal,
}

/// Rotation axis used by floor inclination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "axis")]
pub enum InclinationAxis {
    /// Rotate about the up axis.
    Up,
    /// Rotate about a horizontal axis, tilting the floor.
    Horizontal(Axis),
}

impl Default for InclinationAxis {
    fn default() -> Self {
        InclinationAxis::Horizontal(Axis::X)
    }
}

/// Class ids used by the default label table (NYU40 ids as used by ScanNet).
pub mod classes {
    pub const WALL: i32 = 1;
    pub const FLOOR: i32 = 2;
    pub const CHAIR: i32 = 5;
    pub const CEILING: i32 = 22;
}

fn default_class_names() -> BTreeMap<i32, String> {
    [
        (1, "wall"),
        (2, "floor"),
        (3, "cabinet"),
        (4, "bed"),
        (5, "chair"),
        (6, "sofa"),
        (7, "table"),
        (8, "door"),
        (9, "window"),
        (10, "bookshelf"),
        (11, "picture"),
        (12, "counter"),
        (14, "desk"),
        (16, "curtain"),
        (22, "ceiling"),
        (24, "refrigerator"),
        (28, "showercurtain"),
        (33, "toilet"),
        (34, "sink"),
        (36, "bathtub"),
        (39, "otherfurniture"),
    ]
    .into_iter()
    .map(|(id, name)| (id, name.to_string()))
    .collect()
}

/// Dataset conventions and per-corruption knobs. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionConfig {
    pub up_axis: Axis,
    /// Semantic classes treated as background; unlabeled points always are.
    pub background_classes: Vec<i32>,
    /// Known semantic classes, id to name.
    pub class_names: BTreeMap<i32, String>,
    /// Class targeted by local noise and spared by background noise.
    pub noise_target_class: i32,
    /// Inclusive range for the drop-local cluster count.
    pub drop_local_clusters: [usize; 2],
    pub drop_local_quota: QuotaMode,
    /// Extra height above the 1st percentile still counted as floor.
    pub floor_epsilon: f64,
    /// Inclusive range for the add-local centroid count.
    pub add_local_centroids: [usize; 2],
    /// Range of the per-centroid standard deviation, normalized units.
    pub add_local_sigma: [f64; 2],
    /// Depth of the expansion plane below the floor, as a fraction of the
    /// scene's up extent.
    pub expansion_gap_ratio: f64,
    /// Horizontal clearance between the scene and the expansion patch, as a
    /// fraction of the footprint width along the offset axis.
    pub expansion_offset_ratio: f64,
    pub inclination_axis: InclinationAxis,
    /// Emit boxes fitted to rotated instance points for floor inclination.
    pub rotate_annotations: bool,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            up_axis: Axis::Z,
            background_classes: vec![classes::WALL, classes::FLOOR, classes::CEILING],
            class_names: default_class_names(),
            noise_target_class: classes::CHAIR,
            drop_local_clusters: [3, 10],
            drop_local_quota: QuotaMode::Random,
            floor_epsilon: 0.0,
            add_local_centroids: [1, 10],
            add_local_sigma: [0.075, 0.125],
            expansion_gap_ratio: 0.3,
            expansion_offset_ratio: 0.1,
            inclination_axis: InclinationAxis::default(),
            rotate_annotations: false,
        }
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<()> {
        let [kmin, kmax] = self.drop_local_clusters;
        if kmin == 0 || kmin > kmax {
            return Err(Error::Config(format!(
                "drop_local_clusters must satisfy 1 <= min <= max, got [{kmin}, {kmax}]"
            )));
        }
        let [cmin, cmax] = self.add_local_centroids;
        if cmin == 0 || cmin > cmax {
            return Err(Error::Config(format!(
                "add_local_centroids must satisfy 1 <= min <= max, got [{cmin}, {cmax}]"
            )));
        }
        let [slo, shi] = self.add_local_sigma;
        if !(slo > 0.0 && slo <= shi && shi.is_finite()) {
            return Err(Error::Config(format!(
                "add_local_sigma must satisfy 0 < lo <= hi, got [{slo}, {shi}]"
            )));
        }
        if !(self.floor_epsilon >= 0.0 && self.floor_epsilon.is_finite()) {
            return Err(Error::Config("floor_epsilon must be finite and >= 0".into()));
        }
        if !(self.expansion_gap_ratio > 0.0 && self.expansion_gap_ratio.is_finite()) {
            return Err(Error::Config("expansion_gap_ratio must be > 0".into()));
        }
        if !(self.expansion_offset_ratio > 0.0 && self.expansion_offset_ratio.is_finite()) {
            return Err(Error::Config("expansion_offset_ratio must be > 0".into()));
        }
        if let InclinationAxis::Horizontal(a) = self.inclination_axis {
            if a == self.up_axis {
                return Err(Error::Config(
                    "horizontal inclination axis equals the up axis".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One corruption task: what to apply, how hard, and with which seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub level: SeverityLevel,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, level: SeverityLevel, seed: u64) -> Result<Self> {
        if kind.is_single_level() && level != SeverityLevel::MIN {
            return Err(Error::Config(format!(
                "{kind} has a single severity level (1), got {level}"
            )));
        }
        Ok(Self { kind, level, seed })
    }
}

#[derive(Debug, Clone)]
pub enum CorruptionOutcome {
    Reduction(ReductionResult),
    Addition(AdditionResult),
    Alteration(AlterationResult),
}

impl CorruptionOutcome {
    pub fn scene(&self) -> &Scene {
        match self {
            CorruptionOutcome::Reduction(r) => &r.scene,
            CorruptionOutcome::Addition(r) => &r.scene,
            CorruptionOutcome::Alteration(r) => &r.scene,
        }
    }

    pub fn into_scene(self) -> Scene {
        match self {
            CorruptionOutcome::Reduction(r) => r.scene,
            CorruptionOutcome::Addition(r) => r.scene,
            CorruptionOutcome::Alteration(r) => r.scene,
        }
    }

    /// Replacement annotations emitted by the corruption, if any.
    pub fn annotations(&self) -> Option<&AnnotationSet> {
        match self {
            CorruptionOutcome::Reduction(r) => r.annotations.as_ref(),
            CorruptionOutcome::Alteration(r) => r.annotations.as_ref(),
            CorruptionOutcome::Addition(_) => None,
        }
    }

    pub fn dropped_count(&self) -> usize {
        match self {
            CorruptionOutcome::Reduction(r) => r.dropped.len(),
            _ => 0,
        }
    }

    pub fn added_count(&self) -> usize {
        match self {
            CorruptionOutcome::Addition(r) => r.added.len(),
            _ => 0,
        }
    }
}

/// Applies `spec` to `scene`. Object-level corruptions need `annotations`.
pub fn apply(
    spec: &CorruptionSpec,
    scene: &Scene,
    annotations: Option<&AnnotationSet>,
    config: &CorruptionConfig,
) -> Result<CorruptionOutcome> {
    let mut rng = SeededRng::new(spec.seed);
    let level = spec.level;
    use CorruptionKind::*;
    let outcome = match spec.kind {
        DropGlobal => CorruptionOutcome::Reduction(reduce::drop_global(scene, level, &mut rng)),
        DropLocal => CorruptionOutcome::Reduction(reduce::drop_local(
            scene,
            level,
            &mut rng,
            &reduce::DropLocalParams {
                clusters: config.drop_local_clusters,
                quota: config.drop_local_quota,
            },
        )),
        DropObject => {
            let ann = annotations.ok_or(Error::AnnotationsMissing("drop_object"))?;
            CorruptionOutcome::Reduction(reduce::drop_object(scene, ann, level, &mut rng))
        }
        DropBackground => CorruptionOutcome::Reduction(reduce::drop_background(
            scene,
            level,
            &mut rng,
            &config.background_classes,
        )?),
        DropObjectParts => {
            let ann = annotations.ok_or(Error::AnnotationsMissing("drop_object_parts"))?;
            CorruptionOutcome::Reduction(reduce::drop_object_parts(scene, ann, level, &mut rng)?)
        }
        DropFloor => CorruptionOutcome::Reduction(reduce::drop_floor(
            scene,
            &mut rng,
            config.up_axis,
            config.floor_epsilon,
        )?),
        AddGlobal => CorruptionOutcome::Addition(add::add_global(scene, level, &mut rng)?),
        AddLocal => CorruptionOutcome::Addition(add::add_local(
            scene,
            level,
            &mut rng,
            &add::AddLocalParams {
                centroids: config.add_local_centroids,
                sigma: config.add_local_sigma,
            },
        )?),
        SceneExpansion => CorruptionOutcome::Addition(add::scene_expansion(
            scene,
            level,
            &mut rng,
            &add::ExpansionParams {
                up_axis: config.up_axis,
                gap_ratio: config.expansion_gap_ratio,
                offset_ratio: config.expansion_offset_ratio,
            },
        )?),
        Jitter => CorruptionOutcome::Alteration(alter::jitter(scene, level, &mut rng, None)?),
        LocalNoise => CorruptionOutcome::Alteration(alter::local_noise(
            scene,
            &mut rng,
            config.noise_target_class,
            &config.class_names,
        )?),
        BackgroundNoise => CorruptionOutcome::Alteration(alter::background_noise(
            scene,
            &mut rng,
            config.noise_target_class,
            &config.class_names,
        )?),
        FloorInclination => {
            let mut r = alter::floor_inclination(
                scene,
                level,
                config.inclination_axis,
                config.up_axis,
            )?;
            if config.rotate_annotations {
                if let Some(ann) = annotations {
                    r.annotations = Some(alter::refit_annotations(&r.scene, ann)?);
                }
            }
            CorruptionOutcome::Alteration(r)
        }
    };
    Ok(outcome)
}
