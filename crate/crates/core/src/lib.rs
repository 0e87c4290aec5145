//! Severity-parameterized point-cloud corruptions for labeled indoor scenes,
//! plus detection scoring (mAP at an IoU threshold, Corruption Error and
//! mean Corruption Error) and the batch pipeline behind the `pcc` binary.

pub mod corrupt;
pub mod corruption;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod scene;
pub mod synth;

pub use corruption::{apply, CorruptionConfig, CorruptionKind, CorruptionOutcome, CorruptionSpec, SeverityLevel};
pub use error::{Error, Result};
pub use metrics::{Detection, DetectionSet, MapGrid, MethodGrid, RobustnessReport};
pub use scene::{Aabb, AnnotationSet, Axis, Instance, Scene};
