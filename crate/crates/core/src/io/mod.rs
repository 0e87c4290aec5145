//! File formats for scenes, annotations, detections and reports.

pub mod json;
pub mod ply;
pub mod report;

pub use json::{load_annotations, load_detections, save_annotations, save_detections};
pub use ply::{load_scene, save_scene, save_scene_as, PlyFormat};
pub use report::{load_report_csv, load_report_json, save_report_csv, save_report_json, save_report_svg, write_report};
