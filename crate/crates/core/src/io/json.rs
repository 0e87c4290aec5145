//! Annotation and detection JSON files.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::DetectionSet;
use crate::scene::{Aabb, AnnotationSet};

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => Error::Schema {
            path: path.to_path_buf(),
            field: "$".into(),
            message: e.to_string(),
        },
        _ => Error::Json {
            path: path.to_path_buf(),
            source: e,
        },
    })
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn check_box(path: &Path, field: String, b: &Aabb) -> Result<()> {
    let schema = |message: &str| Error::Schema {
        path: path.to_path_buf(),
        field: field.clone(),
        message: message.to_string(),
    };
    if b.min.iter().chain(&b.max).any(|v| !v.is_finite()) {
        return Err(schema("non-finite coordinate"));
    }
    if (0..3).any(|i| b.min[i] > b.max[i]) {
        return Err(schema("min exceeds max"));
    }
    Ok(())
}

pub fn validate_annotations(path: &Path, a: &AnnotationSet) -> Result<()> {
    let mut seen = BTreeSet::new();
    for (i, inst) in a.instances.iter().enumerate() {
        if !seen.insert(inst.instance_id) {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                field: format!("instances[{i}].instance_id"),
                message: format!("duplicate instance id {}", inst.instance_id),
            });
        }
        check_box(path, format!("instances[{i}].box"), &inst.bbox)?;
    }
    Ok(())
}

pub fn validate_detections(path: &Path, d: &DetectionSet) -> Result<()> {
    for (i, det) in d.detections.iter().enumerate() {
        if !(0.0..=1.0).contains(&det.score) {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                field: format!("detections[{i}].score"),
                message: format!("{} is outside [0, 1]", det.score),
            });
        }
        check_box(path, format!("detections[{i}].box"), &det.bbox)?;
    }
    Ok(())
}

pub fn load_annotations(path: &Path) -> Result<AnnotationSet> {
    let a: AnnotationSet = read_json(path)?;
    validate_annotations(path, &a)?;
    Ok(a)
}

pub fn save_annotations(a: &AnnotationSet, path: &Path) -> Result<()> {
    validate_annotations(path, a)?;
    write_json(a, path)
}

pub fn load_detections(path: &Path) -> Result<DetectionSet> {
    let d: DetectionSet = read_json(path)?;
    validate_detections(path, &d)?;
    Ok(d)
}

pub fn save_detections(d: &DetectionSet, path: &Path) -> Result<()> {
    validate_detections(path, d)?;
    write_json(d, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Detection;
    use crate::rng::SeededRng;
    use crate::scene::Instance;

    fn rand_box(r: &mut SeededRng) -> Aabb {
        let o = [r.uniform_in(-3.0, 3.0), r.uniform_in(-3.0, 3.0), r.uniform_in(0.0, 2.0)];
        Aabb::new(o, [o[0] + r.uniform(), o[1] + r.uniform(), o[2] + r.uniform()])
    }

    #[test]
    fn round_trips_are_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = SeededRng::new(1);
        let a = AnnotationSet {
            scene_id: "s".into(),
            instances: (0..20)
                .map(|i| Instance {
                    instance_id: i,
                    class_id: 3 + i % 4,
                    bbox: rand_box(&mut r),
                })
                .collect(),
        };
        let pa = dir.path().join("a.json");
        save_annotations(&a, &pa).unwrap();
        assert_eq!(load_annotations(&pa).unwrap(), a);

        let d = DetectionSet {
            scene_id: "s".into(),
            detections: (0..20)
                .map(|i| Detection {
                    class_id: i % 3,
                    score: r.uniform(),
                    bbox: rand_box(&mut r),
                })
                .collect(),
        };
        let pd = dir.path().join("d.json");
        save_detections(&d, &pd).unwrap();
        assert_eq!(load_detections(&pd).unwrap(), d);
    }

    #[test]
    fn schema_violations() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        let b = r#"{"min":[0,0,0],"max":[1,1,1]}"#;
        fs::write(&p, format!(r#"{{"scene_id":"s","detections":[{{"class_id":1,"score":1.5,"box":{b}}}]}}"#)).unwrap();
        assert!(matches!(load_detections(&p), Err(Error::Schema { field, .. }) if field == "detections[0].score"));

        fs::write(&p, r#"{"scene_id":"s","detections":[{"class_id":1,"score":0.5,"box":{"min":[2,0,0],"max":[1,1,1]}}]}"#).unwrap();
        assert!(matches!(load_detections(&p), Err(Error::Schema { field, .. }) if field == "detections[0].box"));

        fs::write(&p, format!(r#"{{"scene_id":"s","instances":[{{"instance_id":1,"class_id":1,"box":{b}}},{{"instance_id":1,"class_id":2,"box":{b}}}]}}"#)).unwrap();
        assert!(matches!(load_annotations(&p), Err(Error::Schema { .. })));

        fs::write(&p, r#"{"scene_id":"s"}"#).unwrap();
        assert!(matches!(load_annotations(&p), Err(Error::Schema { .. })));

        fs::write(&p, "{not json").unwrap();
        assert!(matches!(load_annotations(&p), Err(Error::Json { .. })));
    }
}
