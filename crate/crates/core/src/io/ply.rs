//! PLY scene container, ASCII or binary little-endian.
//!
//! Only the `vertex` element is accepted. Recognized properties are
//! `x y z` (float), `red green blue` (uchar, all three or none),
//! `semantic_label instance_label` (int). The scene id travels in a
//! `comment scene_id <id>` header line; without it the file stem is used.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyFormat {
    #[default]
    BinaryLittleEndian,
    Ascii,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    F32,
    U8,
    I32,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        match name {
            "float" | "float32" => Some(Scalar::F32),
            "uchar" | "uint8" => Some(Scalar::U8),
            "int" | "int32" => Some(Scalar::I32),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            Scalar::F32 | Scalar::I32 => 4,
            Scalar::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    X,
    Y,
    Z,
    Red,
    Green,
    Blue,
    Semantic,
    Instance,
}

const FIELDS: [(Field, &str, Scalar); 8] = [
    (Field::X, "x", Scalar::F32),
    (Field::Y, "y", Scalar::F32),
    (Field::Z, "z", Scalar::F32),
    (Field::Red, "red", Scalar::U8),
    (Field::Green, "green", Scalar::U8),
    (Field::Blue, "blue", Scalar::U8),
    (Field::Semantic, "semantic_label", Scalar::I32),
    (Field::Instance, "instance_label", Scalar::I32),
];

fn field_name(f: Field) -> &'static str {
    FIELDS.iter().find(|e| e.0 == f).map(|e| e.1).unwrap_or("?")
}

struct Header {
    format: PlyFormat,
    count: usize,
    properties: Vec<Field>,
    scene_id: Option<String>,
    data_offset: usize,
}

fn find_end_header(bytes: &[u8]) -> Option<usize> {
    const MARK: &[u8] = b"end_header";
    let mut start = 0;
    while start < bytes.len() {
        let end = bytes[start..].iter().position(|&b| b == b'\n').map(|e| start + e);
        let line_end = end.unwrap_or(bytes.len());
        let line = &bytes[start..line_end];
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        if line == MARK {
            return Some(end.map_or(bytes.len(), |e| e + 1));
        }
        start = line_end + 1;
    }
    None
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let bad = |line: usize, message: String| Error::PlyHeader {
        path: path.to_path_buf(),
        line,
        message,
    };
    let data_offset = find_end_header(bytes).ok_or_else(|| bad(0, "no end_header line".into()))?;
    let text = std::str::from_utf8(&bytes[..data_offset])
        .map_err(|_| bad(0, "header is not valid UTF-8".into()))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(bad(1, "first line must be `ply`".into())),
    }
    let mut format = None;
    let mut count = None;
    let mut properties: Vec<Field> = Vec::new();
    let mut scene_id = None;
    for (no, line) in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            ["end_header"] => break,
            ["format", f, "1.0"] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(bad(no, format!("unsupported format `{other}`"))),
                });
            }
            ["comment", "scene_id", id] => scene_id = Some(id.to_string()),
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", "vertex", n] => {
                if count.is_some() {
                    return Err(bad(no, "duplicate vertex element".into()));
                }
                count = Some(
                    n.parse::<usize>()
                        .map_err(|_| bad(no, format!("invalid vertex count `{n}`")))?,
                );
            }
            ["element", name, ..] => {
                return Err(bad(no, format!("unsupported element `{name}`")));
            }
            ["property", "list", ..] => {
                return Err(bad(no, "list properties are not supported".into()));
            }
            ["property", ty, name] => {
                if count.is_none() {
                    return Err(bad(no, "property before element vertex".into()));
                }
                let Some(&(field, _, expected)) = FIELDS.iter().find(|e| e.1 == *name) else {
                    return Err(Error::UnknownProperty {
                        path: path.to_path_buf(),
                        property: name.to_string(),
                    });
                };
                let scalar =
                    Scalar::parse(ty).ok_or_else(|| bad(no, format!("unknown type `{ty}`")))?;
                if scalar != expected {
                    return Err(bad(no, format!("property `{name}` has type `{ty}`")));
                }
                if properties.contains(&field) {
                    return Err(bad(no, format!("duplicate property `{name}`")));
                }
                properties.push(field);
            }
            _ => return Err(bad(no, format!("unrecognized line `{line}`"))),
        }
    }
    let format = format.ok_or_else(|| bad(0, "missing format line".into()))?;
    let count = count.ok_or_else(|| bad(0, "missing element vertex".into()))?;
    let required = [Field::X, Field::Y, Field::Z, Field::Semantic, Field::Instance];
    let color = [Field::Red, Field::Green, Field::Blue];
    let any_color = color.iter().any(|c| properties.contains(c));
    for f in required.iter().chain(if any_color { &color[..] } else { &[] }) {
        if !properties.contains(f) {
            return Err(Error::MissingProperty {
                path: path.to_path_buf(),
                property: field_name(*f).to_string(),
            });
        }
    }
    Ok(Header {
        format,
        count,
        properties,
        scene_id,
        data_offset,
    })
}

#[derive(Clone, Copy)]
enum Value {
    F(f32),
    U(u8),
    I(i32),
}

struct Builder {
    scene: Scene,
    colors: Option<Vec<[u8; 3]>>,
}

impl Builder {
    fn new(id: String, n: usize, has_color: bool) -> Self {
        let mut scene = Scene::from_positions(id, vec![[0.0; 3]; n]);
        scene.semantic_labels = vec![0; n];
        scene.instance_labels = vec![0; n];
        Self {
            scene,
            colors: has_color.then(|| vec![[0u8; 3]; n]),
        }
    }

    fn set(&mut self, path: &Path, row: usize, field: Field, v: Value) -> Result<()> {
        match (field, v) {
            (Field::X | Field::Y | Field::Z, Value::F(f)) => {
                if !f.is_finite() {
                    return Err(Error::NonFinite {
                        path: path.to_path_buf(),
                        field: field_name(field).to_string(),
                        row,
                    });
                }
                let axis = match field {
                    Field::X => 0,
                    Field::Y => 1,
                    _ => 2,
                };
                self.scene.positions[row][axis] = f as f64;
            }
            (Field::Red | Field::Green | Field::Blue, Value::U(u)) => {
                let c = match field {
                    Field::Red => 0,
                    Field::Green => 1,
                    _ => 2,
                };
                if let Some(colors) = self.colors.as_mut() {
                    colors[row][c] = u;
                }
            }
            (Field::Semantic, Value::I(i)) => self.scene.semantic_labels[row] = i,
            (Field::Instance, Value::I(i)) => self.scene.instance_labels[row] = i,
            _ => unreachable!("type checked in header"),
        }
        Ok(())
    }

    fn finish(mut self) -> Scene {
        self.scene.colors = self.colors;
        self.scene
    }
}

fn scalar_of(f: Field) -> Scalar {
    FIELDS.iter().find(|e| e.0 == f).map(|e| e.2).unwrap_or(Scalar::F32)
}

/// Reads a scene. Positions are widened from `f32`.
pub fn load_scene(path: &Path) -> Result<Scene> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(path, &bytes)?;
    let id = header.scene_id.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let has_color = header.properties.contains(&Field::Red);
    let mut b = Builder::new(id, header.count, has_color);
    let data = &bytes[header.data_offset..];
    let data_err = |row: usize, message: String| Error::PlyData {
        path: path.to_path_buf(),
        row,
        message,
    };
    match header.format {
        PlyFormat::BinaryLittleEndian => {
            let stride: usize = header.properties.iter().map(|&f| scalar_of(f).size()).sum();
            let expected = stride * header.count;
            if data.len() < expected {
                return Err(data_err(
                    data.len() / stride.max(1),
                    format!("truncated: {} of {expected} data bytes", data.len()),
                ));
            }
            if data.len() > expected {
                return Err(data_err(
                    header.count,
                    format!("{} trailing bytes after the last row", data.len() - expected),
                ));
            }
            for row in 0..header.count {
                let mut off = row * stride;
                for &f in &header.properties {
                    let v = match scalar_of(f) {
                        Scalar::F32 => Value::F(f32::from_le_bytes(data[off..off + 4].try_into().unwrap())),
                        Scalar::I32 => Value::I(i32::from_le_bytes(data[off..off + 4].try_into().unwrap())),
                        Scalar::U8 => Value::U(data[off]),
                    };
                    off += scalar_of(f).size();
                    b.set(path, row, f, v)?;
                }
            }
        }
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(data).map_err(|_| data_err(0, "body is not valid UTF-8".into()))?;
            let mut rows = text.lines().map(str::trim).filter(|l| !l.is_empty());
            for row in 0..header.count {
                let line = rows
                    .next()
                    .ok_or_else(|| data_err(row, format!("expected {} rows, found {row}", header.count)))?;
                let tokens: Vec<&str> = line.split_whitespace().collect();
                if tokens.len() != header.properties.len() {
                    return Err(data_err(
                        row,
                        format!("expected {} values, found {}", header.properties.len(), tokens.len()),
                    ));
                }
                for (&f, tok) in header.properties.iter().zip(tokens) {
                    let invalid = || data_err(row, format!("invalid {} value `{tok}`", field_name(f)));
                    let v = match scalar_of(f) {
                        Scalar::F32 => Value::F(tok.parse().map_err(|_| invalid())?),
                        Scalar::I32 => Value::I(tok.parse().map_err(|_| invalid())?),
                        Scalar::U8 => Value::U(tok.parse().map_err(|_| invalid())?),
                    };
                    b.set(path, row, f, v)?;
                }
            }
            if rows.next().is_some() {
                return Err(data_err(header.count, "more rows than the header declares".into()));
            }
        }
    }
    Ok(b.finish())
}

/// Writes a binary little-endian scene.
pub fn save_scene(scene: &Scene, path: &Path) -> Result<()> {
    save_scene_as(scene, path, PlyFormat::BinaryLittleEndian)
}

/// Positions are narrowed to `f32`; a scene already at `f32` precision
/// round-trips bit-exactly.
pub fn save_scene_as(scene: &Scene, path: &Path, format: PlyFormat) -> Result<()> {
    if scene.scene_id.is_empty() || scene.scene_id.chars().any(char::is_whitespace) {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            field: "scene_id".into(),
            message: "must be non-empty without whitespace".into(),
        });
    }
    for (row, p) in scene.positions.iter().enumerate() {
        if let Some(axis) = p.iter().position(|c| !(*c as f32).is_finite()) {
            return Err(Error::NonFinite {
                path: path.to_path_buf(),
                field: ["x", "y", "z"][axis].into(),
                row,
            });
        }
    }
    let n = scene.len();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = String::from("ply\n");
    header.push_str(match format {
        PlyFormat::Ascii => "format ascii 1.0\n",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    header.push_str(&format!("comment scene_id {}\nelement vertex {n}\n", scene.scene_id));
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if scene.colors.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    header.push_str("property int semantic_label\nproperty int instance_label\nend_header\n");

    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        w.write_all(header.as_bytes())?;
        for i in 0..n {
            let p = scene.positions[i].map(|c| c as f32);
            let color = scene.colors.as_ref().map(|c| c[i]);
            let (s, inst) = (scene.semantic_labels[i], scene.instance_labels[i]);
            match format {
                PlyFormat::BinaryLittleEndian => {
                    for c in p {
                        w.write_all(&c.to_le_bytes())?;
                    }
                    if let Some(c) = color {
                        w.write_all(&c)?;
                    }
                    w.write_all(&s.to_le_bytes())?;
                    w.write_all(&inst.to_le_bytes())?;
                }
                PlyFormat::Ascii => {
                    write!(w, "{} {} {}", p[0], p[1], p[2])?;
                    if let Some(c) = color {
                        write!(w, " {} {} {}", c[0], c[1], c[2])?;
                    }
                    writeln!(w, " {s} {inst}")?;
                }
            }
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}
