//! Robustness report files: exact JSON, a 6-significant-digit CSV twin and
//! an SVG bar chart of CE.
//!
//! CSV columns are `method,role,corruption,level,metric,value`. Rows per
//! method, in order: clean mAP, mAP per (corruption, level), CE per
//! corruption, mCE per family, overall mCE.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::json::{read_json, write_json};
use crate::metrics::{report_note, MapGrid, MethodGrid, MethodReport, RobustnessReport};

const CSV_HEADER: [&str; 6] = ["method", "role", "corruption", "level", "metric", "value"];

/// Decimal rendering with 6 significant digits; scientific outside
/// `[1e-5, 1e16)`.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0.00000".into();
    }
    let sci = format!("{v:.5e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..16).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        sci
    }
}

pub fn save_report_json(report: &RobustnessReport, path: &Path) -> Result<()> {
    write_json(report, path)
}

pub fn load_report_json(path: &Path) -> Result<RobustnessReport> {
    read_json(path)
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn report_to_csv(report: &RobustnessReport) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut row = |cells: [&str; 6]| w.write_record(cells).expect("in-memory write");
    row(CSV_HEADER);
    for m in &report.methods {
        let role = if m.method == report.baseline { "baseline" } else { "method" };
        if let Some(clean) = m.clean_map {
            row([&m.method, role, "clean", "", "map", &format_sig6(clean)]);
        }
        if let Some(g) = report.grid.methods.get(&m.method) {
            for c in ordered_corruptions(report, g) {
                for (level, map) in &g.maps[&c] {
                    row([&m.method, role, &c, &level.to_string(), "map", &format_sig6(*map)]);
                }
            }
        }
        for c in &report.corruption_set {
            if let Some(ce) = m.ce.get(c) {
                row([&m.method, role, c, "", "ce", &format_sig6(*ce)]);
            }
        }
        for (group, v) in &m.group_mce {
            row([&m.method, role, group, "", "group_mce", &format_sig6(*v)]);
        }
        row([&m.method, role, "", "", "mce", &format_sig6(m.mce)]);
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
}

fn ordered_corruptions(report: &RobustnessReport, g: &MethodGrid) -> Vec<String> {
    let mut out: Vec<String> = report
        .corruption_set
        .iter()
        .filter(|c| g.maps.contains_key(*c))
        .cloned()
        .collect();
    out.extend(g.maps.keys().filter(|c| !report.corruption_set.contains(c)).cloned());
    out
}

pub fn save_report_csv(report: &RobustnessReport, path: &Path) -> Result<()> {
    fs::write(path, report_to_csv(report)).map_err(|e| Error::io(path, e))
}

/// Rebuilds a report from its CSV twin. Values carry CSV precision, so the
/// result satisfies `verify_with_tolerance` at roughly `1e-5` rather than the
/// exact JSON tolerance; writing it back reproduces the same CSV bytes.
pub fn load_report_csv(path: &Path) -> Result<RobustnessReport> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(csv_err(path, format!("unexpected header {:?}", headers)));
    }
    let mut baseline = None;
    let mut order: Vec<String> = Vec::new();
    let mut methods: BTreeMap<String, MethodReport> = BTreeMap::new();
    let mut grid = MapGrid::default();
    let mut corruption_set: Vec<String> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i + 2;
        let [method, role, corruption, level, metric, value] =
            <[&str; 6]>::try_from(rec.iter().collect::<Vec<_>>()).map_err(|_| csv_err(path, format!("line {line}: expected 6 cells")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| csv_err(path, format!("line {line}: invalid value `{value}`")))?;
        if role == "baseline" {
            baseline = Some(method.to_string());
        } else if role != "method" {
            return Err(csv_err(path, format!("line {line}: unknown role `{role}`")));
        }
        if !methods.contains_key(method) {
            order.push(method.to_string());
            grid.insert(MethodGrid::new(method));
        }
        let m = methods.entry(method.to_string()).or_insert_with(|| MethodReport {
            method: method.to_string(),
            clean_map: None,
            ce: BTreeMap::new(),
            mce: f64::NAN,
            group_mce: BTreeMap::new(),
        });
        let g = grid.methods.get_mut(method).expect("inserted above");
        match metric {
            "map" if corruption == "clean" => {
                m.clean_map = Some(value);
                g.clean_map = Some(value);
            }
            "map" => {
                let level: u8 = level
                    .parse()
                    .map_err(|_| csv_err(path, format!("line {line}: invalid level `{level}`")))?;
                g.set(corruption, level, value);
            }
            "ce" => {
                if !corruption_set.iter().any(|c| c == corruption) {
                    corruption_set.push(corruption.to_string());
                }
                m.ce.insert(corruption.to_string(), value);
            }
            "group_mce" => {
                m.group_mce.insert(corruption.to_string(), value);
            }
            "mce" => m.mce = value,
            other => return Err(csv_err(path, format!("line {line}: unknown metric `{other}`"))),
        }
    }
    let baseline = baseline.ok_or_else(|| csv_err(path, "no baseline rows"))?;
    Ok(RobustnessReport {
        baseline,
        note: report_note(&corruption_set),
        corruption_set,
        methods: order.iter().map(|m| methods[m].clone()).collect(),
        grid,
    })
}

const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

/// Grouped bar chart: one group per corruption, one bar per method.
pub fn report_to_svg(report: &RobustnessReport) -> String {
    let (bar, gap, left, top, height) = (14.0, 12.0, 50.0, 30.0, 220.0);
    let nm = report.methods.len().max(1) as f64;
    let group_w = nm * bar + gap;
    let width = left + group_w * report.corruption_set.len() as f64 + 20.0;
    let ymax = report
        .methods
        .iter()
        .flat_map(|m| m.ce.values().copied())
        .fold(1.0f64, f64::max)
        .mul_add(1.1, 0.0);
    let y = |v: f64| top + height * (1.0 - v / ymax);
    let mut s = String::new();
    let total_h = top + height + 110.0;
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{total_h:.0}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<text x="{left}" y="16" font-size="12">Corruption Error (baseline: {})</text>"#, xml(&report.baseline));
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.2}" stroke="black"/>"#, top + height);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#, top + height, width - 10.0, top + height);
    let _ = writeln!(s, r##"<line x1="{left}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#888" stroke-dasharray="4 3"/>"##, y(1.0), width - 10.0);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1.0</text>"#, left - 4.0, y(1.0) + 3.0);
    for (ci, c) in report.corruption_set.iter().enumerate() {
        let x0 = left + gap / 2.0 + ci as f64 * group_w;
        for (mi, m) in report.methods.iter().enumerate() {
            let v = m.ce.get(c).copied().unwrap_or(0.0);
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{bar}" height="{:.2}" fill="{}"><title>{} {}: {}</title></rect>"#,
                x0 + mi as f64 * bar,
                y(v),
                top + height - y(v),
                PALETTE[mi % PALETTE.len()],
                xml(&m.method),
                xml(c),
                format_sig6(v)
            );
        }
        let lx = x0 + nm * bar / 2.0;
        let ly = top + height + 8.0;
        let _ = writeln!(
            s,
            r#"<text x="{lx:.2}" y="{ly:.2}" transform="rotate(45 {lx:.2} {ly:.2})">{}</text>"#,
            xml(c)
        );
    }
    for (mi, m) in report.methods.iter().enumerate() {
        let ly = total_h - 14.0 * (report.methods.len() - mi) as f64;
        let _ = writeln!(s, r#"<rect x="{left}" y="{:.2}" width="10" height="10" fill="{}"/>"#, ly - 9.0, PALETTE[mi % PALETTE.len()]);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">{} (mCE {})</text>"#, left + 14.0, xml(&m.method), format_sig6(m.mce));
    }
    s.push_str("</svg>\n");
    s
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn save_report_svg(report: &RobustnessReport, path: &Path) -> Result<()> {
    fs::write(path, report_to_svg(report)).map_err(|e| Error::io(path, e))
}

/// Writes the JSON report and, when given, its CSV twin.
pub fn write_report(report: &RobustnessReport, json_path: &Path, csv_path: Option<&Path>) -> Result<()> {
    save_report_json(report, json_path)?;
    if let Some(p) = csv_path {
        save_report_csv(report, p)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{build_report, corruption_error};

    fn sample_grid() -> MapGrid {
        let mut grid = MapGrid::default();
        let mut a = MethodGrid::new("a");
        let mut b = MethodGrid::new("base");
        a.clean_map = Some(0.634);
        b.clean_map = Some(0.587);
        for (ci, c) in ["drop_global", "jitter", "drop_floor"].iter().enumerate() {
            let levels = if *c == "drop_floor" { 1 } else { 5 };
            for l in 1..=levels {
                a.set(*c, l, 0.61 - 0.031 * l as f64 + 0.007 * ci as f64);
                b.set(*c, l, 0.57 - 0.043 * l as f64);
            }
        }
        grid.insert(a);
        grid.insert(b);
        grid
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.858461538), "0.858462");
        assert_eq!(format_sig6(1.0), "1.00000");
        assert_eq!(format_sig6(0.0), "0.00000");
        assert_eq!(format_sig6(12.3456789), "12.3457");
        assert_eq!(format_sig6(0.9999996), "1.00000");
        assert_eq!(format_sig6(1.5e-7), "1.50000e-7");
    }

    #[test]
    fn csv_ce_column_matches_hand_recomputation() {
        let report = build_report(&sample_grid(), "base", None).unwrap();
        let csv = report_to_csv(&report);
        // drop_global CE for "a": sum(1 - a_l) / sum(1 - b_l)
        let num: f64 = (1..=5).map(|l| 1.0 - (0.61 - 0.031 * l as f64)).sum();
        let den: f64 = (1..=5).map(|l| 1.0 - (0.57 - 0.043 * l as f64)).sum();
        let line = format!("a,method,drop_global,,ce,{}", format_sig6(num / den));
        assert!(csv.lines().any(|l| l == line), "{csv}");
        assert!(csv.lines().any(|l| l == "base,baseline,,,mce,1.00000"));
        let grid = sample_grid();
        assert!((corruption_error(&grid, "a", "drop_global", "base").unwrap() - num / den).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_is_exact_and_verifies() {
        let dir = tempfile::tempdir().unwrap();
        let report = build_report(&sample_grid(), "base", None).unwrap();
        let p = dir.path().join("r.json");
        save_report_json(&report, &p).unwrap();
        let back = load_report_json(&p).unwrap();
        assert_eq!(back, report);
        back.verify().unwrap();
    }

    #[test]
    fn csv_reload_reproduces_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let report = build_report(&sample_grid(), "base", None).unwrap();
        let p = dir.path().join("r.csv");
        save_report_csv(&report, &p).unwrap();
        let back = load_report_csv(&p).unwrap();
        assert_eq!(back.corruption_set, report.corruption_set);
        assert_eq!(back.baseline, "base");
        assert_eq!(report_to_csv(&back), fs::read_to_string(&p).unwrap());
        back.verify_with_tolerance(1e-4).unwrap();
    }

    #[test]
    fn svg_has_one_bar_per_cell() {
        let report = build_report(&sample_grid(), "base", None).unwrap();
        let svg = report_to_svg(&report);
        assert_eq!(svg.matches("<rect").count(), 3 * 2 + 2);
        assert!(svg.ends_with("</svg>\n"));
    }
}
