use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// One polyline; gaps at non-finite values split it into segments.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

/// Series per `(task, column)` from a metrics CSV, x being the round.
pub fn read_series(csv_path: &Path, columns: &[String]) -> Result<Vec<Series>> {
    let text = fs::read_to_string(csv_path)?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let round = col("round").ok_or_else(|| Error::config("metrics file has no round column"))?;
    let task = col("task");
    let mut idx = Vec::new();
    for c in columns {
        idx.push(col(c).ok_or_else(|| Error::config(format!("no column '{c}' in {}", csv_path.display())))?);
    }
    let mut series: BTreeMap<(String, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let x: f64 = rec[round].parse().map_err(|_| Error::config(format!("bad round '{}'", &rec[round])))?;
        let t = task.map(|i| rec[i].to_string()).unwrap_or_default();
        for (k, &i) in idx.iter().enumerate() {
            let y = rec[i].parse::<f64>().unwrap_or(f64::NAN);
            series.entry((t.clone(), k)).or_default().push((x, y));
        }
    }
    Ok(series
        .into_iter()
        .map(|((t, k), points)| {
            let c = &columns[k];
            let label = if t.is_empty() { c.clone() } else { format!("{t} {c}") };
            Series { label, points, dashed: c == "new_skill_plan_rate" }
        })
        .collect())
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let n = raw / mag;
    mag * if n <= 1.0 {
        1.0
    } else if n <= 2.0 {
        2.0
    } else if n <= 5.0 {
        5.0
    } else {
        10.0
    }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn range(vals: impl Iterator<Item = f64>, floor_zero: bool) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if floor_zero && lo > 0.0 {
        lo = 0.0;
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let step = nice_step(hi - lo);
    ((lo / step).floor() * step, (hi / step).ceil() * step)
}

/// An 800x500 line chart with axes, ticks, a legend and vertical markers.
pub fn render_svg(series: &[Series], markers: &[f64], title: &str, x_label: &str) -> String {
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).chain(markers.iter().copied()), false);
    let (y0, y1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)), true);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, escape(title));
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/>"##, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, label(t));
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(s, r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#000"/>"##, LEFT - 5.0);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, label(t));
    }
    let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#000"/>"##, TOP + ph, LEFT + pw, TOP + ph);
    let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}" stroke="#000"/>"##, TOP + ph);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 12.0, escape(x_label));
    for &m in markers {
        let x = sx(m);
        let _ = writeln!(s, r#"<line class="marker" x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="blue" stroke-width="1.5"/>"#, TOP + ph);
    }
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let dash = if ser.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        for seg in ser.points.split(|p| !p.1.is_finite()).filter(|seg| !seg.is_empty()) {
            let pts: Vec<String> = seg.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#, pts.join(" "));
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(s, r#"<line class="legend" x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#, lx + 25.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#, lx + 32.0, ly + 4.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Reads `columns` of a metrics CSV and writes one chart to `out`.
pub fn render_curves(csv_path: &Path, columns: &[String], markers: &[u32], out: &Path) -> Result<()> {
    if columns.is_empty() {
        return Err(Error::config("no columns to plot"));
    }
    let series = read_series(csv_path, columns)?;
    let markers: Vec<f64> = markers.iter().map(|&m| m as f64).collect();
    let svg = render_svg(&series, &markers, &columns.join(", "), "round");
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, svg)?;
    Ok(())
}
