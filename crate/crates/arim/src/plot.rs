use std::fmt::Write as _;
use std::path::Path;

use arim_core::dataset::SampleRecord;
use arim_core::eval::MitigationMethod;
use arim_core::radar::RadarParams;
use arim_core::timefreq::RangeFft;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub bin: usize,
    pub range_m: f64,
    pub clean_db: f64,
    pub interfered_db: f64,
    pub mitigated_db: f64,
}

/// One row per range-profile bin.
pub fn profile_rows<M: MitigationMethod + ?Sized>(
    record: &SampleRecord,
    method: &M,
    params: &RadarParams,
) -> Result<Vec<PlotRow>> {
    let plan = RangeFft::new(record.clean.len())?;
    let clean = plan.compute(&record.clean_f64())?.magnitude_db;
    let interfered = plan.compute(&record.interfered_f64())?.magnitude_db;
    let mitigated = method.profile_db(record)?;
    if mitigated.len() != clean.len() {
        return Err(arim_core::Error::LengthMismatch {
            what: "mitigated profile",
            expected: clean.len(),
            actual: mitigated.len(),
        }
        .into());
    }
    Ok((0..clean.len())
        .map(|bin| PlotRow {
            bin,
            range_m: params.bin_to_range(bin as f64),
            clean_db: clean[bin],
            interfered_db: interfered[bin],
            mitigated_db: mitigated[bin],
        })
        .collect())
}

pub fn write_plot_csv(path: &Path, rows: &[PlotRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv {
        path: path.into(),
        source: e.into_error().into(),
    })?;
    write_atomic(path, &bytes)
}

type Series = (&'static str, &'static str, fn(&PlotRow) -> f64);

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;

/// Static line plot of the three profiles against range.
pub fn render_svg(rows: &[PlotRow], title: &str) -> String {
    let series: [Series; 3] = [
        ("clean", "#2ca02c", |r| r.clean_db),
        ("interfered", "#d62728", |r| r.interfered_db),
        ("mitigated", "#1f77b4", |r| r.mitigated_db),
    ];
    let (mut x0, mut x1) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.range_m), b.max(r.range_m)));
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rows {
        for (_, _, f) in &series {
            let v = f(r);
            if v.is_finite() {
                y0 = y0.min(v);
                y1 = y1.max(v);
            }
        }
    }
    if !(x1 > x0) {
        (x0, x1) = (0.0, 1.0);
    }
    if !(y1 > y0) {
        (y0, y1) = (y0.min(0.0), y0.max(0.0) + 1.0);
        if !y0.is_finite() {
            (y0, y1) = (0.0, 1.0);
        }
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<path d="M{l},{t} L{l},{b} L{r},{b}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">range [m]</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">magnitude [dB]</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (v, anchor, x, y) in [
        (x0, "start", l, b + 16.0),
        (x1, "end", r, b + 16.0),
    ] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.1}</text>"#);
    }
    for (v, y) in [(y0, b), (y1, t)] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v:.1}</text>"#, l - 4.0, y + 4.0);
    }
    for (i, (name, color, f)) in series.iter().enumerate() {
        let mut d = String::new();
        let mut pen_down = false;
        for row in rows {
            let v = f(row);
            if !v.is_finite() {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, px(row.range_m), py(v));
            pen_down = true;
        }
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1"/>"#, d.trim_end());
        let ly = t + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}"/><text x="{}" y="{}">{name}</text>"#,
            r - 110.0,
            r - 90.0,
            r - 85.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_plot_svg(path: &Path, rows: &[PlotRow], title: &str) -> Result<()> {
    write_atomic(path, render_svg(rows, title).as_bytes())
}
