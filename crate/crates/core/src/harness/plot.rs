//! Minimal self-contained SVG line plot: one polyline per scheme with ±1
//! standard-error whiskers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::SweepAxis;
use crate::error::{Error, Result};

use super::{ExperimentRecord, SchemeTag};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 190.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 55.0;

fn color(s: SchemeTag) -> &'static str {
    match s {
        SchemeTag::ProposedMcOptimized => "#d62728",
        SchemeTag::FixedMcBaseline => "#1f77b4",
        SchemeTag::ConventionalNoMc => "#2ca02c",
    }
}

fn x_value(r: &ExperimentRecord, axis: SweepAxis) -> f64 {
    match axis {
        SweepAxis::PowerDbm => r.p_dbm,
        SweepAxis::NRisElements => r.m as f64,
    }
}

/// Picks the axis whose value actually varies across `records`.
pub fn infer_axis(records: &[ExperimentRecord]) -> SweepAxis {
    let first = records[0].m;
    if records.iter().any(|r| r.m != first) {
        SweepAxis::NRisElements
    } else {
        SweepAxis::PowerDbm
    }
}

fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

pub fn emit_plot(records: &[ExperimentRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to plot".into()));
    }
    let axis = infer_axis(records);
    let mut series: BTreeMap<SchemeTag, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for r in records {
        series
            .entry(r.scheme)
            .or_default()
            .push((x_value(r, axis), r.mean_sum_rate_bits, r.std_err));
    }
    for pts in series.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let xs = records.iter().map(|r| x_value(r, axis));
    let (mut x_lo, mut x_hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (mut y_lo, mut y_hi) = records.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| {
        (a.min(r.mean_sum_rate_bits - r.std_err), b.max(r.mean_sum_rate_bits + r.std_err))
    });
    if x_hi - x_lo <= 0.0 {
        x_lo -= 1.0;
        x_hi += 1.0;
    }
    let pad = ((y_hi - y_lo) * 0.05).max(1e-3);
    y_lo -= pad;
    y_hi += pad;

    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * pw;
    let sy = |y: f64| MARGIN_T + (y_hi - y) / (y_hi - y_lo) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in ticks(x_lo, x_hi, 5) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{t:.0}</text>"#,
            MARGIN_T + ph,
            MARGIN_T + ph + 5.0,
            MARGIN_T + ph + 20.0
        );
    }
    for t in ticks(y_lo, y_hi, 5) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_L}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{t:.2}</text>"#,
            MARGIN_L - 5.0,
            MARGIN_L - 8.0,
            y + 4.0
        );
    }
    let x_label = match axis {
        SweepAxis::PowerDbm => "Transmit power P (dBm)",
        SweepAxis::NRisElements => "Number of RIS elements M",
    };
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_label}</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(18,{:.2}) rotate(-90)" text-anchor="middle">Sum rate (bit/s/Hz)</text>"#,
        MARGIN_T + ph / 2.0
    );

    for (i, (scheme, pts)) in series.iter().enumerate() {
        let c = color(*scheme);
        let poly: Vec<String> = pts.iter().map(|(x, y, _)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
            poly.join(" ")
        );
        for (x, y, e) in pts {
            let (px, lo, hi) = (sx(*x), sy(y - e), sy(y + e));
            let _ = writeln!(
                svg,
                r#"<line x1="{px:.2}" y1="{lo:.2}" x2="{px:.2}" y2="{hi:.2}" stroke="{c}"/><line x1="{:.2}" y1="{lo:.2}" x2="{:.2}" y2="{lo:.2}" stroke="{c}"/><line x1="{:.2}" y1="{hi:.2}" x2="{:.2}" y2="{hi:.2}" stroke="{c}"/><circle cx="{px:.2}" cy="{:.2}" r="3" fill="{c}"/>"#,
                px - 4.0,
                px + 4.0,
                px - 4.0,
                px + 4.0,
                sy(*y)
            );
        }
        let ly = MARGIN_T + 15.0 + 20.0 * i as f64;
        let lx = WIDTH - MARGIN_R + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{c}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            scheme.as_str()
        );
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
