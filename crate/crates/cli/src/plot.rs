//! Static SVG line charts of evaluation results.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use cpib_core::ood::EvalRecord;

use crate::error::{CliError, Code};

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub const METRICS: [&str; 5] = ["error", "loglik", "brier", "mi_xz", "mi_zy"];

pub fn metric_value(r: &EvalRecord, metric: &str) -> Option<f64> {
    Some(match metric {
        "error" => r.error,
        "loglik" => r.loglik,
        "brier" => r.brier,
        "mi_xz" => r.mi_xz,
        "mi_zy" => r.mi_zy,
        _ => return None,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Series per variant: `(severity, median over seeds and betas)` sorted by
/// severity.
pub type Series = BTreeMap<String, Vec<(f64, f64)>>;

pub fn series(records: &[&EvalRecord], metric: &str) -> Series {
    let mut groups: BTreeMap<String, BTreeMap<u64, (f64, Vec<f64>)>> = BTreeMap::new();
    for r in records {
        let v = metric_value(r, metric).unwrap_or(f64::NAN);
        groups
            .entry(r.variant.clone())
            .or_default()
            .entry(r.severity.to_bits())
            .or_insert_with(|| (r.severity, Vec::new()))
            .1
            .push(v);
    }
    groups
        .into_iter()
        .map(|(variant, pts)| {
            let mut p: Vec<(f64, f64)> = pts.into_values().map(|(s, v)| (s, median(v))).collect();
            p.sort_by(|a, b| a.0.total_cmp(&b.0));
            (variant, p)
        })
        .collect()
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// One chart of `metric` against severity, one polyline per series.
pub fn render(title: &str, metric: &str, s: &Series) -> String {
    let (x0, x1) = range(s.values().flatten().map(|p| p.0));
    let (y0, y1) = range(s.values().flatten().map(|p| p.1));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = writeln!(out, r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(xv), b + 18.0, tick(xv));
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, l - 6.0, py(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">severity</text>"#, W / 2.0, H - 16.0);
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(metric)
    );
    for (i, (name, pts)) in s.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"><title>{}</title></polyline>"#,
            points.join(" "),
            escape(name)
        );
        let ly = t + 16.0 * i as f64;
        let _ = writeln!(out, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, r - 120.0, r - 100.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, r - 95.0, ly + 4.0, escape(name));
    }
    out.push_str("</svg>\n");
    out
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// `(file name, svg)` per scenario label.
pub fn charts(records: &[EvalRecord], metric: &str) -> Result<Vec<(String, String)>, CliError> {
    if records.is_empty() {
        return Err(CliError::new(Code::Plot, "no result rows to plot"));
    }
    if !METRICS.contains(&metric) {
        return Err(CliError::new(
            Code::Plot,
            format!("unknown metric `{metric}` (expected one of {})", METRICS.join(", ")),
        ));
    }
    let mut by_scenario: BTreeMap<&str, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        by_scenario.entry(&r.scenario).or_default().push(r);
    }
    Ok(by_scenario
        .into_iter()
        .map(|(scenario, rows)| {
            let s = series(&rows, metric);
            (format!("{scenario}-{metric}.svg"), render(&format!("{metric} under {scenario}"), metric, &s))
        })
        .collect())
}
