//! Line charts as self-contained SVG.
//!
//! The plot box maps the data range exactly: the smallest x lands on the
//! left edge, the largest on the right edge, and likewise for y. The root
//! element records the ranges in `data-x-min`, `data-x-max`, `data-y-min`
//! and `data-y-max`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::csvio::Table;
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// Total weight norm.
    Norm,
    /// Typical number of active neurons (test set when present).
    Active,
    /// Classification error (test set when present).
    Error,
}

impl PlotKind {
    fn label(self) -> &'static str {
        match self {
            Self::Norm => "total weight norm",
            Self::Active => "active neurons",
            Self::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub const WIDTH: f64 = 720.0;
pub const HEIGHT: f64 = 440.0;
pub const LEFT: f64 = 80.0;
pub const RIGHT: f64 = 180.0;
pub const TOP: f64 = 30.0;
pub const BOTTOM: f64 = 50.0;

const COLORS: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn col(t: &Table, name: &str) -> Result<usize, String> {
    t.column(name).ok_or_else(|| format!("missing column {name}"))
}

/// First non-empty of `cols` in row `i`.
fn first_value(t: &Table, i: usize, cols: &[usize]) -> Result<Option<f64>, String> {
    for &c in cols {
        if let Some(v) = t.float(i, c)? {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

fn metrics_series(t: &Table, kind: PlotKind, label: &str) -> Result<Vec<Series>, String> {
    let step = col(t, "step")?;
    let norms: Vec<usize> = (0..t.header.len()).filter(|&c| t.header[c].starts_with("norm_w")).collect();
    let ys = match kind {
        PlotKind::Norm => vec![],
        PlotKind::Active => vec![col(t, "active_test")?, col(t, "active_train")?],
        PlotKind::Error => vec![col(t, "err_test")?, col(t, "err_train")?],
    };
    let mut by_run: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for i in 0..t.rows.len() {
        let run: u64 = t.rows[i][0]
            .parse()
            .map_err(|_| format!("row {}: bad run_id {:?}", i + 2, t.rows[i][0]))?;
        let x = t.float(i, step)?.ok_or_else(|| format!("row {}: empty step", i + 2))?;
        let y = if kind == PlotKind::Norm {
            let mut s = 0.0;
            for &c in &norms {
                s += t.float(i, c)?.ok_or_else(|| format!("row {}: empty {}", i + 2, t.header[c]))?.powi(2);
            }
            Some(s.sqrt())
        } else {
            first_value(t, i, &ys)?
        };
        if let Some(y) = y {
            by_run.entry(run).or_default().push((x, y));
        }
    }
    Ok(by_run
        .into_iter()
        .map(|(run, points)| Series {
            name: format!("{label} run {run}"),
            points,
        })
        .collect())
}

fn summary_series(t: &Table, kind: PlotKind) -> Result<Vec<Series>, String> {
    let step = col(t, "step")?;
    let ys = match kind {
        PlotKind::Norm => vec![col(t, "total_norm_mean")?],
        PlotKind::Active => vec![col(t, "active_test_mean")?, col(t, "active_train_mean")?],
        PlotKind::Error => vec![col(t, "err_test_mean")?, col(t, "err_train_mean")?],
    };
    let mut out: Vec<Series> = Vec::new();
    for i in 0..t.rows.len() {
        if t.rows[i][step] == "final" {
            continue;
        }
        let x = t.float(i, step)?.ok_or_else(|| format!("row {}: empty step", i + 2))?;
        let Some(y) = first_value(t, i, &ys)? else { continue };
        let arm = &t.rows[i][0];
        match out.iter_mut().find(|s| &s.name == arm) {
            Some(s) => s.points.push((x, y)),
            None => out.push(Series {
                name: arm.clone(),
                points: vec![(x, y)],
            }),
        }
    }
    Ok(out)
}

/// Series from a `metrics.csv` (one per run) or `summary.csv` (one per arm).
pub fn series_from_table(t: &Table, kind: PlotKind, label: &str) -> Result<Vec<Series>, String> {
    if let Some(w) = t.rows.iter().position(|r| r.len() != t.header.len()) {
        return Err(format!("row {}: {} cells, header has {}", w + 2, t.rows[w].len(), t.header.len()));
    }
    match t.header.first().map(String::as_str) {
        Some("run_id") => metrics_series(t, kind, label),
        Some("arm") => summary_series(t, kind),
        _ => Err("not a metrics or summary CSV".into()),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

pub fn render_svg(series: &[Series], title: &str, y_label: &str) -> Result<String, String> {
    let all = || series.iter().flat_map(|s| s.points.iter());
    if all().next().is_none() {
        return Err("no data rows".into());
    }
    if let Some(p) = all().find(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(format!("non-finite point {p:?}"));
    }
    let (x0, x1) = range(all().map(|p| p.0));
    let (y0, y1) = range(all().map(|p| p.1));
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    // A degenerate range maps to the low edge.
    let sx = |x: f64| LEFT + if x1 > x0 { (x - x0) / (x1 - x0) * pw } else { 0.0 };
    let sy = |y: f64| TOP + ph - if y1 > y0 { (y - y0) / (y1 - y0) * ph } else { 0.0 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-x-min="{x0}" data-x-max="{x1}" data-y-min="{y0}" data-y-max="{y1}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, escape(title));
    for (i, f) in [0.0, 0.5, 1.0].iter().enumerate() {
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let anchor = ["start", "middle", "end"][i];
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="{anchor}">{}</text>"#,
            LEFT + f * pw,
            TOP + ph + 16.0,
            short(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            TOP + ph - f * ph + 4.0,
            short(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">step</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(y_label)
    );
    for (i, se) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = se.points.iter().map(|&(x, y)| format!("{:.3},{:.3}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-series="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(&se.name),
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text></g>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&se.name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn short(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.3e}")
    } else {
        format!("{}", (v * 1e4).round() / 1e4)
    }
}

/// Reads every CSV, merges their series and writes one SVG.
pub fn plot_files(paths: &[PathBuf], kind: PlotKind, out: &Path) -> CliResult<()> {
    let mut series = Vec::new();
    for p in paths {
        let t = Table::read(p)?;
        let label = p
            .parent()
            .and_then(|d| d.file_name())
            .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
        series.extend(series_from_table(&t, kind, &label).map_err(|e| CliError::Run(format!("{}: {e}", p.display())))?);
    }
    let title = paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ");
    let svg = render_svg(&series, &title, kind.label()).map_err(CliError::Run)?;
    std::fs::write(out, svg).map_err(|e| CliError::Run(format!("{}: {e}", out.display())))
}
