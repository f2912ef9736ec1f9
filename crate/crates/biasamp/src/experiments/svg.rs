//! Minimal SVG 1.1 line plots of table columns.
//!
//! Columns named `th_*` are drawn dashed and lighter; `mc_*_mean` columns are
//! solid with ±1 standard-error bars taken from the matching `_std` column
//! (divided by √`mc_replicates` when present). Any series whose name
//! contains `add` adds a dashed reference line at 1.

use std::fmt::Write as _;
use std::path::Path;

use super::config::Scenario;
use super::table::Table;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    pub x: String,
    pub series: Vec<String>,
    /// Split each series into one line per distinct value of this column.
    pub group_by: Option<String>,
    pub log_x: bool,
    pub log_y: bool,
    pub title: Option<String>,
}

impl PlotSpec {
    pub fn new(x: &str, series: &[&str]) -> Self {
        PlotSpec {
            x: x.into(),
            series: series.iter().map(|s| s.to_string()).collect(),
            group_by: None,
            log_x: false,
            log_y: false,
            title: None,
        }
    }

    /// Default picture for a scenario's sweep output.
    pub fn for_scenario(scenario: Scenario) -> Self {
        let (x, series, group, log_x): (&str, &[&str], Option<&str>, bool) = match scenario {
            Scenario::PhaseDiagram | Scenario::IsotropicSweep | Scenario::Custom => {
                ("psi", &["th_add", "mc_add"], Some("phi"), true)
            }
            Scenario::RegularizationPath => ("t", &["th_add", "mc_add"], Some("psi"), true),
            Scenario::DiatomicMinority => ("psi", &["th_r2j", "mc_r2j_mean"], Some("phi"), true),
            Scenario::PowerLawNoiseRatio => ("c", &["th_add", "th_odd", "th_edd"], None, true),
        };
        PlotSpec {
            group_by: group.map(str::to_string),
            log_x,
            title: Some(scenario.name().to_string()),
            ..PlotSpec::new(x, series)
        }
    }
}

const W: f64 = 760.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 210.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

struct Line {
    label: String,
    dashed: bool,
    color: &'static str,
    /// (x, y, half-width of the error bar)
    points: Vec<(f64, f64, Option<f64>)>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo < 1e-12 * (1.0 + hi.abs()) {
            lo -= 0.5;
            hi += 0.5;
        } else {
            let pad = 0.04 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Axis { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            if b >= a {
                return (a..=b).map(|k| 10f64.powi(k)).collect();
            }
            return vec![10f64.powf(0.5 * (self.lo + self.hi))];
        }
        let span = self.hi - self.lo;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() * step;
        (0..).map(|i| first + i as f64 * step).take_while(|v| *v <= self.hi).collect()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn collect_lines(table: &Table, spec: &PlotSpec) -> Result<Vec<Line>> {
    let xs = table.column(&spec.x)?;
    let groups: Vec<String> = match &spec.group_by {
        Some(g) => table.text_column(g)?.into_iter().map(str::to_string).collect(),
        None => vec![String::new(); table.rows.len()],
    };
    let mut group_order: Vec<String> = Vec::new();
    for g in &groups {
        if !group_order.contains(g) {
            group_order.push(g.clone());
        }
    }
    let reps = table.column("mc_replicates").ok();

    let mut lines = Vec::new();
    for (si, name) in spec.series.iter().enumerate() {
        let ys = table.column(name)?;
        let errs = match name.strip_suffix("_mean") {
            Some(stem) => table.column(&format!("{stem}_std")).ok(),
            None => None,
        };
        let mut any = false;
        for (gi, g) in group_order.iter().enumerate() {
            let mut points = Vec::new();
            for i in 0..table.rows.len() {
                if &groups[i] != g {
                    continue;
                }
                let (Some(x), Some(y)) = (xs[i], ys[i]) else { continue };
                if (spec.log_x && x <= 0.0) || (spec.log_y && y <= 0.0) {
                    continue;
                }
                let err = errs.as_ref().and_then(|e| e[i]).map(|sd| match reps.as_ref().and_then(|r| r[i]) {
                    Some(k) if k > 0.0 => sd / k.sqrt(),
                    _ => sd,
                });
                points.push((x, y, err));
            }
            if points.is_empty() {
                continue;
            }
            any = true;
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let label = match &spec.group_by {
                Some(col) => format!("{name} ({col}={g})"),
                None => name.clone(),
            };
            lines.push(Line {
                label,
                dashed: name.starts_with("th_"),
                // Same color for theory and simulation of one group.
                color: PALETTE[if spec.group_by.is_some() { gi } else { si } % PALETTE.len()],
                points,
            });
        }
        if !any {
            return Err(Error::Plot(format!("series `{name}` has no plottable points")));
        }
    }
    Ok(lines)
}

pub fn render_svg(table: &Table, spec: &PlotSpec) -> Result<String> {
    if spec.series.is_empty() {
        return Err(Error::Plot("no series requested".into()));
    }
    let lines = collect_lines(table, spec)?;
    let reference = spec.series.iter().any(|s| s.contains("add"));
    let all = || lines.iter().flat_map(|l| l.points.iter());
    let xa = Axis::fit(all().map(|p| p.0), spec.log_x);
    let mut yvals: Vec<f64> = all()
        .flat_map(|&(_, y, e)| {
            let e = e.unwrap_or(0.0);
            [y - e, y + e]
        })
        .filter(|v| !spec.log_y || *v > 0.0)
        .collect();
    if reference {
        yvals.push(1.0);
    }
    let ya = Axis::fit(yvals.into_iter(), spec.log_y);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let px = |x: f64| LEFT + xa.frac(x) * pw;
    let py = |y: f64| TOP + (1.0 - ya.frac(y).clamp(-0.05, 1.05)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>"#
    );
    if let Some(t) = &spec.title {
        let _ = writeln!(s, r#"<text x="{}" y="22" font-size="15" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, esc(t));
    }
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for t in xa.ticks() {
        let x = px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{b2}" stroke="black"/><text x="{x:.2}" y="{ty}" text-anchor="middle">{}</text>"##,
            tick_label(t),
            b = TOP + ph,
            b2 = TOP + ph + 5.0,
            ty = TOP + ph + 18.0,
        );
    }
    for t in ya.ticks() {
        let y = py(t);
        let _ = writeln!(
            s,
            r##"<line x1="{l2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{}</text>"##,
            tick_label(t),
            l2 = LEFT - 5.0,
            tx = LEFT - 8.0,
            ty = y + 4.0,
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 10.0,
        esc(&spec.x)
    );
    if reference {
        let y = py(1.0);
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="black" stroke-dasharray="6,4"/>"#,
            LEFT + pw
        );
    }

    for (li, line) in lines.iter().enumerate() {
        let pts: Vec<String> = line.points.iter().map(|&(x, y, _)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let style = if line.dashed { r#" stroke-dasharray="5,4" stroke-opacity="0.6""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.8"{style} points="{}"/>"#,
            line.color,
            pts.join(" ")
        );
        for &(x, y, e) in &line.points {
            if let Some(e) = e {
                let (lo, hi) = (y - e, y + e);
                let lo = if spec.log_y && lo <= 0.0 { y } else { lo };
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{}"/>"#,
                    py(lo),
                    py(hi),
                    line.color,
                    x = px(x)
                );
            }
        }
        let ly = TOP + 14.0 + 18.0 * li as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="1.8"{style}/><text x="{}" y="{}">{}</text>"#,
            lx + 24.0,
            line.color,
            lx + 30.0,
            ly + 4.0,
            esc(&line.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

pub fn emit_svg(table: &Table, path: &Path, spec: &PlotSpec) -> Result<()> {
    std::fs::write(path, render_svg(table, spec)?)?;
    Ok(())
}
