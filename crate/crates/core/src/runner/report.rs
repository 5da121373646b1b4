//! Re-renders the SVG plots of a run directory from its CSVs and manifest.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::stats::trim_count;

use super::fmt_g;
use super::svg::{render, Panel, PanelKind, Series};

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok((header, rows))
}

fn column(header: &[String], name: &str, path: &Path) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::domain(format!("{} lacks column `{name}`", path.display())))
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or(f64::NAN)
}

/// `log10` values when positive data spans more than two decades.
fn log_scaled(values: &[f64]) -> bool {
    let positive: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if positive.is_empty() || positive.iter().any(|&v| v <= 0.0) {
        return false;
    }
    let (lo, hi) = positive
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi / lo > 100.0
}

fn scaled(values: &[f64], log: bool) -> Vec<f64> {
    if log {
        values.iter().map(|v| v.log10()).collect()
    } else {
        values.to_vec()
    }
}

fn bars_panel(title: String, y_label: &str, bars: Vec<(f64, f64)>, log: bool) -> Panel {
    let heights: Vec<f64> = bars.iter().map(|b| b.1).collect();
    let heights = scaled(&heights, log);
    let baseline = if log {
        heights
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
            .floor()
            .min(0.0)
    } else {
        0.0
    };
    Panel {
        title,
        x_label: "medium".into(),
        y_label: if log {
            format!("log10 {y_label}")
        } else {
            y_label.into()
        },
        kind: PanelKind::Bars {
            bars: bars.iter().zip(heights).map(|(b, h)| (b.0, h)).collect(),
            baseline,
        },
    }
}

/// Renders `quenched_t*.svg`, `annealed_m1.svg` and `log_gap.svg` in `dir`.
///
/// Depends only on the files in `dir`, so repeated calls write identical bytes.
pub fn render_report(dir: &Path) -> Result<()> {
    let manifest_path = dir.join("manifest.json");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)?;
    let model = manifest["model"].as_str().unwrap_or("?").to_string();
    let trim = manifest["config"]["report"]["trim_fraction"]
        .as_f64()
        .unwrap_or(0.01);
    let snapshots: Vec<f64> = manifest["config"]["snapshot_times"]
        .as_array()
        .map(|a| a.iter().filter_map(serde_json::Value::as_f64).collect())
        .unwrap_or_default();

    // Per-medium first moments keyed by grid time.
    let path = dir.join("moments.csv");
    let (header, rows) = read_rows(&path)?;
    let (c_medium, c_order, c_time, c_value) = (
        column(&header, "medium", &path)?,
        column(&header, "order", &path)?,
        column(&header, "time", &path)?,
        column(&header, "value", &path)?,
    );
    let mut by_time: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut grid: Vec<f64> = Vec::new();
    for r in rows.iter().filter(|r| r[c_order] == "1") {
        let t = num(&r[c_time]);
        if !grid.contains(&t) {
            grid.push(t);
        }
        by_time
            .entry(r[c_time].clone())
            .or_default()
            .push((num(&r[c_medium]), num(&r[c_value])));
    }
    for &ts in &snapshots {
        let Some(&t) = grid
            .iter()
            .min_by(|a, b| (*a - ts).abs().total_cmp(&(*b - ts).abs()))
        else {
            continue;
        };
        let bars = by_time.get(&fmt_g(t)).cloned().unwrap_or_default();
        let values: Vec<f64> = bars.iter().map(|b| b.1).collect();
        let log = log_scaled(&values);
        let mut panels = vec![bars_panel(
            format!("model {model}: quenched m1 at t = {}, all media", fmt_g(t)),
            "m1",
            bars.clone(),
            log,
        )];
        let k = trim_count(bars.len(), trim);
        if bars.len() > 2 * k {
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let (lo, hi) = (sorted[k], sorted[bars.len() - 1 - k]);
            // Ties at the cut-offs are resolved by medium order.
            let mut below = sorted[..k].iter().filter(|&&v| v == lo).count();
            let mut above = sorted[bars.len() - k..]
                .iter()
                .filter(|&&v| v == hi)
                .count();
            let kept: Vec<(f64, f64)> = bars
                .iter()
                .copied()
                .filter(|&(_, v)| {
                    if v < lo || v > hi {
                        return false;
                    }
                    if v == lo && below > 0 {
                        below -= 1;
                        return false;
                    }
                    if v == hi && above > 0 {
                        above -= 1;
                        return false;
                    }
                    true
                })
                .collect();
            panels.push(bars_panel(
                format!(
                    "model {model}: quenched m1 at t = {}, {} media trimmed per tail",
                    fmt_g(t),
                    k
                ),
                "m1",
                kept,
                log,
            ));
        }
        std::fs::write(
            dir.join(format!("quenched_t{}.svg", fmt_g(t))),
            render(&panels),
        )?;
    }

    let path = dir.join("annealed.csv");
    let (header, rows) = read_rows(&path)?;
    let (c_order, c_power, c_time, c_log, c_log_trim) = (
        column(&header, "order", &path)?,
        column(&header, "power", &path)?,
        column(&header, "time", &path)?,
        column(&header, "log_value", &path)?,
        column(&header, "log_trimmed", &path)?,
    );
    let first: Vec<&Vec<String>> = rows
        .iter()
        .filter(|r| r[c_order] == "1" && r[c_power] == "1")
        .collect();
    let log10 = |s: &str| num(s) / std::f64::consts::LN_10;
    let mut series = vec![Series {
        label: "<m1>".into(),
        points: first
            .iter()
            .map(|r| (num(&r[c_time]), log10(&r[c_log])))
            .collect(),
        dashed: false,
    }];
    if first.iter().all(|r| !r[c_log_trim].is_empty()) {
        series.push(Series {
            label: "<m1>, trimmed".into(),
            points: first
                .iter()
                .map(|r| (num(&r[c_time]), log10(&r[c_log_trim])))
                .collect(),
            dashed: true,
        });
    }
    let panel = Panel {
        title: format!("model {model}: annealed first moment"),
        x_label: "t".into(),
        y_label: "log10 <m1>".into(),
        kind: PanelKind::Lines(series),
    };
    std::fs::write(dir.join("annealed_m1.svg"), render(&[panel]))?;

    let path = dir.join("diagnostics.csv");
    let (header, rows) = read_rows(&path)?;
    let (c_time, c_gap) = (
        column(&header, "time", &path)?,
        column(&header, "log10_gap", &path)?,
    );
    let panel = Panel {
        title: format!("model {model}: log10<m1^2> - 2 log10<m1>"),
        x_label: "t".into(),
        y_label: "gap".into(),
        kind: PanelKind::Lines(vec![Series {
            label: "gap".into(),
            points: rows
                .iter()
                .map(|r| (num(&r[c_time]), num(&r[c_gap])))
                .collect(),
            dashed: false,
        }]),
    };
    std::fs::write(dir.join("log_gap.svg"), render(&[panel]))?;
    Ok(())
}
