//! Two-panel SVG chart of a training history: accuracy on the left, loss on
//! the right, train and validation series in each.
//!
//! Each series polyline carries `data-series` and `data-last` attributes; the
//! latter is the final epoch's value, written exactly as in the history file.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::train::{EpochRecord, TrainingHistory};

const PANEL_W: f64 = 480.0;
const PANEL_H: f64 = 360.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const TRAIN_COLOR: &str = "#1f77b4";
const VAL_COLOR: &str = "#ff7f0e";

struct Series {
    name: &'static str,
    label: &'static str,
    color: &'static str,
    get: fn(&EpochRecord) -> f64,
}

struct Panel {
    title: &'static str,
    y_label: &'static str,
    series: [Series; 2],
}

fn panels() -> [Panel; 2] {
    [
        Panel {
            title: "Model accuracy",
            y_label: "accuracy",
            series: [
                Series { name: "train_accuracy", label: "train", color: TRAIN_COLOR, get: |r| r.train_accuracy },
                Series { name: "val_accuracy", label: "validation", color: VAL_COLOR, get: |r| r.val_accuracy },
            ],
        },
        Panel {
            title: "Model loss",
            y_label: "loss",
            series: [
                Series { name: "train_loss", label: "train", color: TRAIN_COLOR, get: |r| r.train_loss },
                Series { name: "val_loss", label: "validation", color: VAL_COLOR, get: |r| r.val_loss },
            ],
        },
    ]
}

fn nice_max(v: f64) -> f64 {
    if !(v > 0.0) || !v.is_finite() {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&c| c >= v)
        .unwrap_or(10.0 * mag)
}

fn render_panel(out: &mut String, panel: &Panel, records: &[EpochRecord], x0: f64) {
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let max_val = records
        .iter()
        .flat_map(|r| panel.series.iter().map(move |s| (s.get)(r)))
        .fold(0.0f64, f64::max);
    let y_max = if panel.y_label == "accuracy" { 1.0f64.max(nice_max(max_val)) } else { nice_max(max_val) };
    let first = records[0].epoch as f64;
    let last = records[records.len() - 1].epoch as f64;
    let span = last - first;
    let sx = |epoch: f64| {
        if span > 0.0 {
            x0 + MARGIN_L + (epoch - first) / span * plot_w
        } else {
            x0 + MARGIN_L + plot_w / 2.0
        }
    };
    let sy = |v: f64| MARGIN_T + plot_h - (v / y_max).clamp(0.0, 1.0) * plot_h;

    let _ = writeln!(out, r#"<g class="panel" data-panel="{}">"#, panel.y_label);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        x0 + PANEL_W / 2.0,
        panel.title
    );
    let _ = writeln!(
        out,
        r##"<rect x="{:.1}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##,
        x0 + MARGIN_L
    );
    for i in 0..=5 {
        let v = y_max * i as f64 / 5.0;
        let y = sy(v);
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"##,
            x0 + MARGIN_L,
            x0 + MARGIN_L + plot_w,
            x0 + MARGIN_L - 6.0,
            y + 4.0,
            format_tick(v)
        );
    }
    let step = ((span / 10.0).ceil() as usize).max(1);
    for r in records.iter().step_by(step) {
        let x = sx(r.epoch as f64);
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
            MARGIN_T + plot_h + 16.0,
            r.epoch
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">epoch</text>"#,
        x0 + MARGIN_L + plot_w / 2.0,
        PANEL_H - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        x0 + 16.0,
        MARGIN_T + plot_h / 2.0,
        x0 + 16.0,
        MARGIN_T + plot_h / 2.0,
        panel.y_label
    );

    for (k, s) in panel.series.iter().enumerate() {
        let points: Vec<String> = records
            .iter()
            .map(|r| format!("{:.2},{:.2}", sx(r.epoch as f64), sy((s.get)(r))))
            .collect();
        let last_value = (s.get)(&records[records.len() - 1]);
        let _ = writeln!(
            out,
            r#"<polyline data-series="{}" data-last="{}" fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            s.name,
            last_value,
            s.color,
            points.join(" ")
        );
        for r in records {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
                sx(r.epoch as f64),
                sy((s.get)(r)),
                s.color
            );
        }
        let ly = MARGIN_T + 14.0 + 16.0 * k as f64;
        let lx = x0 + PANEL_W - MARGIN_R - 100.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            lx + 18.0,
            s.color,
            lx + 24.0,
            ly + 4.0,
            s.label
        );
    }
    let _ = writeln!(out, "</g>");
}

fn format_tick(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn render_history_svg(history: &TrainingHistory) -> Result<String> {
    if history.records.is_empty() {
        return Err(Error::History("history has no epochs".into()));
    }
    let width = 2.0 * PANEL_W;
    let mut out = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{PANEL_H}\" viewBox=\"0 0 {width} {PANEL_H}\" font-family=\"sans-serif\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for (i, panel) in panels().iter().enumerate() {
        render_panel(&mut out, panel, &history.records, i as f64 * PANEL_W);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_history_svg(history: &TrainingHistory, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), render_history_svg(history)?.as_bytes())
}
