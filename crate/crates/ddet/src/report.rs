//! CSV and SVG outputs.

use std::fmt::Write as _;

use ddet_core::cdf::CdfCurve;
use ddet_core::data::LabelMap;
use ddet_core::eval::{EvalResult, FpsStats};
use ddet_core::losses::LossReport;
use ddet_core::model::Detection;
use ddet_core::render::PALETTE;

fn class_name(labels: &LabelMap, id: usize) -> String {
    labels.name(id).map_or_else(|| id.to_string(), str::to_string)
}

/// `frame,class,score,x1,y1,x2,y2`, rows in the given order.
pub fn detections_csv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a Detection)>, labels: &LabelMap) -> String {
    let mut out = String::from("frame,class,score,x1,y1,x2,y2\n");
    for (frame, d) in rows {
        let b = d.bbox;
        writeln!(
            out,
            "{frame},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            class_name(labels, d.class_id),
            d.score,
            b.x1,
            b.y1,
            b.x2,
            b.y2
        )
        .expect("write to string");
    }
    out
}

/// `class,ap,n_gt` per class, then `mAP,<value>,<total n_gt>`.
pub fn eval_csv(result: &EvalResult, labels: &LabelMap) -> String {
    let mut out = String::from("class,ap,n_gt\n");
    let mut total = 0;
    for (&id, c) in &result.per_class {
        total += c.n_gt;
        writeln!(out, "{},{:.6},{}", class_name(labels, id), c.ap, c.n_gt).expect("write to string");
    }
    writeln!(out, "mAP,{:.6},{total}", result.map).expect("write to string");
    out
}

/// `class,score,precision,recall` for every detection of every class.
pub fn pr_csv(result: &EvalResult, labels: &LabelMap) -> String {
    let mut out = String::from("class,score,precision,recall\n");
    for (&id, c) in &result.per_class {
        for p in &c.pr {
            writeln!(
                out,
                "{},{:.6},{:.6},{:.6}",
                class_name(labels, id),
                p.score,
                p.precision,
                p.recall
            )
            .expect("write to string");
        }
    }
    out
}

/// `population,gamma,sample_fraction,cumulative_loss_share`; `max_points`
/// of 0 keeps every point.
pub fn cdf_csv(curves: &[CdfCurve], max_points: usize) -> String {
    let mut out = String::from("population,gamma,sample_fraction,cumulative_loss_share\n");
    for c in curves {
        for p in c.downsample(max_points) {
            writeln!(
                out,
                "{},{:.6},{:.6},{:.6}",
                c.population.name(),
                c.gamma,
                p.sample_fraction,
                p.cumulative_loss_share
            )
            .expect("write to string");
        }
    }
    out
}

pub const LOSS_LOG_HEADER: &str = "step,total,cls,reg,n_pos\n";

/// One loss-log row; `step` counts completed steps.
pub fn loss_log_row(step: usize, r: &LossReport) -> String {
    format!("{step},{:.6},{:.6},{:.6},{}\n", r.total, r.cls, r.reg, r.n_pos)
}

/// Summary row and per-run timings.
pub fn fps_csv(s: &FpsStats) -> (String, String) {
    let total: f64 = s.per_run_seconds.iter().sum();
    let summary = format!(
        "mean_fps,std_fps,warmup_runs,measured_runs,total_seconds\n{:.6},{:.6},{},{},{:.6}\n",
        s.mean_fps, s.std_fps, s.warmup_runs, s.measured_runs, total
    );
    let mut runs = String::from("run,seconds\n");
    for (i, t) in s.per_run_seconds.iter().enumerate() {
        writeln!(runs, "{i},{t:.9}").expect("write to string");
    }
    (summary, runs)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Vector overlay: one `rect` and one score label per detection.
pub fn overlay_svg(width: usize, height: usize, detections: &[Detection], labels: &LabelMap) -> String {
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    );
    for d in detections {
        let [r, g, b] = PALETTE[d.class_id % PALETTE.len()];
        let bb = d.bbox;
        writeln!(
            out,
            "  <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"rgb({r},{g},{b})\" stroke-width=\"2\"/>",
            bb.x1,
            bb.y1,
            bb.width(),
            bb.height()
        )
        .expect("write to string");
        writeln!(
            out,
            "  <text x=\"{:.2}\" y=\"{:.2}\" fill=\"rgb({r},{g},{b})\" font-size=\"8\">{} {:.2}</text>",
            bb.x1,
            (bb.y1 - 2.0).max(8.0),
            escape(&class_name(labels, d.class_id)),
            d.score
        )
        .expect("write to string");
    }
    out.push_str("</svg>\n");
    out
}
