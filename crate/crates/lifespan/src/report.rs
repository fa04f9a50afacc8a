//! Evaluation report artifacts: JSON, a per-bucket CSV and an SVG bar chart
//! of observed versus predicted mean absolute error per bucket.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lifespan_core::{BucketingMode, EvalReport};
use serde::{Deserialize, Serialize};

use crate::fsutil;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_SVG: &str = "report.svg";
pub const BUCKETS_CSV: &str = "buckets.csv";

/// Evaluation under both bucketing modes. `selected` names the mode the
/// caller asked for; the other is kept for comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub selected: BucketingMode,
    pub by_true_target: EvalReport,
    pub by_predicted_mu: EvalReport,
}

impl EvaluationSummary {
    pub fn selected_report(&self) -> &EvalReport {
        match self.selected {
            BucketingMode::ByTrueTarget => &self.by_true_target,
            BucketingMode::ByPredictedMu => &self.by_predicted_mu,
        }
    }
}

pub fn buckets_csv(report: &EvalReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bucket", "lo", "hi", "n", "e", "e_hat"]).expect("in-memory csv");
    for b in &report.buckets {
        w.write_record([
            b.index.to_string(),
            b.lo.to_string(),
            b.hi.to_string(),
            b.n.to_string(),
            b.e.to_string(),
            b.e_hat.to_string(),
        ])
        .expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn mode_label(mode: BucketingMode) -> &'static str {
    match mode {
        BucketingMode::ByTrueTarget => "true remaining lifespan",
        BucketingMode::ByPredictedMu => "predicted remaining lifespan",
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Grouped bar chart: per bucket, the observed mean absolute error `e_b`
/// next to the predicted `ê_b`, with the sample count above each group.
pub fn render_svg(report: &EvalReport, title: &str) -> String {
    const W: f64 = 760.0;
    const H: f64 = 420.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 50.0;
    const BOTTOM: f64 = 70.0;
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let peak = report
        .buckets
        .iter()
        .flat_map(|b| [b.e, b.e_hat])
        .fold(0.0f64, f64::max);
    let y_max = if peak > 0.0 { nice_ceiling(peak) } else { 1.0 };
    let y = |v: f64| TOP + plot_h * (1.0 - v / y_max);
    let groups = report.buckets.len().max(1) as f64;
    let group_w = plot_w / groups;
    let bar_w = group_w * 0.35;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="36" text-anchor="middle">MAE {:.3}  ECE {:.3}  ECE1 {:.3}  ECEp {:.3}  n {}</text>"#,
        W / 2.0,
        report.mae,
        report.ece_bucketed,
        report.ece_one,
        report.ece_pointwise,
        report.n
    );
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let _ = writeln!(
            s,
            "<line x1=\"{LEFT}\" x2=\"{}\" y1=\"{yy:.1}\" y2=\"{yy:.1}\" stroke=\"#ddd\"/><text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{v:.1}</text>",
            W - RIGHT,
            LEFT - 6.0,
            y(v) + 4.0,
            yy = y(v),
        );
    }
    for (k, b) in report.buckets.iter().enumerate() {
        let x0 = LEFT + group_w * k as f64 + (group_w - 2.0 * bar_w) / 2.0;
        for (j, (v, color)) in [(b.e, "#4c72b0"), (b.e_hat, "#dd8452")].into_iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{bar_w:.1}" height="{:.1}" fill="{color}"/>"#,
                x0 + bar_w * j as f64,
                y(v),
                y(0.0) - y(v),
            );
        }
        let cx = x0 + bar_w;
        let _ = writeln!(
            s,
            r##"<text x="{cx:.1}" y="{:.1}" text-anchor="middle" fill="#555">n={}</text>"##,
            y(b.e.max(b.e_hat)) - 4.0,
            b.n
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{:.0}-{:.0}</text>"#,
            y(0.0) + 14.0,
            b.lo,
            b.hi
        );
    }
    let _ = writeln!(
        s,
        "<line x1=\"{LEFT}\" x2=\"{}\" y1=\"{y0:.1}\" y2=\"{y0:.1}\" stroke=\"#333\"/>",
        W - RIGHT,
        y0 = y(0.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">bucket by {} (years)</text>"#,
        LEFT + plot_w / 2.0,
        H - 34.0,
        mode_label(report.bucketing_mode)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">mean absolute error (years)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    let legend_y = H - 14.0;
    let _ = writeln!(
        s,
        "<rect x=\"{LEFT}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"#4c72b0\"/><text x=\"{}\" y=\"{legend_y}\">observed</text>",
        legend_y - 9.0,
        LEFT + 14.0
    );
    let _ = writeln!(
        s,
        "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"#dd8452\"/><text x=\"{}\" y=\"{legend_y}\">predicted</text>",
        LEFT + 90.0,
        legend_y - 9.0,
        LEFT + 104.0
    );
    s.push_str("</svg>\n");
    s
}

fn nice_ceiling(v: f64) -> f64 {
    let mag = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&c| c >= v)
        .unwrap_or(10.0 * mag)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub json: PathBuf,
    pub svg: PathBuf,
    pub csv: PathBuf,
}

/// Writes `report.json`, `report.svg` and `buckets.csv` into `dir`.
pub fn write_report(dir: &Path, report: &EvalReport, title: &str) -> std::io::Result<ReportPaths> {
    let paths = ReportPaths {
        json: dir.join(REPORT_JSON),
        svg: dir.join(REPORT_SVG),
        csv: dir.join(BUCKETS_CSV),
    };
    let json = serde_json::to_vec_pretty(report).expect("report serializes");
    fsutil::write_atomic(&paths.json, &json)?;
    fsutil::write_atomic(&paths.svg, render_svg(report, title).as_bytes())?;
    fsutil::write_atomic(&paths.csv, &buckets_csv(report))?;
    Ok(paths)
}
