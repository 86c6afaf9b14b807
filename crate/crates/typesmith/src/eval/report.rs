//! Report rendering: plain-text tables, JSON, and a small SVG chart for
//! precision/recall threshold curves.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::{MetricSummary, SearchEvalReport};

/// One labeled precision/recall curve; points are (threshold, p, r).
#[derive(Debug, Clone, Serialize)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64, f64)>,
}

pub fn metrics_table(task: &str, rows: &[MetricSummary]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{task}\n"));
    out.push_str(
        "  k   precision  recall     f1         w-prec     w-rec      w-f1       corr/all/D\n",
    );
    for m in rows {
        out.push_str(&format!(
            "  {:<3} {:<10.4} {:<10.4} {:<10.4} {:<10.4} {:<10.4} {:<10.4} {}/{}/{}{}\n",
            m.k,
            m.precision,
            m.recall,
            m.f1,
            m.weighted_precision,
            m.weighted_recall,
            m.weighted_f1,
            m.n_corr,
            m.n_all,
            m.d,
            if m.precision_defined { "" } else { "  (no suggestions)" },
        ));
    }
    if let Some(m) = rows.first() {
        out.push_str(&format!(
            "  abstained: {}  out-of-vocabulary excluded: {}\n",
            m.abstained, m.oov_excluded
        ));
    }
    out
}

pub fn search_table(report: &SearchEvalReport) -> String {
    let files = report.files.len().max(1);
    let slots = report.total_slots.max(1);
    let mut out = String::new();
    out.push_str(&format!(
        "search evaluation: {} strategy, top-{}\n",
        report.strategy, report.top_k
    ));
    out.push_str(&format!(
        "  annotations: type-correct {}/{} ({:.1}%)  ground-truth match {}/{} ({:.1}%)  upper bound {}/{} ({:.1}%)\n",
        report.total_filled,
        report.total_slots,
        100.0 * report.total_filled as f64 / slots as f64,
        report.total_gt_matches,
        report.total_slots,
        100.0 * report.total_gt_matches as f64 / slots as f64,
        report.total_upper_bound,
        report.total_slots,
        100.0 * report.total_upper_bound as f64 / slots as f64,
    ));
    out.push_str(&format!(
        "  files: complete+type-correct {}/{} ({:.1}%)  exact match {}/{} ({:.1}%)  upper bound {}/{}\n",
        report.files_complete_correct,
        report.files.len(),
        100.0 * report.files_complete_correct as f64 / files as f64,
        report.files_exact_match,
        report.files.len(),
        100.0 * report.files_exact_match as f64 / files as f64,
        report.files_upper_bound,
        report.files.len(),
    ));
    if !report.excluded.is_empty() {
        out.push_str(&format!("  excluded files: {}\n", report.excluded.len()));
        for (file, reason) in &report.excluded {
            out.push_str(&format!("    {file}: {reason}\n"));
        }
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text)
}

/// Minimal SVG scatter/line chart of recall (x) against precision (y).
pub fn write_pr_curve_svg(path: &Path, curves: &[Curve]) -> std::io::Result<()> {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 60.0;
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let x = |recall: f64| M + recall.clamp(0.0, 1.0) * (W - 2.0 * M);
    let y = |precision: f64| H - M - precision.clamp(0.0, 1.0) * (H - 2.0 * M);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    // Axes with decile ticks.
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        M,
        H - M,
        W - M,
        H - M
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        M,
        M,
        M,
        H - M
    ));
    for i in 0..=10 {
        let v = i as f64 / 10.0;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{v:.1}</text>\n",
            x(v),
            H - M + 14.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{v:.1}</text>\n",
            M - 6.0,
            y(v) + 3.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">recall</text>\n",
        W / 2.0,
        H - 16.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">precision</text>\n",
        H / 2.0,
        H / 2.0
    ));
    for (ci, curve) in curves.iter().enumerate() {
        let color = colors[ci % colors.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|(_, p, r)| format!("{:.2},{:.2}", x(*r), y(*p)))
            .collect();
        if pts.len() > 1 {
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                pts.join(" ")
            ));
        }
        for (_, p, r) in &curve.points {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                x(*r),
                y(*p)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            W - M - 150.0,
            M + 16.0 * ci as f64,
            curve.label
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
}

/// Per-type frequency table used in coverage summaries.
pub fn type_frequency_table(types: &[String], top: usize) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in types {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut rows: Vec<(&str, usize)> = counts.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    rows.truncate(top);
    let mut out = String::from("  type                          count\n");
    for (t, c) in rows {
        out.push_str(&format!("  {t:<28}  {c}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_written_and_contains_curves() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.svg");
        let curves = vec![Curve {
            label: "full".to_string(),
            points: vec![(0.0, 0.8, 0.7), (0.5, 0.9, 0.5), (0.9, 0.95, 0.2)],
        }];
        write_pr_curve_svg(&path, &curves).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.contains("polyline"));
        assert!(text.contains("full"));
    }

    #[test]
    fn tables_render() {
        let m = MetricSummary {
            k: 1,
            precision: 0.75,
            recall: 0.6,
            f1: 2.0 / 3.0,
            weighted_precision: 0.7,
            weighted_recall: 0.6,
            weighted_f1: 0.65,
            n_corr: 6,
            n_all: 8,
            d: 10,
            abstained: 2,
            oov_excluded: 0,
            precision_defined: true,
            recall_defined: true,
        };
        let table = metrics_table("argument prediction", &[m]);
        assert!(table.contains("0.7500"));
        assert!(table.contains("6/8/10"));
    }
}
