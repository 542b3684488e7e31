//! Consistency-level histogram as CSV rows and an SVG bar chart.

use std::fmt::Write as _;

use super::evaluate::EvaluationReport;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistogramReport {
    /// `(level, anchor_count)` for every level from 1 to the largest scored
    /// group size, zero-filled.
    pub rows: Vec<(usize, usize)>,
}

pub fn histogram_report<S: Scalar>(report: &EvaluationReport<S>) -> HistogramReport {
    let rows = (1..=report.max_scored_size())
        .map(|level| (level, report.histogram.get(&level).copied().unwrap_or(0)))
        .collect();
    HistogramReport { rows }
}

impl HistogramReport {
    pub fn total(&self) -> usize {
        self.rows.iter().map(|(_, c)| c).sum()
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["level", "anchor_count"]).expect("in-memory csv write");
        for (level, count) in &self.rows {
            w.write_record([level.to_string(), count.to_string()])
                .expect("in-memory csv write");
        }
        w.into_inner().expect("in-memory csv flush")
    }

    /// Standalone SVG document: levels on the x-axis, anchor counts on the
    /// y-axis.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const LEFT: f64 = 70.0;
        const RIGHT: f64 = 20.0;
        const TOP: f64 = 40.0;
        const BOTTOM: f64 = 60.0;
        let plot_w = W - LEFT - RIGHT;
        let plot_h = H - TOP - BOTTOM;
        let max = self.rows.iter().map(|(_, c)| *c).max().unwrap_or(0);
        let y_top = nice_ceiling(max);
        let y = |v: usize| TOP + plot_h - plot_h * v as f64 / y_top as f64;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">Anchors by answer consistency level</text>"#,
            W / 2.0
        );

        let ticks = 5;
        for t in 0..=ticks {
            let v = y_top * t / ticks;
            let ty = y(v);
            let _ = writeln!(
                svg,
                r##"<line x1="{LEFT}" y1="{ty:.1}" x2="{:.1}" y2="{ty:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v}</text>"##,
                W - RIGHT,
                LEFT - 6.0,
                ty + 4.0
            );
        }

        let n = self.rows.len().max(1) as f64;
        let slot = plot_w / n;
        for (i, (level, count)) in self.rows.iter().enumerate() {
            let x = LEFT + slot * i as f64;
            let bar_y = y(*count);
            let _ = writeln!(
                svg,
                r##"<rect class="bar" data-level="{level}" data-count="{count}" x="{:.1}" y="{bar_y:.1}" width="{:.1}" height="{:.1}" fill="#4c78a8"/>"##,
                x + slot * 0.15,
                slot * 0.7,
                TOP + plot_h - bar_y
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{level}</text>"#,
                x + slot / 2.0,
                TOP + plot_h + 16.0
            );
        }

        let _ = writeln!(
            svg,
            r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{0:.1}" stroke="black"/><line x1="{LEFT}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="black"/>"#,
            TOP + plot_h,
            W - RIGHT
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Answer consistency level</text>"#,
            LEFT + plot_w / 2.0,
            H - 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{0:.1}" text-anchor="middle" transform="rotate(-90 18 {0:.1})">Number of original questions</text>"#,
            TOP + plot_h / 2.0
        );
        svg.push_str("</svg>\n");
        svg
    }
}

/// Smallest multiple of 5 at or above `v` (never 0, so empty charts still
/// have an axis).
fn nice_ceiling(v: usize) -> usize {
    v.div_ceil(5).max(1) * 5
}
