use std::fmt::Write as _;
use std::io::{self, Write};

use super::CoverageReport;
use crate::refmodel::{CombinationCode, LightPhase};

pub const CSV_HEADER: &str = "code,light,detected,located,tx,count";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvgOptions {
    pub width: u32,
    pub height: u32,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions { width: 960, height: 480 }
    }
}

pub fn emit_report<W: Write>(report: &CoverageReport, format: ReportFormat, sink: W) -> io::Result<()> {
    match format {
        ReportFormat::Csv => emit_csv(report, sink),
        ReportFormat::Svg => emit_svg(report, SvgOptions::default(), sink),
    }
}

pub fn emit_csv<W: Write>(report: &CoverageReport, mut sink: W) -> io::Result<()> {
    let mut out = String::with_capacity(64 * 20);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for code in CombinationCode::all() {
        let _ = writeln!(
            out,
            "{code},{},{},{},{},{}",
            code.light,
            code.detected,
            code.located,
            code.tx,
            report.count(code)
        );
    }
    sink.write_all(out.as_bytes())?;
    sink.flush()
}

pub fn light_color(phase: LightPhase) -> &'static str {
    match phase {
        LightPhase::Red => "#d62728",
        LightPhase::Yellow => "#f2c200",
        LightPhase::Green => "#2ca02c",
        LightPhase::Off => "#7f7f7f",
        LightPhase::RedToYellow => "#e8743b",
        LightPhase::YellowToGreen => "#9acd32",
        LightPhase::GreenToYellow => "#bcbd22",
        LightPhase::YellowToRed => "#ff7f0e",
    }
}

/// Bar chart with one `<rect>` per nonzero code. Legend swatches are circles
/// so that every rect in the document is a bar.
pub fn emit_svg<W: Write>(report: &CoverageReport, opts: SvgOptions, mut sink: W) -> io::Result<()> {
    let (w, h) = (opts.width.max(200) as f64, opts.height.max(160) as f64);
    let (left, right, top, bottom) = (60.0, 150.0, 30.0, 70.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let bars: Vec<(CombinationCode, u64)> = report.nonzero().collect();
    let max = bars.iter().map(|&(_, n)| n).max().unwrap_or(0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="10">"#,
        opts.width, opts.height, opts.width, opts.height
    );
    let _ = writeln!(s, "<title>Combination code coverage ({} scenarios)</title>", report.total);
    let base = top + plot_h;
    let _ = writeln!(s, r#"<line x1="{left}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#, left + plot_w);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{base}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{max}</text>"#, left - 4.0, top + 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">0</text>"#, left - 4.0, base);

    if !bars.is_empty() {
        let slot = plot_w / bars.len() as f64;
        let bar_w = (slot * 0.8).max(1.0);
        for (i, &(code, n)) in bars.iter().enumerate() {
            let bh = plot_h * n as f64 / max as f64;
            let x = left + slot * i as f64 + (slot - bar_w) / 2.0;
            let y = base - bh;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{bar_w:.2}" height="{bh:.2}" fill="{}"><title>{code}: {n}</title></rect>"#,
                light_color(code.light_phase())
            );
            let cx = x + bar_w / 2.0;
            let ly = base + 8.0;
            let _ = writeln!(
                s,
                r#"<text x="{cx:.2}" y="{ly:.2}" text-anchor="end" transform="rotate(-60 {cx:.2} {ly:.2})">{code}</text>"#
            );
        }
    }

    for (i, phase) in LightPhase::ALL.iter().enumerate() {
        let y = top + 14.0 * i as f64 + 6.0;
        let x = w - right + 16.0;
        let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="5" fill="{}"/>"#, light_color(*phase));
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 10.0, y + 3.5, phase.name());
    }
    s.push_str("</svg>\n");
    sink.write_all(s.as_bytes())?;
    sink.flush()
}
