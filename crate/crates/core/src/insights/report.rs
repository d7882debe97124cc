//! Static renderings of an [`InsightsReport`].
//!
//! SVG: fixed 1280x480 viewBox with three panels (summary and hand-usage pie,
//! remaining time vs inter-press gap scatter, hand-to-target distance over time)
//! and the press sequence along the bottom.
//!
//! CSV columns, in order: `series,index,x,y`, where `series` is one of
//! `press` (x = press index, y = target id), `scatter` (x = remaining time s,
//! y = gap s), `distance` (x = t s, y = distance m) or `reaction`
//! (x = trial, y = reaction time s).
//!
//! HTML: a standalone page embedding the summary table, the SVG and the CSV.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use super::InsightsReport;

pub const SVG_WIDTH: u32 = 1280;
pub const SVG_HEIGHT: u32 = 480;

const LEFT_COLOR: &str = "#1f6fb4";
const RIGHT_COLOR: &str = "#f28e2b";
const INK: &str = "#222222";
const GRID: &str = "#cccccc";

#[derive(Debug, Error, PartialEq)]
#[error("unknown report format `{0}` (expected svg, csv or html)")]
pub struct FormatError(pub String);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderFormat {
    Svg,
    Csv,
    Html,
}

impl RenderFormat {
    pub fn extension(self) -> &'static str {
        match self {
            RenderFormat::Svg => "svg",
            RenderFormat::Csv => "csv",
            RenderFormat::Html => "html",
        }
    }
}

impl FromStr for RenderFormat {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "svg" => Ok(RenderFormat::Svg),
            "csv" => Ok(RenderFormat::Csv),
            "html" => Ok(RenderFormat::Html),
            _ => Err(FormatError(s.to_owned())),
        }
    }
}

pub fn render_report(report: &InsightsReport, format: RenderFormat) -> Vec<u8> {
    match format {
        RenderFormat::Svg => render_svg(report).into_bytes(),
        RenderFormat::Csv => render_csv(report),
        RenderFormat::Html => render_html(report).into_bytes(),
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Two decimals, never "-0.00".
fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_owned()
    } else {
        s
    }
}

#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, px_lo: f64, px_hi: f64, from_zero: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if from_zero {
            lo = lo.min(0.0);
        }
        if hi - lo < 1e-9 {
            hi = lo + 1.0;
        }
        Self { lo, hi, px_lo, px_hi }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

struct Panel {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

const PLOT_TOP: f64 = 80.0;
const PLOT_BOTTOM: f64 = 400.0;

fn axes(svg: &mut String, p: &Panel, x: Axis, y: Axis, x_label: &str, y_label: &str) {
    let _ = writeln!(
        svg,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="{GRID}"/>"##,
        num(p.x0),
        num(p.y0),
        num(p.x1 - p.x0),
        num(p.y1 - p.y0)
    );
    for (v, anchor, px, py) in [
        (x.lo, "start", p.x0, p.y1 + 16.0),
        (x.hi, "end", p.x1, p.y1 + 16.0),
    ] {
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" font-size="11" text-anchor="{anchor}">{}</text>"##,
            num(px),
            num(py),
            num(v)
        );
    }
    for (v, py) in [(y.lo, p.y1), (y.hi, p.y0 + 10.0)] {
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"##,
            num(p.x0 - 4.0),
            num(py),
            num(v)
        );
    }
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"##,
        num((p.x0 + p.x1) / 2.0),
        num(p.y1 + 32.0),
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"##,
        num(p.x0 - 30.0),
        num((p.y0 + p.y1) / 2.0),
        num(p.x0 - 30.0),
        num((p.y0 + p.y1) / 2.0),
        escape(y_label)
    );
}

fn no_data(svg: &mut String, p: &Panel) {
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{}" font-size="13" fill="#888888" text-anchor="middle">no data</text>"##,
        num((p.x0 + p.x1) / 2.0),
        num((p.y0 + p.y1) / 2.0)
    );
}

fn pie(svg: &mut String, report: &InsightsReport, cx: f64, cy: f64, r: f64) {
    let usage = &report.hand_usage;
    let presses = usage.left_presses + usage.right_presses;
    if presses == 0 {
        let _ = writeln!(
            svg,
            r##"<circle cx="{}" cy="{}" r="{}" fill="#eeeeee" stroke="{GRID}"/>"##,
            num(cx),
            num(cy),
            num(r)
        );
    } else if usage.left_presses == 0 || usage.right_presses == 0 {
        let color = if usage.left_presses == 0 { RIGHT_COLOR } else { LEFT_COLOR };
        let _ = writeln!(
            svg,
            r##"<circle cx="{}" cy="{}" r="{}" fill="{color}"/>"##,
            num(cx),
            num(cy),
            num(r)
        );
    } else {
        // left slice clockwise from 12 o'clock, right slice fills the rest
        let angle = usage.left_fraction * std::f64::consts::TAU;
        let (sx, sy) = (cx, cy - r);
        let (ex, ey) = (cx + r * angle.sin(), cy - r * angle.cos());
        let large_left = u8::from(usage.left_fraction > 0.5);
        let _ = writeln!(
            svg,
            r##"<path d="M {} {} L {} {} A {} {} 0 {large_left} 1 {} {} Z" fill="{LEFT_COLOR}"/>"##,
            num(cx),
            num(cy),
            num(sx),
            num(sy),
            num(r),
            num(r),
            num(ex),
            num(ey)
        );
        let _ = writeln!(
            svg,
            r##"<path d="M {} {} L {} {} A {} {} 0 {} 1 {} {} Z" fill="{RIGHT_COLOR}"/>"##,
            num(cx),
            num(cy),
            num(ex),
            num(ey),
            num(r),
            num(r),
            1 - large_left,
            num(sx),
            num(sy)
        );
    }
    for (i, (label, color, frac)) in [
        ("left", LEFT_COLOR, usage.left_fraction),
        ("right", RIGHT_COLOR, usage.right_fraction),
    ]
    .into_iter()
    .enumerate()
    {
        let y = cy + r + 22.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r##"<rect x="{}" y="{}" width="12" height="12" fill="{color}"/>"##,
            num(cx - 60.0),
            num(y - 10.0)
        );
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" font-size="12">{label} hand {}%</text>"##,
            num(cx - 42.0),
            num(y),
            num(frac * 100.0)
        );
    }
}

pub fn render_svg(report: &InsightsReport) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}" font-family="sans-serif" fill="{INK}">"##
    );
    let _ = writeln!(svg, r##"<rect width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="#ffffff"/>"##);
    let mode = report.mode.map(|m| m.as_str()).unwrap_or("-");
    let _ = writeln!(
        svg,
        r##"<text x="20" y="30" font-size="18">Session {} ({mode})</text>"##,
        escape(&report.session_id)
    );

    // summary panel
    let d = &report.cumulative_displacement_m;
    let _ = writeln!(svg, r##"<text x="20" y="70" font-size="28">Score {}</text>"##, report.score);
    let _ = writeln!(
        svg,
        r##"<text x="20" y="96" font-size="13">Hand displacement: left {} m, right {} m, total {} m</text>"##,
        num(d.left),
        num(d.right),
        num(d.total)
    );
    if let Some(rs) = &report.reaction_stats {
        let _ = writeln!(
            svg,
            r##"<text x="20" y="116" font-size="13">Reaction: mean {} s, median {} s, best {} s, worst {} s</text>"##,
            num(rs.mean_s),
            num(rs.median_s),
            num(rs.best_s),
            num(rs.worst_s)
        );
    }
    pie(&mut svg, report, 200.0, 240.0, 95.0);

    // inter-press scatter
    let scatter_panel = Panel { x0: 470.0, x1: 830.0, y0: PLOT_TOP, y1: PLOT_BOTTOM };
    let _ = writeln!(
        svg,
        r##"<text x="650" y="66" font-size="14" text-anchor="middle">Remaining time vs inter-press gap</text>"##
    );
    let pts = &report.inter_press_scatter;
    let xa = Axis::fit(pts.iter().map(|p| p.remaining_time_s), scatter_panel.x0, scatter_panel.x1, true);
    let ya = Axis::fit(pts.iter().map(|p| p.gap_s), scatter_panel.y1, scatter_panel.y0, true);
    axes(&mut svg, &scatter_panel, xa, ya, "remaining time (s)", "gap (s)");
    if pts.is_empty() {
        no_data(&mut svg, &scatter_panel);
    }
    for p in pts {
        let _ = writeln!(
            svg,
            r##"<circle cx="{}" cy="{}" r="3" fill="{RIGHT_COLOR}"/>"##,
            num(xa.map(p.remaining_time_s)),
            num(ya.map(p.gap_s))
        );
    }

    // distance series
    let dist_panel = Panel { x0: 900.0, x1: 1260.0, y0: PLOT_TOP, y1: PLOT_BOTTOM };
    let _ = writeln!(
        svg,
        r##"<text x="1080" y="66" font-size="14" text-anchor="middle">Hand to lit target distance</text>"##
    );
    let series = &report.distance_series;
    let xa = Axis::fit(series.iter().map(|p| p.t_s), dist_panel.x0, dist_panel.x1, false);
    let ya = Axis::fit(series.iter().map(|p| p.distance_m), dist_panel.y1, dist_panel.y0, true);
    axes(&mut svg, &dist_panel, xa, ya, "time (s)", "distance (m)");
    if series.is_empty() {
        no_data(&mut svg, &dist_panel);
    } else {
        let points: Vec<String> = series
            .iter()
            .map(|p| format!("{},{}", num(xa.map(p.t_s)), num(ya.map(p.distance_m))))
            .collect();
        let _ = writeln!(
            svg,
            r##"<polyline points="{}" fill="none" stroke="{LEFT_COLOR}" stroke-width="1.5"/>"##,
            points.join(" ")
        );
    }

    // press sequence
    const MAX_SHOWN: usize = 60;
    let mut seq: Vec<String> = report
        .press_sequence
        .iter()
        .take(MAX_SHOWN)
        .map(|t| t.to_string())
        .collect();
    if report.press_sequence.len() > MAX_SHOWN {
        seq.push(format!("... ({} total)", report.press_sequence.len()));
    }
    let _ = writeln!(
        svg,
        r##"<text x="20" y="462" font-size="12">Press sequence: {}</text>"##,
        escape(&seq.join(" "))
    );
    svg.push_str("</svg>\n");
    svg
}

pub fn render_csv(report: &InsightsReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["series", "index", "x", "y"])
        .expect("writing to memory");
    let mut row = |series: &str, index: usize, x: String, y: String| {
        w.write_record([series, &index.to_string(), &x, &y])
            .expect("writing to memory");
    };
    for (i, t) in report.press_sequence.iter().enumerate() {
        row("press", i, i.to_string(), t.to_string());
    }
    for (i, p) in report.inter_press_scatter.iter().enumerate() {
        row("scatter", i, p.remaining_time_s.to_string(), p.gap_s.to_string());
    }
    for (i, p) in report.distance_series.iter().enumerate() {
        row("distance", i, p.t_s.to_string(), p.distance_m.to_string());
    }
    if let Some(rs) = &report.reaction_stats {
        for (i, t) in rs.times_s.iter().enumerate() {
            row("reaction", i, (i + 1).to_string(), t.to_string());
        }
    }
    w.into_inner().expect("flushing to memory")
}

pub fn render_html(report: &InsightsReport) -> String {
    let mut html = String::new();
    let title = format!("Session insights: {}", escape(&report.session_id));
    let _ = writeln!(html, "<!DOCTYPE html>");
    let _ = writeln!(html, "<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">");
    let _ = writeln!(html, "<title>{title}</title>");
    let _ = writeln!(
        html,
        "<style>body{{font-family:sans-serif;margin:2em}}table{{border-collapse:collapse}}td,th{{border:1px solid #ccc;padding:4px 8px;text-align:left}}</style>"
    );
    let _ = writeln!(html, "</head>\n<body>\n<h1>{title}</h1>");
    let _ = writeln!(html, "<table>");
    let mut tr = |k: &str, v: String| {
        let _ = writeln!(html, "<tr><th>{k}</th><td>{}</td></tr>", escape(&v));
    };
    tr("Mode", report.mode.map(|m| m.to_string()).unwrap_or_default());
    tr("Score", report.score.to_string());
    let d = &report.cumulative_displacement_m;
    tr(
        "Hand displacement (m)",
        format!("left {}, right {}, total {}", num(d.left), num(d.right), num(d.total)),
    );
    let u = &report.hand_usage;
    tr(
        "Hand usage",
        format!(
            "left {} ({}%), right {} ({}%)",
            u.left_presses,
            num(u.left_fraction * 100.0),
            u.right_presses,
            num(u.right_fraction * 100.0)
        ),
    );
    if let Some(rs) = &report.reaction_stats {
        tr(
            "Reaction time (s)",
            format!(
                "mean {}, median {}, best {}, worst {}",
                num(rs.mean_s),
                num(rs.median_s),
                num(rs.best_s),
                num(rs.worst_s)
            ),
        );
    }
    let _ = writeln!(html, "</table>");
    html.push_str(&render_svg(report));
    let csv = String::from_utf8(render_csv(report)).expect("csv is utf-8");
    let _ = writeln!(
        html,
        "<details>\n<summary>Raw series (CSV)</summary>\n<pre>{}</pre>\n</details>",
        escape(&csv)
    );
    let _ = writeln!(html, "</body>\n</html>");
    html
}
