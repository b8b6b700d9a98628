//! Success-ratio curves as a standalone SVG document.

use std::fmt::Write;

use super::metrics::{AggregateRow, Stat};

const SEEN: &str = "#2ca02c";
const UNSEEN: &str = "#ff7f0e";
const ALL: &str = "#1f77b4";
const BASELINE: &str = "#808080";
const DEMOS: &str = "#3d283f";

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 60.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

struct Axes {
    max_k: f64,
    max_demos: f64,
}

impl Axes {
    fn x(&self, k: f64) -> f64 {
        LEFT + k / self.max_k.max(1.0) * (W - LEFT - RIGHT)
    }

    fn y(&self, ratio: f64) -> f64 {
        H - BOTTOM - ratio * (H - TOP - BOTTOM)
    }

    fn y_demos(&self, d: f64) -> f64 {
        self.y(d / self.max_demos.max(1.0))
    }
}

fn series(out: &mut String, pts: &[(f64, Stat)], axes: &Axes, color: &str, dashed: bool, demos: bool) {
    let pts: Vec<_> = pts.iter().filter(|(_, s)| !s.mean.is_nan()).collect();
    if pts.is_empty() {
        return;
    }
    let y = |v: f64| if demos { axes.y_demos(v) } else { axes.y(v) };
    let mut band = String::new();
    for (k, s) in &pts {
        let _ =
            write!(band, "{:.1},{:.1} ", axes.x(*k), y(if demos { s.mean + s.std } else { (s.mean + s.std).min(1.0) }));
    }
    for (k, s) in pts.iter().rev() {
        let _ = write!(band, "{:.1},{:.1} ", axes.x(*k), y((s.mean - s.std).max(0.0)));
    }
    let _ =
        writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, band.trim_end());
    let line: Vec<String> = pts.iter().map(|(k, s)| format!("{:.1},{:.1}", axes.x(*k), y(s.mean))).collect();
    let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
    let _ =
        writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#, line.join(" "));
}

/// Mean ± std curves of seen, unseen and all-task success and of received
/// demonstrations per interaction, with an optional baseline curve.
pub fn render_svg(learned: &[AggregateRow], baseline: Option<&[AggregateRow]>, title: &str) -> String {
    let max_k = learned.iter().chain(baseline.unwrap_or_default()).map(|r| r.interaction).max().unwrap_or(1) as f64;
    let max_demos = learned.iter().map(|r| r.demos.mean + r.demos.std).fold(0.0, f64::max).ceil().max(1.0);
    let axes = Axes { max_k, max_demos };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ =
        writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));

    for i in 0..=10 {
        let r = i as f64 / 10.0;
        let y = axes.y(r);
        let _ =
            writeln!(out, r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#e0e0e0"/>"##, W - RIGHT);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}%</text>"#, LEFT - 6.0, y + 4.0, i * 10);
        let d = r * max_demos;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" fill="{DEMOS}">{}</text>"#,
            W - RIGHT + 6.0,
            y + 4.0,
            if d.fract() == 0.0 { format!("{d}") } else { format!("{d:.1}") }
        );
    }
    for k in 0..=max_k as usize {
        let x = axes.x(k as f64);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{k}</text>"#, H - BOTTOM + 16.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">interaction</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        out,
        r##"<rect x="{LEFT}" y="{TOP}" width="{:.1}" height="{:.1}" fill="none" stroke="#333"/>"##,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );

    let pick = |rows: &[AggregateRow], f: fn(&AggregateRow) -> Stat| -> Vec<(f64, Stat)> {
        rows.iter().map(|r| (r.interaction as f64, f(r))).collect()
    };
    if let Some(b) = baseline {
        series(&mut out, &pick(b, |r| r.all), &axes, BASELINE, true, false);
    }
    series(&mut out, &pick(learned, |r| r.demos), &axes, DEMOS, true, true);
    series(&mut out, &pick(learned, |r| r.seen), &axes, SEEN, false, false);
    series(&mut out, &pick(learned, |r| r.unseen), &axes, UNSEEN, false, false);
    series(&mut out, &pick(learned, |r| r.all), &axes, ALL, false, false);

    let mut legend =
        vec![("seen tasks", SEEN), ("unseen tasks", UNSEEN), ("all tasks", ALL), ("demonstrations", DEMOS)];
    if baseline.is_some() {
        legend.push(("baseline", BASELINE));
    }
    for (i, (label, color)) in legend.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * i as f64;
        let x = LEFT + 10.0;
        let _ =
            writeln!(out, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="3"/>"#, x + 18.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{label}</text>"#, x + 24.0, y + 4.0);
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
