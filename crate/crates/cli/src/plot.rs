//! Minimal log-log line charts as SVG.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Chart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub series: Vec<Series>,
    /// Slope of a reference line drawn through the centroid of the first
    /// series in log coordinates.
    pub reference_slope: Option<f64>,
}

fn usable(p: &(f64, f64)) -> bool {
    p.0 > 0.0 && p.1 > 0.0 && p.0.is_finite() && p.1.is_finite()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart<'_> {
    pub fn render(&self) -> String {
        let logs: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .filter(|p| usable(p))
                    .map(|p| (p.0.log10(), p.1.log10()))
                    .collect()
            })
            .collect();
        let all: Vec<(f64, f64)> = logs.iter().flatten().copied().collect();
        let reference = self.reference_slope.and_then(|slope| {
            let first = logs.iter().find(|l| l.len() >= 2)?;
            let m = first.len() as f64;
            let cx = first.iter().map(|p| p.0).sum::<f64>() / m;
            let cy = first.iter().map(|p| p.1).sum::<f64>() / m;
            let (x0, x1) = first
                .iter()
                .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
            Some([(x0, cy + slope * (x0 - cx)), (x1, cy + slope * (x1 - cx))])
        });
        let mut bounds = all.clone();
        if let Some(r) = reference {
            bounds.extend_from_slice(&r);
        }
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in &bounds {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        if bounds.is_empty() {
            (xmin, xmax, ymin, ymax) = (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| {
            let span = (hi - lo).max(0.1);
            (lo - 0.05 * span, hi + 0.05 * span)
        };
        let (xmin, xmax) = pad(xmin, xmax);
        let (ymin, ymax) = pad(ymin, ymax);
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - xmin) / (xmax - xmin) * pw;
        let sy = |y: f64| TOP + (ymax - y) / (ymax - ymin) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for (lo, hi, horizontal) in [(xmin, xmax, true), (ymin, ymax, false)] {
            for t in ticks(lo, hi) {
                let label = format!("{:.3}", 10f64.powf(t))
                    .trim_end_matches('0')
                    .trim_end_matches('.')
                    .to_string();
                let label = if label.is_empty() || label == "0" {
                    format!("{:.1e}", 10f64.powf(t))
                } else {
                    label
                };
                if horizontal {
                    let x = sx(t);
                    let _ = writeln!(
                        s,
                        r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#,
                        TOP + ph,
                        TOP + ph + 5.0
                    );
                    let _ = writeln!(
                        s,
                        r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
                        TOP + ph + 18.0
                    );
                } else {
                    let y = sy(t);
                    let _ = writeln!(
                        s,
                        r#"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT}" y2="{y:.1}" stroke="black"/>"#,
                        LEFT - 5.0
                    );
                    let _ = writeln!(
                        s,
                        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#,
                        LEFT - 8.0,
                        y + 4.0
                    );
                }
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 15.0,
            escape(self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(self.y_label)
        );

        let mut legend = Vec::new();
        for (i, (series, pts)) in self.series.iter().zip(&logs).enumerate() {
            let color = COLORS[i % COLORS.len()];
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
            if pts.len() > 1 {
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                    path.join(" ")
                );
            }
            for &(x, y) in pts {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                    sx(x),
                    sy(y)
                );
            }
            legend.push((series.label.clone(), color, false));
        }
        if let (Some([a, b]), Some(slope)) = (reference, self.reference_slope) {
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="6 4" stroke-width="1.5"/>"#,
                sx(a.0),
                sy(a.1),
                sx(b.0),
                sy(b.1)
            );
            legend.push((format!("slope {slope:.3}"), "gray", true));
        }
        for (i, (label, color, dashed)) in legend.iter().enumerate() {
            let y = TOP + 12.0 + 20.0 * i as f64;
            let x = W - RIGHT + 15.0;
            let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/>"#,
                x + 25.0
            );
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 32.0, y + 4.0, escape(label));
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Tick positions in log10 units: integer decades when the range spans at
/// least one, otherwise five evenly spaced values.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let first = lo.ceil() as i64;
    let last = hi.floor() as i64;
    if last > first {
        (first..=last).map(|t| t as f64).collect()
    } else {
        (0..5).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / 5.0).collect()
    }
}
