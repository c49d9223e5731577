//! Minimal SVG line and strip plots.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

impl Scale {
    fn map(self, v: f64) -> Option<f64> {
        match self {
            Scale::Linear => v.is_finite().then_some(v),
            Scale::Log => (v > 0.0 && v.is_finite()).then(|| v.log10()),
        }
    }
}

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    /// Draw markers instead of a polyline.
    pub markers: bool,
}

pub struct LinePlot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<Series<'a>>,
    /// Optional horizontal reference line.
    pub reference: Option<(f64, &'a str)>,
}

fn header(out: &mut String, title: &str, timestamp: Option<u64>) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    if let Some(t) = timestamp {
        let _ = writeln!(out, "<metadata>generated_unix={t}</metadata>");
    }
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 * hi.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick_label(v: f64, scale: Scale) -> String {
    match scale {
        Scale::Linear => format!("{v:.3}"),
        Scale::Log => format!("1e{v:.1}"),
    }
}

impl LinePlot<'_> {
    pub fn render(&self, timestamp: Option<u64>) -> String {
        let mapped: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .filter_map(|&(x, y)| Some((self.x_scale.map(x)?, self.y_scale.map(y)?)))
                    .collect()
            })
            .collect();
        let reference = self.reference.and_then(|(v, l)| Some((self.y_scale.map(v)?, l)));
        let (x0, x1) = span(mapped.iter().flatten().map(|p| p.0));
        let (y0, y1) = span(mapped.iter().flatten().map(|p| p.1).chain(reference.map(|r| r.0)));
        let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

        let mut out = String::new();
        header(&mut out, self.title, timestamp);
        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="#444444"/>"##,
            WIDTH - 2.0 * MARGIN,
            HEIGHT - 2.0 * MARGIN
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
                px(fx),
                HEIGHT - MARGIN + 14.0,
                tick_label(fx, self.x_scale)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
                MARGIN - 4.0,
                py(fy) + 3.0,
                tick_label(fy, self.y_scale)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 16.0,
            escape(self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(self.y_label)
        );
        if let Some((v, label)) = reference {
            let _ = writeln!(
                out,
                r##"<line x1="{MARGIN}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#888888" stroke-dasharray="6 4"/>"##,
                WIDTH - MARGIN,
                py(v),
                py(v)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
                WIDTH - MARGIN - 4.0,
                py(v) - 4.0,
                escape(label)
            );
        }
        for (i, (series, pts)) in self.series.iter().zip(&mapped).enumerate() {
            let color = COLORS[i % COLORS.len()];
            if series.markers {
                for &(x, y) in pts {
                    let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, px(x), py(y));
                }
            } else if !pts.is_empty() {
                let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    path.join(" ")
                );
            }
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
                MARGIN + 8.0,
                MARGIN + 16.0 + 14.0 * i as f64,
                escape(series.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// One colored cell per amplitude.
pub fn verdict_strip(title: &str, cells: &[(f64, &str)], timestamp: Option<u64>) -> String {
    let mut out = String::new();
    header(&mut out, title, timestamp);
    let n = cells.len().max(1) as f64;
    let w = (WIDTH - 2.0 * MARGIN) / n;
    for (i, (amp, verdict)) in cells.iter().enumerate() {
        let color = match *verdict {
            "CONVERGED" => "#2ca02c",
            "DIVERGED" => "#d62728",
            _ => "#bbbbbb",
        };
        let x = MARGIN + w * i as f64;
        let _ = writeln!(
            out,
            r##"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="80" fill="{color}" stroke="#ffffff"/>"##,
            HEIGHT / 2.0 - 40.0,
            w
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="middle">{amp:.4}</text>"#,
            x + w / 2.0,
            HEIGHT / 2.0 + 56.0
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamp_only_when_requested() {
        let plot = LinePlot {
            title: "norm",
            x_label: "t",
            y_label: "|s|",
            x_scale: Scale::Linear,
            y_scale: Scale::Log,
            series: vec![Series {
                label: "a",
                points: vec![(0.0, 1.0), (1.0, 0.1), (2.0, 0.0)],
                markers: false,
            }],
            reference: Some((0.5, "ref")),
        };
        let plain = plot.render(None);
        assert!(plain.starts_with("<svg"));
        assert!(!plain.contains("generated_unix"));
        assert!(plot.render(Some(7)).contains("generated_unix=7"));
        assert_eq!(plain, plot.render(None));
    }

    #[test]
    fn strip_has_one_cell_per_point() {
        let svg = verdict_strip("basin", &[(0.1, "CONVERGED"), (0.2, "DIVERGED")], None);
        assert_eq!(svg.matches("<rect").count(), 3);
    }
}
