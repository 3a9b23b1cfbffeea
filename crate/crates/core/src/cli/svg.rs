//! Standalone SVG scatter plots with least-squares trend lines.

use std::fmt::Write;

use crate::evalstats::RegressionResult;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

#[derive(Debug, Clone)]
pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    /// `(item_id, x, y)`.
    pub points: Vec<(&'a str, f64, f64)>,
    pub fit: Option<RegressionResult>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Scatter of QWK against `feature` with one trend line per fitted series.
pub fn scatter_plot(title: &str, feature: &str, series: &[Series<'_>]) -> String {
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let (y0, y1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.2)));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{xv:.2}</text>"#,
            sx(xv),
            TOP + ph + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{yv:.2}</text>"#,
            LEFT - 6.0,
            sy(yv) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text class="axis-label x" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 16.0,
        escape(feature)
    );
    let _ = writeln!(
        out,
        r#"<text class="axis-label y" x="18" y="{:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {:.2})">QWK</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        for (id, x, y) in &s.points {
            let _ = writeln!(
                out,
                r#"<circle class="point {}" data-item="{}" data-x="{x}" data-y="{y}" cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"#,
                escape(s.name),
                escape(id),
                sx(*x),
                sy(*y),
                s.color
            );
        }
        if let Some(fit) = &s.fit {
            let ya = fit.slope * x0 + fit.intercept;
            let yb = fit.slope * x1 + fit.intercept;
            let _ = writeln!(
                out,
                r#"<line class="trend {}" data-slope="{}" data-intercept="{}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/>"#,
                escape(s.name),
                fit.slope,
                fit.intercept,
                sx(x0),
                sy(ya),
                sx(x1),
                sy(yb),
                s.color
            );
        }
        let ly = TOP + 20.0 + 22.0 * i as f64;
        let lx = WIDTH - RIGHT + 16.0;
        let _ = writeln!(out, r#"<circle cx="{lx}" cy="{ly}" r="4" fill="{}"/>"#, s.color);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
            lx + 10.0,
            ly + 4.0,
            escape(s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalstats::simple_regression;

    fn attr(line: &str, name: &str) -> f64 {
        let key = format!("{name}=\"");
        let start = line.find(&key).unwrap() + key.len();
        let end = line[start..].find('"').unwrap();
        line[start..start + end].parse().unwrap()
    }

    #[test]
    fn points_and_trend_lines() {
        let xs = [10.0, 14.0, 20.0, 25.0];
        let ys = [0.8, 0.7, 0.66, 0.5];
        let fit = simple_regression(&xs, &ys).unwrap();
        let pts: Vec<(&str, f64, f64)> = ["a", "b", "c", "d"].iter().zip(xs.iter().zip(ys)).map(|(id, (x, y))| (*id, *x, y)).collect();
        let svg = scatter_plot(
            "t",
            "avg_response_length",
            &[
                Series { name: "baseline", color: "#c33", points: pts.clone(), fit: Some(fit) },
                Series { name: "adapted", color: "#36c", points: pts, fit: None },
            ],
        );
        assert!(svg.starts_with("<svg") && svg.contains(r#"viewBox="0 0 800 500""#));
        assert_eq!(svg.matches("<circle class=\"point baseline\"").count(), 4);
        let trend: Vec<&str> = svg.lines().filter(|l| l.contains("class=\"trend")).collect();
        assert_eq!(trend.len(), 1);
        assert!((attr(trend[0], "data-slope") - fit.slope).abs() < 1e-12);
        assert!((attr(trend[0], "data-intercept") - fit.intercept).abs() < 1e-12);
        assert!(svg.contains(">avg_response_length</text>") && svg.contains(">QWK</text>"));
    }

    #[test]
    fn degenerate_ranges() {
        let svg = scatter_plot("t", "f", &[Series { name: "x", color: "red", points: vec![("a", 1.0, 1.0)], fit: None }]);
        assert!(!svg.contains("NaN"));
        assert!(scatter_plot("t", "f", &[]).contains("</svg>"));
    }
}
