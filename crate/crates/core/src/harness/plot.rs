//! Learning-curve SVG: one mean polyline and one ±1 std band per series.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Per-episode mean and standard deviation of one curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders the curves. The y axis spans `[0, max(1, top of any band)]`.
pub fn render_svg(series: &[Series], y_label: &str) -> String {
    let episodes = series.iter().map(|s| s.mean.len()).max().unwrap_or(0).max(1);
    let y_max = series
        .iter()
        .flat_map(|s| s.mean.iter().zip(&s.std).map(|(m, d)| m + d))
        .fold(1.0_f64, f64::max);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |i: usize| LEFT + plot_w * i as f64 / (episodes.saturating_sub(1)).max(1) as f64;
    let y = |v: f64| TOP + plot_h * (1.0 - v.clamp(0.0, y_max) / y_max);

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="gray"/>"#
    )
    .unwrap();
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{v:.2}</text>"#,
            fmt(LEFT - 6.0),
            fmt(y(v) + 4.0)
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">episode</text>"#,
        fmt(LEFT + plot_w / 2.0),
        fmt(HEIGHT - 12.0)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{LEFT}" y="{}" text-anchor="start">0</text><text x="{}" y="{}" text-anchor="end">{}</text>"#,
        fmt(TOP + plot_h + 16.0),
        fmt(LEFT + plot_w),
        fmt(TOP + plot_h + 16.0),
        episodes
    )
    .unwrap();
    writeln!(
        out,
        r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        fmt(TOP + plot_h / 2.0),
        escape(y_label)
    )
    .unwrap();

    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let n = s.mean.len();
        let mut band = Vec::with_capacity(2 * n);
        for i in 0..n {
            band.push(format!("{},{}", fmt(x(i)), fmt(y(s.mean[i] + s.std[i]))));
        }
        for i in (0..n).rev() {
            band.push(format!("{},{}", fmt(x(i)), fmt(y(s.mean[i] - s.std[i]))));
        }
        writeln!(
            out,
            r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        )
        .unwrap();
        let line: Vec<String> = (0..n).map(|i| format!("{},{}", fmt(x(i)), fmt(y(s.mean[i])))).collect();
        writeln!(
            out,
            r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        )
        .unwrap();
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 12.0;
        writeln!(
            out,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            fmt(lx),
            fmt(ly),
            fmt(lx + 20.0),
            fmt(ly),
            fmt(lx + 26.0),
            fmt(ly + 4.0),
            escape(&s.label)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_points(svg: &str, class: &str) -> Vec<usize> {
        svg.lines()
            .filter(|l| l.contains(&format!("class=\"{class}\"")))
            .map(|l| {
                let start = l.find("points=\"").unwrap() + 8;
                let end = start + l[start..].find('"').unwrap();
                l[start..end].split_whitespace().count()
            })
            .collect()
    }

    #[test]
    fn bands_have_two_vertices_per_episode() {
        let s = |label: &str| Series {
            label: label.into(),
            mean: (0..1000).map(|i| i as f64 / 1000.0).collect(),
            std: vec![0.1; 1000],
        };
        let svg = render_svg(&[s("a"), s("b<c")], "value");
        assert_eq!(count_points(&svg, "band"), vec![2000, 2000]);
        assert_eq!(count_points(&svg, "mean"), vec![1000, 1000]);
        assert!(svg.contains("b&lt;c"));
    }

    #[test]
    fn single_episode_does_not_divide_by_zero() {
        let svg = render_svg(
            &[Series {
                label: "x".into(),
                mean: vec![0.5],
                std: vec![0.0],
            }],
            "value",
        );
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
