//! Minimal deterministic SVG charts.

use std::fmt::Write;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(height: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" \
         viewBox=\"0 0 {WIDTH} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn polyline(xs: &[f64], ys: &[f64], color: &str) -> String {
    let mut pts = String::new();
    for (x, y) in xs.iter().zip(ys) {
        let _ = write!(pts, "{x:.2},{y:.2} ");
    }
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>\n",
        pts.trim_end()
    )
}

/// Actual and predicted values on shared axes.
pub fn overlay_svg(title: &str, actual: &[f64], predicted: &[f64]) -> String {
    let n = actual.len().min(predicted.len());
    let mut svg = header(HEIGHT, title);
    if n == 0 {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (lo, hi) = actual[..n]
        .iter()
        .chain(&predicted[..n])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let xs: Vec<f64> = (0..n)
        .map(|i| MARGIN + if n > 1 { plot_w * i as f64 / (n - 1) as f64 } else { plot_w / 2.0 })
        .collect();
    let y = |v: f64| HEIGHT - MARGIN - plot_h * (v - lo) / span;
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"#999\"/>"
    );
    let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{hi:.3}</text>", MARGIN - 4.0, MARGIN + 4.0);
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{lo:.3}</text>",
        MARGIN - 4.0,
        HEIGHT - MARGIN
    );
    let ya: Vec<f64> = actual[..n].iter().map(|&v| y(v)).collect();
    let yp: Vec<f64> = predicted[..n].iter().map(|&v| y(v)).collect();
    svg.push_str(&polyline(&xs, &ya, "#1f4e9c"));
    svg.push_str(&polyline(&xs, &yp, "#d9541e"));
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" fill=\"#1f4e9c\">actual</text>\n<text x=\"{}\" y=\"{}\" fill=\"#d9541e\">predicted</text>",
        MARGIN,
        HEIGHT - 15.0,
        MARGIN + 70.0,
        HEIGHT - 15.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Horizontal bars of per-channel percent shares, largest first.
pub fn importance_svg(title: &str, names: &[String], percent: &[f64]) -> String {
    let mut order: Vec<usize> = (0..names.len().min(percent.len())).collect();
    order.sort_by(|&a, &b| percent[b].total_cmp(&percent[a]).then(a.cmp(&b)));
    let bar_h = 24.0;
    let height = 2.0 * MARGIN + bar_h * order.len() as f64;
    let mut svg = header(height, title);
    let label_w = 90.0;
    let plot_w = WIDTH - 2.0 * MARGIN - label_w - 60.0;
    for (row, &k) in order.iter().enumerate() {
        let top = MARGIN + bar_h * row as f64;
        let w = plot_w * (percent[k] / 100.0).clamp(0.0, 1.0);
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n\
             <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{w:.2}\" height=\"{:.2}\" fill=\"#3b7dd8\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\">{:.2}%</text>",
            MARGIN + label_w - 6.0,
            top + bar_h * 0.65,
            escape(&names[k]),
            MARGIN + label_w,
            top + 3.0,
            bar_h - 6.0,
            MARGIN + label_w + w + 6.0,
            top + bar_h * 0.65,
            percent[k]
        );
    }
    svg.push_str("</svg>\n");
    svg
}
