//! Minimal SVG output: histogram bars with an optional overlay curve, and a
//! complex-plane scatter. Figures are for eyeballing; the CSV is the
//! contract.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 50.0;

fn header(meta: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n<!--\n{meta}\n-->\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    )
}

fn axis_box() -> String {
    format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    )
}

/// Histogram of `values` on `[0, x_max]`, normalised as a density, with an
/// optional overlay polyline `(x, density)`.
pub fn histogram_svg(
    title: &str,
    values: &[f64],
    bins: usize,
    x_max: f64,
    overlay: Option<&[(f64, f64)]>,
    meta: &str,
) -> String {
    let mut counts = vec![0usize; bins];
    for &v in values {
        if v >= 0.0 && v < x_max {
            counts[(v / x_max * bins as f64) as usize] += 1;
        }
    }
    let bin_width = x_max / bins as f64;
    let densities: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / (values.len().max(1) as f64 * bin_width))
        .collect();
    let mut y_max = densities.iter().cloned().fold(0.0f64, f64::max);
    if let Some(curve) = overlay {
        y_max = curve.iter().map(|&(_, y)| y).fold(y_max, f64::max);
    }
    let y_max = (y_max * 1.1).max(1e-12);

    let plot_w = W - 2.0 * MARGIN;
    let plot_h = H - 2.0 * MARGIN;
    let to_x = |x: f64| MARGIN + x / x_max * plot_w;
    let to_y = |y: f64| H - MARGIN - y / y_max * plot_h;

    let mut svg = header(meta);
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"30\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"14\">{title}</text>\n",
        W / 2.0
    );
    svg.push_str(&axis_box());
    for (i, &dens) in densities.iter().enumerate() {
        if dens == 0.0 {
            continue;
        }
        let x0 = to_x(i as f64 * bin_width);
        let y0 = to_y(dens);
        let _ = write!(
            svg,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#7aa6c2\" stroke=\"#33577a\" stroke-width=\"0.5\"/>\n",
            x0,
            y0,
            plot_w / bins as f64,
            H - MARGIN - y0
        );
    }
    if let Some(curve) = overlay {
        let pts: Vec<String> = curve
            .iter()
            .filter(|&&(x, _)| x >= 0.0 && x <= x_max)
            .map(|&(x, y)| format!("{:.2},{:.2}", to_x(x), to_y(y)))
            .collect();
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#c23b22\" stroke-width=\"2\"/>\n",
            pts.join(" ")
        );
    }
    // x-axis tick labels
    for i in 0..=4 {
        let x = x_max * i as f64 / 4.0;
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">{:.2}</text>\n",
            to_x(x),
            H - MARGIN + 18.0,
            x
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Scatter of complex points in a square window `[-range, range]^2`;
/// `highlight` points are drawn larger and black (the unit outlier).
pub fn scatter_svg(
    title: &str,
    points: &[(f64, f64)],
    highlight: &[(f64, f64)],
    range: f64,
    meta: &str,
) -> String {
    let plot = (W.min(H)) - 2.0 * MARGIN;
    let cx = W / 2.0;
    let cy = H / 2.0;
    let to_x = |re: f64| cx + re / range * plot / 2.0;
    let to_y = |im: f64| cy - im / range * plot / 2.0;

    let mut svg = header(meta);
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"30\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"14\">{title}</text>\n",
        W / 2.0
    );
    // axes through the origin
    let _ = write!(
        svg,
        "<line x1=\"{}\" y1=\"{cy}\" x2=\"{}\" y2=\"{cy}\" stroke=\"#999\"/>\n<line x1=\"{cx}\" y1=\"{}\" x2=\"{cx}\" y2=\"{}\" stroke=\"#999\"/>\n",
        cx - plot / 2.0,
        cx + plot / 2.0,
        cy - plot / 2.0,
        cy + plot / 2.0
    );
    for &(re, im) in points {
        if re.abs() <= range && im.abs() <= range {
            let _ = write!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\" fill=\"#33577a\" fill-opacity=\"0.6\"/>\n",
                to_x(re),
                to_y(im)
            );
        }
    }
    for &(re, im) in highlight {
        let _ = write!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"5\" fill=\"black\"/>\n",
            to_x(re.clamp(-range, range)),
            to_y(im.clamp(-range, range))
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">[-{range:.2}, {range:.2}]</text>\n",
        MARGIN,
        H - MARGIN + 18.0
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_is_wellformed_svg() {
        let values: Vec<f64> = (0..100).map(|i| i as f64 / 50.0).collect();
        let overlay: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 / 10.0, 0.5)).collect();
        let svg = histogram_svg("test", &values, 10, 2.0, Some(&overlay), "meta line");
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("meta line"));
    }

    #[test]
    fn scatter_marks_highlights() {
        let pts = vec![(0.1, 0.2), (-0.3, 0.05)];
        let svg = scatter_svg("eig", &pts, &[(1.0, 0.0)], 1.2, "m");
        assert!(svg.matches("<circle").count() == 3);
        assert!(svg.contains("fill=\"black\""));
    }
}
