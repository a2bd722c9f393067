//! Hand-written SVG of the empirical tail of `sup − mean` against the
//! residual envelope, log-scaled in probability.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 400;

pub struct TailPlot<'a> {
    pub title: &'a str,
    /// `sup − mean` for every successful trial.
    pub deviations: &'a [f64],
    /// `(residual(δ), δ)` along the envelope, δ decreasing.
    pub envelope: &'a [(f64, f64)],
    /// Tested `(threshold, δ)` pairs.
    pub marks: &'a [(f64, f64)],
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(plot: &TailPlot) -> String {
    let m = plot.deviations.len().max(1);
    let mut dev: Vec<f64> = plot.deviations.iter().copied().filter(|v| v.is_finite()).collect();
    dev.sort_by(|a, b| b.total_cmp(a));
    // Complementary CDF: the k-th largest deviation is exceeded with probability (k+1)/m.
    let mut ccdf: Vec<(f64, f64)> = dev
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(k, &v)| (v, (k + 1) as f64 / m as f64))
        .collect();
    if ccdf.len() > MAX_POINTS {
        let stride = ccdf.len().div_ceil(MAX_POINTS);
        let last = *ccdf.last().unwrap();
        ccdf = ccdf.into_iter().step_by(stride).collect();
        ccdf.push(last);
    }
    let envelope: Vec<(f64, f64)> =
        plot.envelope.iter().copied().filter(|(r, d)| r.is_finite() && *d > 0.0).collect();

    let x_max = ccdf
        .iter()
        .chain(&envelope)
        .chain(plot.marks)
        .map(|p| p.0)
        .filter(|v| v.is_finite())
        .fold(1e-6f64, f64::max)
        * 1.05;
    let y_min = (1.0 / m as f64).min(envelope.iter().map(|p| p.1).fold(1.0, f64::min)).max(1e-12);
    let ly_min = y_min.log10().floor();
    let px = |x: f64| LEFT + (x / x_max).clamp(0.0, 1.0) * (W - LEFT - RIGHT);
    let py = |y: f64| {
        let t = (y.max(y_min).log10() - ly_min) / (0.0 - ly_min);
        H - BOTTOM - t.clamp(0.0, 1.0) * (H - TOP - BOTTOM)
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" font-size="13">{}</text>"#, fmt(LEFT), escape(plot.title));
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        s,
        r#"<path d="M{} {} L{} {} L{} {}" fill="none" stroke="black"/>"#,
        fmt(x0),
        fmt(y0),
        fmt(x0),
        fmt(y1),
        fmt(x1),
        fmt(y1)
    );
    let mut e = ly_min as i32;
    while e <= 0 {
        let y = py(10f64.powi(e));
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">1e{}</text>"##,
            fmt(x0),
            fmt(y),
            fmt(x1),
            fmt(y),
            fmt(x0 - 6.0),
            fmt(y + 4.0),
            e
        );
        e += 1;
    }
    for i in 0..=5 {
        let v = x_max * i as f64 / 5.0;
        let x = px(v);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/><text x="{}" y="{}" text-anchor="middle">{:.3}</text>"#,
            fmt(x),
            fmt(y1),
            fmt(x),
            fmt(y1 + 5.0),
            fmt(x),
            fmt(y1 + 18.0),
            v
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">t</text><text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">P(sup − mean ≥ t)</text>"#,
        fmt((x0 + x1) / 2.0),
        fmt(H - 12.0),
        fmt((y0 + y1) / 2.0),
        fmt((y0 + y1) / 2.0)
    );

    let polyline = |pts: &[(f64, f64)], color: &str, extra: &str| -> String {
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{},{}", fmt(px(x)), fmt(py(y)))).collect();
        format!(r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{extra}/>"#, coords.join(" "))
    };
    if !ccdf.is_empty() {
        let _ = writeln!(s, "{}", polyline(&ccdf, "#1f77b4", ""));
    }
    if !envelope.is_empty() {
        let _ = writeln!(s, "{}", polyline(&envelope, "#d62728", r#" stroke-dasharray="5,3""#));
    }
    for &(x, y) in plot.marks {
        if x.is_finite() {
            let _ = writeln!(
                s,
                r##"<circle cx="{}" cy="{}" r="3" fill="#d62728"/>"##,
                fmt(px(x)),
                fmt(py(y))
            );
        }
    }
    let lx = x1 - 170.0;
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="42" x2="{}" y2="42" stroke="#1f77b4" stroke-width="1.5"/><text x="{}" y="46">empirical tail</text>"##,
        fmt(lx),
        fmt(lx + 24.0),
        fmt(lx + 30.0)
    );
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="58" x2="{}" y2="58" stroke="#d62728" stroke-width="1.5" stroke-dasharray="5,3"/><text x="{}" y="62">residual(δ) envelope</text>"##,
        fmt(lx),
        fmt(lx + 24.0),
        fmt(lx + 30.0)
    );
    s.push_str("</svg>\n");
    s
}
