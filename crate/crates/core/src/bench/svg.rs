//! Minimal static SVG charts for sweep results.

use std::fmt::Write;

use super::{SweepKind, SweepResult};

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, x_label: &str, y_label: &str, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) {
    let (l, r, t, b) = (MARGIN, W - MARGIN / 2.0, MARGIN / 1.5, H - MARGIN);
    let _ = write!(out, r#"<path d="M{l} {t} V{b} H{r}" stroke="black" fill="none"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let x = l + f * (r - l);
        let y = b - f * (b - t);
        let _ = write!(out, r#"<text x="{x}" y="{}" text-anchor="middle">{:.3}</text>"#, b + 16.0, x0 + f * (x1 - x0));
        let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, l - 6.0, y + 4.0, y0 + f * (y1 - y0));
    }
    let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, H - 16.0, escape(x_label));
    let _ = write!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(y_label)
    );
}

/// Overlaid line chart of `p̂` against the sweep coordinate.
pub fn line_chart(title: &str, results: &[&SweepResult]) -> String {
    let xs = span(results.iter().flat_map(|r| r.points.iter().map(|p| p.coords[0])));
    let ys = span(results.iter().flat_map(|r| r.points.iter().map(|p| p.estimate.p_hat)));
    let (l, r, t, b) = (MARGIN, W - MARGIN / 2.0, MARGIN / 1.5, H - MARGIN);
    let px = |x: f64| l + (x - xs.0) / (xs.1 - xs.0) * (r - l);
    let py = |y: f64| b - (y - ys.0) / (ys.1 - ys.0) * (b - t);
    let mut out = String::new();
    header(&mut out, title);
    let x_label = results.first().map_or("x", |r| r.axes[0].as_str());
    axes(&mut out, x_label, "population", xs, ys);
    for (k, res) in results.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = res
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| format!("{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, px(p.coords[0]), py(p.estimate.p_hat)))
            .collect();
        let _ = write!(out, r#"<path d="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, path.join(" "));
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            r - 110.0,
            t + 16.0 * (k as f64 + 1.0),
            escape(&res.meta.method)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Heatmap of `log10(1 − p̂)` over a hybrid grid.
pub fn heatmap(title: &str, res: &SweepResult) -> String {
    debug_assert_eq!(res.kind, SweepKind::Hybrid);
    let mut xs: Vec<f64> = res.points.iter().map(|p| p.coords[0]).collect();
    let mut ys: Vec<f64> = res.points.iter().map(|p| p.coords[1]).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let zs = span(res.points.iter().map(|p| p.log_infidelity));
    let (l, r, t, b) = (MARGIN, W - MARGIN / 2.0, MARGIN / 1.5, H - MARGIN);
    let cw = (r - l) / xs.len() as f64;
    let ch = (b - t) / ys.len() as f64;
    let mut out = String::new();
    header(&mut out, title);
    for p in &res.points {
        let i = xs.iter().position(|&x| x == p.coords[0]).unwrap_or(0);
        let j = ys.iter().position(|&y| y == p.coords[1]).unwrap_or(0);
        let f = (p.log_infidelity - zs.0) / (zs.1 - zs.0);
        // Dark blue for low infidelity, yellow for high.
        let (cr, cg, cb) = ((40.0 + 215.0 * f) as u8, (40.0 + 180.0 * f) as u8, (120.0 - 100.0 * f) as u8);
        let _ = write!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({cr},{cg},{cb})"/>"#,
            l + i as f64 * cw,
            b - (j + 1) as f64 * ch,
            cw + 0.5,
            ch + 0.5
        );
    }
    let x_range = (xs[0], xs[xs.len() - 1]);
    let y_range = (ys[0], ys[ys.len() - 1]);
    axes(&mut out, &res.axes[0], &res.axes[1], x_range, y_range);
    let _ = write!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">log10 infidelity {:.2} .. {:.2}</text>"#,
        r,
        MARGIN / 1.5 - 6.0,
        zs.0,
        zs.1
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    #[test]
    fn charts_are_well_formed() {
        let setup = BenchSetup::new(EnvConfig::default());
        let det = DetectorModel::ideal();
        let line = sweep_1d(&Method::PiPulse, ErrorAxis::Rabi, &[-0.1, 0.0, 0.1], None, &det, None, 0, &setup).unwrap();
        let svg = line_chart("pi <rabi>", &[&line]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("pi &lt;rabi&gt;"));
        let maps = sweep_hybrid(&[Method::PiPulse], &[-0.1, 0.1], &[-0.1, 0.0, 0.1], None, &det, 0, &setup).unwrap();
        let svg = heatmap("hybrid", &maps[0]);
        assert_eq!(svg.matches("<rect").count(), 1 + 6);
    }
}
