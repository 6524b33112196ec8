//! Minimal SVG emitters for evaluation plots.

use std::fmt::Write;

const SIZE: f64 = 420.0;
const PAD: f64 = 50.0;

struct Frame {
    lo: (f64, f64),
    hi: (f64, f64),
}

impl Frame {
    fn fit(xs: &[f64], ys: &[f64]) -> Self {
        let range = |v: &[f64]| {
            let (lo, hi) =
                v.iter().filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (x0, x1) = range(xs);
        let (y0, y1) = range(ys);
        Frame { lo: (x0, y0), hi: (x1, y1) }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let w = SIZE - 2.0 * PAD;
        let u = PAD + w * (x - self.lo.0) / (self.hi.0 - self.lo.0);
        let v = SIZE - PAD - w * (y - self.lo.1) / (self.hi.1 - self.lo.1);
        (u, v)
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let _ = write!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">
<rect width="100%" height="100%" fill="white"/>
<text x="{cx}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>
<rect x="{PAD}" y="{PAD}" width="{w}" height="{w}" fill="none" stroke="black"/>
<text x="{cx}" y="{xl}" text-anchor="middle" font-family="sans-serif" font-size="12">{xlabel}</text>
<text x="14" y="{cx}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {cx})">{ylabel}</text>
<text x="{PAD}" y="{tl}" font-family="sans-serif" font-size="10">{x0:.4}</text>
<text x="{xr}" y="{tl}" text-anchor="end" font-family="sans-serif" font-size="10">{x1:.4}</text>
<text x="{yl}" y="{yb}" text-anchor="end" font-family="sans-serif" font-size="10">{y0:.4}</text>
<text x="{yl}" y="{yt}" text-anchor="end" font-family="sans-serif" font-size="10">{y1:.4}</text>
"#,
            cx = SIZE / 2.0,
            w = SIZE - 2.0 * PAD,
            xl = SIZE - 12.0,
            tl = SIZE - PAD + 14.0,
            xr = SIZE - PAD,
            yl = PAD - 4.0,
            yb = SIZE - PAD,
            yt = PAD + 10.0,
            x0 = self.lo.0,
            x1 = self.hi.0,
            y0 = self.lo.1,
            y1 = self.hi.1,
            title = escape(title),
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Predicted against measured, with the identity line.
pub fn scatter(title: &str, points: &[(f64, f64)]) -> String {
    let all: Vec<f64> = points.iter().flat_map(|&(a, b)| [a, b]).collect();
    let range = Frame::fit(&all, &all);
    let mut out = String::new();
    range.axes(&mut out, title, "measured", "predicted");
    let (a, b) = (range.px(range.lo.0, range.lo.1), range.px(range.hi.0, range.hi.1));
    let _ = writeln!(out, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4"/>"#, a.0, a.1, b.0, b.1);
    for &(m, p) in points {
        if m.is_finite() && p.is_finite() {
            let (u, v) = range.px(m, p);
            let _ = writeln!(out, r#"<circle cx="{u:.2}" cy="{v:.2}" r="2" fill="steelblue" fill-opacity="0.6"/>"#);
        }
    }
    out.push_str("</svg>\n");
    out
}

fn polyline(frame: &Frame, xs: &[f64], ys: &[f64], colour: &str, dash: &str) -> String {
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(&x, &y)| {
            let (u, v) = frame.px(x, y);
            format!("{u:.2},{v:.2}")
        })
        .collect();
    format!(r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-dasharray="{dash}"/>"#, pts.join(" ")) + "\n"
}

/// Measured and predicted curves over a shared axis.
pub fn overlay(title: &str, xlabel: &str, xs: &[f64], measured: &[f64], predicted: &[f64]) -> String {
    let ys: Vec<f64> = measured.iter().chain(predicted).copied().collect();
    let frame = Frame::fit(xs, &ys);
    let mut out = String::new();
    frame.axes(&mut out, title, xlabel, "value");
    out.push_str(&polyline(&frame, xs, measured, "black", "0"));
    out.push_str(&polyline(&frame, xs, predicted, "crimson", "5,3"));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_has_one_circle_per_finite_point() {
        let s = scatter("a<b", &[(1.0, 1.1), (2.0, 1.9), (f64::NAN, 1.0)]);
        assert_eq!(s.matches("<circle").count(), 2);
        assert!(s.contains("a&lt;b"));
        assert!(s.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn overlay_draws_two_lines() {
        let xs = [0.0, 1.0, 2.0];
        let s = overlay("q", "V", &xs, &[1.0, 2.0, 3.0], &[1.0, 2.1, 2.9]);
        assert_eq!(s.matches("<polyline").count(), 2);
    }
}
