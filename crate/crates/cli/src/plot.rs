//! Minimal SVG line charts.

use std::fmt::Write;

const W: f64 = 900.0;
const H: f64 = 360.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 46.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf"];

pub struct Chart<'a> {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// x of the first sample; samples are one unit apart.
    pub x0: f64,
    pub series: Vec<(String, &'a [f64])>,
    /// Vertical markers at these x positions.
    pub vlines: Vec<f64>,
    pub hlines: Vec<(String, f64)>,
}

impl<'a> Chart<'a> {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x0: 1.0,
            series: Vec::new(),
            vlines: Vec::new(),
            hlines: Vec::new(),
        }
    }

    pub fn line(mut self, name: impl Into<String>, y: &'a [f64]) -> Self {
        self.series.push((name.into(), y));
        self
    }

    pub fn render(&self) -> String {
        let n = self.series.iter().map(|(_, y)| y.len()).max().unwrap_or(0).max(2);
        let (xmin, xmax) = (self.x0, self.x0 + (n - 1) as f64);
        let finite = self.series.iter().flat_map(|(_, y)| y.iter()).chain(self.hlines.iter().map(|(_, v)| v));
        let (mut ymin, mut ymax) = finite
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !ymin.is_finite() {
            (ymin, ymax) = (0.0, 1.0);
        }
        if ymax - ymin < 1e-12 {
            ymin -= 0.5;
            ymax += 0.5;
        }
        let pad = 0.05 * (ymax - ymin);
        ymin -= pad;
        ymax += pad;

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
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(&self.title));

        for v in ticks(ymin, ymax) {
            let y = sy(v);
            let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##, W - RIGHT);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, label(v));
        }
        for v in ticks(xmin, xmax) {
            let x = sx(v);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, H - BOTTOM + 16.0, label(v));
        }
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 8.0, esc(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            esc(&self.y_label)
        );

        for (k, (_, y)) in self.series.iter().enumerate() {
            let mut pts = String::new();
            for (i, v) in y.iter().enumerate() {
                if v.is_finite() {
                    let _ = write!(pts, "{:.2},{:.2} ", sx(self.x0 + i as f64), sy(*v));
                }
            }
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
                PALETTE[k % PALETTE.len()],
                pts.trim_end()
            );
        }
        for &x in &self.vlines {
            let _ = writeln!(
                s,
                r##"<line x1="{0:.2}" y1="{TOP}" x2="{0:.2}" y2="{1:.2}" stroke="#d62728" stroke-dasharray="5,3"/>"##,
                sx(x),
                TOP + ph
            );
        }
        for (name, v) in &self.hlines {
            let y = sy(*v);
            let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#555" stroke-dasharray="2,2"/>"##, W - RIGHT);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, W - RIGHT - 4.0, y - 4.0, esc(name));
        }
        if self.series.len() > 1 {
            for (k, (name, _)) in self.series.iter().enumerate() {
                let y = TOP + 14.0 + 16.0 * k as f64;
                let x = LEFT + 10.0;
                let _ = writeln!(
                    s,
                    r#"<line x1="{x}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="{2}" stroke-width="2"/><text x="{3}" y="{4:.2}">{5}</text>"#,
                    y - 4.0,
                    x + 18.0,
                    PALETTE[k % PALETTE.len()],
                    x + 24.0,
                    y,
                    esc(name)
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn esc(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// About five round tick values inside `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut v = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while v <= hi + 1e-9 * step && out.len() < 20 {
        out.push(if v.abs() < 1e-12 * step { 0.0 } else { v });
        v += step;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = ticks(0.3, 9.7);
        assert_eq!(t, vec![2.0, 4.0, 6.0, 8.0]);
        assert!(ticks(-1.0, 1.0).contains(&0.0));
    }

    #[test]
    fn renders_series_and_markers() {
        let y = [1.0, 3.0, 2.0, f64::NAN, 5.0];
        let mut c = Chart::new("a < b", "t", "y").line("one", &y).line("two", &y);
        c.vlines.push(3.0);
        c.hlines.push(("threshold".into(), 4.0));
        let svg = c.render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("stroke-dasharray=\"5,3\""));
    }

    #[test]
    fn flat_series_does_not_divide_by_zero() {
        let y = [2.0; 4];
        assert!(!Chart::new("", "", "").line("c", &y).render().contains("NaN"));
    }
}
