//! Minimal self-contained SVG output: space-time heatmaps and x-y plots.

use std::fmt::Write as _;

use crate::pde::SimulationTrace;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Piecewise-linear dark-blue to yellow ramp for `v` in `[0, 1]`.
fn colour(v: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 4] = [
        (0.0, [68.0, 1.0, 84.0]),
        (0.33, [49.0, 104.0, 142.0]),
        (0.66, [53.0, 183.0, 121.0]),
        (1.0, [253.0, 231.0, 37.0]),
    ];
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let k = STOPS.iter().rposition(|s| s.0 <= v).unwrap_or(0).min(STOPS.len() - 2);
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let w = (v - a.0) / (b.0 - a.0);
    let c: Vec<u8> = (0..3).map(|i| (a.1[i] + w * (b.1[i] - a.1[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it
                .filter(|v| v.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 * (1.0 + lo.abs()) {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        Self {
            x: range(&mut xs.clone()),
            y: range(&mut ys.clone()),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            out,
            r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let (xp, yp) = (self.px(xv), self.py(yv));
            let _ = writeln!(out, r#"<line x1="{xp}" y1="{b}" x2="{xp}" y2="{}" stroke="black"/>"#, b + 5.0);
            let _ = writeln!(
                out,
                r#"<text x="{xp}" y="{}" text-anchor="middle">{}</text>"#,
                b + 18.0,
                tick(xv)
            );
            let _ = writeln!(out, r#"<line x1="{}" y1="{yp}" x2="{l}" y2="{yp}" stroke="black"/>"#, l - 5.0);
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                l - 8.0,
                yp + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 18.0,
            escape(x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(y_label)
        );
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{:.4}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// `u(x, t)` over the stored snapshots, binned to at most `max_cols` by
/// `max_rows` cells (bin maxima, so narrow features stay visible).
pub fn space_time_heatmap(trace: &SimulationTrace, title: &str, max_cols: usize, max_rows: usize) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let snaps = &trace.snapshots;
    let npts = snaps.first().map_or(0, |s| s.values.len());
    if npts == 0 {
        out.push_str("</svg>\n");
        return out;
    }
    let x_end = trace.snapshot_x(npts - 1);
    let frame = Frame {
        x: (trace.snapshot_x0, x_end),
        y: (snaps[0].t, snaps[snaps.len() - 1].t.max(snaps[0].t + 1e-12)),
    };
    let cols = max_cols.clamp(1, npts);
    let rows = max_rows.clamp(1, snaps.len());
    let cw = (WIDTH - 2.0 * MARGIN) / cols as f64;
    let rh = (HEIGHT - 2.0 * MARGIN) / rows as f64;
    for r in 0..rows {
        let (s0, s1) = (r * snaps.len() / rows, ((r + 1) * snaps.len() / rows).max(r * snaps.len() / rows + 1));
        for c in 0..cols {
            let (p0, p1) = (c * npts / cols, ((c + 1) * npts / cols).max(c * npts / cols + 1));
            let v = snaps[s0..s1]
                .iter()
                .flat_map(|s| s.values[p0..p1].iter().copied())
                .fold(0.0, f64::max);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                MARGIN + c as f64 * cw,
                HEIGHT - MARGIN - (r + 1) as f64 * rh,
                cw + 0.05,
                rh + 0.05,
                colour(v)
            );
        }
    }
    frame.axes(&mut out, "x", "t");
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Points,
    Line,
}

/// One labelled series per entry, drawn on shared axes.
pub fn xy_plot(
    series: &[(&str, &[(f64, f64)], Mark)],
    title: &str,
    x_label: &str,
    y_label: &str,
) -> String {
    const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let mut out = String::new();
    header(&mut out, title);
    let all = series.iter().flat_map(|s| s.1.iter());
    let frame = Frame::new(all.clone().map(|p| p.0), all.map(|p| p.1));
    frame.axes(&mut out, x_label, y_label);
    for (k, (name, pts, mark)) in series.iter().enumerate() {
        let c = PALETTE[k % PALETTE.len()];
        let finite = pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite());
        match mark {
            Mark::Points => {
                for p in finite {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#,
                        frame.px(p.0),
                        frame.py(p.1)
                    );
                }
            }
            Mark::Line => {
                let d: Vec<String> = finite
                    .map(|p| format!("{:.2},{:.2}", frame.px(p.0), frame.py(p.1)))
                    .collect();
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
                    d.join(" ")
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{c}">{}</text>"#,
            WIDTH - MARGIN - 150.0,
            MARGIN + 16.0 * (k + 1) as f64,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}
