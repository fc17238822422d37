//! Learning-curve SVG: mean lines with shaded ±1 std bands. Plain text
//! output with fixed formatting so identical inputs give identical bytes.

use std::fmt::Write;
use std::path::Path;

use crate::aggregate::AggregateRow;
use crate::{HarnessError, HarnessResult};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub rows: Vec<AggregateRow>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Round tick spacing of 1, 2 or 5 times a power of ten.
fn tick_step(range: f64, target: usize) -> f64 {
    let raw = range / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let m = raw / mag;
    let f = if m < 1.5 {
        1.0
    } else if m < 3.5 {
        2.0
    } else if m < 7.5 {
        5.0
    } else {
        10.0
    };
    f * mag
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, f64) {
    let step = tick_step(hi - lo, 5);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), step)
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn frame(curves: &[Curve]) -> Frame {
    let rows = curves.iter().flat_map(|c| &c.rows);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for r in rows {
        x0 = x0.min(r.step as f64);
        x1 = x1.max(r.step as f64);
        y0 = y0.min(r.mean - r.std);
        y1 = y1.max(r.mean + r.std);
    }
    if x1 - x0 <= 0.0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y1 - y0 <= 1e-12 * y0.abs().max(1.0) {
        y0 -= 1.0;
        y1 += 1.0;
    } else {
        let pad = 0.05 * (y1 - y0);
        y0 -= pad;
        y1 += pad;
    }
    Frame { x0, x1, y0, y1 }
}

pub fn render_svg(curves: &[Curve]) -> HarnessResult<String> {
    if curves.is_empty() {
        return Err(HarnessError::Other("nothing to plot".into()));
    }
    for c in curves {
        if c.rows.is_empty() {
            return Err(HarnessError::Other(format!("curve {:?} has no points", c.name)));
        }
        if c.rows.iter().any(|r| !r.mean.is_finite() || !r.std.is_finite()) {
            return Err(HarnessError::Other(format!("curve {:?} has non-finite values", c.name)));
        }
    }
    let f = frame(curves);
    let (bottom, right) = (HEIGHT - BOTTOM, WIDTH - RIGHT);
    let mut s = String::new();
    // writing into a String cannot fail
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    let (xt, xstep) = ticks(f.x0, f.x1);
    for v in xt {
        let x = f.px(v);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{bottom:.2}" stroke="#e0e0e0"/>"##);
        let _ = writeln!(
            s,
            r#"<text class="xtick" x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 16.0,
            tick_label(v, xstep)
        );
    }
    let (yt, ystep) = ticks(f.y0, f.y1);
    for v in yt {
        let y = f.py(v);
        let _ = writeln!(s, r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{right:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##);
        let _ = writeln!(
            s,
            r#"<text class="ytick" x="{:.2}" y="{y:.2}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            LEFT - 6.0,
            tick_label(v, ystep)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        right - LEFT,
        bottom - TOP
    );
    let _ = writeln!(
        s,
        r#"<text class="xlabel" x="{:.2}" y="{:.2}" text-anchor="middle">Environment steps</text>"#,
        0.5 * (LEFT + right),
        HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text class="ylabel" x="20" y="{0:.2}" text-anchor="middle" transform="rotate(-90 20 {0:.2})">Evaluation return</text>"#,
        0.5 * (TOP + bottom)
    );

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper = c.rows.iter().map(|r| format!("{:.2},{:.2}", f.px(r.step as f64), f.py(r.mean + r.std)));
        let lower = c.rows.iter().rev().map(|r| format!("{:.2},{:.2}", f.px(r.step as f64), f.py(r.mean - r.std)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            s,
            r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
        let line: Vec<String> = c
            .rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", f.px(r.step as f64), f.py(r.mean)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
    }

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = TOP + 14.0 + 18.0 * i as f64;
        let x = right + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"#,
            x + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text class="legend" x="{:.2}" y="{y:.2}" dominant-baseline="middle">{}</text>"#,
            x + 26.0,
            escape(&c.name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(curves: &[Curve], path: impl AsRef<Path>) -> HarnessResult<()> {
    std::fs::write(path, render_svg(curves)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(name: &str, points: &[(u64, f64, f64)]) -> Curve {
        Curve {
            name: name.into(),
            rows: points
                .iter()
                .map(|&(step, mean, std)| AggregateRow { step, mean, std, runs: 1 })
                .collect(),
        }
    }

    #[test]
    fn tick_steps_are_round() {
        assert_eq!(tick_step(100_000.0, 5), 20_000.0);
        assert_eq!(tick_step(1.0, 5), 0.2);
        assert_eq!(tick_step(37.0, 5), 5.0);
        assert_eq!(tick_label(-0.0, 0.5), "0.0");
        assert_eq!(tick_label(-1e-17, 1.0), "0");
    }

    #[test]
    fn empty_input_rejected() {
        assert!(render_svg(&[]).is_err());
        assert!(render_svg(&[curve("a", &[])]).is_err());
        assert!(render_svg(&[curve("a", &[(0, f64::NAN, 0.0)])]).is_err());
    }

    #[test]
    fn names_are_escaped() {
        let svg = render_svg(&[curve("a<b & c", &[(0, 1.0, 0.0), (1, 2.0, 0.0)])]).unwrap();
        assert!(svg.contains("a&lt;b &amp; c"));
    }
}
