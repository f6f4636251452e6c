//! Minimal static SVG: `x₁`, `x₂` and `u` against time, one panel each,
//! with the safe-set bounds drawn as dashed lines.

use std::fmt::Write as _;

use constraint_lifting::{SimConfig, Trajectory};

const WIDTH: f64 = 720.0;
const PANEL_H: f64 = 180.0;
const MARGIN: f64 = 48.0;
const MAX_POINTS: usize = 2000;

struct Panel<'a> {
    label: &'a str,
    values: Vec<f64>,
    guides: Vec<f64>,
}

fn polyline(ts: &[f64], ys: &[f64], t_max: f64, lo: f64, hi: f64, top: f64) -> String {
    let sx = |t: f64| MARGIN + (WIDTH - 2.0 * MARGIN) * t / t_max;
    let sy = |y: f64| top + PANEL_H - (PANEL_H - 20.0) * (y - lo) / (hi - lo) - 10.0;
    let mut s = String::new();
    for (t, y) in ts.iter().zip(ys) {
        let _ = write!(s, "{:.2},{:.2} ", sx(*t), sy(*y));
    }
    s
}

pub fn render(traj: &Trajectory, cfg: &SimConfig) -> String {
    let step = traj.samples.len().div_ceil(MAX_POINTS).max(1);
    let picked: Vec<_> = traj.samples.iter().step_by(step).collect();
    let ts: Vec<f64> = picked.iter().map(|s| s.t).collect();
    let t_max = ts.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let [xbar1, xbar2] = cfg.lifting.safe_set().bounds();

    let panels = [
        Panel {
            label: "x1",
            values: picked.iter().map(|s| s.x[0]).collect(),
            guides: vec![-xbar1, xbar1, cfg.x1d],
        },
        Panel {
            label: "x2",
            values: picked.iter().map(|s| s.x[1]).collect(),
            guides: vec![-xbar2, xbar2],
        },
        Panel {
            label: "u",
            values: picked.iter().map(|s| s.u).collect(),
            guides: vec![0.0],
        },
    ];

    let height = PANEL_H * panels.len() as f64 + MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"##
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="white"/>"##);
    for (k, p) in panels.iter().enumerate() {
        let top = MARGIN / 2.0 + PANEL_H * k as f64;
        let finite = p.values.iter().chain(&p.guides).copied().filter(|v| v.is_finite());
        let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !(lo.is_finite() && hi.is_finite()) {
            (lo, hi) = (-1.0, 1.0);
        }
        if hi - lo < 1e-12 {
            (lo, hi) = (lo - 1.0, hi + 1.0);
        }
        let _ = writeln!(
            svg,
            r##"<rect x="{MARGIN}" y="{top}" width="{}" height="{PANEL_H}" fill="none" stroke="#999"/>"##,
            WIDTH - 2.0 * MARGIN
        );
        let _ = writeln!(svg, r##"<text x="8" y="{}">{}</text>"##, top + PANEL_H / 2.0, p.label);
        let _ = writeln!(
            svg,
            r##"<text x="{MARGIN}" y="{}" fill="#666">{hi:.3}</text><text x="{MARGIN}" y="{}" fill="#666">{lo:.3}</text>"##,
            top + 12.0,
            top + PANEL_H - 2.0
        );
        for g in &p.guides {
            let pts = polyline(&[0.0, t_max], &[*g, *g], t_max, lo, hi, top);
            let _ = writeln!(
                svg,
                r##"<polyline points="{pts}" fill="none" stroke="#c33" stroke-dasharray="4 3"/>"##
            );
        }
        let pts = polyline(&ts, &p.values, t_max, lo, hi, top);
        let _ = writeln!(svg, r##"<polyline points="{pts}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>"##);
    }
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{}" text-anchor="end">t = {t_max:.3} s</text>"##,
        WIDTH - MARGIN,
        height - 6.0
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use constraint_lifting::run;

    #[test]
    fn renders_three_panels() {
        let cfg = SimConfig {
            t_final: 0.2,
            ..SimConfig::dc_motor_default()
        };
        let svg = render(&run(&cfg).unwrap(), &cfg);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("stroke=\"#1f5fa8\"").count(), 3);
    }
}
