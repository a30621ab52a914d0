//! Standalone SVG heatmap of `ratio_lower` over (center, radius).

use std::fmt::Write;

use super::scan::{CriterionReport, Ratio};

const CELL: f64 = 14.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 40.0;

/// Blue-to-yellow ramp for `t ∈ [0, 1]`.
fn ramp(t: f64) -> (u8, u8, u8) {
    let stops = [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let x = t.clamp(0.0, 1.0) * (stops.len() - 1) as f64;
    let k = (x.floor() as usize).min(stops.len() - 2);
    let u = x - k as f64;
    let (a, b) = (stops[k], stops[k + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * u).round() as u8;
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

impl CriterionReport {
    /// Columns are centers in report order, rows are radii (smallest at the
    /// bottom). Colors follow `log₁₀ ratio_lower` between the smallest and
    /// largest positive finite ratio; infinite ratios are red, vanishing
    /// oscillations light gray.
    pub fn to_svg(&self) -> String {
        let (nc, nr) = (self.centers.len(), self.radii.len());
        let logs: Vec<f64> = self
            .records
            .iter()
            .filter_map(|r| r.ratio_lower.finite())
            .filter(|&x| x > 0.0)
            .map(f64::log10)
            .collect();
        let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = LEFT + nc as f64 * CELL + 20.0;
        let height = TOP + nr as f64 * CELL + 50.0;
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{LEFT}" y="20" font-family="sans-serif" font-size="12">{} k={} ratio |O|/(omega*cap_lower)</text>"#,
            escape(&self.function_id),
            self.k
        );
        for (ci, _) in self.centers.iter().enumerate() {
            for (ri, rad) in self.radii.iter().enumerate() {
                let rec = &self.records[ci * nr + ri];
                let fill = match rec.ratio_lower {
                    Ratio::Infinite => "rgb(200,30,30)".to_string(),
                    Ratio::Finite(x) if rec.vanishing || x <= 0.0 => "rgb(225,225,225)".to_string(),
                    Ratio::Finite(x) => {
                        let t = if hi > lo { (x.log10() - lo) / (hi - lo) } else { 0.5 };
                        let (r, g, b) = ramp(t);
                        format!("rgb({r},{g},{b})")
                    }
                };
                let x = LEFT + ci as f64 * CELL;
                let y = TOP + (nr - 1 - ri) as f64 * CELL;
                let _ = writeln!(
                    s,
                    r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}"><title>a={} r={rad} ratio={}</title></rect>"#,
                    rec.center,
                    match rec.ratio_lower {
                        Ratio::Finite(v) => format!("{v:.3e}"),
                        Ratio::Infinite => "inf".into(),
                    }
                );
            }
        }
        for (ri, rad) in self.radii.iter().enumerate() {
            let y = TOP + (nr - 1 - ri) as f64 * CELL + CELL * 0.75;
            let _ = writeln!(s, r#"<text x="4" y="{y}" font-family="sans-serif" font-size="10">r={rad:.4}</text>"#);
        }
        let ly = TOP + nr as f64 * CELL + 20.0;
        let legend = if logs.is_empty() {
            "no positive finite ratios".to_string()
        } else {
            format!("log10 ratio from {lo:.2} (dark) to {hi:.2} (light); red = inf; gray = vanishing")
        };
        let _ = writeln!(s, r#"<text x="{LEFT}" y="{ly}" font-family="sans-serif" font-size="10">centers (report order); {legend}</text>"#);
        s.push_str("</svg>\n");
        s
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
