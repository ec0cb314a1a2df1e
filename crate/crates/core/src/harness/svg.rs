//! Static log-y decay plots.

use std::fmt::Write as _;

use super::csv::Table;

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// Plots every column after the first against the first on a log-y axis,
/// with dashed reference lines `exp(-s t)` for each slope `s`.
pub fn decay_plot(table: &Table, title: &str, reference_slopes: &[f64]) -> String {
    let x = table.columns.first().cloned().unwrap_or_default();
    let (x0, x1) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let (x0, x1) = if x1 > x0 { (x0, x1) } else { (0.0, 1.0) };
    let positives = table.columns.iter().skip(1).flatten().filter(|v| **v > 0.0 && v.is_finite());
    let ymin_data = positives.clone().fold(f64::INFINITY, |a, v| a.min(*v));
    let ymax_data = positives.fold(0.0f64, |a, v| a.max(*v));
    let decade_lo = if ymin_data.is_finite() { ymin_data.log10().floor().max(-16.0) } else { -6.0 };
    let decade_hi = if ymax_data > 0.0 { ymax_data.log10().ceil().max(decade_lo + 1.0) } else { 0.0 };
    let px = |v: f64| LEFT + (v - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |v: f64| {
        let l = v.max(10f64.powf(decade_lo)).log10();
        TOP + (decade_hi - l) / (decade_hi - decade_lo) * (H - TOP - BOTTOM)
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle">{}</text>"#, (LEFT + W - RIGHT) / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    let mut d = decade_lo as i32;
    while d <= decade_hi as i32 {
        let y = py(10f64.powi(d));
        let _ = writeln!(s, r##"<line x1="{LEFT}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="#ddd"/>"##, W - RIGHT);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{d}</text>"#, LEFT - 6.0, y + 4.0);
        d += 1;
    }
    for i in 0..=5 {
        let v = x0 + (x1 - x0) * i as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, px(v), H - BOTTOM + 18.0, trim(v));
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 10.0,
        escape(table.header.first().map_or("t", String::as_str))
    );

    let mut legend = 0;
    for (ci, col) in table.columns.iter().enumerate().skip(1) {
        let pts: Vec<String> = x
            .iter()
            .zip(col)
            .filter(|(_, v)| **v > 0.0 && v.is_finite())
            .map(|(a, b)| format!("{:.2},{:.2}", px(*a), py(*b)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let color = COLORS[(ci - 1) % COLORS.len()];
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = TOP + 14.0 + 18.0 * legend as f64;
        let _ = writeln!(s, r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, W - RIGHT + 10.0, W - RIGHT + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, W - RIGHT + 36.0, ly + 4.0, escape(&table.header[ci]));
        legend += 1;
    }
    for slope in reference_slopes {
        let y_end = (-slope * (x1 - x0)).exp();
        let ly = TOP + 14.0 + 18.0 * legend as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="5,4"/>"#,
            px(x0),
            py(1.0),
            px(x1),
            py(y_end)
        );
        let _ = writeln!(s, r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="gray" stroke-dasharray="5,4"/>"#, W - RIGHT + 10.0, W - RIGHT + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">exp(-{slope} t)</text>"#, W - RIGHT + 36.0, ly + 4.0);
        legend += 1;
    }
    s.push_str("</svg>\n");
    s
}

fn trim(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
