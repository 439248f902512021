//! Minimal SVG swarm plot: one row per feature, points at their SHAP value,
//! coloured from blue (low encoded value) to red (high).

use std::fmt::Write as _;

use xplain::gbdt::Swarm;

const ROW_HEIGHT: f64 = 28.0;
const LABEL_WIDTH: f64 = 170.0;
const PLOT_WIDTH: f64 = 520.0;
const MARGIN: f64 = 20.0;

fn colour(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (40.0 + 200.0 * t).round() as u8;
    let b = (240.0 - 200.0 * t).round() as u8;
    format!("#{r:02x}40{b:02x}")
}

/// Deterministic vertical offset in [-0.35, 0.35] of a row height.
fn jitter(record: usize) -> f64 {
    let h = (record as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 40;
    (h as f64 / (1u64 << 24) as f64 - 0.5) * 0.7
}

pub fn swarm_plot(swarm: &Swarm) -> String {
    let features: Vec<&str> = swarm.ranking.iter().map(|f| f.feature.as_str()).collect();
    let lim = swarm.rows.iter().map(|r| r.shap.abs()).fold(0.0, f64::max).max(1e-12);
    let height = features.len() as f64 * ROW_HEIGHT + 3.0 * MARGIN;
    let width = LABEL_WIDTH + PLOT_WIDTH + 2.0 * MARGIN;
    let x_of = |phi: f64| LABEL_WIDTH + MARGIN + (phi / lim + 1.0) / 2.0 * PLOT_WIDTH;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="14">f{} d={}: SHAP value (AOCC)</text>"#, LABEL_WIDTH + MARGIN, swarm.fid, swarm.dim);
    let zero = x_of(0.0);
    let _ = writeln!(
        s,
        r##"<line x1="{zero}" y1="{MARGIN}" x2="{zero}" y2="{}" stroke="#999"/>"##,
        height - 2.0 * MARGIN
    );
    let mut range: Vec<(f64, f64)> = vec![(f64::INFINITY, f64::NEG_INFINITY); features.len()];
    for r in &swarm.rows {
        if let Some(i) = features.iter().position(|f| *f == r.feature) {
            range[i] = (range[i].0.min(r.encoded_value), range[i].1.max(r.encoded_value));
        }
    }
    for (i, name) in features.iter().enumerate() {
        let y = MARGIN + (i as f64 + 0.5) * ROW_HEIGHT;
        let _ = writeln!(s, r#"<text x="{MARGIN}" y="{:.1}">{name}</text>"#, y + 4.0);
    }
    for r in &swarm.rows {
        let Some(i) = features.iter().position(|f| *f == r.feature) else { continue };
        let (lo, hi) = range[i];
        let t = if hi > lo { (r.encoded_value - lo) / (hi - lo) } else { 0.5 };
        let y = MARGIN + (i as f64 + 0.5 + jitter(r.record_idx)) * ROW_HEIGHT;
        let _ = writeln!(
            s,
            r#"<circle cx="{:.1}" cy="{y:.1}" r="2" fill="{}" fill-opacity="0.7"/>"#,
            x_of(r.shap),
            colour(t)
        );
    }
    let base = height - MARGIN;
    let _ = writeln!(s, r#"<text x="{:.1}" y="{base}">{:.3}</text>"#, x_of(-lim), -lim);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{base}" text-anchor="end">{:.3}</text>"#, x_of(lim), lim);
    s.push_str("</svg>\n");
    s
}
