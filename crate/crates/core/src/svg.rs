//! Static SVG rendering of a snapshot (first two axes only).

use std::fmt::Write;

use crate::snapshot::Snapshot;
use crate::space::damp;

pub const BLOOD_RED: &str = "#8a0303";

/// Pixels per unit of layout space.
const SCALE: f64 = 120.0;
const MARGIN: f64 = 60.0;
const MIN_FONT: f64 = 10.0;
const FONT_SPAN: f64 = 26.0;
const WIDTH_PER_KBAR: f64 = 2.0;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn xy(x: &[f64]) -> (f64, f64) {
    let a = x.first().copied().unwrap_or(0.0);
    let b = x.get(1).copied().unwrap_or(0.0);
    // adding 0.0 turns -0.0 into 0.0
    (a * SCALE + 0.0, -b * SCALE + 0.0)
}

/// Words are sized by `f(count / max count)`, lines are `k_bar`-wide and
/// blood red with opacity proportional to their attraction energy.
pub fn render(snapshot: &Snapshot) -> String {
    let pts: Vec<(f64, f64)> = snapshot.words.iter().map(|w| xy(&w.x)).collect();
    let (mut x0, mut y0, mut x1, mut y1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let (vx, vy) = (x0 - MARGIN, y0 - MARGIN);
    let (vw, vh) = (x1 - x0 + 2.0 * MARGIN, y1 - y0 + 2.0 * MARGIN);

    let max_count = snapshot
        .words
        .iter()
        .map(|w| w.count)
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let max_energy = snapshot.edges.iter().map(|e| e.energy).fold(0.0, f64::max);
    let gamma = snapshot.config.gamma;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{vx:.3} {vy:.3} {vw:.3} {vh:.3}" width="{vw:.0}" height="{vh:.0}">"#
    )
    .unwrap();
    writeln!(
        out,
        r##"<rect x="{vx:.3}" y="{vy:.3}" width="{vw:.3}" height="{vh:.3}" fill="#ffffff"/>"##
    )
    .unwrap();

    out.push_str("<g class=\"edges\">\n");
    for e in &snapshot.edges {
        let (Some(a), Some(b)) = (snapshot.word(&e.u), snapshot.word(&e.v)) else {
            continue;
        };
        let (ax, ay) = xy(&a.x);
        let (bx, by) = xy(&b.x);
        let alpha = if max_energy > 0.0 {
            e.energy / max_energy
        } else {
            0.0
        };
        writeln!(
            out,
            r#"<line x1="{ax:.3}" y1="{ay:.3}" x2="{bx:.3}" y2="{by:.3}" stroke="{BLOOD_RED}" stroke-width="{:.3}" stroke-opacity="{alpha:.3}"/>"#,
            WIDTH_PER_KBAR * e.kbar
        )
        .unwrap();
    }
    out.push_str("</g>\n<g class=\"words\" text-anchor=\"middle\" dominant-baseline=\"middle\" font-family=\"sans-serif\">\n");
    for (w, (x, y)) in snapshot.words.iter().zip(&pts) {
        let size = MIN_FONT + FONT_SPAN * damp(w.count as f64 / max_count, gamma);
        let weight = if w.id() == snapshot.pinned {
            " font-weight=\"bold\""
        } else {
            ""
        };
        writeln!(
            out,
            r#"<text x="{x:.3}" y="{y:.3}" font-size="{size:.2}" data-lang="{}"{weight}>{}</text>"#,
            escape(w.lang.as_str()),
            escape(&w.word)
        )
        .unwrap();
    }
    out.push_str("</g>\n</svg>\n");
    out
}
