//! Plain SVG strings for the demo page.

use std::fmt::Write as _;

use sparx::qaf::{Qaf, StrengthAssignment};

const SUPPORT: &str = "#2e7d32";
const ATTACK: &str = "#c62828";

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Layered drawing: one column per layer, supports green, attacks red, edge
/// width proportional to `|w|`. With strengths, node fill encodes the
/// strength relative to the largest one in the same layer.
pub fn render_qaf(qaf: &Qaf, strengths: Option<&StrengthAssignment>, width: f64, height: f64) -> String {
    let layers = qaf.output_layer() + 1;
    let margin = 60.0;
    let mut columns: Vec<Vec<&sparx::qaf::Argument>> = vec![Vec::new(); layers];
    for a in &qaf.arguments {
        columns[a.layer].push(a);
    }
    for col in &mut columns {
        col.sort_by_key(|a| a.index);
    }
    let mut pos = std::collections::HashMap::new();
    for (l, col) in columns.iter().enumerate() {
        let x = if layers > 1 {
            margin + l as f64 * (width - 2.0 * margin) / (layers - 1) as f64
        } else {
            width / 2.0
        };
        let step = (height - 2.0 * margin) / col.len().max(1) as f64;
        for (k, a) in col.iter().enumerate() {
            pos.insert(a.id.as_str(), (x, margin + step * (k as f64 + 0.5)));
        }
    }
    let max_w = qaf.edges.iter().map(|e| e.weight.abs()).fold(0.0, f64::max);

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    for e in &qaf.edges {
        let (Some(&(x1, y1)), Some(&(x2, y2))) = (pos.get(e.source.as_str()), pos.get(e.target.as_str())) else {
            continue;
        };
        let w = if max_w > 0.0 {
            0.5 + 4.5 * e.weight.abs() / max_w
        } else {
            0.5
        };
        let colour = if e.is_attack() { ATTACK } else { SUPPORT };
        let _ = write!(
            svg,
            r#"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="{colour}" stroke-width="{w:.2}" stroke-opacity="0.55"><title>{} → {}: {:.3}</title></line>"#,
            escape(&e.source),
            escape(&e.target),
            e.weight
        );
    }
    for col in &columns {
        let layer_max = strengths
            .map(|s| {
                col.iter()
                    .filter_map(|a| s.get(&a.id))
                    .map(f64::abs)
                    .fold(0.0, f64::max)
            })
            .unwrap_or(0.0);
        for a in col {
            let (x, y) = pos[a.id.as_str()];
            let strength = strengths.and_then(|s| s.get(&a.id));
            let fill = match strength {
                Some(v) if layer_max > 0.0 => {
                    let t = (v.abs() / layer_max).clamp(0.0, 1.0);
                    format!("rgba(33,102,172,{:.3})", 0.1 + 0.8 * t)
                }
                _ => "#ffffff".to_string(),
            };
            let mut tip = format!("{}\nbase score {:.3}", a.label, a.base_score);
            if let Some(v) = strength {
                let _ = write!(tip, "\nstrength {v:.3}");
            }
            let _ = write!(
                svg,
                r##"<g><circle cx="{x:.1}" cy="{y:.1}" r="13" fill="{fill}" stroke="#333"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text><title>{}</title></g>"##,
                y + 26.0,
                escape(&a.label),
                escape(&tip)
            );
        }
    }
    svg.push_str("</svg>");
    svg
}

/// Line chart of `ys` against `xs` with a title and min/max axis labels.
pub fn line_chart(title: &str, xs: &[f64], ys: &[f64], width: f64, height: f64) -> String {
    let (l, r, t, b) = (50.0, 15.0, 25.0, 30.0);
    let lo_x = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_x = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo_y = ys.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let hi_y = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sx = |x: f64| {
        if hi_x > lo_x {
            l + (x - lo_x) / (hi_x - lo_x) * (width - l - r)
        } else {
            l
        }
    };
    let sy = |y: f64| {
        if hi_y > lo_y {
            height - b - (y - lo_y) / (hi_y - lo_y) * (height - t - b)
        } else {
            height - b
        }
    };
    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(
        svg,
        r#"<text x="{l}" y="15" font-weight="bold">{}</text>"#,
        escape(title)
    );
    let _ = write!(
        svg,
        r##"<line x1="{l}" y1="{0}" x2="{1}" y2="{0}" stroke="#999"/><line x1="{l}" y1="{t}" x2="{l}" y2="{0}" stroke="#999"/>"##,
        height - b,
        width - r
    );
    if xs.iter().chain(ys).all(|v| v.is_finite()) && !xs.is_empty() {
        let _ = write!(svg, r#"<text x="{l}" y="{}" >{lo_x:.2}</text>"#, height - 10.0);
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{hi_x:.2}</text>"#,
            width - r,
            height - 10.0
        );
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{hi_y:.3}</text>"#,
            l - 4.0,
            t + 4.0
        );
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{lo_y:.3}</text>"#,
            l - 4.0,
            height - b
        );
        let points: Vec<String> = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        let _ = write!(
            svg,
            r##"<polyline points="{}" fill="none" stroke="#2166ac" stroke-width="2"/>"##,
            points.join(" ")
        );
        for (&x, &y) in xs.iter().zip(ys) {
            let _ = write!(
                svg,
                r##"<circle cx="{:.1}" cy="{:.1}" r="3" fill="#2166ac"><title>{x:.2}: {y:.4}</title></circle>"##,
                sx(x),
                sy(y)
            );
        }
    }
    svg.push_str("</svg>");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use sparx::qaf::{final_strengths, translate};

    use sparx::{Activation, Layer, Mlp, OutputHead};

    fn xor_qaf() -> Qaf {
        let net = Mlp::new(
            vec![
                Layer {
                    weights: vec![vec![-1.7, 1.7], vec![2.3, -2.3], vec![-1.8, 1.8], vec![1.5, -1.5]],
                    bias: vec![0.0; 4],
                },
                Layer {
                    weights: vec![vec![0.3, 0.2, 0.25, 0.35]],
                    bias: vec![0.0],
                },
            ],
            Activation::Relu,
            OutputHead::SameAsHidden,
            vec!["x0".into(), "x1".into()],
            vec!["xor".into()],
        )
        .unwrap();
        translate(&net, &[0.0, 1.0]).unwrap()
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape(r#"<a & "b">"#), "&lt;a &amp; &quot;b&quot;&gt;");
    }

    #[test]
    fn one_circle_per_argument_and_line_per_edge() {
        let qaf = xor_qaf();
        let s = final_strengths(&qaf).unwrap();
        let svg = render_qaf(&qaf, Some(&s), 400.0, 300.0);
        assert_eq!(svg.matches("<circle").count(), qaf.arguments.len());
        assert_eq!(svg.matches("<line").count(), qaf.edges.len());
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>"));
        assert!(svg.contains(ATTACK) && svg.contains(SUPPORT));
    }

    #[test]
    fn chart_has_one_marker_per_point() {
        let svg = line_chart("io", &[0.2, 0.4, 0.6], &[0.0, 1.0, 4.0], 300.0, 200.0);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("<polyline"));
        let empty = line_chart("io", &[], &[], 300.0, 200.0);
        assert!(!empty.contains("<polyline"));
    }
}
