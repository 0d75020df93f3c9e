//! Minimal SVG heatmaps. Cells are coloured on a diverging scale centred at 1.

use std::fmt::Write;

use crate::format::num;

const CELL: usize = 64;
const MARGIN_LEFT: usize = 70;
const MARGIN_TOP: usize = 50;

fn colour(value: f64, lo: f64, hi: f64) -> String {
    // Blue below 1, red above, white at 1.
    let t = if value < 1.0 {
        -((1.0 - value) / (1.0 - lo).max(1e-12)).min(1.0)
    } else {
        ((value - 1.0) / (hi - 1.0).max(1e-12)).min(1.0)
    };
    let fade = |x: f64| (255.0 * (1.0 - x.abs())).round() as u8;
    if t < 0.0 {
        format!("rgb({},{},255)", fade(t), fade(t))
    } else {
        format!("rgb(255,{},{})", fade(t), fade(t))
    }
}

/// Renders `values[row][col]`; `None` cells are drawn grey.
pub fn heatmap<R: ToString, C: ToString>(
    title: &str,
    row_label: &str,
    col_label: &str,
    rows: &[R],
    cols: &[C],
    values: &[Vec<Option<f64>>],
) -> String {
    let finite = values.iter().flatten().flatten().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(1.0, f64::min);
    let hi = finite.fold(1.0, f64::max);
    let width = MARGIN_LEFT + CELL * cols.len() + 20;
    let height = MARGIN_TOP + CELL * rows.len() + 40;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="{MARGIN_LEFT}" y="20" font-size="14">{title}</text>"#);
    for (i, r) in rows.iter().enumerate() {
        let y = MARGIN_TOP + i * CELL;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6,
            y + CELL / 2 + 4,
            r.to_string()
        );
        for (j, _) in cols.iter().enumerate() {
            let x = MARGIN_LEFT + j * CELL;
            let v = values.get(i).and_then(|row| row.get(j)).copied().flatten();
            let (fill, label) = match v {
                Some(v) if v.is_finite() => (colour(v, lo, hi), format!("{v:.3}")),
                _ => ("rgb(200,200,200)".to_owned(), "n/a".to_owned()),
            };
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="white"/><text x="{}" y="{}" text-anchor="middle">{label}</text>"#,
                x + CELL / 2,
                y + CELL / 2 + 4
            );
        }
    }
    let base = MARGIN_TOP + rows.len() * CELL;
    for (j, c) in cols.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + j * CELL + CELL / 2,
            base + 16,
            c.to_string()
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{col_label}</text><text x="12" y="{}">{row_label}</text>"#,
        MARGIN_LEFT + cols.len() * CELL / 2,
        base + 34,
        MARGIN_TOP + rows.len() * CELL / 2
    );
    let _ = writeln!(s, "<!-- range {} .. {} -->", num(lo), num(hi));
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_every_cell() {
        let svg = heatmap(
            "t",
            "m",
            "q",
            &[4, 8],
            &[0.01, 0.05, 0.1],
            &[
                vec![Some(0.5), Some(1.0), Some(2.0)],
                vec![None, Some(f64::NAN), Some(1.5)],
            ],
        );
        assert_eq!(svg.matches("<rect").count(), 6);
        assert_eq!(svg.matches("n/a").count(), 2);
        assert!(svg.contains("rgb(255,255,255)"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
