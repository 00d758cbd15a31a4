//! CSV and SVG scatter output. Both renderers are pure functions of their
//! input, so identical points give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{PointLabel, ProjectedPoint, VizError};
use crate::corpus::RelationLabel;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 40.0;
const LEGEND_WIDTH: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotFormat {
    Csv,
    Svg,
}

impl FromStr for PlotFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(PlotFormat::Csv),
            "svg" => Ok(PlotFormat::Svg),
            other => Err(format!("unknown plot format {other:?}")),
        }
    }
}

/// Legend order and colors.
const PALETTE: [(PointLabel, &str); 4] = [
    (PointLabel::Relation(RelationLabel::Reason), "#7b3294"),
    (PointLabel::Relation(RelationLabel::Effect), "#1b9e77"),
    (PointLabel::Relation(RelationLabel::Addiction), "#2166ac"),
    (PointLabel::Unlabeled, "#9e9e9e"),
];

pub fn color(label: PointLabel) -> &'static str {
    PALETTE
        .iter()
        .find(|(l, _)| *l == label)
        .map(|(_, c)| *c)
        .expect("every label has a color")
}

pub fn render_csv(points: &[ProjectedPoint]) -> Result<String, VizError> {
    if points.is_empty() {
        return Err(VizError::Empty);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(p).map_err(|e| VizError::Io(e.into()))?;
    }
    let bytes = w.into_inner().map_err(|e| VizError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders an SVG scatter plot. `comment`, when given, is embedded as an
/// XML comment after the root element opens.
pub fn render_svg(points: &[ProjectedPoint], comment: Option<&str>) -> Result<String, VizError> {
    if points.is_empty() {
        return Err(VizError::Empty);
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let plot_w = WIDTH - 2.0 * MARGIN - LEGEND_WIDTH;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - x0) / span(x0, x1) * plot_w;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / span(y0, y1) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    if let Some(c) = comment {
        let _ = writeln!(out, "<!-- {} -->", c.replace("--", "- -"));
    }
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<g class="points">"#);
    for p in points {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"><title>{}</title></circle>"#,
            sx(p.x),
            sy(p.y),
            color(p.label),
            escape_xml(&p.tweet_id)
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<g class="legend" font-family="sans-serif" font-size="12">"#);
    let present: Vec<_> = PALETTE
        .iter()
        .filter(|(l, _)| points.iter().any(|p| p.label == *l))
        .collect();
    let lx = WIDTH - LEGEND_WIDTH;
    for (row, (label, c)) in present.iter().enumerate() {
        let ly = MARGIN + 20.0 * row as f64;
        let _ = writeln!(
            out,
            r#"<circle cx="{lx:.2}" cy="{ly:.2}" r="5" fill="{c}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 10.0,
            ly + 4.0,
            label.as_str()
        );
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_plot(
    points: &[ProjectedPoint],
    path: &Path,
    format: PlotFormat,
    comment: Option<&str>,
) -> Result<(), VizError> {
    let body = match format {
        PlotFormat::Csv => render_csv(points)?,
        PlotFormat::Svg => render_svg(points, comment)?,
    };
    fs::write(path, body)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(id: &str, x: f64, y: f64, label: PointLabel) -> ProjectedPoint {
        ProjectedPoint {
            tweet_id: id.into(),
            x,
            y,
            label,
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let pts = vec![
            pt("a", 0.0, 1.0, PointLabel::Relation(RelationLabel::Reason)),
            pt("b", 1.5, -2.0, PointLabel::Unlabeled),
            pt("c,d", 2.0, 0.0, PointLabel::Relation(RelationLabel::Effect)),
        ];
        let csv = render_csv(&pts).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "id,x,y,label");
        assert_eq!(lines[2], "b,1.5,-2.0,unlabeled");
        assert_eq!(lines[3], "\"c,d\",2.0,0.0,effect");
    }

    #[test]
    fn legend_lists_present_labels() {
        let pts: Vec<_> = PALETTE
            .iter()
            .enumerate()
            .map(|(i, (l, _))| pt(&i.to_string(), i as f64, 0.0, *l))
            .collect();
        let svg = render_svg(&pts, Some("hash")).unwrap();
        assert_eq!(svg.matches("<text").count(), 4);
        assert!(svg.contains("#7b3294") && svg.contains("<!-- hash -->"));
        let one = render_svg(&pts[..1], None).unwrap();
        assert_eq!(one.matches("<text").count(), 1);
    }

    #[test]
    fn rendering_is_deterministic() {
        let pts = vec![pt("a", 0.3, 0.1, PointLabel::Unlabeled); 3];
        assert_eq!(render_svg(&pts, None).unwrap(), render_svg(&pts, None).unwrap());
        assert!(render_csv(&[]).is_err());
    }
}
