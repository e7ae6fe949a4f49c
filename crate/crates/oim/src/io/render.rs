//! Objectness-map and box-outline renderers. PGM (binary P5) for the
//! per-pixel score raster, SVG for box overlays; neither needs an image
//! library and both are byte-deterministic.

use std::fmt::Write as _;

use crate::model::{BoxF, ImageRecord};

/// 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Pgm {
    /// Binary P5 encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// Rasterizes the per-pixel maximum of `scores[j][class_id]` over the
/// proposals covering each pixel, scaled to 0..=255. Pixel centers are
/// mapped into the record's canvas coordinates.
pub fn render_objectness_map(
    record: &ImageRecord,
    scores: &[Vec<f64>],
    class_id: usize,
    out_width: usize,
    out_height: usize,
) -> Pgm {
    assert_eq!(scores.len(), record.proposals.len());
    let mut pixels = vec![0u8; out_width * out_height];
    let sx = record.width / out_width as f64;
    let sy = record.height / out_height as f64;
    for py in 0..out_height {
        let cy = (py as f64 + 0.5) * sy;
        for px in 0..out_width {
            let cx = (px as f64 + 0.5) * sx;
            let mut best = 0.0f64;
            for (bbox, row) in record.proposals.boxes.iter().zip(scores) {
                if bbox.contains_point(cx, cy) {
                    best = best.max(row[class_id]);
                }
            }
            pixels[py * out_width + px] = (best.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    Pgm {
        width: out_width,
        height: out_height,
        pixels,
    }
}

/// SVG document outlining boxes over a `width x height` canvas; each box
/// carries a label and score rendered next to its top-left corner.
pub fn render_boxes_svg(width: f64, height: f64, boxes: &[(BoxF, String, f64)]) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width:.1} {height:.1}">"#
    );
    let _ = writeln!(
        svg,
        r#"  <rect x="0" y="0" width="{width:.1}" height="{height:.1}" fill="none" stroke="black"/>"#
    );
    for (bbox, label, score) in boxes {
        let _ = writeln!(
            svg,
            r#"  <rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="red" stroke-width="2"/>"#,
            bbox.x1,
            bbox.y1,
            bbox.width(),
            bbox.height()
        );
        let _ = writeln!(
            svg,
            r#"  <text x="{:.3}" y="{:.3}" font-size="12" fill="red">{label} {score:.3}</text>"#,
            bbox.x1 + 2.0,
            (bbox.y1 - 4.0).max(10.0)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
