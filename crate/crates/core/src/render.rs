//! Overlays: grayscale base, cluster-colored tree polylines, class-colored
//! landmark markers. Raster (PNG) and vector (SVG) outputs.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::VesselTree;
use crate::io::ensure_parent;
use crate::raster::Raster;
use crate::types::{Landmark, LandmarkClass};

pub const MARKER_RADIUS: f64 = 2.5;

const CLUSTER_PALETTE: [[u8; 3]; 8] = [
    [60, 180, 75],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [0, 128, 128],
    [170, 110, 40],
];

pub fn class_color(class: LandmarkClass) -> [u8; 3] {
    match class {
        LandmarkClass::Endpoint => [230, 25, 75],
        LandmarkClass::Bifurcation => [255, 225, 25],
        LandmarkClass::Crossing => [0, 130, 200],
    }
}

pub fn cluster_color(id: usize) -> [u8; 3] {
    CLUSTER_PALETTE[id % CLUSTER_PALETTE.len()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn from_gray(base: &Raster) -> Self {
        let pixels = base
            .data
            .iter()
            .map(|v| {
                let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
                [g, g, g]
            })
            .collect();
        RgbImage {
            width: base.width,
            height: base.height,
            pixels,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    fn put(&mut self, x: f64, y: f64, c: [u8; 3]) {
        let (xi, yi) = (x.round(), y.round());
        if xi >= 0.0 && yi >= 0.0 && (xi as usize) < self.width && (yi as usize) < self.height {
            self.pixels[yi as usize * self.width + xi as usize] = c;
        }
    }

    fn line(&mut self, a: [f64; 2], b: [f64; 2], c: [u8; 3]) {
        let n = ((b[0] - a[0]).abs().max((b[1] - a[1]).abs()) * 2.0).ceil().max(1.0) as usize;
        for s in 0..=n {
            let t = s as f64 / n as f64;
            self.put(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), c);
        }
    }

    fn disc(&mut self, cx: f64, cy: f64, r: f64, c: [u8; 3]) {
        let ri = r.ceil() as isize;
        let (x0, y0) = (cx.round() as isize, cy.round() as isize);
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                let (x, y) = (x0 + dx, y0 + dy);
                if ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)) <= r * r {
                    self.put(x as f64, y as f64, c);
                }
            }
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .ok_or_else(|| Error::Config("overlay size mismatch".into()))?;
        ensure_parent(path)?;
        img.save(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// Draws trees first and landmarks on top. Geometry outside the image is clipped.
pub fn render_overlay(base: &Raster, trees: &[VesselTree], landmarks: &[Landmark]) -> RgbImage {
    let mut img = RgbImage::from_gray(base);
    for tree in trees {
        let c = cluster_color(tree.id);
        for e in &tree.edges {
            for w in e.polyline.windows(2) {
                img.line([w[0][0], w[0][1]], [w[1][0], w[1][1]], c);
            }
        }
    }
    for l in landmarks {
        img.disc(l.x, l.y, MARKER_RADIUS, class_color(l.class));
    }
    img
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Vector overlay; `background` is an optional image href drawn underneath.
pub fn render_svg(width: usize, height: usize, background: Option<&str>, trees: &[VesselTree], landmarks: &[Landmark]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<defs><clipPath id="frame"><rect x="0" y="0" width="{width}" height="{height}"/></clipPath></defs>"#);
    match background {
        Some(href) => {
            let _ = writeln!(s, r#"<image x="0" y="0" width="{width}" height="{height}" xlink:href="{href}"/>"#);
        }
        None => {
            let _ = writeln!(s, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="black"/>"#);
        }
    }
    let _ = writeln!(s, r#"<g clip-path="url(#frame)" fill="none" stroke-width="1">"#);
    for tree in trees {
        let c = hex(cluster_color(tree.id));
        for e in &tree.edges {
            let pts: Vec<String> = e.polyline.iter().map(|p| format!("{:.3},{:.3}", p[0], p[1])).collect();
            let _ = writeln!(
                s,
                r#"<polyline class="edge" data-cluster="{}" stroke="{c}" points="{}"/>"#,
                tree.id,
                pts.join(" ")
            );
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g clip-path="url(#frame)">"#);
    for l in landmarks {
        let _ = writeln!(
            s,
            r#"<circle class="{}" cx="{:.3}" cy="{:.3}" r="{MARKER_RADIUS}" fill="{}"/>"#,
            l.class,
            l.x,
            l.y,
            hex(class_color(l.class))
        );
    }
    let _ = writeln!(s, "</g>\n</svg>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::VesselEdge;

    fn base() -> Raster {
        Raster::from_fn(20, 16, |x, y| (x + y) as f64 / 40.0)
    }

    #[test]
    fn empty_overlay_is_base() {
        let b = base();
        let img = render_overlay(&b, &[], &[]);
        for y in 0..b.height {
            for x in 0..b.width {
                let g = (b.get(x, y) * 255.0).round() as u8;
                assert_eq!(img.get(x, y), [g, g, g]);
            }
        }
    }

    #[test]
    fn one_marker() {
        let img = render_overlay(&base(), &[], &[Landmark::new(7.0, 5.0, LandmarkClass::Bifurcation)]);
        let c = class_color(LandmarkClass::Bifurcation);
        let hits: Vec<(usize, usize)> = (0..16)
            .flat_map(|y| (0..20).map(move |x| (x, y)))
            .filter(|&(x, y)| img.get(x, y) == c)
            .collect();
        assert!(!hits.is_empty());
        let mx = hits.iter().map(|h| h.0 as f64).sum::<f64>() / hits.len() as f64;
        let my = hits.iter().map(|h| h.1 as f64).sum::<f64>() / hits.len() as f64;
        assert!((mx - 7.0).abs() < 1e-9 && (my - 5.0).abs() < 1e-9);
        assert!(hits.iter().all(|&(x, y)| (x as f64 - 7.0).hypot(y as f64 - 5.0) <= MARKER_RADIUS));
        let svg = render_svg(20, 16, None, &[], &[Landmark::new(7.0, 5.0, LandmarkClass::Bifurcation)]);
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn border_polyline_clipped() {
        let tree = VesselTree {
            id: 3,
            nodes: vec![0, 1],
            edges: vec![VesselEdge {
                i: 0,
                j: 1,
                weight: 1.0,
                polyline: vec![[-10.0, 8.0, 0.0], [50.0, 8.0, 0.0], [50.0, -30.0, 0.0]],
                degraded: false,
            }],
        };
        let img = render_overlay(&base(), &[tree.clone()], &[]);
        assert!((0..20).all(|x| img.get(x, 8) == cluster_color(3)));
        assert!(render_svg(20, 16, Some("a.png"), &[tree], &[]).contains("clip-path"));
    }
}
