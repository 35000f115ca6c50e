//! Grid images and SVG plots.

use std::fmt::Write as _;

use scenemorph_core::raster::Image;

const RED: [f32; 3] = [0.9, 0.1, 0.1];
const GREEN: [f32; 3] = [0.1, 0.8, 0.2];
const GAP: usize = 4;

/// One grid row: the two frames and the angle predicted on each.
pub struct GridRow<'a> {
    pub original: &'a Image,
    pub transformed: &'a Image,
    pub angle_original: f64,
    pub angle_transformed: f64,
}

/// Rows of `original | transformed` with the predicted steering drawn as a
/// line from the bottom center, red on the original and green on the
/// transformed frame. Positive angles lean right.
pub fn grid(rows: &[GridRow<'_>]) -> Image {
    let (h, w) = rows.first().map_or((1, 1), |r| (r.original.height(), r.original.width()));
    let mut out = Image::filled(rows.len().max(1) * (h + GAP), 2 * w + GAP, 3, 1.0);
    for (i, r) in rows.iter().enumerate() {
        let top = i * (h + GAP);
        for (left, image, angle, color) in [(0, r.original, r.angle_original, RED), (w + GAP, r.transformed, r.angle_transformed, GREEN)] {
            let image = image.resized(h, w);
            for y in 0..h {
                for x in 0..w {
                    for c in 0..3 {
                        out.set(top + y, left + x, c, image.get(y, x, c));
                    }
                }
            }
            steering_line(&mut out, top, left, h, w, angle, color);
        }
    }
    out
}

fn steering_line(out: &mut Image, top: usize, left: usize, h: usize, w: usize, degrees: f64, color: [f32; 3]) {
    let length = 0.45 * h as f64;
    let (dx, dy) = (degrees.to_radians().sin(), -degrees.to_radians().cos());
    let (x0, y0) = (w as f64 / 2.0, h as f64 - 1.0);
    let samples = (2.0 * length).ceil() as usize;
    for s in 0..=samples {
        let t = length * s as f64 / samples.max(1) as f64;
        let (x, y) = (x0 + dx * t, y0 + dy * t);
        for (ox, oy) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)] {
            let (px, py) = ((x + ox).floor(), (y + oy).floor());
            if px < 0.0 || py < 0.0 || px >= w as f64 || py >= h as f64 {
                continue;
            }
            for (c, &v) in color.iter().enumerate() {
                out.set(top + py as usize, left + px as usize, c, v);
            }
        }
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line plot of inconsistency counts against the error bound, one series per model.
pub fn counts_plot(title: &str, series: &[(String, Vec<(f64, usize)>)]) -> String {
    let (width, height) = (640.0, 400.0);
    let (ml, mr, mt, mb) = (60.0, 180.0, 40.0, 50.0);
    let (pw, ph) = (width - ml - mr, height - mt - mb);
    let points = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x_min, mut x_max, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY, 1usize);
    for &(x, y) in points {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_max = y_max.max(y);
    }
    if !x_min.is_finite() {
        (x_min, x_max) = (0.0, 1.0);
    }
    if x_max == x_min {
        (x_min, x_max) = (x_min - 1.0, x_max + 1.0);
    }
    let sx = |x: f64| ml + (x - x_min) / (x_max - x_min) * pw;
    let sy = |y: f64| mt + ph - y / y_max as f64 * ph;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, ml + pw / 2.0, escape(title));
    let _ = writeln!(svg, r#"<line x1="{ml}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, mt + ph, ml + pw, mt + ph);
    let _ = writeln!(svg, r#"<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{}" stroke="black"/>"#, mt + ph);

    let mut ticks: Vec<f64> = series.iter().flat_map(|(_, p)| p.iter().map(|&(x, _)| x)).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for x in ticks {
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="middle">{x}</text>"#, sx(x), mt + ph + 18.0);
    }
    for k in 0..=4 {
        let v = y_max as f64 * k as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, ml - 6.0, sy(v) + 4.0, v.round());
        let _ = writeln!(svg, r##"<line x1="{ml}" y1="{0:.1}" x2="{1}" y2="{0:.1}" stroke="#ddd"/>"##, sy(v), ml + pw);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">error bound (degrees)</text>"#, ml + pw / 2.0, height - 10.0);
    let _ = writeln!(svg, r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">inconsistencies</text>"#, mt + ph / 2.0);

    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y as f64))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, coords.join(" "));
        for &(x, y) in pts {
            let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, sx(x), sy(y as f64));
        }
        let ly = mt + 10.0 + 18.0 * i as f64;
        let _ = writeln!(svg, r#"<rect x="{}" y="{}" width="12" height="3" fill="{color}"/>"#, ml + pw + 14.0, ly - 4.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}">{}</text>"#, ml + pw + 32.0, escape(name));
    }
    svg.push_str("</svg>\n");
    svg
}
