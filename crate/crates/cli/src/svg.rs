//! Static SVG renderings for planar configurations.

use std::fmt::Write;

use rotset_core::{RotationSetEstimate, Vector};

const SCALE: f64 = 200.0;

fn header(out: &mut String, half: f64, manifest: &str) {
    let size = 2.0 * half * SCALE;
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0}" height="{size:.0}" viewBox="{:.3} {:.3} {size:.3} {size:.3}">"#,
        -half * SCALE,
        -half * SCALE
    )
    .unwrap();
    // The manifest goes in a comment; "--" is not allowed inside one.
    writeln!(out, "<!-- manifest {} -->", manifest.replace("--", "- -")).unwrap();
    writeln!(out, r#"<rect x="{0:.3}" y="{0:.3}" width="{1:.3}" height="{1:.3}" fill="white"/>"#, -half * SCALE, size).unwrap();
}

/// Screen coordinates: y grows downward.
fn p(x: f64, y: f64) -> (f64, f64) {
    (x * SCALE, -y * SCALE)
}

fn circle(out: &mut String, cx: f64, cy: f64, r: f64, stroke: &str, dash: bool, label: &str) {
    let (x, y) = p(cx, cy);
    let dash = if dash { r#" stroke-dasharray="4 3""# } else { "" };
    writeln!(
        out,
        r#"<circle cx="{x:.3}" cy="{y:.3}" r="{:.3}" fill="none" stroke="{stroke}" stroke-width="1"{dash}><title>{label}</title></circle>"#,
        r * SCALE
    )
    .unwrap();
}

/// Hull polygon of the rotation vectors, the points, and the bound circles.
pub fn hull_svg(est: &RotationSetEstimate, manifest: &str) -> String {
    let mut out = String::new();
    header(&mut out, 1.15, manifest);
    circle(&mut out, 0.0, 0.0, 1.0, "#999999", false, "unit circle");
    if let Some(s) = &est.st15 {
        circle(&mut out, 0.0, 0.0, s.a, "#d62728", true, &format!("sampled upper bound a = {:.6}", s.a));
    }
    circle(&mut out, 0.0, 0.0, est.bounds.dim_bound, "#2ca02c", true, "dimension bound");
    circle(&mut out, 0.0, 0.0, est.bounds.st10, "#9467bd", true, "radius bound");
    if let Some(b) = est.bounds.st13 {
        circle(&mut out, 0.0, 0.0, b, "#8c564b", true, "angle bound");
    }
    circle(
        &mut out,
        0.0,
        0.0,
        est.inscribed_radius,
        "#1f77b4",
        false,
        &format!("inscribed radius {:.6}", est.inscribed_radius),
    );
    // 2D hull facets come in counterclockwise order; chain their first vertices.
    let mut poly = String::new();
    for i in est.hull_facets.iter().map(|f| f.points[0]) {
        let v = &est.points[i].rotation_vector;
        let (x, y) = p(v[0], v[1]);
        write!(poly, "{x:.3},{y:.3} ").unwrap();
    }
    writeln!(
        out,
        r##"<polygon points="{}" fill="#1f77b4" fill-opacity="0.12" stroke="#1f77b4" stroke-width="1.5"/>"##,
        poly.trim_end()
    )
    .unwrap();
    for pt in &est.points {
        let (x, y) = p(pt.rotation_vector[0], pt.rotation_vector[1]);
        writeln!(out, r#"<circle cx="{x:.3}" cy="{y:.3}" r="1.5" fill="black"/>"#).unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Folded periodic orbit in the fundamental square with its winding.
pub fn square_svg(pieces: &[(Vector, Vector)], center: &[f64], radius: f64, caption: &str, manifest: &str) -> String {
    let mut out = String::new();
    header(&mut out, 0.6, manifest);
    let (x0, y0) = p(-0.5, 0.5);
    writeln!(
        out,
        r#"<rect x="{x0:.3}" y="{y0:.3}" width="{0:.3}" height="{0:.3}" fill="none" stroke="black" stroke-width="1.5"/>"#,
        SCALE
    )
    .unwrap();
    let (cx, cy) = p(center[0], center[1]);
    writeln!(
        out,
        r##"<circle cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="#cccccc" stroke="black"/>"##,
        radius * SCALE
    )
    .unwrap();
    for (a, b) in pieces {
        let (ax, ay) = p(a[0], a[1]);
        let (bx, by) = p(b[0], b[1]);
        writeln!(
            out,
            r##"<line x1="{ax:.3}" y1="{ay:.3}" x2="{bx:.3}" y2="{by:.3}" stroke="#d62728" stroke-width="1"/>"##
        )
        .unwrap();
    }
    let (tx, ty) = p(-0.55, -0.56);
    writeln!(out, r#"<text x="{tx:.3}" y="{ty:.3}" font-size="12" font-family="monospace">{caption}</text>"#).unwrap();
    out.push_str("</svg>\n");
    out
}
