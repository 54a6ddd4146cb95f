//! Static SVG (n = 2) and OBJ (n = 3) renderings of a solution.

use std::f64::consts::PI;
use std::fmt::Write;

use anyhow::{bail, Context, Result};
use gip_core::oracles::arc_cells;
use gip_core::DualPolytope;

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn angle(p: &[f64]) -> f64 {
    p[1].atan2(p[0]).rem_euclid(2.0 * PI)
}

/// Points `β_i v_i` spanning the primal body `P`.
fn primal_points(p: &DualPolytope) -> Vec<Vec<f64>> {
    p.directions().iter().zip(p.alphas()).map(|(v, a)| v.coords().iter().map(|c| c / a).collect()).collect()
}

fn polygon(points: &[Vec<f64>], scale: f64, cx: f64, cy: f64) -> String {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| angle(a).total_cmp(&angle(b)));
    pts.iter().map(|q| format!("{:.4},{:.4}", cx + scale * q[0], cy - scale * q[1])).collect::<Vec<_>>().join(" ")
}

/// Two panels: `P*` with the atom directions and the Gauss-image cells drawn
/// as arcs around it, and `P`.
pub fn svg(p: &DualPolytope) -> Result<String> {
    if p.dim() != 2 {
        bail!("SVG export needs a planar solution (dimension 2)");
    }
    let polar = p.polar_vertices().context("could not enumerate the vertices of P*")?;
    let primal = primal_points(p);
    let reach = |pts: &[Vec<f64>]| pts.iter().map(|q| dot(q, q).sqrt()).fold(0.0, f64::max);
    let (half, ring) = (200.0, 185.0);
    let s_polar = 160.0 / reach(&polar);
    let s_primal = 180.0 / reach(&primal);
    let cells = arc_cells(p)?;

    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="400" viewBox="0 0 800 400">"#)?;
    writeln!(out, r##"<rect width="800" height="400" fill="#ffffff"/>"##)?;
    writeln!(out, r#"<g id="polar-body">"#)?;
    for (i, cell) in cells.cells.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for &(a, b) in cell {
            let steps = ((b - a) / (PI / 180.0)).ceil().max(1.0) as usize;
            let pts: Vec<String> = (0..=steps)
                .map(|k| {
                    let t = a + (b - a) * k as f64 / steps as f64;
                    format!("{:.4},{:.4}", half + ring * t.cos(), half - ring * t.sin())
                })
                .collect();
            writeln!(out, r#"<polyline class="cell" data-atom="{i}" points="{}" fill="none" stroke="{color}" stroke-width="6"/>"#, pts.join(" "))?;
        }
    }
    writeln!(out, r##"<polygon points="{}" fill="#dde6f0" stroke="#203040" stroke-width="1.5"/>"##, polygon(&polar, s_polar, half, half))?;
    for (i, v) in p.directions().iter().enumerate() {
        let c = v.coords();
        let color = PALETTE[i % PALETTE.len()];
        writeln!(
            out,
            r#"<line class="atom" x1="{half}" y1="{half}" x2="{:.4}" y2="{:.4}" stroke="{color}" stroke-width="1.5"/>"#,
            half + ring * c[0],
            half - ring * c[1]
        )?;
    }
    writeln!(out, "</g>")?;
    writeln!(out, r#"<g id="body">"#)?;
    writeln!(
        out,
        r##"<polygon points="{}" fill="#f0e6dd" stroke="#403020" stroke-width="1.5"/>"##,
        polygon(&primal, s_primal, 3.0 * half, half)
    )?;
    writeln!(out, "</g>")?;
    writeln!(out, "</svg>")?;
    Ok(out)
}

/// Vertex indices of one face, ordered counter-clockwise seen from outside.
fn order_face(vertices: &[Vec<f64>], face: &[usize], normal: &[f64]) -> Vec<usize> {
    let k = face.len() as f64;
    let centroid: Vec<f64> = (0..3).map(|c| face.iter().map(|&i| vertices[i][c]).sum::<f64>() / k).collect();
    let helper = if normal[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let cross = |a: &[f64], b: &[f64]| vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let e1 = cross(normal, &helper);
    let e2 = cross(normal, &e1);
    let mut out = face.to_vec();
    let theta = |i: usize| {
        let d: Vec<f64> = (0..3).map(|c| vertices[i][c] - centroid[c]).collect();
        dot(&d, &e2).atan2(dot(&d, &e1))
    };
    out.sort_by(|&a, &b| theta(a).total_cmp(&theta(b)));
    out
}

/// Faces of the polytope `{x : x·n_j ≤ h_j}` given its vertices.
fn faces(vertices: &[Vec<f64>], normals: &[Vec<f64>], offsets: &[f64]) -> Vec<Vec<usize>> {
    let scale = vertices.iter().map(|v| dot(v, v).sqrt()).fold(0.0, f64::max);
    normals
        .iter()
        .zip(offsets)
        .filter_map(|(n, &h)| {
            let on: Vec<usize> = (0..vertices.len()).filter(|&i| (dot(&vertices[i], n) - h).abs() <= 1e-9 * scale.max(h)).collect();
            (on.len() >= 3).then(|| order_face(vertices, &on, n))
        })
        .collect()
}

fn write_object(out: &mut String, name: &str, vertices: &[Vec<f64>], faces: &[Vec<usize>], offset: usize) -> Result<()> {
    writeln!(out, "o {name}")?;
    for v in vertices {
        writeln!(out, "v {} {} {}", v[0], v[1], v[2])?;
    }
    for f in faces {
        let idx: Vec<String> = f.iter().map(|i| (i + 1 + offset).to_string()).collect();
        writeln!(out, "f {}", idx.join(" "))?;
    }
    Ok(())
}

/// OBJ with two objects: `polar_body` (`P*`, facets `x·v_i = α_i`) and `body`
/// (`P`, the convex hull of `β_i v_i`, whose facets are dual to the vertices of `P*`).
pub fn obj(p: &DualPolytope) -> Result<String> {
    if p.dim() != 3 {
        bail!("OBJ export needs a spatial solution (dimension 3)");
    }
    let polar = p.polar_vertices().context("could not enumerate the vertices of P*")?;
    let normals: Vec<Vec<f64>> = p.directions().iter().map(|v| v.coords().to_vec()).collect();
    let polar_faces = faces(&polar, &normals, p.alphas());

    let points = primal_points(p);
    let keep: Vec<usize> = (0..points.len()).filter(|&i| on_hull(&points, i, &polar)).collect();
    let primal: Vec<Vec<f64>> = keep.iter().map(|&i| points[i].clone()).collect();
    let primal_normals: Vec<Vec<f64>> = polar
        .iter()
        .map(|w| {
            let n = dot(w, w).sqrt();
            w.iter().map(|c| c / n).collect()
        })
        .collect();
    let primal_offsets: Vec<f64> = polar.iter().map(|w| 1.0 / dot(w, w).sqrt()).collect();
    let primal_faces = faces(&primal, &primal_normals, &primal_offsets);

    let mut out = String::from("# P* = {x : x.v_i <= alpha_i} and P = conv(beta_i v_i)\n");
    write_object(&mut out, "polar_body", &polar, &polar_faces, 0)?;
    write_object(&mut out, "body", &primal, &primal_faces, polar.len())?;
    Ok(out)
}

/// `β_i v_i` lies on the boundary of `P` iff some vertex `w` of `P*` has `w·β_i v_i = 1`.
fn on_hull(points: &[Vec<f64>], i: usize, polar: &[Vec<f64>]) -> bool {
    polar.iter().any(|w| (dot(w, &points[i]) - 1.0).abs() <= 1e-9)
}
