//! Pointwise evaluation and export of discrete solutions.

use std::fmt::Write as _;
use std::io::Write;

use crate::element::LocalBasis;
use crate::error::Result;
use crate::geometry::{Point2, Shape};
use crate::mesh::MixedMesh;
use crate::solver::Solution;

/// A solution together with the local bases of every cell, for repeated evaluation.
pub struct FieldEvaluator<'a> {
    pub mesh: &'a MixedMesh,
    pub solution: &'a Solution,
    pressure: Vec<Vec<LocalBasis>>,
    flux: Vec<Option<Vec<LocalBasis>>>,
}

impl<'a> FieldEvaluator<'a> {
    pub fn new(mesh: &'a MixedMesh, solution: &'a Solution) -> Result<Self> {
        let count = mesh.geometry.subdomains.len();
        let mut pressure = Vec::with_capacity(count);
        let mut flux = Vec::with_capacity(count);
        for i in 0..count {
            let m = mesh.mesh(i);
            let kind = solution.assignment.pressure_element(i)?;
            pressure.push((0..m.num_cells().max(1)).map(|c| LocalBasis::new(kind, m, c)).collect());
            let fk = solution.dof_map.flux.as_ref().and_then(|l| l.block(i)).map(|b| b.kind);
            flux.push(fk.map(|k| (0..m.num_cells()).map(|c| LocalBasis::new(k, m, c)).collect()));
        }
        Ok(FieldEvaluator {
            mesh,
            solution,
            pressure,
            flux,
        })
    }

    /// Pressure of subdomain `i` at `p`, a point of its cell `c`.
    pub fn cell_pressure(&self, i: usize, c: usize, p: Point2) -> f64 {
        let basis = &self.pressure[i][c];
        let coef = self.solution.pressure_block(i);
        basis
            .dofs
            .iter()
            .zip(basis.scalar_values(p))
            .map(|(&d, v)| coef[d] * v)
            .sum()
    }

    /// Flux of subdomain `i` at `p` in cell `c`: the vector field in the bulk,
    /// the integrated tangential flux `U` (first component) on fractures.
    pub fn cell_flux(&self, i: usize, c: usize, p: Point2) -> Option<Point2> {
        let basis = &self.flux[i].as_ref()?[c];
        let coef = self.solution.flux_block(i)?;
        if self.mesh.mesh(i).dim == 2 {
            let mut u = [0.0; 2];
            for (&d, v) in basis.dofs.iter().zip(basis.vector_values(p)) {
                u[0] += coef[d] * v[0];
                u[1] += coef[d] * v[1];
            }
            Some(u)
        } else {
            let u = basis
                .dofs
                .iter()
                .zip(basis.scalar_values(p))
                .map(|(&d, v)| coef[d] * v)
                .sum();
            Some([u, 0.0])
        }
    }

    pub fn pressure_at(&self, i: usize, p: Point2) -> Option<f64> {
        let c = self.locate(i, p)?;
        Some(self.cell_pressure(i, c, p))
    }

    pub fn flux_at(&self, i: usize, p: Point2) -> Option<Point2> {
        let c = self.locate(i, p)?;
        self.cell_flux(i, c, p)
    }

    fn locate(&self, i: usize, p: Point2) -> Option<usize> {
        let m = self.mesh.mesh(i);
        if m.dim == 0 {
            Some(0)
        } else {
            m.locate(p)
        }
    }
}

fn cell_centroid(points: &[Point2]) -> Point2 {
    let k = points.len() as f64;
    [
        points.iter().map(|p| p[0]).sum::<f64>() / k,
        points.iter().map(|p| p[1]).sum::<f64>() / k,
    ]
}

/// Writes `entity,x,y,pressure` for subdomain `i`, one line per cell
/// (evaluated at the centroid), or the single value of an intersection point.
pub fn write_pressure_csv(eval: &FieldEvaluator, i: usize, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "entity,x,y,pressure")?;
    let s = eval.mesh.geometry.subdomain(i);
    let m = eval.mesh.mesh(i);
    if s.dim == 0 {
        let p = m.vertices[0];
        return writeln!(out, "0,{},{},{:e}", p[0], p[1], eval.cell_pressure(i, 0, p));
    }
    for c in 0..m.num_cells() {
        let p = cell_centroid(&m.cell_points(c));
        writeln!(out, "{c},{},{},{:e}", p[0], p[1], eval.cell_pressure(i, c, p))?;
    }
    Ok(())
}

fn color(t: f64) -> String {
    // blue to red through white
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (s, s, 1.0)
    } else {
        let s = (1.0 - t) / 0.5;
        (1.0, s, s)
    };
    format!(
        "#{:02x}{:02x}{:02x}",
        (r * 255.0) as u8,
        (g * 255.0) as u8,
        (b * 255.0) as u8
    )
}

/// SVG heatmap of the bulk pressure with the fractures drawn on top, colored
/// by their own pressure.
pub fn pressure_svg(eval: &FieldEvaluator) -> String {
    let g = &eval.mesh.geometry;
    let (lo, hi) = g.bounds;
    let size = 480.0;
    let scale = size / (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let tx = |p: Point2| ((p[0] - lo[0]) * scale + 10.0, (hi[1] - p[1]) * scale + 10.0);
    let values = eval.solution.pressure();
    let pmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let pmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if pmax > pmin { pmax - pmin } else { 1.0 };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{w}\" viewBox=\"0 0 {w} {w}\">",
        w = size + 20.0
    );
    for s in &g.subdomains {
        let m = eval.mesh.mesh(s.id);
        match s.dim {
            2 => {
                for c in 0..m.num_cells() {
                    let pts = m.cell_points(c);
                    let v = eval.cell_pressure(s.id, c, cell_centroid(&pts));
                    let poly: Vec<String> = pts
                        .iter()
                        .map(|&p| {
                            let (x, y) = tx(p);
                            format!("{x:.2},{y:.2}")
                        })
                        .collect();
                    let _ = writeln!(
                        svg,
                        "<polygon points=\"{}\" fill=\"{c}\" stroke=\"{c}\" stroke-width=\"0.3\"/>",
                        poly.join(" "),
                        c = color((v - pmin) / span)
                    );
                }
            }
            1 => {
                for c in 0..m.num_cells() {
                    let pts = m.cell_points(c);
                    let v = eval.cell_pressure(s.id, c, cell_centroid(&pts));
                    let (x1, y1) = tx(pts[0]);
                    let (x2, y2) = tx(pts[1]);
                    let _ = writeln!(
                        svg,
                        "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{}\" stroke-width=\"4\"/>",
                        color((v - pmin) / span)
                    );
                }
            }
            _ => {
                let Shape::Point(p) = s.shape else { continue };
                let (x, y) = tx(p);
                let v = eval.cell_pressure(s.id, 0, p);
                let _ = writeln!(
                    svg,
                    "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"5\" fill=\"{}\" stroke=\"black\"/>",
                    color((v - pmin) / span)
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_cross_geometry;
    use crate::mesh::build_mesh;
    use crate::solver::{solve_method, ModelCoefficients};
    use crate::spaces::Method;

    #[test]
    fn evaluation_matches_coefficients_at_nodes() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let m = build_mesh(&g, 2).unwrap();
        let sol = solve_method(&m, &ModelCoefficients::benchmark(&g), Method::Primal).unwrap();
        let eval = FieldEvaluator::new(&m, &sol).unwrap();
        for i in [0, 5] {
            let mesh = m.mesh(i);
            for (v, p) in mesh.vertices.iter().zip(sol.pressure_block(i)) {
                assert!((eval.pressure_at(i, *v).unwrap() - p).abs() < 1e-13);
            }
        }
        assert_eq!(eval.pressure_at(8, [0.5, 0.5]).unwrap(), sol.pressure_block(8)[0]);
    }

    #[test]
    fn exports_cover_all_cells() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let m = build_mesh(&g, 2).unwrap();
        let sol = solve_method(&m, &ModelCoefficients::benchmark(&g), Method::Mixed1).unwrap();
        let eval = FieldEvaluator::new(&m, &sol).unwrap();
        for i in 0..9 {
            let mut buf = Vec::new();
            write_pressure_csv(&eval, i, &mut buf).unwrap();
            assert_eq!(
                String::from_utf8(buf).unwrap().lines().count(),
                m.mesh(i).num_cells() + 1
            );
        }
        let svg = pressure_svg(&eval);
        assert_eq!(svg.matches("<polygon").count(), 4 * m.mesh(0).num_cells());
        assert!(eval.flux_at(4, [0.5, 0.1]).is_some());
    }
}
