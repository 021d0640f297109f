//! Structured conforming simplicial meshes on every subdomain, with exact
//! facet-to-cell trace maps between neighboring dimensions.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Shape, StratifiedGeometry};

/// Coordinate matching tolerance; all mesh coordinates are dyadic rationals.
pub const MATCH_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Bottom,
    Top,
    Left,
    Right,
    /// Facet lying on the lower-dimensional subdomain with this id.
    Interface(usize),
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryTag::Bottom => f.write_str("bottom"),
            BoundaryTag::Top => f.write_str("top"),
            BoundaryTag::Left => f.write_str("left"),
            BoundaryTag::Right => f.write_str("right"),
            BoundaryTag::Interface(id) => write!(f, "interface:{id}"),
        }
    }
}

impl BoundaryTag {
    pub fn is_outer(&self) -> bool {
        !matches!(self, BoundaryTag::Interface(_))
    }
}

/// Diagonal direction of the structured split of each grid square.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Diagonal {
    /// Lower-left to upper-right.
    Rising,
    /// Lower-right to upper-left.
    Falling,
}

#[derive(Clone, Debug)]
enum Layout {
    Grid {
        origin: Point2,
        h: f64,
        nx: usize,
        ny: usize,
        diagonal: Diagonal,
    },
    Line {
        from: Point2,
        to: Point2,
        cells: usize,
    },
    Point,
}

/// Conforming simplicial mesh of one subdomain.
///
/// Facets are the (d-1)-subsimplices: edges of a triangle mesh (stored with
/// increasing vertex index, which fixes their global orientation) or vertices
/// of a segment mesh. Local facet `i` of a cell is opposite its local vertex `i`.
#[derive(Clone, Debug)]
pub struct SimplicialMesh {
    pub dim: usize,
    pub vertices: Vec<Point2>,
    cell_vertices: Vec<usize>,
    facet_vertices: Vec<usize>,
    cell_facets: Vec<usize>,
    facet_cells: Vec<(usize, Option<usize>)>,
    pub boundary_tags: Vec<Option<BoundaryTag>>,
    layout: Layout,
}

impl SimplicialMesh {
    pub fn num_cells(&self) -> usize {
        self.cell_vertices.len() / (self.dim + 1)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facet_cells.len()
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.cell_vertices[c * k..(c + 1) * k]
    }

    pub fn facet(&self, f: usize) -> &[usize] {
        let k = self.dim;
        &self.facet_vertices[f * k..(f + 1) * k]
    }

    pub fn cell_facets(&self, c: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.cell_facets[c * k..(c + 1) * k]
    }

    pub fn facet_cells(&self, f: usize) -> (usize, Option<usize>) {
        self.facet_cells[f]
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point2> {
        self.cell(c).iter().map(|&v| self.vertices[v]).collect()
    }

    /// Signed measure: area of a triangle, length of a segment, 1 for a point.
    pub fn cell_measure(&self, c: usize) -> f64 {
        let p = self.cell_points(c);
        match self.dim {
            2 => 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])),
            1 => (p[1][0] - p[0][0]).hypot(p[1][1] - p[0][1]),
            _ => 1.0,
        }
    }

    /// Unit normal of a triangle-mesh edge: its direction (low to high vertex)
    /// rotated clockwise.
    pub fn facet_normal(&self, f: usize) -> Point2 {
        let v = self.facet(f);
        let a = self.vertices[v[0]];
        let b = self.vertices[v[1]];
        let t = [b[0] - a[0], b[1] - a[1]];
        let len = t[0].hypot(t[1]);
        [t[1] / len, -t[0] / len]
    }

    pub fn find_vertex(&self, p: Point2) -> Option<usize> {
        self.vertices
            .iter()
            .position(|q| (q[0] - p[0]).abs() <= MATCH_TOL && (q[1] - p[1]).abs() <= MATCH_TOL)
    }

    /// Cell containing `p` (a closed-cell search, ties broken deterministically).
    pub fn locate(&self, p: Point2) -> Option<usize> {
        match self.layout {
            Layout::Grid {
                origin,
                h,
                nx,
                ny,
                diagonal,
            } => {
                let u = (p[0] - origin[0]) / h;
                let v = (p[1] - origin[1]) / h;
                if u < -MATCH_TOL || v < -MATCH_TOL || u > nx as f64 + MATCH_TOL || v > ny as f64 + MATCH_TOL {
                    return None;
                }
                let i = (u.floor().max(0.0) as usize).min(nx - 1);
                let j = (v.floor().max(0.0) as usize).min(ny - 1);
                let du = u - i as f64;
                let dv = v - j as f64;
                let upper = match diagonal {
                    Diagonal::Rising => dv > du,
                    Diagonal::Falling => du + dv > 1.0,
                };
                Some(2 * (j * nx + i) + upper as usize)
            }
            Layout::Line { from, to, cells } => {
                let d = [to[0] - from[0], to[1] - from[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                let t = ((p[0] - from[0]) * d[0] + (p[1] - from[1]) * d[1]) / len2;
                if !(-MATCH_TOL..=1.0 + MATCH_TOL).contains(&t) {
                    return None;
                }
                Some(((t * cells as f64).floor().max(0.0) as usize).min(cells - 1))
            }
            Layout::Point => Some(0),
        }
    }

    /// Facets carrying an outer-boundary tag (not interfaces).
    pub fn outer_facets(&self) -> impl Iterator<Item = (usize, BoundaryTag)> + '_ {
        self.boundary_tags
            .iter()
            .enumerate()
            .filter_map(|(f, t)| t.filter(|t| t.is_outer()).map(|t| (f, t)))
    }

    fn grid(origin: Point2, h: f64, nx: usize, ny: usize, diagonal: Diagonal) -> Self {
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([origin[0] + i as f64 * h, origin[1] + j as f64 * h]);
            }
        }
        let mut cells = Vec::with_capacity(6 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
                match diagonal {
                    Diagonal::Rising => cells.extend_from_slice(&[v00, v10, v11, v00, v11, v01]),
                    Diagonal::Falling => cells.extend_from_slice(&[v00, v10, v01, v10, v11, v01]),
                }
            }
        }
        let mut mesh = SimplicialMesh {
            dim: 2,
            vertices,
            cell_vertices: cells,
            facet_vertices: Vec::new(),
            cell_facets: Vec::new(),
            facet_cells: Vec::new(),
            boundary_tags: Vec::new(),
            layout: Layout::Grid {
                origin,
                h,
                nx,
                ny,
                diagonal,
            },
        };
        mesh.build_edges();
        mesh
    }

    fn build_edges(&mut self) {
        use std::collections::HashMap;
        let ncells = self.num_cells();
        let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * ncells / 2 + 16);
        let mut cell_facets = Vec::with_capacity(3 * ncells);
        for c in 0..ncells {
            let v = [
                self.cell_vertices[3 * c],
                self.cell_vertices[3 * c + 1],
                self.cell_vertices[3 * c + 2],
            ];
            for local in 0..3 {
                let a = v[(local + 1) % 3];
                let b = v[(local + 2) % 3];
                let key = (a.min(b), a.max(b));
                let f = *index.entry(key).or_insert_with(|| {
                    self.facet_vertices.extend_from_slice(&[key.0, key.1]);
                    self.facet_cells.push((c, None));
                    self.facet_cells.len() - 1
                });
                if self.facet_cells[f].0 != c {
                    self.facet_cells[f].1 = Some(c);
                }
                cell_facets.push(f);
            }
        }
        self.cell_facets = cell_facets;
        self.boundary_tags = vec![None; self.facet_cells.len()];
    }

    fn line(from: Point2, to: Point2, cells: usize) -> Self {
        let vertices: Vec<Point2> = (0..=cells)
            .map(|k| {
                let t = k as f64 / cells as f64;
                [from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])]
            })
            .collect();
        let mut cell_vertices = Vec::with_capacity(2 * cells);
        let mut cell_facets = Vec::with_capacity(2 * cells);
        for k in 0..cells {
            cell_vertices.extend_from_slice(&[k, k + 1]);
            // facet opposite local vertex 0 is vertex k+1
            cell_facets.extend_from_slice(&[k + 1, k]);
        }
        let facet_cells = (0..=cells)
            .map(|k| match k {
                0 => (0, None),
                k if k == cells => (cells - 1, None),
                k => (k - 1, Some(k)),
            })
            .collect();
        SimplicialMesh {
            dim: 1,
            vertices,
            cell_vertices,
            facet_vertices: (0..=cells).collect(),
            cell_facets,
            facet_cells,
            boundary_tags: vec![None; cells + 1],
            layout: Layout::Line { from, to, cells },
        }
    }

    fn point(p: Point2) -> Self {
        SimplicialMesh {
            dim: 0,
            vertices: vec![p],
            cell_vertices: vec![0],
            facet_vertices: Vec::new(),
            cell_facets: Vec::new(),
            facet_cells: Vec::new(),
            boundary_tags: Vec::new(),
            layout: Layout::Point,
        }
    }
}

/// One matched pair between a facet of the upper mesh and a cell of the lower mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FacetPair {
    /// Facet index in the upper-dimensional mesh.
    pub facet: usize,
    /// Cell index in the lower-dimensional mesh.
    pub cell: usize,
    /// Relative orientation: for edges, sign of (edge normal . fracture normal);
    /// for fracture endpoints, +1 at the head of the branch.
    pub sign: i8,
    /// Edge low vertex coincides with the first vertex of the matched segment.
    pub aligned: bool,
}

/// Discrete trace from subdomain `upper` onto its boundary piece `lower`.
#[derive(Clone, Debug)]
pub struct TraceMap {
    pub upper: usize,
    pub lower: usize,
    pub pairs: Vec<FacetPair>,
}

#[derive(Clone, Debug)]
pub struct MixedMesh {
    pub geometry: StratifiedGeometry,
    pub meshes: Vec<SimplicialMesh>,
    pub traces: Vec<TraceMap>,
    pub level: u32,
}

impl MixedMesh {
    /// Characteristic mesh size `2^-level`.
    pub fn h(&self) -> f64 {
        (0.5f64).powi(self.level as i32)
    }

    pub fn mesh(&self, id: usize) -> &SimplicialMesh {
        &self.meshes[id]
    }

    pub fn trace(&self, upper: usize, lower: usize) -> Option<&TraceMap> {
        self.traces.iter().find(|t| t.upper == upper && t.lower == lower)
    }

    /// Traces arriving on subdomain `lower`.
    pub fn traces_onto(&self, lower: usize) -> impl Iterator<Item = &TraceMap> {
        self.traces.iter().filter(move |t| t.lower == lower)
    }

    /// Writes the plain-text `md-mesh v1` description.
    pub fn to_md_mesh(&self) -> String {
        let mut out = String::new();
        writeln!(out, "md-mesh v1").unwrap();
        writeln!(out, "level {}", self.level).unwrap();
        writeln!(out, "subdomains {}", self.meshes.len()).unwrap();
        for (id, m) in self.meshes.iter().enumerate() {
            writeln!(out, "subdomain {id} dim {}", m.dim).unwrap();
            writeln!(out, "vertices {}", m.num_vertices()).unwrap();
            for v in &m.vertices {
                writeln!(out, "{:?} {:?}", v[0], v[1]).unwrap();
            }
            writeln!(out, "cells {}", m.num_cells()).unwrap();
            for c in 0..m.num_cells() {
                let line: Vec<String> = m.cell(c).iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", line.join(" ")).unwrap();
            }
            let tagged: Vec<(usize, BoundaryTag)> = m
                .boundary_tags
                .iter()
                .enumerate()
                .filter_map(|(f, t)| t.map(|t| (f, t)))
                .collect();
            writeln!(out, "tags {}", tagged.len()).unwrap();
            for (f, t) in tagged {
                let line: Vec<String> = m.facet(f).iter().map(|v| v.to_string()).collect();
                writeln!(out, "{} {t}", line.join(" ")).unwrap();
            }
            writeln!(out, "end").unwrap();
        }
        out
    }
}

fn grid_count(name: &'static str, extent: f64, level: u32) -> Result<usize> {
    let scaled = extent * (1u64 << level) as f64;
    let rounded = scaled.round();
    if (scaled - rounded).abs() > 1e-9 || rounded < 1.0 {
        return Err(Error::UnresolvableCoordinate {
            name,
            value: extent,
            level,
        });
    }
    Ok(rounded as usize)
}

fn check_resolvable(name: &'static str, value: f64, level: u32) -> Result<()> {
    let scaled = value * (1u64 << level) as f64;
    if (scaled - scaled.round()).abs() > 1e-9 {
        return Err(Error::UnresolvableCoordinate { name, value, level });
    }
    Ok(())
}

/// Builds the structured mixed mesh at refinement level `level` (h = 2^-level).
///
/// Each rectangle is split into squares of side h, each cut into two right
/// triangles. The diagonal runs through the rectangle corner touching an
/// intersection point, when there is one, so that meshes mirror across
/// fractures; otherwise it is rising.
pub fn build_mesh(geometry: &StratifiedGeometry, level: u32) -> Result<MixedMesh> {
    if level < 1 {
        return Err(Error::Mesh("refinement level must be at least 1".into()));
    }
    if geometry.n != 2 {
        return Err(Error::UnsupportedDimension(geometry.n));
    }
    let h = (0.5f64).powi(level as i32);
    let points: Vec<Point2> = geometry
        .subdomains
        .iter()
        .filter_map(|s| match s.shape {
            Shape::Point(p) => Some(p),
            _ => None,
        })
        .collect();

    let mut meshes = Vec::with_capacity(geometry.subdomains.len());
    for s in &geometry.subdomains {
        let mesh = match s.shape {
            Shape::Rect { min, max } => {
                for (name, v) in [("x", min[0]), ("y", min[1]), ("x", max[0]), ("y", max[1])] {
                    check_resolvable(name, v, level)?;
                }
                let nx = grid_count("x", max[0] - min[0], level)?;
                let ny = grid_count("y", max[1] - min[1], level)?;
                let at = |p: Point2, q: Point2| (p[0] - q[0]).abs() <= MATCH_TOL && (p[1] - q[1]).abs() <= MATCH_TOL;
                let diagonal = if points
                    .iter()
                    .any(|&p| at(p, [max[0], min[1]]) || at(p, [min[0], max[1]]))
                {
                    Diagonal::Falling
                } else {
                    Diagonal::Rising
                };
                SimplicialMesh::grid(min, h, nx, ny, diagonal)
            }
            Shape::Segment { from, to } => {
                for (name, v) in [("x", from[0]), ("y", from[1]), ("x", to[0]), ("y", to[1])] {
                    check_resolvable(name, v, level)?;
                }
                let len = (to[0] - from[0]).hypot(to[1] - from[1]);
                let cells = grid_count(if (to[0] - from[0]).abs() > 0.0 { "x" } else { "y" }, len, level)?;
                SimplicialMesh::line(from, to, cells)
            }
            Shape::Point(p) => SimplicialMesh::point(p),
        };
        meshes.push(mesh);
    }

    tag_boundaries(geometry, &mut meshes)?;
    let traces = build_traces(geometry, &meshes)?;
    Ok(MixedMesh {
        geometry: geometry.clone(),
        meshes,
        traces,
        level,
    })
}

/// Uniform refinement: the structured mesh one level finer.
pub fn refine(mesh: &MixedMesh) -> Result<MixedMesh> {
    build_mesh(&mesh.geometry, mesh.level + 1)
}

fn outer_tag(p: Point2, q: Point2, bounds: (Point2, Point2)) -> Option<BoundaryTag> {
    let (lo, hi) = bounds;
    let both = |f: &dyn Fn(Point2) -> bool| f(p) && f(q);
    if both(&|a| (a[1] - lo[1]).abs() <= MATCH_TOL) {
        Some(BoundaryTag::Bottom)
    } else if both(&|a| (a[1] - hi[1]).abs() <= MATCH_TOL) {
        Some(BoundaryTag::Top)
    } else if both(&|a| (a[0] - lo[0]).abs() <= MATCH_TOL) {
        Some(BoundaryTag::Left)
    } else if both(&|a| (a[0] - hi[0]).abs() <= MATCH_TOL) {
        Some(BoundaryTag::Right)
    } else {
        None
    }
}

fn on_segment(p: Point2, from: Point2, to: Point2) -> bool {
    let d = [to[0] - from[0], to[1] - from[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = ((p[0] - from[0]) * d[0] + (p[1] - from[1]) * d[1]) / len2;
    let proj = [from[0] + t * d[0], from[1] + t * d[1]];
    (-MATCH_TOL..=1.0 + MATCH_TOL).contains(&t)
        && (proj[0] - p[0]).abs() <= MATCH_TOL
        && (proj[1] - p[1]).abs() <= MATCH_TOL
}

fn tag_boundaries(geometry: &StratifiedGeometry, meshes: &mut [SimplicialMesh]) -> Result<()> {
    for s in &geometry.subdomains {
        let id = s.id;
        match s.dim {
            2 => {
                let downs = &geometry.down_neighbors[id];
                let m = &mut meshes[id];
                for f in 0..m.num_facets() {
                    if m.facet_cells[f].1.is_some() {
                        continue;
                    }
                    let a = m.vertices[m.facet_vertices[2 * f]];
                    let b = m.vertices[m.facet_vertices[2 * f + 1]];
                    let on_fracture = downs.iter().copied().find(|&j| match geometry.subdomains[j].shape {
                        Shape::Segment { from, to } => on_segment(a, from, to) && on_segment(b, from, to),
                        _ => false,
                    });
                    let tag = match on_fracture {
                        Some(j) => BoundaryTag::Interface(j),
                        None => outer_tag(a, b, geometry.bounds).ok_or_else(|| {
                            Error::Mesh(format!(
                                "subdomain {id}: boundary edge {a:?}-{b:?} is neither on the outer boundary nor on a fracture"
                            ))
                        })?,
                    };
                    m.boundary_tags[f] = Some(tag);
                }
            }
            1 => {
                let downs = geometry.down_neighbors[id].clone();
                let m = &mut meshes[id];
                let last = m.num_vertices() - 1;
                for v in [0, last] {
                    let p = m.vertices[v];
                    let at_point = downs.iter().copied().find(|&j| match geometry.subdomains[j].shape {
                        Shape::Point(q) => (p[0] - q[0]).abs() <= MATCH_TOL && (p[1] - q[1]).abs() <= MATCH_TOL,
                        _ => false,
                    });
                    let tag = match at_point {
                        Some(j) => BoundaryTag::Interface(j),
                        None => outer_tag(p, p, geometry.bounds).ok_or_else(|| {
                            Error::Mesh(format!("subdomain {id}: fracture tip {p:?} is immersed in the bulk"))
                        })?,
                    };
                    m.boundary_tags[v] = Some(tag);
                }
            }
            _ => {}
        }
    }
    Ok(())
}

fn build_traces(geometry: &StratifiedGeometry, meshes: &[SimplicialMesh]) -> Result<Vec<TraceMap>> {
    let mut traces = Vec::new();
    for lower in &geometry.subdomains {
        for &upper in &geometry.up_neighbors[lower.id] {
            let um = &meshes[upper];
            let lm = &meshes[lower.id];
            let mut pairs = Vec::new();
            match lower.dim {
                1 => {
                    let fracture_normal = lower.normal().expect("segment has a normal");
                    for f in 0..um.num_facets() {
                        if um.boundary_tags[f] != Some(BoundaryTag::Interface(lower.id)) {
                            continue;
                        }
                        let fv = um.facet(f);
                        let (a, b) = (um.vertices[fv[0]], um.vertices[fv[1]]);
                        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                        let cell = lm
                            .locate(mid)
                            .ok_or_else(|| Error::Mesh(format!("no fracture cell under edge at {mid:?}")))?;
                        let cv = lm.cell(cell);
                        let (p, q) = (lm.vertices[cv[0]], lm.vertices[cv[1]]);
                        let same =
                            |x: Point2, y: Point2| (x[0] - y[0]).abs() <= MATCH_TOL && (x[1] - y[1]).abs() <= MATCH_TOL;
                        let aligned = if same(a, p) && same(b, q) {
                            true
                        } else if same(a, q) && same(b, p) {
                            false
                        } else {
                            return Err(Error::Mesh(format!(
                                "nonconforming interface between subdomains {upper} and {}",
                                lower.id
                            )));
                        };
                        let n = um.facet_normal(f);
                        let dot = n[0] * fracture_normal[0] + n[1] * fracture_normal[1];
                        pairs.push(FacetPair {
                            facet: f,
                            cell,
                            sign: if dot > 0.0 { 1 } else { -1 },
                            aligned,
                        });
                    }
                }
                0 => {
                    let p = lm.vertices[0];
                    let v = um
                        .find_vertex(p)
                        .ok_or_else(|| Error::Mesh(format!("fracture {upper} has no vertex at {p:?}")))?;
                    let sign = geometry.orientation(lower.id, upper).unwrap_or(1);
                    pairs.push(FacetPair {
                        facet: v,
                        cell: 0,
                        sign,
                        aligned: true,
                    });
                }
                _ => {}
            }
            if pairs.len() != lm.num_cells() {
                return Err(Error::Mesh(format!(
                    "trace from {upper} onto {} matched {} facets for {} cells",
                    lower.id,
                    pairs.len(),
                    lm.num_cells()
                )));
            }
            pairs.sort_by_key(|p| p.cell);
            traces.push(TraceMap {
                upper,
                lower: lower.id,
                pairs,
            });
        }
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_cross_geometry;

    #[test]
    fn cell_counts_level_two() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let m = build_mesh(&g, 2).unwrap();
        for q in 0..4 {
            // 0.5 x 0.5 quadrant at h = 1/4: 2 x 2 squares
            assert_eq!(m.mesh(q).num_cells(), 8);
        }
        for f in 4..8 {
            assert_eq!(m.mesh(f).num_cells(), 2);
        }
        assert_eq!(m.mesh(8).num_cells(), 1);
    }

    #[test]
    fn cell_counts_level_one() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let m = build_mesh(&g, 1).unwrap();
        for q in 0..4 {
            assert_eq!(m.mesh(q).num_cells(), 2);
        }
        for f in 4..8 {
            assert_eq!(m.mesh(f).num_cells(), 1);
        }
    }

    #[test]
    fn unresolvable_fracture_position() {
        let g = build_cross_geometry(0.3, 0.5, 1e-3).unwrap();
        match build_mesh(&g, 2) {
            Err(Error::UnresolvableCoordinate { name, value, .. }) => {
                assert_eq!(name, "x");
                assert!((value - 0.3).abs() < 1e-12 || (value - 0.7).abs() < 1e-12);
            }
            other => panic!("expected an unresolvable coordinate, got {other:?}"),
        }
    }

    #[test]
    fn cells_positive_and_facets_shared() {
        let g = build_cross_geometry(0.25, 0.75, 1e-3).unwrap();
        let m = build_mesh(&g, 3).unwrap();
        for mesh in &m.meshes {
            for c in 0..mesh.num_cells() {
                assert!(mesh.cell_measure(c) > 0.0);
            }
            for f in 0..mesh.num_facets() {
                let (_, second) = mesh.facet_cells(f);
                assert_eq!(second.is_none(), mesh.boundary_tags[f].is_some());
            }
        }
    }

    #[test]
    fn trace_multiplicities() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let m = build_mesh(&g, 3).unwrap();
        for f in 4..8 {
            assert_eq!(m.traces_onto(f).count(), 2);
            for t in m.traces_onto(f) {
                let mut cells: Vec<usize> = t.pairs.iter().map(|p| p.cell).collect();
                cells.dedup();
                assert_eq!(cells.len(), m.mesh(f).num_cells());
            }
        }
        assert_eq!(m.traces_onto(8).count(), 4);
    }

    #[test]
    fn traced_entities_coincide() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let m = build_mesh(&g, 2).unwrap();
        for t in &m.traces {
            let um = m.mesh(t.upper);
            let lm = m.mesh(t.lower);
            for p in &t.pairs {
                if lm.dim == 1 {
                    let fv = um.facet(p.facet);
                    let cv = lm.cell(p.cell);
                    let (a, b) = if p.aligned { (cv[0], cv[1]) } else { (cv[1], cv[0]) };
                    for (x, y) in [(fv[0], a), (fv[1], b)] {
                        let (u, v) = (um.vertices[x], lm.vertices[y]);
                        assert!((u[0] - v[0]).abs() <= MATCH_TOL && (u[1] - v[1]).abs() <= MATCH_TOL);
                    }
                } else {
                    assert_eq!(um.vertices[p.facet], lm.vertices[0]);
                }
            }
        }
    }

    #[test]
    fn refinement_is_nested() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let coarse = build_mesh(&g, 2).unwrap();
        let fine = refine(&coarse).unwrap();
        let direct = build_mesh(&g, 3).unwrap();
        for id in 0..g.subdomains.len() {
            let (a, b, c) = (coarse.mesh(id), fine.mesh(id), direct.mesh(id));
            assert_eq!(b.vertices, c.vertices);
            match a.dim {
                2 => assert_eq!(b.num_cells(), 4 * a.num_cells()),
                1 => assert_eq!(b.num_cells(), 2 * a.num_cells()),
                _ => {}
            }
            for v in &a.vertices {
                assert!(b.find_vertex(*v).is_some());
            }
        }
    }

    #[test]
    fn locate_finds_containing_cell() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let m = build_mesh(&g, 3).unwrap();
        for id in 0..4 {
            let mesh = m.mesh(id);
            for c in 0..mesh.num_cells() {
                let p = mesh.cell_points(c);
                let centroid = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
                assert_eq!(mesh.locate(centroid), Some(c));
            }
        }
    }

    #[test]
    fn md_mesh_header() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let m = build_mesh(&g, 1).unwrap();
        let text = m.to_md_mesh();
        assert!(text.starts_with("md-mesh v1\n"));
        assert_eq!(text.matches("subdomain ").count(), 9);
        assert!(text.contains("interface:8"));
    }
}
