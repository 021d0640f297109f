//! Local finite element bases on triangles, segments and points.
//!
//! Every element is defined by its degrees of freedom (point values, normal
//! components or normal fluxes against globally oriented edges). The nodal
//! basis on a physical cell is obtained by inverting the generalized
//! Vandermonde matrix of those functionals on a spanning set, so Piola maps and
//! global orientation signs are built in.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;

use crate::geometry::Point2;
use crate::mesh::SimplicialMesh;

/// Concrete element realized on a cell of a given dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementKind {
    /// Continuous Lagrange of the given order (0-forms).
    Lagrange(u8),
    /// Lowest-order Raviart-Thomas (reduced H(div) of order 1).
    RaviartThomas,
    /// Lowest-order Brezzi-Douglas-Marini (full H(div) of order 1).
    Bdm,
    /// Discontinuous polynomials of the given degree (top-degree forms).
    Disc(u8),
    /// A single scalar on a point.
    Point,
}

impl ElementKind {
    /// Number of DOFs of the global block on `mesh`.
    pub fn block_len(&self, mesh: &SimplicialMesh) -> usize {
        let nv = mesh.num_vertices();
        let nc = mesh.num_cells();
        let nf = mesh.num_facets();
        match (self, mesh.dim) {
            (ElementKind::Point, _) => 1,
            (ElementKind::Lagrange(1), _) => nv,
            (ElementKind::Lagrange(2), 2) => nv + nf,
            (ElementKind::Lagrange(2), 1) => nv + nc,
            (ElementKind::RaviartThomas, 2) => nf,
            (ElementKind::Bdm, 2) => 2 * nf,
            (ElementKind::Disc(p), 2) => nc * (*p as usize + 1) * (*p as usize + 2) / 2,
            (ElementKind::Disc(p), 1) => nc * (*p as usize + 1),
            (kind, dim) => panic!("{kind:?} is not available on {dim}-dimensional meshes"),
        }
    }

    /// Polynomial degree of the basis functions.
    pub fn degree(&self) -> usize {
        match self {
            ElementKind::Lagrange(r) | ElementKind::Disc(r) => *r as usize,
            ElementKind::RaviartThomas | ElementKind::Bdm => 1,
            ElementKind::Point => 0,
        }
    }

    pub fn is_vector(&self) -> bool {
        matches!(self, ElementKind::RaviartThomas | ElementKind::Bdm)
    }
}

/// Polynomial of total degree at most two in scaled local coordinates.
///
/// Coefficients multiply `1, X, Y, X^2, XY, Y^2` where `X = (x - ox) / s`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Poly2 {
    pub c: [f64; 6],
}

impl Poly2 {
    fn monomial(k: usize) -> Self {
        let mut c = [0.0; 6];
        c[k] = 1.0;
        Poly2 { c }
    }

    fn eval_local(&self, x: f64, y: f64) -> f64 {
        let c = &self.c;
        c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
    }

    /// Physical partial derivatives, as polynomials in the same frame.
    fn dx(&self, s: f64) -> Poly2 {
        let c = &self.c;
        Poly2 {
            c: [c[1] / s, 2.0 * c[3] / s, c[4] / s, 0.0, 0.0, 0.0],
        }
    }

    fn dy(&self, s: f64) -> Poly2 {
        let c = &self.c;
        Poly2 {
            c: [c[2] / s, c[4] / s, 2.0 * c[5] / s, 0.0, 0.0, 0.0],
        }
    }

    fn axpy(&mut self, a: f64, other: &Poly2) {
        for k in 0..6 {
            self.c[k] += a * other.c[k];
        }
    }
}

/// Polynomial of degree at most two in the segment parameter `t` in [0, 1].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Poly1 {
    pub c: [f64; 3],
}

impl Poly1 {
    fn eval(&self, t: f64) -> f64 {
        self.c[0] + self.c[1] * t + self.c[2] * t * t
    }

    /// Arc-length derivative for a segment of length `len`.
    fn dt(&self, len: f64) -> Poly1 {
        Poly1 {
            c: [self.c[1] / len, 2.0 * self.c[2] / len, 0.0],
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Frame {
    origin: Point2,
    scale: f64,
}

impl Frame {
    fn local(&self, p: Point2) -> (f64, f64) {
        (
            (p[0] - self.origin[0]) / self.scale,
            (p[1] - self.origin[1]) / self.scale,
        )
    }
}

#[derive(Clone, Debug)]
enum Shapes {
    Scalar2(Vec<Poly2>),
    Vector2(Vec<[Poly2; 2]>),
    Scalar1(Vec<Poly1>),
    Point,
}

/// DOF functional on a cell.
#[derive(Clone, Copy, Debug)]
enum Functional {
    Value(Point2),
    NormalValue(Point2, Point2),
    /// Integral of `u . n` along the segment `a -> b`.
    NormalFlux(Point2, Point2, Point2),
}

/// Nodal basis of one element on one physical cell.
#[derive(Clone, Debug)]
pub struct LocalBasis {
    /// Block-local DOF index of each basis function.
    pub dofs: Vec<usize>,
    frame: Frame,
    /// Segment geometry (start point, direction, length) for 1D cells.
    seg: Option<(Point2, Point2, f64)>,
    shapes: Shapes,
}

const GAUSS2: [(f64, f64); 2] = [(0.211_324_865_405_187_13, 0.5), (0.788_675_134_594_812_9, 0.5)];

impl LocalBasis {
    /// Builds the basis of `kind` on cell `c` of `mesh`.
    pub fn new(kind: ElementKind, mesh: &SimplicialMesh, c: usize) -> Self {
        let pts = mesh.cell_points(c);
        let verts = mesh.cell(c);
        match mesh.dim {
            2 => Self::triangle(kind, mesh, c, &pts),
            1 => Self::segment(kind, mesh, c, &pts, verts),
            _ => LocalBasis {
                dofs: vec![0],
                frame: Frame {
                    origin: pts[0],
                    scale: 1.0,
                },
                seg: None,
                shapes: Shapes::Point,
            },
        }
    }

    fn triangle(kind: ElementKind, mesh: &SimplicialMesh, c: usize, pts: &[Point2]) -> Self {
        let scale = (0..3)
            .map(|i| {
                let (a, b) = (pts[i], pts[(i + 1) % 3]);
                (a[0] - b[0]).hypot(a[1] - b[1])
            })
            .fold(0.0, f64::max);
        let frame = Frame { origin: pts[0], scale };
        let (dofs, funcs): (Vec<usize>, Vec<Functional>) = dof_functionals(kind, mesh, c).into_iter().unzip();
        let shapes = match kind {
            ElementKind::RaviartThomas => {
                let zero = Poly2::default();
                let span = vec![
                    [Poly2::monomial(0), zero],
                    [zero, Poly2::monomial(0)],
                    [Poly2::monomial(1), Poly2::monomial(2)],
                ];
                Shapes::Vector2(invert_vector(&span, &funcs, frame))
            }
            ElementKind::Bdm => {
                let zero = Poly2::default();
                let mut span = Vec::with_capacity(6);
                for k in 0..3 {
                    span.push([Poly2::monomial(k), zero]);
                }
                for k in 0..3 {
                    span.push([zero, Poly2::monomial(k)]);
                }
                Shapes::Vector2(invert_vector(&span, &funcs, frame))
            }
            _ => {
                let count = match kind.degree() {
                    0 => 1,
                    1 => 3,
                    _ => 6,
                };
                let span: Vec<Poly2> = (0..count).map(Poly2::monomial).collect();
                Shapes::Scalar2(invert_scalar(&span, &funcs, frame))
            }
        };
        LocalBasis {
            dofs,
            frame,
            seg: None,
            shapes,
        }
    }

    fn segment(kind: ElementKind, mesh: &SimplicialMesh, c: usize, pts: &[Point2], verts: &[usize]) -> Self {
        let (a, b) = (pts[0], pts[1]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let dir = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        let mut dofs = Vec::new();
        let mut nodes: Vec<f64> = Vec::new();
        match kind {
            ElementKind::Lagrange(r) => {
                dofs.extend_from_slice(&[verts[0], verts[1]]);
                nodes.extend_from_slice(&[0.0, 1.0]);
                if r == 2 {
                    dofs.push(mesh.num_vertices() + c);
                    nodes.push(0.5);
                }
            }
            ElementKind::Disc(0) => {
                dofs.push(c);
                nodes.push(0.5);
            }
            ElementKind::Disc(1) => {
                dofs.extend_from_slice(&[2 * c, 2 * c + 1]);
                nodes.extend_from_slice(&[0.0, 1.0]);
            }
            other => panic!("{other:?} is not available on segments"),
        }
        let n = nodes.len();
        let v = Mat::<f64>::from_fn(n, n, |i, j| nodes[i].powi(j as i32));
        let inv = v.partial_piv_lu().inverse();
        let shapes = (0..n)
            .map(|k| {
                let mut p = Poly1::default();
                for j in 0..n {
                    p.c[j] = inv[(j, k)];
                }
                p
            })
            .collect();
        LocalBasis {
            dofs,
            frame: Frame { origin: a, scale: len },
            seg: Some((a, dir, len)),
            shapes: Shapes::Scalar1(shapes),
        }
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    fn seg_param(&self, p: Point2) -> f64 {
        let (a, dir, len) = self.seg.expect("segment basis");
        ((p[0] - a[0]) * dir[0] + (p[1] - a[1]) * dir[1]) / len
    }

    /// Values of all scalar basis functions at `p`.
    pub fn scalar_values(&self, p: Point2) -> Vec<f64> {
        match &self.shapes {
            Shapes::Scalar2(s) => {
                let (x, y) = self.frame.local(p);
                s.iter().map(|q| q.eval_local(x, y)).collect()
            }
            Shapes::Scalar1(s) => {
                let t = self.seg_param(p);
                s.iter().map(|q| q.eval(t)).collect()
            }
            Shapes::Point => vec![1.0],
            Shapes::Vector2(_) => panic!("vector element has no scalar values"),
        }
    }

    /// Values of all vector basis functions at `p`.
    pub fn vector_values(&self, p: Point2) -> Vec<Point2> {
        match &self.shapes {
            Shapes::Vector2(s) => {
                let (x, y) = self.frame.local(p);
                s.iter()
                    .map(|q| [q[0].eval_local(x, y), q[1].eval_local(x, y)])
                    .collect()
            }
            _ => panic!("scalar element has no vector values"),
        }
    }

    /// Trace of every basis function onto a line with unit normal `n`:
    /// the value for scalars, the normal component for vector fields.
    pub fn trace_values(&self, p: Point2, n: Point2) -> Vec<f64> {
        match &self.shapes {
            Shapes::Vector2(_) => self
                .vector_values(p)
                .into_iter()
                .map(|u| u[0] * n[0] + u[1] * n[1])
                .collect(),
            _ => self.scalar_values(p),
        }
    }

    /// Exterior derivative of every basis function evaluated at `p`, in proxy form:
    /// the rotated gradient `(d/dy, -d/dx)` for planar 0-forms, the divergence for
    /// planar 1-forms, the arc-length derivative for 0-forms on segments.
    pub fn derivative_values(&self, p: Point2) -> Values {
        let s = self.frame.scale;
        match &self.shapes {
            Shapes::Scalar2(q) => {
                let (x, y) = self.frame.local(p);
                Values::Vector(
                    q.iter()
                        .map(|f| [f.dy(s).eval_local(x, y), -f.dx(s).eval_local(x, y)])
                        .collect(),
                )
            }
            Shapes::Vector2(q) => {
                let (x, y) = self.frame.local(p);
                Values::Scalar(
                    q.iter()
                        .map(|f| f[0].dx(s).eval_local(x, y) + f[1].dy(s).eval_local(x, y))
                        .collect(),
                )
            }
            Shapes::Scalar1(q) => {
                let t = self.seg_param(p);
                Values::Scalar(q.iter().map(|f| f.dt(s).eval(t)).collect())
            }
            Shapes::Point => Values::Scalar(vec![0.0]),
        }
    }

    /// Gradient (physical) of every scalar basis function on a triangle, or the
    /// arc-length derivative (as the first component) on a segment.
    pub fn gradients(&self, p: Point2) -> Vec<Point2> {
        let s = self.frame.scale;
        match &self.shapes {
            Shapes::Scalar2(q) => {
                let (x, y) = self.frame.local(p);
                q.iter()
                    .map(|f| [f.dx(s).eval_local(x, y), f.dy(s).eval_local(x, y)])
                    .collect()
            }
            Shapes::Scalar1(q) => {
                let t = self.seg_param(p);
                q.iter().map(|f| [f.dt(s).eval(t), 0.0]).collect()
            }
            Shapes::Point => vec![[0.0, 0.0]],
            Shapes::Vector2(_) => panic!("gradient of a vector element"),
        }
    }

    /// Applies this element's DOF functionals to a field given pointwise.
    ///
    /// `scalar` is used for point-value DOFs, `vector` for normal DOFs.
    pub fn interpolate_dofs(
        kind: ElementKind,
        mesh: &SimplicialMesh,
        c: usize,
        scalar: &dyn Fn(Point2) -> f64,
        vector: &dyn Fn(Point2) -> Point2,
    ) -> Vec<(usize, f64)> {
        dof_functionals(kind, mesh, c)
            .into_iter()
            .map(|(dof, f)| (dof, apply(f, scalar, vector)))
            .collect()
    }
}

/// Pointwise values of every function of a basis.
#[derive(Clone, Debug)]
pub enum Values {
    Scalar(Vec<f64>),
    Vector(Vec<Point2>),
}

fn centroid(pts: &[Point2]) -> Point2 {
    let n = pts.len() as f64;
    [
        pts.iter().map(|p| p[0]).sum::<f64>() / n,
        pts.iter().map(|p| p[1]).sum::<f64>() / n,
    ]
}

/// Applies the DOF functionals of `kind` on cell `c` to each of a family of
/// fields at once. Returns `(dof, value per field)` in basis order.
pub fn apply_functionals(
    kind: ElementKind,
    mesh: &SimplicialMesh,
    c: usize,
    field: &dyn Fn(Point2) -> Values,
) -> Vec<(usize, Vec<f64>)> {
    let dot = |v: Values, n: Point2| -> Vec<f64> {
        match v {
            Values::Vector(u) => u.iter().map(|u| u[0] * n[0] + u[1] * n[1]).collect(),
            Values::Scalar(_) => panic!("normal functional applied to scalar fields"),
        }
    };
    dof_functionals(kind, mesh, c)
        .into_iter()
        .map(|(dof, f)| {
            let vals = match f {
                Functional::Value(p) => match field(p) {
                    Values::Scalar(s) => s,
                    Values::Vector(_) => panic!("point-value functional applied to vector fields"),
                },
                Functional::NormalValue(p, n) => dot(field(p), n),
                Functional::NormalFlux(a, b, n) => {
                    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                    let mut acc: Vec<f64> = Vec::new();
                    for &(t, w) in GAUSS2.iter() {
                        let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                        let v = dot(field(p), n);
                        if acc.is_empty() {
                            acc = vec![0.0; v.len()];
                        }
                        for (s, x) in acc.iter_mut().zip(v) {
                            *s += w * len * x;
                        }
                    }
                    acc
                }
            };
            (dof, vals)
        })
        .collect()
}

/// DOF functionals `(dof, functional)` of `kind` on cell `c`, in basis order.
fn dof_functionals(kind: ElementKind, mesh: &SimplicialMesh, c: usize) -> Vec<(usize, Functional)> {
    let pts = mesh.cell_points(c);
    let verts = mesh.cell(c);
    match mesh.dim {
        2 => {
            let edges = mesh.cell_facets(c);
            let mut out = Vec::new();
            match kind {
                ElementKind::Lagrange(r) => {
                    for i in 0..3 {
                        out.push((verts[i], Functional::Value(pts[i])));
                    }
                    if r == 2 {
                        for i in 0..3 {
                            let (a, b) = (pts[(i + 1) % 3], pts[(i + 2) % 3]);
                            out.push((
                                mesh.num_vertices() + edges[i],
                                Functional::Value([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]),
                            ));
                        }
                    }
                }
                ElementKind::RaviartThomas | ElementKind::Bdm => {
                    for &e in edges {
                        let ev = mesh.facet(e);
                        let (a, b) = (mesh.vertices[ev[0]], mesh.vertices[ev[1]]);
                        let n = mesh.facet_normal(e);
                        if kind == ElementKind::RaviartThomas {
                            out.push((e, Functional::NormalFlux(a, b, n)));
                        } else {
                            out.push((2 * e, Functional::NormalValue(a, n)));
                            out.push((2 * e + 1, Functional::NormalValue(b, n)));
                        }
                    }
                }
                ElementKind::Disc(0) => out.push((c, Functional::Value(centroid(&pts)))),
                ElementKind::Disc(1) => {
                    for (i, &p) in pts.iter().enumerate() {
                        out.push((3 * c + i, Functional::Value(p)));
                    }
                }
                other => panic!("{other:?} is not available on triangles"),
            }
            out
        }
        1 => {
            let (a, b) = (pts[0], pts[1]);
            let at = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            match kind {
                ElementKind::Lagrange(r) => {
                    let mut out = vec![(verts[0], Functional::Value(a)), (verts[1], Functional::Value(b))];
                    if r == 2 {
                        out.push((mesh.num_vertices() + c, Functional::Value(at(0.5))));
                    }
                    out
                }
                ElementKind::Disc(0) => vec![(c, Functional::Value(at(0.5)))],
                ElementKind::Disc(1) => vec![(2 * c, Functional::Value(a)), (2 * c + 1, Functional::Value(b))],
                other => panic!("{other:?} is not available on segments"),
            }
        }
        _ => vec![(0, Functional::Value(pts[0]))],
    }
}

fn apply(f: Functional, scalar: &dyn Fn(Point2) -> f64, vector: &dyn Fn(Point2) -> Point2) -> f64 {
    match f {
        Functional::Value(p) => scalar(p),
        Functional::NormalValue(p, n) => {
            let u = vector(p);
            u[0] * n[0] + u[1] * n[1]
        }
        Functional::NormalFlux(a, b, n) => {
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            GAUSS2
                .iter()
                .map(|&(t, w)| {
                    let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                    let u = vector(p);
                    w * len * (u[0] * n[0] + u[1] * n[1])
                })
                .sum()
        }
    }
}

fn invert_scalar(span: &[Poly2], funcs: &[Functional], frame: Frame) -> Vec<Poly2> {
    let n = span.len();
    let v = Mat::<f64>::from_fn(n, n, |i, j| {
        let q = span[j];
        apply(
            funcs[i],
            &|p| {
                let (x, y) = frame.local(p);
                q.eval_local(x, y)
            },
            &|_| panic!("scalar element with a vector functional"),
        )
    });
    let inv = v.partial_piv_lu().inverse();
    (0..n)
        .map(|k| {
            let mut out = Poly2::default();
            for j in 0..n {
                out.axpy(inv[(j, k)], &span[j]);
            }
            out
        })
        .collect()
}

fn invert_vector(span: &[[Poly2; 2]], funcs: &[Functional], frame: Frame) -> Vec<[Poly2; 2]> {
    let n = span.len();
    let v = Mat::<f64>::from_fn(n, n, |i, j| {
        let q = span[j];
        apply(funcs[i], &|_| panic!("vector element with a scalar functional"), &|p| {
            let (x, y) = frame.local(p);
            [q[0].eval_local(x, y), q[1].eval_local(x, y)]
        })
    });
    let inv = v.partial_piv_lu().inverse();
    (0..n)
        .map(|k| {
            let mut out = [Poly2::default(), Poly2::default()];
            for j in 0..n {
                out[0].axpy(inv[(j, k)], &span[j][0]);
                out[1].axpy(inv[(j, k)], &span[j][1]);
            }
            out
        })
        .collect()
}

/// Quadrature points and weights (already multiplied by the cell measure).
pub fn quadrature(mesh: &SimplicialMesh, c: usize) -> Vec<(Point2, f64)> {
    let pts = mesh.cell_points(c);
    match mesh.dim {
        2 => {
            let area = mesh.cell_measure(c);
            TRI7.iter()
                .map(|&(l0, l1, w)| {
                    let l2 = 1.0 - l0 - l1;
                    (
                        [
                            l0 * pts[0][0] + l1 * pts[1][0] + l2 * pts[2][0],
                            l0 * pts[0][1] + l1 * pts[1][1] + l2 * pts[2][1],
                        ],
                        w * area,
                    )
                })
                .collect()
        }
        1 => segment_quadrature(pts[0], pts[1]),
        _ => vec![(pts[0], 1.0)],
    }
}

/// Three-point Gauss rule on a segment (exact to degree 5).
pub fn segment_quadrature(a: Point2, b: Point2) -> Vec<(Point2, f64)> {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let r = 0.5 * (0.6f64).sqrt();
    [(0.5 - r, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + r, 5.0 / 18.0)]
        .iter()
        .map(|&(t, w)| ([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], w * len))
        .collect()
}

/// Seven-point triangle rule exact to degree 5, as (lambda0, lambda1, weight).
const TRI7: [(f64, f64, f64); 7] = [
    (1.0 / 3.0, 1.0 / 3.0, 0.225),
    (
        0.059_715_871_789_769_82,
        0.470_142_064_105_115_1,
        0.132_394_152_788_506_2,
    ),
    (
        0.470_142_064_105_115_1,
        0.059_715_871_789_769_82,
        0.132_394_152_788_506_2,
    ),
    (
        0.470_142_064_105_115_1,
        0.470_142_064_105_115_1,
        0.132_394_152_788_506_2,
    ),
    (
        0.797_426_985_353_087_3,
        0.101_286_507_323_456_3,
        0.125_939_180_544_827_1,
    ),
    (
        0.101_286_507_323_456_3,
        0.797_426_985_353_087_3,
        0.125_939_180_544_827_1,
    ),
    (
        0.101_286_507_323_456_3,
        0.101_286_507_323_456_3,
        0.125_939_180_544_827_1,
    ),
];
