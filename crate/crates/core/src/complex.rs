//! Mixed-dimensional cochains: jump, exterior derivative, trace-aware inner
//! product, codifferential, Helmholtz decomposition and cohomology.

use faer::prelude::*;
use faer::{Mat, Side};

use crate::dense;
use crate::element::{apply_functionals, quadrature, segment_quadrature, ElementKind, LocalBasis, Values};
use crate::error::{Error, Result};
use crate::geometry::{Point2, Shape};
use crate::mesh::MixedMesh;
use crate::spaces::{local_degree, require_compatible, DofLayout, SpaceAssignment};
use crate::sparse::{self, SetOnce, SparseMat, Triplets};

/// Boundary condition on the outer boundary of the embedding domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// No constraint.
    Natural,
    /// Vanishing traces on the outer boundary.
    Essential,
}

/// A mixed-dimensional k-form: one coefficient block per subdomain carrying
/// a degree-k component.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedCochain {
    pub k: usize,
    pub blocks: Vec<Option<Vec<f64>>>,
}

impl MixedCochain {
    pub fn zeros(layout: &DofLayout, k: usize) -> Self {
        MixedCochain {
            k,
            blocks: layout.blocks.iter().map(|b| b.map(|b| vec![0.0; b.len])).collect(),
        }
    }

    pub fn from_flat(layout: &DofLayout, k: usize, v: &[f64]) -> Self {
        assert_eq!(v.len(), layout.total);
        MixedCochain {
            k,
            blocks: layout
                .blocks
                .iter()
                .map(|b| b.map(|b| v[b.offset..b.offset + b.len].to_vec()))
                .collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks.iter().flatten().flatten().copied().collect()
    }

    pub fn block(&self, i: usize) -> Option<&[f64]> {
        self.blocks.get(i).and_then(|b| b.as_deref())
    }
}

fn kind_values(basis: &LocalBasis, kind: ElementKind, p: Point2) -> Values {
    if kind.is_vector() {
        Values::Vector(basis.vector_values(p))
    } else {
        Values::Scalar(basis.scalar_values(p))
    }
}

fn point_of(mesh: &MixedMesh, id: usize) -> Point2 {
    match mesh.geometry.subdomain(id).shape {
        Shape::Point(p) => p,
        _ => unreachable!("subdomain {id} is not a point"),
    }
}

fn check(mesh: &MixedMesh, assign: &SpaceAssignment) -> Result<()> {
    if assign.num_subdomains() != mesh.meshes.len() {
        return Err(Error::UnsupportedSpace(format!(
            "assignment covers {} subdomains, mesh has {}",
            assign.num_subdomains(),
            mesh.meshes.len()
        )));
    }
    require_compatible(assign, &mesh.geometry)
}

/// Per-subdomain exterior derivative from degree `k` to `k + 1`.
pub fn assemble_local_derivative(mesh: &MixedMesh, assign: &SpaceAssignment, k: usize) -> Result<SparseMat> {
    check(mesh, assign)?;
    let src = assign.layout(mesh, k)?;
    let dst = assign.layout(mesh, k + 1)?;
    let mut t = Triplets::new(dst.total, src.total);
    for i in 0..assign.num_subdomains() {
        let (Some(a), Some(b)) = (src.block(i), dst.block(i)) else {
            continue;
        };
        let m = mesh.mesh(i);
        let mut once = SetOnce::default();
        for c in 0..m.num_cells() {
            let basis = LocalBasis::new(a.kind, m, c);
            for (row, vals) in apply_functionals(b.kind, m, c, &|p| basis.derivative_values(p)) {
                for (col, v) in basis.dofs.iter().zip(vals) {
                    once.set(b.offset + row, a.offset + col, v);
                }
            }
        }
        once.into_triplets(dst.total, src.total, &mut t);
    }
    Ok(t.build())
}

/// Jump operator from degree `k` to `k + 1`: on each subdomain of dimension
/// `d`, the signed traces `(-1)^(d+k) eps(i, j) Tr a_j` of its up-neighbors.
pub fn assemble_jump(mesh: &MixedMesh, assign: &SpaceAssignment, k: usize) -> Result<SparseMat> {
    check(mesh, assign)?;
    let src = assign.layout(mesh, k)?;
    let dst = assign.layout(mesh, k + 1)?;
    let g = &mesh.geometry;
    let mut t = Triplets::new(dst.total, src.total);
    for lower in 0..assign.num_subdomains() {
        let Some(b) = dst.block(lower) else { continue };
        let d = g.subdomain(lower).dim;
        let normal = g.subdomain(lower).normal().unwrap_or([0.0, 0.0]);
        for &upper in &g.up_neighbors[lower] {
            let Some(a) = src.block(upper) else { continue };
            let eps = g.orientation(lower, upper).ok_or_else(|| Error::TraceIncompatible {
                lower,
                upper,
                reason: "missing orientation".into(),
            })?;
            let sign = if (d + k).is_multiple_of(2) { 1.0 } else { -1.0 } * eps as f64;
            let map = mesh.trace(upper, lower).ok_or_else(|| Error::TraceIncompatible {
                lower,
                upper,
                reason: "no trace map".into(),
            })?;
            let um = mesh.mesh(upper);
            let lm = mesh.mesh(lower);
            let mut once = SetOnce::default();
            for pair in &map.pairs {
                let uc = um.facet_cells(pair.facet).0;
                let basis = LocalBasis::new(a.kind, um, uc);
                let field = |p: Point2| Values::Scalar(basis.trace_values(p, normal));
                for (row, vals) in apply_functionals(b.kind, lm, pair.cell, &field) {
                    for (col, v) in basis.dofs.iter().zip(vals) {
                        once.set(b.offset + row, a.offset + col, sign * v);
                    }
                }
            }
            once.into_triplets(dst.total, src.total, &mut t);
        }
    }
    Ok(t.build())
}

/// Mixed-dimensional exterior derivative: local derivative plus jump.
pub fn assemble_derivative(mesh: &MixedMesh, assign: &SpaceAssignment, k: usize) -> Result<SparseMat> {
    Ok(sparse::add(
        &assemble_local_derivative(mesh, assign, k)?,
        &assemble_jump(mesh, assign, k)?,
    ))
}

fn add_local(t: &mut Triplets, offset: usize, dofs: &[usize], vals: &[f64], w: f64) {
    for (a, &va) in dofs.iter().zip(vals) {
        if va == 0.0 {
            continue;
        }
        for (b, &vb) in dofs.iter().zip(vals) {
            t.add(offset + a, offset + b, w * va * vb);
        }
    }
}

/// Inner product on degree-`k` cochains: the L2 product on every subdomain
/// plus the products of traces on every lower-dimensional subdomain in its closure.
pub fn assemble_mass(mesh: &MixedMesh, assign: &SpaceAssignment, k: usize) -> Result<SparseMat> {
    check(mesh, assign)?;
    let layout = assign.layout(mesh, k)?;
    let g = &mesh.geometry;
    let mut t = Triplets::new(layout.total, layout.total);
    for i in 0..assign.num_subdomains() {
        let Some(blk) = layout.block(i) else { continue };
        let m = mesh.mesh(i);
        let d = m.dim;
        for c in 0..m.num_cells() {
            let basis = LocalBasis::new(blk.kind, m, c);
            for (p, w) in quadrature(m, c) {
                match kind_values(&basis, blk.kind, p) {
                    Values::Scalar(v) => add_local(&mut t, blk.offset, &basis.dofs, &v, w),
                    Values::Vector(v) => {
                        let vx: Vec<f64> = v.iter().map(|u| u[0]).collect();
                        let vy: Vec<f64> = v.iter().map(|u| u[1]).collect();
                        add_local(&mut t, blk.offset, &basis.dofs, &vx, w);
                        add_local(&mut t, blk.offset, &basis.dofs, &vy, w);
                    }
                }
            }
        }
        let j = local_degree(assign.n, d, k).expect("block exists");
        for l in g.lower_closure(i) {
            let e = g.subdomain(l).dim;
            if j > e {
                continue;
            }
            if e + 1 == d {
                let map = mesh.trace(i, l).ok_or_else(|| Error::TraceIncompatible {
                    lower: l,
                    upper: i,
                    reason: "no trace map".into(),
                })?;
                let normal = g.subdomain(l).normal().unwrap_or([0.0, 0.0]);
                for pair in &map.pairs {
                    let uc = m.facet_cells(pair.facet).0;
                    let basis = LocalBasis::new(blk.kind, m, uc);
                    let rule = if d == 2 {
                        let fv = m.facet(pair.facet);
                        segment_quadrature(m.vertices[fv[0]], m.vertices[fv[1]])
                    } else {
                        vec![(m.vertices[pair.facet], 1.0)]
                    };
                    for (p, w) in rule {
                        add_local(&mut t, blk.offset, &basis.dofs, &basis.trace_values(p, normal), w);
                    }
                }
            } else if e == 0 {
                let p = point_of(mesh, l);
                let c = m
                    .locate(p)
                    .ok_or_else(|| Error::Mesh(format!("point {p:?} outside subdomain {i}")))?;
                let basis = LocalBasis::new(blk.kind, m, c);
                add_local(&mut t, blk.offset, &basis.dofs, &basis.scalar_values(p), 1.0);
            }
        }
    }
    Ok(t.build())
}

/// DOFs of the degree-`k` space whose trace on the outer boundary is nonzero.
pub fn boundary_dofs(mesh: &MixedMesh, assign: &SpaceAssignment, k: usize) -> Result<Vec<bool>> {
    let layout = assign.layout(mesh, k)?;
    let mut mark = vec![false; layout.total];
    for i in 0..assign.num_subdomains() {
        let Some(b) = layout.block(i) else { continue };
        let m = mesh.mesh(i);
        for (f, _) in m.outer_facets() {
            let dofs: Vec<usize> = match (m.dim, b.kind) {
                (2, ElementKind::Lagrange(r)) => {
                    let mut v = m.facet(f).to_vec();
                    if r == 2 {
                        v.push(m.num_vertices() + f);
                    }
                    v
                }
                (2, ElementKind::RaviartThomas) => vec![f],
                (2, ElementKind::Bdm) => vec![2 * f, 2 * f + 1],
                (1, ElementKind::Lagrange(_)) => vec![f],
                _ => Vec::new(),
            };
            for dof in dofs {
                mark[b.offset + dof] = true;
            }
        }
    }
    Ok(mark)
}

/// Assembled operators of the discrete mixed-dimensional complex.
///
/// With [`Boundary::Essential`] all matrices act on the DOFs away from the
/// outer boundary; `free[k]` maps those back to full layout indices.
#[derive(Clone, Debug)]
pub struct ComplexOperators {
    pub n: usize,
    pub boundary: Boundary,
    pub layouts: Vec<DofLayout>,
    pub free: Vec<Vec<usize>>,
    /// `d_local[k]`, `d_jump[k]`, `d[k]` map degree k to k + 1.
    pub d_local: Vec<SparseMat>,
    pub d_jump: Vec<SparseMat>,
    pub d: Vec<SparseMat>,
    pub mass: Vec<SparseMat>,
}

impl ComplexOperators {
    pub fn assemble(mesh: &MixedMesh, assign: &SpaceAssignment, boundary: Boundary) -> Result<Self> {
        let n = assign.n;
        let mut layouts = Vec::new();
        let mut free = Vec::new();
        for k in 0..=n {
            let layout = assign.layout(mesh, k)?;
            let keep: Vec<usize> = match boundary {
                Boundary::Natural => (0..layout.total).collect(),
                Boundary::Essential => {
                    let mark = boundary_dofs(mesh, assign, k)?;
                    (0..layout.total).filter(|&i| !mark[i]).collect()
                }
            };
            layouts.push(layout);
            free.push(keep);
        }
        let mut d_local = Vec::new();
        let mut d_jump = Vec::new();
        let mut d = Vec::new();
        for k in 0..n {
            let loc = sparse::restrict(&assemble_local_derivative(mesh, assign, k)?, &free[k + 1], &free[k]);
            let jmp = sparse::restrict(&assemble_jump(mesh, assign, k)?, &free[k + 1], &free[k]);
            d.push(sparse::add(&loc, &jmp));
            d_local.push(loc);
            d_jump.push(jmp);
        }
        let mut mass = Vec::new();
        for (k, f) in free.iter().enumerate() {
            mass.push(sparse::restrict(&assemble_mass(mesh, assign, k)?, f, f));
        }
        Ok(ComplexOperators {
            n,
            boundary,
            layouts,
            free,
            d_local,
            d_jump,
            d,
            mass,
        })
    }

    /// Number of free DOFs at degree `k`.
    pub fn size(&self, k: usize) -> usize {
        self.free[k].len()
    }

    /// Restricts a full cochain to free coordinates.
    pub fn restrict(&self, a: &MixedCochain) -> Vec<f64> {
        let flat = a.to_flat();
        self.free[a.k].iter().map(|&i| flat[i]).collect()
    }

    /// Extends free coordinates by zero to a full cochain.
    pub fn extend(&self, k: usize, v: &[f64]) -> MixedCochain {
        let mut flat = vec![0.0; self.layouts[k].total];
        for (&i, &x) in self.free[k].iter().zip(v) {
            flat[i] = x;
        }
        MixedCochain::from_flat(&self.layouts[k], k, &flat)
    }

    /// `(a, b)` in the mixed-dimensional inner product, on free coordinates.
    pub fn inner(&self, k: usize, a: &[f64], b: &[f64]) -> f64 {
        sparse::dot(a, &sparse::mul_vec(&self.mass[k], b))
    }

    pub fn norm(&self, k: usize, a: &[f64]) -> f64 {
        self.inner(k, a, a).max(0.0).sqrt()
    }

    /// Applies the degree-k derivative to free coordinates.
    pub fn apply_d(&self, k: usize, a: &[f64]) -> Vec<f64> {
        if k >= self.n {
            return Vec::new();
        }
        sparse::mul_vec(&self.d[k], a)
    }
}

fn sparse_solve(m: &SparseMat, rhs: &[f64]) -> Result<Vec<f64>> {
    let llt = m
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Factorization(format!("mass matrix Cholesky: {e:?}")))?;
    let b = Col::<f64>::from_fn(rhs.len(), |i| rhs[i]);
    let x = llt.solve(&b);
    Ok((0..rhs.len()).map(|i| x[i]).collect())
}

/// Codifferential on free coordinates: solves `M[k-1] x = D[k-1]^T M[k] a`.
pub fn codifferential(ops: &ComplexOperators, k: usize, a: &[f64]) -> Result<Vec<f64>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let rhs = sparse::mul_t_vec(&ops.d[k - 1], &sparse::mul_vec(&ops.mass[k], a));
    sparse_solve(&ops.mass[k - 1], &rhs)
}

/// Codifferential of a degree-`k` cochain; degree-0 input gives an empty result.
pub fn codifferential_apply(ops: &ComplexOperators, k: usize, a: &MixedCochain) -> Result<MixedCochain> {
    assert_eq!(a.k, k);
    if k == 0 {
        return Err(Error::InvalidTrace(
            "the codifferential of a 0-form has degree -1".into(),
        ));
    }
    let x = codifferential(ops, k, &ops.restrict(a))?;
    Ok(ops.extend(k - 1, &x))
}

/// Dense codifferential matrix `C[k] = M[k-1]^{-1} D[k-1]^T M[k]`.
pub fn codifferential_matrix(ops: &ComplexOperators, k: usize) -> Result<Mat<f64>> {
    let rhs = sparse::to_dense(&sparse::matmul(&sparse::transpose(&ops.d[k - 1]), &ops.mass[k]));
    let llt = ops.mass[k - 1]
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Factorization(format!("mass matrix Cholesky: {e:?}")))?;
    Ok(llt.solve(&rhs))
}

/// Threshold below which singular values count as zero.
pub const RANK_TOL: f64 = 1e-9;

/// Size above which ranks are computed by sparse elimination.
pub const DENSE_RANK_LIMIT: usize = 5000;

/// Numerical rank: dense SVD for small matrices, sparse elimination otherwise.
pub fn rank(m: &SparseMat) -> Result<usize> {
    if m.nrows().max(m.ncols()) < DENSE_RANK_LIMIT {
        dense::dense_rank(&sparse::to_dense(m), RANK_TOL)
    } else {
        Ok(sparse_rank(m, RANK_TOL))
    }
}

/// Rank by row elimination on sparse rows with partial pivoting.
pub fn sparse_rank(m: &SparseMat, rel_tol: f64) -> usize {
    use std::collections::BTreeMap;
    let scale = sparse::max_abs(m);
    if scale == 0.0 {
        return 0;
    }
    let tol = rel_tol * scale;
    let t = sparse::transpose(m);
    // pivots keyed by leading column
    let mut pivots: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
    for r in 0..m.nrows() {
        let mut row: BTreeMap<usize, f64> = t
            .row_idx_of_col_raw(r)
            .iter()
            .zip(t.val_of_col(r))
            .map(|(&c, &v)| (c, v))
            .collect();
        loop {
            row.retain(|_, v| v.abs() > tol);
            let Some((&lead, &lv)) = row.iter().next() else { break };
            match pivots.get(&lead) {
                Some(p) => {
                    let f = lv / p[&lead];
                    for (&c, &v) in p {
                        *row.entry(c).or_insert(0.0) -= f * v;
                    }
                    row.remove(&lead);
                }
                None => {
                    pivots.insert(lead, row);
                    break;
                }
            }
        }
    }
    pivots.len()
}

/// `dim ker D[k] - dim im D[k-1]` for every degree.
pub fn cohomology_dims(ops: &ComplexOperators) -> Result<Vec<usize>> {
    let n = ops.n;
    let ranks: Vec<usize> = (0..n).map(|k| rank(&ops.d[k])).collect::<Result<_>>()?;
    Ok((0..=n)
        .map(|k| {
            let kernel = ops.size(k) - if k < n { ranks[k] } else { 0 };
            kernel - if k > 0 { ranks[k - 1] } else { 0 }
        })
        .collect())
}

/// Splitting `a = D a_d + D* a_dstar + h` of a degree-k cochain.
#[derive(Clone, Debug)]
pub struct Helmholtz {
    /// Potential of the exact part, degree k - 1.
    pub a_d: MixedCochain,
    /// Potential of the coexact part, degree k + 1.
    pub a_dstar: MixedCochain,
    pub exact: MixedCochain,
    pub coexact: MixedCochain,
    pub harmonic: MixedCochain,
    /// `||a - exact - coexact|| / ||a||`.
    pub reconstruction: f64,
    /// `|(exact, coexact)| / ||a||^2`.
    pub orthogonality: f64,
}

const PSEUDO_TOL: f64 = 1e-11;

/// Helmholtz decomposition by orthogonal projection onto `im D[k-1]` and
/// `im D*[k+1]` in the mixed-dimensional inner product (dense, coarse meshes).
pub fn helmholtz_decompose(ops: &ComplexOperators, a: &MixedCochain) -> Result<Helmholtz> {
    let k = a.k;
    let n = ops.n;
    let v = ops.restrict(a);
    let mv = sparse::mul_vec(&ops.mass[k], &v);
    let (x, exact) = if k > 0 {
        let dk = &ops.d[k - 1];
        let g = sparse::to_dense(&sparse::matmul(
            &sparse::transpose(dk),
            &sparse::matmul(&ops.mass[k], dk),
        ));
        let x = dense::pseudo_solve(&g, &sparse::mul_t_vec(dk, &mv), PSEUDO_TOL)?;
        let e = sparse::mul_vec(dk, &x);
        (x, e)
    } else {
        (Vec::new(), vec![0.0; v.len()])
    };
    let (z, coexact) = if k < n {
        // W = M[k]^{-1} D[k]^T M[k+1];  W^T M W z = W^T M a
        let dk = &ops.d[k];
        let mk1 = &ops.mass[k + 1];
        let w_rhs = sparse::to_dense(&sparse::matmul(&sparse::transpose(dk), mk1));
        let llt = ops.mass[k]
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Factorization(format!("mass matrix Cholesky: {e:?}")))?;
        let w = llt.solve(&w_rhs);
        let mk = sparse::to_dense(&ops.mass[k]);
        let g = w.transpose() * &mk * &w;
        let gs = Mat::<f64>::from_fn(g.nrows(), g.ncols(), |i, j| 0.5 * (g[(i, j)] + g[(j, i)]));
        let rhs: Vec<f64> = (0..w.ncols())
            .map(|j| (0..w.nrows()).map(|i| w[(i, j)] * mv[i]).sum())
            .collect();
        let z = dense::pseudo_solve(&gs, &rhs, PSEUDO_TOL)?;
        let c: Vec<f64> = (0..w.nrows())
            .map(|i| (0..w.ncols()).map(|j| w[(i, j)] * z[j]).sum())
            .collect();
        (z, c)
    } else {
        (Vec::new(), vec![0.0; v.len()])
    };
    let harmonic: Vec<f64> = (0..v.len()).map(|i| v[i] - exact[i] - coexact[i]).collect();
    let na = ops.norm(k, &v);
    let (reconstruction, orthogonality) = if na > 0.0 {
        (
            ops.norm(k, &harmonic) / na,
            ops.inner(k, &exact, &coexact).abs() / (na * na),
        )
    } else {
        (0.0, 0.0)
    };
    Ok(Helmholtz {
        a_d: if k > 0 {
            ops.extend(k - 1, &x)
        } else {
            MixedCochain {
                k: 0,
                blocks: Vec::new(),
            }
        },
        a_dstar: if k < n {
            ops.extend(k + 1, &z)
        } else {
            MixedCochain {
                k: n + 1,
                blocks: Vec::new(),
            }
        },
        exact: ops.extend(k, &exact),
        coexact: ops.extend(k, &coexact),
        harmonic: ops.extend(k, &harmonic),
        reconstruction,
        orthogonality,
    })
}

/// Dense Hodge Laplacian `D^T M D + M D M^{-1} D^T M` at degree `k`.
fn hodge_laplacian(ops: &ComplexOperators, k: usize) -> Result<Mat<f64>> {
    let size = ops.size(k);
    let mut lap = Mat::<f64>::zeros(size, size);
    if k < ops.n {
        let dk = &ops.d[k];
        lap += sparse::to_dense(&sparse::matmul(
            &sparse::transpose(dk),
            &sparse::matmul(&ops.mass[k + 1], dk),
        ));
    }
    if k > 0 {
        let b = sparse::to_dense(&sparse::matmul(&ops.mass[k], &ops.d[k - 1]));
        let llt = ops.mass[k - 1]
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Factorization(format!("mass matrix Cholesky: {e:?}")))?;
        let bt = b.transpose().to_owned();
        let y = llt.solve(&bt);
        lap += &b * &y;
    }
    Ok(lap)
}

/// Estimate of the Poincare constant at degree `k`: `1 / sqrt(lambda)` for the
/// smallest nonzero eigenvalue of the Hodge Laplacian against the mass matrix.
pub fn poincare_estimate(ops: &ComplexOperators, k: usize) -> Result<f64> {
    let lap = hodge_laplacian(ops, k)?;
    let m = sparse::to_dense(&ops.mass[k]);
    let ev = dense::generalized_eigenvalues(&lap, &m)?;
    let top = ev.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let lambda = ev
        .into_iter()
        .find(|&v| v > 1e-9 * top)
        .ok_or_else(|| Error::Factorization("Hodge Laplacian has no nonzero eigenvalue".into()))?;
    Ok(1.0 / lambda.sqrt())
}

/// Discrete inf-sup constant of `D[k]` between the graph-normed degree-k
/// space and the degree-(k+1) space: `sqrt(lambda_min)` of
/// `(B A^{-1} B^T, M[k+1])` with `B = M[k+1] D[k]` and `A = M[k] + D^T M[k+1] D`.
pub fn inf_sup_constant(ops: &ComplexOperators, k: usize) -> Result<f64> {
    let dk = &ops.d[k];
    let mk1 = &ops.mass[k + 1];
    let a = sparse::add(
        &ops.mass[k],
        &sparse::matmul(&sparse::transpose(dk), &sparse::matmul(mk1, dk)),
    );
    let b = sparse::matmul(mk1, dk);
    let llt = a
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Factorization(format!("graph-norm Cholesky: {e:?}")))?;
    let bt = sparse::to_dense(&sparse::transpose(&b));
    let y = llt.solve(&bt);
    let s = sparse::to_dense(&b) * &y;
    let ev = dense::generalized_eigenvalues(&s, &sparse::to_dense(mk1))?;
    let top = ev.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let lambda = ev
        .into_iter()
        .find(|&v| v > 1e-12 * top)
        .ok_or_else(|| Error::Factorization("derivative block is zero".into()))?;
    Ok(lambda.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cross_geometry, StratifiedGeometry};
    use crate::mesh::build_mesh;
    use crate::spaces::{canonical_assignment, Method};

    fn cross_ops(method: Method, level: u32, boundary: Boundary) -> ComplexOperators {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let m = build_mesh(&g, level).unwrap();
        let a = canonical_assignment(method, &g, 2).unwrap();
        ComplexOperators::assemble(&m, &a, boundary).unwrap()
    }

    fn rel_dd(ops: &ComplexOperators) -> f64 {
        let p = sparse::matmul(&ops.d[1], &ops.d[0]);
        sparse::max_abs(&p) / (sparse::max_abs(&ops.d[1]) * sparse::max_abs(&ops.d[0]))
    }

    #[test]
    fn dd_vanishes() {
        for m in [Method::Mixed1, Method::Mixed2] {
            let ops = cross_ops(m, 2, Boundary::Natural);
            assert!(rel_dd(&ops) <= 1e-14, "{m}: {}", rel_dd(&ops));
        }
    }

    #[test]
    fn lowest_order_dd_is_exact() {
        let ops = cross_ops(Method::Mixed1, 2, Boundary::Natural);
        let p = sparse::matmul(&ops.d[1], &ops.d[0]);
        assert!(sparse::max_abs(&p) <= 1e-12 * sparse::max_abs(&ops.d[1]));
    }

    #[test]
    fn anticommutation() {
        for m in [Method::Mixed1, Method::Mixed2] {
            let ops = cross_ops(m, 2, Boundary::Natural);
            let lhs = sparse::add(
                &sparse::matmul(&ops.d_local[1], &ops.d_jump[0]),
                &sparse::matmul(&ops.d_jump[1], &ops.d_local[0]),
            );
            let scale = sparse::max_abs(&ops.d_local[1]) * sparse::max_abs(&ops.d_jump[0]);
            assert!(sparse::max_abs(&lhs) <= 1e-14 * scale, "{m}");
        }
    }

    #[test]
    fn constants_are_closed() {
        let ops = cross_ops(Method::Mixed2, 2, Boundary::Natural);
        let ones = vec![1.0; ops.size(0)];
        assert!(sparse::norm_inf(&ops.apply_d(0, &ones)) < 1e-12);
    }

    #[test]
    fn cohomology_of_cross() {
        for m in [Method::Mixed1, Method::Mixed2] {
            assert_eq!(
                cohomology_dims(&cross_ops(m, 2, Boundary::Natural)).unwrap(),
                vec![1, 0, 0]
            );
            assert_eq!(
                cohomology_dims(&cross_ops(m, 2, Boundary::Essential)).unwrap(),
                vec![0, 0, 1]
            );
        }
    }

    #[test]
    fn unit_square_is_classical() {
        let g = StratifiedGeometry::unit_square();
        let m = build_mesh(&g, 2).unwrap();
        let a = canonical_assignment(Method::Mixed1, &g, 2).unwrap();
        let ops = ComplexOperators::assemble(&m, &a, Boundary::Natural).unwrap();
        assert_eq!(cohomology_dims(&ops).unwrap(), vec![1, 0, 0]);
        assert_eq!(sparse::max_abs(&ops.d_jump[0]), 0.0);
        assert_eq!(sparse::max_abs(&ops.d_jump[1]), 0.0);
    }

    #[test]
    fn jump_of_two_sided_flux() {
        // one fracture between two blocks, unit normal trace from both sides
        let g = StratifiedGeometry::split_square(0.5, 1e-2).unwrap();
        let m = build_mesh(&g, 1).unwrap();
        let a = canonical_assignment(Method::Mixed1, &g, 2).unwrap();
        let jump = assemble_jump(&m, &a, 1).unwrap();
        let flux = a.layout(&m, 1).unwrap();
        let pressure = a.layout(&m, 2).unwrap();
        let n = g.subdomain(2).normal().unwrap();
        // interpolate u = n in both blocks
        let mut u = vec![0.0; flux.total];
        for i in 0..2 {
            let blk = flux.block(i).unwrap();
            let mesh = m.mesh(i);
            for e in 0..mesh.num_facets() {
                let fv = mesh.facet(e);
                let len = {
                    let (p, q) = (mesh.vertices[fv[0]], mesh.vertices[fv[1]]);
                    (p[0] - q[0]).hypot(p[1] - q[1])
                };
                let ne = mesh.facet_normal(e);
                u[blk.offset + e] = len * (ne[0] * n[0] + ne[1] * n[1]);
            }
        }
        let j = sparse::mul_vec(&jump, &u);
        // each side contributes eps * (u . n) = eps; the two sides have opposite eps
        let frac = pressure.range(2);
        let eps0 = g.orientation(2, 0).unwrap() as f64;
        let eps1 = g.orientation(2, 1).unwrap() as f64;
        for r in frac {
            assert!((j[r] - (eps0 + eps1)).abs() < 1e-12);
        }
        assert_eq!(eps0 + eps1, 0.0);
    }

    #[test]
    fn mass_is_spd_and_volume() {
        let g = StratifiedGeometry::unit_square();
        let m = build_mesh(&g, 2).unwrap();
        let a = canonical_assignment(Method::Mixed1, &g, 2).unwrap();
        let ops = ComplexOperators::assemble(&m, &a, Boundary::Natural).unwrap();
        let ones = vec![1.0; ops.size(2)];
        assert!((ops.inner(2, &ones, &ones) - 1.0).abs() < 1e-14);
        let twos = vec![2.0; ops.size(2)];
        assert!((ops.inner(2, &twos, &twos) - 4.0).abs() < 1e-13);

        let cross = cross_ops(Method::Mixed2, 2, Boundary::Natural);
        for k in 0..3 {
            let ev = dense::sym_eigen(&sparse::to_dense(&cross.mass[k])).unwrap().0;
            assert!(ev[0] > 0.0, "degree {k}: {}", ev[0]);
            assert!(sparse::asymmetry(&cross.mass[k]) < 1e-15);
        }
    }

    #[test]
    fn sparse_rank_matches_dense() {
        let g = StratifiedGeometry::fracture_network(0.5, 0.5, 1e-2).unwrap();
        let m = build_mesh(&g, 3).unwrap();
        for method in [Method::Mixed1, Method::Mixed2] {
            let a = canonical_assignment(method, &g, 2).unwrap();
            let ops = ComplexOperators::assemble(&m, &a, Boundary::Natural).unwrap();
            for d in &ops.d {
                let dense_r = dense::dense_rank(&sparse::to_dense(d), RANK_TOL).unwrap();
                assert_eq!(sparse_rank(d, RANK_TOL), dense_r);
            }
        }
    }

    #[test]
    fn poincare_on_unit_square() {
        let g = StratifiedGeometry::unit_square();
        let m = build_mesh(&g, 4).unwrap();
        let a = canonical_assignment(Method::Mixed1, &g, 2).unwrap();
        let ops = ComplexOperators::assemble(&m, &a, Boundary::Natural).unwrap();
        let c = poincare_estimate(&ops, 2).unwrap();
        let exact = 1.0 / (std::f64::consts::PI * 2f64.sqrt());
        assert!((c - exact).abs() < 0.25 * exact, "{c}");
    }
}
