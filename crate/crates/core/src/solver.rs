//! Primal and mixed discretizations of Darcy flow in fractured media.

use std::collections::BTreeMap;

use faer::prelude::*;
use faer::Side;

use crate::complex::{assemble_derivative, assemble_mass, inf_sup_constant, Boundary, ComplexOperators};
use crate::element::{quadrature, segment_quadrature, ElementKind, LocalBasis};
use crate::error::{Error, Result};
use crate::geometry::{Point2, StratifiedGeometry};
use crate::mesh::{BoundaryTag, MixedMesh};
use crate::spaces::{canonical_assignment, require_compatible, DofLayout, Method, SpaceAssignment};
use crate::sparse::{self, SparseMat, Triplets};

/// Condition on one tagged part of the outer boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryCondition {
    /// Essential pressure value (natural in the mixed methods).
    Pressure(f64),
    /// Vanishing normal flux (essential in the mixed methods).
    NoFlux,
}

/// Permeabilities, sources and boundary data.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelCoefficients {
    /// Permeability tensor of every bulk subdomain (indexed by subdomain id;
    /// ignored elsewhere).
    pub k_bulk: Vec<[[f64; 2]; 2]>,
    /// Tangential permeability of every fracture and intersection.
    pub k_tangent: Vec<f64>,
    /// Normal permeability coupling each lower-dimensional subdomain to its
    /// up-neighbors.
    pub k_normal: Vec<f64>,
    /// Source density per subdomain.
    pub source: Vec<f64>,
    pub bulk_bc: BTreeMap<BoundaryTag, BoundaryCondition>,
    pub fracture_bc: BTreeMap<BoundaryTag, BoundaryCondition>,
}

impl ModelCoefficients {
    /// Unit coefficients, no sources, no-flux everywhere.
    pub fn uniform(geometry: &StratifiedGeometry) -> Self {
        let count = geometry.subdomains.len();
        ModelCoefficients {
            k_bulk: vec![[[1.0, 0.0], [0.0, 1.0]]; count],
            k_tangent: vec![1.0; count],
            k_normal: vec![1.0; count],
            source: vec![0.0; count],
            bulk_bc: BTreeMap::new(),
            fracture_bc: BTreeMap::new(),
        }
    }

    /// The crossing-fracture benchmark: unit bulk permeability, fracture
    /// permeabilities 100, zero pressure at the bottom, unit pressure at the
    /// top fracture tip, no flux elsewhere.
    pub fn benchmark(geometry: &StratifiedGeometry) -> Self {
        let mut c = Self::uniform(geometry);
        for s in &geometry.subdomains {
            if s.dim < geometry.n {
                c.k_tangent[s.id] = 100.0;
                c.k_normal[s.id] = 100.0;
            }
        }
        c.set_bottom_pressure(0.0);
        c.fracture_bc.insert(BoundaryTag::Top, BoundaryCondition::Pressure(1.0));
        c
    }

    pub fn set_bottom_pressure(&mut self, value: f64) {
        self.bulk_bc
            .insert(BoundaryTag::Bottom, BoundaryCondition::Pressure(value));
        self.fracture_bc
            .insert(BoundaryTag::Bottom, BoundaryCondition::Pressure(value));
    }

    /// Sets the bulk permeability to `k` times the identity everywhere.
    pub fn set_isotropic_bulk(&mut self, k: f64) {
        for t in &mut self.k_bulk {
            *t = [[k, 0.0], [0.0, k]];
        }
    }

    /// Condition on the outer tag `tag` of a subdomain of dimension `dim`.
    pub fn bc(&self, dim: usize, tag: BoundaryTag) -> BoundaryCondition {
        let map = if dim >= 2 { &self.bulk_bc } else { &self.fracture_bc };
        map.get(&tag).copied().unwrap_or(BoundaryCondition::NoFlux)
    }

    pub fn validate(&self, geometry: &StratifiedGeometry) -> Result<()> {
        let count = geometry.subdomains.len();
        if [
            self.k_bulk.len(),
            self.k_tangent.len(),
            self.k_normal.len(),
            self.source.len(),
        ]
        .iter()
        .any(|&l| l != count)
        {
            return Err(Error::InvalidGeometry(format!(
                "coefficients must be given for all {count} subdomains"
            )));
        }
        for s in &geometry.subdomains {
            let i = s.id;
            if s.dim == geometry.n {
                let k = self.k_bulk[i];
                let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
                if !(k[0][0] > 0.0 && det > 0.0 && (k[0][1] - k[1][0]).abs() <= 1e-14 * k[0][0]) {
                    return Err(Error::InvalidGeometry(format!(
                        "bulk permeability of subdomain {i} is not SPD"
                    )));
                }
            } else if !(self.k_tangent[i] > 0.0 && self.k_normal[i] > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "permeabilities of subdomain {i} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// `eps^(1/(n-d))` of a lower-dimensional subdomain.
pub fn effective_aperture(geometry: &StratifiedGeometry, id: usize) -> f64 {
    let s = geometry.subdomain(id);
    s.aperture.powf(1.0 / (geometry.n - s.dim) as f64)
}

/// Global numbering of the unknowns: flux DOFs first, then pressure DOFs.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub method: Method,
    pub flux: Option<DofLayout>,
    pub pressure: DofLayout,
    /// Global indices kept in the system, in order.
    pub free: Vec<usize>,
    /// Eliminated unknowns with their prescribed values.
    pub fixed: Vec<(usize, f64)>,
}

impl DofMap {
    pub fn n_flux(&self) -> usize {
        self.flux.as_ref().map_or(0, |l| l.total)
    }

    pub fn total(&self) -> usize {
        self.n_flux() + self.pressure.total
    }

    /// Global index of pressure DOF `j` of subdomain `i`.
    pub fn pressure_index(&self, i: usize, j: usize) -> usize {
        self.n_flux() + self.pressure.range(i).start + j
    }
}

/// Linear system on the free unknowns.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub matrix: SparseMat,
    pub rhs: Vec<f64>,
    pub dof_map: DofMap,
    pub assignment: SpaceAssignment,
    /// Whether the matrix is symmetric positive definite (primal).
    pub definite: bool,
}

/// Pressures (and fluxes) of a solved system, in the full global numbering.
#[derive(Clone, Debug)]
pub struct Solution {
    pub method: Method,
    pub dof_map: DofMap,
    pub assignment: SpaceAssignment,
    pub values: Vec<f64>,
    /// Relative algebraic residual of the solve.
    pub residual: f64,
}

impl Solution {
    pub fn flux(&self) -> &[f64] {
        &self.values[..self.dof_map.n_flux()]
    }

    pub fn pressure(&self) -> &[f64] {
        &self.values[self.dof_map.n_flux()..]
    }

    pub fn pressure_block(&self, i: usize) -> &[f64] {
        &self.pressure()[self.dof_map.pressure.range(i)]
    }

    pub fn flux_block(&self, i: usize) -> Option<&[f64]> {
        let layout = self.dof_map.flux.as_ref()?;
        layout.block(i)?;
        Some(&self.flux()[layout.range(i)])
    }
}

#[allow(clippy::too_many_arguments)]
fn finalize(
    full: &SparseMat,
    rhs: Vec<f64>,
    mut fixed: Vec<(usize, f64)>,
    method: Method,
    flux: Option<DofLayout>,
    pressure: DofLayout,
    assignment: SpaceAssignment,
    definite: bool,
) -> AssembledSystem {
    fixed.sort_by_key(|f| f.0);
    fixed.dedup_by_key(|f| f.0);
    let total = full.nrows();
    let mut is_fixed = vec![false; total];
    let mut lift = vec![0.0; total];
    for &(i, v) in &fixed {
        is_fixed[i] = true;
        lift[i] = v;
    }
    let free: Vec<usize> = (0..total).filter(|&i| !is_fixed[i]).collect();
    let ax = sparse::mul_vec(full, &lift);
    let reduced_rhs = free.iter().map(|&i| rhs[i] - ax[i]).collect();
    AssembledSystem {
        matrix: sparse::restrict(full, &free, &free),
        rhs: reduced_rhs,
        dof_map: DofMap {
            method,
            flux,
            pressure,
            free,
            fixed,
        },
        assignment,
        definite,
    }
}

fn add_pair(t: &mut Triplets, a: usize, b: usize, w: f64) {
    t.add(a, a, w);
    t.add(b, b, w);
    t.add(a, b, -w);
    t.add(b, a, -w);
}

/// Assembles the primal (pressure-only) method with linear Lagrange elements
/// on every subdomain.
pub fn assemble_primal(mesh: &MixedMesh, coeffs: &ModelCoefficients) -> Result<AssembledSystem> {
    let g = &mesh.geometry;
    coeffs.validate(g)?;
    let assign = canonical_assignment(Method::Primal, g, g.n)?;
    require_compatible(&assign, g)?;
    let layout = assign.pressure_layout(mesh)?;
    let n = layout.total;
    let mut t = Triplets::new(n, n);
    let mut rhs = vec![0.0; n];
    let mut fixed = Vec::new();

    for s in &g.subdomains {
        let i = s.id;
        let blk = layout.block(i).unwrap();
        let m = mesh.mesh(i);
        let f = coeffs.source[i];
        if s.dim == 0 {
            rhs[blk.offset] += f;
            continue;
        }
        for c in 0..m.num_cells() {
            let basis = LocalBasis::new(blk.kind, m, c);
            for (p, w) in quadrature(m, c) {
                let grads = basis.gradients(p);
                let vals = basis.scalar_values(p);
                for (a, ga) in basis.dofs.iter().zip(&grads) {
                    for (b, gb) in basis.dofs.iter().zip(&grads) {
                        let v = if s.dim == 2 {
                            let k = coeffs.k_bulk[i];
                            let kg = [k[0][0] * gb[0] + k[0][1] * gb[1], k[1][0] * gb[0] + k[1][1] * gb[1]];
                            ga[0] * kg[0] + ga[1] * kg[1]
                        } else {
                            s.aperture * coeffs.k_tangent[i] * ga[0] * gb[0]
                        };
                        t.add(blk.offset + a, blk.offset + b, w * v);
                    }
                }
                for (a, va) in basis.dofs.iter().zip(&vals) {
                    rhs[blk.offset + a] += w * f * va;
                }
            }
        }
        for (facet, tag) in m.outer_facets() {
            if let BoundaryCondition::Pressure(value) = coeffs.bc(s.dim, tag) {
                let verts: Vec<usize> = if s.dim == 2 {
                    m.facet(facet).to_vec()
                } else {
                    vec![facet]
                };
                for v in verts {
                    fixed.push((blk.offset + v, value));
                }
            }
        }
    }

    for map in &mesh.traces {
        let (upper, lower) = (map.upper, map.lower);
        let um = mesh.mesh(upper);
        let lm = mesh.mesh(lower);
        let ub = layout.block(upper).unwrap().offset;
        let lb = layout.block(lower).unwrap().offset;
        let eff = effective_aperture(g, lower);
        if lm.dim == 1 {
            // lumped (nodal trapezoid) interface term
            let w = 2.0 * coeffs.k_normal[lower] / eff;
            for pair in &map.pairs {
                let fv = um.facet(pair.facet);
                let lv = lm.cell(pair.cell);
                let len = lm.cell_measure(pair.cell);
                let (a0, a1) = if pair.aligned { (lv[0], lv[1]) } else { (lv[1], lv[0]) };
                add_pair(&mut t, ub + fv[0], lb + a0, 0.5 * len * w);
                add_pair(&mut t, ub + fv[1], lb + a1, 0.5 * len * w);
            }
        } else {
            let w = 2.0 * coeffs.k_normal[lower] * g.subdomain(upper).aperture / eff;
            for pair in &map.pairs {
                add_pair(&mut t, ub + pair.facet, lb, w);
            }
        }
    }
    let full = t.build();
    Ok(finalize(&full, rhs, fixed, Method::Primal, None, layout, assign, true))
}

/// Assembles a mixed method (`Mixed1` or `Mixed2`) as the symmetric saddle
/// point system `[[A, -B^T], [-B, 0]]` in (flux, pressure).
pub fn assemble_mixed(mesh: &MixedMesh, coeffs: &ModelCoefficients, method: Method) -> Result<AssembledSystem> {
    if !method.is_mixed() {
        return Err(Error::UnsupportedSpace(format!("{method} is not a mixed method")));
    }
    let g = &mesh.geometry;
    coeffs.validate(g)?;
    let assign = canonical_assignment(method, g, g.n)?;
    require_compatible(&assign, g)?;
    let flux = assign.layout(mesh, 1)?;
    let pressure = assign.layout(mesh, 2)?;
    let nf = flux.total;
    let np = pressure.total;
    let mut t = Triplets::new(nf + np, nf + np);
    let mut rhs = vec![0.0; nf + np];
    let mut fixed = Vec::new();

    for s in &g.subdomains {
        let i = s.id;
        let Some(blk) = flux.block(i) else { continue };
        let m = mesh.mesh(i);
        for c in 0..m.num_cells() {
            let basis = LocalBasis::new(blk.kind, m, c);
            for (p, w) in quadrature(m, c) {
                if blk.kind.is_vector() {
                    let k = coeffs.k_bulk[i];
                    let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
                    let ki = [[k[1][1] / det, -k[0][1] / det], [-k[1][0] / det, k[0][0] / det]];
                    let vals = basis.vector_values(p);
                    for (a, ua) in basis.dofs.iter().zip(&vals) {
                        for (b, ub) in basis.dofs.iter().zip(&vals) {
                            let kv = [ki[0][0] * ub[0] + ki[0][1] * ub[1], ki[1][0] * ub[0] + ki[1][1] * ub[1]];
                            t.add(blk.offset + a, blk.offset + b, w * (ua[0] * kv[0] + ua[1] * kv[1]));
                        }
                    }
                } else {
                    let weight = 1.0 / (s.aperture * coeffs.k_tangent[i]);
                    let vals = basis.scalar_values(p);
                    for (a, va) in basis.dofs.iter().zip(&vals) {
                        for (b, vb) in basis.dofs.iter().zip(&vals) {
                            t.add(blk.offset + a, blk.offset + b, w * weight * va * vb);
                        }
                    }
                }
            }
        }
        for (facet, tag) in m.outer_facets() {
            match (coeffs.bc(s.dim, tag), blk.kind) {
                (BoundaryCondition::NoFlux, ElementKind::RaviartThomas) => fixed.push((blk.offset + facet, 0.0)),
                (BoundaryCondition::NoFlux, ElementKind::Bdm) => {
                    fixed.push((blk.offset + 2 * facet, 0.0));
                    fixed.push((blk.offset + 2 * facet + 1, 0.0));
                }
                (BoundaryCondition::NoFlux, _) => fixed.push((blk.offset + facet, 0.0)),
                (BoundaryCondition::Pressure(value), kind) => {
                    if s.dim == 2 {
                        let c = m.facet_cells(facet).0;
                        let basis = LocalBasis::new(kind, m, c);
                        let fv = m.facet(facet);
                        let (a, b) = (m.vertices[fv[0]], m.vertices[fv[1]]);
                        let n_out = outward_normal(m.facet_normal(facet), a, &m.cell_points(c));
                        for (p, w) in segment_quadrature(a, b) {
                            for (dof, v) in basis.dofs.iter().zip(basis.trace_values(p, n_out)) {
                                rhs[blk.offset + dof] -= w * value * v;
                            }
                        }
                    } else {
                        // head of the branch is its last vertex
                        let sign = if facet == 0 { -1.0 } else { 1.0 };
                        rhs[blk.offset + facet] -= sign * value;
                    }
                }
            }
        }
    }

    for map in &mesh.traces {
        let (upper, lower) = (map.upper, map.lower);
        let Some(blk) = flux.block(upper) else { continue };
        let um = mesh.mesh(upper);
        let eff = effective_aperture(g, lower);
        if um.dim == 2 {
            let w = eff / (2.0 * coeffs.k_normal[lower]);
            let normal = g.subdomain(lower).normal().unwrap();
            for pair in &map.pairs {
                let c = um.facet_cells(pair.facet).0;
                let basis = LocalBasis::new(blk.kind, um, c);
                let fv = um.facet(pair.facet);
                for (p, q) in segment_quadrature(um.vertices[fv[0]], um.vertices[fv[1]]) {
                    let vals = basis.trace_values(p, normal);
                    for (a, va) in basis.dofs.iter().zip(&vals) {
                        for (b, vb) in basis.dofs.iter().zip(&vals) {
                            t.add(blk.offset + a, blk.offset + b, q * w * va * vb);
                        }
                    }
                }
            }
        } else {
            let w = eff / (2.0 * coeffs.k_normal[lower] * g.subdomain(upper).aperture);
            for pair in &map.pairs {
                t.add(blk.offset + pair.facet, blk.offset + pair.facet, w);
            }
        }
    }

    let m2 = assemble_mass(mesh, &assign, 2)?;
    let d1 = assemble_derivative(mesh, &assign, 1)?;
    let b = sparse::matmul(&m2, &d1);
    for (r, c, v) in sparse::entries(&b) {
        t.add(nf + r, c, -v);
        t.add(c, nf + r, -v);
    }
    let fvec = source_coefficients(&pressure, coeffs);
    let load = sparse::mul_vec(&m2, &fvec);
    for (r, v) in load.into_iter().enumerate() {
        rhs[nf + r] -= v;
    }
    let full = t.build();
    Ok(finalize(&full, rhs, fixed, method, Some(flux), pressure, assign, false))
}

fn outward_normal(n: Point2, on_facet: Point2, cell: &[Point2]) -> Point2 {
    let k = cell.len() as f64;
    let cx = cell.iter().map(|p| p[0]).sum::<f64>() / k;
    let cy = cell.iter().map(|p| p[1]).sum::<f64>() / k;
    if (on_facet[0] - cx) * n[0] + (on_facet[1] - cy) * n[1] > 0.0 {
        n
    } else {
        [-n[0], -n[1]]
    }
}

/// Coefficients of the (piecewise constant) source in the pressure space.
pub fn source_coefficients(pressure: &DofLayout, coeffs: &ModelCoefficients) -> Vec<f64> {
    let mut f = vec![0.0; pressure.total];
    for (i, b) in pressure.blocks.iter().enumerate() {
        if let Some(b) = b {
            f[b.offset..b.offset + b.len].fill(coeffs.source[i]);
        }
    }
    f
}

/// Algebraic residual tolerance of [`solve`].
pub const SOLVE_TOL: f64 = 1e-10;

/// Direct sparse solve: Cholesky for the primal system, LU with partial
/// pivoting for the saddle point systems.
pub fn solve(sys: &AssembledSystem) -> Result<Solution> {
    let n = sys.rhs.len();
    let b = Col::<f64>::from_fn(n, |i| sys.rhs[i]);
    let mut x = if n == 0 {
        Col::<f64>::zeros(0)
    } else if sys.definite {
        let llt = sys
            .matrix
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Factorization(format!("Cholesky breakdown (matrix not positive definite): {e:?}")))?;
        llt.solve(&b)
    } else {
        let lu = sys
            .matrix
            .sp_lu()
            .map_err(|e| Error::Factorization(format!("LU breakdown (singular pivot): {e:?}")))?;
        let mut x = lu.solve(&b);
        // one step of iterative refinement
        let r = &b - &sys.matrix * &x;
        x += lu.solve(&r);
        x
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Factorization("non-finite solution".into()));
    }
    let r = &b - &sys.matrix * &x;
    let bn = b.norm_l2();
    let mut residual = if bn > 0.0 { r.norm_l2() / bn } else { r.norm_l2() };
    if residual > SOLVE_TOL && sys.definite {
        let llt = sys.matrix.sp_cholesky(Side::Lower).unwrap();
        x += llt.solve(&r);
        let r = &b - &sys.matrix * &x;
        residual = if bn > 0.0 { r.norm_l2() / bn } else { r.norm_l2() };
    }
    if residual > SOLVE_TOL {
        return Err(Error::Residual {
            residual,
            tolerance: SOLVE_TOL,
        });
    }
    let map = &sys.dof_map;
    let mut values = vec![0.0; map.total()];
    for &(i, v) in &map.fixed {
        values[i] = v;
    }
    for (k, &i) in map.free.iter().enumerate() {
        values[i] = x[k];
    }
    Ok(Solution {
        method: map.method,
        dof_map: map.clone(),
        assignment: sys.assignment.clone(),
        values,
        residual,
    })
}

/// Assembles and solves `method`.
pub fn solve_method(mesh: &MixedMesh, coeffs: &ModelCoefficients, method: Method) -> Result<Solution> {
    let sys = match method {
        Method::Primal => assemble_primal(mesh, coeffs)?,
        m => assemble_mixed(mesh, coeffs, m)?,
    };
    solve(&sys)
}

/// Signed normal flux out of one bulk side into a fracture.
#[derive(Clone, Debug)]
pub struct InterfaceFlux {
    pub lower: usize,
    pub upper: usize,
    /// Fracture cells, increasing.
    pub cells: Vec<usize>,
    /// Mean of the flux over each fracture cell.
    pub means: Vec<f64>,
    /// Flux at the three Gauss points of each cell.
    pub samples: Vec<[f64; 3]>,
}

/// Normal traces of the bulk flux on every fracture side.
pub fn recover_interface_flux(sol: &Solution, mesh: &MixedMesh) -> Result<Vec<InterfaceFlux>> {
    let flux = sol
        .dof_map
        .flux
        .as_ref()
        .ok_or_else(|| Error::UnsupportedSpace("interface fluxes need a mixed solution".into()))?;
    let g = &mesh.geometry;
    let mut out = Vec::new();
    for map in &mesh.traces {
        let um = mesh.mesh(map.upper);
        if um.dim != 2 {
            continue;
        }
        let blk = flux.block(map.upper).unwrap();
        let eps = g.orientation(map.lower, map.upper).unwrap() as f64;
        let normal = g.subdomain(map.lower).normal().unwrap();
        let coef = &sol.flux()[blk.offset..blk.offset + blk.len];
        let mut cells = Vec::new();
        let mut means = Vec::new();
        let mut samples = Vec::new();
        for pair in &map.pairs {
            let c = um.facet_cells(pair.facet).0;
            let basis = LocalBasis::new(blk.kind, um, c);
            let fv = um.facet(pair.facet);
            let (a, b) = (um.vertices[fv[0]], um.vertices[fv[1]]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let mut s = [0.0; 3];
            let mut total = 0.0;
            for (k, (p, w)) in segment_quadrature(a, b).into_iter().enumerate() {
                let v: f64 = basis
                    .dofs
                    .iter()
                    .zip(basis.trace_values(p, normal))
                    .map(|(&d, t)| coef[d] * t)
                    .sum();
                // outward normal of the bulk side is -eps * normal
                s[k] = -eps * v;
                total += w * s[k];
            }
            cells.push(pair.cell);
            means.push(total / len);
            samples.push(s);
        }
        out.push(InterfaceFlux {
            lower: map.lower,
            upper: map.upper,
            cells,
            means,
            samples,
        });
    }
    Ok(out)
}

/// `|| D b - P f ||_inf` over all pressure DOFs of a mixed solution.
pub fn conservation_residual(sol: &Solution, mesh: &MixedMesh, coeffs: &ModelCoefficients) -> Result<f64> {
    if !sol.method.is_mixed() {
        return Err(Error::UnsupportedSpace(
            "conservation residual needs a mixed solution".into(),
        ));
    }
    let d1 = assemble_derivative(mesh, &sol.assignment, 1)?;
    let div = sparse::mul_vec(&d1, sol.flux());
    let f = source_coefficients(&sol.dof_map.pressure, coeffs);
    Ok(div.iter().zip(&f).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// Largest interface pressure jump `|p_bulk - p_fracture|` across fracture sides.
///
/// For the mixed methods the jump follows from the interface law,
/// `eps_eff / (2 k_n) |lambda|`, at the Gauss points; for the primal method it
/// is the nodal difference of the two traces.
pub fn interface_pressure_jump(sol: &Solution, mesh: &MixedMesh, coeffs: &ModelCoefficients) -> Result<f64> {
    let g = &mesh.geometry;
    let mut jump = 0.0f64;
    if sol.method.is_mixed() {
        for lam in recover_interface_flux(sol, mesh)? {
            let w = effective_aperture(g, lam.lower) / (2.0 * coeffs.k_normal[lam.lower]);
            for s in &lam.samples {
                for v in s {
                    jump = jump.max(w * v.abs());
                }
            }
        }
    } else {
        for map in &mesh.traces {
            let um = mesh.mesh(map.upper);
            if um.dim != 2 {
                continue;
            }
            let lm = mesh.mesh(map.lower);
            let pu = sol.pressure_block(map.upper);
            let pl = sol.pressure_block(map.lower);
            for pair in &map.pairs {
                let fv = um.facet(pair.facet);
                let lv = lm.cell(pair.cell);
                let (a0, a1) = if pair.aligned { (lv[0], lv[1]) } else { (lv[1], lv[0]) };
                jump = jump.max((pu[fv[0]] - pl[a0]).abs()).max((pu[fv[1]] - pl[a1]).abs());
            }
        }
    }
    Ok(jump)
}

/// Discrete inf-sup constant of the mixed method's divergence block in the
/// graph norm of the flux space and the L2 norm of the pressure space.
pub fn inf_sup_witness(mesh: &MixedMesh, method: Method) -> Result<f64> {
    let assign = canonical_assignment(method, &mesh.geometry, mesh.geometry.n)?;
    let ops = ComplexOperators::assemble(mesh, &assign, Boundary::Natural)?;
    inf_sup_constant(&ops, mesh.geometry.n - 1)
}

/// Smallest eigenvalue of the primal stiffness matrix with boundary data eliminated.
pub fn primal_coercivity(mesh: &MixedMesh, coeffs: &ModelCoefficients) -> Result<f64> {
    let sys = assemble_primal(mesh, coeffs)?;
    let ev = crate::dense::sym_eigen(&sparse::to_dense(&sys.matrix))?.0;
    Ok(ev.first().copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_cross_geometry;
    use crate::mesh::build_mesh;

    fn square_with_linear_data() -> (MixedMesh, ModelCoefficients) {
        let g = StratifiedGeometry::unit_square();
        let m = build_mesh(&g, 3).unwrap();
        let mut c = ModelCoefficients::uniform(&g);
        // p = 1 - y: p = 1 at the bottom, 0 at the top, no flux on the sides
        c.bulk_bc.insert(BoundaryTag::Bottom, BoundaryCondition::Pressure(1.0));
        c.bulk_bc.insert(BoundaryTag::Top, BoundaryCondition::Pressure(0.0));
        (m, c)
    }

    #[test]
    fn primal_patch() {
        let (m, c) = square_with_linear_data();
        let sol = solve_method(&m, &c, Method::Primal).unwrap();
        for (v, p) in m.mesh(0).vertices.iter().zip(sol.pressure_block(0)) {
            assert!((p - (1.0 - v[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_patch() {
        let (m, c) = square_with_linear_data();
        for method in [Method::Mixed1, Method::Mixed2] {
            let sol = solve_method(&m, &c, method).unwrap();
            let mesh = m.mesh(0);
            for (cell, p) in sol.pressure_block(0).iter().enumerate() {
                let pts = mesh.cell_points(cell);
                let y = (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0;
                assert!((p - (1.0 - y)).abs() < 1e-12, "{method}");
            }
            // u = -grad p = (0, 1)
            let kind = sol.assignment.element(0, 1).unwrap().unwrap();
            let u = sol.flux_block(0).unwrap();
            for cell in [0, 7, 40] {
                let basis = LocalBasis::new(kind, mesh, cell);
                let pts = mesh.cell_points(cell);
                let vals = basis.vector_values(pts[0]);
                let ux: f64 = basis.dofs.iter().zip(&vals).map(|(&d, v)| u[d] * v[0]).sum();
                let uy: f64 = basis.dofs.iter().zip(&vals).map(|(&d, v)| u[d] * v[1]).sum();
                assert!(ux.abs() < 1e-12 && (uy - 1.0).abs() < 1e-12, "{method}");
            }
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let m = build_mesh(&g, 2).unwrap();
        let mut c = ModelCoefficients::benchmark(&g);
        c.fracture_bc.insert(BoundaryTag::Top, BoundaryCondition::Pressure(0.0));
        for method in Method::ALL {
            let sol = solve_method(&m, &c, method).unwrap();
            assert!(sol.values.iter().all(|&v| v == 0.0));
            assert_eq!(sol.residual, 0.0);
        }
    }

    #[test]
    fn benchmark_primal_maximum_principle() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let m = build_mesh(&g, 2).unwrap();
        let sol = solve_method(&m, &ModelCoefficients::benchmark(&g), Method::Primal).unwrap();
        assert!(sol.pressure().iter().all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)));
        assert!(primal_coercivity(&m, &ModelCoefficients::benchmark(&g)).unwrap() > 0.0);
    }

    #[test]
    fn systems_are_symmetric() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let m = build_mesh(&g, 2).unwrap();
        let c = ModelCoefficients::benchmark(&g);
        for sys in [
            assemble_primal(&m, &c).unwrap(),
            assemble_mixed(&m, &c, Method::Mixed1).unwrap(),
            assemble_mixed(&m, &c, Method::Mixed2).unwrap(),
        ] {
            assert!(sparse::asymmetry(&sys.matrix) <= 1e-14 * sparse::max_abs(&sys.matrix));
        }
    }

    #[test]
    fn strong_conservation() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let m = build_mesh(&g, 3).unwrap();
        let mut c = ModelCoefficients::benchmark(&g);
        c.source = (0..9).map(|i| 0.1 * i as f64).collect();
        for method in [Method::Mixed1, Method::Mixed2] {
            let sol = solve_method(&m, &c, method).unwrap();
            assert!(conservation_residual(&sol, &m, &c).unwrap() <= 1e-10, "{method}");
        }
    }

    #[test]
    fn fracture_cell_balance() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let m = build_mesh(&g, 3).unwrap();
        let mut c = ModelCoefficients::benchmark(&g);
        c.source[5] = 0.7;
        for method in [Method::Mixed1, Method::Mixed2] {
            let sol = solve_method(&m, &c, method).unwrap();
            let lam = recover_interface_flux(&sol, &m).unwrap();
            let frac = m.mesh(5);
            let u = sol.flux_block(5).unwrap();
            for cell in 0..frac.num_cells() {
                let len = frac.cell_measure(cell);
                let inflow: f64 = lam
                    .iter()
                    .filter(|l| l.lower == 5)
                    .map(|l| l.means[l.cells.iter().position(|&x| x == cell).unwrap()] * len)
                    .sum();
                let v = frac.cell(cell);
                let net = u[v[1]] - u[v[0]];
                assert!((net - inflow - 0.7 * len).abs() < 1e-10, "{method} {cell}");
            }
        }
    }

    #[test]
    fn repeated_solves_are_bitwise_identical() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let m = build_mesh(&g, 3).unwrap();
        let c = ModelCoefficients::benchmark(&g);
        for method in Method::ALL {
            let a = solve_method(&m, &c, method).unwrap();
            let b = solve_method(&m, &c, method).unwrap();
            assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
