//! Numerical checks of the discrete complex: exactness, cohomology,
//! adjointness, Helmholtz splitting and stability constants.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::complex::{
    codifferential_matrix, cohomology_dims, helmholtz_decompose, inf_sup_constant, poincare_estimate, Boundary,
    ComplexOperators, MixedCochain,
};
use crate::error::Result;
use crate::geometry::StratifiedGeometry;
use crate::mesh::build_mesh;
use crate::spaces::{canonical_assignment, Method};
use crate::sparse;

/// Relative size of `D[k+1] D[k]` counted as zero.
pub const DD_TOL: f64 = 1e-14;
pub const ADJOINT_TOL: f64 = 1e-12;
pub const HELMHOLTZ_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `None` for reported-only quantities.
    pub tolerance: Option<f64>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.tolerance.is_none_or(|t| self.value <= t)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tolerance {
            Some(t) => write!(
                f,
                "{:<40} {:>11.3e}  (<= {t:.0e})  {}",
                self.name,
                self.value,
                if self.passed() { "ok" } else { "FAILED" }
            ),
            None => write!(f, "{:<40} {:>11.4}", self.name, self.value),
        }
    }
}

/// `max |D[k+1] D[k]|` relative to `max |D[k+1]| max |D[k]|`.
pub fn dd_residual(ops: &ComplexOperators, k: usize) -> f64 {
    let p = sparse::matmul(&ops.d[k + 1], &ops.d[k]);
    let scale = sparse::max_abs(&ops.d[k + 1]) * sparse::max_abs(&ops.d[k]);
    if scale == 0.0 {
        0.0
    } else {
        sparse::max_abs(&p) / scale
    }
}

/// `max |M[k-1] C[k] - D[k-1]^T M[k]|` relative to `max |D[k-1]^T M[k]|`.
pub fn adjointness_residual(ops: &ComplexOperators, k: usize) -> Result<f64> {
    let c = codifferential_matrix(ops, k)?;
    let lhs = sparse::to_dense(&ops.mass[k - 1]) * &c;
    let rhs = sparse::to_dense(&sparse::matmul(&sparse::transpose(&ops.d[k - 1]), &ops.mass[k]));
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..rhs.ncols() {
        for i in 0..rhs.nrows() {
            diff = diff.max((lhs[(i, j)] - rhs[(i, j)]).abs());
            scale = scale.max(rhs[(i, j)].abs());
        }
    }
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// Random cochain with coefficients uniform in [-1, 1].
pub fn random_cochain(ops: &ComplexOperators, k: usize, rng: &mut impl Rng) -> MixedCochain {
    let v: Vec<f64> = (0..ops.size(k)).map(|_| rng.random_range(-1.0..1.0)).collect();
    ops.extend(k, &v)
}

/// Worst Helmholtz residuals over `samples` random cochains of degree `k`:
/// `(reconstruction, orthogonality)`.
///
/// Degrees with trivial cohomology must be recovered from the exact and
/// coexact parts alone. At degree 0 the remainder must be closed.
pub fn helmholtz_residuals(ops: &ComplexOperators, k: usize, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let closed = k > 0;
    let mut recon = 0.0f64;
    let mut orth = 0.0f64;
    for _ in 0..samples {
        let a = random_cochain(ops, k, &mut rng);
        let h = helmholtz_decompose(ops, &a)?;
        let r = if closed {
            h.reconstruction
        } else {
            let hv = ops.restrict(&h.harmonic);
            let dh = ops.apply_d(0, &hv);
            let na = ops.norm(0, &ops.restrict(&a));
            ops.norm(1, &dh) / (na * sparse::max_abs(&ops.d[0]).max(1.0))
        };
        recon = recon.max(r);
        orth = orth.max(h.orthogonality);
    }
    Ok((recon, orth))
}

/// Runs every check for `method` on the mesh of `geometry` at `level`.
pub fn diagnose(geometry: &StratifiedGeometry, level: u32, method: Method, samples: usize) -> Result<Vec<Check>> {
    let mesh = build_mesh(geometry, level)?;
    let assign = canonical_assignment(method, geometry, geometry.n)?;
    let ops = ComplexOperators::assemble(&mesh, &assign, Boundary::Natural)?;
    let n = ops.n;
    let mut checks = Vec::new();
    for k in 0..n - 1 {
        checks.push(Check {
            name: format!("dd = 0 (degree {k})"),
            value: dd_residual(&ops, k),
            tolerance: Some(DD_TOL),
        });
    }
    let dims = cohomology_dims(&ops)?;
    let expected: Vec<usize> = (0..=n).map(|k| usize::from(k == 0)).collect();
    let mismatch = dims.iter().zip(&expected).map(|(a, b)| a.abs_diff(*b)).sum::<usize>();
    checks.push(Check {
        name: format!("cohomology {dims:?}"),
        value: mismatch as f64,
        tolerance: Some(0.0),
    });
    for k in 1..=n {
        checks.push(Check {
            name: format!("adjointness (degree {k})"),
            value: adjointness_residual(&ops, k)?,
            tolerance: Some(ADJOINT_TOL),
        });
    }
    for k in 0..=n {
        let (recon, orth) = helmholtz_residuals(&ops, k, samples, 17 + k as u64)?;
        checks.push(Check {
            name: format!("Helmholtz reconstruction (degree {k})"),
            value: recon,
            tolerance: Some(HELMHOLTZ_TOL),
        });
        checks.push(Check {
            name: format!("Helmholtz orthogonality (degree {k})"),
            value: orth,
            tolerance: Some(HELMHOLTZ_TOL),
        });
    }
    checks.push(Check {
        name: format!("Poincare estimate (degree {})", n - 1),
        value: poincare_estimate(&ops, n - 1)?,
        tolerance: None,
    });
    checks.push(Check {
        name: format!("inf-sup constant (degree {})", n - 1),
        value: inf_sup_constant(&ops, n - 1)?,
        tolerance: None,
    });
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_cross_geometry;

    #[test]
    fn all_checks_pass_on_coarse_cross() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        for m in Method::ALL {
            let checks = diagnose(&g, 2, m, 3).unwrap();
            for c in &checks {
                assert!(c.passed(), "{m}: {c}");
            }
        }
    }

    #[test]
    fn random_cochains_are_reproducible() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        let mesh = build_mesh(&g, 2).unwrap();
        let a = canonical_assignment(Method::Mixed1, &g, 2).unwrap();
        let ops = ComplexOperators::assemble(&mesh, &a, Boundary::Natural).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            random_cochain(&ops, 1, &mut r1).to_flat(),
            random_cochain(&ops, 1, &mut r2).to_flat()
        );
    }
}
