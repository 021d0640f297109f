//! Dense symmetric eigenproblems and rank computations used by the diagnostics.

use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Eigenvalues (nondecreasing) and eigenvectors of a symmetric matrix.
pub fn sym_eigen(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Factorization(format!("symmetric eigendecomposition: {e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..m.nrows()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

/// `M^{-1/2}` of a symmetric positive definite matrix.
pub fn inverse_sqrt(m: &Mat<f64>) -> Result<Mat<f64>> {
    let (values, vectors) = sym_eigen(m)?;
    if values.first().is_some_and(|&v| v <= 0.0) {
        return Err(Error::Factorization(format!(
            "matrix is not positive definite (smallest eigenvalue {:.3e})",
            values[0]
        )));
    }
    let n = m.nrows();
    let scaled = Mat::<f64>::from_fn(n, n, |i, j| vectors[(i, j)] / values[j].sqrt());
    Ok(&scaled * vectors.transpose())
}

/// Eigenvalues of the pencil `A x = lambda M x` with `M` symmetric positive definite.
pub fn generalized_eigenvalues(a: &Mat<f64>, m: &Mat<f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let w = inverse_sqrt(m)?;
    let s = &w * a * &w;
    let sym = Mat::<f64>::from_fn(s.nrows(), s.ncols(), |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    Ok(sym_eigen(&sym)?.0)
}

/// Least-norm solution of `G x = b` for symmetric positive semidefinite `G`,
/// discarding eigenvalues below `rel_tol * max eigenvalue`.
pub fn pseudo_solve(g: &Mat<f64>, b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let n = g.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (values, vectors) = sym_eigen(g)?;
    let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x = vec![0.0; n];
    for (j, &lambda) in values.iter().enumerate() {
        if lambda <= rel_tol * top {
            continue;
        }
        let coef: f64 = (0..n).map(|i| vectors[(i, j)] * b[i]).sum::<f64>() / lambda;
        for i in 0..n {
            x[i] += coef * vectors[(i, j)];
        }
    }
    Ok(x)
}

/// Numerical rank from singular values, relative threshold `rel_tol`.
pub fn dense_rank(m: &Mat<f64>, rel_tol: f64) -> Result<usize> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    let s = m
        .singular_values()
        .map_err(|e| Error::Factorization(format!("singular values: {e:?}")))?;
    let top = s.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(s.iter().filter(|&&v| v > rel_tol * top).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pencil_of_diagonals() {
        let a = Mat::<f64>::from_fn(3, 3, |i, j| if i == j { (i + 1) as f64 } else { 0.0 });
        let m = Mat::<f64>::from_fn(3, 3, |i, j| if i == j { 2.0 } else { 0.0 });
        let ev = generalized_eigenvalues(&a, &m).unwrap();
        for (k, v) in ev.iter().enumerate() {
            assert!((v - (k + 1) as f64 / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rank_and_pseudo_solve() {
        // rank-one outer product
        let m = Mat::<f64>::from_fn(3, 3, |i, j| ((i + 1) * (j + 1)) as f64);
        assert_eq!(dense_rank(&m, 1e-10).unwrap(), 1);
        let x = pseudo_solve(&m, &[1.0, 2.0, 3.0], 1e-10).unwrap();
        // least-norm solution is v / 14 with v = (1, 2, 3)
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - (i + 1) as f64 / 14.0).abs() < 1e-14);
        }
    }
}
