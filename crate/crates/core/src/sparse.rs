//! Thin helpers around faer's compressed sparse column matrices.

use std::collections::BTreeMap;
use std::io::Write;

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

pub type SparseMat = SparseColMat<usize, f64>;

/// Accumulating triplet builder; duplicates are summed.
#[derive(Clone, Debug)]
pub struct Triplets {
    rows: usize,
    cols: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl Triplets {
    pub fn new(rows: usize, cols: usize) -> Self {
        Triplets {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        if v != 0.0 {
            self.entries.push(Triplet::new(r, c, v));
        }
    }

    pub fn extend(&mut self, other: &Triplets) {
        self.entries.extend_from_slice(&other.entries);
    }

    pub fn build(&self) -> SparseMat {
        SparseColMat::try_new_from_triplets(self.rows, self.cols, &self.entries).expect("valid triplets")
    }
}

/// Builder where each entry is written once; later writes of the same entry
/// are ignored. Used for interpolation-type operators on shared DOFs.
#[derive(Clone, Debug, Default)]
pub struct SetOnce {
    entries: BTreeMap<(usize, usize), f64>,
}

impl SetOnce {
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.entries.entry((r, c)).or_insert(v);
    }

    pub fn into_triplets(self, rows: usize, cols: usize, out: &mut Triplets) {
        debug_assert!(out.rows == rows && out.cols == cols);
        for ((r, c), v) in self.entries {
            out.add(r, c, v);
        }
    }
}

pub fn zeros(rows: usize, cols: usize) -> SparseMat {
    Triplets::new(rows, cols).build()
}

pub fn identity(n: usize) -> SparseMat {
    let mut t = Triplets::new(n, n);
    for i in 0..n {
        t.add(i, i, 1.0);
    }
    t.build()
}

/// Iterates `(row, col, value)` over stored entries.
pub fn entries(m: &SparseMat) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
    (0..m.ncols()).flat_map(move |j| {
        m.row_idx_of_col_raw(j)
            .iter()
            .zip(m.val_of_col(j))
            .map(move |(&i, &v)| (i, j, v))
    })
}

pub fn mul_vec(m: &SparseMat, x: &[f64]) -> Vec<f64> {
    assert_eq!(m.ncols(), x.len());
    let mut y = vec![0.0; m.nrows()];
    for (i, j, v) in entries(m) {
        y[i] += v * x[j];
    }
    y
}

pub fn mul_t_vec(m: &SparseMat, x: &[f64]) -> Vec<f64> {
    assert_eq!(m.nrows(), x.len());
    let mut y = vec![0.0; m.ncols()];
    for (i, j, v) in entries(m) {
        y[j] += v * x[i];
    }
    y
}

pub fn matmul(a: &SparseMat, b: &SparseMat) -> SparseMat {
    a * b
}

pub fn transpose(a: &SparseMat) -> SparseMat {
    a.transpose().to_col_major().expect("transpose")
}

pub fn add(a: &SparseMat, b: &SparseMat) -> SparseMat {
    a + b
}

pub fn scale(a: &SparseMat, s: f64) -> SparseMat {
    let mut t = Triplets::new(a.nrows(), a.ncols());
    for (i, j, v) in entries(a) {
        t.add(i, j, s * v);
    }
    t.build()
}

pub fn max_abs(m: &SparseMat) -> f64 {
    entries(m).fold(0.0, |acc, (_, _, v)| acc.max(v.abs()))
}

/// Largest entry of `a - a^T`.
pub fn asymmetry(m: &SparseMat) -> f64 {
    let t = transpose(m);
    max_abs(&(m - &t))
}

pub fn to_dense(m: &SparseMat) -> Mat<f64> {
    let mut d = Mat::<f64>::zeros(m.nrows(), m.ncols());
    for (i, j, v) in entries(m) {
        d[(i, j)] += v;
    }
    d
}

/// Keeps the rows `rows` and columns `cols` (each given as an ordered index list).
pub fn restrict(m: &SparseMat, rows: &[usize], cols: &[usize]) -> SparseMat {
    let mut rmap = vec![usize::MAX; m.nrows()];
    for (k, &r) in rows.iter().enumerate() {
        rmap[r] = k;
    }
    let mut cmap = vec![usize::MAX; m.ncols()];
    for (k, &c) in cols.iter().enumerate() {
        cmap[c] = k;
    }
    let mut t = Triplets::new(rows.len(), cols.len());
    for (i, j, v) in entries(m) {
        if rmap[i] != usize::MAX && cmap[j] != usize::MAX {
            t.add(rmap[i], cmap[j], v);
        }
    }
    t.build()
}

/// Writes one `row col value` line per stored entry (zero-based indices).
pub fn write_coordinate(m: &SparseMat, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "% {} {} {}", m.nrows(), m.ncols(), m.compute_nnz())?;
    for (i, j, v) in entries(m) {
        writeln!(out, "{i} {j} {v:e}")?;
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_sum_and_set_once_does_not() {
        let mut t = Triplets::new(2, 2);
        t.add(0, 1, 1.5);
        t.add(0, 1, 1.5);
        assert_eq!(to_dense(&t.build())[(0, 1)], 3.0);
        let mut s = SetOnce::default();
        s.set(1, 0, 2.0);
        s.set(1, 0, 2.0);
        let mut t = Triplets::new(2, 2);
        s.into_triplets(2, 2, &mut t);
        assert_eq!(to_dense(&t.build())[(1, 0)], 2.0);
    }

    #[test]
    fn coordinate_dump() {
        let mut t = Triplets::new(3, 2);
        t.add(2, 1, -0.5);
        let mut buf = Vec::new();
        write_coordinate(&t.build(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "2 1 -5e-1");
    }

    #[test]
    fn restriction_and_products() {
        let mut t = Triplets::new(3, 3);
        for i in 0..3 {
            t.add(i, i, (i + 1) as f64);
        }
        t.add(0, 2, 4.0);
        let m = t.build();
        let r = restrict(&m, &[0, 2], &[2]);
        assert_eq!(to_dense(&r)[(0, 0)], 4.0);
        assert_eq!(to_dense(&r)[(1, 0)], 3.0);
        assert_eq!(mul_vec(&m, &[1.0, 1.0, 1.0]), vec![5.0, 2.0, 3.0]);
        assert_eq!(mul_t_vec(&m, &[1.0, 1.0, 1.0]), vec![1.0, 2.0, 7.0]);
        assert!(asymmetry(&m) == 4.0);
    }
}
