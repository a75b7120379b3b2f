use std::io::Write;

use crate::error::{Error, Result};
use crate::mesh::sig17;

/// Stored-entry count above which [`SparseMatrix::matvec`] uses rayon (when enabled).
pub const PAR_MATVEC_MIN_NNZ: usize = 1 << 15;

/// Square matrix in compressed sparse row layout.
///
/// Column indices are strictly increasing within a row and no explicit
/// zeros are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates `(row, col, value)` contributions; duplicates are summed.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        let mut iter = self.entries.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v != 0.0 {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl SparseMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut b = TripletBuilder::with_capacity(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            b.add(i, i, v);
        }
        b.build()
    }

    /// Builds from a row-major dense matrix, dropping zeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut b = TripletBuilder::new(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                b.add(i, j, v);
            }
        }
        Ok(b.build())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(i) {
                row[c] = v;
            }
        }
        d
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    /// `(lower, upper)` bandwidths.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: len,
            });
        }
        Ok(())
    }

    #[inline]
    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for p in self.row_ptr[i]..self.row_ptr[i + 1] {
            s += self.values[p] * x[self.col_idx[p]];
        }
        s
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        #[cfg(feature = "parallel")]
        if self.nnz() >= PAR_MATVEC_MIN_NNZ {
            self.par_fill(x, y);
            return Ok(());
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row_dot(i, x);
        }
        Ok(())
    }

    /// `A·x`; row loop runs on rayon for large matrices.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    /// `A·x` on the calling thread only.
    pub fn matvec_seq(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        Ok((0..self.n).map(|i| self.row_dot(i, x)).collect())
    }

    #[cfg(feature = "parallel")]
    fn par_fill(&self, x: &[f64], y: &mut [f64]) {
        use rayon::prelude::*;
        y.par_chunks_mut(1024).enumerate().for_each(|(c, chunk)| {
            let base = c * 1024;
            for (o, yi) in chunk.iter_mut().enumerate() {
                *yi = self.row_dot(base + o, x);
            }
        });
    }

    /// `A·x` with the row loop always on rayon.
    #[cfg(feature = "parallel")]
    pub fn matvec_par(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let mut y = vec![0.0; self.n];
        self.par_fill(x, &mut y);
        Ok(y)
    }

    /// Max absolute row sum.
    pub fn operator_norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut b = TripletBuilder::with_capacity(self.n, self.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                b.add(j, i, v);
            }
        }
        b.build()
    }

    /// `self · other`.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        self.check_len(other.n)?;
        let mut b = TripletBuilder::new(self.n);
        let mut acc = vec![0.0; self.n];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; self.n];
        for i in 0..self.n {
            for (k, a) in self.row(i) {
                for (j, v) in other.row(k) {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * v;
                }
            }
            for &j in &touched {
                b.add(i, j, acc[j]);
                acc[j] = 0.0;
                mark[j] = false;
            }
            touched.clear();
        }
        Ok(b.build())
    }

    /// `alpha·self + beta·other`.
    pub fn add_scaled(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> Result<SparseMatrix> {
        self.check_len(other.n)?;
        let mut b = TripletBuilder::with_capacity(self.n, self.nnz() + other.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                b.add(i, j, alpha * v);
            }
            for (j, v) in other.row(i) {
                b.add(i, j, beta * v);
            }
        }
        Ok(b.build())
    }

    pub fn scale(&self, c: f64) -> SparseMatrix {
        if c == 0.0 {
            return SparseMatrix::zeros(self.n);
        }
        let mut m = self.clone();
        for v in &mut m.values {
            *v *= c;
        }
        m
    }

    /// Replaces the listed rows by zero rows.
    pub fn zero_rows(&self, rows: &[usize]) -> SparseMatrix {
        let mut drop = vec![false; self.n];
        for &r in rows {
            drop[r] = true;
        }
        let mut b = TripletBuilder::with_capacity(self.n, self.nnz());
        for i in (0..self.n).filter(|&i| !drop[i]) {
            for (j, v) in self.row(i) {
                b.add(i, j, v);
            }
        }
        b.build()
    }

    /// `Σ_i w_i A_ij` for every column `j`.
    pub fn weighted_column_sums(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check_len(w.len())?;
        let mut s = vec![0.0; self.n];
        for (i, wi) in w.iter().enumerate() {
            for (j, v) in self.row(i) {
                s[j] += wi * v;
            }
        }
        Ok(s)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Coordinate dump, one `row col value` triple per line.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(w, "{i} {j} {}", sig17(v))?;
            }
        }
        Ok(())
    }
}

/// Scheme pair `B₁ Uⁿ⁺¹ = B₀ Uⁿ + F`.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub b1: SparseMatrix,
    pub b0: SparseMatrix,
    pub source: Vec<f64>,
    pub time_independent: bool,
}

impl SparseOperator {
    pub fn new(
        b1: SparseMatrix,
        b0: SparseMatrix,
        source: Vec<f64>,
        time_independent: bool,
    ) -> Result<Self> {
        if b0.dim() != b1.dim() {
            return Err(Error::DimensionMismatch {
                expected: b1.dim(),
                got: b0.dim(),
            });
        }
        if source.len() != b1.dim() {
            return Err(Error::DimensionMismatch {
                expected: b1.dim(),
                got: source.len(),
            });
        }
        Ok(Self {
            b1,
            b0,
            source,
            time_independent,
        })
    }

    pub fn dim(&self) -> usize {
        self.b1.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SparseMatrix {
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            for j in 0..n {
                if rng.random::<f64>() < density {
                    b.add(i, j, rng.random_range(-2.0..2.0));
                }
            }
        }
        b.build()
    }

    fn dense_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum())
            .collect()
    }

    #[test]
    fn builder_sums_duplicates_and_drops_zeros() {
        let mut b = TripletBuilder::new(3);
        b.add(0, 2, 1.0);
        b.add(0, 0, 2.0);
        b.add(0, 2, 0.5);
        b.add(1, 1, 1.0);
        b.add(1, 1, -1.0);
        b.add(2, 0, 3.0);
        let m = b.build();
        assert_eq!(m.row_ptr(), &[0, 2, 2, 3]);
        assert_eq!(m.col_idx(), &[0, 2, 0]);
        assert_eq!(m.values(), &[2.0, 1.5, 3.0]);
    }

    #[test]
    fn identity_and_zero_products() {
        let x = vec![1.5, -2.0, 0.25, 8.0];
        assert_eq!(SparseMatrix::identity(4).matvec(&x).unwrap(), x);
        assert_eq!(SparseMatrix::zeros(4).matvec(&x).unwrap(), vec![0.0; 4]);
        assert!(SparseMatrix::identity(3).matvec(&x).is_err());
    }

    #[test]
    fn matvec_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_sparse(&mut rng, 5, 0.5);
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = a.matvec(&x).unwrap();
            let z = dense_matvec(&a.to_dense(), &x);
            for (p, q) in y.iter().zip(&z) {
                assert!((p - q).abs() <= 4.0 * f64::EPSILON * q.abs().max(1.0));
            }
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matvec_is_bitwise_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_sparse(&mut rng, 300, 0.05);
        let x: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert_eq!(a.matvec_par(&x).unwrap(), a.matvec_seq(&x).unwrap());
    }

    #[test]
    fn norm_inf() {
        assert_eq!(SparseMatrix::identity(5).operator_norm_inf(), 1.0);
        let m = SparseMatrix::from_dense(&[
            vec![0.5, -0.5, 0.0],
            vec![1.0, -1.0, 1.0],
            vec![0.0, 0.0, -2.0],
        ])
        .unwrap();
        assert_eq!(m.operator_norm_inf(), 3.0);
    }

    #[test]
    fn norm_is_submultiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = random_sparse(&mut rng, 8, 0.4);
            let b = random_sparse(&mut rng, 8, 0.4);
            let ab = a.matmul(&b).unwrap();
            assert!(
                ab.operator_norm_inf()
                    <= a.operator_norm_inf() * b.operator_norm_inf() * (1.0 + 1e-14)
            );
        }
    }

    #[test]
    fn matmul_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_sparse(&mut rng, 6, 0.5);
        let b = random_sparse(&mut rng, 6, 0.5);
        let ab = a.matmul(&b).unwrap().to_dense();
        let (da, db) = (a.to_dense(), b.to_dense());
        for i in 0..6 {
            for j in 0..6 {
                let s: f64 = (0..6).map(|k| da[i][k] * db[k][j]).sum();
                assert!((ab[i][j] - s).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn bandwidth_and_transpose() {
        let m = SparseMatrix::from_dense(&[
            vec![1.0, 0.0, 2.0],
            vec![0.0, 1.0, 0.0],
            vec![4.0, 5.0, 1.0],
        ])
        .unwrap();
        assert_eq!(m.bandwidth(), (2, 2));
        let t = m.transpose();
        assert_eq!(t.get(0, 2), 4.0);
        assert_eq!(t.get(2, 0), 2.0);
        assert_eq!(t.get(1, 2), 5.0);
    }

    #[test]
    fn coordinate_dump() {
        let m = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![-0.5, 2.0]]).unwrap();
        let mut buf = Vec::new();
        m.write_coordinate(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1 0 -5.0000000000000000e-1"));
    }
}
