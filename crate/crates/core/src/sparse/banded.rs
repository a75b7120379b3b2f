//! Banded LU factorization with partial pivoting.
//!
//! Storage follows the LAPACK `gbtrf` layout: column-major with leading
//! dimension `2·kl + ku + 1`, entry `(i, j)` at band row `kl + ku + i − j`.
//! The extra `kl` rows hold fill-in produced by row interchanges.

use super::csr::SparseMatrix;
use crate::error::{Error, Result};

/// Pivots below this fraction of the largest matrix entry are treated as zero.
const PIVOT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    min_pivot_ratio: f64,
}

impl BandedLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let n = a.dim();
        let (kl, ku) = a.bandwidth();
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                ab[j * ldab + kv + i - j] = v;
            }
        }
        let scale = a.max_abs_entry();
        let mut ipiv = vec![0; n];
        let mut ju = 0usize;
        let mut pmin = f64::INFINITY;
        let mut pmax = 0.0f64;

        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab;
            let mut jp = 0;
            let mut best = ab[col + kv].abs();
            for r in 1..=km {
                let v = ab[col + kv + r].abs();
                if v > best {
                    best = v;
                    jp = r;
                }
            }
            ipiv[j] = j + jp;
            if !(best > PIVOT_FLOOR * scale) || !best.is_finite() {
                return Err(Error::Singular {
                    row: j,
                    pivot: best,
                    scale,
                });
            }
            pmin = pmin.min(best);
            pmax = pmax.max(best);
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let base = c * ldab + kv;
                    ab.swap(base + j - c, base + j + jp - c);
                }
            }
            let pivot = ab[col + kv];
            for r in 1..=km {
                ab[col + kv + r] /= pivot;
            }
            for c in j + 1..=ju {
                let cb = c * ldab + kv;
                let t = ab[cb + j - c];
                if t != 0.0 {
                    for r in 1..=km {
                        ab[cb + j + r - c] -= ab[col + kv + r] * t;
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv,
            min_pivot_ratio: if pmax > 0.0 { pmin / pmax } else { 0.0 },
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    /// Smallest over largest pivot magnitude; a crude conditioning indicator.
    pub fn min_pivot_ratio(&self) -> f64 {
        self.min_pivot_ratio
    }

    /// Overwrites `b` with `A⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let n = self.n;
        let kv = self.kl + self.ku;
        let ldab = self.ldab;
        if self.kl > 0 {
            for j in 0..n.saturating_sub(1) {
                let lm = self.kl.min(n - 1 - j);
                let p = self.ipiv[j];
                if p != j {
                    b.swap(j, p);
                }
                let bj = b[j];
                if bj != 0.0 {
                    let col = j * ldab + kv;
                    for r in 1..=lm {
                        b[j + r] -= self.ab[col + r] * bj;
                    }
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * ldab + kv;
            b[j] /= self.ab[col];
            let t = b[j];
            if t != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    b[i] -= self.ab[col + i - j] * t;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::csr::TripletBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tridiag(n: usize) -> SparseMatrix {
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 2.0);
            if i > 0 {
                b.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                b.add(i, i + 1, -1.0);
            }
        }
        b.build()
    }

    #[test]
    fn tridiagonal_hand_solution() {
        let lu = BandedLu::factor(&tridiag(4)).unwrap();
        let mut x = vec![1.0; 4];
        lu.solve_in_place(&mut x).unwrap();
        for (a, b) in x.iter().zip([2.0, 3.0, 3.0, 2.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn pivoting_is_required_and_works() {
        // zero leading diagonal entry forces an interchange
        let a = SparseMatrix::from_dense(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![2.0, 1.0, 3.0, 0.0],
            vec![0.0, 4.0, 1.0, 1.0],
            vec![0.0, 0.0, 1.0, 5.0],
        ])
        .unwrap();
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut b = a.matvec(&x).unwrap();
        BandedLu::factor(&a)
            .unwrap()
            .solve_in_place(&mut b)
            .unwrap();
        for (p, q) in b.iter().zip(x) {
            assert!((p - q).abs() < 1e-13);
        }
    }

    #[test]
    fn random_banded_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &(n, kl, ku) in &[(30, 2, 2), (50, 3, 1), (40, 0, 4), (25, 5, 0), (60, 7, 7)] {
            let mut b = TripletBuilder::new(n);
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    b.add(i, j, rng.random_range(-1.0..1.0));
                }
                b.add(i, i, 0.5);
            }
            let a = b.build();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b0 = a.matvec(&x).unwrap();
            let mut y = b0.clone();
            let lu = BandedLu::factor(&a).unwrap();
            lu.solve_in_place(&mut y).unwrap();
            // backward error; random triangular factors can be badly conditioned
            let ay = a.matvec(&y).unwrap();
            let r = ay
                .iter()
                .zip(&b0)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            let ynorm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let rel = r / (a.operator_norm_inf() * ynorm);
            assert!(rel < 1e-14, "n={n} kl={kl} ku={ku} rel={rel}");
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = SparseMatrix::from_dense(&[
            vec![1.0, 2.0, 0.0],
            vec![2.0, 4.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(matches!(
            BandedLu::factor(&a),
            Err(Error::Singular { row: 1, .. })
        ));
    }
}
