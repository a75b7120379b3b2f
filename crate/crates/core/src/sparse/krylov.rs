//! ILU(0)-preconditioned BiCGSTAB for the large 2D systems.

use super::csr::SparseMatrix;
use crate::error::{Error, Result};

/// Incomplete LU with the sparsity pattern of `A`.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let n = a.dim();
        let row_ptr = a.row_ptr().to_vec();
        let col_idx = a.col_idx().to_vec();
        let mut values = a.values().to_vec();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for p in row_ptr[i]..row_ptr[i + 1] {
                if col_idx[p] == i {
                    diag[i] = p;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::Singular {
                    row: i,
                    pivot: 0.0,
                    scale: a.max_abs_entry(),
                });
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (row_ptr[i], row_ptr[i + 1]);
            for p in start..end {
                pos[col_idx[p]] = p;
            }
            for p in start..diag[i] {
                let k = col_idx[p];
                let pivot = values[diag[k]];
                if pivot == 0.0 {
                    return Err(Error::Singular {
                        row: k,
                        pivot,
                        scale: a.max_abs_entry(),
                    });
                }
                let lik = values[p] / pivot;
                values[p] = lik;
                for q in diag[k] + 1..row_ptr[k + 1] {
                    let target = pos[col_idx[q]];
                    if target != usize::MAX {
                        values[target] -= lik * values[q];
                    }
                }
            }
            for p in start..end {
                pos[col_idx[p]] = usize::MAX;
            }
            if values[diag[i]] == 0.0 {
                return Err(Error::Singular {
                    row: i,
                    pivot: 0.0,
                    scale: a.max_abs_entry(),
                });
            }
        }
        Ok(Self {
            row_ptr,
            col_idx,
            values,
            diag,
        })
    }

    /// `z = (LU)⁻¹ r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut s = r[i];
            for p in self.row_ptr[i]..self.diag[i] {
                s -= self.values[p] * z[self.col_idx[p]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for p in self.diag[i] + 1..self.row_ptr[i + 1] {
                s -= self.values[p] * z[self.col_idx[p]];
            }
            z[i] = s / self.values[self.diag[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
}

/// Right-preconditioned BiCGSTAB. `x` holds the initial guess on entry.
///
/// Stops when `‖b − A x‖_∞ / max(1, ‖b‖_∞) ≤ tol` for the true residual and
/// returns `(iterations, relative residual)`.
pub fn bicgstab(
    a: &SparseMatrix,
    ilu: &Ilu0,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<(usize, f64)> {
    let n = a.dim();
    let scale = norm_inf(b).max(1.0);
    let mut r = vec![0.0; n];
    let residual = |x: &[f64], r: &mut [f64]| -> Result<f64> {
        a.matvec_into(x, r)?;
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        Ok(norm_inf(r) / scale)
    };
    let mut rel = residual(x, &mut r)?;
    if rel <= tol {
        return Ok((0, rel));
    }
    let mut r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);

    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            // breakdown: restart from the current iterate
            rel = residual(x, &mut r)?;
            r_hat.copy_from_slice(&r);
            p.iter_mut().for_each(|v| *v = 0.0);
            v.iter_mut().for_each(|q| *q = 0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            if rel <= tol {
                return Ok((it, rel));
            }
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        ilu.apply(&p, &mut p_hat);
        a.matvec_into(&p_hat, &mut v)?;
        alpha = rho / dot(&r_hat, &v);
        // r now holds s = r - alpha v
        for i in 0..n {
            r[i] -= alpha * v[i];
        }
        if norm_inf(&r) / scale <= 0.1 * tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            rel = residual(x, &mut r)?;
            if rel <= tol {
                return Ok((it, rel));
            }
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|q| *q = 0.0);
            v.iter_mut().for_each(|q| *q = 0.0);
            continue;
        }
        ilu.apply(&r, &mut s_hat);
        a.matvec_into(&s_hat, &mut t)?;
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &r) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] -= omega * t[i];
        }
        if norm_inf(&r) / scale <= tol {
            rel = residual(x, &mut r)?;
            if rel <= tol {
                return Ok((it, rel));
            }
        }
        if omega == 0.0 {
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|q| *q = 0.0);
            v.iter_mut().for_each(|q| *q = 0.0);
        }
    }
    rel = residual(x, &mut r)?;
    Err(Error::NotConverged {
        method: "ilu0-bicgstab",
        iterations: max_iter,
        residual: rel,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::csr::TripletBuilder;

    fn laplace_2d(m: usize, shift: f64) -> SparseMatrix {
        let n = m * m;
        let mut b = TripletBuilder::new(n);
        for j in 0..m {
            for i in 0..m {
                let k = j * m + i;
                b.add(k, k, 4.0 + shift);
                if i > 0 {
                    b.add(k, k - 1, -1.0);
                }
                if i + 1 < m {
                    b.add(k, k + 1, -1.2);
                }
                if j > 0 {
                    b.add(k, k - m, -1.0);
                }
                if j + 1 < m {
                    b.add(k, k + m, -0.8);
                }
            }
        }
        b.build()
    }

    #[test]
    fn ilu0_is_exact_for_tridiagonal() {
        let a = SparseMatrix::from_dense(&[
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ])
        .unwrap();
        let ilu = Ilu0::factor(&a).unwrap();
        let mut z = vec![0.0; 3];
        ilu.apply(&[1.0, 1.0, 1.0], &mut z);
        for (p, q) in z.iter().zip([1.5, 2.0, 1.5]) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn bicgstab_solves_nonsymmetric_system() {
        let a = laplace_2d(30, 0.1);
        let x_true: Vec<f64> = (0..900).map(|k| ((k as f64) * 0.37).sin()).collect();
        let b = a.matvec(&x_true).unwrap();
        let ilu = Ilu0::factor(&a).unwrap();
        let mut x = vec![0.0; 900];
        let (iters, rel) = bicgstab(&a, &ilu, &b, &mut x, 1e-12, 500).unwrap();
        assert!(rel <= 1e-12);
        assert!(iters > 0);
        let err = x
            .iter()
            .zip(&x_true)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn nonconvergence_is_reported() {
        let a = laplace_2d(20, 0.0);
        let b = vec![1.0; 400];
        let ilu = Ilu0::factor(&a).unwrap();
        let mut x = vec![0.0; 400];
        let err = bicgstab(&a, &ilu, &b, &mut x, 1e-14, 1).unwrap_err();
        assert!(matches!(err, Error::NotConverged { iterations: 1, .. }));
    }
}
