//! Brute-force reference implementations. Deliberately slow and independent
//! of the engine: own eigensolver, no Löwdin basis.

use nalgebra::{DMatrix, DVector};

use crate::error::{AlsError, Result};
use crate::tensor::{DenseTensor, SpdOperator};

/// Largest tensor space the oracle accepts.
pub const ORACLE_CAP: usize = 256;
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns `(eigenvalues, eigenvectors as columns)`, unsorted.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || scale == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Minimum-norm minimizer of `q ↦ ½⟨A W q, W q⟩ − ⟨b, W q⟩`, computed as
/// `G⁺ Wᵀ b` with `G = Wᵀ A W` and the same relative truncation rule the
/// engine applies.
pub fn brute_least_squares(
    w: &DMatrix<f64>,
    op: &SpdOperator,
    b: &DenseTensor,
    eps_rank: f64,
) -> Result<Vec<f64>> {
    let n = w.nrows();
    if n > ORACLE_CAP {
        return Err(AlsError::CapExceeded {
            entries: n,
            cap: ORACLE_CAP,
        });
    }
    if op.shape() != b.shape() || b.shape().len() != n {
        return Err(AlsError::ShapeMismatch("oracle inputs".into()));
    }
    let a = op.to_dense();
    let g = w.transpose() * &a * w;
    let g = (&g + g.transpose()) * 0.5;
    let (vals, vecs) = jacobi_eigen(&g);
    let top = vals.iter().copied().fold(0.0, f64::max);
    let rhs = w.transpose() * DVector::from_column_slice(b.values());
    let mut q = DVector::zeros(w.ncols());
    if top > 0.0 {
        for (i, &l) in vals.iter().enumerate() {
            if l > eps_rank * top {
                let u = vecs.column(i);
                q += u * (u.dot(&rhs) / l);
            }
        }
    }
    Ok(q.as_slice().to_vec())
}

/// Central differences `(F(q + h eᵢ) − F(q − h eᵢ)) / 2h`.
pub fn finite_diff_grad<F: Fn(&[f64]) -> f64>(f: F, q: &[f64], h: f64) -> Result<Vec<f64>> {
    if h <= 0.0 || !h.is_finite() {
        return Err(AlsError::InvalidArgument("finite-difference step must be > 0".into()));
    }
    let mut x = q.to_vec();
    Ok((0..q.len())
        .map(|i| {
            x[i] = q[i] + h;
            let up = f(&x);
            x[i] = q[i] - h;
            let down = f(&x);
            x[i] = q[i];
            (up - down) / (2.0 * h)
        })
        .collect())
}

/// Micro-step contraction rate for the `b_λ` family. The sweep rate is its cube.
pub fn q_lambda_formula(lambda: f64) -> f64 {
    let a = 3.0 * lambda + lambda * lambda;
    0.5 * lambda * (a + (a * a + 4.0 * lambda).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{unit, Shape};

    #[test]
    fn jacobi_on_known_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (mut vals, vecs) = jacobi_eigen(&m);
        let recon = &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals.clone())) * vecs.transpose();
        assert!((recon - &m).amax() < 1e-14);
        vals.sort_by(f64::total_cmp);
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn repeated_column_gives_split_solution() {
        let shape = Shape::new(vec![2]).unwrap();
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let b = DenseTensor::new(shape.clone(), unit(2, 0)).unwrap();
        let q = brute_least_squares(&w, &SpdOperator::identity(shape), &b, 1e-12).unwrap();
        assert!((q[0] - 0.5).abs() < 1e-15 && (q[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn orthonormal_columns_project() {
        let shape = Shape::new(vec![3]).unwrap();
        let w = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let b = DenseTensor::new(shape.clone(), vec![3.0, -2.0, 7.0]).unwrap();
        let q = brute_least_squares(&w, &SpdOperator::identity(shape), &b, 1e-12).unwrap();
        assert!((q[0] - 3.0).abs() < 1e-14 && (q[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn fd_of_square() {
        let g = finite_diff_grad(|q| q[0] * q[0], &[1.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-9);
        assert!(finite_diff_grad(|q| q[0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn rate_formula_values() {
        assert_eq!(q_lambda_formula(0.0), 0.0);
        assert_eq!(q_lambda_formula(0.5), 1.0);
        assert!((q_lambda_formula(0.46) - 0.847).abs() < 5e-4);
    }

    #[test]
    fn rate_formula_increasing() {
        let grid: Vec<f64> = (0..=1000).map(|i| q_lambda_formula(0.5 * i as f64 / 1000.0)).collect();
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
    }
}
