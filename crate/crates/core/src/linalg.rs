//! Small dense symmetric linear algebra: cyclic Jacobi eigendecomposition
//! and the inverse-square-root transforms built on it.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Eigendecomposition of a symmetric matrix, `a = v * diag(eigenvalues) * v^T`.
/// Columns of `v` are the eigenvectors, in the same order as `eigenvalues`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub eigenvalues: Vec<f64>,
    /// Row-major n×n orthogonal matrix; column k is the eigenvector of
    /// `eigenvalues[k]`.
    pub vectors: Vec<f64>,
    pub dim: usize,
}

const MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi rotations. Converges when the off-diagonal Frobenius norm
/// drops below 1e-12 times the diagonal norm.
pub fn sym_eigen(matrix: &Tensor) -> Result<SymEigen> {
    let n = matrix.rows();
    if matrix.shape().len() != 2 || matrix.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "symmetric eigendecomposition needs a square matrix, got {:?}",
            matrix.shape()
        )));
    }
    let sym_tol = 1e-9 * (1.0 + frobenius(matrix.values()));
    for p in 0..n {
        for q in (p + 1)..n {
            if (matrix.values()[p * n + q] - matrix.values()[q * n + p]).abs() > sym_tol {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not symmetric at ({p},{q})"
                )));
            }
        }
    }

    let mut a = matrix.values().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    for _sweep in 0..MAX_SWEEPS {
        let off = off_diag_norm(&a, n);
        let diag = diag_norm(&a, n);
        if off <= 1e-12 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                // smaller-angle root of t^2 + 2 t theta - 1 = 0
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let s = theta.signum();
                    s / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for i in 0..n {
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[p * n + j];
                    let aqj = a[q * n + j];
                    a[p * n + j] = c * apj - s * aqj;
                    a[q * n + j] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }

    let off = off_diag_norm(&a, n);
    let diag = diag_norm(&a, n);
    if off > 1e-10 * diag.max(f64::MIN_POSITIVE) {
        return Err(Error::Numeric(format!(
            "Jacobi rotations did not converge (off-diagonal norm {off:.3e})"
        )));
    }

    let eigenvalues: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    Ok(SymEigen {
        eigenvalues,
        vectors: v,
        dim: n,
    })
}

fn off_diag_norm(a: &[f64], n: usize) -> f64 {
    let mut acc = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                acc += a[p * n + q] * a[p * n + q];
            }
        }
    }
    acc.sqrt()
}

fn diag_norm(a: &[f64], n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        acc += a[i * n + i] * a[i * n + i];
    }
    acc.sqrt()
}

fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `v * diag(f(eigenvalue)) * v^T` as a row-major square matrix.
fn spectral_map(eig: &SymEigen, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = eig.dim;
    let mapped: Vec<f64> = eig.eigenvalues.iter().map(|&l| f(l)).collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += eig.vectors[i * n + k] * mapped[k] * eig.vectors[j * n + k];
            }
            out[i * n + j] = acc;
        }
    }
    out
}

/// Symmetric inverse square root of `s + shift * I`, with negative
/// eigenvalues of `s` clamped to zero before the shift. Fails when any
/// shifted eigenvalue is not safely positive.
pub fn inverse_sqrt_shifted(s: &Tensor, shift: f64) -> Result<Tensor> {
    let eig = sym_eigen(s)?;
    let scale = eig
        .eigenvalues
        .iter()
        .fold(0.0_f64, |m, &l| m.max(l.abs()));
    let floor = 1e-12 * scale.max(1.0);
    let clamped = SymEigen {
        eigenvalues: eig.eigenvalues.iter().map(|&l| l.max(0.0) + shift).collect(),
        vectors: eig.vectors,
        dim: eig.dim,
    };
    if let Some(bad) = clamped.eigenvalues.iter().find(|&&l| l < floor) {
        return Err(Error::Numeric(format!(
            "second moment is singular after shift {shift} (eigenvalue {bad:.3e}); \
             use a larger regularization value"
        )));
    }
    let w = spectral_map(&clamped, |l| 1.0 / l.sqrt());
    Tensor::from_rows(eig.dim, eig.dim, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::DetRng;

    fn mat(n: usize, vals: &[f64]) -> Tensor {
        Tensor::from_rows(n, n, vals.to_vec()).unwrap()
    }

    fn reconstruct(eig: &SymEigen) -> Vec<f64> {
        spectral_map(eig, |l| l)
    }

    #[test]
    fn diagonal_matrix_eigenvalues() {
        let s = mat(2, &[4.0, 0.0, 0.0, 1.0]);
        let eig = sym_eigen(&s).unwrap();
        let mut ev = eig.eigenvalues.clone();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ev[0] - 1.0).abs() < 1e-14);
        assert!((ev[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn known_2x2() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let s = mat(2, &[2.0, 1.0, 1.0, 2.0]);
        let eig = sym_eigen(&s).unwrap();
        let mut ev = eig.eigenvalues.clone();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ev[0] - 1.0).abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_matches_input() {
        let mut rng = DetRng::stream(11, "linalg/test", 0);
        for dim in [2usize, 5, 16, 33] {
            let mut s = vec![0.0; dim * dim];
            for i in 0..dim {
                for j in 0..=i {
                    let x = rng.normal();
                    s[i * dim + j] = x;
                    s[j * dim + i] = x;
                }
            }
            let t = mat(dim, &s);
            let eig = sym_eigen(&t).unwrap();
            let back = reconstruct(&eig);
            let err = s
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let scale = frobenius(&s).max(1.0);
            assert!(err / scale < 1e-12, "dim {dim}: relative error {}", err / scale);
        }
    }

    #[test]
    fn inverse_sqrt_diagonal_example() {
        let s = mat(2, &[4.0, 0.0, 0.0, 1.0]);
        let w = inverse_sqrt_shifted(&s, 0.0).unwrap();
        let expect = [0.5, 0.0, 0.0, 1.0];
        for (a, b) in w.values().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_sqrt_rejects_singular_at_zero_shift() {
        let s = mat(2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(inverse_sqrt_shifted(&s, 0.0).is_err());
        assert!(inverse_sqrt_shifted(&s, 0.1).is_ok());
    }

    #[test]
    fn rejects_asymmetric_input() {
        let s = mat(2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(sym_eigen(&s).is_err());
    }
}
