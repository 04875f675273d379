//! Dense complex linear algebra shared by the solvers.
//!
//! Everything here works on [`CMatrix`] (a `nalgebra` dense matrix of
//! `Complex64`). Functions that need a Hermitian argument validate it against
//! [`HERMITIAN_TOL`] and then operate on the exact Hermitian part
//! `(A + A^H) / 2`, so round-off asymmetry never leaks into a factorization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{dim_err, Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Max-abs-entry tolerance for `A == A^H`.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Slack on the smallest eigenvalue when testing positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-8;

const LN_2: f64 = std::f64::consts::LN_2;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest entrywise modulus of `a - b`. Shapes must agree.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Returns the exact Hermitian part of `a` after checking that `a` is square,
/// finite and Hermitian within [`HERMITIAN_TOL`].
pub fn symmetrize_checked(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(dim_err("hermitian input", "square matrix", format!("{}x{}", a.nrows(), a.ncols())));
    }
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    let deviation = max_abs_diff(a, &a.adjoint());
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(hermitian_part(a))
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// Lower-triangular `L` with `A = L L^H`.
///
/// The error carries the order of the first leading principal minor that
/// fails to be positive.
pub fn cholesky(a: &CMatrix) -> Result<CMatrix> {
    let a = symmetrize_checked(a)?;
    let n = a.nrows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { minor: j + 1 });
        }
        let ljj = d.sqrt();
        l[(j, j)] = c(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Natural log-determinant of a Hermitian positive definite matrix.
pub fn logdet(a: &CMatrix) -> Result<f64> {
    let l = cholesky(a)?;
    Ok(2.0 * l.diagonal().iter().map(|d| d.re.ln()).sum::<f64>())
}

/// `log2 det(A)` for Hermitian positive definite `A`, via Cholesky.
pub fn logdet2(a: &CMatrix) -> Result<f64> {
    Ok(logdet(a)? / LN_2)
}

/// Solves `A X = B` for Hermitian positive definite `A`.
pub fn solve_hpd(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != b.nrows() {
        return Err(dim_err("solve_hpd rhs", a.nrows(), b.nrows()));
    }
    let l = cholesky(a)?;
    let n = l.nrows();
    let mut x = b.clone();
    for col in 0..x.ncols() {
        // forward: L y = b
        for i in 0..n {
            let mut s = x[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)].re;
        }
        // backward: L^H x = y
        for i in (0..n).rev() {
            let mut s = x[(i, col)];
            for k in (i + 1)..n {
                s -= l[(k, i)].conj() * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)].re;
        }
    }
    Ok(x)
}

/// Inverse of a Hermitian positive definite matrix, returned exactly Hermitian.
pub fn inv_hpd(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    let x = solve_hpd(a, &CMatrix::identity(n, n))?;
    Ok(hermitian_part(&x))
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues are returned in
/// ascending order with matching eigenvector columns.
pub fn eigh(a: &CMatrix) -> Result<(DVector<f64>, CMatrix)> {
    let a = symmetrize_checked(a)?;
    let n = a.nrows();
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

pub fn eigvalsh(a: &CMatrix) -> Result<DVector<f64>> {
    let a = symmetrize_checked(a)?;
    let mut values = a.symmetric_eigenvalues();
    values.as_mut_slice().sort_by(f64::total_cmp);
    Ok(values)
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn lambda_max(a: &CMatrix) -> Result<f64> {
    let values = eigvalsh(a)?;
    Ok(values.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

pub fn lambda_min(a: &CMatrix) -> Result<f64> {
    let values = eigvalsh(a)?;
    Ok(values.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Entrywise (Schur) product.
pub fn hadamard(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.shape() != b.shape() {
        return Err(dim_err(
            "hadamard",
            format!("{}x{}", a.nrows(), a.ncols()),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    Ok(a.component_mul(b))
}

/// `true` iff the smallest eigenvalue of the Hermitian part of `a` is at
/// least `-tol`. Non-square, non-finite or non-Hermitian input yields `false`.
pub fn is_psd(a: &CMatrix, tol: f64) -> bool {
    match lambda_min(a) {
        Ok(lmin) => lmin >= -tol,
        Err(_) => false,
    }
}

/// `I + G X G^H` with the result made exactly Hermitian.
pub fn identity_plus_congruence(g: &CMatrix, x: &CMatrix) -> CMatrix {
    let n = g.nrows();
    let mut out = g * x * g.adjoint();
    for i in 0..n {
        out[(i, i)] += 1.0;
    }
    hermitian_part(&out)
}

/// Diagonal matrix with the entries of `v` on its diagonal.
pub fn diag(v: &CVector) -> CMatrix {
    CMatrix::from_diagonal(v)
}

/// Real diagonal matrix as a complex matrix.
pub fn real_diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(values.len(), values.iter().map(|&x| c(x, 0.0))))
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c(re, im)
        })
    }

    pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
        hermitian_part(&random_matrix(rng, n, n))
    }

    pub fn random_gram<R: Rng>(rng: &mut R, n: usize, k: usize) -> CMatrix {
        let g = random_matrix(rng, n, k);
        hermitian_part(&(&g * g.adjoint()))
    }

    /// Eigenvalues of a Hermitian matrix computed through its real
    /// 2n x 2n symmetric embedding; every eigenvalue appears twice.
    pub fn eigenvalues_via_real_embedding(a: &CMatrix) -> Vec<f64> {
        let n = a.nrows();
        let m = DMatrix::<f64>::from_fn(2 * n, 2 * n, |i, j| {
            let (bi, ri) = (i / n, i % n);
            let (bj, rj) = (j / n, j % n);
            let z = a[(ri, rj)];
            match (bi, bj) {
                (0, 0) | (1, 1) => z.re,
                (0, 1) => -z.im,
                _ => z.im,
            }
        });
        let mut vals: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        vals.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    }
}
