//! Dense matrix kernels: SVD-based pseudoinverse, numerical rank and
//! null-space projectors.
//!
//! All routines take a *relative* tolerance: singular values at or below
//! `rel_tol * sigma_max` are treated as zero. The `_scaled` variants measure
//! the cut-off against `max(sigma_max, reference)` instead, for products such
//! as `J P` whose largest singular value can itself be rounding noise.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative cut-off for singular values.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

pub fn is_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

pub fn is_finite_vec(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Thin SVD `m = U diag(s) V^T`, computed with faer. nalgebra's own SVD can
/// return a wrong factorization for some rank-deficient inputs.
struct Svd {
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
}

fn svd(m: &DMatrix<f64>) -> Result<Svd> {
    let (rows, cols) = m.shape();
    let fm = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let f = fm
        .thin_svd()
        .map_err(|e| Error::invalid(format!("SVD did not converge: {e:?}")))?;
    let (u, s, v) = (f.U(), f.S().column_vector(), f.V());
    let k = s.nrows();
    Ok(Svd {
        u: DMatrix::from_fn(rows, k, |i, j| u[(i, j)]),
        s: DVector::from_fn(k, |i, _| s[i]),
        v: DMatrix::from_fn(cols, k, |i, j| v[(i, j)]),
    })
}

fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    Ok(svd(m)?.s)
}

/// Moore-Penrose pseudoinverse.
///
/// Zero-sized inputs are accepted and give the transposed-shape zero matrix.
pub fn pinv(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    pinv_scaled(m, rel_tol, 0.0)
}

/// Pseudoinverse with the cut-off `rel_tol * max(sigma_max, reference)`.
pub fn pinv_scaled(m: &DMatrix<f64>, rel_tol: f64, reference: f64) -> Result<DMatrix<f64>> {
    if !is_finite(m) {
        return Err(Error::invalid("pinv: matrix has non-finite entries"));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::invalid("pinv: rel_tol must be positive"));
    }
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(DMatrix::zeros(cols, rows));
    }
    let svd = svd(m)?;
    let sigma_max = svd.s.max().max(reference);
    let mut out = DMatrix::zeros(cols, rows);
    if sigma_max <= 0.0 {
        return Ok(out);
    }
    let cutoff = rel_tol * sigma_max;
    for (i, &sigma) in svd.s.iter().enumerate() {
        if sigma > cutoff {
            // out += v_i * u_i^T / sigma
            out.ger(1.0 / sigma, &svd.v.column(i), &svd.u.column(i), 1.0);
        }
    }
    Ok(out)
}

/// Number of singular values strictly above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    numerical_rank_scaled(m, rel_tol, 0.0)
}

/// Rank with the cut-off `rel_tol * max(sigma_max, reference)`.
pub fn numerical_rank_scaled(m: &DMatrix<f64>, rel_tol: f64, reference: f64) -> Result<usize> {
    if !is_finite(m) {
        return Err(Error::invalid("numerical_rank: matrix has non-finite entries"));
    }
    let sv = singular_values(m)?;
    if sv.is_empty() {
        return Ok(0);
    }
    let sigma_max = sv.max().max(reference);
    if sigma_max <= 0.0 {
        return Ok(0);
    }
    let cutoff = rel_tol * sigma_max;
    Ok(sv.iter().filter(|&&s| s > cutoff).count())
}

/// Largest singular value (0 for empty matrices).
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    if !is_finite(m) {
        return Err(Error::invalid("spectral_norm: matrix has non-finite entries"));
    }
    let sv = singular_values(m)?;
    Ok(if sv.is_empty() { 0.0 } else { sv.max() })
}

/// Orthogonal projector onto the null space of `a_lim`, `I - pinv(a_lim) a_lim`,
/// formed as `I - V1 V1^T` from the retained right singular vectors.
///
/// A matrix with zero rows (no saturated constraints) yields the identity.
pub fn null_projector(a_lim: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    if !is_finite(a_lim) {
        return Err(Error::invalid("null_projector: matrix has non-finite entries"));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::invalid("null_projector: rel_tol must be positive"));
    }
    let n = a_lim.ncols();
    let mut p = DMatrix::identity(n, n);
    if a_lim.nrows() == 0 || n == 0 {
        return Ok(p);
    }
    let svd = svd(a_lim)?;
    let cutoff = rel_tol * svd.s.max();
    for (i, &sigma) in svd.s.iter().enumerate() {
        if sigma > cutoff {
            p.ger(-1.0, &svd.v.column(i), &svd.v.column(i), 1.0);
        }
    }
    // Symmetrize away rounding so P stays an orthogonal projector to machine precision.
    Ok((&p + p.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn pinv_of_identity_is_identity() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        let p = pinv(&i3, DEFAULT_REL_TOL).unwrap();
        assert_eq!(p, i3);
    }

    #[test]
    fn pinv_of_zero_is_transposed_zero() {
        let z = DMatrix::<f64>::zeros(2, 3);
        let p = pinv(&z, DEFAULT_REL_TOL).unwrap();
        assert_eq!(p.shape(), (3, 2));
        assert!(p.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pinv_rejects_nan() {
        let mut m = DMatrix::<f64>::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(pinv(&m, DEFAULT_REL_TOL), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pinv_wide_random_satisfies_penrose() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random(2, 3, &mut rng);
        let p = pinv(&m, DEFAULT_REL_TOL).unwrap();
        assert!((&m * &p * &m - &m).amax() < 1e-8);
        assert!((&p * &m * &p - &p).amax() < 1e-8);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numerical_rank(&DMatrix::identity(4, 4), DEFAULT_REL_TOL).unwrap(), 4);
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 3), DEFAULT_REL_TOL).unwrap(), 0);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r1 = random(1, 3, &mut rng);
        let r2 = random(1, 3, &mut rng);
        let r3 = &r1 + &r2;
        let m = DMatrix::from_rows(&[r1.row(0), r2.row(0), r3.row(0)]);
        assert_eq!(numerical_rank(&m, DEFAULT_REL_TOL).unwrap(), 2);
        assert_eq!(numerical_rank(&m.transpose(), DEFAULT_REL_TOL).unwrap(), 2);
    }

    #[test]
    fn projector_of_empty_set_is_identity() {
        let p = null_projector(&DMatrix::zeros(0, 5), DEFAULT_REL_TOL).unwrap();
        assert_eq!(p, DMatrix::identity(5, 5));
    }

    #[test]
    fn projector_of_single_joint_row_zeroes_that_joint() {
        let mut row = DMatrix::zeros(1, 4);
        row[(0, 2)] = 1.0;
        let p = null_projector(&row, DEFAULT_REL_TOL).unwrap();
        let mut expected = DMatrix::identity(4, 4);
        expected[(2, 2)] = 0.0;
        assert!((p - expected).amax() < 1e-15);
    }

    #[test]
    fn projector_of_random_rows_has_complementary_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(2, 5, &mut rng);
        let p = null_projector(&a, DEFAULT_REL_TOL).unwrap();
        assert_eq!(numerical_rank(&p, 1e-8).unwrap(), 3);
        assert!((&a * &p).amax() < 1e-8);
        assert!((&p * &p - &p).amax() < 1e-8);
        assert!((&p - p.transpose()).amax() < 1e-8);
    }
}
