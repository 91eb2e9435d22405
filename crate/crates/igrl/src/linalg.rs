//! Bridge to nalgebra for the dense factorizations (SVD, QR, pseudo-inverse).
//! Everything here takes and returns [`Tensor2`]; callers never see nalgebra
//! types.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ndcore::Tensor2;

pub fn to_dmatrix(t: &Tensor2) -> DMatrix<f64> {
    DMatrix::from_row_iterator(t.rows(), t.cols(), t.data().iter().copied())
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Tensor2 {
    Tensor2::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `a = U S V^T`, singular values descending.
pub fn thin_svd(a: &Tensor2) -> Result<(Tensor2, Vec<f64>, Tensor2)> {
    let svd = to_dmatrix(a)
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or(Error::SvdFailure)?;
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    // nalgebra does not guarantee ordering
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap());
    let u_sorted = Tensor2::from_fn(u.nrows(), idx.len(), |i, j| u[(i, idx[j])]);
    let vt_sorted = Tensor2::from_fn(idx.len(), vt.ncols(), |i, j| vt[(idx[i], j)]);
    let s_sorted = idx.iter().map(|&i| s[i]).collect();
    Ok((u_sorted, s_sorted, vt_sorted))
}

/// Numerical rank with the usual `max(n, p) * eps * s_max` cutoff.
pub fn numerical_rank(singular: &[f64], n: usize, p: usize) -> usize {
    let smax = singular.first().copied().unwrap_or(0.0);
    let tol = n.max(p) as f64 * f64::EPSILON * smax;
    singular.iter().filter(|&&s| s > tol).count()
}

/// Least-squares solve `argmin ||A x - B||_F` via SVD; errors when `A` is
/// column-rank-deficient.
pub fn lstsq(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    let (n, p) = a.shape();
    let svd = to_dmatrix(a)
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or(Error::SvdFailure)?;
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    let rank = numerical_rank(&s, n, p);
    if rank < p {
        return Err(Error::RankDeficient { rank, cols: p });
    }
    let sol = svd
        .solve(&to_dmatrix(b), 0.0)
        .map_err(|_| Error::SvdFailure)?;
    Ok(from_dmatrix(&sol))
}

/// Moore-Penrose pseudo-inverse; errors when `a` is not full column rank,
/// which is what the outcome oracles require of the mixing matrix.
pub fn pinv_full_col_rank(a: &Tensor2) -> Result<Tensor2> {
    let (n, p) = a.shape();
    let svd = to_dmatrix(a)
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or(Error::SvdFailure)?;
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    let rank = numerical_rank(&s, n, p);
    if rank < p {
        return Err(Error::RankDeficient { rank, cols: p });
    }
    let pinv = svd.pseudo_inverse(0.0).map_err(|_| Error::SvdFailure)?;
    Ok(from_dmatrix(&pinv))
}

/// Right singular vectors of centered data, computed as QR followed by an
/// SVD of the small triangular factor.
pub fn right_singular(a: &Tensor2) -> Result<(Tensor2, Vec<f64>)> {
    let (n, p) = a.shape();
    if n >= p {
        let qr = to_dmatrix(a).qr();
        let r = from_dmatrix(&qr.r());
        let (_, s, vt) = thin_svd(&r)?;
        Ok((vt.transpose(), s))
    } else {
        let (_, s, vt) = thin_svd(a)?;
        Ok((vt.transpose(), s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_reconstructs() {
        let a = Tensor2::from_fn(6, 3, |i, j| ((i * 3 + j) as f64).sin());
        let (u, s, vt) = thin_svd(&a).unwrap();
        let us = Tensor2::from_fn(6, 3, |i, j| u.get(i, j) * s[j]);
        let back = us.matmul(&vt);
        assert!(back.sub(&a).frob_norm() < 1e-12);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn lstsq_exact_line() {
        let a = Tensor2::from_vec(3, 1, vec![0.0, 1.0, 2.0]);
        let b = Tensor2::from_vec(3, 1, vec![0.0, 1.0, 2.0]);
        let x = lstsq(&a, &b).unwrap();
        assert!((x.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lstsq_reports_rank_deficiency() {
        let a = Tensor2::from_vec(4, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        let b = Tensor2::from_vec(4, 1, vec![1.0, 2.0, 3.0, 4.0]);
        match lstsq(&a, &b) {
            Err(Error::RankDeficient { rank, cols }) => {
                assert_eq!(rank, 1);
                assert_eq!(cols, 2);
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn pinv_left_inverse() {
        let b = Tensor2::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let p = pinv_full_col_rank(&b).unwrap();
        let prod = p.matmul(&b);
        assert!(prod.sub(&Tensor2::eye(2)).frob_norm() < 1e-12);
    }
}
