//! Ordinary least squares, two-stage least squares, and the PCA baseline.
//!
//! Intercepts are always fitted through centering, never through an explicit
//! ones column; solves go through SVD, never normal equations.

use crate::error::{Error, Result};
use crate::linalg;
use crate::ndcore::Tensor2;

/// A fitted least-squares regression.
#[derive(Debug, Clone)]
pub struct OlsFit {
    /// p x q coefficient matrix.
    pub coef: Tensor2,
    /// Per-target intercept; zeros when fitted without intercept.
    pub intercept: Vec<f64>,
    /// n x q residual matrix on the training data.
    pub residuals: Tensor2,
}

impl OlsFit {
    pub fn predict(&self, features: &Tensor2) -> Tensor2 {
        let mut out = features.matmul(&self.coef);
        for i in 0..out.rows() {
            for (o, c) in out.row_mut(i).iter_mut().zip(&self.intercept) {
                *o += *c;
            }
        }
        out
    }
}

/// Least squares of `targets` on `features`.
pub fn ols_fit(features: &Tensor2, targets: &Tensor2, with_intercept: bool) -> Result<OlsFit> {
    let n = features.rows();
    if n != targets.rows() {
        return Err(Error::Shape {
            op: "ols_fit",
            expected: format!("{n} target rows"),
            got: format!("{}", targets.rows()),
        });
    }
    if n <= features.cols() {
        return Err(Error::Config(format!(
            "ols needs more samples than features ({n} <= {})",
            features.cols()
        )));
    }
    let (coef, intercept) = if with_intercept {
        let fc = features.center_cols();
        let tc = targets.center_cols();
        let coef = linalg::lstsq(&fc, &tc)?;
        let fm = features.col_means();
        let tm = targets.col_means();
        let shift = fm.matmul(&coef);
        let intercept = (0..targets.cols())
            .map(|j| tm.get(0, j) - shift.get(0, j))
            .collect();
        (coef, intercept)
    } else {
        (linalg::lstsq(features, targets)?, vec![0.0; targets.cols()])
    };
    let fit = OlsFit {
        coef,
        intercept,
        residuals: Tensor2::zeros(0, 0),
    };
    let residuals = targets.sub(&fit.predict(features));
    Ok(OlsFit { residuals, ..fit })
}

/// A fitted linear IV regression.
#[derive(Debug, Clone)]
pub struct TslsFit {
    pub theta: Vec<f64>,
    pub intercept: f64,
    /// First-stage coefficient matrix (k x r).
    pub first_stage: Tensor2,
}

impl TslsFit {
    pub fn theta_norm(&self) -> f64 {
        self.theta.iter().map(|t| t * t).sum::<f64>().sqrt()
    }
}

/// Two-stage least squares: regress `d` on `z`, then `y` on the fitted
/// treatment. In the just-identified case (`k == r`) this solves the sample
/// moment `(1/n) Z^T (Y - D theta - c) = 0` exactly.
pub fn tsls_fit(z: &Tensor2, d: &Tensor2, y: &[f64], with_intercept: bool) -> Result<TslsFit> {
    if z.cols() < d.cols() {
        return Err(Error::Config(format!(
            "under-identified IV system: {} instruments < {} treatments",
            z.cols(),
            d.cols()
        )));
    }
    let first = ols_fit(z, d, with_intercept)?;
    let d_hat = first.predict(z);
    let yt = Tensor2::col_from(y);
    let second = ols_fit(&d_hat, &yt, with_intercept)?;
    Ok(TslsFit {
        theta: (0..d.cols()).map(|i| second.coef.get(i, 0)).collect(),
        intercept: second.intercept[0],
        first_stage: first.coef,
    })
}

/// `|| (1/n) Zc^T (y - D theta - c) ||_2`, the sample moment the IV fit is
/// supposed to annihilate when just-identified.
pub fn tsls_moment_norm(z: &Tensor2, d: &Tensor2, y: &[f64], fit: &TslsFit) -> f64 {
    let n = z.rows();
    let mut resid = vec![0.0; n];
    for i in 0..n {
        let pred: f64 = d
            .row(i)
            .iter()
            .zip(&fit.theta)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + fit.intercept;
        resid[i] = y[i] - pred;
    }
    let zc = z.center_cols();
    let m = zc.matmul_ta(&Tensor2::col_from(&resid));
    m.scale(1.0 / n as f64).frob_norm()
}

/// PCA fitted on centered data.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// m x k orthonormal columns.
    pub components: Tensor2,
    pub singular_values: Vec<f64>,
}

pub fn pca_fit(x: &Tensor2, k: usize) -> Result<PcaModel> {
    let (n, m) = x.shape();
    if k > n.min(m) {
        return Err(Error::Config(format!(
            "pca rank {k} exceeds min(n, m) = {}",
            n.min(m)
        )));
    }
    let centered = x.center_cols();
    let (v, s) = linalg::right_singular(&centered)?;
    let components = v.slice_cols(0, k);
    Ok(PcaModel {
        mean: x.col_means().data().to_vec(),
        components,
        singular_values: s[..k].to_vec(),
    })
}

impl PcaModel {
    pub fn encode(&self, x: &Tensor2) -> Tensor2 {
        let mut centered = x.clone();
        for i in 0..centered.rows() {
            for (a, m) in centered.row_mut(i).iter_mut().zip(&self.mean) {
                *a -= *m;
            }
        }
        centered.matmul(&self.components)
    }

    pub fn decode(&self, scores: &Tensor2) -> Tensor2 {
        let mut out = scores.matmul_tb(&self.components);
        for i in 0..out.rows() {
            for (a, m) in out.row_mut(i).iter_mut().zip(&self.mean) {
                *a += *m;
            }
        }
        out
    }
}
