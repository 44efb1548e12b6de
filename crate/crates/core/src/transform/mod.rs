//! Fitted feature transforms: standardization, PCA, and FastICA.
//!
//! Every transform follows the same contract: `fit` on training data only,
//! then `apply`/`transform` on any matrix with the same feature count. The
//! fitted models are immutable and serializable.

mod ica;
mod pca;
mod standardize;

pub use ica::{ica_fit, ica_transform, ICAModel, ICAParams};
pub use pca::{pca_fit, pca_transform, PCAModel};
pub use standardize::{apply_standardizer, fit_standardizer, Standardizer};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;

/// Eigenpairs of the sample covariance (denominator n - 1) of `x`, all
/// min(n - 1, p) of them that the data can support, eigenvalues descending.
///
/// When features outnumber samples the p×p covariance is never formed:
/// the n×n Gram matrix has the same nonzero spectrum, and each covariance
/// eigenvector is recovered as Xᵀu/σ. Directions beyond the data's rank are
/// completed by Gram-Schmidt against the ones already found so the returned
/// basis is always orthonormal.
pub(crate) fn covariance_eigen(
    x: &Array2<f64>,
    k: usize,
) -> Result<(Array1<f64>, Array2<f64>, Array1<f64>)> {
    let n = x.nrows();
    let p = x.ncols();
    if n < 2 {
        return Err(Error::GroupTooSmall {
            context: "covariance eigendecomposition",
            required: 2,
            found: n,
        });
    }
    if k == 0 || k > (n - 1).min(p) {
        return Err(Error::ComponentsOutOfRange { requested: k, max: (n - 1).min(p) });
    }
    let mean = linalg::column_means(x);
    let xc = linalg::center_rows(x, &mean);
    let denom = (n - 1) as f64;

    let (vals, vecs) = if p <= n {
        let cov = xc.t().dot(&xc) / denom;
        let (vals, vecs) = linalg::sym_eigen(&cov);
        (vals.slice(ndarray::s![..k]).to_owned(), vecs.slice(ndarray::s![.., ..k]).to_owned())
    } else {
        let gram = xc.dot(&xc.t()) / denom;
        let (gvals, gvecs) = linalg::sym_eigen(&gram);
        let scale_floor = gvals[0].abs().max(1.0) * 1e-12;
        let mut vecs = Array2::<f64>::zeros((p, k));
        let mut vals = Array1::<f64>::zeros(k);
        for i in 0..k {
            vals[i] = gvals[i];
            if gvals[i] > scale_floor {
                let u = gvecs.column(i);
                let v = xc.t().dot(&u) / (gvals[i] * denom).sqrt();
                vecs.column_mut(i).assign(&v);
            } else {
                // rank exhausted: complete with any unit vector orthogonal
                // to everything found so far
                let v = orthonormal_complement(&vecs, i, p);
                vecs.column_mut(i).assign(&v);
            }
        }
        (vals, vecs)
    };

    let mut vals = vals;
    let mut vecs = vecs;
    for v in vals.iter_mut() {
        if *v < 0.0 {
            *v = 0.0; // Jacobi round-off on a PSD matrix
        }
    }
    // deterministic sign: largest-magnitude coordinate of each component
    // points positive
    for mut col in vecs.columns_mut() {
        let mut arg = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[arg].abs() {
                arg = i;
            }
        }
        if col[arg] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    Ok((vals, vecs, mean))
}

/// First basis vector orthogonal to the leading `used` columns of `basis`.
fn orthonormal_complement(basis: &Array2<f64>, used: usize, dim: usize) -> Array1<f64> {
    for axis in 0..dim {
        let mut v = Array1::<f64>::zeros(dim);
        v[axis] = 1.0;
        for j in 0..used {
            let b = basis.column(j);
            let proj = v.dot(&b);
            v = &v - &(&b * proj);
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-6 {
            return v / norm;
        }
    }
    unreachable!("fewer than dim vectors cannot span all of R^dim");
}
