//! FastICA with a tanh contrast, deflation scheme, on whitened data.
//!
//! The generative model is x = A·y with independent non-Gaussian sources y;
//! fitting estimates an unmixing so that y = W·K·(x - mean), where K whitens
//! using the top covariance eigenpairs.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::covariance_eigen;
use crate::error::{Error, Result};
use crate::rng::{self, standard_normal, stream};

/// Eigenvalues below this are treated as zero rank for whitening.
const RANK_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ICAParams {
    pub n_components: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl ICAParams {
    pub fn new(n_components: usize, seed: u64) -> Self {
        ICAParams { n_components, max_iter: 200, tol: 1e-4, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter".into(),
                reason: "must be at least 1".into(),
            });
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tol".into(),
                reason: format!("{} must be positive", self.tol),
            });
        }
        Ok(())
    }
}

/// Fitted ICA: whitening, unmixing, and the implied mixing estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ICAModel {
    pub mean: Array1<f64>,
    /// n_components × n_features; projects centered data to whitened space.
    pub whitening: Array2<f64>,
    /// n_components × n_components; orthonormal rows in whitened space.
    pub unmixing: Array2<f64>,
    /// n_features × n_components; x ≈ mean + mixing_estimate · y.
    pub mixing_estimate: Array2<f64>,
    pub n_components: usize,
    pub converged: bool,
    pub iterations_used: usize,
}

impl ICAModel {
    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        ica_transform(self, x)
    }
}

/// Estimates `n_components` independent components from rows of `x`.
///
/// Deflation FastICA: each unit is updated by
/// w ← E[z·tanh(wᵀz)] − E[1 − tanh²(wᵀz)]·w, re-orthogonalized against the
/// units already found, until the direction stabilizes within `tol`. A unit
/// that exhausts `max_iter` leaves `converged` false; the model is still
/// returned.
pub fn ica_fit(x: &Array2<f64>, params: &ICAParams) -> Result<ICAModel> {
    params.validate()?;
    let c = params.n_components;
    let (vals, vecs, mean) = covariance_eigen(x, c)?;
    for (i, &v) in vals.iter().enumerate() {
        if v < RANK_EPS {
            return Err(Error::RankDeficient { component: i, eigenvalue: v });
        }
    }

    // K = diag(1/sqrt(λ)) Vᵀ, so Z = Xc Kᵀ has identity sample covariance
    let mut whitening = vecs.t().to_owned();
    for (mut row, &v) in whitening.rows_mut().into_iter().zip(vals.iter()) {
        row.mapv_inplace(|x| x / v.sqrt());
    }
    let xc = crate::linalg::center_rows(x, &mean);
    let z = xc.dot(&whitening.t());
    let n = z.nrows() as f64;

    let mut rng = rng::rng_from(rng::derive(params.seed, stream::ICA));
    let mut w_rows = Array2::<f64>::zeros((c, c));
    let mut converged = true;
    let mut iterations_used = 0;

    for comp in 0..c {
        let mut w = random_orthonormal_unit(&mut rng, &w_rows, comp);
        let mut comp_converged = false;
        let mut iters = 0;
        for iter in 1..=params.max_iter {
            iters = iter;
            let wx = z.dot(&w);
            let g = wx.mapv(f64::tanh);
            let g_prime_mean = g.iter().map(|v| 1.0 - v * v).sum::<f64>() / n;
            let mut w_new = z.t().dot(&g) / n - &(&w * g_prime_mean);
            gram_schmidt(&mut w_new, &w_rows, comp);
            let norm = w_new.dot(&w_new).sqrt();
            if norm < 1e-12 {
                // update collapsed into the span of earlier units; restart
                // this unit from a fresh direction
                w = random_orthonormal_unit(&mut rng, &w_rows, comp);
                continue;
            }
            w_new /= norm;
            let delta = (1.0 - w_new.dot(&w).abs()).abs();
            w = w_new;
            if delta < params.tol {
                comp_converged = true;
                break;
            }
        }
        iterations_used = iterations_used.max(iters);
        converged &= comp_converged;
        w_rows.row_mut(comp).assign(&w);
    }

    // deterministic sign: largest-magnitude coordinate positive per unit
    for mut row in w_rows.rows_mut() {
        let mut arg = 0;
        for (i, v) in row.iter().enumerate() {
            if v.abs() > row[arg].abs() {
                arg = i;
            }
        }
        if row[arg] < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }

    // A-hat = V diag(sqrt(λ)) Wᵀ inverts unmixing ∘ whitening on the
    // retained subspace
    let mut scaled = vecs;
    for (mut col, &v) in scaled.columns_mut().into_iter().zip(vals.iter()) {
        col.mapv_inplace(|x| x * v.sqrt());
    }
    let mixing_estimate = scaled.dot(&w_rows.t());

    Ok(ICAModel {
        mean,
        whitening,
        unmixing: w_rows,
        mixing_estimate,
        n_components: c,
        converged,
        iterations_used,
    })
}

/// Recovers component activations: y = W·K·(x - mean) per row.
pub fn ica_transform(model: &ICAModel, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.n_features() {
        return Err(Error::FeatureCountMismatch {
            expected: model.n_features(),
            found: x.ncols(),
        });
    }
    let xc = crate::linalg::center_rows(x, &model.mean);
    Ok(xc.dot(&model.whitening.t()).dot(&model.unmixing.t()))
}

fn random_orthonormal_unit(
    rng: &mut impl rand::Rng,
    basis: &Array2<f64>,
    used: usize,
) -> Array1<f64> {
    let c = basis.ncols();
    loop {
        let mut w = Array1::from_iter((0..c).map(|_| standard_normal(rng)));
        gram_schmidt(&mut w, basis, used);
        let norm = w.dot(&w).sqrt();
        if norm > 1e-8 {
            return w / norm;
        }
    }
}

fn gram_schmidt(w: &mut Array1<f64>, basis: &Array2<f64>, used: usize) {
    for j in 0..used {
        let b = basis.row(j);
        let proj = w.dot(&b);
        *w -= &(&b * proj);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Axis;
    use rand::Rng;

    /// 2000 samples of two unit-variance independent sources (uniform and
    /// Laplace) pushed through a fixed mixing matrix.
    fn mixed_sources(seed: u64) -> (Array2<f64>, Array2<f64>) {
        let mut rng = rng::rng_from(seed);
        let n = 2000;
        let mut s = Array2::<f64>::zeros((n, 2));
        let half_width = 3.0f64.sqrt();
        let laplace_b = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..n {
            s[[i, 0]] = rng.gen_range(-half_width..half_width);
            let u: f64 = rng.gen::<f64>() - 0.5;
            s[[i, 1]] = -u.signum() * laplace_b * (1.0 - 2.0 * u.abs()).ln();
        }
        let a = ndarray::array![[2.0, 1.0], [1.0, 3.0]];
        let x = s.dot(&a.t());
        (x, s)
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn recovers_independent_sources_up_to_permutation_and_sign() {
        let (x, s) = mixed_sources(314);
        let model = ica_fit(&x, &ICAParams::new(2, 7)).unwrap();
        assert!(model.converged, "FastICA failed to converge on easy sources");
        let y = model.transform(&x).unwrap();
        // each recovered component must match exactly one source strongly
        let mut matched = [false; 2];
        for k in 0..2 {
            let yk: Vec<f64> = y.column(k).to_vec();
            let mut best = (0usize, 0.0f64);
            for j in 0..2 {
                let r = pearson(&yk, &s.column(j).to_vec()).abs();
                if r > best.1 {
                    best = (j, r);
                }
            }
            assert!(best.1 >= 0.95, "component {k} best |r| = {}", best.1);
            assert!(!matched[best.0], "two components matched one source");
            matched[best.0] = true;
        }
    }

    #[test]
    fn components_have_unit_variance_and_w_is_orthonormal() {
        let (x, _) = mixed_sources(99);
        let model = ica_fit(&x, &ICAParams::new(2, 3)).unwrap();
        let y = model.transform(&x).unwrap();
        let n = y.nrows() as f64;
        for k in 0..2 {
            let col = y.column(k);
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            assert!((var - 1.0).abs() < 1e-6, "component {k} variance {var}");
        }
        let g = model.unmixing.dot(&model.unmixing.t());
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - expect).abs() < 1e-6);
            }
        }
        // cross-covariance of distinct components vanishes in whitened space
        let c01: f64 = {
            let a = y.column(0);
            let b = y.column(1);
            let ma = a.sum() / n;
            let mb = b.sum() / n;
            a.iter().zip(b.iter()).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
        };
        assert!(c01.abs() < 1e-6);
    }

    #[test]
    fn mixing_estimate_reconstructs_full_rank_data() {
        let (x, _) = mixed_sources(5);
        let model = ica_fit(&x, &ICAParams::new(2, 11)).unwrap();
        let y = model.transform(&x).unwrap();
        let xhat = y.dot(&model.mixing_estimate.t())
            + &model.mean.view().insert_axis(Axis(0));
        let max_err = x
            .iter()
            .zip(xhat.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1e-8, "reconstruction error {max_err}");
    }

    #[test]
    fn same_seed_reproduces_model_bitwise() {
        let (x, _) = mixed_sources(21);
        let a = ica_fit(&x, &ICAParams::new(2, 42)).unwrap();
        let b = ica_fit(&x, &ICAParams::new(2, 42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rank_deficient_whitening_is_an_error() {
        // second column duplicates the first: covariance rank 1
        let mut x = Array2::<f64>::zeros((10, 2));
        let mut rng = rng::rng_from(8);
        for i in 0..10 {
            let v: f64 = rng.gen_range(-1.0..1.0);
            x[[i, 0]] = v;
            x[[i, 1]] = v;
        }
        match ica_fit(&x, &ICAParams::new(2, 0)) {
            Err(Error::RankDeficient { component: 1, eigenvalue }) => {
                assert!(eigenvalue.abs() < 1e-12);
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn gaussian_input_still_returns_a_model() {
        let mut rng = rng::rng_from(17);
        let x = Array2::from_shape_fn((400, 2), |_| standard_normal(&mut rng));
        let model = ica_fit(&x, &ICAParams::new(2, 1)).unwrap();
        // unidentifiable for Gaussians; converged may be false, shapes must hold
        assert_eq!(model.unmixing.dim(), (2, 2));
        assert!(model.iterations_used >= 1 && model.iterations_used <= 200);
    }

    #[test]
    fn mean_row_maps_to_zero_and_shapes_are_checked() {
        let (x, _) = mixed_sources(2);
        let model = ica_fit(&x, &ICAParams::new(2, 13)).unwrap();
        let mean_row = model.mean.clone().insert_axis(Axis(0));
        let y = model.transform(&mean_row).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-12));
        assert!(matches!(
            model.transform(&ndarray::array![[1.0, 2.0, 3.0]]),
            Err(Error::FeatureCountMismatch { .. })
        ));
        assert!(ica_fit(&x, &ICAParams { tol: 0.0, ..ICAParams::new(2, 0) }).is_err());
        assert!(ica_fit(&x, &ICAParams { max_iter: 0, ..ICAParams::new(2, 0) }).is_err());
        assert!(matches!(
            ica_fit(&x, &ICAParams::new(3, 0)),
            Err(Error::ComponentsOutOfRange { .. })
        ));
    }
}
