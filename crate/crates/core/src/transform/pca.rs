//! Principal component analysis on the sample covariance (denominator n - 1).

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::covariance_eigen;
use crate::error::{Error, Result};

/// Fitted PCA basis: orthonormal component rows and their eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PCAModel {
    pub mean: Array1<f64>,
    /// n_components × n_features, rows orthonormal.
    pub components: Array2<f64>,
    /// Covariance eigenvalues, descending.
    pub explained_variance: Array1<f64>,
}

impl PCAModel {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.components.ncols()
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        pca_transform(self, x)
    }
}

/// Fits the top `n_components` eigenpairs of the sample covariance.
///
/// Components are deterministic: each is flipped so its largest-magnitude
/// coordinate is positive.
pub fn pca_fit(x: &Array2<f64>, n_components: usize) -> Result<PCAModel> {
    let (vals, vecs, mean) = covariance_eigen(x, n_components)?;
    Ok(PCAModel {
        mean,
        components: vecs.t().to_owned(),
        explained_variance: vals,
    })
}

/// Projects rows onto the fitted basis: (X - mean) · componentsᵀ.
pub fn pca_transform(model: &PCAModel, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.n_features() {
        return Err(Error::FeatureCountMismatch {
            expected: model.n_features(),
            found: x.ncols(),
        });
    }
    let xc = crate::linalg::center_rows(x, &model.mean);
    Ok(xc.dot(&model.components.t()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn fixture() -> Array2<f64> {
        array![
            [2.5, 2.4, 0.5, 1.1],
            [0.5, 0.7, 2.2, 3.3],
            [2.2, 2.9, 1.9, 0.4],
            [1.9, 2.2, 3.0, 1.0],
            [3.1, 3.0, 1.5, 2.1],
            [2.3, 2.7, 0.9, 0.8]
        ]
    }

    #[test]
    fn matches_covariance_eigendecomposition_reference() {
        let model = pca_fit(&fixture(), 4).unwrap();
        let expected_vals = [
            2.2979452377960996,
            0.7555388507385995,
            0.36508736553946797,
            0.01842854592583259,
        ];
        let expected_components = [
            [-0.5168866231576394, -0.5347217713009309, 0.3073136411668717, 0.5936827200199162],
            [-0.1684135907421861, 0.06757715757942308, 0.8356931679379801, -0.5183503827418208],
            [0.5717165192103475, 0.35665415943527423, 0.4499133841744263, 0.5861023621861947],
            [-0.6144959746947247, 0.7630883078830385, -0.06894346782152119, 0.18798332293297781],
        ];
        for (k, &v) in expected_vals.iter().enumerate() {
            assert!(
                (model.explained_variance[k] - v).abs() < 1e-8,
                "eigenvalue {k}: {} vs {v}",
                model.explained_variance[k]
            );
        }
        for k in 0..4 {
            for j in 0..4 {
                assert!(
                    (model.components[[k, j]] - expected_components[k][j]).abs() < 1e-8,
                    "component [{k},{j}]"
                );
            }
        }
        let scores = model.transform(&fixture()).unwrap();
        let expected_score0 = [
            -0.826251107292415,
            -0.8580936283122985,
            -0.46209837867808135,
            -0.17780941436731607,
        ];
        for j in 0..4 {
            assert!((scores[[0, j]] - expected_score0[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn collinear_data_has_one_informative_component() {
        // points on the line y = x
        let x = array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let model = pca_fit(&x, 2).unwrap();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert!((model.components[[0, 0]] - inv_sqrt2).abs() < 1e-10);
        assert!((model.components[[0, 1]] - inv_sqrt2).abs() < 1e-10);
        assert!(model.explained_variance[1].abs() < 1e-10);

        let one = pca_fit(&x, 1).unwrap();
        let scores = one.transform(&x).unwrap();
        for (i, row) in x.rows().into_iter().enumerate() {
            let expect = std::f64::consts::SQRT_2 * (row[0] - 1.5);
            assert!((scores[[i, 0]] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn components_are_orthonormal_and_variances_sorted() {
        let model = pca_fit(&fixture(), 3).unwrap();
        let g = model.components.dot(&model.components.t());
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - expect).abs() < 1e-8);
            }
        }
        for k in 1..3 {
            assert!(model.explained_variance[k - 1] >= model.explained_variance[k]);
            assert!(model.explained_variance[k] >= 0.0);
        }
    }

    #[test]
    fn full_rank_transform_conserves_energy() {
        let x = fixture();
        let model = pca_fit(&x, 4).unwrap();
        let xc = crate::linalg::center_rows(&x, &model.mean);
        let scores = model.transform(&x).unwrap();
        let frob_in: f64 = xc.iter().map(|v| v * v).sum();
        let frob_out: f64 = scores.iter().map(|v| v * v).sum();
        assert!((frob_in - frob_out).abs() < 1e-8);
    }

    #[test]
    fn training_mean_row_maps_to_zero() {
        let x = fixture();
        let model = pca_fit(&x, 2).unwrap();
        let mean_row = model.mean.clone().insert_axis(ndarray::Axis(0));
        let scores = model.transform(&mean_row).unwrap();
        assert!(scores.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gram_path_agrees_with_covariance_path() {
        // 4 samples x 7 features exercises the features > samples branch
        let wide = array![
            [1.0, 2.0, 0.5, 3.0, 1.5, 0.2, 2.2],
            [2.0, 1.0, 1.5, 0.5, 2.5, 1.2, 0.2],
            [0.5, 0.8, 2.5, 1.0, 0.5, 2.2, 1.0],
            [3.0, 2.5, 0.2, 2.0, 3.0, 0.5, 3.0]
        ];
        let model = pca_fit(&wide, 3).unwrap();
        // reference: explicit covariance eigendecomposition
        let mean = crate::linalg::column_means(&wide);
        let xc = crate::linalg::center_rows(&wide, &mean);
        let cov = xc.t().dot(&xc) / 3.0;
        let (vals, vecs) = crate::linalg::sym_eigen(&cov);
        for k in 0..3 {
            assert!(
                (model.explained_variance[k] - vals[k]).abs() < 1e-9,
                "eigenvalue {k}"
            );
            let dot: f64 = (0..7).map(|j| model.components[[k, j]] * vecs[[j, k]]).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-8, "component {k} direction, dot {dot}");
        }
    }

    #[test]
    fn rank_exhausted_gram_path_stays_orthonormal() {
        // 3 samples, 5 features, centered rank 1: components 2 of 2 requested
        // come from completion yet remain orthonormal
        let base = [1.0, -2.0, 0.5, 3.0, -1.0];
        let x = Array2::from_shape_fn((3, 5), |(i, j)| base[j] * (i as f64));
        let model = pca_fit(&x, 2).unwrap();
        assert!(model.explained_variance[0] > 0.0);
        assert!(model.explained_variance[1].abs() < 1e-12);
        let g = model.components.dot(&model.components.t());
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn component_range_is_validated() {
        let x = fixture();
        assert!(matches!(
            pca_fit(&x, 0),
            Err(Error::ComponentsOutOfRange { .. })
        ));
        assert!(matches!(
            pca_fit(&x, 5),
            Err(Error::ComponentsOutOfRange { requested: 5, max: 4 })
        ));
        // n - 1 bound: 3 samples cap at 2 components even with 4 features
        let three = fixture().slice(ndarray::s![..3, ..]).to_owned();
        assert!(matches!(
            pca_fit(&three, 3),
            Err(Error::ComponentsOutOfRange { requested: 3, max: 2 })
        ));
        let model = pca_fit(&x, 2).unwrap();
        assert!(matches!(
            model.transform(&array![[1.0, 2.0]]),
            Err(Error::FeatureCountMismatch { .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn scores_invariant_under_row_permutation(seed in 0u64..200) {
            use rand::seq::SliceRandom;
            let x = fixture();
            let mut order: Vec<usize> = (0..6).collect();
            let mut rng = crate::rng::rng_from(seed);
            order.shuffle(&mut rng);
            let permuted = x.select(ndarray::Axis(0), &order);
            let a = pca_fit(&x, 3).unwrap();
            let b = pca_fit(&permuted, 3).unwrap();
            let sa = a.transform(&x).unwrap();
            let sb = b.transform(&permuted).unwrap();
            for (new_row, &old_row) in order.iter().enumerate() {
                for k in 0..3 {
                    proptest::prop_assert!(
                        (sa[[old_row, k]] - sb[[new_row, k]]).abs() < 1e-9
                    );
                }
            }
        }
    }
}
