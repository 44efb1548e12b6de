//! k-nearest-neighbor classifier over Euclidean or Manhattan distance.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::StageLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
}

impl Metric {
    fn distance(self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match self {
            Metric::Euclidean => {
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            }
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weights {
    #[default]
    Uniform,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KNNParams {
    pub n_neighbors: usize,
    pub weights: Weights,
    pub metric: Metric,
}

impl Default for KNNParams {
    fn default() -> Self {
        KNNParams { n_neighbors: 5, weights: Weights::Uniform, metric: Metric::Euclidean }
    }
}

impl KNNParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_neighbors == 0 {
            return Err(Error::InvalidParameter {
                name: "n_neighbors".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KNNModel {
    pub params: KNNParams,
    x_train: Array2<f64>,
    y_train: Vec<StageLabel>,
    pub seed: u64,
}

pub(crate) fn fit_knn(
    x: &Array2<f64>,
    y: &[StageLabel],
    params: &KNNParams,
    seed: u64,
) -> Result<KNNModel> {
    if params.n_neighbors > x.nrows() {
        return Err(Error::InvalidParameter {
            name: "n_neighbors".into(),
            reason: format!("{} exceeds the {} training samples", params.n_neighbors, x.nrows()),
        });
    }
    Ok(KNNModel { params: *params, x_train: x.clone(), y_train: y.to_vec(), seed })
}

impl KNNModel {
    pub fn n_features(&self) -> usize {
        self.x_train.ncols()
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<StageLabel> {
        x.rows().into_iter().map(|row| self.vote(row).0).collect()
    }

    /// Late-class weight fraction among the k neighbors, in [0, 1].
    pub fn scores(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows().into_iter().map(|row| self.vote(row).1).collect()
    }

    /// The k nearest training rows ordered by (distance, index).
    fn neighbors(&self, row: ArrayView1<f64>) -> Vec<(f64, usize)> {
        let mut pairs: Vec<(f64, usize)> = self
            .x_train
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, train)| (self.params.metric.distance(row, train), i))
            .collect();
        let k = self.params.n_neighbors;
        let by_dist_then_index =
            |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < pairs.len() {
            pairs.select_nth_unstable_by(k - 1, by_dist_then_index);
            pairs.truncate(k);
        }
        pairs.sort_unstable_by(by_dist_then_index);
        pairs
    }

    /// Weighted vote. An exact-match neighbor dominates distance weighting;
    /// a tied vote falls to the nearest neighbor's label.
    fn vote(&self, row: ArrayView1<f64>) -> (StageLabel, f64) {
        let neighbors = self.neighbors(row);
        let mut weight = [0.0f64; 2];
        match self.params.weights {
            Weights::Uniform => {
                for &(_, i) in &neighbors {
                    weight[self.y_train[i].index()] += 1.0;
                }
            }
            Weights::Distance => {
                let exact: Vec<&(f64, usize)> =
                    neighbors.iter().filter(|(d, _)| *d == 0.0).collect();
                if exact.is_empty() {
                    for &(d, i) in &neighbors {
                        weight[self.y_train[i].index()] += 1.0 / d;
                    }
                } else {
                    for (_, i) in exact {
                        weight[self.y_train[*i].index()] += 1.0;
                    }
                }
            }
        }
        let total = weight[0] + weight[1];
        let score = if total > 0.0 { weight[1] / total } else { 0.5 };
        let label = if weight[1] > weight[0] {
            StageLabel::Late
        } else if weight[0] > weight[1] {
            StageLabel::Early
        } else {
            self.y_train[neighbors[0].1]
        };
        (label, score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::standard_normal;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use StageLabel::{Early, Late};

    fn random_points(n: usize, p: usize, seed: u64) -> (Array2<f64>, Vec<StageLabel>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| standard_normal(&mut rng));
        let y = (0..n).map(|_| if rng.gen::<bool>() { Late } else { Early }).collect();
        (x, y)
    }

    /// Independent full-scan reference: sort all training rows by
    /// (distance, index), take k, apply the same vote contract.
    fn oracle(
        model_x: &Array2<f64>,
        model_y: &[StageLabel],
        params: &KNNParams,
        row: ArrayView1<f64>,
    ) -> StageLabel {
        let mut all: Vec<(f64, usize)> = model_x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let d = match params.metric {
                    Metric::Euclidean => {
                        row.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                    }
                    Metric::Manhattan => row.iter().zip(t).map(|(a, b)| (a - b).abs()).sum(),
                };
                (d, i)
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(params.n_neighbors);
        let mut w = [0.0f64; 2];
        let zero: Vec<_> = all.iter().filter(|(d, _)| *d == 0.0).collect();
        match params.weights {
            Weights::Uniform => {
                for &(_, i) in &all {
                    w[model_y[i].index()] += 1.0;
                }
            }
            Weights::Distance if !zero.is_empty() => {
                for (_, i) in zero {
                    w[model_y[*i].index()] += 1.0;
                }
            }
            Weights::Distance => {
                for &(d, i) in &all {
                    w[model_y[i].index()] += 1.0 / d;
                }
            }
        }
        if w[1] > w[0] {
            Late
        } else if w[0] > w[1] {
            Early
        } else {
            model_y[all[0].1]
        }
    }

    #[test]
    fn k1_reproduces_training_labels() {
        let (x, y) = random_points(30, 3, 5);
        let params = KNNParams { n_neighbors: 1, ..KNNParams::default() };
        let model = fit_knn(&x, &y, &params, 0).unwrap();
        assert_eq!(model.predict(&x), y);
    }

    #[test]
    fn matches_full_scan_oracle_on_200_points() {
        let (xtr, ytr) = random_points(200, 4, 6);
        let (xte, _) = random_points(50, 4, 7);
        for metric in [Metric::Euclidean, Metric::Manhattan] {
            for weights in [Weights::Uniform, Weights::Distance] {
                let params = KNNParams { n_neighbors: 5, weights, metric };
                let model = fit_knn(&xtr, &ytr, &params, 0).unwrap();
                let got = model.predict(&xte);
                for (row, pred) in xte.rows().into_iter().zip(&got) {
                    assert_eq!(*pred, oracle(&xtr, &ytr, &params, row));
                }
            }
        }
    }

    #[test]
    fn metric_changes_the_nearest_neighbor_and_ties_prefer_lower_index() {
        let x = array![[0.0, 0.0], [1.9, 1.9]];
        let y = vec![Early, Late];
        let q = array![[3.0, 0.0]];
        let euclid = fit_knn(
            &x,
            &y,
            &KNNParams { n_neighbors: 1, metric: Metric::Euclidean, ..KNNParams::default() },
            0,
        )
        .unwrap();
        assert_eq!(euclid.predict(&q), vec![Late]);
        // Manhattan distances tie at 3.0; the lower index wins.
        let manhattan = fit_knn(
            &x,
            &y,
            &KNNParams { n_neighbors: 1, metric: Metric::Manhattan, ..KNNParams::default() },
            0,
        )
        .unwrap();
        assert_eq!(manhattan.predict(&q), vec![Early]);
    }

    #[test]
    fn exact_match_dominates_distance_weighting() {
        let x = array![[0.0, 0.0], [0.1, 0.0], [0.2, 0.0], [5.0, 5.0]];
        let y = vec![Early, Early, Early, Late];
        let params =
            KNNParams { n_neighbors: 4, weights: Weights::Distance, ..KNNParams::default() };
        let model = fit_knn(&x, &y, &params, 0).unwrap();
        let q = array![[5.0, 5.0]];
        assert_eq!(model.predict(&q), vec![Late]);
        assert_eq!(model.scores(&q), vec![1.0]);
    }

    #[test]
    fn uniform_vote_tie_takes_nearest_label() {
        let x = array![[1.0, 0.0], [2.0, 0.0]];
        let y = vec![Early, Late];
        let params = KNNParams { n_neighbors: 2, ..KNNParams::default() };
        let model = fit_knn(&x, &y, &params, 0).unwrap();
        assert_eq!(model.predict(&array![[0.0, 0.0]]), vec![Early]);
        assert_eq!(model.predict(&array![[3.0, 0.0]]), vec![Late]);
    }

    #[test]
    fn paper_selected_config_is_accepted() {
        let (x, y) = random_points(40, 3, 8);
        let params = KNNParams {
            n_neighbors: 11,
            weights: Weights::Uniform,
            metric: Metric::Manhattan,
        };
        params.validate().unwrap();
        let model = fit_knn(&x, &y, &params, 0).unwrap();
        assert_eq!(model.predict(&x).len(), 40);
    }

    #[test]
    fn rejects_k_zero_and_k_beyond_training_size() {
        assert!(KNNParams { n_neighbors: 0, ..KNNParams::default() }.validate().is_err());
        let (x, y) = random_points(3, 2, 9);
        let params = KNNParams { n_neighbors: 5, ..KNNParams::default() };
        assert!(matches!(fit_knn(&x, &y, &params, 0), Err(Error::InvalidParameter { .. })));
    }
}
