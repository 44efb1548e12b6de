//! Dense feed-forward network: input -> 256 -> 128 -> 64 -> 32 -> 1.
//!
//! Hidden layers are ReLU, the scalar head is a logit trained with binary
//! cross-entropy, and optimization is mini-batch gradient descent with
//! momentum. Hidden weights draw He-scaled normals; the head starts at zero
//! so an untrained network scores every row exactly 0.5.

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::logistic::{log1pexp, sigmoid};
use crate::data::StageLabel;
use crate::error::{Error, Result};
use crate::rng::{self, standard_normal, stream};

pub const HIDDEN_WIDTHS: [usize; 4] = [256, 128, 64, 32];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MLPParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Default for MLPParams {
    fn default() -> Self {
        MLPParams { epochs: 50, batch_size: 32, learning_rate: 1e-3, momentum: 0.9 }
    }
}

impl MLPParams {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter {
                name: "epochs".into(),
                reason: "must be at least 1".into(),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter {
                name: "batch_size".into(),
                reason: "must be at least 1".into(),
            });
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "learning_rate".into(),
                reason: "must be finite and positive".into(),
            });
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter {
                name: "momentum".into(),
                reason: "must lie in [0, 1)".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// out x in weight matrix.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Parameters of a dense stack over the given widths, biases included.
pub fn param_count_for(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// He-initialized hidden layers; `zero_head` additionally zeroes the final
/// layer so the untrained logit is exactly 0.
pub fn init_layers(
    widths: &[usize],
    rng: &mut impl Rng,
    zero_head: bool,
) -> Vec<Layer> {
    let last = widths.len() - 2;
    widths
        .windows(2)
        .enumerate()
        .map(|(l, pair)| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let w = if zero_head && l == last {
                Array2::zeros((fan_out, fan_in))
            } else {
                let scale = (2.0 / fan_in as f64).sqrt();
                Array2::from_shape_fn((fan_out, fan_in), |_| scale * standard_normal(rng))
            };
            Layer { w, b: Array1::zeros(fan_out) }
        })
        .collect()
}

pub fn logit(layers: &[Layer], row: ArrayView1<f64>) -> f64 {
    let mut a = row.to_owned();
    for (l, layer) in layers.iter().enumerate() {
        let mut z = layer.w.dot(&a) + &layer.b;
        if l + 1 < layers.len() {
            z.mapv_inplace(|v| v.max(0.0));
        }
        a = z;
    }
    a[0]
}

/// Per-sample loss and parameter gradients by backpropagation.
pub fn backprop(layers: &[Layer], row: ArrayView1<f64>, y01: f64) -> (Vec<LayerGrad>, f64) {
    let depth = layers.len();
    let mut activations: Vec<Array1<f64>> = vec![row.to_owned()];
    let mut zs: Vec<Array1<f64>> = Vec::with_capacity(depth);
    for (l, layer) in layers.iter().enumerate() {
        let z = layer.w.dot(&activations[l]) + &layer.b;
        let a = if l + 1 < depth { z.mapv(|v| v.max(0.0)) } else { z.clone() };
        zs.push(z);
        activations.push(a);
    }
    let z_out = zs[depth - 1][0];
    let loss = z_out.max(0.0) - z_out * y01 + log1pexp(-z_out.abs());
    let mut grads: Vec<LayerGrad> = layers
        .iter()
        .map(|l| LayerGrad { w: Array2::zeros(l.w.dim()), b: Array1::zeros(l.b.len()) })
        .collect();
    let mut delta = Array1::from_elem(1, sigmoid(z_out) - y01);
    for l in (0..depth).rev() {
        for (r, d) in delta.iter().enumerate() {
            grads[l].b[r] = *d;
            for (c, a) in activations[l].iter().enumerate() {
                grads[l].w[[r, c]] = d * a;
            }
        }
        if l > 0 {
            let back = layers[l].w.t().dot(&delta);
            delta = back
                .iter()
                .zip(zs[l - 1].iter())
                .map(|(v, z)| if *z > 0.0 { *v } else { 0.0 })
                .collect();
        }
    }
    (grads, loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MLPModel {
    pub params: MLPParams,
    pub layers: Vec<Layer>,
    /// Mean training loss after each epoch.
    pub loss_curve: Vec<f64>,
    pub n_features: usize,
    pub seed: u64,
}

impl MLPModel {
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<StageLabel> {
        x.rows()
            .into_iter()
            .map(|row| {
                if logit(&self.layers, row) > 0.0 {
                    StageLabel::Late
                } else {
                    StageLabel::Early
                }
            })
            .collect()
    }

    /// P(Late) through the sigmoid head.
    pub fn scores(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows().into_iter().map(|row| sigmoid(logit(&self.layers, row))).collect()
    }
}

pub(crate) fn fit_mlp(
    x: &Array2<f64>,
    y: &[StageLabel],
    params: &MLPParams,
    seed: u64,
) -> Result<MLPModel> {
    let n = x.nrows();
    let p = x.ncols();
    let y01: Vec<f64> =
        y.iter().map(|l| if *l == StageLabel::Late { 1.0 } else { 0.0 }).collect();
    let mut widths = vec![p];
    widths.extend(HIDDEN_WIDTHS);
    widths.push(1);
    let mut rng = rng::rng_from(rng::derive(seed, stream::MLP));
    let mut layers = init_layers(&widths, &mut rng, true);
    let mut velocity: Vec<LayerGrad> = layers
        .iter()
        .map(|l| LayerGrad { w: Array2::zeros(l.w.dim()), b: Array1::zeros(l.b.len()) })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_curve = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let mut acc: Vec<LayerGrad> = layers
                .iter()
                .map(|l| LayerGrad { w: Array2::zeros(l.w.dim()), b: Array1::zeros(l.b.len()) })
                .collect();
            for &i in batch {
                let (grads, _) = backprop(&layers, x.row(i), y01[i]);
                for (a, g) in acc.iter_mut().zip(grads) {
                    a.w.scaled_add(scale, &g.w);
                    a.b.scaled_add(scale, &g.b);
                }
            }
            for ((layer, vel), grad) in layers.iter_mut().zip(&mut velocity).zip(acc) {
                vel.w.mapv_inplace(|v| v * params.momentum);
                vel.w.scaled_add(-params.learning_rate, &grad.w);
                vel.b.mapv_inplace(|v| v * params.momentum);
                vel.b.scaled_add(-params.learning_rate, &grad.b);
                layer.w += &vel.w;
                layer.b += &vel.b;
            }
        }
        let epoch_loss = x
            .rows()
            .into_iter()
            .zip(&y01)
            .map(|(row, &t)| {
                let z = logit(&layers, row);
                z.max(0.0) - z * t + log1pexp(-z.abs())
            })
            .sum::<f64>()
            / n as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "training loss became non-finite at epoch {epoch}; lower the learning rate"
            )));
        }
        loss_curve.push(epoch_loss);
    }
    Ok(MLPModel { params: params.clone(), layers, loss_curve, n_features: p, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use StageLabel::{Early, Late};

    #[test]
    fn parameter_count_matches_the_dense_stack_formula() {
        let widths = [60_659, 256, 128, 64, 32, 1];
        assert_eq!(param_count_for(&widths[..2]), 15_528_960);
        assert_eq!(param_count_for(&widths), 15_572_225);
        let by_layer: usize = 15_528_960 + 32_896 + 8_256 + 2_080 + 33;
        assert_eq!(by_layer, 15_572_225);
    }

    #[test]
    fn zero_head_network_scores_exactly_half_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layers = init_layers(&[7, 4, 3, 1], &mut rng, true);
        let x = Array2::from_shape_fn((5, 7), |_| standard_normal(&mut rng));
        for row in x.rows() {
            assert_eq!(logit(&layers, row), 0.0);
        }
        let model = MLPModel {
            params: MLPParams::default(),
            layers,
            loss_curve: vec![],
            n_features: 7,
            seed: 0,
        };
        assert!(model.scores(&x).iter().all(|s| *s == 0.5));
    }

    /// Central differences at step h are only trustworthy when no hidden
    /// pre-activation sits within the probe window of the ReLU kink; the
    /// guard below rejects fixtures that would corrupt the estimate.
    fn min_kink_distance(layers: &[Layer], x: &Array2<f64>) -> f64 {
        let mut closest = f64::INFINITY;
        for row in x.rows() {
            let mut a = row.to_owned();
            for (l, layer) in layers.iter().enumerate() {
                let z = layer.w.dot(&a) + &layer.b;
                if l + 1 < layers.len() {
                    for v in z.iter() {
                        closest = closest.min(v.abs());
                    }
                    a = z.mapv(|v| v.max(0.0));
                } else {
                    a = z;
                }
            }
        }
        closest
    }

    #[test]
    fn backprop_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let layers = init_layers(&[10, 4, 3, 1], &mut rng, false);
        let x = Array2::from_shape_fn((6, 10), |_| standard_normal(&mut rng));
        let y: Vec<f64> = (0..6).map(|i| (i % 2) as f64).collect();
        assert!(
            min_kink_distance(&layers, &x) > 1e-2,
            "fixture seed places a pre-activation too close to the ReLU kink"
        );
        let mean_loss = |ls: &[Layer]| -> f64 {
            x.rows()
                .into_iter()
                .zip(&y)
                .map(|(r, &t)| backprop(ls, r, t).1)
                .sum::<f64>()
                / 6.0
        };
        let mut analytic: Vec<LayerGrad> = layers
            .iter()
            .map(|l| LayerGrad { w: Array2::zeros(l.w.dim()), b: Array1::zeros(l.b.len()) })
            .collect();
        for (row, &t) in x.rows().into_iter().zip(&y) {
            let (g, _) = backprop(&layers, row, t);
            for (a, gi) in analytic.iter_mut().zip(g) {
                a.w.scaled_add(1.0 / 6.0, &gi.w);
                a.b.scaled_add(1.0 / 6.0, &gi.b);
            }
        }
        let h = 1e-4;
        let mut checked = 0usize;
        for l in 0..layers.len() {
            let (rows, cols) = layers[l].w.dim();
            for r in 0..rows {
                for c in 0..cols {
                    let mut plus = layers.clone();
                    plus[l].w[[r, c]] += h;
                    let mut minus = layers.clone();
                    minus[l].w[[r, c]] -= h;
                    let fd = (mean_loss(&plus) - mean_loss(&minus)) / (2.0 * h);
                    let a = analytic[l].w[[r, c]];
                    if a.abs().max(fd.abs()) < 1e-10 {
                        continue;
                    }
                    let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
                    assert!(rel < 1e-3, "layer {l} w[{r},{c}]: {a} vs {fd}");
                    checked += 1;
                }
            }
            for r in 0..layers[l].b.len() {
                let mut plus = layers.clone();
                plus[l].b[r] += h;
                let mut minus = layers.clone();
                minus[l].b[r] -= h;
                let fd = (mean_loss(&plus) - mean_loss(&minus)) / (2.0 * h);
                let a = analytic[l].b[r];
                if a.abs().max(fd.abs()) < 1e-10 {
                    continue;
                }
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-3, "layer {l} b[{r}]: {a} vs {fd}");
                checked += 1;
            }
        }
        assert!(checked > 30, "only {checked} parameters had meaningful gradients");
    }

    #[test]
    fn separable_blobs_train_to_high_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 60;
        let x = Array2::from_shape_fn((n, 2), |(i, _)| {
            standard_normal(&mut rng) * 0.5 + if i % 2 == 0 { 2.0 } else { -2.0 }
        });
        let y: Vec<StageLabel> = (0..n).map(|i| if i % 2 == 0 { Late } else { Early }).collect();
        let params = MLPParams {
            epochs: 100,
            batch_size: 16,
            learning_rate: 0.02,
            momentum: 0.9,
        };
        let model = fit_mlp(&x, &y, &params, 3).unwrap();
        let pred = model.predict(&x);
        let hits = pred.iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(hits as f64 / n as f64 >= 0.95, "accuracy {hits}/{n}");
        assert!(model.loss_curve.last().unwrap() < &model.loss_curve[0]);
    }

    #[test]
    fn runaway_learning_rate_aborts_with_a_numerical_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Array2::from_shape_fn((16, 2), |_| standard_normal(&mut rng));
        let y: Vec<StageLabel> =
            (0..16).map(|i| if i % 2 == 0 { Late } else { Early }).collect();
        let params = MLPParams {
            epochs: 40,
            batch_size: 16,
            learning_rate: 1e8,
            momentum: 0.9,
        };
        match fit_mlp(&x, &y, &params, 0) {
            Err(Error::Numerical(msg)) => assert!(msg.contains("epoch")),
            other => panic!("expected a numerical abort, got {other:?}"),
        }
    }

    #[test]
    fn same_seed_reproduces_the_loss_curve_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((20, 3), |_| standard_normal(&mut rng));
        let y: Vec<StageLabel> =
            (0..20).map(|i| if i % 2 == 0 { Late } else { Early }).collect();
        let params = MLPParams { epochs: 5, ..MLPParams::default() };
        let a = fit_mlp(&x, &y, &params, 11).unwrap();
        let b = fit_mlp(&x, &y, &params, 11).unwrap();
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.layers, b.layers);
    }

    #[test]
    fn fitted_model_reports_its_parameter_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((8, 5), |_| standard_normal(&mut rng));
        let y: Vec<StageLabel> =
            (0..8).map(|i| if i % 2 == 0 { Late } else { Early }).collect();
        let params = MLPParams { epochs: 1, ..MLPParams::default() };
        let model = fit_mlp(&x, &y, &params, 0).unwrap();
        let mut widths = vec![5];
        widths.extend(HIDDEN_WIDTHS);
        widths.push(1);
        assert_eq!(model.param_count(), param_count_for(&widths));
    }

    #[test]
    fn invalid_hyperparameters_are_rejected() {
        assert!(MLPParams { epochs: 0, ..MLPParams::default() }.validate().is_err());
        assert!(MLPParams { batch_size: 0, ..MLPParams::default() }.validate().is_err());
        assert!(MLPParams { learning_rate: 0.0, ..MLPParams::default() }.validate().is_err());
        assert!(MLPParams { momentum: 1.0, ..MLPParams::default() }.validate().is_err());
    }
}
