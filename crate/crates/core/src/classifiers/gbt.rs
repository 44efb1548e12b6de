//! Gradient-boosted trees on logistic loss with second-order leaf weights.
//!
//! Each round fits a regression tree to the per-sample gradient g = p - y
//! and hessian h = p(1 - p); a leaf contributes -G/(H + lambda) and splits
//! maximize 0.5 * (GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)). No subsampling is
//! performed, so the fit consumes no randomness at all.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::logistic::{log1pexp, sigmoid};
use super::tree::midpoint;
use crate::data::StageLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GBTParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// l2 regularization on leaf weights.
    pub lambda: f64,
}

impl Default for GBTParams {
    fn default() -> Self {
        GBTParams { n_estimators: 100, max_depth: 3, learning_rate: 0.1, lambda: 1.0 }
    }
}

impl GBTParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidParameter {
                name: "n_estimators".into(),
                reason: "must be at least 1".into(),
            });
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidParameter {
                name: "max_depth".into(),
                reason: "must be at least 1".into(),
            });
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidParameter {
                name: "learning_rate".into(),
                reason: "must be finite and non-negative".into(),
            });
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidParameter {
                name: "lambda".into(),
                reason: "must be finite and non-negative".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree(pub Vec<RegNode>);

impl RegTree {
    fn eval(&self, row: ArrayView1<f64>) -> f64 {
        let mut at = 0;
        loop {
            match &self.0[at] {
                RegNode::Leaf { value } => return *value,
                RegNode::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GBTModel {
    pub params: GBTParams,
    /// Log-odds of the training prevalence; the boost starts here.
    pub base_score: f64,
    pub trees: Vec<RegTree>,
    /// Training log-loss before boosting and after each round.
    pub loss_curve: Vec<f64>,
    pub n_features: usize,
    pub seed: u64,
}

impl GBTModel {
    pub fn margin(&self, row: ArrayView1<f64>) -> f64 {
        self.base_score
            + self.params.learning_rate
                * self.trees.iter().map(|t| t.eval(row)).sum::<f64>()
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<StageLabel> {
        x.rows()
            .into_iter()
            .map(|row| {
                if self.margin(row) > 0.0 {
                    StageLabel::Late
                } else {
                    StageLabel::Early
                }
            })
            .collect()
    }

    /// P(Late) through the logistic link on the boosted margin.
    pub fn scores(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows().into_iter().map(|row| sigmoid(self.margin(row))).collect()
    }
}

struct GrowCtx<'a> {
    x: &'a Array2<f64>,
    g: &'a [f64],
    h: &'a [f64],
    lambda: f64,
    max_depth: usize,
}

fn grow(ctx: &GrowCtx, indices: Vec<usize>, depth: usize, nodes: &mut Vec<RegNode>) -> usize {
    let id = nodes.len();
    let g_sum: f64 = indices.iter().map(|&i| ctx.g[i]).sum();
    let h_sum: f64 = indices.iter().map(|&i| ctx.h[i]).sum();
    nodes.push(RegNode::Leaf { value: -g_sum / (h_sum + ctx.lambda) });
    if depth >= ctx.max_depth || indices.len() < 2 {
        return id;
    }
    let parent_score = g_sum * g_sum / (h_sum + ctx.lambda);
    let mut best: Option<(f64, usize, f64)> = None;
    for feature in 0..ctx.x.ncols() {
        let mut order = indices.clone();
        order.sort_unstable_by(|&a, &b| {
            ctx.x[[a, feature]].total_cmp(&ctx.x[[b, feature]]).then(a.cmp(&b))
        });
        let mut gl = 0.0;
        let mut hl = 0.0;
        for w in 0..order.len() - 1 {
            gl += ctx.g[order[w]];
            hl += ctx.h[order[w]];
            let prev = ctx.x[[order[w], feature]];
            let cur = ctx.x[[order[w + 1], feature]];
            if cur <= prev {
                continue;
            }
            let gr = g_sum - gl;
            let hr = h_sum - hl;
            let gain = 0.5
                * (gl * gl / (hl + ctx.lambda) + gr * gr / (hr + ctx.lambda) - parent_score);
            if gain > 1e-12 && best.map_or(true, |(bg, _, _)| gain > bg) {
                best = Some((gain, feature, midpoint(prev, cur)));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        return id;
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        indices.into_iter().partition(|&i| ctx.x[[i, feature]] <= threshold);
    let left = grow(ctx, left_idx, depth + 1, nodes);
    let right = grow(ctx, right_idx, depth + 1, nodes);
    nodes[id] = RegNode::Split { feature, threshold, left, right };
    id
}

fn log_loss(margins: &[f64], y01: &[f64]) -> f64 {
    let n = margins.len() as f64;
    margins
        .iter()
        .zip(y01)
        .map(|(&f, &y)| f.max(0.0) - f * y + log1pexp(-f.abs()))
        .sum::<f64>()
        / n
}

pub(crate) fn fit_gbt(x: &Array2<f64>, y: &[StageLabel], params: &GBTParams, seed: u64) -> GBTModel {
    let n = x.nrows();
    let y01: Vec<f64> =
        y.iter().map(|l| if *l == StageLabel::Late { 1.0 } else { 0.0 }).collect();
    let prevalence = (y01.iter().sum::<f64>() / n as f64).clamp(1e-12, 1.0 - 1e-12);
    let base_score = (prevalence / (1.0 - prevalence)).ln();
    let mut margins = vec![base_score; n];
    let mut loss_curve = vec![log_loss(&margins, &y01)];
    let mut trees = Vec::with_capacity(params.n_estimators);
    for _ in 0..params.n_estimators {
        let probs: Vec<f64> = margins.iter().map(|&f| sigmoid(f)).collect();
        let g: Vec<f64> = probs.iter().zip(&y01).map(|(p, y)| p - y).collect();
        let h: Vec<f64> = probs.iter().map(|p| p * (1.0 - p)).collect();
        let ctx = GrowCtx { x, g: &g, h: &h, lambda: params.lambda, max_depth: params.max_depth };
        let mut nodes = Vec::new();
        grow(&ctx, (0..n).collect(), 0, &mut nodes);
        let tree = RegTree(nodes);
        for (i, row) in x.rows().into_iter().enumerate() {
            margins[i] += params.learning_rate * tree.eval(row);
        }
        loss_curve.push(log_loss(&margins, &y01));
        trees.push(tree);
    }
    GBTModel {
        params: params.clone(),
        base_score,
        trees,
        loss_curve,
        n_features: x.ncols(),
        seed,
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

    #[test]
    fn training_log_loss_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((40, 5), |_| standard_normal(&mut rng));
        let y: Vec<StageLabel> =
            (0..40).map(|_| if rng.gen::<bool>() { Late } else { Early }).collect();
        let params = GBTParams { n_estimators: 30, ..GBTParams::default() };
        let model = fit_gbt(&x, &y, &params, 0);
        assert_eq!(model.loss_curve.len(), 31);
        for pair in model.loss_curve.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "loss rose {} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn zero_learning_rate_predicts_the_majority_class() {
        let x = Array2::from_shape_fn((12, 2), |(i, j)| (i * 2 + j) as f64);
        let mut y = vec![Early; 8];
        y.extend(vec![Late; 4]);
        let params = GBTParams { learning_rate: 0.0, n_estimators: 5, ..GBTParams::default() };
        let model = fit_gbt(&x, &y, &params, 0);
        assert!(model.predict(&x).iter().all(|l| *l == Early));
        let mut flipped = vec![Late; 8];
        flipped.extend(vec![Early; 4]);
        let late_model = fit_gbt(&x, &flipped, &params, 0);
        assert!(late_model.predict(&x).iter().all(|l| *l == Late));
        // balanced prevalence lands exactly on the boundary, which is Early
        let mut even = vec![Early; 6];
        even.extend(vec![Late; 6]);
        let tied = fit_gbt(&x, &even, &params, 0);
        assert!(tied.predict(&x).iter().all(|l| *l == Early));
    }

    #[test]
    fn stumps_fit_separable_data_perfectly() {
        let x = array![[-3.0], [-2.0], [-1.0], [1.0], [2.0], [3.0]];
        let y = vec![Early, Early, Early, Late, Late, Late];
        let params = GBTParams {
            n_estimators: 20,
            max_depth: 1,
            learning_rate: 0.5,
            ..GBTParams::default()
        };
        let model = fit_gbt(&x, &y, &params, 0);
        assert_eq!(model.predict(&x), y);
        let scores = model.scores(&x);
        assert!(scores[0] < 0.5 && scores[5] > 0.5);
    }

    #[test]
    fn base_score_is_prevalence_log_odds() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = vec![Early, Early, Early, Late];
        let model =
            fit_gbt(&x, &y, &GBTParams { n_estimators: 1, ..GBTParams::default() }, 0);
        assert!((model.base_score - (0.25f64 / 0.75).ln()).abs() < 1e-12);
    }

    #[test]
    fn paper_selected_config_is_accepted() {
        let params = GBTParams {
            n_estimators: 100,
            max_depth: 5,
            learning_rate: 0.1,
            ..GBTParams::default()
        };
        params.validate().unwrap();
        let x = array![[-1.0], [-0.5], [0.5], [1.0]];
        let y = vec![Early, Early, Late, Late];
        let model = fit_gbt(&x, &y, &params, 0);
        assert_eq!(model.trees.len(), 100);
    }

    #[test]
    fn refits_are_bitwise_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((20, 3), |_| standard_normal(&mut rng));
        let y: Vec<StageLabel> =
            (0..20).map(|i| if i % 3 == 0 { Late } else { Early }).collect();
        let params = GBTParams { n_estimators: 10, ..GBTParams::default() };
        let a = fit_gbt(&x, &y, &params, 1);
        let b = fit_gbt(&x, &y, &params, 2);
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.trees, b.trees);
    }

    #[test]
    fn invalid_hyperparameters_are_rejected() {
        assert!(GBTParams { n_estimators: 0, ..GBTParams::default() }.validate().is_err());
        assert!(GBTParams { max_depth: 0, ..GBTParams::default() }.validate().is_err());
        assert!(GBTParams { learning_rate: -0.1, ..GBTParams::default() }.validate().is_err());
        assert!(GBTParams { lambda: f64::NAN, ..GBTParams::default() }.validate().is_err());
    }
}
