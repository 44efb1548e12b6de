//! Regularized logistic regression trained by proximal gradient descent.
//!
//! Objective, with labels mapped to y in {-1, +1} and n training rows:
//!
//! ```text
//! f(w, b) = (1/n) * sum_i log(1 + exp(-y_i (w.x_i + b))) + r(w) / (C * n)
//! ```
//!
//! where r is 0, |w|_1, ||w||^2/2, or their elastic-net blend. The bias is
//! never penalized. Smooth penalties take plain backtracking gradient steps;
//! an l1 component is handled by soft-thresholding after the smooth step.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::StageLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L1,
    #[default]
    L2,
    Elasticnet,
    None,
}

/// Kept for config compatibility; both names run the same in-repo solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    #[default]
    Liblinear,
    Saga,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LRParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub penalty: Penalty,
    pub solver: Solver,
    pub max_iter: usize,
    pub tol: f64,
    /// l1 share of the elastic-net penalty; ignored for the other kinds.
    pub l1_ratio: f64,
}

impl Default for LRParams {
    fn default() -> Self {
        LRParams {
            c: 1.0,
            penalty: Penalty::L2,
            solver: Solver::Liblinear,
            max_iter: 100,
            tol: 1e-4,
            l1_ratio: 0.5,
        }
    }
}

impl LRParams {
    pub fn validate(&self) -> Result<()> {
        if !self.c.is_finite() || self.c <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "C".into(),
                reason: "must be finite and positive".into(),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter".into(),
                reason: "must be at least 1".into(),
            });
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "tol".into(),
                reason: "must be finite and positive".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::InvalidParameter {
                name: "l1_ratio".into(),
                reason: "must lie in [0, 1]".into(),
            });
        }
        Ok(())
    }

    /// (l1 weight, l2 weight) both already divided by C*n.
    fn regularizer_weights(&self, n: usize) -> (f64, f64) {
        let scale = 1.0 / (self.c * n as f64);
        match self.penalty {
            Penalty::L1 => (scale, 0.0),
            Penalty::L2 => (0.0, scale),
            Penalty::Elasticnet => (self.l1_ratio * scale, (1.0 - self.l1_ratio) * scale),
            Penalty::None => (0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LRModel {
    pub params: LRParams,
    pub weights: Array1<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_features: usize,
    pub seed: u64,
}

impl LRModel {
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

    /// P(Late) through the logistic link.
    pub fn scores(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows().into_iter().map(|row| sigmoid(self.margin(row))).collect()
    }

    fn margin(&self, row: ArrayView1<f64>) -> f64 {
        row.dot(&self.weights) + self.bias
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(t)) without overflow.
pub(crate) fn log1pexp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn soft_threshold(v: f64, k: f64) -> f64 {
    if v > k {
        v - k
    } else if v < -k {
        v + k
    } else {
        0.0
    }
}

/// Smooth part of the objective (data term plus l2) and its gradient.
pub fn smooth_objective_grad(
    x: &Array2<f64>,
    y_pm: &[f64],
    w: &Array1<f64>,
    b: f64,
    l2: f64,
) -> (f64, Array1<f64>, f64) {
    let n = x.nrows() as f64;
    let mut value = 0.0;
    let mut grad_w = Array1::<f64>::zeros(w.len());
    let mut grad_b = 0.0;
    for (row, &y) in x.rows().into_iter().zip(y_pm) {
        let z = row.dot(w) + b;
        value += log1pexp(-y * z);
        // d/dz log(1+exp(-y z)) = sigmoid(z) - (y+1)/2
        let r = sigmoid(z) - (y + 1.0) / 2.0;
        grad_w.scaled_add(r, &row);
        grad_b += r;
    }
    value /= n;
    grad_w.mapv_inplace(|g| g / n);
    grad_b /= n;
    value += 0.5 * l2 * w.dot(w);
    grad_w.scaled_add(l2, w);
    (value, grad_w, grad_b)
}

pub fn full_objective(
    x: &Array2<f64>,
    y_pm: &[f64],
    w: &Array1<f64>,
    b: f64,
    l1: f64,
    l2: f64,
) -> f64 {
    let (smooth, _, _) = smooth_objective_grad(x, y_pm, w, b, l2);
    smooth + l1 * w.iter().map(|v| v.abs()).sum::<f64>()
}

pub(crate) fn fit_lr(x: &Array2<f64>, y: &[StageLabel], params: &LRParams, seed: u64) -> LRModel {
    let y_pm: Vec<f64> =
        y.iter().map(|l| if *l == StageLabel::Late { 1.0 } else { -1.0 }).collect();
    let (l1, l2) = params.regularizer_weights(x.nrows());
    let mut w = Array1::<f64>::zeros(x.ncols());
    let mut b = 0.0f64;
    let mut step = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..params.max_iter {
        iterations = iter + 1;
        let (g, grad_w, grad_b) = smooth_objective_grad(x, &y_pm, &w, b, l2);
        // composite optimality: distance moved by a unit proximal step
        let residual = {
            let mut s = grad_b * grad_b;
            for (wi, gi) in w.iter().zip(&grad_w) {
                let moved = wi - soft_threshold(wi - gi, l1);
                s += moved * moved;
            }
            s.sqrt()
        };
        if residual < params.tol {
            converged = true;
            iterations = iter;
            break;
        }
        step = (step * 1.25).min(1e3);
        loop {
            let w_new = Array1::from_iter(
                w.iter().zip(&grad_w).map(|(wi, gi)| soft_threshold(wi - step * gi, step * l1)),
            );
            let b_new = b - step * grad_b;
            let (g_new, _, _) = smooth_objective_grad(x, &y_pm, &w_new, b_new, l2);
            let dw = &w_new - &w;
            let db = b_new - b;
            let quad = dw.dot(&grad_w) + db * grad_b + (dw.dot(&dw) + db * db) / (2.0 * step);
            if g_new <= g + quad + 1e-12 || step < 1e-16 {
                w = w_new;
                b = b_new;
                break;
            }
            step *= 0.5;
        }
    }
    LRModel {
        params: params.clone(),
        weights: w,
        bias: b,
        converged,
        iterations,
        n_features: x.ncols(),
        seed,
    }
}
