//! C-SVM trained by sequential minimal optimization on the dual.
//!
//! Pair selection is fully deterministic: the second-choice heuristic takes
//! the non-bound point with the largest |E1 - E2| (lowest index on ties) and
//! falls back to fixed index-order scans, so identical inputs and seeds
//! rebuild the same model bit for bit.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::StageLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Poly,
    #[default]
    Rbf,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    /// 1 / (p * Var(X)) over every entry of the training matrix.
    #[default]
    Scale,
    /// 1 / p.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SVMParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub kernel: Kernel,
    pub gamma: Gamma,
    pub degree: u32,
    pub coef0: f64,
    pub tol: f64,
    /// Cap on optimization sweeps; exhausting it flags `converged = false`.
    pub max_iter: usize,
}

impl Default for SVMParams {
    fn default() -> Self {
        SVMParams {
            c: 1.0,
            kernel: Kernel::Rbf,
            gamma: Gamma::Scale,
            degree: 3,
            coef0: 0.0,
            tol: 1e-3,
            max_iter: 10_000,
        }
    }
}

impl SVMParams {
    pub fn validate(&self) -> Result<()> {
        if !self.c.is_finite() || self.c <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "C".into(),
                reason: "must be finite and positive".into(),
            });
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "tol".into(),
                reason: "must be finite and positive".into(),
            });
        }
        if self.degree == 0 {
            return Err(Error::InvalidParameter {
                name: "degree".into(),
                reason: "must be at least 1".into(),
            });
        }
        if !self.coef0.is_finite() {
            return Err(Error::InvalidParameter {
                name: "coef0".into(),
                reason: "must be finite".into(),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

pub fn kernel_value(
    kernel: Kernel,
    gamma: f64,
    degree: u32,
    coef0: f64,
    a: ArrayView1<f64>,
    b: ArrayView1<f64>,
) -> f64 {
    match kernel {
        Kernel::Linear => a.dot(&b),
        Kernel::Poly => (gamma * a.dot(&b) + coef0).powi(degree as i32),
        Kernel::Rbf => {
            let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-gamma * sq).exp()
        }
        Kernel::Sigmoid => (gamma * a.dot(&b) + coef0).tanh(),
    }
}

/// Resolves the gamma policy against the training matrix; a constant matrix
/// has no variance to scale by and falls back to 1/p.
pub(crate) fn resolve_gamma(gamma: Gamma, x: &Array2<f64>) -> f64 {
    let p = x.ncols() as f64;
    match gamma {
        Gamma::Auto => 1.0 / p,
        Gamma::Scale => {
            let n = x.len() as f64;
            let mean = x.sum() / n;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            if var > 0.0 {
                1.0 / (p * var)
            } else {
                1.0 / p
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SVMModel {
    pub params: SVMParams,
    pub gamma_value: f64,
    /// Rows of the training set with nonzero duals.
    support_x: Array2<f64>,
    /// alpha_i * y_i for each support row.
    support_coef: Vec<f64>,
    pub bias: f64,
    /// Full dual vector in training order, for audits.
    pub alphas: Vec<f64>,
    pub label_signs: Vec<f64>,
    pub converged: bool,
    pub n_features: usize,
    pub seed: u64,
}

impl SVMModel {
    pub fn decision(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                let k_sum: f64 = self
                    .support_x
                    .rows()
                    .into_iter()
                    .zip(&self.support_coef)
                    .map(|(sv, coef)| {
                        coef * kernel_value(
                            self.params.kernel,
                            self.gamma_value,
                            self.params.degree,
                            self.params.coef0,
                            sv,
                            row,
                        )
                    })
                    .sum();
                k_sum + self.bias
            })
            .collect()
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<StageLabel> {
        self.decision(x)
            .into_iter()
            .map(|d| if d > 0.0 { StageLabel::Late } else { StageLabel::Early })
            .collect()
    }

    /// Signed margin, not a probability.
    pub fn scores(&self, x: &Array2<f64>) -> Vec<f64> {
        self.decision(x)
    }
}

struct Smo<'a> {
    k: &'a Array2<f64>,
    y: &'a [f64],
    c: f64,
    tol: f64,
    alpha: Vec<f64>,
    errors: Vec<f64>,
    b: f64,
}

impl Smo<'_> {
    fn non_bound(&self) -> Vec<usize> {
        (0..self.alpha.len()).filter(|&i| self.alpha[i] > 0.0 && self.alpha[i] < self.c).collect()
    }

    /// Joint optimization of the (i1, i2) pair; true when either dual moved.
    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1_old, a2_old) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.errors[i1], self.errors[i2]);
        let s = y1 * y2;
        let (lo, hi) = if s < 0.0 {
            ((a2_old - a1_old).max(0.0), (self.c + a2_old - a1_old).min(self.c))
        } else {
            ((a1_old + a2_old - self.c).max(0.0), (a1_old + a2_old).min(self.c))
        };
        if lo >= hi {
            return false;
        }
        let (k11, k22, k12) = (self.k[[i1, i1]], self.k[[i2, i2]], self.k[[i1, i2]]);
        let eta = k11 + k22 - 2.0 * k12;
        let mut a2 = if eta > 0.0 {
            (a2_old + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // indefinite kernel: evaluate the pair's dual objective at both
            // clip ends and keep the better one
            let w_at = |a2v: f64| {
                let a1v = a1_old + s * (a2_old - a2v);
                let u1 = e1 + y1 - self.b;
                let u2 = e2 + y2 - self.b;
                let v1 = u1 - y1 * a1_old * k11 - y2 * a2_old * k12;
                let v2 = u2 - y1 * a1_old * k12 - y2 * a2_old * k22;
                a1v + a2v
                    - 0.5 * k11 * a1v * a1v
                    - 0.5 * k22 * a2v * a2v
                    - s * k12 * a1v * a2v
                    - y1 * a1v * v1
                    - y2 * a2v * v2
            };
            let (w_lo, w_hi) = (w_at(lo), w_at(hi));
            if w_lo > w_hi + 1e-12 {
                lo
            } else if w_hi > w_lo + 1e-12 {
                hi
            } else {
                return false;
            }
        };
        if (a2 - a2_old).abs() < 1e-12 * (a2 + a2_old + 1e-12) {
            return false;
        }
        if a2 < 1e-12 {
            a2 = 0.0;
        } else if a2 > self.c - 1e-12 {
            a2 = self.c;
        }
        let a1 = (a1_old + s * (a2_old - a2)).clamp(0.0, self.c);
        let (d1, d2) = (y1 * (a1 - a1_old), y2 * (a2 - a2_old));
        let b1 = self.b - e1 - d1 * k11 - d2 * k12;
        let b2 = self.b - e2 - d1 * k12 - d2 * k22;
        let b_new = if a1 > 0.0 && a1 < self.c {
            b1
        } else if a2 > 0.0 && a2 < self.c {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        let db = b_new - self.b;
        for kth in 0..self.alpha.len() {
            self.errors[kth] += d1 * self.k[[i1, kth]] + d2 * self.k[[i2, kth]] + db;
        }
        self.alpha[i1] = a1;
        self.alpha[i2] = a2;
        self.b = b_new;
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        let y2 = self.y[i2];
        let a2 = self.alpha[i2];
        let r2 = self.errors[i2] * y2;
        let violates = (r2 < -self.tol && a2 < self.c) || (r2 > self.tol && a2 > 0.0);
        if !violates {
            return false;
        }
        let non_bound = self.non_bound();
        if non_bound.len() > 1 {
            let e2 = self.errors[i2];
            let mut best = non_bound[0];
            let mut gap = -1.0;
            for &i in &non_bound {
                let g = (self.errors[i] - e2).abs();
                if g > gap {
                    gap = g;
                    best = i;
                }
            }
            if self.take_step(best, i2) {
                return true;
            }
        }
        for &i1 in &non_bound {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        for i1 in 0..self.alpha.len() {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }
}

pub(crate) fn fit_svm(
    x: &Array2<f64>,
    y: &[StageLabel],
    params: &SVMParams,
    seed: u64,
) -> Result<SVMModel> {
    let n = x.nrows();
    let gamma_value = resolve_gamma(params.gamma, x);
    let y_pm: Vec<f64> =
        y.iter().map(|l| if *l == StageLabel::Late { 1.0 } else { -1.0 }).collect();
    let mut gram = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = kernel_value(
                params.kernel,
                gamma_value,
                params.degree,
                params.coef0,
                x.row(i),
                x.row(j),
            );
            gram[[i, j]] = v;
            gram[[j, i]] = v;
        }
    }
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("kernel matrix contains non-finite entries".into()));
    }
    let mut smo = Smo {
        k: &gram,
        y: &y_pm,
        c: params.c,
        tol: params.tol,
        alpha: vec![0.0; n],
        errors: y_pm.iter().map(|v| -v).collect(),
        b: 0.0,
    };
    let mut examine_all = true;
    let mut num_changed = 1usize;
    let mut sweeps = 0usize;
    let mut converged = true;
    while num_changed > 0 || examine_all {
        sweeps += 1;
        if sweeps > params.max_iter {
            converged = false;
            break;
        }
        num_changed = 0;
        if examine_all {
            for i in 0..n {
                num_changed += smo.examine(i) as usize;
            }
        } else {
            for i in smo.non_bound() {
                num_changed += smo.examine(i) as usize;
            }
        }
        if examine_all {
            examine_all = false;
        } else if num_changed == 0 {
            examine_all = true;
        }
    }
    let support: Vec<usize> = (0..n).filter(|&i| smo.alpha[i] > 1e-12).collect();
    let support_x = x.select(ndarray::Axis(0), &support);
    let support_coef: Vec<f64> = support.iter().map(|&i| smo.alpha[i] * y_pm[i]).collect();
    Ok(SVMModel {
        params: params.clone(),
        gamma_value,
        support_x,
        support_coef,
        bias: smo.b,
        alphas: smo.alpha,
        label_signs: y_pm,
        converged,
        n_features: x.ncols(),
        seed,
    })
}

/// Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij.
pub fn dual_objective(k: &Array2<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[[i, j]];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::standard_normal;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use StageLabel::{Early, Late};

    fn xor() -> (Array2<f64>, Vec<StageLabel>) {
        (
            array![[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]],
            vec![Early, Late, Late, Early],
        )
    }

    fn accuracy(pred: &[StageLabel], truth: &[StageLabel]) -> f64 {
        let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
        hits as f64 / truth.len() as f64
    }

    #[test]
    fn rbf_separates_xor_but_linear_cannot() {
        let (x, y) = xor();
        let rbf = SVMParams { c: 10.0, ..SVMParams::default() };
        let model = fit_svm(&x, &y, &rbf, 0).unwrap();
        assert_eq!(accuracy(&model.predict(&x), &y), 1.0);
        let linear = SVMParams { c: 10.0, kernel: Kernel::Linear, ..SVMParams::default() };
        let flat = fit_svm(&x, &y, &linear, 0).unwrap();
        assert!(accuracy(&flat.predict(&x), &y) <= 0.75);
    }

    /// Projected-gradient ascent on the dual, projecting onto the box
    /// intersected with the equality constraint by bisecting the shift nu in
    /// clip(v + nu*y); yields a solver-independent optimum estimate.
    fn qp_oracle(k: &Array2<f64>, y: &[f64], c: f64) -> Vec<f64> {
        let n = y.len();
        let project = |v: &[f64]| -> Vec<f64> {
            let clip = |nu: f64| -> Vec<f64> {
                (0..n).map(|i| (v[i] + nu * y[i]).clamp(0.0, c)).collect()
            };
            let constraint = |nu: f64| -> f64 {
                clip(nu).iter().zip(y).map(|(a, yi)| a * yi).sum()
            };
            let r = c + v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + 1.0;
            let (mut lo, mut hi) = (-r, r);
            for _ in 0..200 {
                let mid = (lo + hi) / 2.0;
                if constraint(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            clip((lo + hi) / 2.0)
        };
        let max_q = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (k[[i, j]]).abs())
            .fold(0.0f64, f64::max);
        let step = 1.0 / (n as f64 * max_q.max(1e-12));
        let mut alpha = project(&vec![0.0; n]);
        for _ in 0..200_000 {
            let grad: Vec<f64> = (0..n)
                .map(|i| {
                    1.0 - y[i]
                        * (0..n).map(|j| alpha[j] * y[j] * k[[i, j]]).sum::<f64>()
                })
                .collect();
            let moved: Vec<f64> =
                (0..n).map(|i| alpha[i] + step * grad[i]).collect();
            alpha = project(&moved);
        }
        alpha
    }

    #[test]
    fn duals_are_feasible_and_objective_matches_qp_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 12;
        let x = Array2::from_shape_fn((n, 3), |(i, _)| {
            standard_normal(&mut rng) + if i % 2 == 0 { 1.0 } else { -1.0 }
        });
        let y: Vec<StageLabel> = (0..n).map(|i| if i % 2 == 0 { Late } else { Early }).collect();
        let y_pm: Vec<f64> = y.iter().map(|l| if *l == Late { 1.0 } else { -1.0 }).collect();
        for kernel in [Kernel::Linear, Kernel::Rbf] {
            let params =
                SVMParams { kernel, tol: 1e-6, max_iter: 100_000, ..SVMParams::default() };
            let model = fit_svm(&x, &y, &params, 0).unwrap();
            assert!(model.alphas.iter().all(|a| (-1e-9..=params.c + 1e-9).contains(a)));
            let balance: f64 = model.alphas.iter().zip(&y_pm).map(|(a, s)| a * s).sum();
            assert!(balance.abs() < 1e-6, "sum alpha_i y_i = {balance}");
            let gamma = resolve_gamma(params.gamma, &x);
            let mut gram = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    gram[[i, j]] = kernel_value(
                        kernel,
                        gamma,
                        params.degree,
                        params.coef0,
                        x.row(i),
                        x.row(j),
                    );
                }
            }
            let reference = qp_oracle(&gram, &y_pm, params.c);
            let w_model = dual_objective(&gram, &y_pm, &model.alphas);
            let w_ref = dual_objective(&gram, &y_pm, &reference);
            assert!(
                (w_model - w_ref).abs() <= 1e-4 * w_ref.abs().max(1.0),
                "{kernel:?}: dual objective {w_model} vs oracle {w_ref}"
            );
        }
    }

    #[test]
    fn kernel_values_match_hand_formulas() {
        let a = array![1.0, 2.0];
        let b = array![3.0, -1.0];
        assert!((kernel_value(Kernel::Linear, 0.5, 3, 1.0, a.view(), b.view()) - 1.0).abs() < 1e-15);
        let poly = kernel_value(Kernel::Poly, 0.5, 3, 1.0, a.view(), b.view());
        assert!((poly - 1.5f64.powi(3)).abs() < 1e-12);
        let rbf = kernel_value(Kernel::Rbf, 0.1, 3, 0.0, a.view(), b.view());
        assert!((rbf - (-1.3f64).exp()).abs() < 1e-12);
        let sig = kernel_value(Kernel::Sigmoid, 0.5, 3, 0.0, a.view(), b.view());
        assert!((sig - 0.5f64.tanh()).abs() < 1e-12);
    }

    #[test]
    fn gamma_policies_resolve_against_the_data() {
        let x = array![[0.0, 0.0], [4.0, 4.0]];
        assert!((resolve_gamma(Gamma::Scale, &x) - 1.0 / 8.0).abs() < 1e-15);
        assert!((resolve_gamma(Gamma::Auto, &x) - 0.5).abs() < 1e-15);
        let flat = array![[2.0, 2.0], [2.0, 2.0]];
        assert!((resolve_gamma(Gamma::Scale, &flat) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn poly_kernel_separates_simple_margin_data() {
        let x = array![[-2.0, 0.0], [-1.5, 0.3], [1.5, -0.2], [2.0, 0.1]];
        let y = vec![Early, Early, Late, Late];
        for kernel in [Kernel::Poly, Kernel::Sigmoid] {
            let params = SVMParams { kernel, c: 5.0, coef0: 1.0, ..SVMParams::default() };
            let model = fit_svm(&x, &y, &params, 0).unwrap();
            if kernel == Kernel::Poly {
                assert_eq!(accuracy(&model.predict(&x), &y), 1.0);
            } else {
                assert_eq!(model.predict(&x).len(), 4);
            }
        }
    }

    #[test]
    fn scores_are_signed_margins_consistent_with_predictions() {
        let (x, y) = xor();
        let model = fit_svm(&x, &y, &SVMParams { c: 10.0, ..SVMParams::default() }, 0).unwrap();
        for (d, label) in model.scores(&x).iter().zip(model.predict(&x)) {
            assert_eq!(label == Late, *d > 0.0);
        }
    }

    #[test]
    fn exhausted_sweep_budget_flags_converged_false() {
        let (x, y) = xor();
        let params = SVMParams { c: 10.0, max_iter: 1, ..SVMParams::default() };
        let model = fit_svm(&x, &y, &params, 0).unwrap();
        assert!(!model.converged);
        let full = fit_svm(&x, &y, &SVMParams { c: 10.0, ..SVMParams::default() }, 0).unwrap();
        assert!(full.converged);
    }

    #[test]
    fn refits_are_bitwise_identical() {
        let (x, y) = xor();
        let params = SVMParams::default();
        let a = fit_svm(&x, &y, &params, 1).unwrap();
        let b = fit_svm(&x, &y, &params, 2).unwrap();
        assert_eq!(a.alphas, b.alphas);
        assert_eq!(a.bias, b.bias);
    }

    #[test]
    fn paper_selected_config_is_accepted() {
        SVMParams { c: 1.0, kernel: Kernel::Rbf, gamma: Gamma::Scale, ..SVMParams::default() }
            .validate()
            .unwrap();
    }

    #[test]
    fn invalid_hyperparameters_are_rejected() {
        assert!(SVMParams { c: -1.0, ..SVMParams::default() }.validate().is_err());
        assert!(SVMParams { tol: 0.0, ..SVMParams::default() }.validate().is_err());
        assert!(SVMParams { degree: 0, ..SVMParams::default() }.validate().is_err());
        assert!(SVMParams { max_iter: 0, ..SVMParams::default() }.validate().is_err());
        assert!(SVMParams { coef0: f64::INFINITY, ..SVMParams::default() }.validate().is_err());
    }
}
