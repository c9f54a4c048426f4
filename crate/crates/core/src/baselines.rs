//! Comparison baselines: L1-penalised linear regression on the 320 board
//! features, and rank-decayed rule-feature weighting for ordered rule lists.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::metrics::{mean_std, weight_feature_set, FeatureSet};
use crate::othello::{FeatureVector, N_FEATURES};
use crate::rules::DnfRule;
use crate::scalar::Scalar;

/// Sweep stops once no coefficient moves by more than this.
pub const LASSO_TOLERANCE: f64 = 1e-6;
pub const LASSO_MAX_SWEEPS: usize = 1000;
/// Tolerance for the optimality-condition check.
pub const KKT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LassoError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("{features} feature rows but {targets} targets")]
    LengthMismatch { features: usize, targets: usize },
    #[error("non-finite target at row {0}")]
    NonFinite(usize),
    #[error("lambda must be finite and nonnegative")]
    BadLambda,
}

/// Penalty grid searched per neuron: 1e-4 to 1e-1, log-spaced.
pub fn lambda_grid() -> Vec<f64> {
    (0..7).map(|i| 10f64.powf(-4.0 + 0.5 * i as f64)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoModel<T> {
    pub weights: Vec<T>,
    pub intercept: T,
    pub lambda: T,
    pub sweeps: usize,
    /// False when the sweep cap was hit first.
    pub converged: bool,
}

impl<T: Scalar> LassoModel<T> {
    pub fn predict(&self, f: &FeatureVector) -> T {
        self.intercept + f.ones().map(|j| self.weights[j]).sum::<T>()
    }
}

/// Sufficient statistics for lasso fits on one feature matrix. The Gram
/// matrix is shared across targets.
pub struct LassoProblem<T> {
    n: usize,
    fit_intercept: bool,
    /// Column means.
    means: Vec<T>,
    /// (1/n) XᵀX, centred when fitting an intercept; row-major 320×320.
    gram: Vec<T>,
}

impl<T: Scalar> LassoProblem<T> {
    pub fn new(features: &[FeatureVector], fit_intercept: bool) -> Result<Self, LassoError> {
        let n = features.len();
        if n < 2 {
            return Err(LassoError::TooFewRows(n));
        }
        let p = N_FEATURES;
        let counts: Vec<u64> = features
            .par_chunks(4096)
            .map(|chunk| {
                let mut c = vec![0u64; p * p];
                let mut ones = Vec::with_capacity(80);
                for f in chunk {
                    ones.clear();
                    ones.extend(f.ones());
                    for (a, &j) in ones.iter().enumerate() {
                        let row = &mut c[j * p..(j + 1) * p];
                        for &k in &ones[a..] {
                            row[k] += 1;
                        }
                    }
                }
                c
            })
            .reduce(
                || vec![0u64; p * p],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        let nt = T::of_usize(n);
        let means: Vec<T> = (0..p).map(|j| T::of(counts[j * p + j] as f64) / nt).collect();
        let mut gram = vec![T::zero(); p * p];
        for j in 0..p {
            for k in j..p {
                let mut g = T::of(counts[j * p + k] as f64) / nt;
                if fit_intercept {
                    g -= means[j] * means[k];
                }
                gram[j * p + k] = g;
                gram[k * p + j] = g;
            }
        }
        Ok(LassoProblem { n, fit_intercept, means, gram })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    /// (1/n) Xᵀ(y − ȳ) (or (1/n) Xᵀy without intercept), plus ȳ.
    pub fn correlations(&self, features: &[FeatureVector], targets: &[T]) -> Result<(Vec<T>, T), LassoError> {
        if features.len() != self.n || targets.len() != self.n {
            return Err(LassoError::LengthMismatch { features: features.len(), targets: targets.len() });
        }
        if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
            return Err(LassoError::NonFinite(i));
        }
        let nt = T::of_usize(self.n);
        let mut xty = [T::zero(); N_FEATURES];
        for (f, &y) in features.iter().zip(targets) {
            for j in f.ones() {
                xty[j] += y;
            }
        }
        let ybar = targets.iter().copied().sum::<T>() / nt;
        let b = (0..N_FEATURES)
            .map(|j| {
                let v = xty[j] / nt;
                if self.fit_intercept {
                    v - self.means[j] * ybar
                } else {
                    v
                }
            })
            .collect();
        Ok((b, ybar))
    }

    /// Smallest penalty at which every weight is zero.
    pub fn lambda_max(&self, correlations: &[T]) -> T {
        correlations.iter().fold(T::zero(), |m, c| m.max(c.abs()))
    }

    /// Coordinate descent on (1/2n)·SSE + λ‖w‖₁, sweeping features in index
    /// order. `warm` seeds the weights.
    pub fn fit(
        &self,
        correlations: &[T],
        ybar: T,
        lambda: T,
        warm: Option<&[T]>,
    ) -> Result<LassoModel<T>, LassoError> {
        if !(lambda.is_finite() && lambda >= T::zero()) {
            return Err(LassoError::BadLambda);
        }
        let p = N_FEATURES;
        let mut w = warm.map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); p]);
        // grad[j] = b_j − Σ_k G_jk w_k
        let mut grad = correlations.to_vec();
        for (k, &wk) in w.iter().enumerate() {
            if wk != T::zero() {
                for (j, g) in grad.iter_mut().enumerate() {
                    *g -= self.gram[j * p + k] * wk;
                }
            }
        }
        let tol = T::of(LASSO_TOLERANCE);
        let mut sweeps = 0;
        let mut converged = false;
        while sweeps < LASSO_MAX_SWEEPS {
            sweeps += 1;
            let mut max_change = T::zero();
            for j in 0..p {
                let gjj = self.gram[j * p + j];
                let new = if gjj <= T::zero() {
                    T::zero()
                } else {
                    let rho = grad[j] + gjj * w[j];
                    soft_threshold(rho, lambda) / gjj
                };
                let delta = new - w[j];
                if delta != T::zero() {
                    let col = &self.gram[j * p..(j + 1) * p];
                    for (g, &c) in grad.iter_mut().zip(col) {
                        *g -= c * delta;
                    }
                    w[j] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < tol {
                converged = true;
                break;
            }
        }
        let intercept = if self.fit_intercept {
            ybar - (0..p).map(|j| self.means[j] * w[j]).sum::<T>()
        } else {
            T::zero()
        };
        Ok(LassoModel { weights: w, intercept, lambda, sweeps, converged })
    }
}

fn soft_threshold<T: Scalar>(x: T, lambda: T) -> T {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        T::zero()
    }
}

/// Fit a single lasso model with an unpenalised intercept.
pub fn fit_lasso<T: Scalar>(
    features: &[FeatureVector],
    targets: &[T],
    lambda: T,
) -> Result<LassoModel<T>, LassoError> {
    let problem = LassoProblem::new(features, true)?;
    let (b, ybar) = problem.correlations(features, targets)?;
    problem.fit(&b, ybar, lambda, None)
}

/// Largest violation of the lasso optimality conditions, recomputed from
/// the data: for nonzero wⱼ, |gⱼ − λ·sign(wⱼ)|; for zero wⱼ, max(0, |gⱼ| − λ),
/// where gⱼ = (1/n) Xⱼᵀ(y − ŷ).
pub fn kkt_violation<T: Scalar>(model: &LassoModel<T>, features: &[FeatureVector], targets: &[T]) -> f64 {
    let n = features.len() as f64;
    let mut g = vec![0f64; N_FEATURES];
    for (f, &y) in features.iter().zip(targets) {
        let r = y.as_f64() - model.predict(f).as_f64();
        for j in f.ones() {
            g[j] += r;
        }
    }
    let lambda = model.lambda.as_f64();
    let mut worst = 0f64;
    for (j, gj) in g.into_iter().enumerate() {
        let gj = gj / n;
        let w = model.weights[j].as_f64();
        let v = if w != 0.0 {
            (gj - lambda * w.signum()).abs()
        } else {
            (gj.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Features whose |weight| exceeds mean + k·std of all |weights|, largest
/// first.
pub fn lasso_top_features<T: Scalar>(model: &LassoModel<T>, k_sigma: T) -> FeatureSet {
    let abs: Vec<T> = model.weights.iter().map(|w| w.abs()).collect();
    let (mean, std) = mean_std(&abs);
    let cut = mean + k_sigma * std;
    let mut picked: Vec<(usize, T)> = abs.iter().copied().enumerate().filter(|&(_, a)| a > cut).collect();
    picked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite").then(a.0.cmp(&b.0)));
    picked.into_iter().map(|p| p.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleWeightConfig {
    pub rho: f64,
    pub k_sigma: f64,
}

impl Default for RuleWeightConfig {
    fn default() -> Self {
        RuleWeightConfig { rho: 0.7, k_sigma: 2.0 }
    }
}

/// One rule of an ordered list: its features and its neuron's strong F1.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedRule {
    pub features: BTreeSet<usize>,
    pub f1_strong: f64,
}

/// Per-feature weights and the one-sided k-sigma selection.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleFeatureWeights {
    pub weights: Vec<f64>,
    pub selected: FeatureSet,
}

/// w(f) = Σ over rules r containing f of F1 · 1/|r| · 1/rank(r)^ρ, with
/// rank starting at 1. Selection keeps positive weights at least k standard
/// deviations above the mean over all 320 features.
pub fn rule_feature_weights(rules: &[RankedRule], config: RuleWeightConfig) -> RuleFeatureWeights {
    let mut weights = vec![0f64; N_FEATURES];
    for (i, r) in rules.iter().enumerate() {
        if r.features.is_empty() {
            continue;
        }
        let rank = (i + 1) as f64;
        let share = r.f1_strong / r.features.len() as f64 / rank.powf(config.rho);
        for &f in &r.features {
            weights[f] += share;
        }
    }
    let selected = weight_feature_set(&weights, config.k_sigma);
    RuleFeatureWeights { weights, selected }
}

/// A DNF's clauses as an ordered rule list, most-supported clause first.
pub fn ranked_rules_from_dnf(rule: &DnfRule, f1_strong: f64, positions: &[FeatureVector]) -> Vec<RankedRule> {
    rule.clauses_by_support(positions)
        .into_iter()
        .map(|(c, _)| RankedRule { features: c.features(), f1_strong })
        .collect()
}
