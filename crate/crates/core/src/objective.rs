//! Binary cross-entropy plus the label-aware contrastive objective.
//!
//! For a batch of comment vectors `c_i` and diff vectors `s_j` (unit rows):
//!
//! ```text
//! sim_ij     = c_i . s_j / tau,      P = row-softmax(sim)
//! l_infonce  = -mean_{i : y_i = 0} log P_ii
//! l_neg      = -mean_{j : y_j = 1} log (1 - P_jj)
//! l_contrast = l_infonce + alpha * l_neg
//! l_total    = l_bce + lambda * l_contrast
//! ```
//!
//! An empty label subset contributes exactly zero. All arithmetic is `f64`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Clamp applied to probabilities before the BCE logs.
pub const BCE_EPS: f64 = 1e-7;
/// Floor inside the contrastive logs.
pub const CONTRAST_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch shape mismatch: {0}")]
    Shape(String),
    #[error("tau must be a positive finite number, got {0}")]
    Tau(f64),
    #[error("alpha must be a non-negative finite number, got {0}")]
    Alpha(f64),
    #[error("lambda must be a non-negative finite number, got {0}")]
    Lambda(f64),
    #[error("label must be 0 or 1, got {0}")]
    Label(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    pub tau: f64,
    pub alpha: f64,
    pub lambda: f64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self { tau: 0.08, alpha: 1.0, lambda: 0.1 }
    }
}

impl ContrastiveConfig {
    pub fn new(tau: f64, alpha: f64, lambda: f64) -> Result<Self, ObjectiveError> {
        let cfg = Self { tau, alpha, lambda };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(ObjectiveError::Tau(self.tau));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(ObjectiveError::Alpha(self.alpha));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(ObjectiveError::Lambda(self.lambda));
        }
        Ok(())
    }
}

/// Per-batch encoder outputs and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchTensors {
    /// Comment vectors, one row per example.
    pub comment: Vec<Vec<f64>>,
    /// Diff vectors, one row per example.
    pub diff: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
    pub labels: Vec<u8>,
}

impl BatchTensors {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Indices with label 0.
    pub fn consistent_set(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == 0).collect()
    }

    /// Indices with label 1.
    pub fn inconsistent_set(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == 1).collect()
    }

    fn validate(&self) -> Result<(), ObjectiveError> {
        let b = self.labels.len();
        if b == 0 {
            return Err(ObjectiveError::EmptyBatch);
        }
        if self.comment.len() != b || self.diff.len() != b || self.probs.len() != b {
            return Err(ObjectiveError::Shape(format!(
                "{} comment rows, {} diff rows, {} probs, {} labels",
                self.comment.len(),
                self.diff.len(),
                self.probs.len(),
                b
            )));
        }
        let d = self.comment[0].len();
        if self.comment.iter().chain(&self.diff).any(|r| r.len() != d) {
            return Err(ObjectiveError::Shape("ragged representation rows".into()));
        }
        if let Some(&bad) = self.labels.iter().find(|&&y| y > 1) {
            return Err(ObjectiveError::Label(bad));
        }
        Ok(())
    }
}

/// Gradients of `l_total` with respect to the batch tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradients {
    pub comment: Vec<Vec<f64>>,
    pub diff: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub l_bce: f64,
    pub l_infonce: f64,
    pub l_neg: f64,
    pub l_contrast: f64,
    pub l_total: f64,
    pub grads: BatchGradients,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean binary cross-entropy with probabilities clamped to `[BCE_EPS, 1 - BCE_EPS]`.
pub fn bce_loss(probs: &[f64], labels: &[u8]) -> Result<f64, ObjectiveError> {
    if probs.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    if probs.len() != labels.len() {
        return Err(ObjectiveError::Shape(format!("{} probs vs {} labels", probs.len(), labels.len())));
    }
    let sum: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(sum / probs.len() as f64)
}

/// Row-wise softmax of `comment_i . diff_j / tau`.
pub fn pairwise_softmax(comment: &[Vec<f64>], diff: &[Vec<f64>], tau: f64) -> Vec<Vec<f64>> {
    comment
        .iter()
        .map(|c| {
            let sims: Vec<f64> = diff.iter().map(|s| dot(c, s) / tau).collect();
            let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = sims.iter().map(|v| (v - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / z).collect()
        })
        .collect()
}

/// `1 - P_jj`, summed from the off-diagonal entries to avoid cancellation.
fn off_diagonal_mass(probs: &[Vec<f64>], j: usize) -> f64 {
    probs[j].iter().enumerate().filter(|&(k, _)| k != j).map(|(_, p)| p).sum()
}

/// `-mean log P_ii` over `consistent`; zero for an empty set.
pub fn infonce_loss(probs: &[Vec<f64>], consistent: &[usize]) -> f64 {
    if consistent.is_empty() {
        return 0.0;
    }
    let sum: f64 = consistent.iter().map(|&i| -probs[i][i].max(CONTRAST_EPS).ln()).sum();
    sum / consistent.len() as f64
}

/// `-mean log(1 - P_jj)` over `inconsistent`; zero for an empty set.
pub fn neg_push_loss(probs: &[Vec<f64>], inconsistent: &[usize]) -> f64 {
    if inconsistent.is_empty() {
        return 0.0;
    }
    let sum: f64 = inconsistent
        .iter()
        .map(|&j| -off_diagonal_mass(probs, j).max(CONTRAST_EPS).ln())
        .sum();
    sum / inconsistent.len() as f64
}

/// All loss terms plus exact gradients with respect to the batch tensors.
pub fn total_loss(batch: &BatchTensors, cfg: &ContrastiveConfig) -> Result<LossBreakdown, ObjectiveError> {
    cfg.validate()?;
    batch.validate()?;
    let b = batch.len();
    let d = batch.comment[0].len();
    let consistent = batch.consistent_set();
    let inconsistent = batch.inconsistent_set();

    let probs = pairwise_softmax(&batch.comment, &batch.diff, cfg.tau);
    let l_bce = bce_loss(&batch.probs, &batch.labels)?;
    let l_infonce = infonce_loss(&probs, &consistent);
    let l_neg = neg_push_loss(&probs, &inconsistent);
    let l_contrast = l_infonce + cfg.alpha * l_neg;
    let l_total = l_bce + cfg.lambda * l_contrast;

    let inv_b = 1.0 / b as f64;
    let d_probs = batch
        .probs
        .iter()
        .zip(&batch.labels)
        .map(|(&p, &y)| {
            if !(BCE_EPS..=1.0 - BCE_EPS).contains(&p) {
                0.0
            } else if y == 1 {
                -inv_b / p
            } else {
                inv_b / (1.0 - p)
            }
        })
        .collect();

    // d l_total / d sim_ik, row by row. Only diagonal entries of P enter the
    // losses, so each row's softmax Jacobian collapses to P_ii (delta_ik - P_ik).
    let mut d_sim = vec![vec![0.0; b]; b];
    if !consistent.is_empty() {
        let scale = -cfg.lambda / consistent.len() as f64;
        for &i in &consistent {
            if probs[i][i] > CONTRAST_EPS {
                for k in 0..b {
                    let delta = if k == i { 1.0 } else { 0.0 };
                    d_sim[i][k] += scale * (delta - probs[i][k]);
                }
            }
        }
    }
    if !inconsistent.is_empty() {
        let scale = cfg.lambda * cfg.alpha / inconsistent.len() as f64;
        for &j in &inconsistent {
            let rest = off_diagonal_mass(&probs, j);
            if rest > CONTRAST_EPS {
                let w = scale * probs[j][j] / rest;
                for k in 0..b {
                    let delta = if k == j { 1.0 } else { 0.0 };
                    d_sim[j][k] += w * (delta - probs[j][k]);
                }
            }
        }
    }

    let mut d_comment = vec![vec![0.0; d]; b];
    let mut d_diff = vec![vec![0.0; d]; b];
    for i in 0..b {
        for k in 0..b {
            let g = d_sim[i][k] / cfg.tau;
            if g == 0.0 {
                continue;
            }
            for t in 0..d {
                d_comment[i][t] += g * batch.diff[k][t];
                d_diff[k][t] += g * batch.comment[i][t];
            }
        }
    }

    Ok(LossBreakdown {
        l_bce,
        l_infonce,
        l_neg,
        l_contrast,
        l_total,
        grads: BatchGradients { comment: d_comment, diff: d_diff, probs: d_probs },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(rng: &mut impl Rng, d: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = dot(&v, &v).sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    fn random_batch(rng: &mut impl Rng, b: usize, d: usize) -> BatchTensors {
        BatchTensors {
            comment: (0..b).map(|_| unit(rng, d)).collect(),
            diff: (0..b).map(|_| unit(rng, d)).collect(),
            probs: (0..b).map(|_| rng.gen_range(0.01..0.99)).collect(),
            labels: (0..b).map(|_| rng.gen_range(0..2u8)).collect(),
        }
    }

    #[test]
    fn bce_examples() {
        assert!((bce_loss(&[0.5], &[1]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_loss(&[1.0 - BCE_EPS], &[1]).unwrap() <= 1.1e-7);
        // Clamp keeps perfect-but-wrong predictions finite.
        assert!(bce_loss(&[1.0], &[0]).unwrap().is_finite());
        // (-ln 0.9 - ln 0.8)/2, digits from an independent high-precision evaluation.
        let expected = 0.164_252_033_486_018_2;
        assert!((bce_loss(&[0.9, 0.2], &[1, 0]).unwrap() - expected).abs() < 1e-15);
        assert_eq!(bce_loss(&[], &[]), Err(ObjectiveError::EmptyBatch));
    }

    #[test]
    fn softmax_examples() {
        let e1 = vec![1.0, 0.0];
        let p = pairwise_softmax(&[e1.clone(), e1.clone()], &[e1.clone(), e1.clone()], 0.08);
        assert_eq!(p, vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert_eq!(pairwise_softmax(&[e1.clone()], &[e1.clone()], 0.08), vec![vec![1.0]]);

        let e2 = vec![0.0, 1.0];
        let p = pairwise_softmax(&[e1.clone(), e2.clone()], &[e1, e2], 0.08);
        // e^{12.5}/(e^{12.5}+1) = 1 - 3.726639e-6 (high-precision evaluation)
        assert!((p[0][0] - (1.0 - 3.726_639_284_186_56e-6)).abs() < 1e-15);
    }

    #[test]
    fn contrastive_term_examples() {
        assert_eq!(infonce_loss(&[vec![1.0]], &[0]), 0.0);
        let uniform = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert!((infonce_loss(&uniform, &[0, 1]) - std::f64::consts::LN_2).abs() < 1e-15);
        let mixed = vec![vec![0.8, 0.2], vec![0.3, 0.7]];
        assert!((infonce_loss(&mixed, &[0]) - 0.223_143_551_314_209_76).abs() < 1e-15);

        assert_eq!(neg_push_loss(&[vec![0.0, 1.0], vec![0.5, 0.5]], &[0]), 0.0);
        assert!((neg_push_loss(&uniform, &[0, 1]) - std::f64::consts::LN_2).abs() < 1e-15);
        let peaked = vec![vec![0.9, 0.1], vec![0.5, 0.5]];
        assert!((neg_push_loss(&peaked, &[0]) - 2.302_585_092_994_045_7).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(matches!(ContrastiveConfig::new(0.0, 1.0, 0.1), Err(ObjectiveError::Tau(_))));
        assert!(matches!(ContrastiveConfig::new(0.08, -1.0, 0.1), Err(ObjectiveError::Alpha(_))));
        assert!(matches!(ContrastiveConfig::new(0.08, 1.0, f64::NAN), Err(ObjectiveError::Lambda(_))));
        assert!(ContrastiveConfig::new(0.08, 0.0, 0.0).is_ok());
    }

    #[test]
    fn lambda_and_alpha_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = random_batch(&mut rng, 6, 4);
        let out = total_loss(&batch, &ContrastiveConfig::new(0.08, 1.0, 0.0).unwrap()).unwrap();
        assert_eq!(out.l_total, out.l_bce);
        let out = total_loss(&batch, &ContrastiveConfig::new(0.08, 0.0, 0.5).unwrap()).unwrap();
        assert_eq!(out.l_contrast, out.l_infonce);
    }

    #[test]
    fn empty_subsets_contribute_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut batch = random_batch(&mut rng, 5, 3);
        batch.labels = vec![0; 5];
        let a = total_loss(&batch, &ContrastiveConfig::new(0.08, 0.0, 1.0).unwrap()).unwrap();
        let b = total_loss(&batch, &ContrastiveConfig::new(0.08, 7.0, 1.0).unwrap()).unwrap();
        assert_eq!(a.l_neg, 0.0);
        assert_eq!(a.l_total, b.l_total);
        assert_eq!(a.grads, b.grads);

        batch.labels = vec![1; 5];
        let out = total_loss(&batch, &ContrastiveConfig::default()).unwrap();
        assert_eq!(out.l_infonce, 0.0);
        assert!(out.l_neg > 0.0);
    }

    /// Central differences of `l_total` over the batch tensors themselves.
    #[test]
    fn batch_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = ContrastiveConfig::new(0.5, 0.7, 0.9).unwrap();
        let batch = random_batch(&mut rng, 5, 3);
        let out = total_loss(&batch, &cfg).unwrap();
        let h = 1e-6;
        let eval = |b: &BatchTensors| total_loss(b, &cfg).unwrap().l_total;
        for i in 0..5 {
            for t in 0..3 {
                for which in 0..2 {
                    let mut plus = batch.clone();
                    let mut minus = batch.clone();
                    let (p, m, analytic) = if which == 0 {
                        (&mut plus.comment[i][t], &mut minus.comment[i][t], out.grads.comment[i][t])
                    } else {
                        (&mut plus.diff[i][t], &mut minus.diff[i][t], out.grads.diff[i][t])
                    };
                    *p += h;
                    *m -= h;
                    let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
                    assert!((numeric - analytic).abs() < 1e-7, "{numeric} vs {analytic}");
                }
            }
            let mut plus = batch.clone();
            let mut minus = batch.clone();
            plus.probs[i] += h;
            minus.probs[i] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            assert!((numeric - out.grads.probs[i]).abs() < 1e-6);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rows_sum_to_one_and_sharpen(seed in any::<u64>(), b in 1usize..=32, d in 1usize..=8) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let batch = random_batch(&mut rng, b, d);
                let mut prev_max: Option<Vec<f64>> = None;
                for tau in [1.0, 0.08, 0.05] {
                    let p = pairwise_softmax(&batch.comment, &batch.diff, tau);
                    let maxes: Vec<f64> = p.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect();
                    for row in &p {
                        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    }
                    if let Some(prev) = &prev_max {
                        for (now, before) in maxes.iter().zip(prev) {
                            prop_assert!(*now >= *before - 1e-12);
                        }
                    }
                    prev_max = Some(maxes);
                }
            }

            #[test]
            fn losses_are_non_negative(seed in any::<u64>(), b in 1usize..=12) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let batch = random_batch(&mut rng, b, 4);
                let out = total_loss(&batch, &ContrastiveConfig::default()).unwrap();
                prop_assert!(out.l_bce >= 0.0 && out.l_infonce >= 0.0 && out.l_neg >= 0.0);
            }
        }
    }
}
