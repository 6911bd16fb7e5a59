//! The collaborative-training loss stack.
//!
//! For M networks with per-sample prediction distributions `p_1..p_M` and an
//! observed label `y`:
//!
//! - supervision loss: `L_sup = sum_j CE(p_j, y)`
//! - consistency loss: `L_cons = sum_j sum_{k!=j} KL(p_k || p_j)` over all
//!   M*(M-1) ordered pairs (0 when M == 1)
//! - combined loss:    `L = (1-lambda) * L_sup + lambda * L_cons`
//!
//! `lambda` follows a Gaussian-like ramp-up [`BalanceSchedule`]: supervision
//! dominates early epochs, consensus pressure takes over as training
//! approaches the ramp-up length.
//!
//! Probabilities inside logarithms are clamped at [`PROB_CLAMP`], so no loss
//! or gradient evaluation produces NaN/Inf even on one-hot saturated inputs.
//! Gradients are the exact derivatives of the clamped formulas; a clamped
//! coordinate contributes zero slope.

use crate::error::{Error, Result};

/// Floor applied to probabilities inside logarithms.
pub const PROB_CLAMP: f64 = 1e-12;

/// Cross-entropy against a hard label: `-ln(max(p[y], clamp))`.
pub fn cross_entropy(p: &[f64], label: usize) -> Result<f64> {
    if label >= p.len() {
        return Err(Error::Label { label, classes: p.len() });
    }
    Ok(-p[label].max(PROB_CLAMP).ln())
}

/// Kullback-Leibler divergence `KL(p || q) = sum_c p_c ln(p_c / max(q_c, clamp))`,
/// with `0 * ln(0/..)` taken as 0.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!(
            "distribution lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut sum = 0.0;
    for (&pc, &qc) in p.iter().zip(q) {
        if pc > 0.0 {
            sum += pc * (pc.ln() - qc.max(PROB_CLAMP).ln());
        }
    }
    Ok(sum)
}

/// Sum of per-network cross-entropies against the observed label.
pub fn supervision_loss(preds: &[&[f64]], label: usize) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::Config("supervision loss needs at least one network".into()));
    }
    let mut sum = 0.0;
    for p in preds {
        sum += cross_entropy(p, label)?;
    }
    Ok(sum)
}

/// KL terms over all ordered pairs, in the order
/// `j = 0..M, k = 0..M (k != j): KL(p_k || p_j)`.
fn pairwise_kl(preds: &[&[f64]]) -> Result<Vec<f64>> {
    let m = preds.len();
    let mut terms = Vec::with_capacity(m * (m - 1));
    for j in 0..m {
        for k in 0..m {
            if k != j {
                terms.push(kl_divergence(preds[k], preds[j])?);
            }
        }
    }
    Ok(terms)
}

/// Consensus pressure: sum of KL divergences over all ordered pairs of
/// network predictions. Zero iff all predictions agree (within clamp
/// tolerance).
pub fn consistency_loss(preds: &[&[f64]]) -> Result<f64> {
    if preds.len() < 2 {
        return Err(Error::Config(format!(
            "consistency loss needs at least 2 networks, got {}",
            preds.len()
        )));
    }
    // Individual KL terms can round a hair below zero; the sum is a loss and
    // is reported as nonnegative.
    Ok(pairwise_kl(preds)?.iter().sum::<f64>().max(0.0))
}

/// Gaussian-like ramp-up for the supervision/consistency trade-off:
/// `lambda(e) = lambda_max * exp(-beta (1 - e/ramp_epochs)^2)` for
/// `e <= ramp_epochs`, held at `lambda_max` afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceSchedule {
    pub lambda_max: f64,
    pub beta: f64,
    pub ramp_epochs: f64,
    pub total_epochs: u32,
}

impl BalanceSchedule {
    pub fn new(lambda_max: f64, beta: f64, ramp_epochs: f64, total_epochs: u32) -> Result<Self> {
        if !(lambda_max > 0.0 && lambda_max <= 1.0) {
            return Err(Error::Config(format!(
                "lambda_max must be in (0, 1], got {lambda_max}"
            )));
        }
        if !(beta > 0.0) {
            return Err(Error::Config(format!("beta must be > 0, got {beta}")));
        }
        if !(ramp_epochs > 0.0) {
            return Err(Error::Config(format!(
                "ramp_epochs must be > 0, got {ramp_epochs}"
            )));
        }
        if total_epochs == 0 {
            return Err(Error::Config("total_epochs must be >= 1".into()));
        }
        if ramp_epochs > total_epochs as f64 {
            return Err(Error::Config(format!(
                "ramp_epochs ({ramp_epochs}) must not exceed total_epochs ({total_epochs})"
            )));
        }
        Ok(BalanceSchedule { lambda_max, beta, ramp_epochs, total_epochs })
    }

    /// The balance factor at (possibly fractional) epoch `e >= 0`.
    /// Monotonically nondecreasing; equals `lambda_max` exactly at
    /// `e == ramp_epochs` and beyond.
    pub fn lambda_at(&self, epoch: f64) -> f64 {
        debug_assert!(epoch >= 0.0);
        if epoch >= self.ramp_epochs {
            return self.lambda_max;
        }
        let t = 1.0 - epoch / self.ramp_epochs;
        self.lambda_max * (-self.beta * t * t).exp()
    }
}

/// Every term of one combined-loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub supervision: f64,
    pub consistency: f64,
    pub lambda: f64,
    pub total: f64,
    /// Per-network cross-entropy terms (length M).
    pub ce_terms: Vec<f64>,
    /// Ordered-pair KL terms in `pairwise_kl` order (length M*(M-1)).
    pub kl_terms: Vec<f64>,
}

fn validate_combined(preds: &[&[f64]], label: usize, lambda: f64) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::Config("combined loss needs at least one network".into()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda must be in [0, 1], got {lambda}")));
    }
    let classes = preds[0].len();
    if preds.iter().any(|p| p.len() != classes) {
        return Err(Error::Shape("prediction vectors have differing lengths".into()));
    }
    if label >= classes {
        return Err(Error::Label { label, classes });
    }
    Ok(())
}

/// The convex combination `(1-lambda) * L_sup + lambda * L_cons` for one
/// sample. With a single network the consistency term is defined as 0, so
/// training degenerates into plain cross-entropy.
pub fn combined_loss(preds: &[&[f64]], label: usize, lambda: f64) -> Result<LossBreakdown> {
    validate_combined(preds, label, lambda)?;
    let ce_terms: Vec<f64> = preds
        .iter()
        .map(|p| cross_entropy(p, label))
        .collect::<Result<_>>()?;
    let supervision = ce_terms.iter().sum();
    let (kl_terms, consistency) = if preds.len() >= 2 {
        let terms = pairwise_kl(preds)?;
        let sum = terms.iter().sum::<f64>().max(0.0);
        (terms, sum)
    } else {
        (Vec::new(), 0.0)
    };
    let total = (1.0 - lambda) * supervision + lambda * consistency;
    Ok(LossBreakdown { supervision, consistency, lambda, total, ce_terms, kl_terms })
}

/// Gradient of [`combined_loss`] with respect to each network's probability
/// vector; returns M vectors of length C.
///
/// With `detach_targets` on (the default training mode), the pair term
/// `KL(p_k || p_j)` sends gradient only into `p_j`; the first argument is a
/// frozen consensus target. With it off, gradient also flows into `p_j`
/// through the terms where it appears as the first argument.
///
/// These are raw partial derivatives of the clamped formulas. A constant
/// offset across classes (e.g. at the KL minimum, where every pair term has
/// slope -1 per class) lies in the null space of the softmax Jacobian, so it
/// vanishes once backpropagated into logits.
pub fn combined_loss_grad(
    preds: &[&[f64]],
    label: usize,
    lambda: f64,
    detach_targets: bool,
) -> Result<Vec<Vec<f64>>> {
    validate_combined(preds, label, lambda)?;
    let m = preds.len();
    let classes = preds[0].len();
    let mut grads = vec![vec![0.0; classes]; m];

    // Supervision: d/dp_j[y] of -(1-lambda) ln(max(p_j[y], clamp)).
    if lambda < 1.0 {
        for (g, p) in grads.iter_mut().zip(preds) {
            if p[label] > PROB_CLAMP {
                g[label] -= (1.0 - lambda) / p[label];
            }
        }
    }

    if lambda > 0.0 && m >= 2 {
        for j in 0..m {
            for k in 0..m {
                if k == j {
                    continue;
                }
                // Term KL(p_k || p_j): gradient into the second argument.
                for c in 0..classes {
                    if preds[j][c] > PROB_CLAMP {
                        grads[j][c] -= lambda * preds[k][c] / preds[j][c];
                    }
                }
                // Same term seen from the first argument; only flows when
                // targets are not detached.
                if !detach_targets {
                    for c in 0..classes {
                        if preds[k][c] > 0.0 {
                            grads[k][c] +=
                                lambda * ((preds[k][c].ln() - preds[j][c].max(PROB_CLAMP).ln()) + 1.0);
                        }
                    }
                }
            }
        }
    }

    Ok(grads)
}
