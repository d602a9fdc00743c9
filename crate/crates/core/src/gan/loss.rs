//! Semi-supervised K+1 objective.
//!
//! Logit vectors hold `K + 1` entries: classes `1..=K` at indices `0..K` and
//! the generated ("fake") class at index `K`. Every loss is written in
//! log-space so finite logits never produce `log(0)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::softmax::{logsumexp, softmax_vec};
use crate::numerics::Tensor;

fn check_logits(logits: &[f64]) -> Result<usize> {
    if logits.len() < 2 {
        return Err(Error::Shape(format!(
            "need at least one class logit plus the fake logit, got {}",
            logits.len()
        )));
    }
    Ok(logits.len() - 1)
}

/// `-log p(label | x, label <= K)`: cross-entropy over the real classes only.
pub fn loss_supervised(logits: &[f64], label: u16) -> Result<f64> {
    let k = check_logits(logits)?;
    if label == 0 || label as usize > k {
        return Err(Error::Contract(format!(
            "supervised label must lie in 1..={k}, got {label}"
        )));
    }
    let real = &logits[..k];
    Ok(logsumexp(real) - real[label as usize - 1])
}

pub fn loss_supervised_grad(logits: &[f64], label: u16) -> Result<(f64, Vec<f64>)> {
    let loss = loss_supervised(logits, label)?;
    let k = logits.len() - 1;
    let mut grad = softmax_vec(&logits[..k]);
    grad[label as usize - 1] -= 1.0;
    grad.push(0.0);
    Ok((loss, grad))
}

/// `-log(1 - p_fake)` on a real sample.
pub fn loss_unsup_real(logits: &[f64]) -> Result<f64> {
    let k = check_logits(logits)?;
    Ok(logsumexp(logits) - logsumexp(&logits[..k]))
}

pub fn loss_unsup_real_grad(logits: &[f64]) -> Result<(f64, Vec<f64>)> {
    let loss = loss_unsup_real(logits)?;
    let k = logits.len() - 1;
    let full = softmax_vec(logits);
    let real = softmax_vec(&logits[..k]);
    let mut grad: Vec<f64> = full[..k].iter().zip(&real).map(|(f, r)| f - r).collect();
    grad.push(full[k]);
    Ok((loss, grad))
}

/// `-log p_fake` on a generated sample.
pub fn loss_unsup_fake(logits: &[f64]) -> Result<f64> {
    let k = check_logits(logits)?;
    Ok(logsumexp(logits) - logits[k])
}

pub fn loss_unsup_fake_grad(logits: &[f64]) -> Result<(f64, Vec<f64>)> {
    let loss = loss_unsup_fake(logits)?;
    let k = logits.len() - 1;
    let mut grad = softmax_vec(logits);
    grad[k] -= 1.0;
    Ok((loss, grad))
}

pub fn total_loss(l1: f64, l2: f64, l3: f64) -> f64 {
    l1 + l2 + l3
}

fn batch_mean(features: &Tensor) -> Result<Vec<f64>> {
    let s = features.shape();
    if s.len() != 2 || s[0] == 0 {
        return Err(Error::Shape(format!("features must be (n > 0, d), got {s:?}")));
    }
    let mut mean = vec![0.0; s[1]];
    for i in 0..s[0] {
        for (m, &v) in mean.iter_mut().zip(features.row(i)) {
            *m += v;
        }
    }
    let inv = 1.0 / s[0] as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    Ok(mean)
}

/// Squared L2 distance between the batch means of two `(n, d)` feature sets.
pub fn feature_matching_loss(real: &Tensor, fake: &Tensor) -> Result<f64> {
    Ok(feature_matching_grad(real, fake)?.0)
}

/// Loss and its gradient with respect to every row of `fake`.
pub fn feature_matching_grad(real: &Tensor, fake: &Tensor) -> Result<(f64, Tensor)> {
    if real.shape().get(1) != fake.shape().get(1) {
        return Err(Error::Shape(format!(
            "feature widths differ: {:?} vs {:?}",
            real.shape(),
            fake.shape()
        )));
    }
    let mr = batch_mean(real)?;
    let mf = batch_mean(fake)?;
    let diff: Vec<f64> = mf.iter().zip(&mr).map(|(f, r)| f - r).collect();
    let loss = diff.iter().map(|d| d * d).sum();
    let n = fake.shape()[0];
    let row: Vec<f64> = diff.iter().map(|d| 2.0 * d / n as f64).collect();
    let mut grad = Vec::with_capacity(fake.len());
    for _ in 0..n {
        grad.extend_from_slice(&row);
    }
    Ok((loss, Tensor::new(fake.shape(), grad)?))
}

/// Losses recorded for one training step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossReport {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub total: f64,
    pub feature_match: f64,
}

impl LossReport {
    pub fn new(l1: f64, l2: f64, l3: f64, feature_match: f64) -> Self {
        LossReport {
            l1,
            l2,
            l3,
            total: total_loss(l1, l2, l3),
            feature_match,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.l1, self.l2, self.l3, self.total, self.feature_match]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn supervised_uniform_is_log_k() {
        let logits = vec![0.0; 17];
        assert!((loss_supervised(&logits, 3).unwrap() - 16f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn supervised_confident_goes_to_zero() {
        let mut logits = vec![0.0; 5];
        logits[1] = 60.0;
        assert!(loss_supervised(&logits, 2).unwrap() < 1e-20);
    }

    #[test]
    fn supervised_rejects_fake_and_unlabeled() {
        let logits = vec![0.0; 4];
        assert!(matches!(loss_supervised(&logits, 4), Err(Error::Contract(_))));
        assert!(matches!(loss_supervised(&logits, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn unsup_real_at_half() {
        // K real logits at log(1/K) each sum to probability mass 1 = fake mass.
        let k = 4;
        let mut logits = vec![-(k as f64).ln(); k];
        logits.push(0.0);
        assert!((loss_unsup_real(&logits).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((loss_unsup_fake(&logits).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn unsup_real_vanishes_as_fake_logit_drops() {
        let logits = vec![0.0, 0.0, -80.0];
        assert!(loss_unsup_real(&logits).unwrap() < 1e-30);
    }

    #[test]
    fn unsup_fake_uniform_is_log_k_plus_one() {
        assert!((loss_unsup_fake(&[0.0; 17]).unwrap() - 17f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn unsup_fake_certain_fake_is_zero() {
        assert!(loss_unsup_fake(&[-80.0, -80.0, 0.0]).unwrap() < 1e-30);
    }

    #[test]
    fn total_is_sum() {
        assert_eq!(total_loss(0.3, 0.4, 0.5), 0.3 + 0.4 + 0.5);
        assert_eq!(total_loss(0.0, 0.0, 0.0), 0.0);
        let r = LossReport::new(0.3, 0.4, 0.5, 0.0);
        assert_eq!(r.total, r.l1 + r.l2 + r.l3);
    }

    #[test]
    fn feature_matching_cases() {
        let a = Tensor::new(&[2, 2], vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let b = Tensor::new(&[1, 2], vec![0.0, 1.0]).unwrap();
        assert!((feature_matching_loss(&a, &b).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(feature_matching_loss(&a, &a).unwrap(), 0.0);
        let c = Tensor::new(&[1, 3], vec![0.0; 3]).unwrap();
        assert!(feature_matching_loss(&a, &c).is_err());
    }

    #[test]
    fn feature_matching_ignores_row_order() {
        let a = Tensor::new(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor::new(&[3, 2], vec![5.0, 6.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = Tensor::new(&[1, 2], vec![0.5, -1.0]).unwrap();
        assert!((feature_matching_loss(&r, &a).unwrap() - feature_matching_loss(&r, &b).unwrap()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn complementary_probabilities(v in proptest::collection::vec(-20.0f64..20.0, 2..10)) {
            let l2 = loss_unsup_real(&v).unwrap();
            let l3 = loss_unsup_fake(&v).unwrap();
            prop_assert!(((-l2).exp() + (-l3).exp() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn supervised_ignores_fake_logit(
            v in proptest::collection::vec(-20.0f64..20.0, 2..10),
            fake in -50.0f64..50.0,
        ) {
            let mut w = v.clone();
            *w.last_mut().unwrap() = fake;
            prop_assert_eq!(loss_supervised(&v, 1).unwrap(), loss_supervised(&w, 1).unwrap());
        }

        #[test]
        fn supervised_matches_explicit_renormalization(v in proptest::collection::vec(-10.0f64..10.0, 3..10)) {
            let k = v.len() - 1;
            let denom: f64 = v[..k].iter().map(|x| x.exp()).sum();
            for label in 1..=k {
                let direct = -(v[label - 1].exp() / denom).ln();
                prop_assert!((loss_supervised(&v, label as u16).unwrap() - direct).abs() <= 1e-9);
            }
        }

        #[test]
        fn unsup_real_matches_naive_form(v in proptest::collection::vec(-10.0f64..10.0, 2..10)) {
            let p = softmax_vec(&v);
            let real_mass = 1.0 - p[v.len() - 1];
            let naive = -real_mass.ln();
            // The naive form cancels when the fake class dominates.
            let tol = 1e-9 + 1e-14 / real_mass;
            prop_assert!((loss_unsup_real(&v).unwrap() - naive).abs() <= tol);
        }
    }
}
