//! Input normalization, per-user softmax and the two training losses.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{LsfMatrix, SystemConfig};
use crate::throughput::{soft_loss_gradient, PilotAssignment, SoftAssignment};

/// Smallest probability passed to the logarithm of the cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

/// Mean and standard deviation of `10 log10(beta)` over a training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    pub fn identity() -> Self {
        NormStats { mean: 0.0, std: 1.0 }
    }

    /// Statistics over every entry of every matrix. A zero spread is replaced by 1.
    pub fn fit<'a>(betas: impl IntoIterator<Item = &'a LsfMatrix>) -> Result<Option<Self>> {
        let mut count = 0usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for beta in betas {
            for &v in beta.0.iter() {
                let db = to_db(v)?;
                count += 1;
                sum += db;
                sum_sq += db * db;
            }
        }
        if count == 0 {
            return Ok(None);
        }
        let mean = sum / count as f64;
        let var = (sum_sq / count as f64 - mean * mean).max(0.0);
        let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        Ok(Some(NormStats { mean, std }))
    }
}

fn to_db(v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidArgument(format!("fading coefficient {v} is not positive")));
    }
    Ok(10.0 * v.log10())
}

/// Standardized `10 log10(beta)` flattened row-major (AP-major), length M*K.
pub fn normalize_input(beta: &LsfMatrix, stats: &NormStats) -> Result<Vec<f64>> {
    beta.0.iter().map(|&v| Ok((to_db(v)? - stats.mean) / stats.std)).collect()
}

/// Row-wise softmax of `K * tau` logits.
pub fn softmax_rows(logits: &[f64], num_users: usize, num_pilots: usize) -> Result<SoftAssignment> {
    if logits.len() != num_users * num_pilots {
        return Err(Error::Dimension(format!("{} logits for {num_users}x{num_pilots}", logits.len())));
    }
    let mut q = Array2::zeros((num_users, num_pilots));
    for k in 0..num_users {
        let row = &logits[k * num_pilots..(k + 1) * num_pilots];
        let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = row.iter().map(|v| (v - top).exp()).sum();
        for t in 0..num_pilots {
            q[[k, t]] = (row[t] - top).exp() / total;
        }
    }
    Ok(SoftAssignment { q })
}

/// Pulls a gradient with respect to q back through the row softmax.
pub fn softmax_backward(q: &SoftAssignment, grad_q: &Array2<f64>) -> Vec<f64> {
    let (k, t) = q.q.dim();
    let mut out = vec![0.0; k * t];
    for u in 0..k {
        let dot: f64 = (0..t).map(|p| q.q[[u, p]] * grad_q[[u, p]]).sum();
        for p in 0..t {
            out[u * t + p] = q.q[[u, p]] * (grad_q[[u, p]] - dot);
        }
    }
    out
}

/// Argmax per row, lowest pilot index on ties.
pub fn hard_decision(q: &SoftAssignment) -> PilotAssignment {
    let pilot_of = q
        .q
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (t, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = t;
                }
            }
            best
        })
        .collect();
    PilotAssignment::new(pilot_of)
}

/// Cross-entropy `-sum_k log q[k, label_k]`.
pub fn supervised_loss(q: &SoftAssignment, label: &PilotAssignment) -> Result<f64> {
    let (k, t) = q.q.dim();
    label.validate(k, t)?;
    Ok(label.pilot_of.iter().enumerate().map(|(u, &p)| -q.q[[u, p]].max(PROB_FLOOR).ln()).sum())
}

/// Which objective a training run minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    /// Cross-entropy against master-AP labels.
    Supervised,
    /// Negative soft sum rate in Mbps.
    Unsupervised,
}

/// Loss of one sample and its gradient with respect to the logits.
pub fn loss_from_logits(
    logits: &[f64],
    mode: LossMode,
    beta: &LsfMatrix,
    label: Option<&PilotAssignment>,
    config: &SystemConfig,
) -> Result<(f64, Vec<f64>)> {
    let (k, t) = (config.num_users, config.num_pilots);
    let q = softmax_rows(logits, k, t)?;
    match mode {
        LossMode::Supervised => {
            let label = label.ok_or_else(|| Error::InvalidArgument("supervised loss needs a label".into()))?;
            let loss = supervised_loss(&q, label)?;
            let mut grad: Vec<f64> = q.q.iter().copied().collect();
            for (u, &p) in label.pilot_of.iter().enumerate() {
                grad[u * t + p] -= 1.0;
            }
            Ok((loss, grad))
        }
        LossMode::Unsupervised => {
            let (loss, grad_q) = soft_loss_gradient(beta, &q, config)?;
            Ok((loss, softmax_backward(&q, &grad_q)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_topology, lsf_matrix};

    #[test]
    fn normalization_statistics() {
        let cfg = SystemConfig::default();
        let betas: Vec<LsfMatrix> =
            (0..50).map(|s| lsf_matrix(&generate_topology(&cfg, s), &cfg, s)).collect();
        let stats = NormStats::fit(&betas).unwrap().unwrap();
        let all: Vec<f64> = betas.iter().flat_map(|b| normalize_input(b, &stats).unwrap()).collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / all.len() as f64;
        assert!(mean.abs() < 1e-9);
        assert!((var.sqrt() - 1.0).abs() < 1e-9);

        let flat = LsfMatrix::from_rows(2, 2, vec![1e-9; 4]).unwrap();
        let stats = NormStats::fit([&flat]).unwrap().unwrap();
        assert_eq!(stats.std, 1.0);
        assert_eq!(normalize_input(&flat, &stats).unwrap(), vec![0.0; 4]);
        assert_eq!(NormStats::fit(std::iter::empty()).unwrap(), None);
    }

    #[test]
    fn non_positive_beta_rejected() {
        let mut bad = LsfMatrix::from_rows(1, 2, vec![1e-9, 1e-9]).unwrap();
        bad.0[[0, 1]] = 0.0;
        assert!(normalize_input(&bad, &NormStats::identity()).is_err());
    }

    #[test]
    fn softmax_rows_and_shift_invariance() {
        let logits = [0.1, 2.0, -1.0, 5.0, 5.0, 5.0];
        let q = softmax_rows(&logits, 2, 3).unwrap();
        q.validate().unwrap();
        assert!((q.q[[1, 0]] - 1.0 / 3.0).abs() < 1e-15);
        let shifted = [10.1, 12.0, 9.0, 5.0, 5.0, 5.0];
        let q2 = softmax_rows(&shifted, 2, 3).unwrap();
        assert!((&q.q - &q2.q).iter().all(|d| d.abs() < 1e-15));
        assert!(softmax_rows(&logits, 3, 3).is_err());
    }

    #[test]
    fn hard_decision_ties_and_one_hot() {
        let one_hot = PilotAssignment::new(vec![2, 0, 1]);
        assert_eq!(hard_decision(&one_hot.to_soft(3)), one_hot);
        assert_eq!(hard_decision(&SoftAssignment::uniform(2, 3)).pilot_of, vec![0, 0]);
    }

    #[test]
    fn cross_entropy_values() {
        let label = PilotAssignment::new(vec![1, 0]);
        assert_eq!(supervised_loss(&label.to_soft(3), &label).unwrap(), 0.0);
        let uniform = supervised_loss(&SoftAssignment::uniform(2, 3), &label).unwrap();
        assert!((uniform - 2.0 * 3f64.ln()).abs() < 1e-12);
        // clamped rather than infinite
        let wrong = PilotAssignment::new(vec![0, 1]).to_soft(3);
        assert!((supervised_loss(&wrong, &label).unwrap() + 2.0 * PROB_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn logit_gradients_match_finite_differences() {
        let cfg = SystemConfig::with_dims(4, 2, 3, 2);
        let beta = lsf_matrix(&generate_topology(&cfg, 3), &cfg, 3);
        let label = PilotAssignment::new(vec![1, 0, 1]);
        let logits = [0.3, -0.2, 0.9, 0.1, -0.5, 0.4];
        for mode in [LossMode::Supervised, LossMode::Unsupervised] {
            let (_, grad) = loss_from_logits(&logits, mode, &beta, Some(&label), &cfg).unwrap();
            for i in 0..logits.len() {
                let h = 1e-6;
                let mut p = logits;
                p[i] += h;
                let fp = loss_from_logits(&p, mode, &beta, Some(&label), &cfg).unwrap().0;
                p[i] -= 2.0 * h;
                let fm = loss_from_logits(&p, mode, &beta, Some(&label), &cfg).unwrap().0;
                let fd = (fp - fm) / (2.0 * h);
                assert!((fd - grad[i]).abs() <= 1e-5 * fd.abs().max(1.0), "{mode:?} {i}: {fd} vs {}", grad[i]);
            }
        }
    }
}
