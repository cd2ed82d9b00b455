use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CandidateBank, GrpoError};
use crate::corpus::HeadlineSet;

/// Logits over a candidate bank plus the frozen reference logits that the KL
/// penalty anchors to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    pub logits: Vec<f64>,
    pub reference_logits: Vec<f64>,
}

impl PolicyParams {
    /// Reference frozen at the given starting logits.
    pub fn anchored(logits: Vec<f64>) -> Result<Self, GrpoError> {
        let p = Self {
            reference_logits: logits.clone(),
            logits,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn uniform(size: usize) -> Self {
        Self {
            logits: vec![0.0; size],
            reference_logits: vec![0.0; size],
        }
    }

    pub fn validate(&self) -> Result<(), GrpoError> {
        if self.logits.len() != self.reference_logits.len() {
            return Err(GrpoError::Policy(format!(
                "{} logits vs {} reference logits",
                self.logits.len(),
                self.reference_logits.len()
            )));
        }
        if self.logits.is_empty() {
            return Err(GrpoError::Policy("policy has no candidates".into()));
        }
        if self
            .logits
            .iter()
            .chain(&self.reference_logits)
            .any(|v| !v.is_finite())
        {
            return Err(GrpoError::Policy("non-finite logit".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn log_probs(&self) -> Vec<f64> {
        log_softmax(&self.logits)
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs().into_iter().map(f64::exp).collect()
    }
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// One emitted set: the chosen bank indices (with repetition) and their
/// joint log-probability under the sampling policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSet {
    pub set: HeadlineSet,
    pub indices: Vec<usize>,
    pub log_prob: f64,
}

/// Draws `n` candidates independently, with replacement, from softmax(logits).
pub fn sample_set(
    policy: &PolicyParams,
    bank: &CandidateBank,
    n: usize,
    ad_id: &str,
    rng: &mut impl Rng,
) -> Result<SampledSet, GrpoError> {
    if n == 0 {
        return Err(GrpoError::Config("set size must be at least 1".into()));
    }
    if policy.len() != bank.len() {
        return Err(GrpoError::Policy(format!(
            "policy has {} logits for a bank of {}",
            policy.len(),
            bank.len()
        )));
    }
    let logp = policy.log_probs();
    let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
    let mut indices = Vec::with_capacity(n);
    for _ in 0..n {
        indices.push(draw(&probs, rng.gen::<f64>()));
    }
    let log_prob = indices.iter().map(|&i| logp[i]).sum();
    let headlines = indices
        .iter()
        .map(|&i| bank.candidates()[i].headline.clone())
        .collect();
    Ok(SampledSet {
        set: HeadlineSet::canonical(ad_id, headlines, n),
        indices,
        log_prob,
    })
}

/// Inverse-CDF draw; rounding slack at the top lands on the last index with
/// positive mass.
fn draw(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// Exact per-draw KL(π_θ ‖ π_ref) over the categorical.
pub fn kl_divergence(policy: &PolicyParams) -> f64 {
    let lp = log_softmax(&policy.logits);
    let lq = log_softmax(&policy.reference_logits);
    let kl: f64 = lp.iter().zip(&lq).map(|(a, b)| a.exp() * (a - b)).sum();
    kl.max(0.0)
}

/// `(r − mean) / (population std + ε)`; identical rewards give zeros.
pub fn group_advantages(rewards: &[f64], epsilon: f64) -> Result<Vec<f64>, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::GroupTooSmall(rewards.len()));
    }
    if rewards.iter().all(|&r| r == rewards[0]) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + epsilon;
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

/// A sampled set together with its group-relative advantage.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSample {
    pub indices: Vec<usize>,
    pub advantage: f64,
}

/// `−(1/G) Σ_g Â_g · log π(Y_g) + β · N · KL(π ‖ π_ref)`, with `log π(Y_g)`
/// re-evaluated at the current logits (ratio ≡ 1, no clipping).
pub fn surrogate_loss(
    policy: &PolicyParams,
    samples: &[ScoredSample],
    beta: f64,
    set_size: usize,
) -> f64 {
    let logp = policy.log_probs();
    let g = samples.len().max(1) as f64;
    let pg: f64 = samples
        .iter()
        .map(|s| s.advantage * s.indices.iter().map(|&i| logp[i]).sum::<f64>())
        .sum();
    -pg / g + beta * set_size as f64 * kl_divergence(policy)
}

/// Analytic gradient of [`surrogate_loss`] with respect to the logits.
///
/// `∂ log π(Y)/∂θ_k = count_k(Y) − |Y|·p_k` and
/// `∂ KL/∂θ_k = p_k (log p_k − log q_k − KL)`.
pub fn surrogate_gradient(
    policy: &PolicyParams,
    samples: &[ScoredSample],
    beta: f64,
    set_size: usize,
) -> Vec<f64> {
    let lp = log_softmax(&policy.logits);
    let lq = log_softmax(&policy.reference_logits);
    let p: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
    let kl: f64 = p
        .iter()
        .zip(lp.iter().zip(&lq))
        .map(|(pk, (a, b))| pk * (a - b))
        .sum();
    let g = samples.len().max(1) as f64;
    let mut grad = vec![0.0; p.len()];
    for s in samples {
        let scale = -s.advantage / g;
        for &i in &s.indices {
            grad[i] += scale;
        }
        let draws = s.indices.len() as f64;
        for (gk, pk) in grad.iter_mut().zip(&p) {
            *gk -= scale * draws * pk;
        }
    }
    let kl_scale = beta * set_size as f64;
    if kl_scale != 0.0 {
        for k in 0..p.len() {
            grad[k] += kl_scale * p[k] * (lp[k] - lq[k] - kl);
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bank(n: usize) -> CandidateBank {
        CandidateBank::from_headlines((0..n).map(|i| format!("候选{i}"))).unwrap()
    }

    #[test]
    fn near_one_hot_sampling() {
        let mut logits = vec![-30.0; 5];
        logits[2] = 30.0;
        let policy = PolicyParams::anchored(logits).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_set(&policy, &bank(5), 6, "ad", &mut rng).unwrap();
        assert!(s.indices.iter().all(|&i| i == 2));
        assert!(s.log_prob.abs() < 1e-20);
        assert_eq!(s.set.headlines.len(), 6);
        assert_eq!(s.set.target_count, 6);
    }

    #[test]
    fn uniform_draw_log_prob() {
        let policy = PolicyParams::uniform(7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = sample_set(&policy, &bank(7), 4, "ad", &mut rng).unwrap();
        assert!((s.log_prob - 4.0 * -(7f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn kl_cases() {
        assert_eq!(
            kl_divergence(&PolicyParams::anchored(vec![0.3, -1.0, 2.0]).unwrap()),
            0.0
        );
        let p = PolicyParams {
            logits: vec![2f64.ln(), 0.0, 0.0],
            reference_logits: vec![0.0; 3],
        };
        let expected = 0.5 * 1.5f64.ln() + 0.5 * 0.75f64.ln();
        assert!((kl_divergence(&p) - expected).abs() < 1e-15);
        assert!((kl_divergence(&p) - 0.058892).abs() < 1e-6);
    }

    #[test]
    fn advantages_cases() {
        let a = group_advantages(&[1.0, 2.0, 3.0], 1e-8).unwrap();
        let z = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((a[0] + z).abs() < 1e-7 && a[1].abs() < 1e-15 && (a[2] - z).abs() < 1e-7);
        assert!((a[2] - 1.22474).abs() < 1e-5);
        assert_eq!(group_advantages(&[5.0; 4], 1e-8).unwrap(), vec![0.0; 4]);
        assert!(matches!(
            group_advantages(&[1.0], 1e-8),
            Err(GrpoError::GroupTooSmall(1))
        ));
    }

    #[test]
    fn surrogate_trivial_cases() {
        let policy = PolicyParams::uniform(4);
        let samples = vec![ScoredSample {
            indices: vec![0, 1],
            advantage: 0.0,
        }];
        assert_eq!(surrogate_loss(&policy, &samples, 0.5, 2), 0.0);
        let moved = PolicyParams {
            logits: vec![1.0, 0.0, 0.0, 0.0],
            reference_logits: vec![0.0; 4],
        };
        let with_adv = vec![ScoredSample {
            indices: vec![0, 1],
            advantage: 1.5,
        }];
        let lp = moved.log_probs();
        assert_eq!(
            surrogate_loss(&moved, &with_adv, 0.0, 2),
            -1.5 * (lp[0] + lp[1])
        );
    }

    #[test]
    fn mismatched_policy_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_set(&PolicyParams::uniform(3), &bank(4), 2, "x", &mut rng).is_err());
        assert!(sample_set(&PolicyParams::uniform(4), &bank(4), 0, "x", &mut rng).is_err());
        assert!(PolicyParams::anchored(vec![f64::NAN]).is_err());
    }
}
