//! Group-relative policy optimization over a finite headline bank.
//!
//! The policy is a categorical distribution over bank candidates; one action
//! is a set of `N` independent draws. Each step samples `G` sets for one ad,
//! scores them with the composite reward, normalizes rewards within the
//! group, and takes one gradient step on the KL-penalized surrogate.

mod policy;
pub mod toy;

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use policy::{
    group_advantages, kl_divergence, log_softmax, sample_set, surrogate_gradient, surrogate_loss,
    PolicyParams, SampledSet, ScoredSample,
};

use crate::corpus::{non_empty, FieldError, Record};
use crate::rewards::{CompositeReward, RewardError, RewardVector};
use crate::style::StyleType;

#[derive(Debug, thiserror::Error)]
pub enum GrpoError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("invalid bank: {0}")]
    Bank(String),
    #[error("group advantages need at least 2 rewards, got {0}")]
    GroupTooSmall(usize),
    #[error("no contents to train on")]
    NoContents,
    #[error(transparent)]
    Reward(#[from] RewardError),
}

/// One bank entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    pub headline: String,
    pub style: StyleType,
    pub keyword: String,
}

impl Record for Candidate {
    fn validate(&self) -> Result<(), FieldError> {
        non_empty("headline", &self.headline)
    }

    fn unique_key(&self) -> Option<&str> {
        Some(&self.headline)
    }
}

/// The finite output space of the categorical policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateBank {
    candidates: Vec<Candidate>,
}

impl CandidateBank {
    pub fn new(candidates: Vec<Candidate>) -> Result<Self, GrpoError> {
        if candidates.len() < 2 {
            return Err(GrpoError::Bank("need at least 2 candidates".into()));
        }
        let mut seen = HashSet::new();
        for c in &candidates {
            if c.headline.trim().is_empty() {
                return Err(GrpoError::Bank("empty headline".into()));
            }
            if !seen.insert(c.headline.as_str()) {
                return Err(GrpoError::Bank(format!(
                    "duplicate headline {:?}",
                    c.headline
                )));
            }
        }
        Ok(Self { candidates })
    }

    /// Bank from bare headlines, styled by the default lexicon.
    pub fn from_headlines<S: Into<String>>(
        headlines: impl IntoIterator<Item = S>,
    ) -> Result<Self, GrpoError> {
        let lexicon = crate::style::StyleLexicon::default();
        let candidates = headlines
            .into_iter()
            .map(|h| {
                let headline = h.into();
                let style = crate::style::classify_style(&headline, &lexicon)
                    .map_err(|e| GrpoError::Bank(e.to_string()))?;
                Ok(Candidate {
                    headline,
                    style,
                    keyword: String::new(),
                })
            })
            .collect::<Result<_, GrpoError>>()?;
        Self::new(candidates)
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn headlines(&self, indices: &[usize]) -> Vec<String> {
        indices
            .iter()
            .map(|&i| self.candidates[i].headline.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub set_size: usize,
    pub beta: f64,
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
    pub advantage_epsilon: f64,
    /// Rescale the logit gradient to at most this L2 norm; `None` disables.
    pub max_grad_norm: Option<f64>,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            set_size: 6,
            beta: 0.01,
            learning_rate: 0.5,
            steps: 300,
            seed: 0,
            advantage_epsilon: 1e-8,
            max_grad_norm: Some(1.0),
        }
    }
}

impl GrpoConfig {
    /// A zero learning rate is accepted and leaves the policy untouched.
    pub fn validate(&self) -> Result<(), GrpoError> {
        let bad = |m: &str| Err(GrpoError::Config(m.into()));
        if self.group_size < 2 {
            return bad("group_size must be at least 2");
        }
        if self.set_size < 1 {
            return bad("set_size must be at least 1");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be a non-negative number");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be a non-negative number");
        }
        if self.steps < 1 {
            return bad("steps must be at least 1");
        }
        if !(self.advantage_epsilon > 0.0) {
            return bad("advantage_epsilon must be positive");
        }
        if self
            .max_grad_norm
            .is_some_and(|m| !(m > 0.0 && m.is_finite()))
        {
            return bad("max_grad_norm must be positive");
        }
        Ok(())
    }
}

/// Scores one emission for one content.
pub trait SetRewarder: Sync {
    fn reward(&self, content: &str, raw_output: &str) -> Result<RewardVector, RewardError>;
}

impl SetRewarder for CompositeReward {
    fn reward(&self, content: &str, raw_output: &str) -> Result<RewardVector, RewardError> {
        self.evaluate(content, raw_output)
    }
}

impl<F> SetRewarder for F
where
    F: Fn(&str, &str) -> Result<RewardVector, RewardError> + Sync,
{
    fn reward(&self, content: &str, raw_output: &str) -> Result<RewardVector, RewardError> {
        self(content, raw_output)
    }
}

/// Per-step statistics; one line of the trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepStats {
    pub step: usize,
    pub composite: f64,
    pub diversity: f64,
    pub quality: f64,
    pub ctr: f64,
    pub quantity: f64,
    pub format: f64,
    /// KL to the reference after the update.
    pub kl: f64,
    pub grad_norm: f64,
}

impl Record for StepStats {
    fn validate(&self) -> Result<(), FieldError> {
        if !(self.kl >= 0.0) {
            return Err(FieldError::new("kl", "must be non-negative"));
        }
        Ok(())
    }
}

/// Samples a group, scores it, and applies one surrogate gradient step.
pub fn grpo_step(
    policy: &PolicyParams,
    content: &str,
    bank: &CandidateBank,
    rewarder: &dyn SetRewarder,
    config: &GrpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(PolicyParams, StepStats), GrpoError> {
    config.validate()?;
    policy.validate()?;
    let mut samples = Vec::with_capacity(config.group_size);
    let mut rewards = Vec::with_capacity(config.group_size);
    for _ in 0..config.group_size {
        let s = sample_set(policy, bank, config.set_size, "", rng)?;
        rewards.push(rewarder.reward(content, &s.set.raw_output)?);
        samples.push(s.indices);
    }
    let composites: Vec<f64> = rewards.iter().map(|r| r.composite).collect();
    let advantages = group_advantages(&composites, config.advantage_epsilon)?;
    let scored: Vec<ScoredSample> = samples
        .into_iter()
        .zip(advantages)
        .map(|(indices, advantage)| ScoredSample { indices, advantage })
        .collect();
    let grad = surrogate_gradient(policy, &scored, config.beta, config.set_size);
    let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let scale = match config.max_grad_norm {
        Some(max) if grad_norm > max => max / grad_norm,
        _ => 1.0,
    };
    let mut next = policy.clone();
    for (l, g) in next.logits.iter_mut().zip(&grad) {
        *l -= config.learning_rate * scale * g;
    }
    let mean =
        |f: fn(&RewardVector) -> f64| rewards.iter().map(f).sum::<f64>() / rewards.len() as f64;
    let stats = StepStats {
        step: 0,
        composite: mean(|r| r.composite),
        diversity: mean(|r| r.diversity),
        quality: mean(|r| r.quality),
        ctr: mean(|r| r.ctr),
        quantity: mean(|r| r.quantity),
        format: mean(|r| r.format),
        kl: kl_divergence(&next),
        grad_norm,
    };
    Ok((next, stats))
}

/// Trains from a uniform policy whose reference is frozen at the start.
pub fn train(
    contents: &[String],
    bank: &CandidateBank,
    rewarder: &dyn SetRewarder,
    config: &GrpoConfig,
) -> Result<(PolicyParams, Vec<StepStats>), GrpoError> {
    train_from(
        PolicyParams::uniform(bank.len()),
        contents,
        bank,
        rewarder,
        config,
    )
}

/// Cycles through `contents`, one step per content, seeded by `config.seed`.
pub fn train_from(
    initial: PolicyParams,
    contents: &[String],
    bank: &CandidateBank,
    rewarder: &dyn SetRewarder,
    config: &GrpoConfig,
) -> Result<(PolicyParams, Vec<StepStats>), GrpoError> {
    config.validate()?;
    if contents.is_empty() {
        return Err(GrpoError::NoContents);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut policy = initial;
    let mut trace = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let content = &contents[step % contents.len()];
        let (next, mut stats) = grpo_step(&policy, content, bank, rewarder, config, &mut rng)?;
        stats.step = step;
        trace.push(stats);
        policy = next;
    }
    Ok((policy, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_reward(_: &str, _: &str) -> Result<RewardVector, RewardError> {
        Ok(RewardVector::from_components(0.5, 0.5, 0.5, 0.5, 0.5))
    }

    #[test]
    fn bank_invariants() {
        assert!(CandidateBank::from_headlines(["only"]).is_err());
        assert!(CandidateBank::from_headlines(["a", "a"]).is_err());
        assert_eq!(CandidateBank::from_headlines(["a", "b"]).unwrap().len(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(GrpoConfig::default().validate().is_ok());
        for bad in [
            GrpoConfig {
                group_size: 1,
                ..Default::default()
            },
            GrpoConfig {
                set_size: 0,
                ..Default::default()
            },
            GrpoConfig {
                beta: -1.0,
                ..Default::default()
            },
            GrpoConfig {
                steps: 0,
                ..Default::default()
            },
            GrpoConfig {
                advantage_epsilon: 0.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn trace_length_and_determinism() {
        let bank = CandidateBank::from_headlines(["甲", "乙", "丙"]).unwrap();
        let cfg = GrpoConfig {
            steps: 7,
            ..Default::default()
        };
        let contents = vec!["c".to_owned()];
        let (p1, t1) = train(&contents, &bank, &flat_reward, &cfg).unwrap();
        let (p2, t2) = train(&contents, &bank, &flat_reward, &cfg).unwrap();
        assert_eq!(t1.len(), 7);
        assert_eq!((p1, t1), (p2, t2));
        assert!(matches!(
            train(&[], &bank, &flat_reward, &cfg),
            Err(GrpoError::NoContents)
        ));
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let bank = CandidateBank::from_headlines(["甲", "乙", "丙"]).unwrap();
        let start = PolicyParams::anchored(vec![0.2, -0.7, 1.1]).unwrap();
        let cfg = GrpoConfig {
            learning_rate: 0.0,
            steps: 5,
            ..Default::default()
        };
        let reward = |_: &str, raw: &str| -> Result<RewardVector, RewardError> {
            let v = if raw.contains('甲') { 1.0 } else { 0.0 };
            Ok(RewardVector::from_components(v, v, v, v, v))
        };
        let (end, _) = train_from(start.clone(), &["c".into()], &bank, &reward, &cfg).unwrap();
        for (a, b) in end.logits.iter().zip(&start.logits) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
