//! A small planted task for exercising the trainer end to end.
//!
//! The 64-candidate bank has four groups:
//!
//! - 6 planted headlines: token-disjoint, six distinct styles, faithful
//!   (quality 0.95) with good CTR (0.9). The best set under the full reward.
//! - 8 clickbait variants: near-duplicates of one statement that also
//!   borrows a bigram from every planted headline; faithful enough (0.9)
//!   with a higher CTR (0.95). Best once diversity is removed.
//! - 8 unfaithful headlines: varied styles, quality 0.1, CTR 0.95. Best
//!   once quality is removed.
//! - 42 fillers: weak on every score.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{sample_set, CandidateBank, GrpoError, PolicyParams, SetRewarder};
use crate::corpus::canonical_json;
use crate::rewards::{CompositeReward, FrozenScorer, HeadlineScorer, RewardConfig, RewardVector};
use crate::style::coverage;
use crate::textmetrics::{pair_bleu, tokenize, TokenSeq};

pub const PLANTED: [&str; 6] = [
    "轻盈跑鞋今日开售",
    "或许你缺一双登山靴？",
    "🔥史上最暖羽绒服",
    "宛如云朵般柔软的枕头🌙",
    "听说这款保温杯很好用",
    "Wireless earbuds for commuters 🎧",
];

pub const UNFAITHFUL: [&str; 8] = [
    "要不要来杯奶茶🧋？",
    "周末去哪儿玩?",
    "ultimate bargain hunt",
    "价格像白菜一样",
    "maybe try sushi tonight 🍣?",
    "据说是宇宙无敌好吃的火锅🍲",
    "也许它就像阳光☀",
    "perhaps life is like a game",
];

pub struct PlantedTask {
    pub bank: CandidateBank,
    pub quality: Arc<FrozenScorer>,
    pub ctr: Arc<FrozenScorer>,
    /// Bank indices of the planted headlines.
    pub planted: Vec<usize>,
    pub contents: Vec<String>,
    pub set_size: usize,
}

impl PlantedTask {
    pub fn reward(&self) -> CompositeReward {
        let config = RewardConfig {
            target_count: self.set_size,
            ..RewardConfig::default()
        };
        CompositeReward::new(config, self.quality.clone(), self.ctr.clone())
    }
}

pub fn planted_task() -> PlantedTask {
    let mut headlines: Vec<(String, f64, f64)> = Vec::with_capacity(64);
    for h in PLANTED {
        headlines.push((h.to_owned(), 0.95, 0.9));
    }
    for i in 1..=8 {
        headlines.push((
            format!("特价{i}号 跑鞋登山羽绒云朵保温 earbuds for you"),
            0.9,
            0.95,
        ));
    }
    for h in UNFAITHFUL {
        headlines.push((h.to_owned(), 0.1, 0.95));
    }
    for i in 1..=42 {
        headlines.push((format!("普通商品介绍 第{i}款"), 0.2, 0.2));
    }
    let quality = FrozenScorer::from_headlines(headlines.iter().map(|(h, q, _)| (h.clone(), *q)));
    let ctr = FrozenScorer::from_headlines(headlines.iter().map(|(h, _, c)| (h.clone(), *c)));
    let bank = CandidateBank::from_headlines(headlines.into_iter().map(|(h, _, _)| h))
        .expect("toy bank headlines are distinct");
    PlantedTask {
        bank,
        quality: Arc::new(quality),
        ctr: Arc::new(ctr),
        planted: (0..PLANTED.len()).collect(),
        contents: vec!["planted toy ad".to_owned()],
        set_size: 6,
    }
}

/// Best set found by greedy construction followed by single-swap hill
/// climbing, compared against any seed sets supplied by the caller.
pub fn oracle_best(
    bank: &CandidateBank,
    rewarder: &dyn SetRewarder,
    content: &str,
    set_size: usize,
    seeds: &[Vec<usize>],
) -> Result<(Vec<usize>, RewardVector), GrpoError> {
    let eval = |idx: &[usize]| rewarder.reward(content, &canonical_json(&bank.headlines(idx)));
    let mut current: Vec<usize> = Vec::with_capacity(set_size);
    for _ in 0..set_size {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..bank.len() {
            let mut trial = current.clone();
            trial.push(c);
            let r = eval(&trial)?.composite;
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((c, r));
            }
        }
        current.push(best.expect("bank is non-empty").0);
    }
    let mut best_set = current;
    let mut best_val = eval(&best_set)?;
    for s in seeds {
        let v = eval(s)?;
        if v.composite > best_val.composite {
            best_set = s.clone();
            best_val = v;
        }
    }
    loop {
        let mut improved = false;
        for pos in 0..best_set.len() {
            for c in 0..bank.len() {
                let mut trial = best_set.clone();
                trial[pos] = c;
                let v = eval(&trial)?;
                if v.composite > best_val.composite + 1e-12 {
                    best_set = trial;
                    best_val = v;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok((best_set, best_val))
}

/// Monte-Carlo summary of a policy's emitted sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEvaluation {
    pub composite: f64,
    pub pair_bleu: f64,
    pub coverage: f64,
    /// Mean raw quality-scorer output over all emitted headlines.
    pub quality_score: f64,
}

pub fn evaluate_policy(
    policy: &PolicyParams,
    task: &PlantedTask,
    rewarder: &dyn SetRewarder,
    samples: usize,
    seed: u64,
) -> Result<PolicyEvaluation, GrpoError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = RewardConfig::default();
    let content = &task.contents[0];
    let mut acc = PolicyEvaluation {
        composite: 0.0,
        pair_bleu: 0.0,
        coverage: 0.0,
        quality_score: 0.0,
    };
    for _ in 0..samples {
        let s = sample_set(policy, &task.bank, task.set_size, "eval", &mut rng)?;
        let heads = &s.set.headlines;
        acc.composite += rewarder.reward(content, &s.set.raw_output)?.composite;
        let toks: Vec<TokenSeq> = heads.iter().map(|h| tokenize(h)).collect();
        acc.pair_bleu +=
            pair_bleu(&toks, &config.bleu).map_err(crate::rewards::RewardError::from)?;
        acc.coverage +=
            coverage(heads, &config.lexicon).map_err(crate::rewards::RewardError::from)?;
        let mut q = 0.0;
        for h in heads {
            q += task
                .quality
                .score(content, h)
                .map_err(crate::rewards::RewardError::from)?;
        }
        acc.quality_score += q / heads.len() as f64;
    }
    let n = samples.max(1) as f64;
    Ok(PolicyEvaluation {
        composite: acc.composite / n,
        pair_bleu: acc.pair_bleu / n,
        coverage: acc.coverage / n,
        quality_score: acc.quality_score / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::style::{classify_style, StyleLexicon};
    use std::collections::BTreeSet;

    #[test]
    fn planted_headlines_are_disjoint_and_distinct_styles() {
        let lex = StyleLexicon::default();
        let styles: BTreeSet<_> = PLANTED
            .iter()
            .map(|h| classify_style(h, &lex).unwrap())
            .collect();
        assert_eq!(styles.len(), 6);
        let token_sets: Vec<BTreeSet<String>> = PLANTED
            .iter()
            .map(|h| tokenize(h).tokens().iter().cloned().collect())
            .collect();
        for i in 0..6 {
            for j in i + 1..6 {
                assert!(
                    token_sets[i].is_disjoint(&token_sets[j]),
                    "{} / {}",
                    PLANTED[i],
                    PLANTED[j]
                );
            }
        }
        let task = planted_task();
        assert_eq!(task.bank.len(), 64);
    }

    #[test]
    fn planted_set_is_optimal_for_the_oracle() {
        let task = planted_task();
        let reward = task.reward();
        let (set, value) = oracle_best(
            &task.bank,
            &reward,
            &task.contents[0],
            6,
            std::slice::from_ref(&task.planted),
        )
        .unwrap();
        let mut sorted = set.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, task.planted);
        assert!((value.composite - (1.0 + 1.0 + 0.9 + 1.0 + 1.0) / 5.0).abs() < 1e-12);
    }
}
