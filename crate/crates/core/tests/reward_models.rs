mod common;

use common::*;
use headline_rl::rewardmodels::{
    mine_ctr_pairs, train_ctr, train_quality, FeatureSpec, InteractionLog, LinearScorer,
    TrainConfig,
};
use headline_rl::rewards::HeadlineScorer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn quality_trainer_separates_synthetic_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let data = separable_quality(200, &mut rng);
    let config = TrainConfig {
        epochs: 500,
        ..TrainConfig::default()
    };
    let trained = train_quality(&data, FeatureSpec::default(), &config).unwrap();
    assert!(accuracy(&trained.model, &data) >= 0.95);
    let trace = &trained.loss_trace;
    assert!(trace.last().unwrap() < &trace[0]);
    let held_out = separable_quality(100, &mut rng);
    assert!(accuracy(&trained.model, &held_out) >= 0.9);
}

#[test]
fn ctr_trainer_ranks_held_out_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let train = planted_pairs(120, &mut rng);
    let test = planted_pairs(60, &mut rng);
    let trained = train_ctr(&train, FeatureSpec::default(), &TrainConfig::default()).unwrap();
    let scorer = LinearScorer(trained.model);
    let gap: f64 = test
        .iter()
        .map(|p| {
            scorer.score(&p.content, &p.positive).unwrap()
                - scorer.score(&p.content, &p.negative).unwrap()
        })
        .sum::<f64>()
        / test.len() as f64;
    assert!(gap > 0.0, "mean held-out gap {gap}");
}

#[test]
fn training_is_seed_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let data = separable_quality(40, &mut rng);
    let config = TrainConfig {
        epochs: 5,
        seed: 9,
        ..TrainConfig::default()
    };
    let spec = FeatureSpec::with_dim(256);
    let a = train_quality(&data, spec, &config).unwrap();
    let b = train_quality(&data, spec, &config).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mining_takes_top_and_bottom_thirds() {
    let log = |h: &str, clicks: u64| InteractionLog {
        content: "c".into(),
        headline: h.into(),
        impressions: 100,
        clicks,
    };
    let logs = vec![
        log("h1", 50),
        log("h2", 40),
        log("h3", 30),
        log("h4", 20),
        log("h5", 10),
        log("h6", 5),
        log("h1", 50),
    ];
    let mined = mine_ctr_pairs(&logs).unwrap();
    let got: Vec<(&str, &str)> = mined
        .pairs
        .iter()
        .map(|p| (p.positive.as_str(), p.negative.as_str()))
        .collect();
    assert_eq!(
        got,
        vec![("h1", "h5"), ("h1", "h6"), ("h2", "h5"), ("h2", "h6")]
    );
    let short = vec![log("a", 1), log("b", 2)];
    assert_eq!(mine_ctr_pairs(&short).unwrap().skipped_contents, 1);
}
