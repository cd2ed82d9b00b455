mod common;

use common::*;
use headline_rl::grpo::{surrogate_gradient, surrogate_loss, PolicyParams, ScoredSample};
use headline_rl::rewardmodels::{bce_objective, margin_objective, sigmoid, FeatureVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn bce_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for trial in 0..20 {
        let model = random_model(&mut rng);
        let data: Vec<(FeatureVector, f64)> = (0..8)
            .map(|_| {
                (
                    random_features(&mut rng),
                    f64::from(u8::from(rng.gen_bool(0.5))),
                )
            })
            .collect();
        let l2 = if trial % 2 == 0 { 0.0 } else { 0.05 };
        let (_, g) = bce_objective(&model, &data, l2).unwrap();
        let fd = numeric(&model, 1e-4, |m| bce_objective(m, &data, l2).unwrap().0);
        let e = rel_err(&flatten(&g), &fd);
        assert!(e < 1e-5, "trial {trial}: relative error {e}");
    }
}

#[test]
fn margin_gradient_matches_finite_differences_away_from_kinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 20 {
        let model = random_model(&mut rng);
        let pairs: Vec<(FeatureVector, FeatureVector)> = (0..6)
            .map(|_| (random_features(&mut rng), random_features(&mut rng)))
            .collect();
        let near_kink = pairs.iter().any(|(p, n)| {
            let h = 0.3 - (sigmoid(model.logit(p).unwrap()) - sigmoid(model.logit(n).unwrap()));
            h.abs() < 1e-3
        });
        if near_kink {
            continue;
        }
        let l2 = if checked % 2 == 0 { 0.0 } else { 0.05 };
        let (_, g) = margin_objective(&model, &pairs, 0.3, l2).unwrap();
        let fd = numeric(&model, 1e-4, |m| {
            margin_objective(m, &pairs, 0.3, l2).unwrap().0
        });
        let e = rel_err(&flatten(&g), &fd);
        assert!(e < 1e-5, "relative error {e}");
        checked += 1;
    }
}

#[test]
fn grpo_surrogate_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for trial in 0..20 {
        let k = 5;
        let policy = PolicyParams {
            logits: (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            reference_logits: (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        };
        let set_size = 3;
        let samples: Vec<ScoredSample> = (0..4)
            .map(|_| ScoredSample {
                indices: (0..set_size).map(|_| rng.gen_range(0..k)).collect(),
                advantage: rng.gen_range(-1.5..1.5),
            })
            .collect();
        let beta = [0.0, 0.01, 0.5, 2.0][trial % 4];
        let g = surrogate_gradient(&policy, &samples, beta, set_size);
        let step = 1e-5;
        let fd: Vec<f64> = (0..k)
            .map(|i| {
                let mut plus = policy.clone();
                let mut minus = policy.clone();
                plus.logits[i] += step;
                minus.logits[i] -= step;
                (surrogate_loss(&plus, &samples, beta, set_size)
                    - surrogate_loss(&minus, &samples, beta, set_size))
                    / (2.0 * step)
            })
            .collect();
        let e = rel_err(&g, &fd);
        assert!(e < 1e-4, "trial {trial}: relative error {e}");
    }
}
