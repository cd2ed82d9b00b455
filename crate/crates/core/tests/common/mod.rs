//! Independent oracles and synthetic data shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use headline_rl::corpus::{canonical_json, AdRecord, CtrPair, LabeledQuality};
use headline_rl::rewardmodels::{
    extract_features_with, predict, FeatureSpec, FeatureVector, Gradient, LinearModel,
};
use headline_rl::rewards::{HeadlineScorer, ScoreError};
use rand::seq::SliceRandom;
use rand::Rng;

pub const SMALL_VOCAB: [&str; 5] = ["a", "b", "c", "d", "e"];

pub fn random_words(rng: &mut impl Rng, max_len: usize, vocab: &[&str]) -> Vec<String> {
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| vocab.choose(rng).unwrap().to_string())
        .collect()
}

fn count_grams(tokens: &[String], n: usize) -> HashMap<Vec<String>, usize> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for i in 0..=tokens.len() - n {
            *out.entry(tokens[i..i + n].to_vec()).or_insert(0) += 1;
        }
    }
    out
}

/// Sentence BLEU by direct counting: clipped precisions for orders
/// 1..=min(max_n, |c|), geometric mean, brevity penalty against the closest
/// reference length (shorter on ties), and 0 if any precision is 0.
pub fn oracle_bleu(cand: &[String], refs: &[Vec<String>], max_n: usize) -> f64 {
    if cand.is_empty() {
        return 0.0;
    }
    let orders = max_n.min(cand.len());
    let mut precisions = Vec::new();
    for n in 1..=orders {
        let c = count_grams(cand, n);
        let mut hits = 0usize;
        let mut total = 0usize;
        for (gram, count) in &c {
            let best = refs
                .iter()
                .map(|r| count_grams(r, n).get(gram).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            hits += (*count).min(best);
            total += count;
        }
        if hits == 0 {
            return 0.0;
        }
        precisions.push(hits as f64 / total as f64);
    }
    let mut closest = refs[0].len();
    for r in refs {
        let d = r.len().abs_diff(cand.len());
        let cd = closest.abs_diff(cand.len());
        if d < cd || (d == cd && r.len() < closest) {
            closest = r.len();
        }
    }
    let bp = if cand.len() >= closest {
        1.0
    } else {
        (1.0 - closest as f64 / cand.len() as f64).exp()
    };
    let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / orders as f64;
    bp * log_mean.exp()
}

fn f1(hits: usize, c: usize, r: usize) -> (f64, f64, f64) {
    let p = if c == 0 { 0.0 } else { hits as f64 / c as f64 };
    let rc = if r == 0 { 0.0 } else { hits as f64 / r as f64 };
    let f = if p + rc == 0.0 {
        0.0
    } else {
        2.0 * p * rc / (p + rc)
    };
    (p, rc, f)
}

/// ROUGE-N (precision, recall, F1) with clipped counts.
pub fn oracle_rouge_n(cand: &[String], reference: &[String], n: usize) -> (f64, f64, f64) {
    let c = count_grams(cand, n);
    let r = count_grams(reference, n);
    let hits: usize = c
        .iter()
        .map(|(g, k)| (*k).min(r.get(g).copied().unwrap_or(0)))
        .sum();
    f1(hits, c.values().sum(), r.values().sum())
}

/// Longest common subsequence by memoized recursion on suffixes.
pub fn oracle_lcs(a: &[String], b: &[String]) -> usize {
    fn go(
        a: &[String],
        b: &[String],
        i: usize,
        j: usize,
        memo: &mut HashMap<(usize, usize), usize>,
    ) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            1 + go(a, b, i + 1, j + 1, memo)
        } else {
            go(a, b, i + 1, j, memo).max(go(a, b, i, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

pub fn oracle_rouge_l(cand: &[String], reference: &[String]) -> (f64, f64, f64) {
    f1(oracle_lcs(cand, reference), cand.len(), reference.len())
}

/// Mean BLEU over ordered pairs.
pub fn oracle_pair_bleu(set: &[Vec<String>], max_n: usize) -> f64 {
    let n = set.len();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += oracle_bleu(&set[i], &[set[j].clone()], max_n);
            }
        }
    }
    sum / (n * (n - 1)) as f64
}

const PRODUCTS: [&str; 12] = [
    "跑鞋",
    "羽绒服",
    "保温杯",
    "耳机",
    "背包",
    "帐篷",
    "面霜",
    "台灯",
    "键盘",
    "茶叶",
    "咖啡机",
    "瑜伽垫",
];
const TRAITS: [&str; 16] = [
    "轻便", "透气", "防水", "保暖", "静音", "耐磨", "便携", "高清", "柔软", "清香", "快充", "折叠",
    "防滑", "加厚", "环保", "智能",
];
const LATIN: [&str; 8] = ["pro", "max", "lite", "ultra", "air", "zen", "nova", "flex"];
const TITLE_DECOR: [&str; 6] = ["🔥", "？", "超级好用", "宛如新生", "听说", ""];

/// Ads built from a product noun, a handful of traits and a model name; titles
/// mix content words with emoji, question marks and style markers.
pub fn synthetic_records(n: usize, rng: &mut impl Rng) -> Vec<AdRecord> {
    (0..n)
        .map(|i| {
            let product = PRODUCTS.choose(rng).unwrap();
            let model = LATIN.choose(rng).unwrap();
            let count = rng.gen_range(3..7);
            let traits: Vec<&str> = TRAITS.choose_multiple(rng, count).copied().collect();
            let content = format!("{product} {model}{i} {} 限时 优惠", traits.join(" "));
            let title = format!(
                "{}{}{}{}",
                TITLE_DECOR[rng.gen_range(0..TITLE_DECOR.len())],
                traits[0],
                product,
                TITLE_DECOR[rng.gen_range(0..TITLE_DECOR.len())]
            );
            AdRecord {
                id: format!("ad-{i:04}"),
                content,
                original_title: title,
                topics: vec![product.to_string()],
                caption: String::new(),
                taxonomy: "retail".into(),
                timestamp: 1_700_000_000 + rng.gen_range(0..1_000_000),
            }
        })
        .collect()
}

/// Random non-blank headlines drawn from a mixed vocabulary.
pub fn random_headline(rng: &mut impl Rng) -> String {
    let pieces = [
        "跑鞋", "轻便", "超级", "像风", "或许", "🔥", "？", "pro", "max", "新品", "保暖", "✨",
        "登山",
    ];
    let len = rng.gen_range(1..5);
    (0..len)
        .map(|_| *pieces.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join("")
}

pub fn random_set(rng: &mut impl Rng, max: usize) -> Vec<String> {
    let n = rng.gen_range(1..=max);
    (0..n).map(|_| random_headline(rng)).collect()
}

/// Deliberately misbehaving scorer: NaN, infinities and out-of-range values.
pub struct WildScorer;

impl HeadlineScorer for WildScorer {
    fn score(&self, _: &str, headline: &str) -> Result<f64, ScoreError> {
        const VALUES: [f64; 6] = [f64::NAN, -3.0, 7.0, f64::INFINITY, 0.4, f64::NEG_INFINITY];
        Ok(VALUES[headline.len() % VALUES.len()])
    }
}

/// Raw emissions ranging from valid arrays to arbitrary noise.
pub fn arbitrary_output(rng: &mut impl Rng) -> String {
    match rng.gen_range(0..6) {
        0 => canonical_json(&random_set(rng, 10)),
        1 => {
            let mut s = canonical_json(&random_set(rng, 4));
            let mut cut = rng.gen_range(0..=s.len());
            while !s.is_char_boundary(cut) {
                cut -= 1;
            }
            s.truncate(cut);
            s
        }
        2 => "[\"\", \"  \", \"x\"]".into(),
        3 => random_set(rng, 8).join("\n"),
        4 => {
            let len = rng.gen_range(0..40);
            (0..len)
                .map(|_| char::from_u32(rng.gen_range(0..0x2FFFF)).unwrap_or('?'))
                .collect()
        }
        _ => [
            "[1, 2]",
            "{\"a\": \"b\"}",
            "null",
            "",
            "[[\"x\"]]",
            "\"solo\"",
            "[\"a\",]",
            "   [ ]  ",
        ][rng.gen_range(0..8)]
        .to_owned(),
    }
}

pub const DIM: usize = 12;

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-300)
}

pub fn random_model(rng: &mut impl Rng) -> LinearModel {
    LinearModel {
        spec: FeatureSpec {
            dim: DIM,
            hash_seed: 0,
        },
        weights: (0..DIM).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        bias: rng.gen_range(-0.3..0.3),
    }
}

pub fn random_features(rng: &mut impl Rng) -> FeatureVector {
    let dense: Vec<f64> = (0..DIM)
        .map(|_| {
            if rng.gen_bool(0.5) {
                rng.gen_range(-1.0..1.0)
            } else {
                0.0
            }
        })
        .collect();
    FeatureVector::from_dense(&dense).unwrap()
}

pub fn flatten(g: &Gradient) -> Vec<f64> {
    let mut v = g.weights.clone();
    v.push(g.bias);
    v
}

/// Central differences over every weight and the bias.
pub fn numeric(model: &LinearModel, step: f64, f: impl Fn(&LinearModel) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(DIM + 1);
    for i in 0..=DIM {
        let mut plus = model.clone();
        let mut minus = model.clone();
        if i < DIM {
            plus.weights[i] += step;
            minus.weights[i] -= step;
        } else {
            plus.bias += step;
            minus.bias -= step;
        }
        out.push((f(&plus) - f(&minus)) / (2.0 * step));
    }
    out
}

pub const WORDS: [&str; 24] = [
    "跑鞋", "羽绒", "耳机", "背包", "帐篷", "面霜", "台灯", "键盘", "茶叶", "咖啡", "瑜伽", "手表",
    "雨伞", "水杯", "围巾", "眼镜", "钱包", "拖鞋", "枕头", "毛毯", "相机", "音箱", "风扇", "书架",
];

/// Faithful headlines reuse content words; unfaithful ones never do.
pub fn separable_quality(n: usize, rng: &mut impl Rng) -> Vec<LabeledQuality> {
    (0..n)
        .map(|i| {
            let mut words = WORDS.to_vec();
            words.shuffle(rng);
            let (inside, outside) = words.split_at(8);
            let content = inside[..6].join(" ");
            let label = u8::from(i % 2 == 0);
            let pool = if label == 1 { &inside[..6] } else { outside };
            let headline = pool
                .choose_multiple(rng, 2)
                .copied()
                .collect::<Vec<_>>()
                .join("");
            LabeledQuality {
                content,
                headline,
                label,
            }
        })
        .collect()
}

pub fn accuracy(model: &LinearModel, data: &[LabeledQuality]) -> f64 {
    let correct = data
        .iter()
        .filter(|d| {
            let f = extract_features_with(&model.spec, &d.content, &d.headline).unwrap();
            (predict(model, &f).unwrap() >= 0.5) == (d.label == 1)
        })
        .count();
    correct as f64 / data.len() as f64
}

pub fn planted_pairs(n: usize, rng: &mut impl Rng) -> Vec<CtrPair> {
    (0..n)
        .map(|_| {
            let w: Vec<&str> = WORDS.choose_multiple(rng, 3).copied().collect();
            CtrPair {
                content: w.join(" "),
                positive: format!("限时特惠{}🔥", w[0]),
                negative: format!("{}产品说明", w[1]),
            }
        })
        .collect()
}
