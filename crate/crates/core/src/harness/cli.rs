//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data or
//! validation error, 3 internal error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use super::{
    ablation_compare, evaluate_sets, render_ablation, render_table, select_for_profile, EvalConfig,
    HarnessError, MetricReport, NliScore, NliScores, UserProfile,
};
use crate::corpus::{
    read_records, split_chronological, write_records, write_records_to, AdRecord, CorpusError,
    CtrPair, HeadlineSet, LabeledQuality, Quadruple, Record,
};
use crate::grpo::{toy, train, Candidate, CandidateBank, GrpoConfig, GrpoError, SetRewarder};
use crate::pipeline::{
    assemble_sft_dataset, build_sets, enrich, verify, FileKeywordProposer, IdfKeywordProposer,
    KeywordEntry, KeywordProposer, PipelineError, RuleAnnotator, StopTokens, TemplateSet,
    DEFAULT_KEYWORDS_PER_AD,
};
use crate::rewardmodels::{
    extract_features_with, mine_ctr_pairs, predict, train_ctr, train_quality, FeatureSpec,
    LinearModel, LinearScorer, ModelError, TrainConfig,
};
use crate::rewards::{
    Component, CompositeReward, FrozenScorer, HeadlineScorer, QualityMode, RewardConfig,
    RewardError, RewardRecord,
};
use crate::style::{StyleError, StyleLexicon};
use crate::textmetrics::{
    BleuConfig, EmbeddingProvider, FileEmbeddingProvider, HashedBigramProvider, MetricError,
};

#[derive(Debug, Parser)]
#[command(
    name = "headline-rl",
    version,
    about = "Rewards, metrics, data pipeline and GRPO for ad headline sets"
)]
struct Cli {
    /// Seed for every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML settings file (`[reward]`, `[bleu]`, `[train]`, `[features]`, `[grpo]`, `[pipeline]`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Composite rewards for every set in a HeadlineSet file.
    Score(ScoreArgs),
    /// Diversity and quality report for generated sets against reference titles.
    Metrics(MetricsArgs),
    /// Signed per-metric deltas between two metric reports.
    Compare(CompareArgs),
    /// Train the faithfulness classifier.
    TrainQuality(TrainQualityArgs),
    /// Train the pairwise CTR scorer.
    TrainCtr(TrainCtrArgs),
    /// Mine top-third / bottom-third CTR pairs from interaction logs.
    MinePairs(MinePairsArgs),
    /// Run GRPO over a headline bank; writes trace.jsonl and policy.json.
    TrainGrpo(TrainGrpoArgs),
    /// Data pipeline stages.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Pick the headline closest to each user profile.
    Select(SelectArgs),
    /// Chronological train/test split of ad records.
    Split(SplitArgs),
}

#[derive(Debug, Args)]
struct ScorerArgs {
    /// Frozen quality scores (content?, headline, score).
    #[arg(long, conflicts_with = "quality_model")]
    quality_scores: Option<PathBuf>,
    /// Trained quality model.
    #[arg(long)]
    quality_model: Option<PathBuf>,
    /// Frozen CTR scores.
    #[arg(long, conflicts_with = "ctr_model")]
    ctr_scores: Option<PathBuf>,
    /// Trained CTR model.
    #[arg(long)]
    ctr_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    sets: PathBuf,
    /// Ad records providing the content for each set's ad_id.
    #[arg(long)]
    records: Option<PathBuf>,
    #[command(flatten)]
    scorers: ScorerArgs,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    sets: PathBuf,
    /// Ad records whose original titles are the references.
    #[arg(long)]
    references: PathBuf,
    /// Precomputed embeddings; defaults to hashed character bigrams.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Precomputed entailment scores (ad_id, headline, score).
    #[arg(long)]
    nli: Option<PathBuf>,
    /// Row label in the text table.
    #[arg(long, default_value = "generated")]
    label: String,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    variant: PathBuf,
}

#[derive(Debug, Args)]
struct TrainQualityArgs {
    #[arg(long)]
    data: PathBuf,
}

#[derive(Debug, Args)]
struct TrainCtrArgs {
    #[arg(long)]
    pairs: PathBuf,
}

#[derive(Debug, Args)]
struct MinePairsArgs {
    #[arg(long)]
    logs: PathBuf,
}

#[derive(Debug, Args)]
struct TrainGrpoArgs {
    /// Candidate bank; without it the built-in planted toy task is used.
    #[arg(long, requires = "contents")]
    bank: Option<PathBuf>,
    /// Ad records whose contents are cycled through during training.
    #[arg(long)]
    contents: Option<PathBuf>,
    #[command(flatten)]
    scorers: ScorerArgs,
    /// Reward components to remove, comma separated.
    #[arg(long, value_delimiter = ',')]
    ablate: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum PipelineCommand {
    /// Annotate each record's title with a keyword and style.
    Enrich(RecordsArg),
    /// Propose keywords per record.
    Keywords(KeywordsArgs),
    /// Keyword × style controlled generation with verification.
    Generate(GenerateArgs),
    /// Verify quadruples; prints one report per line.
    Verify(VerifyArgs),
    /// Assemble prompt / JSON-array training pairs.
    Assemble(AssembleArgs),
    /// Every stage end to end into an output directory.
    Run(GenerateArgs),
}

#[derive(Debug, Args)]
struct RecordsArg {
    #[arg(long)]
    records: PathBuf,
}

#[derive(Debug, Args)]
struct KeywordsArgs {
    #[arg(long)]
    records: PathBuf,
    /// Keywords per ad.
    #[arg(short, long)]
    k: Option<usize>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(short, long)]
    k: Option<usize>,
    /// Externally proposed keywords (content, keywords).
    #[arg(long)]
    keywords: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    quadruples: PathBuf,
}

#[derive(Debug, Args)]
struct AssembleArgs {
    #[arg(long)]
    sets: PathBuf,
    #[arg(long)]
    records: PathBuf,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    sets: PathBuf,
    #[arg(long)]
    profiles: PathBuf,
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Settings {
    reward: RewardSettings,
    bleu: BleuConfig,
    train: TrainConfig,
    features: FeatureSpec,
    grpo: GrpoConfig,
    pipeline: PipelineSettings,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RewardSettings {
    target_count: Option<usize>,
    faithfulness_threshold: Option<f64>,
    quality_mode: Option<QualityMode>,
    lexicon: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PipelineSettings {
    k: Option<usize>,
    templates: Option<PathBuf>,
    stop_tokens: Option<PathBuf>,
}

/// A malformed invocation; mapped to exit code 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

struct Ctx {
    seed: Option<u64>,
    out: Option<PathBuf>,
    settings: Settings,
    lexicon: StyleLexicon,
}

impl Ctx {
    fn seed(&self, configured: u64) -> u64 {
        self.seed.unwrap_or(configured)
    }

    fn out_required(&self) -> anyhow::Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| UsageError("this subcommand requires --out".into()).into())
    }

    fn reward_config(&self) -> anyhow::Result<RewardConfig> {
        let s = &self.settings.reward;
        let d = RewardConfig::default();
        let config = RewardConfig {
            target_count: s.target_count.unwrap_or(d.target_count),
            faithfulness_threshold: s.faithfulness_threshold.unwrap_or(d.faithfulness_threshold),
            quality_mode: s.quality_mode.unwrap_or(d.quality_mode),
            bleu: self.settings.bleu,
            lexicon: self.lexicon.clone(),
        };
        config.validate()?;
        Ok(config)
    }

    fn eval_config(&self, embedding_label: String) -> EvalConfig {
        EvalConfig {
            bleu: self.settings.bleu,
            lexicon: self.lexicon.clone(),
            embedding_label,
        }
    }

    fn k(&self, flag: Option<usize>) -> usize {
        flag.or(self.settings.pipeline.k)
            .unwrap_or(DEFAULT_KEYWORDS_PER_AD)
    }

    fn templates(&self) -> anyhow::Result<TemplateSet> {
        Ok(match &self.settings.pipeline.templates {
            Some(p) => TemplateSet::load(p, &self.lexicon)?,
            None => TemplateSet::default(),
        })
    }

    fn stop_tokens(&self) -> anyhow::Result<StopTokens> {
        Ok(match &self.settings.pipeline.stop_tokens {
            Some(p) => StopTokens::load(p)?,
            None => StopTokens::default(),
        })
    }

    /// Writes records to `--out`, or to stdout when it is absent.
    fn emit<R: Record>(&self, records: &[R]) -> anyhow::Result<()> {
        match &self.out {
            Some(p) => {
                write_records(records, p)?;
            }
            None => {
                write_records_to(records, std::io::stdout().lock()).context("writing to stdout")?;
            }
        }
        Ok(())
    }
}

/// Parses `argv` (including the program name), runs the command, and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    if e.is::<UsageError>() {
        1
    } else if e.is::<CorpusError>()
        || e.is::<MetricError>()
        || e.is::<StyleError>()
        || e.is::<RewardError>()
        || e.is::<ModelError>()
        || e.is::<GrpoError>()
        || e.is::<PipelineError>()
        || e.is::<HarnessError>()
        || e.is::<serde_json::Error>()
        || e.is::<toml::de::Error>()
    {
        2
    } else {
        3
    }
}

fn load_settings(path: Option<&Path>) -> anyhow::Result<Settings> {
    let Some(path) = path else {
        return Ok(Settings::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(toml::from_str(&text)?)
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let settings = load_settings(cli.config.as_deref())?;
    let lexicon = match &settings.reward.lexicon {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CorpusError::Io {
                path: p.clone(),
                source,
            })?;
            StyleLexicon::parse(&text)?
        }
        None => StyleLexicon::default(),
    };
    let ctx = Ctx {
        seed: cli.seed,
        out: cli.out,
        settings,
        lexicon,
    };
    match cli.command {
        Command::Score(a) => score(&ctx, a),
        Command::Metrics(a) => metrics(&ctx, a),
        Command::Compare(a) => compare(&ctx, a),
        Command::TrainQuality(a) => train_quality_cmd(&ctx, a),
        Command::TrainCtr(a) => train_ctr_cmd(&ctx, a),
        Command::MinePairs(a) => {
            let logs = read_records(&a.logs)?;
            let mined = mine_ctr_pairs(&logs)?;
            eprintln!(
                "{} pairs, {} contents skipped",
                mined.pairs.len(),
                mined.skipped_contents
            );
            ctx.emit(&mined.pairs)
        }
        Command::TrainGrpo(a) => train_grpo_cmd(&ctx, a),
        Command::Pipeline(p) => pipeline_cmd(&ctx, p),
        Command::Select(a) => select(&ctx, a),
        Command::Split(a) => {
            let records: Vec<AdRecord> = read_records(&a.records)?;
            let (train, test) = split_chronological(&records, a.train_fraction)?;
            let dir = ctx.out_required()?;
            create_dir(dir)?;
            write_records(&train, &dir.join("train.jsonl"))?;
            write_records(&test, &dir.join("test.jsonl"))?;
            println!("train {} / test {}", train.len(), test.len());
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| {
        CorpusError::Io {
            path: dir.to_owned(),
            source,
        }
        .into()
    })
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).map_err(|source| {
        CorpusError::Io {
            path: path.to_owned(),
            source,
        }
        .into()
    })
}

fn scorer(
    scores: Option<&Path>,
    model: Option<&Path>,
    name: &str,
) -> anyhow::Result<Arc<dyn HeadlineScorer>> {
    match (scores, model) {
        (Some(p), None) => Ok(Arc::new(FrozenScorer::load(p)?)),
        (None, Some(p)) => Ok(Arc::new(LinearScorer(LinearModel::load(p)?))),
        _ => Err(UsageError(format!(
            "exactly one of --{name}-scores or --{name}-model is required"
        ))
        .into()),
    }
}

fn scorers(
    args: &ScorerArgs,
) -> anyhow::Result<(Arc<dyn HeadlineScorer>, Arc<dyn HeadlineScorer>)> {
    Ok((
        scorer(
            args.quality_scores.as_deref(),
            args.quality_model.as_deref(),
            "quality",
        )?,
        scorer(args.ctr_scores.as_deref(), args.ctr_model.as_deref(), "ctr")?,
    ))
}

fn content_lookup(
    path: Option<&Path>,
) -> anyhow::Result<std::collections::HashMap<String, String>> {
    let Some(path) = path else {
        return Ok(Default::default());
    };
    let records: Vec<AdRecord> = read_records(path)?;
    Ok(records.into_iter().map(|r| (r.id, r.content)).collect())
}

fn score(ctx: &Ctx, a: ScoreArgs) -> anyhow::Result<()> {
    let sets: Vec<HeadlineSet> = read_records(&a.sets)?;
    let contents = content_lookup(a.records.as_deref())?;
    let (quality, ctr) = scorers(&a.scorers)?;
    let base = ctx.reward_config()?;
    let mut out = Vec::with_capacity(sets.len());
    for set in &sets {
        let content = match (&a.records, contents.get(&set.ad_id)) {
            (None, _) => "",
            (Some(_), Some(c)) => c.as_str(),
            (Some(_), None) => bail!(PipelineError::MissingEntry(format!(
                "ad record {:?}",
                set.ad_id
            ))),
        };
        let mut config = base.clone();
        if ctx.settings.reward.target_count.is_none() {
            config.target_count = set.target_count;
        }
        let reward = CompositeReward::new(config, quality.clone(), ctr.clone());
        out.push(RewardRecord::new(
            &set.ad_id,
            &reward.evaluate(content, &set.raw_output)?,
        ));
    }
    ctx.emit(&out)?;
    if ctx.out.is_some() {
        for r in &out {
            println!("{}\tcomposite {}", r.ad_id, r.composite);
        }
    }
    let mean = out.iter().map(|r| r.composite).sum::<f64>() / out.len().max(1) as f64;
    eprintln!("mean composite {mean}");
    Ok(())
}

fn provider(path: Option<&Path>) -> anyhow::Result<(Box<dyn EmbeddingProvider>, String)> {
    Ok(match path {
        Some(p) => (
            Box::new(FileEmbeddingProvider::load(p)?),
            "precomputed".to_owned(),
        ),
        None => (
            Box::new(HashedBigramProvider::default()),
            "hashed-char-bigram".to_owned(),
        ),
    })
}

fn metrics(ctx: &Ctx, a: MetricsArgs) -> anyhow::Result<()> {
    let sets: Vec<HeadlineSet> = read_records(&a.sets)?;
    let refs: Vec<AdRecord> = read_records(&a.references)?;
    let refs: Vec<(String, String)> = refs.into_iter().map(|r| (r.id, r.original_title)).collect();
    let (provider, label) = provider(a.embeddings.as_deref())?;
    let nli = match &a.nli {
        Some(p) => Some(NliScores::new(read_records::<NliScore>(p)?)),
        None => None,
    };
    let report = evaluate_sets(
        &sets,
        &refs,
        provider.as_ref(),
        &ctx.eval_config(label),
        nli.as_ref(),
    )?;
    if let Some(p) = &ctx.out {
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        write_text(p, &json)?;
    }
    let mut table = render_table(&[(a.label.as_str(), &report)]);
    for (metric, reason) in &report.absent {
        let _ = writeln!(table, "absent {metric}: {reason}");
    }
    print!("{table}");
    Ok(())
}

fn read_report(path: &Path) -> anyhow::Result<MetricReport> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn compare(ctx: &Ctx, a: CompareArgs) -> anyhow::Result<()> {
    let rows = ablation_compare(&read_report(&a.baseline)?, &read_report(&a.variant)?)?;
    if let Some(p) = &ctx.out {
        let mut json = serde_json::to_string_pretty(&rows)?;
        json.push('\n');
        write_text(p, &json)?;
    }
    print!("{}", render_ablation(&rows));
    Ok(())
}

fn train_config(ctx: &Ctx) -> TrainConfig {
    TrainConfig {
        seed: ctx.seed(ctx.settings.train.seed),
        ..ctx.settings.train
    }
}

fn train_quality_cmd(ctx: &Ctx, a: TrainQualityArgs) -> anyhow::Result<()> {
    let out = ctx.out_required()?;
    let data: Vec<LabeledQuality> = read_records(&a.data)?;
    let spec = ctx.settings.features;
    let trained = train_quality(&data, spec, &train_config(ctx))?;
    let mut correct = 0usize;
    for d in &data {
        let p = predict(
            &trained.model,
            &extract_features_with(&spec, &d.content, &d.headline)?,
        )?;
        correct += usize::from((p >= 0.5) == (d.label == 1));
    }
    trained.model.save(out)?;
    println!(
        "final loss {} train accuracy {}",
        trained.loss_trace.last().copied().unwrap_or(f64::NAN),
        correct as f64 / data.len() as f64
    );
    Ok(())
}

fn train_ctr_cmd(ctx: &Ctx, a: TrainCtrArgs) -> anyhow::Result<()> {
    let out = ctx.out_required()?;
    let pairs: Vec<CtrPair> = read_records(&a.pairs)?;
    let trained = train_ctr(&pairs, ctx.settings.features, &train_config(ctx))?;
    let mut gap = 0.0;
    for p in &pairs {
        gap += trained.model.score_text(&p.content, &p.positive)?
            - trained.model.score_text(&p.content, &p.negative)?;
    }
    trained.model.save(out)?;
    println!(
        "final loss {} mean margin {}",
        trained.loss_trace.last().copied().unwrap_or(f64::NAN),
        gap / pairs.len() as f64
    );
    Ok(())
}

fn train_grpo_cmd(ctx: &Ctx, a: TrainGrpoArgs) -> anyhow::Result<()> {
    let dir = ctx.out_required()?;
    let mut config = ctx.settings.grpo;
    config.seed = ctx.seed(config.seed);
    let ablated = a
        .ablate
        .iter()
        .map(|s| s.parse::<Component>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| UsageError(e.to_string()))?;

    let (bank, contents, mut reward) = match &a.bank {
        None => {
            let task = toy::planted_task();
            config.set_size = task.set_size;
            let mut reward_config = ctx.reward_config()?;
            reward_config.target_count = task.set_size;
            let reward =
                CompositeReward::new(reward_config, task.quality.clone(), task.ctr.clone());
            (task.bank, task.contents, reward)
        }
        Some(bank_path) => {
            let candidates: Vec<Candidate> = read_records(bank_path)?;
            let bank = CandidateBank::new(candidates)?;
            let contents_path = a.contents.as_deref().expect("clap enforces --contents");
            let records: Vec<AdRecord> = read_records(contents_path)?;
            let contents: Vec<String> = records.into_iter().map(|r| r.content).collect();
            let (quality, ctr) = scorers(&a.scorers)?;
            let mut reward_config = ctx.reward_config()?;
            if ctx.settings.reward.target_count.is_none() {
                reward_config.target_count = config.set_size;
            }
            (
                bank,
                contents,
                CompositeReward::new(reward_config, quality, ctr),
            )
        }
    };
    for c in ablated {
        reward = reward.without(c);
    }
    let rewarder: &dyn SetRewarder = &reward;
    let (policy, trace) = train(&contents, &bank, rewarder, &config)?;

    create_dir(dir)?;
    write_records(&trace, &dir.join("trace.jsonl"))?;
    let mut json = serde_json::to_string_pretty(&policy)?;
    json.push('\n');
    write_text(&dir.join("policy.json"), &json)?;

    let last = trace.last().expect("steps >= 1");
    let probs = policy.probs();
    let mut top: Vec<usize> = (0..probs.len()).collect();
    top.sort_by(|&i, &j| probs[j].total_cmp(&probs[i]).then(i.cmp(&j)));
    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "steps {} final composite {:.4} kl {:.6}",
        trace.len(),
        last.composite,
        last.kl
    )?;
    for &i in top.iter().take(config.set_size) {
        writeln!(stdout, "{:.4}\t{}", probs[i], bank.candidates()[i].headline)?;
    }
    Ok(())
}

fn keyword_proposer(
    ctx: &Ctx,
    records: &[AdRecord],
    file: Option<&Path>,
) -> anyhow::Result<Box<dyn KeywordProposer>> {
    Ok(match file {
        Some(p) => Box::new(FileKeywordProposer::load(p)?),
        None => {
            let docs: Vec<&str> = records.iter().map(|r| r.content.as_str()).collect();
            Box::new(IdfKeywordProposer::new(
                &docs,
                ctx.stop_tokens()?,
                &ctx.lexicon,
            ))
        }
    })
}

fn pipeline_cmd(ctx: &Ctx, cmd: PipelineCommand) -> anyhow::Result<()> {
    match cmd {
        PipelineCommand::Enrich(a) => {
            let records: Vec<AdRecord> = read_records(&a.records)?;
            let annotator =
                RuleAnnotator::for_records(&records, ctx.stop_tokens()?, ctx.lexicon.clone());
            let out = enrich(&records, &annotator)?;
            eprintln!(
                "{} quadruples, {} skipped",
                out.quadruples.len(),
                out.skipped
            );
            ctx.emit(&out.quadruples)
        }
        PipelineCommand::Keywords(a) => {
            let records: Vec<AdRecord> = read_records(&a.records)?;
            let proposer = keyword_proposer(ctx, &records, None)?;
            let k = ctx.k(a.k);
            let mut entries = Vec::with_capacity(records.len());
            let mut shortfalls = 0;
            for r in &records {
                let p = proposer.propose(&r.content, k)?;
                shortfalls += usize::from(p.shortfall);
                entries.push(KeywordEntry {
                    content: r.content.clone(),
                    keywords: p.keywords,
                });
            }
            eprintln!(
                "{} records, {} with fewer than {k} keywords",
                records.len(),
                shortfalls
            );
            ctx.emit(&entries)
        }
        PipelineCommand::Generate(a) => {
            let records: Vec<AdRecord> = read_records(&a.records)?;
            let proposer = keyword_proposer(ctx, &records, a.keywords.as_deref())?;
            let built = build_sets(
                &records,
                ctx.k(a.k),
                proposer.as_ref(),
                &ctx.templates()?,
                &ctx.lexicon,
                ctx.seed(0),
            )?;
            eprintln!(
                "{} sets, {} headlines kept, {} rejected",
                built.sets.len(),
                built.quadruples.len(),
                built.rejected
            );
            ctx.emit(&built.sets)
        }
        PipelineCommand::Verify(a) => {
            let quads: Vec<Quadruple> = read_records(&a.quadruples)?;
            let mut passed = 0;
            let mut stdout = std::io::stdout().lock();
            for (i, q) in quads.iter().enumerate() {
                let r = verify(q, &ctx.lexicon);
                passed += usize::from(r.passed);
                writeln!(
                    stdout,
                    "{i}\tkeyword_ok={}\tstyle_ok={}\tpassed={}",
                    r.keyword_ok, r.style_ok, r.passed
                )?;
            }
            writeln!(stdout, "passed {passed}/{}", quads.len())?;
            Ok(())
        }
        PipelineCommand::Assemble(a) => {
            let sets: Vec<HeadlineSet> = read_records(&a.sets)?;
            let records: Vec<AdRecord> = read_records(&a.records)?;
            ctx.emit(&assemble_sft_dataset(&sets, &records)?)
        }
        PipelineCommand::Run(a) => {
            let dir = ctx.out_required()?;
            let records: Vec<AdRecord> = read_records(&a.records)?;
            let annotator =
                RuleAnnotator::for_records(&records, ctx.stop_tokens()?, ctx.lexicon.clone());
            let enriched = enrich(&records, &annotator)?;
            let proposer = keyword_proposer(ctx, &records, a.keywords.as_deref())?;
            let built = build_sets(
                &records,
                ctx.k(a.k),
                proposer.as_ref(),
                &ctx.templates()?,
                &ctx.lexicon,
                ctx.seed(0),
            )?;
            let sft = assemble_sft_dataset(&built.sets, &records)?;
            let quads: Vec<Quadruple> = enriched
                .quadruples
                .iter()
                .chain(&built.quadruples)
                .cloned()
                .collect();
            let passed = quads
                .iter()
                .filter(|q| verify(q, &ctx.lexicon).passed)
                .count();
            create_dir(dir)?;
            write_records(&enriched.quadruples, &dir.join("enriched.jsonl"))?;
            write_records(&built.quadruples, &dir.join("generated.jsonl"))?;
            write_records(&built.sets, &dir.join("sets.jsonl"))?;
            write_records(&sft, &dir.join("sft.jsonl"))?;
            println!(
                "records {} enriched {} skipped {} generated {} rejected {} verified {passed}/{} sft {}",
                records.len(),
                enriched.quadruples.len(),
                enriched.skipped,
                built.quadruples.len(),
                built.rejected,
                quads.len(),
                sft.len()
            );
            if passed != quads.len() {
                return Err(anyhow!(
                    "{} quadruples failed verification",
                    quads.len() - passed
                ));
            }
            Ok(())
        }
    }
}

fn select(ctx: &Ctx, a: SelectArgs) -> anyhow::Result<()> {
    let sets: Vec<HeadlineSet> = read_records(&a.sets)?;
    let profiles: Vec<UserProfile> = read_records(&a.profiles)?;
    let (provider, _) = provider(a.embeddings.as_deref())?;
    let mut out = Vec::with_capacity(sets.len() * profiles.len());
    for profile in &profiles {
        for set in &sets {
            out.push(select_for_profile(set, profile, provider.as_ref())?);
        }
    }
    ctx.emit(&out)
}
