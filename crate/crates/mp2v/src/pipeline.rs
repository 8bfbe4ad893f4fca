//! The experiment pipeline behind the `train`, `eval`, `ablate` and `nn`
//! commands.
//!
//! Layout of an output directory:
//!
//! | file | written by |
//! |------|------------|
//! | `{mode}.{phase}.vec` | `train`: input vectors of every vocabulary token |
//! | `{mode}.{phase}.log.jsonl` | `train`: mean loss per pair kind and epoch |
//! | `report.{method}.json` | `eval`: one report per method |
//! | `comparison.tsv`, `alpha.tsv` | `eval` |
//! | `ablation.tsv` | `ablate` |
//! | `{command}.config.json` | every command: the resolved configuration |

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use mp2v_core::cooc::{CoCountMatrix, CoSimilarity};
use mp2v_core::corpus::{
    build_vocabulary, split_sessions, token_kind, EncodedSession, MetadataMap, Phase, Session, SplitCorpus, TokenKind,
    Vocabulary,
};
use mp2v_core::metrics::{self, aggregate, score_case, EvalCase, EvalConfig, EvalReport, LiftRow};
use mp2v_core::model::EmbeddingModel;
use mp2v_core::pairgen::{KindSet, PairKind};
use mp2v_core::scorer::{BestOf, CoCounts, EmbeddingScorer, Mix, Scorer};
use mp2v_core::train::{HyperParams, KindLoss};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{hogwild, io};

/// Which model to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Prod2vec,
    Metaprod2vec,
}

impl Mode {
    pub fn kinds(self) -> KindSet {
        match self {
            Mode::Prod2vec => KindSet::PROD2VEC,
            Mode::Metaprod2vec => KindSet::ALL,
        }
    }

    /// 30 epochs for Prod2Vec, 10 for Meta-Prod2Vec.
    pub fn default_epochs(self) -> usize {
        match self {
            Mode::Prod2vec => 30,
            Mode::Metaprod2vec => 10,
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Mode::Prod2vec => "prod2vec",
            Mode::Metaprod2vec => "metaprod2vec",
        }
    }
}

/// Which split(s) `train` fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Phases {
    Tuning,
    Final,
    Both,
}

impl Phases {
    fn list(self) -> Vec<Phase> {
        match self {
            Phases::Tuning => vec![Phase::Tuning],
            Phases::Final => vec![Phase::Final],
            Phases::Both => vec![Phase::Tuning, Phase::Final],
        }
    }
}

fn phase_slug(phase: Phase) -> &'static str {
    match phase {
        Phase::Tuning => "tuning",
        Phase::Final => "final",
    }
}

/// Compared methods, in presentation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    BestOf,
    CoCounts,
    Prod2vec,
    Metaprod2vec,
    MixProd2vec,
    MixMetaprod2vec,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::BestOf,
        Method::CoCounts,
        Method::Prod2vec,
        Method::Metaprod2vec,
        Method::MixProd2vec,
        Method::MixMetaprod2vec,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            Method::BestOf => "BestOf",
            Method::CoCounts => "CoCounts",
            Method::Prod2vec => "Prod2Vec",
            Method::Metaprod2vec => "Meta-Prod2Vec",
            Method::MixProd2vec => "Mix(Prod2Vec,CoCounts)",
            Method::MixMetaprod2vec => "Mix(Meta-Prod2Vec,CoCounts)",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Method::BestOf => "bestof",
            Method::CoCounts => "cocounts",
            Method::Prod2vec => "prod2vec",
            Method::Metaprod2vec => "metaprod2vec",
            Method::MixProd2vec => "mix-prod2vec",
            Method::MixMetaprod2vec => "mix-metaprod2vec",
        }
    }

    /// Embedding model this method reads, if any.
    pub fn embedding(self) -> Option<Mode> {
        match self {
            Method::Prod2vec | Method::MixProd2vec => Some(Mode::Prod2vec),
            Method::Metaprod2vec | Method::MixMetaprod2vec => Some(Mode::Metaprod2vec),
            _ => None,
        }
    }

    pub fn is_mix(self) -> bool {
        matches!(self, Method::MixProd2vec | Method::MixMetaprod2vec)
    }
}

/// A metadata attribute and the TSV file holding it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataSource {
    pub name: String,
    pub path: PathBuf,
}

impl std::str::FromStr for MetadataSource {
    type Err = String;

    /// `NAME=PATH`
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (name, path) = s
            .split_once('=')
            .ok_or_else(|| format!("expected NAME=PATH, got `{s}`"))?;
        if name.is_empty() || path.is_empty() {
            return Err(format!("expected NAME=PATH, got `{s}`"));
        }
        Ok(MetadataSource {
            name: name.to_string(),
            path: PathBuf::from(path),
        })
    }
}

/// Everything a run needs; written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub sessions: PathBuf,
    pub metadata: Vec<MetadataSource>,
    pub out: PathBuf,
    pub mode: Mode,
    pub phases: Phases,
    /// Overrides the mode's default epoch count.
    pub epochs: Option<usize>,
    pub params: HyperParams,
    pub eval: EvalConfig,
    pub alpha_grid: Vec<f64>,
    /// Candidates taken from each component of a blend.
    pub pool: usize,
    pub methods: Vec<Method>,
    pub cocount_similarity: CoSimilarity,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sessions: PathBuf::new(),
            metadata: Vec::new(),
            out: PathBuf::from("out"),
            mode: Mode::Metaprod2vec,
            phases: Phases::Both,
            epochs: None,
            params: HyperParams::default(),
            eval: EvalConfig::default(),
            alpha_grid: (0..=20).map(|i| i as f64 / 20.0).collect(),
            pool: 500,
            methods: Method::ALL.to_vec(),
            cocount_similarity: CoSimilarity::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.eval.validate()?;
        if self.sessions.as_os_str().is_empty() {
            return Err(Error::Config("no sessions file given".into()));
        }
        if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Config("alpha grid must be non-empty within [0, 1]".into()));
        }
        if self.pool == 0 {
            return Err(Error::Config("candidate pool must be >= 1".into()));
        }
        if self.epochs == Some(0) {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        Ok(())
    }

    /// Hyperparameters for `mode`, with the epoch count resolved.
    pub fn params_for(&self, mode: Mode) -> HyperParams {
        HyperParams {
            epochs: self.epochs.unwrap_or(mode.default_epochs()),
            ..self.params.clone()
        }
    }

    pub fn embedding_path(&self, mode: Mode, phase: Phase) -> PathBuf {
        self.out.join(format!("{}.{}.vec", mode.slug(), phase_slug(phase)))
    }

    pub fn load_sessions(&self) -> Result<Vec<Session>> {
        io::load_sessions(&self.sessions)
    }

    pub fn load_metadata(&self) -> Result<Vec<MetadataMap>> {
        self.metadata
            .iter()
            .map(|m| io::load_metadata(&m.name, &m.path))
            .collect()
    }

    fn write(&self, command: &str) -> Result<()> {
        io::write_json(&self.out.join(format!("{command}.config.json")), self)
    }

    /// Copy with the epoch count of `mode` made explicit.
    fn resolved(&self, mode: Mode) -> RunConfig {
        let params = self.params_for(mode);
        RunConfig {
            epochs: Some(params.epochs),
            params,
            ..self.clone()
        }
    }

    fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.params.threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub pairs: u64,
    pub mean_loss: std::collections::BTreeMap<String, f64>,
}

impl EpochLog {
    fn new(epoch: usize, stats: &KindLoss) -> Self {
        EpochLog {
            epoch: epoch + 1,
            pairs: stats.total_pairs(),
            mean_loss: PairKind::ALL
                .iter()
                .filter_map(|&k| stats.mean(k).map(|m| (k.as_str().to_string(), m)))
                .collect(),
        }
    }
}

/// A trained model with its vocabulary.
#[derive(Debug, Clone)]
pub struct Trained {
    pub vocab: Vocabulary,
    pub model: EmbeddingModel<f32>,
    pub log: Vec<EpochLog>,
}

/// Fits embeddings on the training prefixes of `split`.
///
/// Metadata enters the vocabulary (and therefore the negative-sampling
/// distribution) only if some side-information kind is active; with every
/// side λ at zero the run is exactly a Prod2Vec run.
pub fn train_split(
    split: &SplitCorpus,
    metadata: &[MetadataMap],
    params: &HyperParams,
    kinds: KindSet,
) -> Result<Trained> {
    let active = params.active_kinds(kinds);
    let metadata = if active.uses_metadata() { metadata } else { &[] };
    let train = split.train_sessions();
    let vocab = build_vocabulary(&train, metadata, params.min_count)?;
    let encoded: Vec<EncodedSession> = train.iter().map(|s| vocab.encode(&s.items)).collect();
    let mut log = Vec::new();
    let model = hogwild::train(params, kinds, &encoded, vocab.frequencies(), |epoch, stats| {
        let entry = EpochLog::new(epoch, stats);
        info!("epoch {} pairs {} loss {:?}", entry.epoch, entry.pairs, entry.mean_loss);
        log.push(entry);
    })?;
    Ok(Trained { vocab, model, log })
}

/// Item-only view of a split used by every scorer.
#[derive(Debug, Clone)]
pub struct EvalData {
    pub split: SplitCorpus,
    pub vocab: Vocabulary,
    pub cooc: CoCountMatrix,
    pub cases: Vec<EvalCase>,
    pub skipped: usize,
}

impl EvalData {
    pub fn new(sessions: &[Session], phase: Phase, min_count: u64, window: usize) -> Result<Self> {
        let split = split_sessions(sessions, phase);
        let train = split.train_sessions();
        let vocab = build_vocabulary(&train, &[], min_count)?;
        let encoded: Vec<EncodedSession> = train.iter().map(|s| vocab.encode(&s.items)).collect();
        let cooc = CoCountMatrix::build(&encoded, vocab.n_items(), window);
        let (cases, skipped) = metrics::eval_cases(&split, &vocab, &cooc);
        info!(
            "{} split: {} users evaluated, {} skipped, {} short sessions excluded",
            phase_slug(phase),
            cases.len(),
            skipped,
            split.excluded
        );
        Ok(EvalData {
            split,
            vocab,
            cooc,
            cases,
            skipped,
        })
    }

    pub fn best_of(&self) -> BestOf {
        let freq: Vec<u64> = (0..self.vocab.n_items()).map(|i| self.vocab.frequency(i)).collect();
        BestOf::new(&freq, self.vocab.len())
    }

    pub fn cocounts(&self, mode: CoSimilarity) -> CoCounts<'_> {
        CoCounts::new(&self.cooc, mode, self.vocab.len())
    }

    /// Embedding scorer over this vocabulary's items, looking vectors up by
    /// token; items missing from the embedding get a zero vector.
    pub fn embedding_scorer(&self, name: &str, tokens: &[String], model: &EmbeddingModel<f32>) -> EmbeddingScorer {
        let dim = model.dim();
        let by_token: std::collections::HashMap<&str, usize> =
            tokens.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let mut aligned = EmbeddingModel::<f32>::zeros(self.vocab.len(), dim);
        for (i, token) in self.vocab.tokens().iter().enumerate() {
            if let Some(&row) = by_token.get(token.as_str()) {
                aligned.input_row_mut(i).copy_from_slice(model.input_row(row));
            }
        }
        EmbeddingScorer::new(name, &aligned, self.vocab.n_items())
    }

    /// Parallel evaluation; identical to the sequential result.
    pub fn evaluate(&self, scorer: &dyn Scorer, config: &EvalConfig) -> Result<EvalReport> {
        config.validate()?;
        let max_k = config.max_k();
        let outcomes = self
            .cases
            .par_iter()
            .map(|c| score_case(scorer, c, max_k))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(aggregate(scorer.name(), &outcomes, self.skipped, config)?)
    }
}

/// Validation performance of one blending factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaScore {
    pub alpha: f64,
    pub hr: f64,
    pub ndcg: f64,
}

/// Scores every α of `grid` at cutoff `k`, blending within the union of each
/// component's top `pool` (as [`Mix`] does), and returns the best α (highest
/// HR, then NDCG, then earliest in the grid) with the full table.
pub fn tune_alpha(
    embedding: &dyn Scorer,
    cocounts: &dyn Scorer,
    cases: &[EvalCase],
    grid: &[f64],
    k: usize,
    pool: usize,
) -> Result<(f64, Vec<AlphaScore>)> {
    // per case: 1-based rank of the target for every α, or None
    let ranks: Vec<Vec<Option<usize>>> = cases
        .par_iter()
        .map(|case| -> Result<Vec<Option<usize>>> {
            let mut cands: Vec<u32> = embedding
                .top_k(case.query, pool)?
                .into_iter()
                .chain(cocounts.top_k(case.query, pool)?)
                .map(|(c, _)| c)
                .collect();
            cands.sort_unstable();
            cands.dedup();
            let Some(target) = case.target.filter(|t| cands.binary_search(&(*t as u32)).is_ok()) else {
                return Ok(vec![None; grid.len()]);
            };
            let parts: Vec<(u32, f64, f64)> = cands
                .iter()
                .map(|&c| {
                    (
                        c,
                        embedding.score(case.query, c as usize),
                        cocounts.score(case.query, c as usize),
                    )
                })
                .collect();
            let (_, ta, tb) = parts[parts
                .iter()
                .position(|p| p.0 as usize == target)
                .expect("target in pool")];
            Ok(grid
                .iter()
                .map(|&alpha| {
                    let blend = |a: f64, b: f64| alpha * a + (1.0 - alpha) * b;
                    let t = blend(ta, tb);
                    let ahead = parts
                        .iter()
                        .filter(|&&(c, a, b)| {
                            let s = blend(a, b);
                            s > t || (s == t && (c as usize) < target)
                        })
                        .count();
                    Some(ahead + 1)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let n = cases.len().max(1) as f64;
    let table: Vec<AlphaScore> = grid
        .iter()
        .enumerate()
        .map(|(g, &alpha)| {
            let hr = ranks.iter().map(|r| metrics::hr_from_rank(r[g], k)).sum::<f64>() / n;
            let ndcg = ranks.iter().map(|r| metrics::ndcg_from_rank(r[g], k)).sum::<f64>() / n;
            AlphaScore { alpha, hr, ndcg }
        })
        .collect();
    let best = table
        .iter()
        .fold(None::<&AlphaScore>, |best, s| match best {
            Some(b) if (b.hr, b.ndcg) >= (s.hr, s.ndcg) => Some(b),
            _ => Some(s),
        })
        .expect("non-empty grid");
    Ok((best.alpha, table))
}

/// `train`: fits the configured mode on the requested phases.
pub fn cmd_train(config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    if config.mode == Mode::Metaprod2vec && config.metadata.is_empty() {
        return Err(Error::Config(
            "metaprod2vec mode needs at least one --metadata NAME=PATH".into(),
        ));
    }
    let sessions = config.load_sessions()?;
    let metadata = config.load_metadata()?;
    let params = config.params_for(config.mode);
    config
        .resolved(config.mode)
        .write(&format!("train.{}", config.mode.slug()))?;
    let mut written = Vec::new();
    for phase in config.phases.list() {
        info!("training {} on the {} split", config.mode.slug(), phase_slug(phase));
        let split = split_sessions(&sessions, phase);
        let trained = train_split(&split, &metadata, &params, config.mode.kinds())?;
        let path = config.embedding_path(config.mode, phase);
        io::save_embeddings(&trained.model, trained.vocab.tokens(), &path, io::Which::Input)?;
        let mut log = String::new();
        for entry in &trained.log {
            log.push_str(&serde_json::to_string(entry).expect("log entries serialize"));
            log.push('\n');
        }
        let log_path = config
            .out
            .join(format!("{}.{}.log.jsonl", config.mode.slug(), phase_slug(phase)));
        io::write_text(&log_path, &log)?;
        written.push(path);
    }
    Ok(written)
}

/// Result of `eval`.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub reports: Vec<(Method, EvalReport)>,
    /// Selected α per blended method.
    pub alphas: Vec<(Method, f64, Vec<AlphaScore>)>,
}

impl EvalOutcome {
    pub fn report(&self, method: Method) -> Option<&EvalReport> {
        self.reports.iter().find(|(m, _)| *m == method).map(|(_, r)| r)
    }
}

fn load_aligned(config: &RunConfig, data: &EvalData, mode: Mode, phase: Phase, name: &str) -> Result<EmbeddingScorer> {
    let (tokens, model) = io::load_embeddings(&config.embedding_path(mode, phase))?;
    Ok(data.embedding_scorer(name, &tokens, &model))
}

/// `eval`: reports every configured method on the test items, tuning blend
/// factors on the validation items.
pub fn cmd_eval(config: &RunConfig) -> Result<EvalOutcome> {
    config.validate()?;
    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();
    let tune = config.alpha_grid.len() > 1;
    let mut missing = Vec::new();
    for m in &methods {
        if let Some(mode) = m.embedding() {
            let mut phases = vec![Phase::Final];
            if m.is_mix() && tune {
                phases.push(Phase::Tuning);
            }
            for phase in phases {
                let path = config.embedding_path(mode, phase);
                if !path.exists() && !missing.contains(&path.display().to_string()) {
                    missing.push(path.display().to_string());
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts {
            command: "train".into(),
            missing,
        });
    }
    let sessions = config.load_sessions()?;
    config.write("eval")?;
    let pool = config.thread_pool()?;
    pool.install(|| eval_methods(config, &sessions, &methods, tune))
}

fn eval_methods(config: &RunConfig, sessions: &[Session], methods: &[Method], tune: bool) -> Result<EvalOutcome> {
    let min_count = config.params.min_count;
    let window = config.params.window;
    let max_k = config.eval.max_k();
    let final_data = EvalData::new(sessions, Phase::Final, min_count, window)?;
    let tuning_data = if tune && methods.iter().any(|m| m.is_mix()) {
        Some(EvalData::new(sessions, Phase::Tuning, min_count, window)?)
    } else {
        None
    };

    let mut alphas = Vec::new();
    for &m in methods.iter().filter(|m| m.is_mix()) {
        let mode = m.embedding().expect("mix methods embed");
        let (alpha, table) = match &tuning_data {
            Some(data) => {
                let emb = load_aligned(config, data, mode, Phase::Tuning, mode.slug())?;
                let co = data.cocounts(config.cocount_similarity);
                tune_alpha(&emb, &co, &data.cases, &config.alpha_grid, max_k, config.pool)?
            }
            None => (config.alpha_grid[0], Vec::new()),
        };
        info!("{}: alpha = {alpha}", m.display_name());
        alphas.push((m, alpha, table));
    }

    let best_of = final_data.best_of();
    let co = final_data.cocounts(config.cocount_similarity);
    let mut embeddings: Vec<(Mode, EmbeddingScorer)> = Vec::new();
    for mode in [Mode::Prod2vec, Mode::Metaprod2vec] {
        if methods.iter().any(|m| m.embedding() == Some(mode)) {
            let name = if mode == Mode::Prod2vec {
                "Prod2Vec"
            } else {
                "Meta-Prod2Vec"
            };
            embeddings.push((mode, load_aligned(config, &final_data, mode, Phase::Final, name)?));
        }
    }
    let embedding = |mode: Mode| &embeddings.iter().find(|(m, _)| *m == mode).expect("loaded").1;

    let mut reports = Vec::new();
    for &m in methods {
        let report = match m {
            Method::BestOf => final_data.evaluate(&best_of, &config.eval)?,
            Method::CoCounts => final_data.evaluate(&co, &config.eval)?,
            Method::Prod2vec | Method::Metaprod2vec => {
                final_data.evaluate(embedding(m.embedding().expect("embeds")), &config.eval)?
            }
            Method::MixProd2vec | Method::MixMetaprod2vec => {
                let alpha = alphas.iter().find(|(x, ..)| *x == m).expect("tuned").1;
                let emb = embedding(m.embedding().expect("embeds"));
                let mix = Mix::new(m.display_name(), alpha, emb, &co, config.pool)?;
                final_data.evaluate(&mix, &config.eval)?
            }
        };
        let report = EvalReport {
            method: m.display_name().to_string(),
            ..report
        };
        io::write_json(&config.out.join(format!("report.{}.json", m.slug())), &report)?;
        info!("{}: {:?}", m.display_name(), report.metrics);
        reports.push((m, report));
    }
    let outcome = EvalOutcome { reports, alphas };
    io::write_text(
        &config.out.join("comparison.tsv"),
        &comparison_table(&outcome, &config.eval.k_list),
    )?;
    io::write_text(&config.out.join("alpha.tsv"), &alpha_table(&outcome))?;
    Ok(outcome)
}

/// Methods as rows, `est lo hi` per metric as columns.
pub fn comparison_table(outcome: &EvalOutcome, k_list: &[usize]) -> String {
    let mut labels = Vec::new();
    for &k in k_list {
        labels.push(metrics::hr_label(k));
        labels.push(metrics::ndcg_label(k));
    }
    let mut out = String::from("method");
    for l in &labels {
        write!(out, "\t{l}\t{l} lo\t{l} hi").unwrap();
    }
    out.push_str("\talpha\n");
    for (m, r) in &outcome.reports {
        out.push_str(m.display_name());
        for l in &labels {
            let e = r.metrics[l];
            write!(out, "\t{:.6}\t{:.6}\t{:.6}", e.est, e.lo, e.hi).unwrap();
        }
        match outcome.alphas.iter().find(|(x, ..)| x == m) {
            Some((_, a, _)) => writeln!(out, "\t{a}").unwrap(),
            None => out.push_str("\t\n"),
        }
    }
    out
}

fn alpha_table(outcome: &EvalOutcome) -> String {
    let mut out = String::from("method\talpha\thr\tndcg\n");
    for (m, _, table) in &outcome.alphas {
        for s in table {
            writeln!(out, "{}\t{}\t{:.6}\t{:.6}", m.display_name(), s.alpha, s.hr, s.ndcg).unwrap();
        }
    }
    out
}

/// `ablate`: trains Meta-Prod2Vec with each side-information subset on the
/// final split and reports its share of the full model's lift over BestOf.
pub fn cmd_ablate(config: &RunConfig) -> Result<Vec<LiftRow>> {
    config.validate()?;
    if config.metadata.is_empty() {
        return Err(Error::Config("ablation needs at least one --metadata NAME=PATH".into()));
    }
    let sessions = config.load_sessions()?;
    let metadata = config.load_metadata()?;
    config.resolved(Mode::Metaprod2vec).write("ablate")?;
    let pool = config.thread_pool()?;
    let k = config.eval.max_k();
    let eval = EvalConfig {
        bootstrap_samples: 0,
        ..config.eval.clone()
    };
    let rows = pool.install(|| -> Result<Vec<LiftRow>> {
        let data = EvalData::new(&sessions, Phase::Final, config.params.min_count, config.params.window)?;
        let baseline = data.evaluate(&data.best_of(), &eval)?;
        let baseline = (baseline.hr(k).unwrap_or(0.0), baseline.ndcg(k).unwrap_or(0.0));
        let params = config.params_for(Mode::Metaprod2vec);
        let mut failure = None;
        let rows = metrics::ablation_run(baseline, |ablation| {
            info!("ablation: {}", ablation.label());
            let run = || -> Result<(f64, f64)> {
                let trained = train_split(&data.split, &metadata, &params, ablation.kinds())?;
                let scorer = data.embedding_scorer(ablation.label(), trained.vocab.tokens(), &trained.model);
                let r = data.evaluate(&scorer, &eval)?;
                Ok((r.hr(k).unwrap_or(0.0), r.ndcg(k).unwrap_or(0.0)))
            };
            run().map_err(|e| {
                let msg = e.to_string();
                failure = Some(e);
                mp2v_core::Error::InvalidParameter(msg)
            })
        });
        match (rows, failure) {
            (_, Some(e)) => Err(e),
            (rows, None) => Ok(rows?),
        }
    })?;
    io::write_text(&config.out.join("ablation.tsv"), &ablation_table(&rows, k))?;
    Ok(rows)
}

fn percent(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{:.1}%", 100.0 * v))
}

pub fn ablation_table(rows: &[LiftRow], k: usize) -> String {
    let mut out = format!("config\tHR@{k}\tNDCG@{k}\tHR@{k} lift\tNDCG@{k} lift\n");
    for r in rows {
        writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{}\t{}",
            r.config.label(),
            r.hr,
            r.ndcg,
            percent(r.hr_lift),
            percent(r.ndcg_lift)
        )
        .unwrap();
    }
    out
}

/// One row of `nn` output.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbour {
    pub rank: usize,
    pub item: String,
    pub score: f64,
}

/// `nn`: cosine neighbours of `query` among the item tokens of an embedding file.
pub fn cmd_nn(embeddings: &Path, query: &str, k: usize) -> Result<Vec<Neighbour>> {
    let (tokens, model) = io::load_embeddings(embeddings)?;
    // items first, metadata after, as scorers expect
    let mut order: Vec<usize> = (0..tokens.len()).collect();
    order.sort_by_key(|&i| token_kind(&tokens[i]) == TokenKind::Meta);
    let n_items = order
        .iter()
        .filter(|&&i| token_kind(&tokens[i]) == TokenKind::Item)
        .count();
    let mut sorted = EmbeddingModel::<f32>::zeros(tokens.len(), model.dim());
    for (dst, &src) in order.iter().enumerate() {
        sorted.input_row_mut(dst).copy_from_slice(model.input_row(src));
    }
    let q = order
        .iter()
        .position(|&i| tokens[i] == query)
        .ok_or_else(|| mp2v_core::Error::UnknownToken(query.to_string()))?;
    let scorer = EmbeddingScorer::new("nn", &sorted, n_items);
    Ok(scorer
        .top_k(q, k)?
        .into_iter()
        .enumerate()
        .map(|(r, (c, score))| Neighbour {
            rank: r + 1,
            item: tokens[order[c as usize]].clone(),
            score,
        })
        .collect())
}

/// `query<TAB>rank<TAB>item<TAB>score` lines.
pub fn nn_tsv(query: &str, neighbours: &[Neighbour]) -> String {
    neighbours
        .iter()
        .map(|n| format!("{query}\t{}\t{}\t{:.6}\n", n.rank, n.item, n.score))
        .collect()
}
