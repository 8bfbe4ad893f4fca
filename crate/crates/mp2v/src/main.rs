use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mp2v::pipeline::{self, MetadataSource, Method, Mode, Phases, RunConfig};
use mp2v::{io, Error, Result};
use mp2v_core::cooc::CoSimilarity;

/// Prod2Vec / Meta-Prod2Vec item embeddings for next-item recommendation.
#[derive(Debug, Parser)]
#[command(name = "mp2v", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit embeddings on the tuning and/or final training split.
    Train(RunArgs),
    /// Evaluate every configured method and write reports.
    Eval(RunArgs),
    /// Pair-kind ablation of Meta-Prod2Vec against BestOf.
    Ablate(RunArgs),
    /// Print the nearest items of a token as TSV.
    Nn {
        /// Embedding file written by `train`.
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
}

/// Flags override values from `--config`, which override defaults.
#[derive(Debug, Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Session TSV: `user<TAB>item item ...`.
    #[arg(long)]
    sessions: Option<PathBuf>,
    /// Item attribute TSV, repeatable.
    #[arg(long, value_name = "NAME=PATH")]
    metadata: Vec<MetadataSource>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum)]
    phases: Option<Phases>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    min_count: Option<u64>,
    /// Weight of every side-information pair kind.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda_im: Option<f64>,
    #[arg(long)]
    lambda_jm: Option<f64>,
    #[arg(long)]
    lambda_mi: Option<f64>,
    #[arg(long)]
    lambda_mm: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', value_enum)]
    methods: Option<Vec<Method>>,
    /// `pair-cosine` or `row-cosine`.
    #[arg(long, value_parser = parse_similarity)]
    cocount_similarity: Option<CoSimilarity>,
    #[arg(long)]
    bootstrap_samples: Option<usize>,
    #[arg(long)]
    pool: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_similarity(s: &str) -> std::result::Result<CoSimilarity, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig> {
        let mut c: RunConfig = match &self.config {
            Some(path) => io::read_json(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.sessions {
            c.sessions = v;
        }
        if !self.metadata.is_empty() {
            c.metadata = self.metadata;
        }
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set! {
            mode => c.mode,
            phases => c.phases,
            out => c.out,
            dim => c.params.dim,
            window => c.params.window,
            negatives => c.params.negatives,
            learning_rate => c.params.learning_rate,
            min_count => c.params.min_count,
            alpha_grid => c.alpha_grid,
            k_list => c.eval.k_list,
            methods => c.methods,
            cocount_similarity => c.cocount_similarity,
            bootstrap_samples => c.eval.bootstrap_samples,
            pool => c.pool,
            threads => c.params.threads,
        }
        if let Some(e) = self.epochs {
            c.epochs = Some(e);
        }
        if let Some(l) = self.lambda {
            c.params.lambda = mp2v_core::Lambdas::uniform(l);
        }
        set! {
            lambda_im => c.params.lambda.im,
            lambda_jm => c.params.lambda.jm,
            lambda_mi => c.params.lambda.mi,
            lambda_mm => c.params.lambda.mm,
        }
        if let Some(s) = self.seed {
            c.params.seed = s;
            c.eval.seed = s;
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            for path in pipeline::cmd_train(&args.resolve()?)? {
                println!("{}", path.display());
            }
        }
        Command::Eval(args) => {
            let config = args.resolve()?;
            let outcome = pipeline::cmd_eval(&config)?;
            print!("{}", pipeline::comparison_table(&outcome, &config.eval.k_list));
        }
        Command::Ablate(args) => {
            let config = args.resolve()?;
            let rows = pipeline::cmd_ablate(&config)?;
            print!("{}", pipeline::ablation_table(&rows, config.eval.max_k()));
        }
        Command::Nn { embeddings, query, k } => {
            let neighbours = pipeline::cmd_nn(&embeddings, &query, k)?;
            print!("{}", pipeline::nn_tsv(&query, &neighbours));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::MissingArtifacts { .. } = e {
                return ExitCode::from(3);
            }
            ExitCode::FAILURE
        }
    }
}
