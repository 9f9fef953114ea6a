//! `sdq`: ingest venue exports, embed, train and evaluate quality models,
//! rank papers and run the corpus analyses.

mod commands;
mod config;
mod provider;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ProviderKind, RunConfig, SplitChoice};

#[derive(Parser)]
#[command(name = "sdq", version, about = "Scholarly document quality prediction")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Flags take precedence over the config file.
#[derive(Args, Debug, Default)]
pub struct GlobalArgs {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run with this single seed instead of the configured list
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for data-parallel stages
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    provider: Option<ProviderKind>,
    /// Embedding server base URL
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Bypass the embedding cache
    #[arg(long, global = true)]
    no_cache: bool,
    /// Never contact the embedding server; serve from the cache only
    #[arg(long, global = true)]
    no_network: bool,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Corpus JSONL file
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Harmonize a raw venue export into a corpus file
    Ingest {
        /// Directory of *.jsonl submission files
        #[arg(long)]
        export: PathBuf,
        /// Venue mapping TOML
        #[arg(long)]
        mapping: PathBuf,
        /// Corpus output path [default: the configured corpus, else OUT/corpus.jsonl]
        #[arg(long)]
        output: Option<PathBuf>,
        /// Skip malformed records instead of failing
        #[arg(long)]
        skip_bad: bool,
        /// Fill citation counts from the scholarly metadata API
        #[arg(long)]
        citations: bool,
    },
    /// Generate a planted corpus whose targets follow its embeddings
    Synth {
        #[arg(long, default_value_t = 600)]
        papers: usize,
        #[arg(long, default_value_t = 3)]
        topics: usize,
        #[arg(long, default_value_t = 3)]
        reviews: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        /// Corpus output path [default: the configured corpus, else OUT/corpus.jsonl]
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Embed representation and context texts, filling the cache
    Embed,
    /// Train one model per seed and summarize
    Train {
        /// Search the learning-rate and dropout grid
        #[arg(long)]
        grid: bool,
    },
    /// Score a checkpoint on a split of the corpus
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum)]
        split: Option<SplitChoice>,
    },
    /// Rank the papers in a folder with a checkpoint
    Rank {
        /// Folder of *.txt (title and abstract) or *.json (paper record) files
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Swiss rounds instead of a full round robin
        #[arg(long)]
        swiss: bool,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Review-dimension, citation-versus-review and human-consistency analyses
    Analyze,
    /// Train the section classifier on papers with headed sections
    Sections {
        /// JSONL of {id, sections: [{heading, body}]}
        #[arg(long)]
        papers: Option<PathBuf>,
        /// Heading synonym TOML
        #[arg(long)]
        synonyms: Option<PathBuf>,
    },
    /// Fit LDA topics and label every paper
    Topics {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Also train one score model per frequent topic
        #[arg(long)]
        per_topic: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Synth { .. } => "synth",
            Command::Embed => "embed",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Rank { .. } => "rank",
            Command::Analyze => "analyze",
            Command::Sections { .. } => "sections",
            Command::Topics { .. } => "topics",
        }
    }
}

fn resolve_config(g: &GlobalArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seeds = vec![s];
    }
    if g.threads.is_some() {
        cfg.threads = g.threads;
    }
    if let Some(k) = g.provider {
        cfg.provider.kind = k;
    }
    if let Some(e) = &g.endpoint {
        cfg.provider.endpoint = Some(e.clone());
    }
    cfg.provider.no_cache |= g.no_cache;
    cfg.provider.no_network |= g.no_network;
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    if let Some(c) = &g.corpus {
        cfg.corpus = Some(c.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = resolve_config(&cli.global).map_err(|e| e.context("stage config"))?;
    if let Some(n) = cfg.threads {
        sdq_core::util::configure_threads(n);
    }
    match cli.command {
        Command::Ingest {
            export,
            mapping,
            output,
            skip_bad,
            citations,
        } => commands::ingest::run(&cfg, &export, &mapping, output, skip_bad, citations),
        Command::Synth {
            papers,
            topics,
            reviews,
            noise,
            output,
        } => commands::synth::run(&cfg, papers, topics, reviews, noise, output),
        Command::Embed => commands::embed::run(&cfg),
        Command::Train { grid } => {
            cfg.grid |= grid;
            commands::train::run(&cfg)
        }
        Command::Evaluate { checkpoint, split } => {
            if checkpoint.is_some() {
                cfg.evaluate.checkpoint = checkpoint;
            }
            if let Some(s) = split {
                cfg.evaluate.split = s;
            }
            commands::evaluate::run(&cfg)
        }
        Command::Rank {
            input,
            checkpoint,
            swiss,
            rounds,
        } => {
            if input.is_some() {
                cfg.rank.input = input;
            }
            if checkpoint.is_some() {
                cfg.rank.checkpoint = checkpoint;
            }
            cfg.rank.swiss |= swiss;
            if let Some(r) = rounds {
                cfg.rank.rounds = r;
            }
            commands::rank::run(&cfg)
        }
        Command::Analyze => commands::analyze::run(&cfg),
        Command::Sections { papers, synonyms } => {
            if papers.is_some() {
                cfg.sections.papers = papers;
            }
            if synonyms.is_some() {
                cfg.sections.synonyms = synonyms;
            }
            commands::sections::run(&cfg)
        }
        Command::Topics {
            k,
            iterations,
            per_topic,
        } => {
            if let Some(k) = k {
                cfg.topics.k = k;
            }
            if let Some(i) = iterations {
                cfg.topics.iterations = i;
            }
            cfg.topics.per_topic |= per_topic;
            commands::topics::run(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let start = std::time::Instant::now();
    match run(cli) {
        Ok(()) => {
            eprintln!("sdq {name}: done in {:.1?}", start.elapsed());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sdq {name}: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
