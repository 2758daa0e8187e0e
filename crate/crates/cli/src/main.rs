mod commands;
mod config;
mod layout;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use sponsorscope_core::agreement::SponsoredRate;
use sponsorscope_core::service::{Expertise, Setup};
use tracing_subscriber::EnvFilter;

use commands::{Ctx, ReportInputs};
use config::Config;
use layout::Layout;

/// Sponsored-content annotation pipeline: corpus preparation, detector
/// training, explanations, the annotation service and agreement reports.
#[derive(Debug, Parser)]
#[command(name = "sponsorscope", version)]
struct Cli {
    /// Seed for every random choice (sampling, splits, item order).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding all pipeline artefacts.
    #[arg(long, global = true, default_value = "data", env = "SPONSORSCOPE_DATA_DIR")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SetupArg {
    With,
    Without,
}

impl From<SetupArg> for Setup {
    fn from(s: SetupArg) -> Self {
        match s {
            SetupArg::With => Setup::WithExplanations,
            SetupArg::Without => Setup::WithoutExplanations,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExpertiseArg {
    None,
    Some,
    Legal,
}

impl From<ExpertiseArg> for Expertise {
    fn from(e: ExpertiseArg) -> Self {
        match e {
            ExpertiseArg::None => Expertise::NoExperience,
            ExpertiseArg::Some => Expertise::SomeExperience,
            ExpertiseArg::Legal => Expertise::LegalExpert,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RateArg {
    PerAnnotator,
    Pooled,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read JSONL post files into the corpus.
    Ingest {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Label posts by their disclosure hashtags and strip the hashtags.
    WeakLabel,
    /// Balance the classes and split by publication year.
    Split {
        #[arg(long, default_value_t = 2022)]
        cutoff_year: i32,
        /// Keep every negative instead of undersampling to 1:2.
        #[arg(long)]
        no_undersample: bool,
    },
    /// Fit the TF-IDF logistic-regression detector on the training split.
    Train {
        #[arg(long, default_value = "logreg-tfidf")]
        model_id: String,
    },
    /// Predict with the trained detector (test split unless --input is given).
    Predict {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate explanations through the chat endpoint, falling back to the
    /// local model. The API key is read from SPONSORSCOPE_API_KEY.
    Explain {
        #[arg(long)]
        batch: Option<String>,
        /// File with one post id per line.
        #[arg(long)]
        ids: Option<PathBuf>,
        /// Skip the remote endpoint entirely.
        #[arg(long)]
        local_only: bool,
    },
    /// Sample an annotation batch; it is registered with the service once
    /// every post has an explanation.
    Batch {
        #[arg(long, default_value_t = 200)]
        size: usize,
        #[arg(long, default_value_t = 0.15)]
        disclosed_share: f64,
        /// Register even if some posts lack explanations; such a batch only
        /// supports the without-explanations setup.
        #[arg(long)]
        allow_unexplained: bool,
    },
    /// Run the annotation HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Write a batch's labels, manifest and disclosed ids.
    Export {
        #[arg(long)]
        batch: String,
        #[arg(long, value_enum)]
        setup: Option<SetupArg>,
        #[arg(long, value_enum)]
        expertise: Option<ExpertiseArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute agreement reports from exported files.
    Report {
        /// Read the export of this batch from the data directory.
        #[arg(long)]
        batch: Option<String>,
        /// Read an export directory.
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        disclosed: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        model_id: Option<String>,
        #[arg(long, value_enum, default_value_t = RateArg::PerAnnotator)]
        rate: RateArg,
        /// Where report.json and report.txt go (defaults to the export directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let ctx = Ctx {
        layout: Layout::new(&cli.data_dir),
        config: Config::load(cli.config.as_deref())?,
        seed: cli.seed,
    };
    std::fs::create_dir_all(ctx.layout.root())?;
    match cli.command {
        Command::Ingest { inputs } => commands::ingest(&ctx, &inputs),
        Command::WeakLabel => commands::weak_label_cmd(&ctx),
        Command::Split {
            cutoff_year,
            no_undersample,
        } => commands::split(&ctx, cutoff_year, !no_undersample),
        Command::Train { model_id } => commands::train(&ctx, &model_id),
        Command::Predict { input, output } => commands::predict(&ctx, input.as_deref(), output.as_deref()),
        Command::Explain { batch, ids, local_only } => {
            commands::explain(&ctx, batch.as_deref(), ids.as_deref(), local_only).await
        }
        Command::Batch {
            size,
            disclosed_share,
            allow_unexplained,
        } => commands::batch(&ctx, size, disclosed_share, allow_unexplained),
        Command::Serve { addr } => commands::serve(&ctx, &addr).await,
        Command::Export {
            batch,
            setup,
            expertise,
            out,
        } => commands::export(
            &ctx,
            &batch,
            setup.map(Into::into),
            expertise.map(Into::into),
            out.as_deref(),
        ),
        Command::Report {
            batch,
            dir,
            labels,
            disclosed,
            manifest,
            predictions,
            model_id,
            rate,
            out,
        } => commands::report(
            &ctx,
            ReportInputs {
                dir,
                batch,
                labels,
                disclosed,
                manifest,
                predictions,
                model_id,
                rate: match rate {
                    RateArg::PerAnnotator => SponsoredRate::PerAnnotatorMean,
                    RateArg::Pooled => SponsoredRate::Pooled,
                },
                out,
            },
        ),
    }
}
