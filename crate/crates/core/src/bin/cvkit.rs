use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cvkit::pipeline::checkpoint::read_model;
use cvkit::pipeline::dataset::read_dataset;
use cvkit::pipeline::embed::{cmd_embed, EmbedOptions, EmbedSource};
use cvkit::pipeline::evaluate::{cmd_evaluate, EvaluateOptions};
use cvkit::pipeline::generate::{cmd_generate, GenerateOptions};
use cvkit::pipeline::sweep::{cmd_loss_sweep, LossSweepOptions};
use cvkit::pipeline::train::{cmd_train, train_config_from, TrainArtifacts};
use cvkit::pipeline::{worker_pool, KvConfig};
use cvkit::Result;

#[derive(Parser)]
#[command(name = "cvkit", version, about = "Entanglement detection from homodyne correlation patterns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// key=value settings file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> Result<KvConfig> {
        KvConfig::load_optional(self.config.as_deref())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled dataset file
    Generate(#[command(flatten)] Common),
    /// Train the classifier on a dataset
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Accuracy versus sample count on unseen states
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Witness and network scores of the photon-subtracted state under loss
    LossSweep {
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// t-SNE embedding of patterns or hidden features
    Embed {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "features")]
        which: EmbedSource,
        #[command(flatten)]
        common: Common,
    },
}

fn fmt3(v: [f64; 3]) -> String {
    format!("ppt {:.4}  qfi1 {:.4}  qfi2 {:.4}", v[0], v[1], v[2])
}

fn load_model(path: Option<&Path>) -> Result<Option<cvkit::mlp::MlpModel>> {
    path.map(read_model).transpose()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(c) => {
            let opts = GenerateOptions::from_config(&c.config()?, c.seed)?;
            let s = cmd_generate(&opts, &c.out)?;
            println!("wrote {} states to {}", s.count, c.out.display());
            println!("positive fraction  {}", fmt3(s.balance));
        }
        Command::Train { dataset, common: c } => {
            let config = train_config_from(&c.config()?, c.seed)?;
            let outcome = cmd_train(&dataset, &config, &c.out)?;
            let files = TrainArtifacts::for_output(&c.out);
            let best = &outcome.history[outcome.best_epoch - 1];
            println!("best epoch {} val loss {:.5}", outcome.best_epoch, best.val_loss);
            println!("val accuracy  {}", fmt3(best.val_accuracy));
            println!(
                "wrote {}, {}, {}",
                files.best.display(),
                files.last.display(),
                files.history.display()
            );
        }
        Command::Evaluate { model, common: c } => {
            let opts = EvaluateOptions::from_config(&c.config()?, c.seed)?;
            let model = read_model(&model)?;
            let report = cmd_evaluate(&model, &opts, &c.out)?;
            println!("exact patterns  {}", fmt3(report.theory_accuracy));
            for row in &report.rows {
                print!("N={:<7} nn  {}", row.n, fmt3(row.nn));
                if let (Some(m), Some(f)) = (row.maxlik, row.maxlik_fidelity) {
                    print!("  | maxlik  {}  fidelity {:.4}", fmt3(m), f);
                }
                println!();
            }
        }
        Command::LossSweep { model, common: c } => {
            let opts = LossSweepOptions::from_config(&c.config()?, c.seed)?;
            let model = load_model(model.as_deref())?;
            let rows = cmd_loss_sweep(model.as_ref(), &opts, &c.out)?;
            println!("wrote {} rows to {}", rows.len(), c.out.display());
        }
        Command::Embed {
            dataset,
            model,
            which,
            common: c,
        } => {
            let opts = EmbedOptions::from_config(&c.config()?, c.seed)?;
            let model = load_model(model.as_deref())?;
            let records = read_dataset(&dataset)?;
            let outcome = cmd_embed(&records, which, model.as_ref(), &opts, &c.out)?;
            println!(
                "{which}: KL {:.4} -> {:.4}",
                outcome.embedding.initial_kl, outcome.embedding.final_kl
            );
            if let Some(s) = outcome.silhouette {
                println!("silhouette (E_PPT) {s:.4}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = worker_pool().and_then(|pool| pool.install(|| run(cli)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
