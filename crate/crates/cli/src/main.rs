use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coordlm::pipeline::{
    cmd_analyze, cmd_corpus_stats, cmd_eval, cmd_gen_stimuli, cmd_run, cmd_synth, cmd_train, cmd_transform,
    parse_override, PipelineError, RunConfig,
};

#[derive(Parser, Debug)]
#[command(name = "coordlm", version, about = "Train small LMs and measure coordination agreement by surprisal")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory to create; must not exist.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override any config key, e.g. `--set model.dim=32`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the configured model and write a checkpoint.
    Train,
    /// Write the configured stimulus suites as CSV.
    GenStimuli,
    /// Score stimuli with a checkpoint and write per-token surprisals.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        stimuli: PathBuf,
    },
    /// Summaries, plot data and behavior labels from a surprisal CSV.
    Analyze {
        #[arg(long)]
        surprisals: PathBuf,
    },
    /// Count coordination agreement patterns in a tagged treebank.
    CorpusStats {
        #[arg(long)]
        treebank: PathBuf,
    },
    /// Relabel NP coordinations with explicit conjunct nodes.
    Transform {
        #[arg(long)]
        treebank: PathBuf,
    },
    /// Generate a corpus from the built-in synthetic grammar.
    Synth,
    /// train, gen-stimuli, eval and analyze in one run directory.
    Run,
}

fn load_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let mut overrides = cli
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(w) = cli.workers {
        overrides.push(("workers".into(), w.to_string()));
    }
    let mut cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, PipelineError> {
    cfg.out
        .as_deref()
        .ok_or_else(|| PipelineError::Config("an output directory is required (--out or `out` in the config)".into()))
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, PipelineError> {
    let cfg = load_config(cli)?;
    let out = out_dir(&cfg)?;
    Ok(match &cli.command {
        Command::Train => vec![cmd_train(&cfg, out)?],
        Command::GenStimuli => vec![cmd_gen_stimuli(&cfg, out)?],
        Command::Eval { checkpoint, stimuli } => vec![cmd_eval(&cfg, checkpoint, stimuli, out)?],
        Command::Analyze { surprisals } => vec![cmd_analyze(&cfg, surprisals, out)?],
        Command::CorpusStats { treebank } => cmd_corpus_stats(&cfg, treebank, out)?,
        Command::Transform { treebank } => vec![cmd_transform(&cfg, treebank, out)?],
        Command::Synth => vec![cmd_synth(&cfg, out)?],
        Command::Run => {
            let r = cmd_run(&cfg, out)?;
            vec![r.checkpoint, r.stimuli, r.surprisals, r.summary]
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = match &e {
                PipelineError::Config(_) => "config",
                PipelineError::MissingInput { .. } => "missing-input",
                PipelineError::OutputExists(_) => "output-exists",
                PipelineError::File { .. } => "file",
                PipelineError::Failed(_) => "failed",
            };
            eprintln!("error[{kind}]: {e}");
            ExitCode::from(match e {
                PipelineError::Config(_) => 2,
                _ => 1,
            })
        }
    }
}
