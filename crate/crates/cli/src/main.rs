use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qrmia_cli::config::{Method, Overrides, RunConfig};
use qrmia_cli::error::{CliError, CliResult};
use qrmia_cli::stages;

/// Membership-inference audit pipeline.
///
/// Stages run in order: gen, split, train-target, score, [tune], [shadow],
/// train-attack, evaluate, compare. Each writes its artifacts into the
/// workdir and records them in manifest.jsonl; re-running a stage whose
/// inputs are unchanged is a no-op.
#[derive(Parser)]
#[command(name = "qrmia", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Declarative run configuration (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Working directory for artifacts (falls back to $QRMIA_WORKDIR).
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,

    /// Master seed override; every stage seed derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Headline coverage level override.
    #[arg(long, global = true)]
    level: Option<f64>,

    /// Comma-separated FPR targets override, e.g. `0.01,0.001`.
    #[arg(long = "fpr-targets", global = true)]
    fpr_targets: Option<String>,

    /// Shadow model count override.
    #[arg(long = "n-shadows", global = true)]
    n_shadows: Option<usize>,

    /// Attack method override.
    #[arg(long, global = true, value_enum)]
    method: Option<Method>,

    /// Tuner trial budget override.
    #[arg(long, global = true)]
    budget: Option<usize>,

    /// Rebuild even when artifacts are cached or stale.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize the dataset CSV (synthetic benchmark or external file).
    Gen,
    /// Partition the dataset into private/public/holdout.
    Split,
    /// Train the target classifier on the private split.
    TrainTarget,
    /// Score every split with the target model.
    Score,
    /// Random-search attack hyperparameters with cross-validation.
    Tune,
    /// Train the shadow ensemble.
    Shadow,
    /// Fit and persist the configured attack.
    TrainAttack,
    /// Evaluate the attack on the held-out split and emit the report.
    Evaluate,
    /// Compare all emitted reports.
    Compare,
}

fn parse_fpr_targets(raw: &str) -> CliResult<Vec<f64>> {
    raw.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad fpr target `{f}`")))
        })
        .collect()
}

fn run(cli: Cli) -> CliResult<()> {
    let overrides = Overrides {
        seed: cli.seed,
        level: cli.level,
        fpr_targets: cli
            .fpr_targets
            .as_deref()
            .map(parse_fpr_targets)
            .transpose()?,
        n_shadows: cli.n_shadows,
        method: cli.method,
        budget: cli.budget,
    };
    let config = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let workdir = cli
        .workdir
        .or_else(|| std::env::var_os("QRMIA_WORKDIR").map(PathBuf::from))
        .ok_or_else(|| {
            CliError::Config("no workdir: pass --workdir or set QRMIA_WORKDIR".into())
        })?;

    let force = cli.force;
    match cli.command {
        Command::Gen => stages::cmd_gen(&config, &workdir, force)?,
        Command::Split => stages::cmd_split(&config, &workdir, force)?,
        Command::TrainTarget => stages::cmd_train_target(&config, &workdir, force)?,
        Command::Score => stages::cmd_score(&config, &workdir, force)?,
        Command::Tune => stages::cmd_tune(&config, &workdir, force)?,
        Command::Shadow => stages::cmd_shadow(&config, &workdir, force)?,
        Command::TrainAttack => stages::cmd_train_attack(&config, &workdir, force)?,
        Command::Evaluate => stages::cmd_evaluate(&config, &workdir, force)?,
        Command::Compare => qrmia_cli::cmd_compare(&config, &workdir, force)?,
    };
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
