use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dlp_core::cli::{self as commands, to_json_lines, to_json_pretty, EXIT_INVARIANT, EXIT_OK};
use dlp_core::config::RunConfig;
use dlp_core::evaluate::render_text;
use dlp_core::policy::PolicyConfig;
use dlp_core::tune::ParamGrid;
use dlp_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "dlpc", version, about = "Document sensitivity classifier for data-loss prevention")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit on a stratified split of the corpus and report on the held-out part.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Randomized search with stratified k-fold CV, then refit on the whole corpus.
    Tune {
        #[command(flatten)]
        run: RunArgs,
        /// TOML grid of parameter name -> candidate values.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        n_candidates: Option<usize>,
        #[arg(long)]
        n_splits: Option<usize>,
    },
    /// Confusion matrix and metrics of a bundle on a labelled corpus.
    Evaluate {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Print the predicted label and class probabilities of each file (JSON lines).
    Classify {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Classify files and apply a policy (JSON lines). Exits 3 if any file is blocked.
    Scan {
        #[arg(long)]
        bundle: PathBuf,
        /// TOML file of `label = "action"` pairs and `default = "action"`.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// `path<TAB>label` manifest, or a directory with one subfolder per label.
    #[arg(long)]
    manifest: PathBuf,
    /// Sectioned TOML run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Newline-delimited stopword list replacing the bundled one.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.set_seed(seed);
        }
        if let Some(path) = &self.stopwords {
            config.stopwords = Some(path.clone());
        }
        Ok(config)
    }
}

fn print_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| Error::io("<stdout>", e))
}

fn read_grid(path: &Path) -> Result<ParamGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ParamGrid::from_toml(&text).map_err(|e| e.in_stage(format!("grid {}", path.display())))
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Train { run } => {
            let out = commands::cmd_train(&run.manifest, &run.config()?, &run.out_dir)?;
            print_stdout(&render_text(&out.report))?;
            eprintln!("bundle written to {}", out.bundle_path.display());
        }
        Command::Tune {
            run,
            grid,
            n_candidates,
            n_splits,
        } => {
            let mut config = run.config()?;
            config.n_candidates = n_candidates.unwrap_or(config.n_candidates);
            config.n_splits = n_splits.unwrap_or(config.n_splits);
            let out = commands::cmd_tune(&run.manifest, &read_grid(&grid)?, &config, &run.out_dir)?;
            print_stdout(&to_json_pretty(&out.result)?)?;
            eprintln!("bundle written to {}", out.bundle_path.display());
        }
        Command::Evaluate {
            bundle,
            manifest,
            out_dir,
        } => {
            let report = commands::cmd_evaluate(&bundle, &manifest, &out_dir)?;
            print_stdout(&render_text(&report))?;
        }
        Command::Classify { bundle, paths } => {
            print_stdout(&to_json_lines(&commands::cmd_classify(&bundle, &paths)?)?)?;
        }
        Command::Scan { bundle, policy, paths } => {
            let policy = match policy {
                Some(path) => PolicyConfig::load(&path)?,
                None => PolicyConfig::default(),
            };
            let out = commands::cmd_scan(&bundle, &policy, &paths)?;
            print_stdout(&to_json_lines(&out.records)?)?;
            return Ok(out.exit_code);
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match panic::catch_unwind(AssertUnwindSafe(|| run(cli.command))) {
        Ok(Ok(code)) => code,
        Ok(Err(err)) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
        Err(_) => EXIT_INVARIANT,
    };
    ExitCode::from(code as u8)
}
