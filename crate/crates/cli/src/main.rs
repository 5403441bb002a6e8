//! `partnr`: demonstrations, training, interactive runs, evaluation,
//! reports and the session server.
//!
//! Exit status: 0 on success, 2 for usage and configuration errors, 3 for
//! failures while running.

mod config;

use std::fs;
use std::io::{BufReader, Write as _};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use partnr::dataset::Dataset;
use partnr::experiment::{collect_offline, evaluate, run_experiment, train_model, ExperimentConfig, Split};
use partnr::policy::ModelCheckpoint;
use partnr::report::{parse_metrics, render_table, write_run, RunManifest};
use partnr::telemetry::{audit, read_csv};
use partnr::ValueModel64;
use partnr_service::{AppState, CreateSession, Status, TeacherMode};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<partnr::Error> for Failure {
    fn from(e: partnr::Error) -> Self {
        match e {
            partnr::Error::Config(m) | partnr::Error::Schema(m) => Failure::Config(m),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

#[derive(Parser)]
#[command(name = "partnr", version, about = "Ambiguity-gated interactive imitation learning for pick and place")]
#[command(after_long_help = config::key_listing())]
struct Cli {
    /// Directory for outputs.
    #[arg(long, global = true, env = "PARTNR_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment config, TOML or JSON (by extension).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set pick_threshold.p0=0.6`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, Failure> {
        config::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TeacherArg {
    Scripted,
    Human,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Markdown,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write scripted-expert demonstrations as JSON lines.
    #[command(after_long_help = config::key_listing())]
    GenerateDemos {
        #[command(flatten)]
        config: ConfigArgs,
        /// Number of demonstrations; defaults to `demo_budget`.
        #[arg(long, short)]
        n: Option<usize>,
        /// Defaults to the first configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Defaults to `<out-dir>/demos.jsonl`.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Train a model on a demonstrations file and write its checkpoint.
    #[command(after_long_help = config::key_listing())]
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        demos: PathBuf,
        /// Defaults to `training.epochs`.
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Defaults to `<out-dir>/model.json`.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run the experiment over all seeds and write metrics, telemetry, report and manifest.
    #[command(after_long_help = config::key_listing())]
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Re-run the config recorded in a manifest.
        #[arg(long, conflicts_with = "config")]
        manifest: Option<PathBuf>,
        /// Train on offline demonstrations only.
        #[arg(long)]
        baseline: bool,
        #[arg(long, value_enum, default_value = "scripted")]
        teacher: TeacherArg,
        /// Listen address with `--teacher human`.
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Evaluate a model checkpoint without gating.
    #[command(after_long_help = config::key_listing())]
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        model: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Comparison table over metrics files.
    Report {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
        /// Write to this file instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check the bookkeeping of a telemetry file.
    Audit { telemetry: PathBuf },
    /// Serve the session API and UI.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory holding an `index.html` to serve instead of the built-in page.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value).context("serializing")?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Dataset, Failure> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Dataset::read_jsonl(BufReader::new(file))?)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let out = cli.out_dir;
    match cli.command {
        Cmd::GenerateDemos { config, n, seed, output } => {
            let cfg = config.load()?;
            let n = n.unwrap_or(cfg.demo_budget);
            let seed = seed.unwrap_or(cfg.seeds[0]);
            let data = collect_offline(seed, n, cfg.image_size, cfg.noise_sigma, cfg.commands_per_episode)?;
            let path = output.unwrap_or_else(|| out.join("demos.jsonl"));
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)?;
            }
            let mut file = std::io::BufWriter::new(fs::File::create(&path)?);
            data.write_jsonl(&mut file)?;
            file.flush()?;
            println!("{} demonstrations -> {}", data.len(), path.display());
        }
        Cmd::Train { config, demos, epochs, seed, output } => {
            let cfg = config.load()?;
            let data = read_dataset(&demos)?;
            let epochs = epochs.unwrap_or(cfg.training.epochs);
            let model = train_model::<f64>(&data, cfg.training, epochs, seed.unwrap_or(cfg.seeds[0]))?;
            let path = output.unwrap_or_else(|| out.join("model.json"));
            write_json(&path, &model.to_checkpoint())?;
            println!("trained on {} demonstrations for {epochs} epochs -> {}", data.len(), path.display());
        }
        Cmd::Evaluate { config, model, seed } => {
            let cfg = config.load()?;
            let text = fs::read_to_string(&model).with_context(|| format!("reading {}", model.display()))?;
            let ckpt: ModelCheckpoint =
                serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", model.display())))?;
            let model = ValueModel64::from_checkpoint(&ckpt)?;
            let result = evaluate(&model, &cfg.eval_settings(), seed.unwrap_or(cfg.seeds[0]))?;
            write_json(&out.join("eval.json"), &result)?;
            println!("{}", serde_json::to_string_pretty(&result).context("serializing")?);
        }
        Cmd::Run { config, manifest, baseline, teacher, addr } => {
            let mut cfg = match &manifest {
                Some(path) => {
                    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    let m: RunManifest =
                        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                    m.config.validate()?;
                    m.config
                }
                None => config.load()?,
            };
            if baseline {
                cfg.split = Split::BASELINE;
            }
            match teacher {
                TeacherArg::Scripted => {
                    let output = run_experiment::<f64>(&cfg)?;
                    write_run(&out, &RunManifest::new(cfg), &output)?;
                    print!("{}", render_table(std::slice::from_ref(&output.metrics))?);
                    println!("\noutputs in {}", out.display());
                }
                TeacherArg::Human => run_human(cfg, addr, &out)?,
            }
        }
        Cmd::Report { metrics, format, output } => {
            let mut runs = Vec::new();
            for path in &metrics {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                runs.push(parse_metrics(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?);
            }
            let text = match format {
                Format::Markdown => render_table(&runs)?,
                Format::Csv => csv_table(&runs)?,
            };
            match output {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
        Cmd::Audit { telemetry } => {
            let file = fs::File::open(&telemetry).with_context(|| format!("opening {}", telemetry.display()))?;
            let report = audit(&read_csv(file)?);
            println!("{}", serde_json::to_string_pretty(&report).context("serializing")?);
            if !report.passed {
                return Err(Failure::Runtime(anyhow::anyhow!("{} violations", report.violations.len())));
            }
        }
        Cmd::Serve { addr, assets } => {
            let state = assets.map_or_else(AppState::new, AppState::with_assets);
            runtime()?.block_on(async {
                let listener = partnr_service::bind(addr).await?;
                println!("listening on http://{}", listener.local_addr()?);
                partnr_service::serve(listener, state, ctrl_c()).await
            })?;
        }
    }
    Ok(())
}

fn csv_table(runs: &[partnr::experiment::ExperimentMetrics]) -> Result<String, Failure> {
    if runs.is_empty() {
        return Err(Failure::Config("at least one metrics file is required".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "algorithm",
        "split",
        "mode",
        "demo_budget",
        "noise_sigma",
        "mean_success_rate",
        "std_success_rate",
        "seeds",
    ])
    .context("csv")?;
    for m in runs {
        let seeds: Vec<String> = m.seeds.iter().map(|s| format!("{}:{}", s.seed, s.success_rate)).collect();
        w.write_record([
            m.algorithm.clone(),
            m.split.clone(),
            m.mode.as_str().to_string(),
            m.demo_budget.to_string(),
            m.noise_sigma.to_string(),
            m.mean_success_rate.to_string(),
            m.std_success_rate.to_string(),
            seeds.join(" "),
        ])
        .context("csv")?;
    }
    Ok(String::from_utf8(w.into_inner().context("csv")?).context("csv")?)
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

async fn ctrl_c() {
    let _ = tokio::signal::ctrl_c().await;
}

/// Serves one human-taught session for the first configured seed and
/// writes its outputs once it finishes.
fn run_human(cfg: ExperimentConfig, addr: SocketAddr, out: &Path) -> Result<(), Failure> {
    let state = AppState::new();
    let request = CreateSession { config: cfg, teacher: TeacherMode::Human, ..CreateSession::default() };
    let host = state.create(request).map_err(|e| Failure::Config(e.message().to_string()))?;
    let rt = runtime()?;
    let host2 = host.clone();
    let id = host.id().to_string();
    rt.block_on(async move {
        let listener = partnr_service::bind(addr).await?;
        println!("session {id} waiting for a teacher at http://{}/", listener.local_addr()?);
        let done = async move {
            loop {
                if !host2.snapshot().status.is_active() {
                    break;
                }
                tokio::select! {
                    _ = tokio::time::sleep(Duration::from_millis(200)) => {}
                    _ = ctrl_c() => break,
                }
            }
        };
        partnr_service::serve(listener, state, done).await
    })?;
    let snap = host.snapshot();
    fs::create_dir_all(out)?;
    fs::write(out.join("telemetry.csv"), host.telemetry_csv())?;
    fs::write(out.join("dataset.jsonl"), host.dataset_jsonl())?;
    match snap.status {
        Status::Finished => {
            write_json(&out.join("session.json"), &*snap)?;
            println!("session finished; outputs in {}", out.display());
            Ok(())
        }
        _ => Err(Failure::Runtime(anyhow::anyhow!(
            "session ended early: {}",
            snap.error.clone().unwrap_or_else(|| "interrupted".into())
        ))),
    }
}
