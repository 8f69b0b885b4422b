use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use policylogic::decomposition::ExemplarPool;
use policylogic::evaluation::model_choice::{ChoiceMode, ModelChoiceConfig};
use policylogic::evaluation::{hydrate_pool, load_qa4pc, load_sharc, report, run_model_choice, run_sharc, SharcUtterance};
use policylogic::logic::Equivalence;
use policylogic::scripted::{record_model_choice, record_sessions, record_sharc, ScriptBook};
use policylogic::{parse, CaseInput};
use policylogic_cli::server::{serve, AppState};
use policylogic_cli::{CliError, Mode, ServiceConfig};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "policylogic", version, about = "Policy question answering with three-valued logic")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Backend mode; defaults to the config file's `mode`, then replay.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// JSON service config (backends, threshold, samples, listen, ...).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Fixture directory for replay and capture modes.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Script file for scripted mode.
    #[arg(long, global = true)]
    script: Option<PathBuf>,
    /// Relevance threshold on cosine similarity.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Number of logic-formulation samples.
    #[arg(long, global = true)]
    samples: Option<usize>,
}

impl GlobalArgs {
    fn service_config(&self) -> Result<ServiceConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ServiceConfig::load(path)?,
            None => ServiceConfig::default(),
        };
        cfg.mode = self.mode.or(cfg.mode);
        cfg.fixtures = self.fixtures.clone().or(cfg.fixtures);
        cfg.script = self.script.clone().or(cfg.script);
        cfg.threshold = self.threshold.or(cfg.threshold);
        cfg.samples = self.samples.or(cfg.samples);
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide one case and print the decision with its trace.
    Predict(PredictArgs),
    /// Run a ShARC split and print the metric report.
    Evaluate(EvaluateArgs),
    /// Check two expressions for three-valued equivalence.
    Equiv {
        left: String,
        right: String,
        #[arg(long, default_value_t = Equivalence::default().max_variables)]
        max_variables: usize,
    },
    /// Sweep in-context example counts over QA4PC items.
    ModelChoice(ModelChoiceArgs),
    /// Serve the /v1 session API.
    Serve {
        #[arg(long)]
        listen: Option<SocketAddr>,
        /// Persist sessions as JSON files in this directory.
        #[arg(long)]
        sessions_dir: Option<PathBuf>,
    },
    /// Record replay fixtures from a script file.
    Record(RecordArgs),
}

#[derive(Args)]
struct PredictArgs {
    /// Case JSON: {policy, question, scenario?, history?}.
    #[arg(long, conflicts_with_all = ["policy", "question", "scenario"])]
    case: Option<PathBuf>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    question: Option<String>,
    #[arg(long)]
    scenario: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Split {
    Dev,
    Train,
    Test,
}

impl Split {
    fn file_name(self) -> &'static str {
        match self {
            Split::Dev => "sharc_dev.json",
            Split::Train => "sharc_train.json",
            Split::Test => "sharc_test.json",
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    /// A ShARC JSON file, or a directory holding `sharc_<split>.json`.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "dev")]
    split: Split,
    /// Evaluate only the first N utterances.
    #[arg(long)]
    limit: Option<usize>,
    /// Write per-case traces as JSON lines.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Write the report JSON here as well as to standard output.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Choice {
    GivenQuestions,
    EndToEnd,
    GoldSanity,
}

impl From<Choice> for ChoiceMode {
    fn from(c: Choice) -> Self {
        match c {
            Choice::GivenQuestions => ChoiceMode::GivenQuestions,
            Choice::EndToEnd => ChoiceMode::EndToEnd,
            Choice::GoldSanity => ChoiceMode::GoldSanity,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_values_t = ModelChoiceConfig::default().ks)]
    ks: Vec<usize>,
    #[arg(long, default_value_t = ModelChoiceConfig::default().runs)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "given-questions")]
    choice: Choice,
    /// Replace builtin pool entries with dataset items of the same tree ID.
    #[arg(long)]
    hydrate: bool,
}

impl SweepArgs {
    fn config(&self) -> ModelChoiceConfig {
        ModelChoiceConfig {
            ks: self.ks.clone(),
            runs: self.runs,
            seed: self.seed,
            mode: self.choice.into(),
            ..ModelChoiceConfig::default()
        }
    }

    fn pool(&self, items: &[policylogic::evaluation::Qa4pcItem]) -> ExemplarPool {
        if self.hydrate {
            hydrate_pool(items)
        } else {
            ExemplarPool::builtin()
        }
    }
}

#[derive(Args)]
struct ModelChoiceArgs {
    /// QA4PC items JSON.
    #[arg(long)]
    items: PathBuf,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Args)]
#[group(id = "input", required = true, multiple = false, args = ["case", "dataset", "items"])]
struct RecordArgs {
    /// Output fixture directory; existing files are replaced.
    #[arg(long)]
    out: PathBuf,
    /// Record every session reachable from this case.
    #[arg(long)]
    case: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    max_turns: usize,
    /// Record a ShARC run over this dataset file.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Record a model-choice sweep over these QA4PC items.
    #[arg(long)]
    items: Option<PathBuf>,
    #[command(flatten)]
    sweep: SweepArgs,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("outputs serialize");
    writeln!(std::io::stdout(), "{text}").map_err(CliError::io)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn predict(global: &GlobalArgs, args: PredictArgs) -> Result<(), CliError> {
    let case: CaseInput = match (args.case, args.policy, args.question) {
        (Some(path), _, _) => read_json(&path)?,
        (None, Some(policy), Some(question)) => {
            CaseInput::new(policy, question).with_scenario(args.scenario.unwrap_or_default())
        }
        _ => return Err(CliError::usage("give --case, or both --policy and --question")),
    };
    let engine = global.service_config()?.engine()?;
    let decision = engine.decide(&case).map_err(CliError::pipeline)?;
    print_json(&decision)
}

fn load_split(args: &EvaluateArgs) -> Result<Vec<SharcUtterance>, CliError> {
    let path = if args.dataset.is_dir() {
        args.dataset.join(args.split.file_name())
    } else {
        args.dataset.clone()
    };
    load_sharc(&path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn evaluate(global: &GlobalArgs, args: EvaluateArgs) -> Result<(), CliError> {
    let engine = global.service_config()?.engine()?;
    let utterances = load_split(&args)?;
    let results = run_sharc(&engine, &utterances, args.limit);
    if let Some(path) = &args.traces {
        let file = File::create(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let mut out = BufWriter::new(file);
        for r in &results {
            serde_json::to_writer(&mut out, r).expect("traces serialize");
            writeln!(out).map_err(CliError::io)?;
        }
        out.flush().map_err(CliError::io)?;
    }
    let report = report(&results).map_err(|_| CliError::usage("no utterances to evaluate"))?;
    let json = serde_json::to_string_pretty(&report).expect("reports serialize");
    if let Some(path) = &args.report {
        write_file(path, format!("{json}\n").as_bytes())?;
    }
    eprint!("{}", report.table());
    writeln!(std::io::stdout(), "{json}").map_err(CliError::io)?;
    if report.errors > 0 {
        return Err(CliError::pipeline(format!("{} of {} cases failed", report.errors, report.total)));
    }
    Ok(())
}

fn equiv(left: &str, right: &str, max_variables: usize) -> Result<(), CliError> {
    let a = parse(left).map_err(|e| CliError::usage(format!("{left:?}: {e}")))?;
    let b = parse(right).map_err(|e| CliError::usage(format!("{right:?}: {e}")))?;
    let same = Equivalence { max_variables }.check(&a, &b).map_err(CliError::usage)?;
    println!("{}", if same { "equivalent" } else { "not equivalent" });
    Ok(())
}

fn model_choice(global: &GlobalArgs, args: ModelChoiceArgs) -> Result<(), CliError> {
    let items = load_qa4pc(&args.items).map_err(|e| CliError::io(format!("{}: {e}", args.items.display())))?;
    let engine = global.service_config()?.engine()?;
    let runs = run_model_choice(engine.backends.generator.as_ref(), &items, &args.sweep.pool(&items), &args.sweep.config())
        .map_err(CliError::usage)?;
    let mut out = std::io::stdout().lock();
    for run in &runs {
        serde_json::to_writer(&mut out, run).expect("runs serialize");
        writeln!(out).map_err(CliError::io)?;
    }
    for k in &args.sweep.ks {
        let accs: Vec<f64> = runs.iter().filter(|r| r.k == *k).map(|r| r.accuracy).collect();
        let mean = accs.iter().sum::<f64>() / accs.len().max(1) as f64;
        eprintln!("k={k:<3} mean accuracy {:.1} over {} runs", 100.0 * mean, accs.len());
    }
    Ok(())
}

fn run_server(global: &GlobalArgs, listen: Option<SocketAddr>, sessions_dir: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = global.service_config()?;
    let addr = listen.or(cfg.listen).unwrap_or_else(|| SocketAddr::from(([127, 0, 0, 1], 8080)));
    let mut state = AppState::new(cfg.engine()?);
    if let Some(dir) = sessions_dir.or(cfg.sessions_dir.clone()) {
        state = state.with_sessions_dir(dir).map_err(CliError::io)?;
    }
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::io)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| CliError::io(format!("{addr}: {e}")))?;
        tracing::info!(%addr, mode = ?cfg.mode(), "listening");
        serve(listener, Arc::new(state)).await.map_err(CliError::io)
    })
}

fn record(global: &GlobalArgs, args: RecordArgs) -> Result<(), CliError> {
    let path = global
        .script
        .as_deref()
        .ok_or_else(|| CliError::config("record needs a script file (--script)"))?;
    let book = ScriptBook::load(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let pipeline = global.service_config()?.pipeline()?;
    let store = if let Some(case) = &args.case {
        let case: CaseInput = read_json(case)?;
        record_sessions(&book, &pipeline, &[case], args.max_turns).map_err(CliError::pipeline)?.0
    } else if let Some(dataset) = &args.dataset {
        let utterances = load_sharc(dataset).map_err(|e| CliError::io(format!("{}: {e}", dataset.display())))?;
        let (store, results) = record_sharc(&book, &pipeline, &utterances);
        if let Some(r) = results.iter().find(|r| r.error.is_some()) {
            return Err(CliError::pipeline(format!("{}: {}", r.utterance_id, r.error.as_deref().unwrap_or_default())));
        }
        store
    } else {
        let path = args.items.as_deref().expect("clap requires one input");
        let items = load_qa4pc(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        record_model_choice(&book, &items, &args.sweep.pool(&items), &args.sweep.config())
            .map_err(CliError::usage)?
            .0
    };
    let _ = std::fs::remove_dir_all(&args.out);
    store.write_dir(&args.out).map_err(|e| CliError::io(format!("{}: {e}", args.out.display())))?;
    eprintln!("wrote {} records to {}", store.len(), args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let global = &cli.global;
    match cli.command {
        Command::Predict(args) => predict(global, args),
        Command::Evaluate(args) => evaluate(global, args),
        Command::Equiv {
            left,
            right,
            max_variables,
        } => equiv(&left, &right, max_variables),
        Command::ModelChoice(args) => model_choice(global, args),
        Command::Serve { listen, sessions_dir } => run_server(global, listen, sessions_dir),
        Command::Record(args) => record(global, args),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("policylogic: {e}");
            ExitCode::from(e.kind.code())
        }
    }
}
