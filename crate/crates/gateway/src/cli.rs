use crate::backend::BackendSelector;
use crate::server::{self, AppState, ServerConfig};
use changescope_core::eval::corpus::write_corpus;
use changescope_core::eval::stats::{estimate_latency, mcnemar};
use changescope_core::eval::dataset::CropTarget;
use changescope_core::eval::{load_dataset, run_eval, RunnerConfig};
use changescope_core::llm::{CompletionBackend, RecordingBackend};
use changescope_core::navigator::memory::{Clock, SystemClock, TickClock};
use changescope_core::navigator::session::{Session, SessionError, Temporal, DEFAULT_SEED};
use changescope_core::navigator::{run_query, AgentConfig, AgentError, Trace, DEFAULT_MAX_STEPS};
use changescope_core::raster::{CropRegion, RasterError};
use changescope_core::toolkit::{FixtureStore, Toolkit};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

pub const EXIT_AGENT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IMAGE: i32 = 3;
pub const EXIT_BACKEND: i32 = 4;
pub const EXIT_DATASET: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "changescope", version, about = "Query-driven change analysis of bi-temporal image pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Answer one question about an image pair.
    Ask(AskArgs),
    /// Run a dataset through the agent and score it.
    Eval(EvalArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Inspect the tool registry.
    Tools {
        #[command(subcommand)]
        command: ToolsCommand,
    },
    /// Write the built-in evaluation corpus (dataset, images, fixtures, scripts).
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
    /// McNemar test on discordant counts.
    Mcnemar {
        #[arg(long)]
        b: u64,
        #[arg(long)]
        c: u64,
    },
    /// Latency range for a tool chain of the given length.
    Latency {
        #[arg(long)]
        tools: u32,
        #[arg(long, default_value = "0.5,2", value_parser = parse_range)]
        tool_s: (f64, f64),
        #[arg(long, default_value = "1,3", value_parser = parse_range)]
        api_s: (f64, f64),
    },
}

#[derive(Debug, Subcommand)]
pub enum ToolsCommand {
    List {
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CropTargetArg {
    Pre,
    Cur,
    Both,
}

impl From<CropTargetArg> for CropTarget {
    fn from(t: CropTargetArg) -> Self {
        match t {
            CropTargetArg::Pre => CropTarget::Pre,
            CropTargetArg::Cur => CropTarget::Cur,
            CropTargetArg::Both => CropTarget::Both,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct AskArgs {
    #[arg(long)]
    pub pre: PathBuf,
    #[arg(long)]
    pub cur: PathBuf,
    #[arg(long, short)]
    pub question: String,
    /// Region of interest as `x,y,w,h`.
    #[arg(long, value_parser = parse_crop)]
    pub crop: Option<CropRegion>,
    #[arg(long, value_enum, default_value = "both")]
    pub crop_target: CropTargetArg,
    #[arg(long, default_value = "http")]
    pub backend: BackendSelector,
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Write the step trace as JSON.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    pub max_steps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Deterministic timings in the trace.
    #[arg(long)]
    pub logical_clock: bool,
    /// Record every prompt/completion to a replayable script.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Route a tool to a remote model service: `tool=url`.
    #[arg(long, value_parser = parse_remote)]
    pub remote: Vec<(String, String)>,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Defaults to `scripted:<dataset dir>/scripts`.
    #[arg(long)]
    pub backend: Option<BackendSelector>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: ReportFormat,
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Directory for per-question trace files.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    pub max_steps: usize,
    #[arg(long, value_parser = parse_remote)]
    pub remote: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Json,
    Md,
}

#[derive(Debug, clap::Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "http")]
    pub backend: BackendSelector,
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    pub max_steps: usize,
    #[arg(long, value_parser = parse_remote)]
    pub remote: Vec<(String, String)>,
}

fn parse_crop(s: &str) -> Result<CropRegion, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(format!("expected x,y,w,h, got '{s}'"));
    }
    let mut v = [0u32; 4];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| format!("'{p}' is not a non-negative integer"))?;
    }
    if v[2] == 0 || v[3] == 0 {
        return Err("crop width and height must be positive".into());
    }
    Ok(CropRegion::new(v[0], v[1], v[2], v[3]))
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected min,max, got '{s}'"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad number '{a}'"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad number '{b}'"))?;
    Ok((a, b))
}

fn parse_remote(s: &str) -> Result<(String, String), String> {
    let (tool, url) = s.split_once('=').ok_or_else(|| format!("expected tool=url, got '{s}'"))?;
    Ok((tool.trim().to_string(), url.trim().to_string()))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Image(String),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Agent(String),
    #[error("{0}")]
    Dataset(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Image(_) => EXIT_IMAGE,
            Self::Backend(_) => EXIT_BACKEND,
            Self::Agent(_) => EXIT_AGENT,
            Self::Dataset(_) => EXIT_DATASET,
        }
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Raster(RasterError::OutOfBounds { .. }) => Self::Usage(e.to_string()),
            other => Self::Image(other.to_string()),
        }
    }
}

fn read_image(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Image(format!("{}: {e}", path.display())))
}

fn toolkit(fixtures: Option<PathBuf>, remote: &[(String, String)]) -> Result<Toolkit, CliError> {
    let mut kit = Toolkit::standard(fixtures.map(FixtureStore::new));
    for (tool, url) in remote {
        kit.route_remote(tool, url).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(kit)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Usage(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Runs `ask` and returns the trace (also on step-limit and parse failures).
pub fn ask(args: &AskArgs) -> Result<Trace, CliError> {
    let clock: Arc<dyn Clock> = if args.logical_clock {
        Arc::new(TickClock::starting_at(0))
    } else {
        Arc::new(SystemClock)
    };
    let mut session = Session::with_clock(args.seed, clock);
    let pre = session.register_image(&read_image(&args.pre)?, Temporal::Pre, None)?;
    let cur = session.register_image(&read_image(&args.cur)?, Temporal::Cur, Some(pre.link_id.as_str()))?;
    if let Some(region) = args.crop {
        let targets = match CropTarget::from(args.crop_target) {
            CropTarget::Pre => vec![&pre],
            CropTarget::Cur => vec![&cur],
            CropTarget::Both => vec![&pre, &cur],
        };
        for t in targets {
            session.crop_and_register(t.self_id.as_str(), region)?;
        }
    }
    let kit = toolkit(args.fixtures.clone(), &args.remote)?;
    let inner = args.backend.open().map_err(|e| CliError::Backend(e.to_string()))?;
    let mut backend: Box<dyn CompletionBackend> = match &args.record {
        Some(sink) => Box::new(RecordingBackend::new(inner, sink).map_err(|e| CliError::Usage(e.to_string()))?),
        None => inner,
    };
    let config = AgentConfig { max_steps: args.max_steps };
    let result = run_query(&mut session, &kit, &mut backend, &args.question, &config);
    let trace = match &result {
        Ok(t) => Some(t.clone()),
        Err(e) => e.trace().cloned(),
    };
    if let (Some(path), Some(t)) = (&args.trace, &trace) {
        write_file(path, &t.to_json())?;
    }
    match result {
        Ok(t) => Ok(t),
        Err(e @ AgentError::Backend { .. }) => Err(CliError::Backend(e.to_string())),
        Err(e @ (AgentError::StepLimitExceeded(_) | AgentError::ParseFailure(_))) => Err(CliError::Agent(e.to_string())),
        Err(e) => Err(CliError::Usage(e.to_string())),
    }
}

pub fn eval(args: &EvalArgs) -> Result<String, CliError> {
    let questions = load_dataset(&args.dataset).map_err(|e| CliError::Dataset(e.to_string()))?;
    let base = args.dataset.parent().unwrap_or(Path::new(".")).to_path_buf();
    let selector = args
        .backend
        .clone()
        .unwrap_or_else(|| BackendSelector::Scripted(base.join("scripts")));
    let mut factory = selector.factory().map_err(|e| CliError::Backend(e.to_string()))?;
    let config = RunnerConfig {
        agent: AgentConfig { max_steps: args.max_steps },
        fixtures: args.fixtures.clone(),
        remote: args.remote.clone(),
        ..RunnerConfig::default()
    };
    let outcome = run_eval(&questions, &base, &mut factory, &config)
        .ok_or_else(|| CliError::Dataset(format!("{}: no questions", args.dataset.display())))?;
    if let Some(path) = &args.report {
        let body = match args.format {
            ReportFormat::Json => outcome.report.to_json(),
            ReportFormat::Md => outcome.report.to_markdown(),
        };
        write_file(path, &body)?;
    }
    if let Some(dir) = &args.traces {
        for (id, trace) in &outcome.traces {
            if let Some(t) = trace {
                write_file(&dir.join(format!("{id}.json")), &t.to_json())?;
            }
        }
    }
    let mut out = outcome.report.summary_line();
    for (class, n) in &outcome.report.error_histogram {
        out.push_str(&format!("\n{class}: {n}"));
    }
    Ok(out)
}

fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let config = ServerConfig {
        backend: args.backend.clone(),
        fixtures: args.fixtures.clone(),
        store: args.store.clone(),
        agent: AgentConfig { max_steps: args.max_steps },
        remote: args.remote.clone(),
        seed: args.seed,
    };
    let state = AppState::new(config).map_err(CliError::Usage)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Usage(e.to_string()))?;
    runtime
        .block_on(server::serve(state, (args.host, args.port).into()))
        .map_err(|e| CliError::Usage(e.to_string()))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ask(args) => {
            let trace = ask(&args)?;
            println!("{}", trace.final_answer);
        }
        Command::Eval(args) => println!("{}", eval(&args)?),
        Command::Serve(args) => serve(&args)?,
        Command::Tools {
            command: ToolsCommand::List { fixtures },
        } => {
            let kit = toolkit(fixtures, &[])?;
            for spec in kit.specs() {
                println!("{}\t{}", spec.name, spec.description);
            }
        }
        Command::Fixtures { out } => {
            let corpus = write_corpus(&out).map_err(|e| CliError::Usage(e.to_string()))?;
            println!(
                "wrote {} questions and {} fault cases to {}",
                corpus.questions.len(),
                corpus.faults.len(),
                out.display()
            );
        }
        Command::Mcnemar { b, c } => {
            let m = mcnemar(b, c).map_err(|e| CliError::Usage(e.to_string()))?;
            println!("chi2={:.4} p={:.4}", m.statistic, m.p_value);
            if let Some(p) = m.exact_p_value {
                println!("exact_p={p:.4}");
            }
        }
        Command::Latency { tools, tool_s, api_s } => {
            let l = estimate_latency(tools, tool_s, api_s).map_err(|e| CliError::Usage(e.to_string()))?;
            println!("rounds={} min={:.1}s max={:.1}s", l.rounds, l.min_s, l.max_s);
        }
    }
    Ok(())
}

pub fn main() -> i32 {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .try_init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
