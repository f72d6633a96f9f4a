//! Command line front end and HTTP service for the qualia test.
//!
//! [`run`] is the whole CLI; the binary only forwards `argv` and the exit code.

pub mod service;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use qualia_core::agents::{run_agent_session, run_simulated_session, AgentPolicy, ExternalAgent};
use qualia_core::inference::TestConfig;
use qualia_core::items::{build_item, InstanceRegistry, QuestionItem};
use qualia_core::session::{new_session_id, EventSink, FileSink, NullSink, Session, Verdict};
use qualia_core::stimulus::{
    ground_truth, load_corpus, render, sample_catch_spec, sample_spec, verify_corpus, Difficulty, IllusionKind,
    GOLDEN_CORPUS,
};
use qualia_core::VerdictLabel;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "qualia", version, about = "Illusion-based perception test harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render one instance to PNG with a JSON sidecar holding its spec and answer key.
    Gen(GenArgs),
    /// Run a session against an agent speaking the stdio protocol.
    Test(TestArgs),
    /// Run built-in simulated agents and tabulate their verdicts.
    Simulate(SimulateArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Replay a session log and print its state.
    Report(ReportArgs),
    /// Re-render the golden corpus and compare digests.
    Verify,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// JSON file with test configuration; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<TestConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => TestConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: IllusionKind,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "standard", value_parser = parse_difficulty)]
    difficulty: Difficulty,
    /// Draw a control instance whose percept matches reality.
    #[arg(long)]
    catch: bool,
    /// Seed for the choice order; defaults to `--seed`.
    #[arg(long)]
    shuffle_seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TestArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value = "agent")]
    subject: String,
    /// Seconds to wait for each answer.
    #[arg(long, default_value_t = 30)]
    timeout_secs: u64,
    /// Directory for the session log and instance registry. Without it
    /// nothing is persisted.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Agent program and its arguments.
    #[arg(required = true, trailing_var_arg = true, allow_hyphen_values = true)]
    agent: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SimPolicy {
    Perceiver,
    Veridical,
    Guesser,
    Vision,
    All,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum, default_value = "all")]
    policy: SimPolicy,
    #[arg(long, default_value_t = 100)]
    runs: u32,
    /// Lapse rate of the simulants.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "qualia-data")]
    data_dir: PathBuf,
    /// Refuse an instance already shown to any subject, not just this one.
    #[arg(long)]
    global_registry: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    log: PathBuf,
    /// Print the full snapshot, answer key included.
    #[arg(long)]
    full: bool,
}

fn parse_kind(s: &str) -> Result<IllusionKind, String> {
    s.parse().map_err(|e: qualia_core::stimulus::StimulusError| e.to_string())
}

fn parse_difficulty(s: &str) -> Result<Difficulty, String> {
    s.parse()
}

/// Runs the CLI. Returns 0 on success, 1 for usage errors and 2 when the
/// command itself fails.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a, out),
        Command::Test(a) => test(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Serve(a) => serve(a),
        Command::Report(a) => report(a, out),
        Command::Verify => verify(out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_FAILURE
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> String + '_ {
    move |e| format!("{}: {e}", path.display())
}

fn gen(a: GenArgs, out: &mut dyn Write) -> Result<(), String> {
    let bias = TestConfig::default().bias;
    let spec = if a.catch {
        sample_catch_spec(a.kind, a.seed, &bias)
    } else {
        sample_spec(a.kind, a.seed, a.difficulty, &bias)
    }
    .map_err(|e| e.to_string())?;
    let item = build_item(&spec, &bias, a.shuffle_seed.unwrap_or(a.seed)).map_err(|e| e.to_string())?;
    let png = render(&spec).and_then(|r| r.to_png()).map_err(|e| e.to_string())?;
    std::fs::write(&a.out, &png).map_err(io_err(&a.out))?;
    let sidecar_path = a.out.with_extension("json");
    let spec_value: serde_json::Value = serde_json::from_str(&spec.canonical_json()).map_err(|e| e.to_string())?;
    let sidecar = json!({
        "spec": spec_value,
        "spec_hash": item.spec_hash,
        "item_id": item.item_id,
        "prompt": item.prompt,
        "choices": item.choice_texts(),
        "veridical_idx": item.veridical_idx,
        "illusion_idx": item.illusion_idx,
        "is_catch": item.is_catch,
        "ground_truth": ground_truth(&spec),
    });
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| e.to_string())?;
    std::fs::write(&sidecar_path, text + "\n").map_err(io_err(&sidecar_path))?;
    writeln!(out, "{} {}", a.out.display(), item.spec_hash.to_hex()).map_err(|e| e.to_string())
}

fn verdict_json(session_id: &str, v: &Verdict) -> serde_json::Value {
    json!({
        "session_id": session_id,
        "label": v.label,
        "posterior": v.posterior.probs,
        "p_value": v.p_value,
        "n_items": v.n_items,
        "n_catch": v.n_catch,
        "catch_accuracy": v.catch_accuracy,
    })
}

fn test(a: TestArgs, out: &mut dyn Write) -> Result<(), String> {
    let cfg = a.config.load()?;
    let id = new_session_id();
    let (registry, sink): (InstanceRegistry, Box<dyn EventSink>) = match &a.data_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            (
                InstanceRegistry::open(dir.join("registry.jsonl"), false).map_err(|e| e.to_string())?,
                Box::new(FileSink::open(FileSink::log_path(dir, &id)).map_err(|e| e.to_string())?),
            )
        }
        None => (InstanceRegistry::in_memory(false), Box::new(NullSink)),
    };
    let mut session =
        Session::create_with_id(&id, &a.subject, cfg, Arc::new(registry), sink).map_err(|e| e.to_string())?;
    let agent = ExternalAgent::spawn(&a.agent[0], &a.agent[1..], Duration::from_secs(a.timeout_secs))
        .map_err(|e| e.to_string())?;
    let mut policy = AgentPolicy::External(Box::new(agent));
    let verdict = run_agent_session(&mut policy, &mut session).map_err(|e| e.to_string())?;
    writeln!(out, "{}", verdict_json(&id, &verdict)).map_err(|e| e.to_string())
}

#[derive(Default)]
struct Tally {
    runs: u32,
    perceiver: u32,
    veridical: u32,
    guess: u32,
    inconclusive: u32,
    items: u64,
}

impl Tally {
    fn add(&mut self, v: &Verdict) {
        self.runs += 1;
        self.items += u64::from(v.n_items);
        match v.label {
            VerdictLabel::Perceiver => self.perceiver += 1,
            VerdictLabel::Veridical => self.veridical += 1,
            VerdictLabel::Guess => self.guess += 1,
            VerdictLabel::Inconclusive => self.inconclusive += 1,
        }
    }
}

fn make_policy(p: SimPolicy, epsilon: f64, seed: u64, cfg: &TestConfig) -> AgentPolicy {
    match p {
        SimPolicy::Perceiver => AgentPolicy::PerceiverSimulant { epsilon, seed },
        SimPolicy::Veridical => AgentPolicy::VeridicalSimulant { epsilon, seed },
        SimPolicy::Guesser => AgentPolicy::RandomGuesser { seed },
        SimPolicy::Vision => AgentPolicy::ImagePerceiver { bias: cfg.bias },
        SimPolicy::All => unreachable!("expanded by caller"),
    }
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<(), String> {
    let cfg = a.config.load()?;
    let policies = match a.policy {
        SimPolicy::All => vec![SimPolicy::Perceiver, SimPolicy::Veridical, SimPolicy::Guesser, SimPolicy::Vision],
        p => vec![p],
    };
    let w = |e: std::io::Error| e.to_string();
    writeln!(out, "{:<10} {:>5} {:>9} {:>9} {:>6} {:>12} {:>10}", "policy", "runs", "perceiver", "veridical", "guess", "inconclusive", "mean_items")
        .map_err(w)?;
    for p in policies {
        let started = Instant::now();
        let mut tally = Tally::default();
        for r in 0..a.runs {
            let mut policy = make_policy(p, a.epsilon, u64::from(r), &cfg);
            let v = run_simulated_session(&mut policy, &format!("sim-{r}"), cfg.clone()).map_err(|e| e.to_string())?;
            tally.add(&v);
        }
        let name = format!("{p:?}").to_lowercase();
        let mean = if tally.runs == 0 { 0.0 } else { tally.items as f64 / f64::from(tally.runs) };
        writeln!(
            out,
            "{name:<10} {:>5} {:>9} {:>9} {:>6} {:>12} {mean:>10.2}  ({:.2?})",
            tally.runs,
            tally.perceiver,
            tally.veridical,
            tally.guess,
            tally.inconclusive,
            started.elapsed()
        )
        .map_err(w)?;
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), String> {
    let cfg = service::ServiceConfig {
        bind: a.bind,
        port: a.port,
        data_dir: a.data_dir,
        defaults: a.config.load()?,
        global_registry: a.global_registry,
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(service::serve(cfg)).map_err(|e| e.to_string())
}

fn report(a: ReportArgs, out: &mut dyn Write) -> Result<(), String> {
    let file = std::fs::File::open(&a.log).map_err(io_err(&a.log))?;
    let registry = Arc::new(InstanceRegistry::in_memory(false));
    let session = Session::replay(file, registry, Box::new(NullSink)).map_err(|e| e.to_string())?;
    let value = if a.full {
        serde_json::to_value(session.snapshot()).map_err(|e| e.to_string())?
    } else {
        let items: Vec<_> = session
            .issued()
            .iter()
            .map(|i| {
                let answer = session.answers().iter().find(|r| r.item_id == i.item.item_id);
                item_row(&i.item, answer.and_then(|r| r.choice))
            })
            .collect();
        json!({
            "session_id": session.session_id(),
            "subject_id": session.subject_id(),
            "state": session.state(),
            "posterior": session.posterior().probs,
            "verdict": session.verdict().map(|v| verdict_json(session.session_id(), v)),
            "items": items,
        })
    };
    let text = serde_json::to_string_pretty(&value).map_err(|e| e.to_string())?;
    writeln!(out, "{text}").map_err(|e| e.to_string())
}

fn item_row(item: &QuestionItem, choice: Option<usize>) -> serde_json::Value {
    let outcome = match choice {
        None => "none",
        Some(c) if c == item.illusion_idx && c == item.veridical_idx => "both",
        Some(c) if c == item.illusion_idx => "illusion",
        Some(c) if c == item.veridical_idx => "veridical",
        Some(_) => "other",
    };
    json!({
        "item_id": item.item_id,
        "kind": item.kind,
        "is_catch": item.is_catch,
        "choice": choice,
        "matched": outcome,
    })
}

fn verify(out: &mut dyn Write) -> Result<(), String> {
    let entries = load_corpus(GOLDEN_CORPUS).map_err(|e| e.to_string())?;
    let bad = verify_corpus(&entries);
    for m in &bad {
        writeln!(out, "mismatch #{}: {}", m.index, m.what).map_err(|e| e.to_string())?;
    }
    if bad.is_empty() {
        writeln!(out, "{} golden renders match", entries.len()).map_err(|e| e.to_string())
    } else {
        Err(format!("{} of {} golden renders differ", bad.len(), entries.len()))
    }
}
