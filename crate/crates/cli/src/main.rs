use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dpdp_core::dispatcher::DispatcherConfig;
use dpdp_core::io::{self, GeneratorSpec, Report};
use dpdp_core::model::{Instance, Seconds};
use dpdp_core::par::ExecMode;
use dpdp_core::sdp::{read_episode_log, write_episode_log, EpisodeOptions, ReplayDispatcher};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dpdp", version, about = "Dynamic pickup-and-delivery simulator and dispatcher")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance.
    Generate(GenerateArgs),
    /// Run one episode with the dispatcher.
    Run(RunArgs),
    /// Run a grid of λ3/λ4 settings over one or more instances.
    Sweep(SweepArgs),
    /// Check an instance file, and optionally a report against it.
    Validate(ValidateArgs),
    /// Re-simulate a logged episode.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// group1..group8, congested or sparse.
    #[arg(long, conflicts_with = "spec")]
    preset: Option<String>,
    /// Generator spec as JSON.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Instance parameter overrides shared by `run` and `sweep`.
#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long, env = "DPDP_LAMBDA1")]
    lambda1: Option<f64>,
    #[arg(long, env = "DPDP_LAMBDA2")]
    lambda2: Option<f64>,
    #[arg(long, env = "DPDP_LAMBDA3")]
    lambda3: Option<f64>,
    #[arg(long, env = "DPDP_LAMBDA4")]
    lambda4: Option<f64>,
    /// Urgency threshold U in seconds.
    #[arg(long, env = "DPDP_URGENCY")]
    urgency: Option<Seconds>,
    #[arg(long, env = "DPDP_EPOCH_LENGTH")]
    epoch_length: Option<Seconds>,
    #[arg(long, env = "DPDP_DOCK_APPROACH")]
    dock_approach: Option<Seconds>,
}

impl ParamArgs {
    fn apply(&self, inst: &mut Instance) -> Result<()> {
        let p = &mut inst.params;
        let m = &mut p.multipliers;
        if let Some(x) = self.lambda1 {
            m.lambda1 = x;
        }
        if let Some(x) = self.lambda2 {
            m.lambda2 = x;
        }
        if let Some(x) = self.lambda3 {
            m.lambda3 = x;
        }
        if let Some(x) = self.lambda4 {
            m.lambda4 = x;
        }
        if let Some(x) = self.urgency {
            p.urgency_threshold = x;
        }
        if let Some(x) = self.epoch_length {
            p.epoch_length = x;
        }
        if let Some(x) = self.dock_approach {
            p.dock_approach_time = x;
        }
        let m = &p.multipliers;
        if !(m.lambda1 > 0.0 && m.lambda2 > 0.0 && m.lambda3 >= 0.0 && m.lambda4 >= 0.0) {
            bail!("lambda1 and lambda2 must be positive, lambda3 and lambda4 nonnegative");
        }
        if p.epoch_length <= 0 || p.dock_approach_time < 0 {
            bail!("epoch length must be positive and dock approach time nonnegative");
        }
        Ok(())
    }
}

#[derive(Args, Clone)]
struct SearchArgs {
    /// Wall-clock VNS budget per epoch.
    #[arg(long, env = "DPDP_VNS_SECONDS")]
    vns_seconds: Option<f64>,
    /// Neighbourhood scans per epoch.
    #[arg(long, env = "DPDP_VNS_ITERATIONS")]
    vns_iterations: Option<usize>,
    #[arg(long, env = "DPDP_SEED", default_value_t = 0)]
    seed: u64,
    /// Random kicks at local optima.
    #[arg(long, env = "DPDP_DISTURBANCE")]
    disturbance: bool,
    /// Evaluate candidates on one thread.
    #[arg(long)]
    sequential: bool,
    #[arg(long, default_value_t = 100_000)]
    max_epochs: usize,
}

impl SearchArgs {
    fn config(&self) -> Result<DispatcherConfig> {
        if self.vns_seconds.is_some_and(|s| s.is_nan() || s < 0.0) {
            bail!("--vns-seconds must be a nonnegative number");
        }
        Ok(DispatcherConfig {
            vns_budget_seconds: self.vns_seconds,
            vns_budget_iterations: self.vns_iterations,
            seed: self.seed,
            disturbance_enabled: self.disturbance,
            exec: if self.sequential { ExecMode::Sequential } else { ExecMode::Parallel },
            ..Default::default()
        })
    }

    fn options(&self) -> EpisodeOptions {
        EpisodeOptions {
            max_epochs: self.max_epochs,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = "DPDP_INSTANCE")]
    instance: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Directory for report.json, episode.jsonl and series.csv.
    #[arg(long, env = "DPDP_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, required = true, num_args = 1..)]
    instance: Vec<PathBuf>,
    /// λ3 values as fractions of λ2.
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75")]
    lambda3_fractions: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    lambda4_values: Vec<f64>,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// A report written by `run`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    instance: PathBuf,
    /// episode.jsonl written by `run`.
    #[arg(long)]
    log: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    /// Compare against this report.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn load(path: &Path) -> Result<Instance> {
    io::load_instance(path).with_context(|| format!("loading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn summary(r: &Report) -> String {
    format!(
        "{}: score {:.4} (distance {:.3}, tardiness {} s, waiting {} s) over {} epochs",
        r.instance, r.score, r.breakdown.distance, r.breakdown.tardiness_seconds, r.breakdown.waiting_seconds, r.epochs
    )
}

fn generate(args: GenerateArgs) -> Result<()> {
    let spec = match (&args.preset, &args.spec) {
        (Some(name), _) => GeneratorSpec::preset(name, args.seed).with_context(|| format!("unknown preset {name}"))?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).context("parsing generator spec")?
        }
        (None, None) => bail!("either --preset or --spec is required"),
    };
    let text = spec.document()?.to_json_pretty();
    match args.out {
        Some(p) => write(&p, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut inst = load(&args.instance)?;
    args.params.apply(&mut inst)?;
    let config = args.search.config()?;
    let out = io::run(&inst, &config, args.search.options())?;
    println!("{}", summary(&out.report));
    if let Some(dir) = args.out {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write(&dir.join("report.json"), &out.report.to_json_pretty())?;
        let mut log = Vec::new();
        write_episode_log(&mut log, &out.log)?;
        fs::write(dir.join("episode.jsonl"), log)?;
        let csv = fs::File::create(dir.join("series.csv"))?;
        io::write_series_csv(csv, &out.report.series)?;
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut instances = Vec::new();
    for p in &args.instance {
        let mut inst = load(p)?;
        args.params.apply(&mut inst)?;
        instances.push(inst);
    }
    let base = args.search.config()?;
    let lambda4 = if args.lambda4_values.is_empty() { vec![None] } else { args.lambda4_values.iter().map(|&x| Some(x)).collect() };
    let mut cells = Vec::new();
    for inst in &instances {
        for cfg in io::lambda3_grid(inst, &base, &args.lambda3_fractions) {
            for l4 in &lambda4 {
                let mut cfg = cfg.clone();
                if let (Some(m), Some(x)) = (cfg.multipliers.as_mut(), l4) {
                    m.lambda4 = *x;
                }
                cells.push((inst, cfg));
            }
        }
    }
    let results = io::sweep(&cells, args.search.options(), ExecMode::Parallel);
    let mut rows = Vec::new();
    for ((inst, cfg), r) in cells.iter().zip(results) {
        let m = cfg.multipliers.expect("grid sets multipliers");
        let r = r.with_context(|| format!("{} with lambda3 {} lambda4 {}", inst.name, m.lambda3, m.lambda4))?;
        println!("lambda3 {:.4} lambda4 {:.1} {}", m.lambda3, m.lambda4, summary(&r));
        rows.push(serde_json::json!({
            "instance": r.instance,
            "lambda3": m.lambda3,
            "lambda4": m.lambda4,
            "score": r.score,
            "breakdown": r.breakdown,
            "config_digest": r.config_digest,
            "report_digest": r.digest(),
        }));
    }
    if let Some(path) = args.out {
        write(&path, &serde_json::to_string_pretty(&rows)?)?;
    }
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<()> {
    let inst = load(&args.instance)?;
    println!(
        "{}: {} factories, {} vehicles, {} orders after splitting",
        inst.name,
        inst.factories.len(),
        inst.vehicles.len(),
        inst.orders.len()
    );
    if let Some(path) = args.report {
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let report: Report = serde_json::from_str(&text).context("parsing report")?;
        let score = report.audit(&inst)?;
        if score != report.score {
            bail!("recomputed score {score} differs from reported {}", report.score);
        }
        println!("report ok: score {score}");
    }
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<()> {
    let mut inst = load(&args.instance)?;
    args.params.apply(&mut inst)?;
    let text = fs::read_to_string(&args.log).with_context(|| format!("reading {}", args.log.display()))?;
    let log = read_episode_log(&text).context("parsing episode log")?;
    let mut d = ReplayDispatcher::from_log(&log);
    let (report, replayed) = io::run_with(&inst, &mut d, String::new(), EpisodeOptions::default(), false)?;
    let same_actions = replayed.len() == log.len() && replayed.iter().zip(&log).all(|(a, b)| a.action_digest == b.action_digest);
    if !same_actions {
        bail!("replayed actions differ from the log");
    }
    println!("{}", summary(&report));
    if let Some(path) = args.report {
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let original: Report = serde_json::from_str(&text).context("parsing report")?;
        if original.routes != report.routes || original.score != report.score {
            bail!("replay does not reproduce {}", path.display());
        }
        println!("replay matches {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => validate(a),
        Command::Replay(a) => replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
