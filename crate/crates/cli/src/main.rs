mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use inac::agents::{mean_stderr, LearningCurve};
use inac::data::{estimate_behavior, read_dataset, write_dataset, OfflineDataset};
use inac::envs::{rollout, EpisodeSimulator, FourRooms, DEFAULT_HORIZON, GAMMA};
use inac::experiment::{generate_dataset, run_sweep, ExperimentConfig, Recipe, DEFAULT_N, ENV_NAME};
use inac::mdp::{
    exact_policy_value, parse_mdp_text, parse_policy_csv, write_policy_csv, write_qtable_csv, Policy, SupportSet,
    TabularMdp,
};
use inac::operators::{BackupKind, Temperature};
use inac::solvers::{insample_soft_policy_iteration, value_iteration, SolveOptions};
use inac::verify::{self, Suite};
use inac::QTable;

use plot::{render_svg, Metric};

#[derive(Parser)]
#[command(name = "inac", version, about = "Offline RL with the in-sample softmax: solvers, agents and checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an offline dataset
    GenData(GenDataArgs),
    /// Solve an MDP exactly
    Solve(SolveArgs),
    /// Train an agent, optionally sweeping learning rates and seeds
    Train(TrainArgs),
    /// Evaluate a policy checkpoint
    Eval(EvalArgs),
    /// Run the randomized property suites
    Verify(VerifyArgs),
    /// Plot learning curves to SVG
    Plot(PlotArgs),
}

#[derive(clap::Args)]
struct GenDataArgs {
    #[arg(long, default_value = ENV_NAME)]
    env: String,
    /// expert, random, mixed or missing-action
    #[arg(long)]
    recipe: Recipe,
    #[arg(long, default_value_t = DEFAULT_N)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = GAMMA)]
    gamma: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    HardVi,
    SoftVi,
    InsampleHardVi,
    InsampleSoftVi,
    InsampleSoftPi,
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Built-in environment; ignored when --mdp is given
    #[arg(long, default_value = ENV_NAME)]
    env: String,
    /// MDP in the text format instead of a built-in environment
    #[arg(long)]
    mdp: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long, default_value_t = 0.01)]
    tau: f64,
    /// Dataset giving the behavior support (in-sample methods)
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Start state for the reported value; defaults to the environment start, or 0
    #[arg(long)]
    start: Option<usize>,
    /// Q table CSV
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration residual CSV
    #[arg(long)]
    report: Option<PathBuf>,
    /// Greedy (hard methods) or soft-greedy (soft methods) policy CSV
    #[arg(long)]
    policy: Option<PathBuf>,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Flat `key = value` config file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// inac, oracle-max or fqi
    #[arg(long)]
    agent: Option<String>,
    #[arg(long)]
    recipe: Option<String>,
    /// Dataset file; generated from the recipe when absent
    #[arg(long)]
    data: Option<String>,
    /// Comma-separated learning rates
    #[arg(long)]
    lrs: Option<String>,
    /// `0,1,2` or `0..10`
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    updates: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    /// +10, 0 or -20
    #[arg(long, allow_hyphen_values = true)]
    init: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    /// Any config key, as key=value; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Worker threads; output does not depend on it
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Policy CSV written by `train` or `solve`
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, default_value = ENV_NAME)]
    env: String,
    #[arg(long, default_value_t = 5)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: usize,
    #[arg(long, default_value_t = GAMMA)]
    gamma: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: Suite,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PlotMetric {
    Return,
    Value,
}

#[derive(clap::Args)]
struct PlotArgs {
    #[arg(required = true)]
    curves: Vec<PathBuf>,
    /// Comma-separated legend labels; file stems by default
    #[arg(long)]
    labels: Option<String>,
    #[arg(long, value_enum, default_value = "return")]
    metric: PlotMetric,
    #[arg(long, default_value = "")]
    title: String,
    #[arg(long)]
    out: PathBuf,
}

fn env_or_err(name: &str, gamma: f64) -> Result<FourRooms<f64>> {
    if name != ENV_NAME {
        bail!("unknown env `{name}` (available: {ENV_NAME})");
    }
    Ok(FourRooms::with_gamma(gamma)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let env = env_or_err(&a.env, a.gamma)?;
    let data = generate_dataset(&env, a.recipe, a.n, a.seed)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_dataset(&data, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let parts: Vec<String> = data.source_counts().iter().map(|(k, n)| format!("{k}={n}")).collect();
    println!("wrote {} transitions ({}) to {}", data.len(), parts.join(" "), a.out.display());
    Ok(())
}

/// Behavior support of a dataset. States absent from the data count as fully
/// supported, so value and policy iteration solve the same problem.
fn behavior_from_data(path: &Path, mdp: &TabularMdp<f64>) -> Result<Policy<f64>> {
    let data: OfflineDataset<f64> =
        read_dataset(path).with_context(|| format!("reading dataset {}", path.display()))?;
    Ok(estimate_behavior(&data, mdp.n_states(), mdp.n_actions())?.to_policy_with_uniform_fallback())
}

fn solve(a: SolveArgs) -> Result<()> {
    let (mdp, default_start) = match &a.mdp {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            (parse_mdp_text::<f64>(&text)?, 0)
        }
        None => {
            let env = env_or_err(&a.env, a.gamma)?;
            let start = env.start_state();
            (env.mdp().clone(), start)
        }
    };
    let start = a.start.unwrap_or(default_start);
    if start >= mdp.n_states() {
        bail!("start state {start} out of range for {} states", mdp.n_states());
    }
    let tau = Temperature::new(a.tau)?;
    let in_sample = matches!(a.method, Method::InsampleHardVi | Method::InsampleSoftVi | Method::InsampleSoftPi);
    let beta = match (&a.data, in_sample) {
        (Some(p), true) => Some(behavior_from_data(p, &mdp)?),
        (None, true) => bail!("in-sample methods need --data"),
        _ => None,
    };
    let support = beta.as_ref().map(SupportSet::from_policy);
    let kind = match a.method {
        Method::HardVi => BackupKind::HardMax,
        Method::SoftVi => BackupKind::SoftMax(tau),
        Method::InsampleHardVi => BackupKind::InSampleHardMax(support.clone().expect("checked above")),
        Method::InsampleSoftVi | Method::InsampleSoftPi => {
            BackupKind::InSampleSoftMax(support.clone().expect("checked above"), tau)
        }
    };
    let opts = SolveOptions::default().with_tol(a.tol).with_max_iter(a.max_iter);
    let (q, report_csv, iterations, converged): (QTable<f64>, String, usize, bool) = match a.method {
        Method::InsampleSoftPi => {
            let beta = beta.as_ref().expect("checked above");
            let out = insample_soft_policy_iteration(&mdp, beta, tau, a.tol, a.max_iter)?;
            let csv = out.report.to_csv();
            (out.q, csv, out.report.iterations, out.report.converged)
        }
        _ => {
            let zero = QTable::zeros(mdp.n_states(), mdp.n_actions());
            let out = value_iteration(&mdp, &kind, &zero, &opts)?;
            let csv = out.to_csv();
            (out.q, csv, out.iterations, out.converged)
        }
    };
    let v = kind
        .state_value(q.row(start), start)
        .ok_or_else(|| anyhow!("start state has no supported action"))?;
    write(&a.out, &write_qtable_csv(&q))?;
    if let Some(p) = &a.report {
        write(p, &report_csv)?;
    }
    if let Some(p) = &a.policy {
        let pi = match (&kind, &beta) {
            (BackupKind::SoftMax(t), _) => {
                let uniform = inac::mdp::uniform_policy(mdp.n_states(), mdp.n_actions());
                inac::operators::insample_softmax_policy_table(&q, &uniform, *t)?
            }
            (BackupKind::InSampleSoftMax(_, t), Some(b)) => inac::operators::insample_softmax_policy_table(&q, b, *t)?,
            _ => {
                let full = SupportSet::full(mdp.n_states(), mdp.n_actions());
                inac::mdp::greedy_policy(&q, support.as_ref().unwrap_or(&full))?
            }
        };
        write(p, &write_policy_csv(&pi))?;
    }
    println!("method,iterations,converged,start_state,start_value");
    println!(
        "{},{iterations},{converged},{start},{v:?}",
        a.method.to_possible_value().expect("no skipped variants").get_name()
    );
    if !converged {
        eprintln!("warning: stopped after {iterations} iterations without converging");
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    if let Some(p) = &a.config {
        let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
        cfg.apply(&text).with_context(|| format!("in config {}", p.display()))?;
    }
    let flags = [
        ("agent", &a.agent),
        ("recipe", &a.recipe),
        ("data", &a.data),
        ("lrs", &a.lrs),
        ("seeds", &a.seeds),
        ("updates", &a.updates),
        ("tau", &a.tau),
        ("batch_size", &a.batch_size),
        ("init", &a.init),
        ("out_dir", &a.out_dir),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    for kv in &a.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects key=value, got `{kv}`"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    let env = env_or_err(&cfg.env, cfg.gamma)?;
    let data = match &cfg.data {
        Some(p) => read_dataset::<f64>(p).with_context(|| format!("reading dataset {p}"))?,
        None => generate_dataset(&env, cfg.recipe, cfg.n, cfg.data_seed)?,
    };
    let jobs = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let sweep = run_sweep(cfg.agent, &data, &cfg.train, &cfg.lrs, &cfg.seeds, &env, jobs)?;

    let dir = PathBuf::from(&cfg.out_dir);
    write(&dir.join("config.txt"), &cfg.to_text())?;
    for e in &sweep.entries {
        for (seed, curve) in e.seeds.iter().zip(&e.curves) {
            write(&dir.join(format!("curve_lr{:?}_seed{seed}.csv", e.lr)), &curve.to_csv())?;
        }
        write(&dir.join(format!("mean_lr{:?}.csv", e.lr)), &e.mean_curve().to_csv())?;
    }
    let best = sweep.best_entry();
    write(&dir.join("best.csv"), &best.mean_curve().to_csv())?;
    write(&dir.join("policy.csv"), &write_policy_csv(&best.policies[0]))?;
    let summary = sweep.summary_csv();
    write(&dir.join("summary.csv"), &summary)?;
    print!("{summary}");
    println!("best lr {:?}; outputs in {}", best.lr, dir.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let env = env_or_err(&a.env, a.gamma)?;
    let text = fs::read_to_string(&a.policy).with_context(|| format!("reading {}", a.policy.display()))?;
    let pi: Policy<f64> = parse_policy_csv(&text).with_context(|| format!("parsing {}", a.policy.display()))?;
    let mdp = env.mdp();
    if (pi.n_states(), pi.n_actions()) != (mdp.n_states(), mdp.n_actions()) {
        bail!(
            "policy covers {} states x {} actions but {} has {} x {}",
            pi.n_states(),
            pi.n_actions(),
            a.env,
            mdp.n_states(),
            mdp.n_actions()
        );
    }
    if a.episodes == 0 {
        bail!("--episodes must be positive");
    }
    let exact = exact_policy_value(mdp, &pi)?.get(env.start_state());
    let mut sim = EpisodeSimulator::new(mdp, env.start_state(), a.horizon, a.seed);
    let returns: Vec<f64> = (0..a.episodes).map(|_| rollout(&mut sim, &pi).ret).collect();
    let (mean, stderr) = mean_stderr(&returns);
    let csv = format!(
        "exact_start_value,rollout_return_mean,rollout_return_stderr,episodes\n{exact:?},{mean:?},{stderr:?},{}\n",
        a.episodes
    );
    print!("{csv}");
    if let Some(p) = &a.out {
        write(p, &csv)?;
    }
    Ok(())
}

fn run_verify(a: VerifyArgs) -> Result<ExitCode> {
    let report = verify::run(a.suite, a.seed);
    print!("{}", report.to_text());
    if let Some(p) = &a.out {
        write(p, &report.to_csv())?;
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run_plot(a: PlotArgs) -> Result<()> {
    let labels: Vec<String> = match &a.labels {
        Some(l) => l.split(',').map(|s| s.trim().to_string()).collect(),
        None => a
            .curves
            .iter()
            .map(|p| p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()))
            .collect(),
    };
    if labels.len() != a.curves.len() {
        bail!("{} labels for {} curves", labels.len(), a.curves.len());
    }
    let mut curves = Vec::with_capacity(a.curves.len());
    for (p, label) in a.curves.iter().zip(labels) {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let c = LearningCurve::from_csv(&text).with_context(|| format!("parsing {}", p.display()))?;
        curves.push((label, c));
    }
    let metric = match a.metric {
        PlotMetric::Return => Metric::Return,
        PlotMetric::Value => Metric::ExactValue,
    };
    write(&a.out, &render_svg(&curves, metric, &a.title))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::GenData(a) => gen_data(a).map(|_| ExitCode::SUCCESS),
        Cmd::Solve(a) => solve(a).map(|_| ExitCode::SUCCESS),
        Cmd::Train(a) => train(a).map(|_| ExitCode::SUCCESS),
        Cmd::Eval(a) => eval(a).map(|_| ExitCode::SUCCESS),
        Cmd::Verify(a) => run_verify(a),
        Cmd::Plot(a) => run_plot(a).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
