use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use fpu_lyapunov::fit::EpsWindow;
use fpu_lyapunov::harness::report::{fit_csv, theory_csv};
use fpu_lyapunov::harness::sweep::RunStatus;
use fpu_lyapunov::harness::{
    collect_records, default_out, execute_runs, fit_records, theory_table, toda_check, ExperimentConfig,
    HarnessError, SweepOptions, SweepReport, TodaCheckConfig,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_COMPUTE: u8 = 3;
const EXIT_FLAGGED: u8 = 4;
const EXIT_INTERRUPTED: u8 = 5;

#[derive(Parser)]
#[command(name = "fpu-lyap", version, about = "Lyapunov exponents of FPU-type chains")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// One (model, N, eps) ensemble.
    Run(RunArgs),
    /// Every (N, eps) pair of the lists, resumable.
    Sweep(RunArgs),
    /// Theory curves over an eps grid.
    Theory(TheoryArgs),
    /// Power-law fits over a results directory.
    Fit(FitArgs),
    /// Spurious chaos of the Toda lattice versus time step.
    TodaCheck(TodaArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name, e.g. alpha-beta, pure-beta, toda.
    #[arg(long)]
    model: Option<String>,
    /// Number of springs; comma-separated list for sweeps.
    #[arg(long = "N", value_delimiter = ',')]
    n: Vec<usize>,
    /// Specific energy E/N; comma-separated list for sweeps.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Integration time; default max(1e6, 200/chi estimate).
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    t_max_cap: Option<f64>,
    /// Members per ensemble (default 24).
    #[arg(long)]
    ensemble: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seed of the initial tangent vectors; defaults to --seed.
    #[arg(long)]
    xi_seed: Option<u64>,
    #[arg(long)]
    renorm_every: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    toda_c: Option<f64>,
    /// Output root; defaults to $FPU_LYAP_OUT, then ./results.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Continue from existing checkpoints.
    #[arg(long)]
    resume: bool,
    /// Stop after this many integration steps in total, keeping checkpoints.
    #[arg(long)]
    max_steps: Option<u64>,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    n_mc: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    /// Inclusive eps range `lo,hi`; per-model defaults otherwise.
    #[arg(long, value_delimiter = ',')]
    eps_window: Vec<f64>,
}

#[derive(Args)]
struct TodaArgs {
    #[arg(long = "N", default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 8e-4)]
    eps: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.2, 0.4])]
    dt_list: Vec<f64>,
    #[arg(long, default_value_t = 0.24)]
    sweep_dt: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [8e-4, 2e-3, 5e-3, 1e-2])]
    sweep_eps: Vec<f64>,
    #[arg(long, default_value_t = 1e5)]
    t_max: f64,
    #[arg(long, default_value_t = 8)]
    ensemble: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    max_steps: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<HarnessError>().is_some_and(HarnessError::is_config)
                || e.downcast_ref::<ConfigError>().is_some();
            ExitCode::from(if config { EXIT_CONFIG } else { EXIT_COMPUTE })
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct ConfigError(String);

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Run(a) => run(a, true),
        Cmd::Sweep(a) => run(a, false),
        Cmd::Theory(a) => theory(a),
        Cmd::Fit(a) => fit(a),
        Cmd::TodaCheck(a) => toda(a),
    }
}

fn experiment(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&a.config, &a.model) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(m)) => ExperimentConfig::new(m, Vec::new(), Vec::new()),
        (None, None) => return Err(config_err("either --config or --model is required")),
    };
    if let Some(m) = &a.model {
        cfg.model.clone_from(m);
    }
    if !a.n.is_empty() {
        cfg.n.clone_from(&a.n);
    }
    if !a.eps.is_empty() {
        cfg.eps.clone_from(&a.eps);
    }
    macro_rules! set_opt {
        ($($f:ident),*) => { $( if a.$f.is_some() { cfg.$f = a.$f; } )* };
    }
    set_opt!(dt, t_max, t_max_cap, xi_seed, alpha, beta, gamma, delta, toda_c);
    if let Some(v) = a.ensemble {
        cfg.ensemble = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.renorm_every {
        cfg.renorm_every = v;
    }
    if let Some(v) = a.workers {
        cfg.workers = v;
    }
    if let Some(o) = &a.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(default_out)
}

fn run(a: RunArgs, single: bool) -> Result<u8> {
    let cfg = experiment(&a)?;
    if single && (cfg.n.len() != 1 || cfg.eps.len() != 1) {
        return Err(config_err("run takes exactly one N and one eps; use sweep for lists"));
    }
    for w in cfg.validate()? {
        eprintln!("warning: {w}");
    }
    let out = out_dir(cfg.out.clone());
    let specs = cfg.plan()?;
    let mut opts = SweepOptions::from_config(&cfg);
    opts.resume = a.resume;
    opts.step_budget = a.max_steps;
    eprintln!("{} run(s) -> {}", specs.len(), out.display());
    let report = execute_runs(&specs, &out, &opts)?;
    Ok(summarize(&report))
}

fn summarize(report: &SweepReport) -> u8 {
    println!("model\tN\teps\tdt\tchi\terr\tplateau\tflags\tdir");
    for r in &report.runs {
        match &r.status {
            RunStatus::Completed(rec) | RunStatus::Skipped(rec) => println!(
                "{}\t{}\t{:e}\t{}\t{:.6e}\t{:.2e}\t{}\t{}\t{}",
                rec.model,
                rec.n,
                rec.eps,
                rec.dt,
                rec.level(),
                rec.err,
                rec.plateau_found,
                rec.flags.join(","),
                r.dir.display()
            ),
            RunStatus::Interrupted { members_done, members } => {
                println!("interrupted: {members_done}/{members} members done in {}", r.dir.display())
            }
        }
    }
    if report.interrupted() {
        EXIT_INTERRUPTED
    } else if report.flagged() {
        EXIT_FLAGGED
    } else {
        0
    }
}

fn theory(a: TheoryArgs) -> Result<u8> {
    let mut cfg = match (&a.config, &a.model) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(m)) => ExperimentConfig::new(m, Vec::new(), Vec::new()),
        (None, None) => return Err(config_err("either --config or --model is required")),
    };
    if let Some(m) = &a.model {
        cfg.model.clone_from(m);
    }
    if let Some(n) = a.n {
        cfg.n = vec![n];
    }
    if !a.eps.is_empty() {
        cfg.eps = a.eps.clone();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let out = out_dir(a.out.or(cfg.out.clone()));
    for &n in &cfg.n {
        let model = cfg.build_model(n)?;
        let rows = theory_table(&model, &cfg.eps, a.n_mc, cfg.seed)?;
        let csv = theory_csv(&model, cfg.seed, &rows);
        let path = out.join(model.label()).join(format!("theory_N{n}.csv"));
        write_text(&path, &csv)?;
        print!("{csv}");
        eprintln!("wrote {}", path.display());
    }
    Ok(0)
}

fn fit(a: FitArgs) -> Result<u8> {
    let out = out_dir(a.out);
    let window = match a.eps_window.as_slice() {
        [] => None,
        [lo, hi] if lo <= hi => Some(EpsWindow::new(*lo, *hi)),
        _ => return Err(config_err("--eps-window takes lo,hi with lo <= hi")),
    };
    let records = collect_records(&out).with_context(|| format!("reading results under {}", out.display()))?;
    if records.is_empty() {
        return Err(config_err(format!("no summary.json found under {}", out.display())));
    }
    let report = fit_records(&records, window);
    let csv = fit_csv(&report.rows);
    write_text(&out.join("fit.csv"), &csv)?;
    print!("{csv}");
    for (model, dt, s) in &report.slopes {
        let a: Vec<String> = s.entries.iter().map(|e| format!("N={}: {:.3}±{:.3}", e.n, e.a, e.a_stderr)).collect();
        println!("# slope vs N for {model} dt={dt}: {} ({:?})", a.join(", "), s.trend);
    }
    for (model, n, dt, why) in &report.skipped {
        eprintln!("skipped {model} N={n} dt={dt}: {why}");
    }
    if report.no_plateau > 0 {
        eprintln!("{} record(s) without a plateau left out", report.no_plateau);
    }
    Ok(0)
}

fn toda(a: TodaArgs) -> Result<u8> {
    let cfg = TodaCheckConfig {
        n: a.n,
        eps: a.eps,
        dt_list: a.dt_list,
        sweep_dt: a.sweep_dt,
        sweep_eps: a.sweep_eps,
        t_max: a.t_max,
        ensemble: a.ensemble,
        seed: a.seed,
    };
    let out = out_dir(a.out);
    let opts = SweepOptions {
        resume: a.resume,
        workers: a.workers.unwrap_or(0),
        step_budget: a.max_steps,
        ..SweepOptions::default()
    };
    let (sweep, report) = toda_check(&cfg, &out, &opts)?;
    let Some(report) = report else {
        return Ok(summarize(&sweep));
    };
    println!("scan\tdt\teps\tlevel\tplateau");
    for (scan, rows) in [("dt", &report.dt_scan), ("eps", &report.eps_scan)] {
        for r in rows {
            println!("{scan}\t{}\t{:e}\t{:.6e}\t{}", r.dt, r.eps, r.level, r.plateau_found);
        }
    }
    println!("strictly increasing in dt: {}", report.increasing);
    match (&report.fit, &report.fit_error) {
        (Some(f), _) => println!("spurious power law at dt={}: a = {:.3} ± {:.3}", cfg.sweep_dt, f.a, f.a_stderr),
        (None, Some(e)) => println!("no fit: {e}"),
        _ => {}
    }
    Ok(0)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
