use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use condtest::calibration::{bootstrap, BootstrapConfig, BootstrapMethod};
use condtest::harness::io::{read_config, read_dataset, write_dataset, write_json, write_report, write_rows};
use condtest::harness::{
    monitor, run_sweep, CalibrateConfig, LinearSystem, MonitorConfig, SimulateConfig, SweepConfig,
};
use condtest::harness::dynamics::simulate_trajectories;
use condtest::rng::derive_seed;
use condtest::testing::Pipeline;
use condtest::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "condtest", version, about = "Kernel conditional two-sample tests")]
struct Cli {
    /// Root seed for every random stream.
    #[arg(long, global = true, env = "CONDTEST_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "CONDTEST_THREADS")]
    threads: Option<usize>,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test two data sets and write the per-covariate report.
    Test {
        first: PathBuf,
        second: PathBuf,
        /// Covariates to test instead of the union of both data sets.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Bootstrap the threshold multiplier of one data set.
    Calibrate {
        data: PathBuf,
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// Error-rate sweep over a synthetic scenario.
    Sweep,
    /// Sliding-window change detection on a simulated system.
    Monitor,
    /// Simulate transition pairs of a random orthonormal system.
    Simulate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Naive,
    Wild,
    WildStudentized,
}

impl From<Method> for BootstrapMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Naive => BootstrapMethod::Naive,
            Method::Wild => BootstrapMethod::Wild,
            Method::WildStudentized => BootstrapMethod::WildStudentized,
        }
    }
}

fn config_path(cli: &Cli) -> Result<&Path> {
    cli.config.as_deref().ok_or_else(|| Error::Input("--config <file> is required for this command".into()))
}

fn problems(list: Vec<String>, origin: &Path) -> Result<()> {
    if list.is_empty() {
        return Ok(());
    }
    let mut msg = format!("{} has {} problem(s):", origin.display(), list.len());
    for p in list {
        msg.push_str("\n  - ");
        msg.push_str(&p);
    }
    Err(Error::Parameter(msg))
}

fn run_test_command(cli: &Cli, first: &Path, second: &Path, grid: Option<&Path>) -> Result<()> {
    let path = config_path(cli)?;
    let pipeline: Pipeline = read_config(path)?;
    problems(pipeline.problems(), path)?;
    let d1 = read_dataset(first)?;
    let d2 = read_dataset(second)?;
    let grid = grid.map(read_dataset).transpose()?;
    let run = pipeline.run(&d1, &d2, grid.as_ref().map(|g| g.covariates()), cli.seed)?;
    write_report(&cli.out.join("report.csv"), &run.report)?;
    let region = json!({
        "seed": cli.seed,
        "tested": run.report.records.len(),
        "rejections": run.report.records.iter().filter(|r| r.reject).count(),
        "rejection_region": run.report.rejection_region(),
        "beta1": run.thr1.beta,
        "beta2": run.thr2.beta,
        "threshold_source": run.thr1.source,
        "factorizations": run.calibration1.as_ref().zip(run.calibration2.as_ref()).map(|(a, b)| a.factorizations + b.factorizations),
    });
    write_json(&cli.out.join("region.json"), &region)
}

fn run_calibrate(cli: &Cli, data: &Path, method: Option<Method>) -> Result<()> {
    let path = config_path(cli)?;
    let mut cfg: CalibrateConfig = read_config(path)?;
    if let Some(m) = method {
        cfg.method = m.into();
    }
    problems(cfg.problems(), path)?;
    let data = read_dataset(data)?;
    let bc = BootstrapConfig {
        replicates: cfg.replicates,
        alpha: cfg.alpha,
        split: cfg.split,
        side: cfg.side,
        grid: None,
        seed: cli.seed,
    };
    let result = bootstrap(cfg.method, &data, &cfg.input_kernel, &cfg.output_kernel, cfg.lambda, &bc)?;
    write_json(&cli.out.join("calibration.json"), &json!({ "seed": cli.seed, "config": cfg, "result": result }))
}

fn run_sweep_command(cli: &Cli) -> Result<()> {
    let path = config_path(cli)?;
    let cfg: SweepConfig = read_config(path)?;
    problems(cfg.problems(), path)?;
    let result = run_sweep(&cfg, cli.seed)?;
    write_rows(&cli.out.join("sweep_rows.csv"), &result.rows)?;
    write_rows(&cli.out.join("sweep_summary.csv"), &result.summary)?;
    write_json(&cli.out.join("sweep.json"), &json!({ "seed": cli.seed, "config": cfg }))
}

fn run_monitor(cli: &Cli) -> Result<()> {
    let path = config_path(cli)?;
    let cfg: MonitorConfig = read_config(path)?;
    problems(cfg.problems(), path)?;
    let run = monitor(&cfg, cli.seed)?;
    write_rows(&cli.out.join("monitor.csv"), &run.rows)?;
    let summary = json!({
        "seed": cli.seed,
        "config": cfg,
        "beta_reference": run.beta_reference,
        "perturbation": run.perturbation,
        "detection_delay": run.detection_delay(cfg.change_step),
        "false_alarms": run.false_alarms(),
        "warm_up_alarms": run.warm_up_alarms(),
    });
    write_json(&cli.out.join("monitor.json"), &summary)
}

fn run_simulate(cli: &Cli) -> Result<()> {
    let path = config_path(cli)?;
    let cfg: SimulateConfig = read_config(path)?;
    problems(cfg.problems(), path)?;
    let sys = LinearSystem::random(cfg.dim, cfg.noise_std, derive_seed(cli.seed, &[0]))?;
    let data = simulate_trajectories(&sys, cfg.trajectories, cfg.steps, derive_seed(cli.seed, &[1]))?;
    write_dataset(&cli.out.join("transitions.csv"), &data)?;
    let rows: Vec<Vec<f64>> = (0..sys.dim()).map(|i| sys.a.row(i).iter().copied().collect()).collect();
    write_json(&cli.out.join("system.json"), &json!({ "seed": cli.seed, "config": cfg, "a": rows }))
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Parameter(format!("cannot start {n} threads: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Test { first, second, grid } => run_test_command(cli, first, second, grid.as_deref()),
        Command::Calibrate { data, method } => run_calibrate(cli, data, *method),
        Command::Sweep => run_sweep_command(cli),
        Command::Monitor => run_monitor(cli),
        Command::Simulate => run_simulate(cli),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
