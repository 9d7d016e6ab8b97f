//! Command-line harness: estimate derivatives from CSV data, generate test
//! scenarios, and run the benchmark grid.
//!
//! Exit codes: 0 success, 1 usage/config, 2 data error, 3 numerical failure.

use clap::{Args, Parser, Subcommand};
use splinediff::bench::{
    error_lines, results_table, run_grid, write_outputs, BenchConfig, BenchRow, Scenario,
};
use splinediff::csvio::{load_csv, save_csv, write_columns};
use splinediff::error::{Error, Result};
use splinediff::method::{lookup, MethodParams};
use splinediff::signal::{generate_grid, sample_signal, ScenarioSpec};
use splinediff::{solve_batch, SplineOrder};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "splinediff",
    about = "Spline differentiation of noisy, non-uniformly sampled signals",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the derivative of a two-column (t,y) CSV series.
    Estimate(EstimateArgs),
    /// Generate a sampled test-signal scenario as CSV.
    Simulate(SimulateArgs),
    /// Run the benchmark grid and emit results.csv / table.txt / plot data.
    Bench(BenchArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Input CSV (columns t,y; optional header).
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Output CSV of (t, z) estimates at the sample instants.
    #[arg(long, value_name = "PATH")]
    output: PathBuf,
    /// Method: spline2, spline0, levant, or hgo.
    #[arg(long, default_value = "spline2")]
    method: String,
    /// Spline order shorthand: 0 selects spline0, 1 selects spline2.
    #[arg(long)]
    order: Option<u8>,
    /// Penalty weight for the spline methods.
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    /// Online scenario: emit endpoint estimates from the recursive solver
    /// (or the baseline stream) instead of the batch fit.
    #[arg(long)]
    online: bool,
    /// Lipschitz bound for the Levant differentiator.
    #[arg(long = "levant-L", default_value_t = 2.5)]
    levant_l: f64,
    /// HGO bandwidth parameter.
    #[arg(long = "hgo-eps", default_value_t = 0.05)]
    hgo_eps: f64,
    /// HGO output saturation level.
    #[arg(long = "hgo-sat", default_value_t = 2.5)]
    hgo_sat: f64,
    /// Dense spline evaluation output (default: <output>.dense.csv for
    /// spline methods in batch mode).
    #[arg(long, value_name = "PATH")]
    dense_output: Option<PathBuf>,
    /// Dense evaluation points per interval.
    #[arg(long, default_value_t = 10)]
    resolution: usize,
}

#[derive(Args)]
struct SimulateArgs {
    /// Output CSV path.
    #[arg(long, value_name = "PATH")]
    output: PathBuf,
    /// Nominal sampling step; actual steps are Uniform([0.5h, 1.5h]).
    #[arg(long, default_value_t = 0.05)]
    h: f64,
    /// Measurement noise standard deviation.
    #[arg(long, default_value_t = 1e-4)]
    sigma: f64,
    /// Horizon T.
    #[arg(long, default_value_t = 1.95)]
    horizon: f64,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML grid configuration; omitted = the built-in five-row grid.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "bench-out")]
    out_dir: PathBuf,
    /// Override: number of seeds per cell.
    #[arg(long)]
    seeds: Option<u64>,
    /// Override: penalty weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Override: scenario, 'full' or 'online'.
    #[arg(long)]
    scenario: Option<String>,
    /// Override: single (h, sigma) row instead of the configured rows.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Override: base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override: fixed HGO bandwidth (skips tuning).
    #[arg(long = "hgo-eps")]
    hgo_eps: Option<f64>,
    /// Override: Levant Lipschitz bound.
    #[arg(long = "levant-L")]
    levant_l: Option<f64>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Bench(args) => cmd_bench(&args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn method_name(args: &EstimateArgs) -> Result<String> {
    match args.order {
        None => Ok(args.method.clone()),
        Some(0) => Ok("spline0".to_string()),
        Some(1) => Ok("spline2".to_string()),
        Some(other) => Err(Error::UnsupportedConfig(format!(
            "--order must be 0 or 1, got {other}"
        ))),
    }
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let series = load_csv(&args.input)?;
    let name = method_name(args)?;
    let method = lookup(&name)?;
    let params = MethodParams {
        lambda: args.lambda,
        levant_l: args.levant_l,
        hgo_eps: args.hgo_eps,
        hgo_sat: args.hgo_sat,
        refactor_every: 0,
    };
    if args.online {
        let online = method.estimate_online(&series, &params)?;
        let t = &series.grid().knots()[online.start..];
        write_columns(&args.output, &["t", "z"], t, &[&online.values])?;
    } else {
        let est = method.estimate_full(&series, &params)?;
        write_columns(&args.output, &["t", "z"], series.grid().knots(), &[&est])?;
        if name.starts_with("spline") {
            write_dense(args, &name, &series)?;
        }
    }
    Ok(())
}

/// Dense spline evaluation for plotting: `resolution` points per interval.
fn write_dense(args: &EstimateArgs, name: &str, series: &splinediff::SampleSeries) -> Result<()> {
    let order = if name == "spline0" {
        SplineOrder::Zero
    } else {
        SplineOrder::Quadratic
    };
    let sol = solve_batch(series, order, args.lambda)?;
    let res = args.resolution.max(1);
    let knots = series.grid().knots();
    let mut t_dense = Vec::new();
    for w in knots.windows(2) {
        for j in 0..res {
            t_dense.push(w[0] + (w[1] - w[0]) * j as f64 / res as f64);
        }
    }
    t_dense.push(*knots.last().unwrap());
    let z: Vec<f64> = t_dense
        .iter()
        .map(|&t| sol.model.eval_derivative(t))
        .collect::<Result<_>>()?;
    let path = args
        .dense_output
        .clone()
        .unwrap_or_else(|| append_ext(&args.output, "dense.csv"));
    write_columns(&path, &["t", "z"], &t_dense, &[&z])
}

fn append_ext(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let spec = ScenarioSpec::new(args.h, args.sigma, args.horizon, args.seed)?;
    let grid = generate_grid(&spec)?;
    let series = sample_signal(&grid, &spec);
    save_csv(&series, &args.output)
}

/// The paper-style default grid: Table-1 rows, full scenario.
fn default_bench_config() -> BenchConfig {
    BenchConfig::from_toml(
        "seeds = 10\n\
         lambda = 1e-4\n\
         horizon = 1.95\n\
         scenario = \"full\"\n\
         [[rows]]\nh = 0.075\nsigma = 1e-3\n\
         [[rows]]\nh = 0.05\nsigma = 1e-4\n\
         [[rows]]\nh = 0.01\nsigma = 1e-4\n\
         [[rows]]\nh = 0.001\nsigma = 1e-4\n\
         [[rows]]\nh = 0.001\nsigma = 1e-2\n",
    )
    .expect("built-in config is valid")
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            BenchConfig::from_toml(&text)?
        }
        None => default_bench_config(),
    };
    if let Some(s) = args.seeds {
        config.seeds = s;
    }
    if let Some(l) = args.lambda {
        config.lambda = l;
    }
    if let Some(sc) = &args.scenario {
        config.scenario = Scenario::parse(sc)?;
    }
    if let Some(seed) = args.seed {
        config.seed_base = seed;
    }
    if let Some(eps) = args.hgo_eps {
        config.hgo_eps = Some(eps);
    }
    if let Some(l) = args.levant_l {
        config.levant_l = l;
    }
    if let (Some(h), Some(sigma)) = (args.h, args.sigma) {
        config.rows = vec![BenchRow {
            h,
            sigma,
            horizon: None,
        }];
    } else if args.h.is_some() || args.sigma.is_some() {
        return Err(Error::Config(
            "--h and --sigma must be given together".into(),
        ));
    }
    let results = run_grid(&config)?;
    write_outputs(&config, &results, &args.out_dir)?;
    print!("{}", results_table(&results));
    for line in error_lines(&results) {
        eprintln!("cell failed: {line}");
    }
    Ok(())
}
