use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpam_core::reporting::{emit_plot_data, run_experiment, PlotKind, RunConfig, RunDir};
use fpam_core::variational::VariationalOptions;
use fpam_core::{Error, NoiseSpec, Result, SpatialKernel};

#[derive(Parser, Debug)]
#[command(name = "fpam", version, about = "Fractional parabolic Anderson model experiments")]
struct Cli {
    /// Run directory; outputs are appended, never overwritten.
    #[arg(long, global = true, env = "FPAM_OUT", default_value = "runs")]
    out: PathBuf,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "FPAM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config for this pipeline.
    #[arg(long)]
    config: PathBuf,

    /// Overrides the master seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// JSON config; the flags below build one when it is absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    beta0: f64,
    /// `riesz:<beta>` or `product:<b1>,<b2>,...`
    #[arg(long, default_value = "riesz:0.4")]
    kernel: String,
    /// Spatial dimension for a Riesz kernel.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Torus side length.
    #[arg(long = "box", default_value_t = 16.0)]
    box_size: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Time slices.
    #[arg(long, default_value_t = 16)]
    slices: usize,
    #[arg(long)]
    restarts: Option<usize>,
    /// Noise strengths to solve for; repeatable.
    #[arg(long = "theta")]
    thetas: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the kernel decompositions and spectral constants.
    KernelsValidate(Common),
    /// Write stable paths as CSV.
    SamplePaths(Common),
    /// Sample the single-path Hamiltonian and compare with its mean.
    EstimateHamiltonian(Common),
    /// Exponential moments of the Hamiltonian.
    ExpMoment(Common),
    /// Integer moments of the solution.
    Moment(Common),
    /// Moments over a time grid plus a growth-rate fit.
    Lyapunov(Common),
    /// Variational lower bound next to the moment it bounds.
    LowerBound(Common),
    /// Torus Feynman-Kac limit against the principal eigenvalue.
    FkCheck(Common),
    /// Principal eigenvalue over a truncation sweep.
    Lambda(Common),
    /// Maximise the variational functional.
    SolveVariational(SolveArgs),
    /// Variational constant, predicted growth rates and Monte Carlo moments.
    FullTheoremCheck(Common),
    /// Emit plot-ready CSV from an existing run directory.
    Plot {
        /// records, lyapunov or scaling
        kind: String,
    },
}

fn load_config(path: &Path, pipeline: &str) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigInvalid {
        field: "config".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::ConfigInvalid {
        field: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let obj = value.as_object_mut().ok_or_else(|| Error::ConfigInvalid {
        field: "config".into(),
        message: "expected a JSON object".into(),
    })?;
    match obj.get("pipeline").and_then(|v| v.as_str()) {
        None => {
            obj.insert("pipeline".into(), pipeline.into());
        }
        Some(p) if p != pipeline => {
            return Err(Error::ConfigInvalid {
                field: "pipeline".into(),
                message: format!("config is for `{p}` but the subcommand is `{pipeline}`"),
            })
        }
        Some(_) => {}
    }
    RunConfig::from_json(&value.to_string())
}

fn parse_kernel(s: &str) -> Result<SpatialKernel> {
    let bad = |m: String| Error::ConfigInvalid {
        field: "kernel".into(),
        message: m,
    };
    let (family, params) = s.split_once(':').ok_or_else(|| bad(format!("expected family:params, got `{s}`")))?;
    let nums = params
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| bad(format!("`{params}`: {e}")))?;
    match family {
        "riesz" if nums.len() == 1 => Ok(SpatialKernel::Riesz { beta: nums[0] }),
        "product" => Ok(SpatialKernel::Product { betas: nums }),
        _ => Err(bad(format!("unknown kernel `{s}`"))),
    }
}

fn solve_config(a: &SolveArgs) -> Result<RunConfig> {
    if let Some(path) = &a.config {
        let mut c = load_config(path, "solve-variational")?;
        if let Some(s) = a.seed {
            c.set_seed(s);
        }
        return Ok(c);
    }
    let kernel = parse_kernel(&a.kernel)?;
    let dim = match &kernel {
        SpatialKernel::Product { betas } => betas.len(),
        SpatialKernel::Riesz { .. } => a.dim,
    };
    let spec = NoiseSpec {
        alpha: a.alpha,
        beta0: a.beta0,
        kernel,
        dim,
    };
    let mut options = VariationalOptions::default();
    if let Some(r) = a.restarts {
        options.restarts = r;
    }
    if let Some(s) = a.seed {
        options.seed = s;
    }
    Ok(RunConfig::SolveVariational {
        spec,
        box_size: a.box_size,
        grid_n: a.grid,
        n_t: a.slices,
        thetas: if a.thetas.is_empty() { vec![1.0] } else { a.thetas.clone() },
        options,
    })
}

fn pipeline_run(name: &str, common: &Common, out: &Path) -> Result<()> {
    let mut config = load_config(&common.config, name)?;
    if let Some(s) = common.seed {
        config.set_seed(s);
    }
    let base = common.config.parent().unwrap_or(Path::new("."));
    report(run_experiment(&config, out, base)?, out);
    Ok(())
}

fn report(s: fpam_core::reporting::RunSummary, out: &Path) {
    println!("{}: {}", s.entry.pipeline, s.headline);
    for o in &s.entry.outputs {
        println!("  {}", out.join(&o.path).display());
    }
    println!("  {:.2}s, entry {} in {}", s.entry.wall_time_secs, s.entry.index, out.display());
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.as_path();
    let (name, common) = match &cli.command {
        Command::KernelsValidate(c) => ("kernels-validate", c),
        Command::SamplePaths(c) => ("sample-paths", c),
        Command::EstimateHamiltonian(c) => ("estimate-hamiltonian", c),
        Command::ExpMoment(c) => ("exp-moment", c),
        Command::Moment(c) => ("moment", c),
        Command::Lyapunov(c) => ("lyapunov", c),
        Command::LowerBound(c) => ("lower-bound", c),
        Command::FkCheck(c) => ("fk-check", c),
        Command::Lambda(c) => ("lambda", c),
        Command::FullTheoremCheck(c) => ("full-theorem-check", c),
        Command::SolveVariational(a) => {
            let config = solve_config(a)?;
            let base = a.config.as_deref().and_then(Path::parent).unwrap_or(Path::new("."));
            report(run_experiment(&config, out, base)?, out);
            return Ok(());
        }
        Command::Plot { kind } => {
            let kind: PlotKind = kind.parse()?;
            let run = RunDir::open_existing(out)?;
            println!("{}", emit_plot_data(&run, kind)?.display());
            return Ok(());
        }
    };
    pipeline_run(name, common, out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
