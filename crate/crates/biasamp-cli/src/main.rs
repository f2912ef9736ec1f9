//! Command-line front end: sweeps, validation suites, solver self-test and
//! plotting. Output goes to `--out-dir`, else `$BIASAMP_OUT_DIR`, else `out/`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biasamp::experiments::validation::Suite;
use biasamp::experiments::{emit_svg, run_sweep, PlotSpec, SweepConfig, Table};
use biasamp::fixed_point::{solve_mp, SolverSettings};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "biasamp", version, about = "Bias amplification theory vs simulation for ridge regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep from a JSON config and write CSV (and SVG).
    Sweep {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Skip Monte Carlo (replicates = 0).
        #[arg(long)]
        theory_only: bool,
        /// Exit 0 even if some grid points are flagged.
        #[arg(long)]
        allow_flags: bool,
    },
    /// Run a validation suite by name, or `all`.
    Validate { suite: String },
    /// Solve the Marchenko-Pastur fixed point.
    MpCheck {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Plot columns of a sweep CSV as SVG.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        x: String,
        /// Comma-separated column names.
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long)]
        group_by: Option<String>,
        #[arg(long)]
        log_x: bool,
        #[arg(long)]
        log_y: bool,
        #[arg(long)]
        title: Option<String>,
        /// Output file; defaults to the CSV path with an .svg extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("BIASAMP_OUT_DIR").map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"))
}

type Res<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn sweep(
    config: &Path,
    seed: Option<u64>,
    replicates: Option<usize>,
    dir: PathBuf,
    theory_only: bool,
    allow_flags: bool,
) -> Res<ExitCode> {
    let mut cfg = SweepConfig::load(config)?;
    if seed.is_some() {
        cfg.base_seed = seed;
    }
    if replicates.is_some() {
        cfg.replicates = replicates;
    }
    if theory_only {
        cfg.replicates = Some(0);
    }
    let cfg = cfg.resolve()?;
    let result = run_sweep(&cfg, &SolverSettings::default())?;
    std::fs::create_dir_all(&dir)?;
    let table = Table::from_sweep(&result);
    let csv_path = dir.join(&cfg.output_csv);
    table.write_csv(&csv_path)?;
    println!("wrote {} ({} rows)", csv_path.display(), table.rows.len());
    if let Some(svg) = &cfg.output_svg {
        let path = dir.join(svg);
        match emit_svg(&table, &path, &PlotSpec::for_scenario(cfg.scenario)) {
            Ok(()) => println!("wrote {}", path.display()),
            Err(e) => eprintln!("plot skipped: {e}"),
        }
    }
    let flagged = result.flagged().count();
    if flagged > 0 {
        eprintln!("{flagged} of {} grid points flagged", result.rows.len());
        if !allow_flags {
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(name: &str) -> Res<ExitCode> {
    let suites: Vec<Suite> = if name == "all" {
        Suite::ALL.to_vec()
    } else {
        let s = Suite::parse(name).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
            format!("unknown suite `{name}`; expected one of: all, {}", names.join(", "))
        })?;
        vec![s]
    };
    let settings = SolverSettings::default();
    let mut ok = true;
    for s in suites {
        match s.run(&settings) {
            Ok(check) => {
                ok &= check.passed;
                println!("{check}");
            }
            Err(e) => {
                ok = false;
                println!("[FAIL] {:>2} {:<22} error: {e}", s.number(), s.name());
            }
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn mp_check(gamma: f64, lambda: f64) -> Res<ExitCode> {
    let (m, info) = solve_mp(gamma, lambda, &SolverSettings::default())?;
    println!("m = {m:.17e} (residual {:.1e}, {} iterations)", info.residual, info.iters);
    if gamma == 1.0 && lambda == 1.0 {
        let exact = (5f64.sqrt() - 1.0) / 2.0;
        let err = (m - exact).abs();
        println!("closed form (sqrt5-1)/2 = {exact:.17e}, error {err:.1e}");
        if err > 1e-10 {
            return Ok(ExitCode::FAILURE);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Sweep { config, seed, replicates, out_dir: dir, theory_only, allow_flags } => {
            sweep(&config, seed, replicates, out_dir(dir), theory_only, allow_flags)
        }
        Command::Validate { suite } => validate(&suite),
        Command::MpCheck { gamma, lambda } => mp_check(gamma, lambda),
        Command::Plot { csv, x, y, group_by, log_x, log_y, title, out } => (|| {
            let table = Table::read_csv(&csv)?;
            let spec = PlotSpec { x, series: y, group_by, log_x, log_y, title };
            let path = out.unwrap_or_else(|| csv.with_extension("svg"));
            emit_svg(&table, &path, &spec)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        })(),
    };
    res.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
