//! `logbench`: reproducible log-map experiments on Stiefel, Grassmann and flag manifolds.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stiefel_log::bench::{
    bench_table, cut_study, cut_tables, grassmann_check, grassmann_table, karcher_study, karcher_table, log_bench, render,
    with_threads, BenchConfig, CutConfig, Format, KarcherConfig, ManifoldSpec, Table,
};
use stiefel_log::flag::FlagShape;
use stiefel_log::logsolve::{CutSearch, Init};
use stiefel_log::Result;

#[derive(Parser)]
#[command(name = "logbench", version, about = "Riemannian logarithm experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Base seed; every (cell, trial) derives its own stream from it.
    #[arg(long, global = true, env = "STIEFEL_LOG_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Zero,
    Proj,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum ManifoldArg {
    Stiefel,
    Flag,
}

#[derive(Args)]
struct Shape {
    /// Ambient dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Number of columns (Stiefel).
    #[arg(long)]
    p: Option<usize>,
    /// Nested subspace dimensions of a flag, e.g. `3,4` for Flag(3,4;n).
    #[arg(long, value_delimiter = ',')]
    blocks: Option<Vec<usize>>,
}

#[derive(Args)]
struct Grid {
    /// Metric ratios α₁/α₀.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.0,1.2")]
    alpha: Vec<f64>,
    /// Generating distances in units of π.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.99,1.3")]
    dist: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    trials: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Log-map benchmark on St(p, n) (default St(2, 4)).
    StiefelLogBench {
        #[command(flatten)]
        shape: Shape,
        #[command(flatten)]
        grid: Grid,
        #[arg(long, value_enum, default_value_t = InitArg::Both)]
        init: InitArg,
    },
    /// Log-map benchmark on a flag manifold (default Flag(3,4;9)).
    FlagLogBench {
        #[command(flatten)]
        shape: Shape,
        #[command(flatten)]
        grid: Grid,
        #[arg(long, value_enum, default_value_t = InitArg::Zero)]
        init: InitArg,
    },
    /// Numerical flag log on Gr(p, n) against the closed-form distance.
    GrassmannCheck {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        p: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
    /// Approximate cut values from Hessian degeneracy along geodesics.
    CutValue {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        p: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.0,1.2")]
        alpha: Vec<f64>,
        /// Directions sampled per α.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 1e-8)]
        threshold: f64,
        /// Search limit in units of π.
        #[arg(long, default_value_t = 1.4)]
        t_max: f64,
        /// Points of the recorded eigenvalue track.
        #[arg(long, default_value_t = 57)]
        track_points: usize,
    },
    /// Karcher mean iteration on a sampled cluster.
    Karcher {
        #[arg(long, value_enum, default_value_t = ManifoldArg::Stiefel)]
        manifold: ManifoldArg,
        #[command(flatten)]
        shape: Shape,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.0,1.2")]
        alpha: Vec<f64>,
        /// Number of data points.
        #[arg(long, default_value_t = 50)]
        points: usize,
        /// Radius band in units of π.
        #[arg(long, value_delimiter = ',', default_value = "0.4,0.5")]
        band: Vec<f64>,
        #[arg(long, default_value_t = 4)]
        iterations: usize,
    },
}

fn inits(a: InitArg) -> Vec<Init> {
    match a {
        InitArg::Zero => vec![Init::Zero],
        InitArg::Proj => vec![Init::Projection],
        InitArg::Both => vec![Init::Zero, Init::Projection],
    }
}

fn stiefel_spec(s: &Shape, default: (usize, usize)) -> ManifoldSpec {
    ManifoldSpec::Stiefel { n: s.n.unwrap_or(default.0), p: s.p.unwrap_or(default.1) }
}

fn flag_spec(s: &Shape, default: (&[usize], usize)) -> Result<ManifoldSpec> {
    let dims = s.blocks.clone().unwrap_or_else(|| default.0.to_vec());
    Ok(ManifoldSpec::Flag(FlagShape::nested(&dims, s.n.unwrap_or(default.1))?))
}

fn grid_config(manifold: ManifoldSpec, grid: Grid, init: InitArg, seed: u64) -> BenchConfig {
    let base = match &manifold {
        ManifoldSpec::Stiefel { n, p } => BenchConfig::stiefel(*n, *p),
        ManifoldSpec::Flag(s) => BenchConfig::flag(s.clone()),
    };
    BenchConfig { alphas: grid.alpha, dists: grid.dist, trials: grid.trials, seed, inits: inits(init), ..base }
}

fn execute(cmd: Cmd, seed: u64) -> Result<Vec<Table>> {
    Ok(match cmd {
        Cmd::StiefelLogBench { shape, grid, init } => {
            let cfg = grid_config(stiefel_spec(&shape, (4, 2)), grid, init, seed);
            vec![bench_table(&log_bench(&cfg)?)]
        }
        Cmd::FlagLogBench { shape, grid, init } => {
            let cfg = grid_config(flag_spec(&shape, (&[3, 4], 9))?, grid, init, seed);
            vec![bench_table(&log_bench(&cfg)?)]
        }
        Cmd::GrassmannCheck { n, p, trials, alpha } => {
            vec![grassmann_table(&grassmann_check(n, p, trials, seed, alpha, &Default::default())?)]
        }
        Cmd::CutValue { n, p, alpha, samples, threshold, t_max, track_points } => {
            let search = CutSearch { threshold, t_max: t_max * std::f64::consts::PI, ..Default::default() };
            let cfg = CutConfig { n, p, alphas: alpha, samples, search, track_points, seed };
            cut_tables(&cut_study(&cfg)?, search.t_max)
        }
        Cmd::Karcher { manifold, shape, alpha, points, band, iterations } => {
            let spec = match manifold {
                ManifoldArg::Stiefel => stiefel_spec(&shape, (40, 10)),
                ManifoldArg::Flag => flag_spec(&shape, (&[3, 4, 5], 60))?,
            };
            let [lo, hi] = band[..] else {
                return Err(stiefel_log::Error::Config("--band takes two values".into()));
            };
            let mut cfg = KarcherConfig::new(spec);
            cfg.alphas = alpha;
            cfg.points = points;
            cfg.band = (lo, hi);
            cfg.mean.max_iter = iterations;
            cfg.seed = seed;
            let runs = karcher_study(&cfg)?;
            for r in runs.iter().filter_map(|r| r.aborted.as_ref().map(|a| (r.alpha, a))) {
                eprintln!("warning: alpha {}: {}", r.0, r.1);
            }
            vec![karcher_table(&runs)]
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = match cli.common.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Text => Format::Text,
        FormatArg::Json => Format::Json,
    };
    let seed = cli.common.seed;
    let cmd = cli.cmd;
    let tables = match with_threads(cli.common.threads, move || execute(cmd, seed)).and_then(|r| r) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let text = render(&tables, format);
    match cli.common.out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::FAILURE;
            }
        }
        None => print!("{text}"),
    }
    ExitCode::SUCCESS
}
