//! Experiment harness behind the `logbench` binary: log-map benchmarks over a
//! (distance, α) grid, the Grassmann cross-check, cut-value spectra and
//! Karcher runs. Every command returns [`Table`]s so the same data can be
//! written as CSV, aligned text or JSON.
//!
//! Randomness is derived per `(seed, cell, trial)` with ChaCha streams, so
//! results do not depend on the thread count.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::flag::{flag_exp, random_horizontal, FlagPoint, FlagShape};
use crate::grassmann::grass_dist;
use crate::logsolve::{cut_value_search, flag_log, hessian_spectrum, stiefel_log, CutSearch, Init, SolverOptions};
use crate::meanstat::{karcher_mean, sample_cluster, Manifold, MeanOptions};
use crate::stiefel::{decompose_tangent, geodesic, random_point_rng, random_tangent_rng, MetricParams, StiefelPoint};
use crate::{Error, Result};

/// Slack used when comparing recovered and generating lengths.
pub const LENGTH_SLACK: f64 = 1e-8;

/// Generator for trial `trial` of grid cell `cell`.
pub fn trial_rng(seed: u64, cell: usize, trial: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(((cell as u64) << 32) | trial as u64);
    r
}

/// Stream reserved for per-cell data such as the base point.
const CELL_TRIAL: usize = u32::MAX as usize;

/// Runs `f` on a rayon pool of the given size, or the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

// ---------------------------------------------------------------- tables

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => sig6(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Formats with 6 significant digits; fixed notation for moderate
/// magnitudes, scientific otherwise.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let e = v.abs().log10().floor() as i32;
    if (-4..6).contains(&e) {
        let s = format!("{:.*}", (5 - e).max(0) as usize, v);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.5e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Column index by header name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let rendered: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::render).collect()).collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|j| rendered.iter().map(|r| r[j].len()).chain([self.header[j].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let line = |cells: &[String], out: &mut String| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            let _ = writeln!(out, "{}", parts.join("  "));
        };
        line(&self.header, &mut out);
        for r in &rendered {
            line(r, &mut out);
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let obj = self.header.iter().cloned().zip(r.iter().map(|c| serde_json::to_value(c).unwrap_or_default()));
                serde_json::Value::Object(obj.collect())
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Text,
    Json,
}

/// Renders one or more tables. Several tables are separated by a blank line
/// and introduced by `# name` (CSV/text) or keyed by name (JSON).
pub fn render(tables: &[Table], format: Format) -> String {
    match format {
        Format::Json => {
            let v = if tables.len() == 1 {
                tables[0].to_json()
            } else {
                serde_json::Value::Object(tables.iter().map(|t| (t.name.clone(), t.to_json())).collect())
            };
            let mut s = serde_json::to_string_pretty(&v).unwrap_or_default();
            s.push('\n');
            s
        }
        Format::Csv | Format::Text => {
            let body = |t: &Table| if format == Format::Csv { t.to_csv() } else { t.to_text() };
            if tables.len() == 1 {
                return body(&tables[0]);
            }
            tables.iter().map(|t| format!("# {}\n{}", t.name, body(t))).collect::<Vec<_>>().join("\n")
        }
    }
}

// ---------------------------------------------------------------- log benchmarks

/// Which manifold a benchmark runs on.
#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldSpec {
    Stiefel { n: usize, p: usize },
    Flag(FlagShape),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub manifold: ManifoldSpec,
    /// Ratios `α₁/α₀`, with `α₀ = 1`.
    pub alphas: Vec<f64>,
    /// Generating lengths in units of π.
    pub dists: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub inits: Vec<Init>,
    pub solver: SolverOptions,
}

impl BenchConfig {
    pub fn stiefel(n: usize, p: usize) -> Self {
        Self {
            manifold: ManifoldSpec::Stiefel { n, p },
            alphas: vec![0.1, 0.5, 1.0, 1.2],
            dists: vec![0.50, 0.99, 1.30],
            trials: 50,
            seed: 0,
            inits: vec![Init::Zero, Init::Projection],
            solver: SolverOptions::default(),
        }
    }

    pub fn flag(shape: FlagShape) -> Self {
        Self { manifold: ManifoldSpec::Flag(shape), inits: vec![Init::Zero], ..Self::stiefel(0, 0) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.dists.is_empty() || self.inits.is_empty() {
            return Err(Error::Config("alpha, distance and init lists must be nonempty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let Some(d) = self.dists.iter().find(|d| !(**d >= 0.0)) {
            return Err(Error::Config(format!("invalid distance {d}")));
        }
        for &a in &self.alphas {
            MetricParams::with_ratio(a)?;
        }
        if let ManifoldSpec::Stiefel { n, p } = self.manifold {
            if p == 0 || n < p {
                return Err(Error::Config(format!("need 0 < p ≤ n, got n = {n}, p = {p}")));
            }
        }
        self.solver.validate()
    }
}

/// One aggregated (dist, α, init) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub dist: f64,
    pub alpha: f64,
    pub init: Init,
    pub mean_iterations: f64,
    pub mean_weighted_evals: f64,
    pub pct_success: f64,
    /// Successful solves shorter than the generating tangent, over all trials.
    pub pct_improve: f64,
    /// Successful solves not longer than the generating tangent, over successes.
    pub pct_not_worse: f64,
}

/// Outcome of one log solve inside a benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub success: bool,
    pub iterations: usize,
    pub weighted_evals: f64,
    pub length: f64,
    pub generating_length: f64,
}

/// Aggregates trial outcomes of one cell.
pub fn aggregate(dist: f64, alpha: f64, init: Init, trials: &[TrialOutcome]) -> BenchRow {
    let n = trials.len().max(1) as f64;
    let succ: Vec<&TrialOutcome> = trials.iter().filter(|t| t.success).collect();
    let improve = succ.iter().filter(|t| t.length < t.generating_length - LENGTH_SLACK).count();
    let not_worse = succ.iter().filter(|t| t.length <= t.generating_length + LENGTH_SLACK).count();
    BenchRow {
        dist,
        alpha,
        init,
        mean_iterations: trials.iter().map(|t| t.iterations as f64).sum::<f64>() / n,
        mean_weighted_evals: trials.iter().map(|t| t.weighted_evals).sum::<f64>() / n,
        pct_success: 100.0 * succ.len() as f64 / n,
        pct_improve: 100.0 * improve as f64 / n,
        pct_not_worse: if succ.is_empty() { 0.0 } else { 100.0 * not_worse as f64 / succ.len() as f64 },
    }
}

/// Generates a target at distance `len` and solves with every init.
fn run_trial(cfg: &BenchConfig, base: &StiefelPoint, m: &MetricParams, len: f64, cell: usize, trial: usize) -> Result<Vec<TrialOutcome>> {
    let mut rng = trial_rng(cfg.seed, cell, trial);
    let outcome = |rep: crate::logsolve::SolveReport| TrialOutcome {
        success: rep.success,
        iterations: rep.iterations,
        weighted_evals: rep.weighted_evals,
        length: rep.length,
        generating_length: len,
    };
    match &cfg.manifold {
        ManifoldSpec::Stiefel { .. } => {
            let t = random_tangent_rng(base, len, m, &mut rng)?;
            let z = geodesic(base, &decompose_tangent(&t)?, 1.0, m)?;
            cfg.inits.iter().map(|&init| Ok(outcome(stiefel_log(base, &z, m, init, &cfg.solver)?))).collect()
        }
        ManifoldSpec::Flag(s) => {
            let y = FlagPoint::new(base.clone(), s)?;
            let h = random_horizontal(&y, s, len, m, &mut rng)?;
            let z = flag_exp(&h, 1.0, m)?;
            cfg.inits.iter().map(|&init| Ok(outcome(flag_log(&y, &z, s, m, init, &cfg.solver)?))).collect()
        }
    }
}

/// Runs the (dist, α) grid; one row per init scheme and cell.
pub fn log_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let (n, p) = match &cfg.manifold {
        ManifoldSpec::Stiefel { n, p } => (*n, *p),
        ManifoldSpec::Flag(s) => (s.n(), s.n_q()),
    };
    let mut rows = Vec::new();
    for (di, &dist) in cfg.dists.iter().enumerate() {
        for (ai, &alpha) in cfg.alphas.iter().enumerate() {
            let cell = di * cfg.alphas.len() + ai;
            let m = MetricParams::with_ratio(alpha)?;
            let base = random_point_rng(n, p, &mut trial_rng(cfg.seed, cell, CELL_TRIAL))?;
            let len = dist * PI;
            let per_trial: Vec<Vec<TrialOutcome>> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(cfg, &base, &m, len, cell, t))
                .collect::<Result<_>>()?;
            for (ii, &init) in cfg.inits.iter().enumerate() {
                let outs: Vec<TrialOutcome> = per_trial.iter().map(|v| v[ii]).collect();
                rows.push(aggregate(dist, alpha, init, &outs));
            }
        }
    }
    Ok(rows)
}

pub fn bench_table(rows: &[BenchRow]) -> Table {
    let mut t = Table::new(
        "log_bench",
        &["dist", "alpha", "init", "mean_iterations", "mean_weighted_evals", "pct_success", "pct_improve", "pct_not_worse"],
    );
    for r in rows {
        t.push(vec![
            r.dist.into(),
            r.alpha.into(),
            r.init.to_string().into(),
            r.mean_iterations.into(),
            r.mean_weighted_evals.into(),
            r.pct_success.into(),
            r.pct_improve.into(),
            r.pct_not_worse.into(),
        ]);
    }
    t
}

// ---------------------------------------------------------------- grassmann check

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrassmannCheck {
    pub trials: usize,
    pub failures: usize,
    pub failure_fraction: f64,
    /// Largest `|length − grass_dist|` over successful solves.
    pub max_discrepancy: f64,
}

/// Compares the numerical flag log on the Grassmann-shaped flag with the
/// closed-form distance, on uniformly random pairs.
pub fn grassmann_check(n: usize, p: usize, trials: usize, seed: u64, alpha: f64, solver: &SolverOptions) -> Result<GrassmannCheck> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let s = FlagShape::grassmann(p, n)?;
    let m = MetricParams::with_ratio(alpha)?;
    let res: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, 0, t);
            let y = random_point_rng(n, p, &mut rng)?;
            let z = random_point_rng(n, p, &mut rng)?;
            let rep = flag_log(&FlagPoint::new(y.clone(), &s)?, &FlagPoint::new(z.clone(), &s)?, &s, &m, Init::Zero, solver)?;
            if !rep.success {
                return Ok(None);
            }
            Ok(Some((rep.length - grass_dist(&y, &z, &m)?).abs()))
        })
        .collect::<Result<_>>()?;
    let failures = res.iter().filter(|r| r.is_none()).count();
    Ok(GrassmannCheck {
        trials,
        failures,
        failure_fraction: failures as f64 / trials as f64,
        max_discrepancy: res.iter().flatten().fold(0.0, |a, &b| a.max(b)),
    })
}

pub fn grassmann_table(c: &GrassmannCheck) -> Table {
    let mut t = Table::new("grassmann_check", &["trials", "failures", "failure_fraction", "max_discrepancy"]);
    t.push(vec![c.trials.into(), c.failures.into(), c.failure_fraction.into(), c.max_discrepancy.into()]);
    t
}

// ---------------------------------------------------------------- cut values

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutConfig {
    pub n: usize,
    pub p: usize,
    pub alphas: Vec<f64>,
    /// Directions sampled per α.
    pub samples: usize,
    pub search: CutSearch,
    /// Points of the eigenvalue track recorded for the first direction.
    pub track_points: usize,
    pub seed: u64,
}

impl Default for CutConfig {
    fn default() -> Self {
        Self { n: 10, p: 5, alphas: vec![0.1, 0.5, 1.0, 1.2], samples: 20, search: CutSearch::default(), track_points: 57, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutSummary {
    pub alpha: f64,
    /// Cut value per sampled direction; `None` when nothing degenerates below `t_max`.
    pub values: Vec<Option<f64>>,
}

impl CutSummary {
    pub fn found(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.values.iter().flatten().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Median with undetected directions counted as `t_max`.
    pub fn median(&self, t_max: f64) -> f64 {
        let mut v: Vec<f64> = self.values.iter().map(|c| c.unwrap_or(t_max)).collect();
        v.sort_by(f64::total_cmp);
        let k = v.len();
        if k == 0 {
            return f64::NAN;
        }
        if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackRow {
    pub alpha: f64,
    pub t: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutStudy {
    pub summaries: Vec<CutSummary>,
    pub track: Vec<TrackRow>,
}

pub fn cut_study(cfg: &CutConfig) -> Result<CutStudy> {
    if cfg.samples == 0 || cfg.alphas.is_empty() {
        return Err(Error::Config("need at least one sample and one alpha".into()));
    }
    let mut summaries = Vec::new();
    let mut track = Vec::new();
    for (ai, &alpha) in cfg.alphas.iter().enumerate() {
        let m = MetricParams::with_ratio(alpha)?;
        let draw = |s: usize| -> Result<_> {
            let mut rng = trial_rng(cfg.seed, ai, s);
            let y = random_point_rng(cfg.n, cfg.p, &mut rng)?;
            let dir = random_tangent_rng(&y, 1.0, &m, &mut rng)?;
            Ok((y, dir))
        };
        let values: Vec<Option<f64>> = (0..cfg.samples)
            .into_par_iter()
            .map(|s| {
                let (y, dir) = draw(s)?;
                cut_value_search(&y, &dir, &m, &cfg.search)
            })
            .collect::<Result<_>>()?;
        summaries.push(CutSummary { alpha, values });
        if cfg.track_points > 0 {
            let (y, dir) = draw(0)?;
            let k = cfg.track_points;
            let grid: Vec<f64> = (0..k).map(|i| 0.05 + (cfg.search.t_max - 0.05) * i as f64 / (k.max(2) - 1) as f64).collect();
            let pts: Vec<_> = grid
                .par_iter()
                .map(|&t| hessian_spectrum(&y, &dir, &[t], &m).map(|v| v[0]))
                .collect::<Result<_>>()?;
            track.extend(pts.into_iter().map(|s| TrackRow { alpha, t: s.t, min: s.min, max: s.max }));
        }
    }
    Ok(CutStudy { summaries, track })
}

pub fn cut_tables(study: &CutStudy, t_max: f64) -> Vec<Table> {
    let mut summary = Table::new("summary", &["alpha", "samples", "found", "min_cut", "median_cut", "max_cut"]);
    for s in &study.summaries {
        let found = s.found();
        let (lo, hi) = match (found.first(), found.last()) {
            (Some(a), Some(b)) => (Cell::Num(*a), Cell::Num(*b)),
            _ => ("none".into(), "none".into()),
        };
        summary.push(vec![s.alpha.into(), s.values.len().into(), found.len().into(), lo, s.median(t_max).into(), hi]);
    }
    let mut track = Table::new("track", &["alpha", "t", "min_eig", "max_eig"]);
    for r in &study.track {
        track.push(vec![r.alpha.into(), r.t.into(), r.min.into(), r.max.into()]);
    }
    vec![summary, track]
}

// ---------------------------------------------------------------- karcher

#[derive(Debug, Clone, PartialEq)]
pub struct KarcherConfig {
    pub manifold: ManifoldSpec,
    pub alphas: Vec<f64>,
    pub points: usize,
    /// Radius band in units of π.
    pub band: (f64, f64),
    pub mean: MeanOptions,
    pub seed: u64,
}

impl KarcherConfig {
    pub fn new(manifold: ManifoldSpec) -> Self {
        Self {
            manifold,
            alphas: vec![0.1, 0.5, 1.0, 1.2],
            points: 50,
            band: (0.4, 0.5),
            mean: MeanOptions { max_iter: 4, grad_tol: 0.0, ..Default::default() },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KarcherRun {
    pub alpha: f64,
    pub grad_norms: Vec<f64>,
    pub msd: Vec<f64>,
    pub retries: usize,
    pub aborted: Option<String>,
}

/// Samples a cluster around a random center and iterates from its first point.
pub fn karcher_study(cfg: &KarcherConfig) -> Result<Vec<KarcherRun>> {
    if cfg.points == 0 || cfg.alphas.is_empty() {
        return Err(Error::Config("need at least one point and one alpha".into()));
    }
    let (n, p, space) = match &cfg.manifold {
        ManifoldSpec::Stiefel { n, p } => (*n, *p, Manifold::Stiefel),
        ManifoldSpec::Flag(s) => (s.n(), s.n_q(), Manifold::Flag(s.clone())),
    };
    cfg.alphas
        .iter()
        .enumerate()
        .map(|(ai, &alpha)| {
            let m = MetricParams::with_ratio(alpha)?;
            let mut rng = trial_rng(cfg.seed, ai, 0);
            let center = random_point_rng(n, p, &mut rng)?;
            let pts = sample_cluster(&center, cfg.points, (cfg.band.0 * PI, cfg.band.1 * PI), &m, &space, &mut rng)?;
            let rep = karcher_mean(&pts, &pts[0], &m, &space, &cfg.mean)?;
            Ok(KarcherRun { alpha, grad_norms: rep.grad_norms, msd: rep.msd, retries: rep.retries, aborted: rep.aborted })
        })
        .collect()
}

pub fn karcher_table(runs: &[KarcherRun]) -> Table {
    let mut t = Table::new("karcher", &["alpha", "iteration", "log10_grad", "msd"]);
    for r in runs {
        for (i, (g, d)) in r.grad_norms.iter().zip(&r.msd).enumerate() {
            t.push(vec![r.alpha.into(), i.into(), g.log10().into(), (*d).into()]);
        }
    }
    t
}
