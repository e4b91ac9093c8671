//! Karcher means on Stiefel and flag manifolds by the fixed-step iteration
//! `X ← Exp_X((1/N)·Σ Log_X Qᵢ)`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::flag::{random_horizontal, FlagPoint, FlagShape};
use crate::logsolve::{flag_log, stiefel_log, Init, SolveReport, SolverOptions};
use crate::stiefel::{decompose_tangent, geodesic, random_tangent_rng, tangent_norm, MetricParams, StiefelPoint, TangentVector};
use crate::{Error, Mat, Result};

/// The space the points live on.
#[derive(Debug, Clone, PartialEq)]
pub enum Manifold {
    Stiefel,
    Flag(FlagShape),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanOptions {
    /// Number of update steps.
    pub max_iter: usize,
    pub grad_tol: f64,
    pub solver: SolverOptions,
}

impl Default for MeanOptions {
    fn default() -> Self {
        Self { max_iter: 10, grad_tol: 1e-12, solver: SolverOptions::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanReport {
    #[serde(skip)]
    pub mean: StiefelPoint,
    /// `‖(1/N)·Σ Log_X Qᵢ‖` at each visited iterate, starting with `x0`.
    pub grad_norms: Vec<f64>,
    /// `(1/N)·Σ d(X, Qᵢ)²` at each visited iterate.
    pub msd: Vec<f64>,
    /// Update steps taken.
    pub iterations: usize,
    /// Logs that only succeeded with the alternate initialization.
    pub retries: usize,
    /// Set when some log failed with both initializations.
    pub aborted: Option<String>,
}

fn log_once(x: &StiefelPoint, q: &StiefelPoint, m: &MetricParams, space: &Manifold, init: Init, opts: &SolverOptions) -> Result<SolveReport> {
    match space {
        Manifold::Stiefel => stiefel_log(x, q, m, init, opts),
        Manifold::Flag(s) => flag_log(&FlagPoint::new(x.clone(), s)?, &FlagPoint::new(q.clone(), s)?, s, m, init, opts),
    }
}

/// Log with `init`, retried once with the alternate initialization.
/// Returns the report and whether the retry was needed.
fn robust_log(
    x: &StiefelPoint,
    q: &StiefelPoint,
    m: &MetricParams,
    space: &Manifold,
    init: Init,
    opts: &SolverOptions,
) -> Result<(SolveReport, bool)> {
    let first = log_once(x, q, m, space, init, opts)?;
    if first.success {
        return Ok((first, false));
    }
    let second = log_once(x, q, m, space, init.alternate(), opts)?;
    Ok((second, true))
}

struct Sweep {
    grad: Mat,
    msd: f64,
    retries: usize,
    failed: usize,
}

fn sweep(x: &StiefelPoint, points: &[StiefelPoint], m: &MetricParams, space: &Manifold, init: Init, opts: &SolverOptions) -> Result<Sweep> {
    let logs: Vec<(SolveReport, bool)> =
        points.par_iter().map(|q| robust_log(x, q, m, space, init, opts)).collect::<Result<_>>()?;
    let n = points.len() as f64;
    let mut grad = Mat::zeros(x.n(), x.p());
    let mut msd = 0.0;
    let (mut retries, mut failed) = (0, 0);
    for (rep, retried) in &logs {
        grad += rep.eta.eta();
        msd += rep.length * rep.length;
        retries += usize::from(*retried);
        failed += usize::from(!rep.success);
    }
    Ok(Sweep { grad: grad / n, msd: msd / n, retries, failed })
}

fn check_inputs(points: &[StiefelPoint], x0: &StiefelPoint, space: &Manifold) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Domain("need at least one point".into()));
    }
    let shape = x0.as_matrix().shape();
    if points.iter().any(|q| q.as_matrix().shape() != shape) {
        return Err(Error::Shape("points differ in shape".into()));
    }
    if let Manifold::Flag(s) = space {
        FlagPoint::new(x0.clone(), s)?;
    }
    Ok(())
}

/// Karcher mean of `points` starting from `x0`. The first sweep starts each
/// log from zero; later sweeps start from the projection, since the iterate
/// is then close to the data.
pub fn karcher_mean(
    points: &[StiefelPoint],
    x0: &StiefelPoint,
    m: &MetricParams,
    space: &Manifold,
    opts: &MeanOptions,
) -> Result<MeanReport> {
    check_inputs(points, x0, space)?;
    let mut x = x0.clone();
    let mut report =
        MeanReport { mean: x.clone(), grad_norms: Vec::new(), msd: Vec::new(), iterations: 0, retries: 0, aborted: None };
    loop {
        let init = if report.iterations == 0 { Init::Zero } else { Init::Projection };
        let s = sweep(&x, points, m, space, init, &opts.solver)?;
        report.retries += s.retries;
        let g = TangentVector::from_unchecked(&x, s.grad);
        report.grad_norms.push(tangent_norm(&g, m));
        report.msd.push(s.msd);
        report.mean = x.clone();
        if s.failed > 0 {
            report.aborted = Some(format!("{} log(s) failed at iteration {}", s.failed, report.iterations));
            return Ok(report);
        }
        if report.grad_norms.last().is_some_and(|v| *v <= opts.grad_tol) || report.iterations >= opts.max_iter {
            return Ok(report);
        }
        let c = decompose_tangent(&g)?;
        x = geodesic(&x, &c, 1.0, m)?;
        report.iterations += 1;
    }
}

/// `(1/N)·Σ d(x, Qᵢ)²` from the lengths of successful logs.
pub fn mean_square_distance(
    x: &StiefelPoint,
    points: &[StiefelPoint],
    m: &MetricParams,
    space: &Manifold,
    opts: &SolverOptions,
) -> Result<f64> {
    check_inputs(points, x, space)?;
    let s = sweep(x, points, m, space, Init::Zero, opts)?;
    if s.failed > 0 {
        return Err(Error::Numeric(format!("{} log(s) failed", s.failed)));
    }
    Ok(s.msd)
}

/// `count` points `Exp_center(r·u)` with `u` a random unit (horizontal, on
/// flags) direction and `r` uniform in `band`.
pub fn sample_cluster<R: Rng>(
    center: &StiefelPoint,
    count: usize,
    band: (f64, f64),
    m: &MetricParams,
    space: &Manifold,
    rng: &mut R,
) -> Result<Vec<StiefelPoint>> {
    if !(band.0 >= 0.0 && band.0 <= band.1) {
        return Err(Error::Domain(format!("invalid radius band {band:?}")));
    }
    (0..count)
        .map(|_| {
            let r = if band.1 > band.0 { rng.random_range(band.0..=band.1) } else { band.0 };
            match space {
                Manifold::Stiefel => {
                    let t = random_tangent_rng(center, r, m, rng)?;
                    crate::stiefel::exp(&t, m)
                }
                Manifold::Flag(s) => {
                    let c = FlagPoint::new(center.clone(), s)?;
                    let h = random_horizontal(&c, s, r, m, rng)?;
                    Ok(geodesic(center, h.coords(), 1.0, m)?)
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flag::flag_equal;
    use crate::linalg::frob;
    use crate::stiefel::random_point_rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(n: usize, i: usize) -> Mat {
        let mut v = Mat::zeros(n, 1);
        v[(i, 0)] = 1.0;
        v
    }

    #[test]
    fn single_point_is_its_own_mean() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let m = MetricParams::embedded();
        let x0 = random_point_rng(6, 2, &mut r).unwrap();
        let t = random_tangent_rng(&x0, 0.5, &m, &mut r).unwrap();
        let q_near = crate::stiefel::exp(&t, &m).unwrap();
        let rep = karcher_mean(&[q_near.clone()], &x0, &m, &Manifold::Stiefel, &MeanOptions::default()).unwrap();
        assert!(frob(&(rep.mean.as_matrix() - q_near.as_matrix())) < 1e-8);
        assert!(rep.grad_norms[1] < 1e-8, "{:?}", rep.grad_norms);
    }

    #[test]
    fn two_points_on_the_sphere_meet_in_the_middle() {
        let m = MetricParams::embedded();
        let a = StiefelPoint::new(unit(3, 0)).unwrap();
        let b = StiefelPoint::new(unit(3, 1)).unwrap();
        let rep = karcher_mean(&[a.clone(), b.clone()], &a, &m, &Manifold::Stiefel, &MeanOptions::default()).unwrap();
        let mid = (unit(3, 0) + unit(3, 1)) / 2f64.sqrt();
        assert!(frob(&(rep.mean.as_matrix() - mid)) < 1e-8);
        let opts = SolverOptions::default();
        let at_mid = mean_square_distance(&rep.mean, &[a.clone(), b.clone()], &m, &Manifold::Stiefel, &opts).unwrap();
        let at_a = mean_square_distance(&a, &[a.clone(), b.clone()], &m, &Manifold::Stiefel, &opts).unwrap();
        assert!(at_mid < at_a);
        assert!(mean_square_distance(&a, &[a.clone(), a.clone()], &m, &Manifold::Stiefel, &opts).unwrap() < 1e-20);
    }

    #[test]
    fn small_cluster_converges_fast() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let m = MetricParams::with_ratio(0.5).unwrap();
        let c = random_point_rng(8, 3, &mut r).unwrap();
        let pts = sample_cluster(&c, 8, (0.2, 0.3), &m, &Manifold::Stiefel, &mut r).unwrap();
        let opts = MeanOptions { max_iter: 4, ..Default::default() };
        let rep = karcher_mean(&pts, &pts[0], &m, &Manifold::Stiefel, &opts).unwrap();
        assert!(rep.aborted.is_none());
        assert!(rep.grad_norms.last().unwrap() < &1e-6, "{:?}", rep.grad_norms);
        assert!(rep.msd.windows(2).all(|w| w[1] < w[0] + 1e-12));
        for w in rep.grad_norms.windows(2).skip(1) {
            assert!(w[1] <= 1.1 * w[0]);
        }
    }

    #[test]
    fn mean_is_left_equivariant() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let m = MetricParams::with_ratio(0.8).unwrap();
        let c = random_point_rng(6, 2, &mut r).unwrap();
        let pts = sample_cluster(&c, 5, (0.2, 0.4), &m, &Manifold::Stiefel, &mut r).unwrap();
        let o = random_point_rng(6, 6, &mut r).unwrap();
        let opts = MeanOptions { max_iter: 5, ..Default::default() };
        let a = karcher_mean(&pts, &pts[0], &m, &Manifold::Stiefel, &opts).unwrap();
        let moved: Vec<_> = pts.iter().map(|p| p.left_mul(o.as_matrix())).collect();
        let b = karcher_mean(&moved, &moved[0], &m, &Manifold::Stiefel, &opts).unwrap();
        assert!(frob(&(o.as_matrix() * a.mean.as_matrix() - b.mean.as_matrix())) < 1e-6);
    }

    #[test]
    fn flag_cluster_mean() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let m = MetricParams::embedded();
        let s = FlagShape::nested(&[1, 3], 7).unwrap();
        let space = Manifold::Flag(s.clone());
        let c = FlagPoint::random(&s, &mut r).unwrap();
        let pts = sample_cluster(c.stiefel(), 6, (0.2, 0.3), &m, &space, &mut r).unwrap();
        let rep = karcher_mean(&pts, &pts[0], &m, &space, &MeanOptions { max_iter: 5, ..Default::default() }).unwrap();
        assert!(rep.aborted.is_none());
        assert!(rep.grad_norms.last().unwrap() < &1e-6, "{:?}", rep.grad_norms);
        // a single flag point is its own mean up to class
        let one = karcher_mean(&pts[..1], c.stiefel(), &m, &space, &MeanOptions::default()).unwrap();
        let fm = FlagPoint::new(one.mean, &s).unwrap();
        assert!(flag_equal(&fm, &FlagPoint::new(pts[0].clone(), &s).unwrap(), &s, 1e-6));
    }

    #[test]
    fn rejects_empty_input() {
        let x = random_point_rng(4, 2, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let m = MetricParams::embedded();
        assert!(karcher_mean(&[], &x, &m, &Manifold::Stiefel, &MeanOptions::default()).is_err());
        assert!(sample_cluster(&x, 2, (0.5, 0.1), &m, &Manifold::Stiefel, &mut ChaCha8Rng::seed_from_u64(6)).is_err());
    }
}
