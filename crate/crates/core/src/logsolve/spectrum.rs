//! Hessian spectra of the log objective along a geodesic, used to locate
//! the first degeneracy (an empirical cut value).
//!
//! At `Z = Exp(t·η)` the minimizer is `(t·A, t·R)` with zero residual, so
//! the Hessian there is a Gram matrix: its smallest eigenvalue touches zero
//! at isolated conjugate times and is positive on either side. The search
//! therefore refines every local minimum of the smallest eigenvalue on a
//! grid instead of waiting for a sign change.

use serde::Serialize;

use super::{Objective, PackedVars, StiefelLogProblem};
use crate::stiefel::{decompose_tangent, geodesic, tangent_norm, MetricParams, StiefelPoint, TangentCoords, TangentVector};
use crate::{Error, Mat, Result};

/// Central-difference step used by the spectrum diagnostics.
pub const SPECTRUM_STEP: f64 = 1e-6;

/// Dense Hessian operator `W⁻¹∇²F` at `x`, column `i` being the
/// difference quotient of the gradient along the `i`-th packed unit vector.
pub fn assemble_hessian<O: Objective + ?Sized>(obj: &O, x: &PackedVars, h: f64, central: bool) -> Result<Mat> {
    let n = obj.packing().dim();
    let mut out = Mat::zeros(n, n);
    let g0 = if central { None } else { Some(obj.gradient(x)?) };
    for i in 0..n {
        let mut xp = x.clone();
        xp[i] += h;
        let col = match &g0 {
            Some(g0) => (obj.gradient(&xp)? - g0) / h,
            None => {
                let mut xm = x.clone();
                xm[i] -= h;
                (obj.gradient(&xp)? - obj.gradient(&xm)?) / (2.0 * h)
            }
        };
        out.set_column(i, &col);
    }
    Ok(out)
}

/// Eigenvalues (ascending) of the `W`-self-adjoint part of a Hessian operator,
/// i.e. of `sym(W^{1/2}·H·W^{-1/2})`.
pub fn operator_eigenvalues(h: &Mat, weights: &[f64]) -> Vec<f64> {
    let s: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let m = Mat::from_fn(h.nrows(), h.ncols(), |i, j| s[i] * h[(i, j)] / s[j]);
    let sym = (&m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub t: f64,
    pub min: f64,
    pub max: f64,
}

struct Track<'a> {
    ytil: &'a StiefelPoint,
    coords: TangentCoords,
    metric: MetricParams,
}

impl Track<'_> {
    fn new<'a>(ytil: &'a StiefelPoint, dir: &TangentVector, m: &MetricParams) -> Result<Track<'a>> {
        let norm = tangent_norm(dir, m);
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Domain(format!("direction must have unit length, got {norm}")));
        }
        Ok(Track { ytil, coords: decompose_tangent(dir)?, metric: *m })
    }

    fn at(&self, t: f64) -> Result<SpectrumPoint> {
        let z = geodesic(self.ytil, &self.coords, t, &self.metric)?;
        let prob = StiefelLogProblem::new(self.ytil, &z, self.coords.q.clone(), &self.metric)?;
        let x = prob.packing().pack(&(&self.coords.a * t), &(&self.coords.r * t));
        let h = assemble_hessian(&prob, &x, SPECTRUM_STEP, true)?;
        let ev = operator_eigenvalues(&h, prob.packing().weights());
        Ok(SpectrumPoint { t, min: ev[0], max: ev[ev.len() - 1] })
    }
}

/// Extreme eigenvalues of the Hessian at `(t·A, t·R)` for `Z = Exp(t·η)`,
/// for each `t` in the grid. `eta_dir` must have unit metric length.
pub fn hessian_spectrum(
    ytil: &StiefelPoint,
    eta_dir: &TangentVector,
    t_grid: &[f64],
    m: &MetricParams,
) -> Result<Vec<SpectrumPoint>> {
    let track = Track::new(ytil, eta_dir, m)?;
    t_grid.iter().map(|&t| track.at(t)).collect()
}

/// Parameters of [`cut_value_search`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutSearch {
    /// An eigenvalue below this counts as degenerate.
    pub threshold: f64,
    pub t_max: f64,
    /// Number of grid intervals on `(0, t_max]`.
    pub grid: usize,
    /// Width at which golden-section refinement stops.
    pub refine_tol: f64,
}

impl Default for CutSearch {
    fn default() -> Self {
        Self { threshold: 1e-8, t_max: 1.4 * std::f64::consts::PI, grid: 100, refine_tol: 1e-7 }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_min(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// First `t ≤ t_max` at which the smallest Hessian eigenvalue drops below
/// the threshold, or `None`.
pub fn cut_value_search(
    ytil: &StiefelPoint,
    eta_dir: &TangentVector,
    m: &MetricParams,
    search: &CutSearch,
) -> Result<Option<f64>> {
    if search.grid < 2 || !(search.t_max > 0.0) {
        return Err(Error::Config(format!("invalid cut search parameters {search:?}")));
    }
    let track = Track::new(ytil, eta_dir, m)?;
    let step = search.t_max / search.grid as f64;
    let min_at = |t: f64| track.at(t).map(|s| s.min);
    let mut prev2 = f64::INFINITY;
    let mut prev = min_at(step)?;
    if prev < search.threshold {
        return Ok(Some(step));
    }
    for i in 2..=search.grid {
        let t = step * i as f64;
        let cur = min_at(t)?;
        if cur < search.threshold {
            let (tr, vr) = golden_min(&min_at, t - 2.0 * step, t, search.refine_tol)?;
            return Ok(Some(if vr < search.threshold { tr } else { t }));
        }
        // local minimum at the previous grid point
        if prev <= prev2 && prev <= cur {
            let (tr, vr) = golden_min(&min_at, t - 2.0 * step, t, search.refine_tol)?;
            if vr < search.threshold {
                return Ok(Some(tr));
            }
        }
        prev2 = prev;
        prev = cur;
    }
    Ok(None)
}
