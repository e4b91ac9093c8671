//! Trust-region minimization with a truncated conjugate-gradient
//! (Steihaug-Toint) subproblem solver and finite-difference Hessian-vector
//! products. All inner products use the packing weights `W`.

use serde::Serialize;

use super::{Objective, PackedVars};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Stop once `‖g‖_W ≤ grad_tol`.
    pub grad_tol: f64,
    /// Forward-difference step of the Hessian-vector product.
    pub hvp_step: f64,
    pub initial_radius: f64,
    pub max_radius: f64,
    /// Cap on the relative CG residual; the forcing term is
    /// `min(cg_tol, √‖g‖)·‖g‖`.
    pub cg_tol: f64,
    /// Stiefel endpoint tolerance; `None` means `1e-5·√p`.
    pub endpoint_tol: Option<f64>,
    /// Relative embedding tolerance for flag endpoints.
    pub flag_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 1e-9,
            hvp_step: 1e-8,
            initial_radius: 1.0,
            max_radius: 1e3,
            cg_tol: 0.5,
            endpoint_tol: None,
            flag_tol: 1e-6,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.grad_tol, self.hvp_step, self.initial_radius, self.max_radius, self.cg_tol, self.flag_tol];
        if self.max_iter == 0 || positive.iter().any(|v| !(*v > 0.0)) || self.endpoint_tol.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config(format!("solver options must be positive: {self:?}")));
        }
        if self.initial_radius > self.max_radius {
            return Err(Error::Config("initial radius exceeds the maximum radius".into()));
        }
        Ok(())
    }
}

/// Evaluation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EvalCounts {
    pub f: usize,
    pub grad: usize,
    pub hvp: usize,
}

impl EvalCounts {
    /// Function, gradient and Hessian-vector evaluations weighted 1, 2, 4.
    pub fn weighted(&self) -> f64 {
        (self.f + 2 * self.grad + 4 * self.hvp) as f64
    }
}

#[derive(Debug, Clone)]
pub struct TrOutcome {
    pub x: PackedVars,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub counts: EvalCounts,
}

impl TrOutcome {
    pub(crate) fn aborted(x: PackedVars, counts: EvalCounts) -> Self {
        Self { x, value: f64::NAN, grad_norm: f64::NAN, iterations: 0, converged: false, counts }
    }
}

/// A numerical abort together with the work done before it.
#[derive(Debug)]
pub struct TrAbort {
    pub error: Error,
    pub counts: EvalCounts,
}

impl From<TrAbort> for Error {
    fn from(a: TrAbort) -> Self {
        a.error
    }
}

/// `(g(x + h·v) − g(x))/h`, with the probe taken along `v/‖v‖_W` and the
/// result rescaled by `‖v‖_W`, so that short directions are not lost to
/// round-off.
pub fn hessian_vec<O: Objective + ?Sized>(obj: &O, x: &PackedVars, v: &PackedVars, h: f64) -> Result<PackedVars> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {h}")));
    }
    if v.iter().all(|c| *c == 0.0) {
        return Ok(PackedVars::zeros(v.len()));
    }
    let g0 = obj.gradient(x)?;
    hvp_with(obj, x, &g0, v, h)
}

fn hvp_with<O: Objective + ?Sized>(obj: &O, x: &PackedVars, g0: &PackedVars, v: &PackedVars, h: f64) -> Result<PackedVars> {
    let norm = obj.packing().norm(v);
    if norm == 0.0 {
        return Ok(PackedVars::zeros(v.len()));
    }
    let g1 = obj.gradient(&(x + v * (h / norm)))?;
    Ok((g1 - g0) * (norm / h))
}

struct Counted<'a, O: ?Sized> {
    obj: &'a O,
    counts: EvalCounts,
}

impl<O: Objective + ?Sized> Counted<'_, O> {
    fn finite<T>(&self, v: Result<T>, ok: impl Fn(&T) -> bool, what: &str) -> std::result::Result<T, TrAbort> {
        match v {
            Ok(t) if ok(&t) => Ok(t),
            Ok(_) => Err(TrAbort { error: Error::Numeric(format!("non-finite {what}")), counts: self.counts }),
            Err(error) => Err(TrAbort { error, counts: self.counts }),
        }
    }

    fn value(&mut self, x: &PackedVars) -> std::result::Result<f64, TrAbort> {
        self.counts.f += 1;
        self.finite(self.obj.value(x), |v| v.is_finite(), "objective")
    }

    fn gradient(&mut self, x: &PackedVars) -> std::result::Result<PackedVars, TrAbort> {
        self.counts.grad += 1;
        self.finite(self.obj.gradient(x), |g| g.iter().all(|c| c.is_finite()), "gradient")
    }

    fn hvp(&mut self, x: &PackedVars, g0: &PackedVars, v: &PackedVars, h: f64) -> std::result::Result<PackedVars, TrAbort> {
        self.counts.hvp += 1;
        self.finite(hvp_with(self.obj, x, g0, v, h), |g| g.iter().all(|c| c.is_finite()), "Hessian-vector product")
    }
}

/// Largest `τ ≥ 0` with `‖z + τd‖_W = radius`.
fn to_boundary<O: Objective + ?Sized>(obj: &O, z: &PackedVars, d: &PackedVars, radius: f64) -> f64 {
    let pk = obj.packing();
    let dd = pk.inner(d, d);
    let zd = pk.inner(z, d);
    let zz = pk.inner(z, z);
    let disc = (zd * zd + dd * (radius * radius - zz)).max(0.0);
    (-zd + disc.sqrt()) / dd
}

/// Steihaug-Toint CG on the model `⟨g, s⟩_W + ½⟨s, Bs⟩_W`. Returns the step
/// and the predicted decrease.
fn steihaug<O: Objective + ?Sized>(
    c: &mut Counted<'_, O>,
    x: &PackedVars,
    g: &PackedVars,
    radius: f64,
    opts: &SolverOptions,
) -> std::result::Result<(PackedVars, f64), TrAbort> {
    let pk = c.obj.packing();
    let n = g.len();
    let gnorm = pk.norm(g);
    let tol = opts.cg_tol.min(gnorm.sqrt()) * gnorm;
    let mut z = PackedVars::zeros(n);
    let mut bz = PackedVars::zeros(n);
    let mut r = g.clone();
    let mut d = -g;
    let mut rr = pk.inner(&r, &r);
    for _ in 0..(2 * n).max(1) {
        let bd = c.hvp(x, g, &d, opts.hvp_step)?;
        let dbd = pk.inner(&d, &bd);
        if dbd <= 0.0 {
            let tau = to_boundary(c.obj, &z, &d, radius);
            z += &d * tau;
            bz += &bd * tau;
            break;
        }
        let step = rr / dbd;
        let z_next = &z + &d * step;
        if pk.norm(&z_next) >= radius {
            let tau = to_boundary(c.obj, &z, &d, radius);
            z += &d * tau;
            bz += &bd * tau;
            break;
        }
        z = z_next;
        bz += &bd * step;
        r += &bd * step;
        let rr_next = pk.inner(&r, &r);
        if rr_next.sqrt() <= tol {
            break;
        }
        d = -&r + &d * (rr_next / rr);
        rr = rr_next;
    }
    let pred = -(pk.inner(g, &z) + 0.5 * pk.inner(&z, &bz));
    Ok((z, pred))
}

/// Minimizes `obj` from `x0`. Stops at `‖g‖_W ≤ grad_tol`, after `max_iter`
/// iterations, or when the trust region collapses.
pub fn trust_region_minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: PackedVars,
    opts: &SolverOptions,
) -> std::result::Result<TrOutcome, TrAbort> {
    let mut c = Counted { obj, counts: EvalCounts::default() };
    opts.validate().map_err(|error| TrAbort { error, counts: c.counts })?;
    if x0.len() != obj.packing().dim() {
        let error = Error::Shape(format!("{} variables for a {}-dimensional problem", x0.len(), obj.packing().dim()));
        return Err(TrAbort { error, counts: c.counts });
    }
    let pk = obj.packing();
    let mut x = x0;
    let mut f = c.value(&x)?;
    let mut g = c.gradient(&x)?;
    let mut gnorm = pk.norm(&g);
    let mut radius = opts.initial_radius;
    let mut iterations = 0;
    let mut converged = gnorm <= opts.grad_tol;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let (s, pred) = steihaug(&mut c, &x, &g, radius, opts)?;
        let x_new = &x + &s;
        let f_new = c.value(&x_new)?;
        // Both decreases are regularized so that round-off in f near the
        // optimum does not reject good steps.
        let reg = 1e3 * f64::EPSILON * f.abs().max(1.0);
        let rho = if pred > 0.0 { (f - f_new + reg) / (pred + reg) } else { f64::NEG_INFINITY };
        let snorm = pk.norm(&s);
        if rho < 0.25 {
            radius = 0.25 * snorm.min(radius);
        } else if rho > 0.75 && snorm >= 0.99 * radius {
            radius = (2.0 * radius).min(opts.max_radius);
        }
        if rho > 0.1 {
            x = x_new;
            f = f_new;
            g = c.gradient(&x)?;
            gnorm = pk.norm(&g);
            converged = gnorm <= opts.grad_tol;
        }
        if radius <= f64::EPSILON * (1.0 + pk.norm(&x)) {
            break;
        }
    }
    Ok(TrOutcome { x, value: f, grad_norm: gnorm, iterations, converged, counts: c.counts })
}
