//! The Stiefel manifold `St(p, n)` under the `(α₀, α₁)` metric family.
//!
//! A tangent vector `η` at `Ỹ` is stored in reduced coordinates
//! `η = Ỹ·A + Q·R`, where `A = Ỹᵀη` is antisymmetric, `Q` is an orthonormal
//! basis (`n × k`, `k ≤ p`) of the normal part `η − ỸỸᵀη`, and `R = Qᵀη`.
//! In these coordinates the geodesic with `Y(0) = Ỹ`, `Ẏ(0) = η` is
//!
//! ```text
//! Y(t) = [Ỹ Q] · exp(t·Â) · I_{p+k,p} · exp((1 − 2α)·t·A),   Â = [[2αA, −Rᵀ], [R, 0]]
//! ```
//!
//! with `α = α₁/α₀`, so only `(p + k)`-sized exponentials are needed.
//! [`geodesic_alt`] and [`geodesic_fullsize`] evaluate two other closed forms
//! of the same curve and are used to cross-check [`geodesic`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::ensure_shape;
use crate::linalg::{asym, complement_basis, frob, hcat, is_finite, orth_defect, sym, vcat};
use crate::matfun::expm;
use crate::{Error, Mat, Result};

/// Metric parameters `(α₀, α₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    alpha0: f64,
    alpha1: f64,
}

impl MetricParams {
    pub fn new(alpha0: f64, alpha1: f64) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha1 > 0.0 && alpha0.is_finite() && alpha1.is_finite()) {
            return Err(Error::Domain(format!(
                "metric parameters must be positive, got ({alpha0}, {alpha1})"
            )));
        }
        Ok(Self { alpha0, alpha1 })
    }

    /// `α₀ = 1`, `α₁ = alpha`.
    pub fn with_ratio(alpha: f64) -> Result<Self> {
        Self::new(1.0, alpha)
    }

    pub fn embedded() -> Self {
        Self { alpha0: 1.0, alpha1: 1.0 }
    }

    pub fn canonical() -> Self {
        Self { alpha0: 1.0, alpha1: 0.5 }
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    /// `α = α₁ / α₀`.
    pub fn alpha(&self) -> f64 {
        self.alpha1 / self.alpha0
    }
}

impl Default for MetricParams {
    fn default() -> Self {
        Self::embedded()
    }
}

/// An `n × p` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint(Mat);

impl StiefelPoint {
    pub fn new(y: Mat) -> Result<Self> {
        let (n, p) = y.shape();
        if p == 0 || n < p {
            return Err(Error::Shape(format!("Stiefel point needs n ≥ p ≥ 1, got {n}×{p}")));
        }
        if !is_finite(&y) {
            return Err(Error::Domain("non-finite Stiefel point".into()));
        }
        let defect = orth_defect(&y);
        if defect > 1e-10 * (p as f64).sqrt() {
            return Err(Error::Domain(format!("columns are not orthonormal (defect {defect:.3e})")));
        }
        Ok(Self(y))
    }

    /// Orthonormalizes `m` through its thin QR factor.
    pub fn from_qr(m: &Mat) -> Result<Self> {
        let (n, p) = m.shape();
        if p == 0 || n < p {
            return Err(Error::Shape(format!("need n ≥ p ≥ 1, got {n}×{p}")));
        }
        Self::new(m.clone().qr().q())
    }

    pub(crate) fn from_unchecked(y: Mat) -> Self {
        Self(y)
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn p(&self) -> usize {
        self.0.ncols()
    }

    /// `O·Y` for an `n × n` orthogonal `O`.
    pub fn left_mul(&self, o: &Mat) -> Self {
        Self(o * &self.0)
    }

    /// `Y·U` for a `p × p` orthogonal `U`.
    pub fn right_mul(&self, u: &Mat) -> Self {
        Self(&self.0 * u)
    }
}

/// A tangent vector `η` at `base`, i.e. `baseᵀη` is antisymmetric.
#[derive(Debug, Clone)]
pub struct TangentVector {
    base: StiefelPoint,
    eta: Mat,
}

impl TangentVector {
    pub fn new(base: &StiefelPoint, eta: Mat) -> Result<Self> {
        ensure_shape(eta.shape() == base.0.shape(), || {
            format!("tangent {:?} at point {:?}", eta.shape(), base.0.shape())
        })?;
        if !is_finite(&eta) {
            return Err(Error::Domain("non-finite tangent vector".into()));
        }
        let ya = base.0.transpose() * &eta;
        let defect = frob(&(&ya + ya.transpose()));
        if defect > 1e-9 * (1.0 + frob(&eta)) {
            return Err(Error::Domain(format!("Yᵀη is not antisymmetric (defect {defect:.3e})")));
        }
        Ok(Self { base: base.clone(), eta })
    }

    pub fn zero(base: &StiefelPoint) -> Self {
        Self { base: base.clone(), eta: Mat::zeros(base.n(), base.p()) }
    }

    pub(crate) fn from_unchecked(base: &StiefelPoint, eta: Mat) -> Self {
        Self { base: base.clone(), eta }
    }

    pub fn base(&self) -> &StiefelPoint {
        &self.base
    }

    pub fn eta(&self) -> &Mat {
        &self.eta
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { base: self.base.clone(), eta: &self.eta * s }
    }
}

/// Reduced coordinates `(A, Q, R)` of `η = Ỹ·A + Q·R`.
#[derive(Debug, Clone)]
pub struct TangentCoords {
    /// `p × p` antisymmetric.
    pub a: Mat,
    /// `n × k` orthonormal, orthogonal to the base point.
    pub q: Mat,
    /// `k × p`.
    pub r: Mat,
}

impl TangentCoords {
    pub fn zero(n: usize, p: usize) -> Self {
        Self { a: Mat::zeros(p, p), q: Mat::zeros(n, 0), r: Mat::zeros(0, p) }
    }

    pub fn k(&self) -> usize {
        self.q.ncols()
    }

    pub fn p(&self) -> usize {
        self.a.nrows()
    }

    /// `√(α₀·Tr RᵀR − α₁·Tr A²)`.
    pub fn norm(&self, m: &MetricParams) -> f64 {
        let a2 = self.a.norm_squared(); // −Tr A² for antisymmetric A
        (m.alpha0 * self.r.norm_squared() + m.alpha1 * a2).sqrt()
    }

    /// `Ỹ·A + Q·R`.
    pub fn eta(&self, ytil: &StiefelPoint) -> Mat {
        let mut out = &ytil.0 * &self.a;
        if self.k() > 0 {
            out += &self.q * &self.r;
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { a: &self.a * s, q: self.q.clone(), r: &self.r * s }
    }
}

/// `Tr(w1ᵀ(α₀·w2 + (α₁ − α₀)·YYᵀw2))`.
pub fn metric_inner(y: &StiefelPoint, w1: &Mat, w2: &Mat, m: &MetricParams) -> Result<f64> {
    ensure_shape(w1.shape() == y.0.shape() && w2.shape() == y.0.shape(), || {
        format!("vectors {:?}, {:?} at point {:?}", w1.shape(), w2.shape(), y.0.shape())
    })?;
    let y1 = y.0.transpose() * w1;
    let y2 = y.0.transpose() * w2;
    Ok(m.alpha0 * w1.dot(w2) + (m.alpha1 - m.alpha0) * y1.dot(&y2))
}

/// `W − Y·sym(YᵀW)`.
pub fn project_tangent(y: &StiefelPoint, w: &Mat) -> Result<TangentVector> {
    ensure_shape(w.shape() == y.0.shape(), || {
        format!("ambient vector {:?} at point {:?}", w.shape(), y.0.shape())
    })?;
    let s = sym(&(y.0.transpose() * w));
    Ok(TangentVector { base: y.clone(), eta: w - &y.0 * s })
}

pub fn tangent_norm(t: &TangentVector, m: &MetricParams) -> f64 {
    metric_inner(&t.base, &t.eta, &t.eta, m)
        .expect("tangent shape matches its base")
        .max(0.0)
        .sqrt()
}

/// Splits `η` into `(A, Q, R)`. The rank `k` of the normal part counts
/// singular values above `max(n, p)·ε·‖η‖_F`.
pub fn decompose_tangent(t: &TangentVector) -> Result<TangentCoords> {
    let y = &t.base.0;
    let yte = y.transpose() * &t.eta;
    let a = asym(&yte);
    let normal = &t.eta - y * &yte;
    let q = complement_basis(y, &t.eta, frob(&t.eta))?;
    let r = q.transpose() * &normal;
    Ok(TangentCoords { a, q, r })
}

/// `Â = [[2α·A, −Rᵀ], [R, 0]]`.
pub(crate) fn hat(a: &Mat, r: &Mat, alpha: f64) -> Mat {
    let k = r.nrows();
    let top = hcat(&(a * (2.0 * alpha)), &(-r.transpose()));
    let bottom = hcat(r, &Mat::zeros(k, k));
    vcat(&top, &bottom)
}

fn check_coords(ytil: &StiefelPoint, c: &TangentCoords) -> Result<()> {
    let (n, p) = ytil.0.shape();
    ensure_shape(
        c.a.shape() == (p, p) && c.q.nrows() == n && c.r.shape() == (c.k(), p),
        || format!("coordinates A{:?} Q{:?} R{:?} at point {n}×{p}", c.a.shape(), c.q.shape(), c.r.shape()),
    )
}

/// Geodesic through `Ỹ` with initial velocity `Ỹ·A + Q·R`, evaluated at `t`
/// with `(p + k)`-sized exponentials.
pub fn geodesic(ytil: &StiefelPoint, c: &TangentCoords, t: f64, m: &MetricParams) -> Result<StiefelPoint> {
    check_coords(ytil, c)?;
    let p = ytil.p();
    let alpha = m.alpha();
    let ahat = hat(&(&c.a * t), &(&c.r * t), alpha);
    let u = expm(&ahat)?;
    let tail = expm(&(&c.a * ((1.0 - 2.0 * alpha) * t)))?;
    let v = u.columns(0, p) * tail;
    let mut y = &ytil.0 * v.rows(0, p);
    if c.k() > 0 {
        y += &c.q * v.rows(p, c.k());
    }
    Ok(StiefelPoint(y))
}

/// The same geodesic through the `2p × 2p` exponential
/// `[Ỹ η]·exp(t·[[(2α−1)A, 2(α−1)A² − S₀], [I, A]])·[exp((1−2α)tA); 0]`.
pub fn geodesic_alt(ytil: &StiefelPoint, c: &TangentCoords, t: f64, m: &MetricParams) -> Result<StiefelPoint> {
    check_coords(ytil, c)?;
    let p = ytil.p();
    let alpha = m.alpha();
    let eta = c.eta(ytil);
    let a = &c.a;
    let s0 = eta.transpose() * &eta;
    let a2 = a * a;
    let top = hcat(&(a * (2.0 * alpha - 1.0)), &(&a2 * (2.0 * (alpha - 1.0)) - s0));
    let bottom = hcat(&Mat::identity(p, p), a);
    let big = expm(&(vcat(&top, &bottom) * t))?;
    let tail = expm(&(a * ((1.0 - 2.0 * alpha) * t)))?;
    let v = big.columns(0, p) * tail;
    let y = &ytil.0 * v.rows(0, p) + &eta * v.rows(p, p);
    Ok(StiefelPoint(y))
}

/// The geodesic as a product of two `n × n` exponentials. Costs `O(n³)`;
/// intended as a test oracle.
pub fn geodesic_fullsize(ytil: &StiefelPoint, tv: &TangentVector, t: f64, m: &MetricParams) -> Result<StiefelPoint> {
    ensure_shape(tv.eta.shape() == ytil.0.shape(), || "tangent does not match point".into())?;
    let alpha = m.alpha();
    let y = &ytil.0;
    let eta = &tv.eta;
    let yayt = y * (y.transpose() * eta) * y.transpose();
    let first = &yayt * (2.0 * alpha - 2.0) - y * eta.transpose() + eta * y.transpose();
    let second = &yayt * (1.0 - 2.0 * alpha);
    let out = expm(&(first * t))? * expm(&(second * t))? * y;
    Ok(StiefelPoint(out))
}

/// Frobenius norm of `Ÿ + Y·ẎᵀẎ + 2(1−α)(I − YYᵀ)ẎẎᵀY` at `t`, with both
/// derivatives taken by central differences of step `dt`.
pub fn geodesic_residual<F>(path: F, t: f64, dt: f64, m: &MetricParams) -> Result<f64>
where
    F: Fn(f64) -> Result<Mat>,
{
    let y = path(t)?;
    let yp = path(t + dt)?;
    let ym = path(t - dt)?;
    let yd = (&yp - &ym) / (2.0 * dt);
    let ydd = (&yp - &y * 2.0 + &ym) / (dt * dt);
    let x = &yd * (yd.transpose() * &y);
    let horizontal = &x - &y * (y.transpose() * &x);
    let r = ydd + &y * (yd.transpose() * &yd) + horizontal * (2.0 * (1.0 - m.alpha()));
    Ok(frob(&r))
}

pub(crate) fn gaussian<R: Rng>(n: usize, p: usize, rng: &mut R) -> Mat {
    Mat::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

pub fn random_point_rng<R: Rng>(n: usize, p: usize, rng: &mut R) -> Result<StiefelPoint> {
    StiefelPoint::from_qr(&gaussian(n, p, rng))
}

/// Tangent vector of metric length `length`, drawn by projecting a Gaussian matrix.
pub fn random_tangent_rng<R: Rng>(
    y: &StiefelPoint,
    length: f64,
    m: &MetricParams,
    rng: &mut R,
) -> Result<TangentVector> {
    if !(length >= 0.0) {
        return Err(Error::Domain(format!("length must be nonnegative, got {length}")));
    }
    let w = gaussian(y.n(), y.p(), rng);
    let t = project_tangent(y, &w)?;
    let norm = tangent_norm(&t, m);
    if norm == 0.0 {
        return Ok(TangentVector::zero(y));
    }
    Ok(t.scaled(length / norm))
}

pub fn random_point(n: usize, p: usize, seed: u64) -> Result<StiefelPoint> {
    random_point_rng(n, p, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn random_tangent(y: &StiefelPoint, length: f64, m: &MetricParams, seed: u64) -> Result<TangentVector> {
    random_tangent_rng(y, length, m, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `Exp_Y(η)`.
pub fn exp(t: &TangentVector, m: &MetricParams) -> Result<StiefelPoint> {
    let c = decompose_tangent(t)?;
    geodesic(&t.base, &c, 1.0, m)
}
