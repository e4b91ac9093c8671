//! Closed-form geometry of the Grassmannian `Gr(p, n)` as a quotient of the
//! Stiefel manifold by `O(p)`.
//!
//! A subspace is represented by any orthonormal basis. Horizontal vectors
//! satisfy `Ỹᵀη = 0`, and only `α₀` enters the metric on them.
//!
//! The SVD convention at the API boundary is `ỸᵀZ = U·Σ·Vᵀ` (nalgebra's
//! `u`, `singular_values`, `v_t`), so the logarithm reads
//! `η = (Z − ỸỸᵀZ)·V·(I − Σ²)^{-1/2}·arccos Σ·Uᵀ` and the representative
//! of `⟦Z⟧` reached by the geodesic is `Z·V·Uᵀ`.

use rand::Rng;
use serde::Serialize;

use crate::error::ensure_shape;
use crate::linalg::{frob, is_finite};
use crate::matfun::{arccos_factor, csr, ssr, sym_apply, SymmetricPsd};
use crate::stiefel::{gaussian, MetricParams, StiefelPoint};
use crate::{Error, Mat, Result};

/// Singular values of `ỸᵀZ` below this mark a principal angle at `π/2`.
pub const CUT_LOCUS_TOL: f64 = 1e-8;
const SAME_CLASS_TOL: f64 = 1e-12;

/// A representative of the subspace `⟦Y⟧`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannRep(pub StiefelPoint);

impl GrassmannRep {
    /// Whether two representatives span the same subspace (all principal
    /// angles below `tol`).
    pub fn same_class(&self, other: &GrassmannRep, tol: f64) -> Result<bool> {
        let angles = principal_angles(&self.0, &other.0)?;
        Ok(angles.iter().all(|&a| a <= tol))
    }
}

/// `η` at `base` with `baseᵀη = 0`.
#[derive(Debug, Clone)]
pub struct HorizontalVector {
    base: StiefelPoint,
    eta: Mat,
}

impl HorizontalVector {
    pub fn new(base: &StiefelPoint, eta: Mat) -> Result<Self> {
        ensure_shape(eta.shape() == base.as_matrix().shape(), || {
            format!("horizontal vector {:?} at point {:?}", eta.shape(), base.as_matrix().shape())
        })?;
        if !is_finite(&eta) {
            return Err(Error::Domain("non-finite horizontal vector".into()));
        }
        let defect = frob(&(base.as_matrix().transpose() * &eta));
        if defect > 1e-9 * (1.0 + frob(&eta)) {
            return Err(Error::Domain(format!("vector is not horizontal (‖Yᵀη‖ = {defect:.3e})")));
        }
        Ok(Self { base: base.clone(), eta })
    }

    pub fn zero(base: &StiefelPoint) -> Self {
        Self { base: base.clone(), eta: Mat::zeros(base.n(), base.p()) }
    }

    /// `η − Y·Yᵀη`.
    pub fn project(base: &StiefelPoint, w: &Mat) -> Result<Self> {
        ensure_shape(w.shape() == base.as_matrix().shape(), || "ambient vector does not match point".into())?;
        let y = base.as_matrix();
        Ok(Self { base: base.clone(), eta: w - y * (y.transpose() * w) })
    }

    pub fn base(&self) -> &StiefelPoint {
        &self.base
    }

    pub fn eta(&self) -> &Mat {
        &self.eta
    }

    /// `√α₀·‖η‖_F`.
    pub fn norm(&self, m: &MetricParams) -> f64 {
        m.alpha0().sqrt() * frob(&self.eta)
    }
}

/// `Ỹ·csr(ηᵀη) + η·ssr(ηᵀη)`.
pub fn grass_exp(h: &HorizontalVector) -> Result<StiefelPoint> {
    let g = SymmetricPsd::gram(&h.eta);
    let c = sym_apply(&g, csr)?;
    let s = sym_apply(&g, ssr)?;
    Ok(StiefelPoint::from_unchecked(h.base.as_matrix() * c + &h.eta * s))
}

/// Result of [`grass_log`].
#[derive(Debug, Clone)]
pub struct GrassLog {
    pub eta: HorizontalVector,
    /// `Z·V·Uᵀ`, the representative of `⟦Z⟧` with `grass_exp(η) = aligned`.
    pub aligned: StiefelPoint,
    pub distance: f64,
    /// Principal angles, ascending.
    pub angles: Vec<f64>,
    /// Some principal angle sits at `π/2`, so the minimizing geodesic is not unique.
    pub near_cut_locus: bool,
}

impl Serialize for GrassLog {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("GrassLog", 3)?;
        st.serialize_field("distance", &self.distance)?;
        st.serialize_field("angles", &self.angles)?;
        st.serialize_field("near_cut_locus", &self.near_cut_locus)?;
        st.end()
    }
}

fn check_pair(ytil: &StiefelPoint, z: &StiefelPoint) -> Result<()> {
    ensure_shape(ytil.as_matrix().shape() == z.as_matrix().shape(), || {
        format!("points {:?} and {:?}", ytil.as_matrix().shape(), z.as_matrix().shape())
    })
}

struct Alignment {
    c: Mat,
    u: Mat,
    vt: Mat,
    sigma: Vec<f64>,
    /// `atan2(‖(Z − ỸỸᵀZ)vⱼ‖, σⱼ)`, accurate for small angles where `acos σ` is not.
    angles: Vec<f64>,
}

fn align(ytil: &StiefelPoint, z: &StiefelPoint) -> Result<Alignment> {
    check_pair(ytil, z)?;
    let y = ytil.as_matrix();
    let c = y.transpose() * z.as_matrix();
    let crate::linalg::Svd { u, s: sigma, vt } = crate::linalg::svd(&c)?;
    let nv = (z.as_matrix() - y * &c) * vt.transpose();
    let angles = sigma.iter().enumerate().map(|(j, s)| nv.column(j).norm().atan2(*s)).collect();
    Ok(Alignment { c, u, vt, sigma, angles })
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Principal angles between the spans, ascending.
pub fn principal_angles(ytil: &StiefelPoint, z: &StiefelPoint) -> Result<Vec<f64>> {
    Ok(sorted(align(ytil, z)?.angles))
}

pub fn grass_log(ytil: &StiefelPoint, z: &StiefelPoint, m: &MetricParams) -> Result<GrassLog> {
    let Alignment { c, u, vt, sigma, angles } = align(ytil, z)?;
    let distance = m.alpha0().sqrt() * angles.iter().map(|a| a * a).sum::<f64>().sqrt();
    let near_cut_locus = sigma.iter().any(|&s| s < CUT_LOCUS_TOL);
    let aligned = StiefelPoint::from_unchecked(z.as_matrix() * vt.transpose() * u.transpose());
    let angles = sorted(angles);

    if sigma.iter().all(|&s| s > 1.0 - SAME_CLASS_TOL) {
        return Ok(GrassLog { eta: HorizontalVector::zero(ytil), aligned, distance, angles, near_cut_locus });
    }
    let factors = arccos_factor(&sigma)?;
    let normal = z.as_matrix() - ytil.as_matrix() * &c;
    let mut nv = normal * vt.transpose();
    for (j, f) in factors.iter().enumerate() {
        nv.column_mut(j).scale_mut(*f);
    }
    let eta = nv * u.transpose();
    Ok(GrassLog { eta: HorizontalVector { base: ytil.clone(), eta }, aligned, distance, angles, near_cut_locus })
}

/// `√(α₀·Σ θᵢ²)` over the principal angles `θᵢ`.
pub fn grass_dist(ytil: &StiefelPoint, z: &StiefelPoint, m: &MetricParams) -> Result<f64> {
    let angles = principal_angles(ytil, z)?;
    Ok(m.alpha0().sqrt() * angles.iter().map(|a| a * a).sum::<f64>().sqrt())
}

/// Horizontal vector at `y` whose singular values are `angles`, with random
/// singular vectors. Needs `n ≥ 2p`.
pub fn horizontal_with_angles<R: Rng>(y: &StiefelPoint, angles: &[f64], rng: &mut R) -> Result<HorizontalVector> {
    let (n, p) = (y.n(), y.p());
    ensure_shape(angles.len() == p, || format!("{} angles for p = {p}", angles.len()))?;
    if n < 2 * p {
        return Err(Error::Shape(format!("need n ≥ 2p for {p} independent angles, got n = {n}")));
    }
    let w = HorizontalVector::project(y, &gaussian(n, p, rng))?;
    let w = w.eta.qr().q();
    let x = gaussian(p, p, rng).qr().q();
    let mut ws = w;
    for (j, a) in angles.iter().enumerate() {
        ws.column_mut(j).scale_mut(*a);
    }
    HorizontalVector::new(y, ws * x.transpose())
}

/// Horizontal vector of Frobenius norm `length` from a projected Gaussian.
pub fn random_horizontal_rng<R: Rng>(y: &StiefelPoint, length: f64, rng: &mut R) -> Result<HorizontalVector> {
    let h = HorizontalVector::project(y, &gaussian(y.n(), y.p(), rng))?;
    let norm = frob(&h.eta);
    Ok(HorizontalVector { base: y.clone(), eta: h.eta * (length / norm) })
}
