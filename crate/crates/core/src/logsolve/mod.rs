//! Riemannian logarithms by trust-region shooting.
//!
//! For fixed `(Ỹ, Z)` and a fixed orthonormal basis `Q` of the span of
//! `Z − ỸỸᵀZ`, the logarithm is found by minimizing the endpoint mismatch
//! over the reduced coordinates `(A, R)` of the initial velocity
//! `η = Ỹ·A + Q·R`. Gradients come from Fréchet derivatives of the matrix
//! exponential and Hessian-vector products from finite differences of the
//! gradient.
//!
//! Packed coordinates list the strictly lower entries `A_ij` (`i > j`,
//! column-major, unnormalized: the pair contributes `x·(E_ij − E_ji)`)
//! followed by `R` in column-major order. Packed gradients hold the
//! Frobenius-gradient entries `G_ij`, and every inner product in the solver
//! uses the weights `W = (2, …, 2, 1, …, 1)`, so that `g` is the gradient in
//! the `W` metric and the Hessian operator at `Z = Ỹ`, `x = 0` is the identity.

mod spectrum;
mod trust;

pub use spectrum::{assemble_hessian, cut_value_search, hessian_spectrum, operator_eigenvalues, CutSearch, SpectrumPoint};
pub use trust::{hessian_vec, trust_region_minimize, EvalCounts, SolverOptions, TrAbort, TrOutcome};

use serde::Serialize;

use crate::error::ensure_shape;
use crate::flag::{asym_blocks, embedding_distance, FlagLogProblem, FlagPoint, FlagShape};
use crate::linalg::{asym, block, complement_basis, frob, hcat, lower_pairs};
use crate::matfun::{expm, expm_frechet};
use crate::stiefel::{geodesic, hat, MetricParams, StiefelPoint, TangentCoords, TangentVector};
use crate::{Error, Mat, Result, Vector};

/// Layout of the packed variables `(A, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Packing {
    pairs: Vec<(usize, usize)>,
    k: usize,
    p: usize,
    weights: Vec<f64>,
}

/// Flat encoding of `(A, R)`; see [`Packing`].
pub type PackedVars = Vector;

impl Packing {
    pub fn new(pairs: Vec<(usize, usize)>, k: usize, p: usize) -> Self {
        let mut weights = vec![2.0; pairs.len()];
        weights.resize(pairs.len() + k * p, 1.0);
        Self { pairs, k, p, weights }
    }

    /// All `p(p−1)/2` lower pairs and a `k × p` block `R`.
    pub fn stiefel(p: usize, k: usize) -> Self {
        Self::new(lower_pairs(p), k, p)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn pack(&self, a: &Mat, r: &Mat) -> PackedVars {
        let mut x = Vector::zeros(self.dim());
        for (slot, &(i, j)) in self.pairs.iter().enumerate() {
            x[slot] = a[(i, j)];
        }
        let off = self.pairs.len();
        for (slot, v) in r.iter().enumerate() {
            x[off + slot] = *v;
        }
        x
    }

    pub fn unpack(&self, x: &PackedVars) -> (Mat, Mat) {
        let mut a = Mat::zeros(self.p, self.p);
        for (slot, &(i, j)) in self.pairs.iter().enumerate() {
            a[(i, j)] = x[slot];
            a[(j, i)] = -x[slot];
        }
        let off = self.pairs.len();
        let r = Mat::from_column_slice(self.k, self.p, &x.as_slice()[off..]);
        (a, r)
    }

    /// `⟨u, v⟩_W`.
    pub fn inner(&self, u: &Vector, v: &Vector) -> f64 {
        u.iter().zip(v.iter()).zip(&self.weights).map(|((a, b), w)| w * a * b).sum()
    }

    pub fn norm(&self, u: &Vector) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }
}

/// A smooth function of packed variables with its `W`-metric gradient.
pub trait Objective {
    fn packing(&self) -> &Packing;
    fn value(&self, x: &PackedVars) -> Result<f64>;
    fn gradient(&self, x: &PackedVars) -> Result<PackedVars>;
}

/// `Â`, `U = exp Â`, `E = exp((1−2α)A)` and `V = U·I_{p+k,p}·E`.
pub(crate) struct Forward {
    pub ahat: Mat,
    pub u: Mat,
    pub e: Mat,
    pub v: Mat,
}

pub(crate) fn forward(a: &Mat, r: &Mat, alpha: f64, p: usize) -> Result<Forward> {
    let ahat = hat(a, r, alpha);
    let u = expm(&ahat)?;
    let beta = 1.0 - 2.0 * alpha;
    let e = if beta == 0.0 { Mat::identity(p, p) } else { expm(&(a * beta))? };
    let v = u.columns(0, p) * &e;
    Ok(Forward { ahat, u, e, v })
}

/// Orthonormal basis of the span of `Z − ỸỸᵀZ`. Directions with singular
/// value below `max(n, p)·ε` are dropped, so `Z = Ỹ` gives `k = 0`.
pub fn normal_basis(ytil: &StiefelPoint, z: &StiefelPoint) -> Result<Mat> {
    ensure_shape(ytil.as_matrix().shape() == z.as_matrix().shape(), || "points differ in shape".into())?;
    complement_basis(ytil.as_matrix(), z.as_matrix(), 1.0)
}

/// The Stiefel log objective `F(A, R) = −Tr ZᵀY(1)` for fixed `(Ỹ, Z, Q)`,
/// with `Y(1) = [Ỹ Q]·exp Â·I_{p+k,p}·exp((1−2α)A)`.
///
/// The solver minimizes the equivalent `½‖Y(1) − Z‖²_F = F + p`, computed as
/// `½(‖V − C‖² + ‖Z − KC‖²)` with `K = [Ỹ Q]`, `C = KᵀZ`.
#[derive(Debug, Clone)]
pub struct StiefelLogProblem {
    ytil: StiefelPoint,
    z: StiefelPoint,
    q: Mat,
    metric: MetricParams,
    c: Mat,
    outside: f64,
    packing: Packing,
}

impl StiefelLogProblem {
    pub fn new(ytil: &StiefelPoint, z: &StiefelPoint, q: Mat, m: &MetricParams) -> Result<Self> {
        let (n, p) = ytil.as_matrix().shape();
        ensure_shape(z.as_matrix().shape() == (n, p) && q.nrows() == n, || {
            format!("Ỹ {n}×{p}, Z {:?}, Q {:?}", z.as_matrix().shape(), q.shape())
        })?;
        let k_mat = hcat(ytil.as_matrix(), &q);
        let c = k_mat.transpose() * z.as_matrix();
        let outside = (z.as_matrix() - &k_mat * &c).norm_squared();
        let packing = Packing::stiefel(p, q.ncols());
        Ok(Self { ytil: ytil.clone(), z: z.clone(), q, metric: *m, c, outside, packing })
    }

    pub fn with_default_basis(ytil: &StiefelPoint, z: &StiefelPoint, m: &MetricParams) -> Result<Self> {
        let q = normal_basis(ytil, z)?;
        Self::new(ytil, z, q, m)
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn k(&self) -> usize {
        self.q.ncols()
    }

    pub fn p(&self) -> usize {
        self.ytil.p()
    }

    pub fn packing(&self) -> &Packing {
        &self.packing
    }

    pub fn metric(&self) -> &MetricParams {
        &self.metric
    }

    fn check(&self, a: &Mat, r: &Mat) -> Result<()> {
        let p = self.p();
        ensure_shape(a.shape() == (p, p) && r.shape() == (self.k(), p), || {
            format!("A{:?}, R{:?} for p = {p}, k = {}", a.shape(), r.shape(), self.k())
        })
    }

    /// `½‖Y(1) − Z‖²_F`.
    pub fn misfit(&self, a: &Mat, r: &Mat) -> Result<f64> {
        self.check(a, r)?;
        let f = forward(a, r, self.metric.alpha(), self.p())?;
        Ok(0.5 * ((&f.v - &self.c).norm_squared() + self.outside))
    }

    /// `−Tr ZᵀY(1)`.
    pub fn objective(&self, a: &Mat, r: &Mat) -> Result<f64> {
        Ok(self.misfit(a, r)? - self.p() as f64)
    }

    /// `½‖Y(1) − Z‖²_F − p` with `Y(1)` formed explicitly.
    pub fn objective_frobenius(&self, a: &Mat, r: &Mat) -> Result<f64> {
        let y = self.endpoint(a, r)?;
        Ok(0.5 * (y.as_matrix() - self.z.as_matrix()).norm_squared() - self.p() as f64)
    }

    pub fn endpoint(&self, a: &Mat, r: &Mat) -> Result<StiefelPoint> {
        self.check(a, r)?;
        geodesic(&self.ytil, &self.coords(a, r), 1.0, &self.metric)
    }

    pub fn coords(&self, a: &Mat, r: &Mat) -> TangentCoords {
        TangentCoords { a: a.clone(), q: self.q.clone(), r: r.clone() }
    }

    /// Frobenius gradient `(∇_A, ∇_R)`, dispatching to the simpler form when `α = 1/2`.
    pub fn gradient(&self, a: &Mat, r: &Mat) -> Result<(Mat, Mat)> {
        if self.metric.alpha() == 0.5 {
            self.gradient_canonical(a, r)
        } else {
            self.gradient_general(a, r)
        }
    }

    /// `∇_A = asym((1−2α)·L̊ + 2α·L̂₁₁)`, `∇_R = L̂₂₁ − L̂₁₂ᵀ` with
    /// `L̂ = 𝔏_exp(Â, I_{p+k,p}·E·Cᵀ)` and `L̊ = 𝔏_exp((1−2α)A, Cᵀ·U·I_{p+k,p})`.
    pub fn gradient_general(&self, a: &Mat, r: &Mat) -> Result<(Mat, Mat)> {
        self.check(a, r)?;
        let (p, k) = (self.p(), self.k());
        let alpha = self.metric.alpha();
        let beta = 1.0 - 2.0 * alpha;
        let f = forward(a, r, alpha, p)?;
        let mut g_hat = Mat::zeros(p + k, p + k);
        g_hat.rows_mut(0, p).copy_from(&(&f.e * self.c.transpose()));
        let l_hat = expm_frechet(&f.ahat, &g_hat)?.derivative;
        let g_ring = self.c.transpose() * f.u.columns(0, p);
        let l_ring = expm_frechet(&(a * beta), &g_ring)?.derivative;
        let ga = asym(&(l_ring * beta + block(&l_hat, 0, 0, p, p) * (2.0 * alpha)));
        let gr = block(&l_hat, p, 0, k, p) - block(&l_hat, 0, p, p, k).transpose();
        Ok((ga, gr))
    }

    /// The `α = 1/2` path: only `L̂ = 𝔏_exp(Â, I_{p+k,p}·Cᵀ)` is evaluated.
    pub fn gradient_canonical(&self, a: &Mat, r: &Mat) -> Result<(Mat, Mat)> {
        self.check(a, r)?;
        if self.metric.alpha() != 0.5 {
            return Err(Error::Domain(format!("canonical gradient needs α = 1/2, got {}", self.metric.alpha())));
        }
        let (p, k) = (self.p(), self.k());
        let ahat = hat(a, r, 0.5);
        let mut g_hat = Mat::zeros(p + k, p + k);
        g_hat.rows_mut(0, p).copy_from(&self.c.transpose());
        let l_hat = expm_frechet(&ahat, &g_hat)?.derivative;
        let ga = asym(&block(&l_hat, 0, 0, p, p));
        let gr = block(&l_hat, p, 0, k, p) - block(&l_hat, 0, p, p, k).transpose();
        Ok((ga, gr))
    }
}

impl Objective for StiefelLogProblem {
    fn packing(&self) -> &Packing {
        &self.packing
    }

    fn value(&self, x: &PackedVars) -> Result<f64> {
        let (a, r) = self.packing.unpack(x);
        self.misfit(&a, &r)
    }

    fn gradient(&self, x: &PackedVars) -> Result<PackedVars> {
        let (a, r) = self.packing.unpack(x);
        let (ga, gr) = StiefelLogProblem::gradient(self, &a, &r)?;
        Ok(self.packing.pack(&ga, &gr))
    }
}

/// Starting point of the shooting iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// `(A, R) = (0, 0)`.
    Zero,
    /// `A₀ = asym(ỸᵀZ)` (diagonal blocks zeroed on flags), `R₀ = QᵀZ`.
    Projection,
}

impl Init {
    pub fn alternate(self) -> Self {
        match self {
            Init::Zero => Init::Projection,
            Init::Projection => Init::Zero,
        }
    }
}

impl std::fmt::Display for Init {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Init::Zero => "zero",
            Init::Projection => "proj",
        })
    }
}

/// Outcome of a logarithm solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// The tangent `Ỹ·A + Q·R` at `Ỹ`.
    pub eta: TangentVector,
    pub coords: TangentCoords,
    pub converged: bool,
    /// Converged and the endpoint matches the target.
    pub success: bool,
    pub iterations: usize,
    pub evals: EvalCounts,
    /// `f + 2·grad + 4·hvp`.
    pub weighted_evals: f64,
    /// `−Tr ZᵀY(1)` on Stiefel, `−Tr ZᵀY(1)ΛY(1)ᵀZΛ` on flags.
    pub final_objective: f64,
    /// `‖Y(1) − Z‖_F` on Stiefel, `‖Y(1)ΛY(1)ᵀ − ZΛZᵀ‖_F / ‖Λ‖_F` on flags.
    pub endpoint_residual: f64,
    /// `√(α₀·Tr RᵀR − α₁·Tr A²)`.
    pub length: f64,
    pub message: Option<String>,
}

impl Serialize for SolveReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("SolveReport", 8)?;
        st.serialize_field("converged", &self.converged)?;
        st.serialize_field("success", &self.success)?;
        st.serialize_field("iterations", &self.iterations)?;
        st.serialize_field("weighted_evals", &self.weighted_evals)?;
        st.serialize_field("final_objective", &self.final_objective)?;
        st.serialize_field("endpoint_residual", &self.endpoint_residual)?;
        st.serialize_field("length", &self.length)?;
        st.serialize_field("message", &self.message)?;
        st.end()
    }
}

/// Runs the minimizer, turning numerical aborts into an unconverged outcome.
fn run<O: Objective>(obj: &O, x0: PackedVars, opts: &SolverOptions) -> (TrOutcome, Option<String>) {
    match trust_region_minimize(obj, x0.clone(), opts) {
        Ok(out) => (out, None),
        Err(e) => (TrOutcome::aborted(x0, e.counts), Some(e.error.to_string())),
    }
}

/// Logarithm on `St(p, n)`: the tangent `η` at `Ỹ` with `Exp_Ỹ(η) = Z`.
pub fn stiefel_log(
    ytil: &StiefelPoint,
    z: &StiefelPoint,
    m: &MetricParams,
    init: Init,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let prob = StiefelLogProblem::with_default_basis(ytil, z, m)?;
    let (p, k) = (prob.p(), prob.k());
    let x0 = match init {
        Init::Zero => Vector::zeros(prob.packing.dim()),
        Init::Projection => {
            let yz = ytil.as_matrix().transpose() * z.as_matrix();
            let r0 = prob.q.transpose() * z.as_matrix();
            prob.packing.pack(&asym(&yz), &r0)
        }
    };
    let (out, message) = run(&prob, x0, opts);
    let (a, r) = prob.packing.unpack(&out.x);
    let coords = prob.coords(&a, &r);
    let endpoint = prob.endpoint(&a, &r)?;
    let endpoint_residual = frob(&(endpoint.as_matrix() - z.as_matrix()));
    let tol = opts.endpoint_tol.unwrap_or(1e-5 * (p as f64).sqrt());
    let eta = TangentVector::from_unchecked(ytil, coords.eta(ytil));
    let length = coords.norm(m);
    debug_assert_eq!(coords.k(), k);
    Ok(SolveReport {
        eta,
        coords,
        converged: out.converged,
        success: out.converged && endpoint_residual <= tol,
        iterations: out.iterations,
        weighted_evals: out.counts.weighted(),
        evals: out.counts,
        final_objective: out.value - p as f64,
        endpoint_residual,
        length,
        message,
    })
}

/// Logarithm on a flag manifold: a horizontal `η` at `Ỹ` whose geodesic
/// reaches the class of `Z`.
pub fn flag_log(
    ytil: &FlagPoint,
    z: &FlagPoint,
    s: &FlagShape,
    m: &MetricParams,
    init: Init,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let prob = FlagLogProblem::with_default_basis(ytil, z, s, m)?;
    let x0 = match init {
        Init::Zero => Vector::zeros(prob.packing().dim()),
        Init::Projection => {
            let yz = ytil.as_matrix().transpose() * z.as_matrix();
            let r0 = prob.q().transpose() * z.as_matrix();
            prob.packing().pack(&asym_blocks(&yz, s.index()), &r0)
        }
    };
    let (out, message) = run(&prob, x0, opts);
    let (a, r) = prob.packing().unpack(&out.x);
    let endpoint = prob.endpoint(&a, &r)?;
    let lam = s.lambda_columns();
    let endpoint_residual = embedding_distance(endpoint.as_matrix(), z.as_matrix(), &lam) / s.lambda_norm();
    let final_objective = prob.objective(&a, &r)?;
    let coords = TangentCoords { a, q: prob.q().clone(), r };
    let eta = TangentVector::from_unchecked(ytil.stiefel(), coords.eta(ytil.stiefel()));
    let length = coords.norm(m);
    Ok(SolveReport {
        eta,
        coords,
        converged: out.converged,
        success: out.converged && endpoint_residual <= opts.flag_tol,
        iterations: out.iterations,
        weighted_evals: out.counts.weighted(),
        evals: out.counts,
        final_objective,
        endpoint_residual,
        length,
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flag::{flag_exp, random_horizontal};
    use crate::grassmann::grass_dist;
    use crate::stiefel::{decompose_tangent, gaussian, random_point_rng, random_tangent_rng};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn packing_round_trip_and_layout() {
        let pk = Packing::stiefel(3, 2);
        assert_eq!(pk.dim(), 3 + 6);
        let x = Vector::from_iterator(9, (1..=9).map(|v| v as f64));
        let (a, r) = pk.unpack(&x);
        assert_eq!(a[(1, 0)], 1.0);
        assert_eq!(a[(0, 1)], -1.0);
        assert_eq!(a[(2, 0)], 2.0);
        assert_eq!(a[(2, 1)], 3.0);
        assert_eq!(r[(0, 0)], 4.0);
        assert_eq!(r[(1, 0)], 5.0);
        assert_eq!(r[(0, 1)], 6.0);
        assert_eq!(pk.pack(&a, &r), x);
        assert_eq!(&pk.weights()[..4], &[2.0, 2.0, 2.0, 1.0]);
    }

    #[test]
    fn packing_dims_for_flags() {
        let s = FlagShape::nested(&[3, 4], 9).unwrap();
        let pk = Packing::new(s.off_block_pairs(), 2, s.n_q());
        // n_q(n_q−1)/2 − Σ dᵢ(dᵢ−1)/2 + k·n_q = 6 − 3 + 8
        assert_eq!(pk.dim(), 11);
    }

    fn instance(seed: u64, n: usize, p: usize, alpha: f64) -> (StiefelLogProblem, Mat, Mat) {
        let mut r = rng(seed);
        let m = MetricParams::with_ratio(alpha).unwrap();
        let y = random_point_rng(n, p, &mut r).unwrap();
        let z = random_point_rng(n, p, &mut r).unwrap();
        let pr = StiefelLogProblem::with_default_basis(&y, &z, &m).unwrap();
        let a = asym(&gaussian(p, p, &mut r)) * 0.7;
        let rr = gaussian(pr.k(), p, &mut r) * 0.7;
        (pr, a, rr)
    }

    #[test]
    fn objective_forms_agree() {
        for alpha in [0.1, 0.5, 1.0, 1.2] {
            let (pr, a, r) = instance(1, 7, 3, alpha);
            let t = pr.objective(&a, &r).unwrap();
            let f = pr.objective_frobenius(&a, &r).unwrap();
            assert!((t - f).abs() < 1e-10);
            let y1 = pr.endpoint(&a, &r).unwrap();
            let trace = -(pr.z.as_matrix().transpose() * y1.as_matrix()).trace();
            assert!((t - trace).abs() < 1e-10);
        }
    }

    #[test]
    fn objective_minimum_at_generating_coordinates() {
        let mut r = rng(2);
        let m = MetricParams::with_ratio(0.8).unwrap();
        let y = random_point_rng(6, 3, &mut r).unwrap();
        let tv = random_tangent_rng(&y, 1.0, &m, &mut r).unwrap();
        let c = decompose_tangent(&tv).unwrap();
        let z = geodesic(&y, &c, 1.0, &m).unwrap();
        let pr = StiefelLogProblem::new(&y, &z, c.q.clone(), &m).unwrap();
        assert!((pr.objective(&c.a, &c.r).unwrap() + 3.0).abs() < 1e-9);
        let (ga, gr) = pr.gradient(&c.a, &c.r).unwrap();
        assert!(frob(&ga) + frob(&gr) < 1e-8);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (seed, alpha) in [(3, 0.1), (4, 0.5), (5, 0.7), (6, 1.0), (7, 1.2)] {
            let (pr, a, r) = instance(seed, 7, 3, alpha);
            let (ga, gr) = pr.gradient(&a, &r).unwrap();
            assert!(frob(&(&ga + ga.transpose())) < 1e-14);
            let x = pr.packing.pack(&a, &r);
            let g = pr.packing.pack(&ga, &gr);
            let h = 1e-6;
            for i in 0..x.len() {
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fd = (pr.value(&xp).unwrap() - pr.value(&xm).unwrap()) / (2.0 * h);
                let an = pr.packing.weights()[i] * g[i];
                assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "α={alpha} i={i}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn canonical_and_general_paths_agree() {
        let (pr, a, r) = instance(8, 8, 4, 0.5);
        let (g1, r1) = pr.gradient_general(&a, &r).unwrap();
        let (g2, r2) = pr.gradient_canonical(&a, &r).unwrap();
        assert!(frob(&(g1 - g2)) < 1e-12);
        assert!(frob(&(r1 - r2)) < 1e-12);
        let (pr, a, r) = instance(8, 8, 4, 0.6);
        assert!(pr.gradient_canonical(&a, &r).is_err());
    }

    #[test]
    fn log_of_same_point() {
        let y = random_point_rng(6, 3, &mut rng(9)).unwrap();
        let rep = stiefel_log(&y, &y, &MetricParams::embedded(), Init::Zero, &SolverOptions::default()).unwrap();
        assert!(rep.success);
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.length, 0.0);
        assert_eq!(rep.coords.k(), 0);
    }

    #[test]
    fn log_recovers_short_tangents() {
        let mut r = rng(10);
        for alpha in [0.1, 0.5, 1.0, 1.2] {
            let m = MetricParams::with_ratio(alpha).unwrap();
            let y = random_point_rng(4, 2, &mut r).unwrap();
            let tv = random_tangent_rng(&y, 0.5 * PI, &m, &mut r).unwrap();
            let z = crate::stiefel::exp(&tv, &m).unwrap();
            for init in [Init::Zero, Init::Projection] {
                let rep = stiefel_log(&y, &z, &m, init, &SolverOptions::default()).unwrap();
                assert!(rep.success, "α={alpha} {init}: {rep:?}");
                assert!((rep.length - 0.5 * PI).abs() < 1e-6, "α={alpha} {init}: {}", rep.length);
                assert!(frob(&(rep.eta.eta() - tv.eta())) < 1e-5 * PI);
            }
        }
    }

    #[test]
    fn flag_log_recovers_and_matches_grassmann() {
        let mut r = rng(11);
        let m = MetricParams::embedded();
        let s = FlagShape::nested(&[3, 4], 9).unwrap();
        let y = FlagPoint::random(&s, &mut r).unwrap();
        let h = random_horizontal(&y, &s, 0.5 * PI, &m, &mut r).unwrap();
        let z = flag_exp(&h, 1.0, &m).unwrap();
        let rep = flag_log(&y, &z, &s, &m, Init::Zero, &SolverOptions::default()).unwrap();
        assert!(rep.success, "{rep:?}");
        assert!(rep.length <= 0.5 * PI + 1e-6);

        let g = FlagShape::grassmann(2, 6).unwrap();
        for _ in 0..3 {
            let y = FlagPoint::random(&g, &mut r).unwrap();
            let z = FlagPoint::random(&g, &mut r).unwrap();
            let rep = flag_log(&y, &z, &g, &m, Init::Zero, &SolverOptions::default()).unwrap();
            assert!(rep.success);
            let d = grass_dist(y.stiefel(), z.stiefel(), &m).unwrap();
            assert!((rep.length - d).abs() < 1e-6, "{} vs {d}", rep.length);
        }
    }

    #[test]
    fn flag_log_of_same_class() {
        let mut r = rng(12);
        let s = FlagShape::nested(&[1, 3], 5).unwrap();
        let y = FlagPoint::random(&s, &mut r).unwrap();
        let mut u = Mat::identity(3, 3);
        u[(0, 0)] = -1.0;
        let z = FlagPoint::new(y.stiefel().right_mul(&u), &s).unwrap();
        let rep = flag_log(&y, &z, &s, &MetricParams::embedded(), Init::Zero, &SolverOptions::default()).unwrap();
        assert!(rep.success);
        assert!(rep.length < 1e-8);
    }
}
