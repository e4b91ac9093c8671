//! Flag manifolds as quotients of `St(n_q, n)` by block-diagonal orthogonal
//! groups `O(d₁) × … × O(d_q)`.
//!
//! A class `⟦Y⟧` is identified with the isospectral matrix `Y·Λ·Yᵀ`, where
//! `Λ = diag(λ₁I_{d₁}, …, λ_qI_{d_q})` has distinct nonzero `λᵢ`. Horizontal
//! vectors are Stiefel tangents whose `A = Yᵀη` has zero diagonal blocks.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ensure_shape;
use crate::linalg::{asym, block, complement_basis, frob};
use crate::logsolve::{forward, Objective, Packing};
use crate::matfun::expm_frechet;
use crate::stiefel::{gaussian, geodesic, hat, MetricParams, StiefelPoint, TangentCoords};
use crate::{Error, Mat, Result, Vector};

/// Consecutive integers centered at 0 with 0 skipped:
/// `q = 2 → (−1, 1)`, `q = 3 → (−1, 1, 2)`, `q = 4 → (−2, −1, 1, 2)`.
pub fn default_lambda(q: usize) -> Vec<f64> {
    let lo = -((q / 2) as i64);
    (0..q as i64)
        .map(|i| {
            let v = lo + i;
            if v >= 0 { v + 1 } else { v }
        })
        .map(|v| v as f64)
        .collect()
}

/// Column ranges of the blocks `1..=q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockIndex {
    ranges: Vec<Range<usize>>,
    owner: Vec<usize>,
}

impl BlockIndex {
    pub fn new(sizes: &[usize]) -> Self {
        let mut ranges = Vec::with_capacity(sizes.len());
        let mut owner = Vec::new();
        let mut start = 0;
        for (b, &d) in sizes.iter().enumerate() {
            ranges.push(start..start + d);
            owner.extend(std::iter::repeat_n(b, d));
            start += d;
        }
        Self { ranges, owner }
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    /// Block containing column `j`.
    pub fn block_of(&self, j: usize) -> usize {
        self.owner[j]
    }

    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.owner[i] == self.owner[j]
    }
}

/// Block sizes `(d₀, d₁, …, d_q)` and eigenvalues `(λ₁, …, λ_q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShapeConfig", into = "ShapeConfig")]
pub struct FlagShape {
    d: Vec<usize>,
    lambda: Vec<f64>,
    #[serde(skip)]
    index: BlockIndex,
}

#[derive(Serialize, Deserialize)]
struct ShapeConfig {
    d: Vec<usize>,
    lambda: Vec<f64>,
}

impl TryFrom<ShapeConfig> for FlagShape {
    type Error = Error;
    fn try_from(c: ShapeConfig) -> Result<Self> {
        FlagShape::new(c.d, c.lambda)
    }
}

impl From<FlagShape> for ShapeConfig {
    fn from(s: FlagShape) -> Self {
        ShapeConfig { d: s.d, lambda: s.lambda }
    }
}

impl FlagShape {
    pub fn new(d: Vec<usize>, lambda: Vec<f64>) -> Result<Self> {
        if d.len() < 2 {
            return Err(Error::Config("need d₀ and at least one block".into()));
        }
        if d[1..].contains(&0) {
            return Err(Error::Config(format!("blocks d₁.. must be positive, got {d:?}")));
        }
        if lambda.len() != d.len() - 1 {
            return Err(Error::Config(format!("{} eigenvalues for {} blocks", lambda.len(), d.len() - 1)));
        }
        for (i, a) in lambda.iter().enumerate() {
            if *a == 0.0 || !a.is_finite() || lambda[..i].contains(a) {
                return Err(Error::Config(format!("eigenvalues must be distinct, finite and nonzero: {lambda:?}")));
            }
        }
        let index = BlockIndex::new(&d[1..]);
        Ok(Self { d, lambda, index })
    }

    /// Blocks `d₁.., d_q` with the default eigenvalues; `d₀ = n − Σ dᵢ`.
    pub fn with_blocks(blocks: &[usize], n: usize) -> Result<Self> {
        let nq: usize = blocks.iter().sum();
        if nq > n {
            return Err(Error::Config(format!("blocks {blocks:?} exceed n = {n}")));
        }
        let mut d = vec![n - nq];
        d.extend_from_slice(blocks);
        Self::new(d, default_lambda(blocks.len()))
    }

    /// `Flag(k₁, …, k_q; n)`: nested subspace dimensions `k₁ < … < k_q ≤ n`.
    pub fn nested(dims: &[usize], n: usize) -> Result<Self> {
        let mut blocks = Vec::with_capacity(dims.len());
        let mut prev = 0;
        for &k in dims {
            if k <= prev {
                return Err(Error::Config(format!("dimensions must increase strictly: {dims:?}")));
            }
            blocks.push(k - prev);
            prev = k;
        }
        Self::with_blocks(&blocks, n)
    }

    /// The Grassmann-shaped flag `Gr(p, n)`.
    pub fn grassmann(p: usize, n: usize) -> Result<Self> {
        Self::with_blocks(&[p], n)
    }

    pub fn d(&self) -> &[usize] {
        &self.d
    }

    pub fn blocks(&self) -> &[usize] {
        &self.d[1..]
    }

    pub fn q(&self) -> usize {
        self.d.len() - 1
    }

    pub fn n(&self) -> usize {
        self.d.iter().sum()
    }

    pub fn n_q(&self) -> usize {
        self.n() - self.d[0]
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn index(&self) -> &BlockIndex {
        &self.index
    }

    /// `λ` repeated per column, length `n_q`.
    pub fn lambda_columns(&self) -> Vec<f64> {
        (0..self.n_q()).map(|j| self.lambda[self.index.block_of(j)]).collect()
    }

    pub fn lambda_matrix(&self) -> Mat {
        Mat::from_diagonal(&Vector::from_vec(self.lambda_columns()))
    }

    /// `‖Λ‖_F`.
    pub fn lambda_norm(&self) -> f64 {
        self.lambda_columns().iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    /// Lower-triangle pairs of `A` outside the diagonal blocks, column-major.
    pub fn off_block_pairs(&self) -> Vec<(usize, usize)> {
        crate::linalg::lower_pairs(self.n_q())
            .into_iter()
            .filter(|&(i, j)| !self.index.same_block(i, j))
            .collect()
    }
}

/// A representative `Y` (`n × n_q`) of a flag.
#[derive(Debug, Clone, PartialEq)]
pub struct FlagPoint(StiefelPoint);

impl FlagPoint {
    pub fn new(y: StiefelPoint, s: &FlagShape) -> Result<Self> {
        ensure_shape(y.n() == s.n() && y.p() == s.n_q(), || {
            format!("flag point {}×{} for shape n = {}, n_q = {}", y.n(), y.p(), s.n(), s.n_q())
        })?;
        Ok(Self(y))
    }

    pub fn stiefel(&self) -> &StiefelPoint {
        &self.0
    }

    pub fn as_matrix(&self) -> &Mat {
        self.0.as_matrix()
    }

    pub fn random<R: Rng>(s: &FlagShape, rng: &mut R) -> Result<Self> {
        Self::new(crate::stiefel::random_point_rng(s.n(), s.n_q(), rng)?, s)
    }
}

/// Antisymmetric part with the diagonal blocks zeroed.
pub fn asym_blocks(m: &Mat, idx: &BlockIndex) -> Mat {
    let mut a = asym(m);
    for r in idx.ranges() {
        a.view_mut((r.start, r.start), (r.len(), r.len())).fill(0.0);
    }
    a
}

/// Horizontal tangent in reduced coordinates.
#[derive(Debug, Clone)]
pub struct FlagHorizontal {
    base: FlagPoint,
    coords: TangentCoords,
}

impl FlagHorizontal {
    pub fn new(base: &FlagPoint, coords: TangentCoords, s: &FlagShape) -> Result<Self> {
        let (n, nq) = (s.n(), s.n_q());
        ensure_shape(
            coords.a.shape() == (nq, nq) && coords.q.nrows() == n && coords.r.shape() == (coords.k(), nq),
            || "coordinates do not match the flag shape".into(),
        )?;
        let a = &coords.a;
        if frob(&(a + a.transpose())) > 1e-12 * (1.0 + frob(a)) {
            return Err(Error::Domain("A is not antisymmetric".into()));
        }
        for r in s.index().ranges() {
            if block(a, r.start, r.start, r.len(), r.len()).iter().any(|x| *x != 0.0) {
                return Err(Error::Domain("A has a nonzero diagonal block".into()));
            }
        }
        if coords.k() > 0 && frob(&(base.as_matrix().transpose() * &coords.q)) > 1e-10 {
            return Err(Error::Domain("Q is not orthogonal to the base point".into()));
        }
        Ok(Self { base: base.clone(), coords })
    }

    pub fn base(&self) -> &FlagPoint {
        &self.base
    }

    pub fn coords(&self) -> &TangentCoords {
        &self.coords
    }

    /// `Ỹ·A + Q·R`.
    pub fn eta(&self) -> Mat {
        self.coords.eta(self.base.stiefel())
    }

    pub fn norm(&self, m: &MetricParams) -> f64 {
        self.coords.norm(m)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { base: self.base.clone(), coords: self.coords.scaled(c) }
    }
}

/// `Y·Λ·Yᵀ`.
pub fn embed_isospectral(p: &FlagPoint, s: &FlagShape) -> Mat {
    let y = p.as_matrix();
    let mut yl = y.clone();
    for (j, l) in s.lambda_columns().iter().enumerate() {
        yl.column_mut(j).scale_mut(*l);
    }
    yl * y.transpose()
}

/// `‖Y₁ΛY₁ᵀ − Y₂ΛY₂ᵀ‖_F` without forming `n × n` matrices.
///
/// With `C = Y₁ᵀY₂`, `N = Y₂ − Y₁C`, the difference splits into the
/// orthogonal pieces `Λ − CΛCᵀ`, `CΛNᵀ` (twice) and `NΛNᵀ`, each of which
/// is small when the classes are close, so there is no cancellation.
pub fn embedding_distance(y1: &Mat, y2: &Mat, lam: &[f64]) -> f64 {
    let c = y1.transpose() * y2;
    let n = y2 - y1 * &c;
    let scale_cols = |m: &Mat| {
        let mut out = m.clone();
        for (j, l) in lam.iter().enumerate() {
            out.column_mut(j).scale_mut(*l);
        }
        out
    };
    let cl = scale_cols(&c);
    let nl = scale_cols(&n);
    let mut inner = -(&cl * c.transpose());
    for (i, l) in lam.iter().enumerate() {
        inner[(i, i)] += l;
    }
    let ntn = n.transpose() * &n;
    let cross = (&cl * &ntn).dot(&cl); // ‖CΛNᵀ‖²
    let lnn = nl.transpose() * &n;
    let outer = lnn.dot(&lnn.transpose()); // ‖NΛNᵀ‖² = Tr((ΛNᵀN)²)
    (inner.norm_squared() + 2.0 * cross + outer).max(0.0).sqrt()
}

/// `‖Y₁ΛY₁ᵀ − Y₂ΛY₂ᵀ‖_F ≤ tol·‖Λ‖_F`.
pub fn flag_equal(p1: &FlagPoint, p2: &FlagPoint, s: &FlagShape, tol: f64) -> bool {
    embedding_distance(p1.as_matrix(), p2.as_matrix(), &s.lambda_columns()) <= tol * s.lambda_norm()
}

/// Stiefel projection of `W` followed by zeroing the diagonal blocks of `A`.
pub fn horizontal_project(p: &FlagPoint, w: &Mat, s: &FlagShape) -> Result<FlagHorizontal> {
    ensure_shape(w.shape() == p.as_matrix().shape(), || "ambient vector does not match flag point".into())?;
    let y = p.as_matrix();
    let ytw = y.transpose() * w;
    let a = asym_blocks(&ytw, s.index());
    let normal = w - y * &ytw;
    let q = complement_basis(y, w, frob(w))?;
    let r = q.transpose() * &normal;
    Ok(FlagHorizontal { base: p.clone(), coords: TangentCoords { a, q, r } })
}

/// Class of the horizontal geodesic at time `t`.
pub fn flag_exp(h: &FlagHorizontal, t: f64, m: &MetricParams) -> Result<FlagPoint> {
    Ok(FlagPoint(geodesic(h.base.stiefel(), &h.coords, t, m)?))
}

/// Horizontal vector of metric length `length` from a projected Gaussian.
pub fn random_horizontal<R: Rng>(
    p: &FlagPoint,
    s: &FlagShape,
    length: f64,
    m: &MetricParams,
    rng: &mut R,
) -> Result<FlagHorizontal> {
    let h = horizontal_project(p, &gaussian(s.n(), s.n_q(), rng), s)?;
    let norm = h.norm(m);
    if norm == 0.0 {
        return Err(Error::Numeric("degenerate random horizontal vector".into()));
    }
    Ok(h.scaled(length / norm))
}

/// The log-map objective on a flag for fixed `(Ỹ, Z, Q)`:
/// `F(A, R) = −Tr ZᵀY(1)ΛY(1)ᵀZΛ` with `Y(1) = [Ỹ Q]·V(A, R)`.
///
/// The solver minimizes the equivalent `½‖VΛVᵀ − H‖²`, `H = KᵀZΛZᵀK`,
/// which differs from `F` by a constant but keeps full relative precision
/// near the minimum.
#[derive(Debug, Clone)]
pub struct FlagLogProblem {
    ytil: StiefelPoint,
    z: Mat,
    q: Mat,
    shape: FlagShape,
    metric: MetricParams,
    lam: Vec<f64>,
    h: Mat,
    offset: f64,
    packing: Packing,
}

impl FlagLogProblem {
    pub fn new(ytil: &FlagPoint, z: &FlagPoint, q: Mat, shape: &FlagShape, m: &MetricParams) -> Result<Self> {
        let (n, nq) = (shape.n(), shape.n_q());
        ensure_shape(
            ytil.as_matrix().shape() == (n, nq) && z.as_matrix().shape() == (n, nq) && q.nrows() == n,
            || "flag log inputs do not match the shape".into(),
        )?;
        let lam = shape.lambda_columns();
        let k_mat = crate::linalg::hcat(ytil.as_matrix(), &q);
        let kz = k_mat.transpose() * z.as_matrix();
        let mut kzl = kz.clone();
        for (j, l) in lam.iter().enumerate() {
            kzl.column_mut(j).scale_mut(*l);
        }
        let h = &kzl * kz.transpose();
        let tr_l2: f64 = lam.iter().map(|l| l * l).sum();
        let offset = 0.5 * (tr_l2 + h.norm_squared());
        let packing = Packing::new(shape.off_block_pairs(), q.ncols(), nq);
        Ok(Self {
            ytil: ytil.stiefel().clone(),
            z: z.as_matrix().clone(),
            q,
            shape: shape.clone(),
            metric: *m,
            lam,
            h,
            offset,
            packing,
        })
    }

    /// `Q` from the column span of `Z − ỸỸᵀZ`.
    pub fn with_default_basis(ytil: &FlagPoint, z: &FlagPoint, shape: &FlagShape, m: &MetricParams) -> Result<Self> {
        let q = crate::logsolve::normal_basis(ytil.stiefel(), z.stiefel())?;
        Self::new(ytil, z, q, shape, m)
    }

    pub fn packing(&self) -> &Packing {
        &self.packing
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn k(&self) -> usize {
        self.q.ncols()
    }

    pub fn shape(&self) -> &FlagShape {
        &self.shape
    }

    fn check(&self, a: &Mat, r: &Mat) -> Result<()> {
        let nq = self.shape.n_q();
        ensure_shape(a.shape() == (nq, nq) && r.shape() == (self.k(), nq), || {
            format!("A{:?}, R{:?} for n_q = {nq}, k = {}", a.shape(), r.shape(), self.k())
        })
    }

    fn vlv(&self, v: &Mat) -> Mat {
        let mut vl = v.clone();
        for (j, l) in self.lam.iter().enumerate() {
            vl.column_mut(j).scale_mut(*l);
        }
        vl * v.transpose()
    }

    /// `½‖VΛVᵀ − H‖²`.
    pub fn misfit(&self, a: &Mat, r: &Mat) -> Result<f64> {
        self.check(a, r)?;
        let f = forward(a, r, self.metric.alpha(), self.shape.n_q())?;
        Ok(0.5 * (self.vlv(&f.v) - &self.h).norm_squared())
    }

    /// `−Tr ZᵀY(1)ΛY(1)ᵀZΛ`.
    pub fn objective(&self, a: &Mat, r: &Mat) -> Result<f64> {
        Ok(self.misfit(a, r)? - self.offset)
    }

    /// `½‖Y(1)ΛY(1)ᵀ − ZΛZᵀ‖²_F − TrΛ²`, evaluated with `n × n` matrices.
    pub fn objective_frobenius(&self, a: &Mat, r: &Mat) -> Result<f64> {
        let y = self.endpoint(a, r)?;
        let l = self.shape.lambda_matrix();
        let d = y.as_matrix() * &l * y.as_matrix().transpose() - &self.z * &l * self.z.transpose();
        Ok(0.5 * d.norm_squared() - l.norm_squared())
    }

    /// `Y(1)` for the coordinates `(A, R)` in the fixed basis `Q`.
    pub fn endpoint(&self, a: &Mat, r: &Mat) -> Result<StiefelPoint> {
        self.check(a, r)?;
        geodesic(&self.ytil, &TangentCoords { a: a.clone(), q: self.q.clone(), r: r.clone() }, 1.0, &self.metric)
    }

    /// Frobenius gradient `(∇_A, ∇_R)`; `∇_A` is antisymmetric with zero
    /// diagonal blocks.
    pub fn gradient(&self, a: &Mat, r: &Mat) -> Result<(Mat, Mat)> {
        self.check(a, r)?;
        let (nq, k) = (self.shape.n_q(), self.k());
        let alpha = self.metric.alpha();
        let beta = 1.0 - 2.0 * alpha;
        let f = forward(a, r, alpha, nq)?;
        // P = 2ΛVᵀH, so dF = −Tr(P·dV)
        let mut p = f.v.transpose() * &self.h * 2.0;
        for (i, l) in self.lam.iter().enumerate() {
            p.row_mut(i).scale_mut(*l);
        }
        let mut g_hat = Mat::zeros(nq + k, nq + k);
        g_hat.rows_mut(0, nq).copy_from(&(&f.e * &p));
        let l_hat = expm_frechet(&f.ahat, &g_hat)?.derivative;
        let mut ga = block(&l_hat, 0, 0, nq, nq) * (2.0 * alpha);
        if beta != 0.0 {
            let g_ring = &p * f.u.columns(0, nq);
            let l_ring = expm_frechet(&(a * beta), &g_ring)?.derivative;
            ga += l_ring * beta;
        }
        let ga = asym_blocks(&ga, self.shape.index());
        let gr = block(&l_hat, nq, 0, k, nq) - block(&l_hat, 0, nq, nq, k).transpose();
        Ok((ga, gr))
    }

    /// Hessian bilinear form of `F` at `(A, R) = (0, 0)` applied to `(ΔA, ΔR)`.
    ///
    /// With `X = Â(ΔA, ΔR)`, `B = (1−2α)ΔA` and `J = I_{n_q+k, n_q}`, the
    /// second-order part of `V` is `V₂ = ½X²J + XJB + ½JB²`, the first-order
    /// part `V₁ = XJ + JB`, and the form equals `−2Tr(V₁ΛV₁ᵀH) − 4Tr(V₂ΛJᵀH)`.
    pub fn hess_zero(&self, da: &Mat, dr: &Mat) -> Result<f64> {
        self.check(da, dr)?;
        let (nq, k) = (self.shape.n_q(), self.k());
        let alpha = self.metric.alpha();
        let x = hat(da, dr, alpha);
        let b = da * (1.0 - 2.0 * alpha);
        let j = Mat::identity(nq + k, nq);
        let xj = &x * &j;
        let v1 = &xj + &j * &b;
        let v2 = &x * &xj * 0.5 + &xj * &b + &j * (&b * &b) * 0.5;
        let first = (self.vlv(&v1) * &self.h).trace();
        let mut v2l = v2.clone();
        for (c, l) in self.lam.iter().enumerate() {
            v2l.column_mut(c).scale_mut(*l);
        }
        let second = (v2l * j.transpose() * &self.h).trace();
        Ok(-2.0 * first - 4.0 * second)
    }

    /// `−TrΛ²`, the minimum of [`objective`](Self::objective).
    pub fn minimum(&self) -> f64 {
        -self.lam.iter().map(|l| l * l).sum::<f64>()
    }
}

impl Objective for FlagLogProblem {
    fn packing(&self) -> &Packing {
        &self.packing
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        let (a, r) = self.packing.unpack(x);
        self.misfit(&a, &r)
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        let (a, r) = self.packing.unpack(x);
        let (ga, gr) = FlagLogProblem::gradient(self, &a, &r)?;
        Ok(self.packing.pack(&ga, &gr))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stiefel::random_point_rng;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn block_orthogonal<R: Rng>(s: &FlagShape, rng: &mut R) -> Mat {
        let mut u = Mat::zeros(s.n_q(), s.n_q());
        for r in s.index().ranges() {
            let o = random_point_rng(r.len(), r.len(), rng).unwrap();
            u.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(o.as_matrix());
        }
        u
    }

    #[test]
    fn default_lambda_ladder() {
        assert_eq!(default_lambda(1), vec![1.0]);
        assert_eq!(default_lambda(2), vec![-1.0, 1.0]);
        assert_eq!(default_lambda(3), vec![-1.0, 1.0, 2.0]);
        assert_eq!(default_lambda(4), vec![-2.0, -1.0, 1.0, 2.0]);
    }

    #[test]
    fn shape_construction() {
        let s = FlagShape::nested(&[3, 4], 9).unwrap();
        assert_eq!(s.d(), &[5, 3, 1]);
        assert_eq!(s.n_q(), 4);
        assert_eq!(s.lambda_columns(), vec![-1.0, -1.0, -1.0, 1.0]);
        assert_eq!(s.off_block_pairs(), vec![(3, 0), (3, 1), (3, 2)]);
        assert!(FlagShape::new(vec![1, 2, 2], vec![1.0, 1.0]).is_err());
        assert!(FlagShape::new(vec![1, 2], vec![0.0]).is_err());
        assert!(FlagShape::nested(&[3, 3], 9).is_err());
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"d":[5,3,1],"lambda":[-1.0,1.0]}"#);
        let back: FlagShape = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn embedding_of_identity_is_padded_lambda() {
        let s = FlagShape::new(vec![2, 2, 1], vec![-1.0, 1.0]).unwrap();
        let y = FlagPoint::new(StiefelPoint::new(Mat::identity(5, 3)).unwrap(), &s).unwrap();
        let e = embed_isospectral(&y, &s);
        let expect = Mat::from_diagonal(&Vector::from_vec(vec![-1.0, -1.0, 1.0, 0.0, 0.0]));
        assert_eq!(e, expect);
    }

    #[test]
    fn embedding_class_invariance_and_spectrum() {
        let mut r = rng(1);
        let s = FlagShape::nested(&[2, 3, 5], 8).unwrap();
        let y = FlagPoint::random(&s, &mut r).unwrap();
        let u = block_orthogonal(&s, &mut r);
        let y2 = FlagPoint::new(y.stiefel().right_mul(&u), &s).unwrap();
        let e1 = embed_isospectral(&y, &s);
        assert!(frob(&(&e1 - embed_isospectral(&y2, &s))) < 1e-12);
        assert!(frob(&(&e1 - e1.transpose())) < 1e-14);
        let mut ev: Vec<f64> = e1.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let mut expect = vec![0.0; s.d()[0]];
        expect.extend(s.lambda_columns());
        expect.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn flag_equality() {
        let mut r = rng(2);
        let s = FlagShape::nested(&[3, 4], 9).unwrap();
        let y = FlagPoint::random(&s, &mut r).unwrap();
        let u = block_orthogonal(&s, &mut r);
        assert!(flag_equal(&y, &FlagPoint::new(y.stiefel().right_mul(&u), &s).unwrap(), &s, 1e-6));
        let mut neg = y.as_matrix().clone();
        neg.column_mut(3).neg_mut();
        assert!(flag_equal(&y, &FlagPoint::new(StiefelPoint::new(neg).unwrap(), &s).unwrap(), &s, 1e-6));
        let z = FlagPoint::random(&s, &mut r).unwrap();
        assert!(!flag_equal(&y, &z, &s, 1e-6));
        // swapping columns across blocks changes the class
        let mut sw = y.as_matrix().clone();
        sw.swap_columns(0, 3);
        assert!(!flag_equal(&y, &FlagPoint::new(StiefelPoint::new(sw).unwrap(), &s).unwrap(), &s, 1e-6));
    }

    #[test]
    fn embedding_distance_matches_dense() {
        let mut r = rng(3);
        let s = FlagShape::nested(&[1, 3, 4], 7).unwrap();
        for _ in 0..5 {
            let y = FlagPoint::random(&s, &mut r).unwrap();
            let z = FlagPoint::random(&s, &mut r).unwrap();
            let dense = frob(&(embed_isospectral(&y, &s) - embed_isospectral(&z, &s)));
            let thin = embedding_distance(y.as_matrix(), z.as_matrix(), &s.lambda_columns());
            assert_relative_eq!(dense, thin, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn projection_properties() {
        let mut r = rng(4);
        let s = FlagShape::nested(&[2, 3, 5], 8).unwrap();
        let y = FlagPoint::random(&s, &mut r).unwrap();
        // vertical vectors vanish
        let mut u = Mat::zeros(5, 5);
        for rg in s.index().ranges() {
            let g = asym(&gaussian(rg.len(), rg.len(), &mut r));
            u.view_mut((rg.start, rg.start), (rg.len(), rg.len())).copy_from(&g);
        }
        let h = horizontal_project(&y, &(y.as_matrix() * u), &s).unwrap();
        assert!(frob(&h.eta()) < 1e-13);
        // idempotence
        let h = horizontal_project(&y, &gaussian(8, 5, &mut r), &s).unwrap();
        let h2 = horizontal_project(&y, &h.eta(), &s).unwrap();
        assert!(frob(&(h2.eta() - h.eta())) < 1e-12);
        assert!(FlagHorizontal::new(&y, h.coords().clone(), &s).is_ok());
        // Grassmann shape leaves A = 0
        let g = FlagShape::grassmann(3, 8).unwrap();
        let yg = FlagPoint::random(&g, &mut r).unwrap();
        let hg = horizontal_project(&yg, &gaussian(8, 3, &mut r), &g).unwrap();
        assert_eq!(frob(&hg.coords().a), 0.0);
    }

    #[test]
    fn horizontal_rejects_diagonal_block_entries() {
        let s = FlagShape::nested(&[2, 3], 5).unwrap();
        let y = FlagPoint::random(&s, &mut rng(5)).unwrap();
        let mut a = Mat::zeros(3, 3);
        a[(1, 0)] = 1.0;
        a[(0, 1)] = -1.0;
        let c = TangentCoords { a, q: Mat::zeros(5, 0), r: Mat::zeros(0, 3) };
        assert!(FlagHorizontal::new(&y, c, &s).is_err());
    }

    #[test]
    fn exp_zero_and_grassmann_shape() {
        let mut r = rng(6);
        let m = MetricParams::with_ratio(0.4).unwrap();
        let s = FlagShape::nested(&[3, 4], 9).unwrap();
        let y = FlagPoint::random(&s, &mut r).unwrap();
        let h = horizontal_project(&y, &Mat::zeros(9, 4), &s).unwrap();
        assert!(flag_equal(&flag_exp(&h, 1.0, &m).unwrap(), &y, &s, 1e-12));

        let g = FlagShape::grassmann(3, 8).unwrap();
        let yg = FlagPoint::random(&g, &mut r).unwrap();
        let hg = random_horizontal(&yg, &g, 1.1, &m, &mut r).unwrap();
        let e = flag_exp(&hg, 1.0, &m).unwrap();
        let gh = crate::grassmann::HorizontalVector::new(yg.stiefel(), hg.eta()).unwrap();
        let ge = crate::grassmann::grass_exp(&gh).unwrap();
        assert!(flag_equal(&e, &FlagPoint::new(ge, &g).unwrap(), &g, 1e-10));
    }

    #[test]
    fn a_stays_constant_along_flag_geodesic() {
        let mut r = rng(7);
        let s = FlagShape::nested(&[2, 3, 5], 8).unwrap();
        let m = MetricParams::with_ratio(0.8).unwrap();
        let y = FlagPoint::random(&s, &mut r).unwrap();
        let h = random_horizontal(&y, &s, 1.3, &m, &mut r).unwrap();
        let dt = 1e-5;
        for t in [0.5, 1.2] {
            let yt = flag_exp(&h, t, &m).unwrap();
            let d = (flag_exp(&h, t + dt, &m).unwrap().as_matrix() - flag_exp(&h, t - dt, &m).unwrap().as_matrix())
                / (2.0 * dt);
            let at = yt.as_matrix().transpose() * d;
            assert!(frob(&(&at - &h.coords().a)) < 1e-6);
            for rg in s.index().ranges() {
                assert!(frob(&block(&at, rg.start, rg.start, rg.len(), rg.len())) < 1e-6);
            }
        }
    }

    fn problem_instance(seed: u64, alpha: f64) -> (FlagLogProblem, Mat, Mat) {
        let mut r = rng(seed);
        let s = FlagShape::nested(&[2, 3, 5], 9).unwrap();
        let m = MetricParams::with_ratio(alpha).unwrap();
        let y = FlagPoint::random(&s, &mut r).unwrap();
        let z = FlagPoint::random(&s, &mut r).unwrap();
        let pr = FlagLogProblem::with_default_basis(&y, &z, &s, &m).unwrap();
        let a = asym_blocks(&gaussian(5, 5, &mut r), s.index()) * 0.5;
        let rr = gaussian(pr.k(), 5, &mut r) * 0.5;
        (pr, a, rr)
    }

    #[test]
    fn objective_forms_agree() {
        for (seed, alpha) in [(8, 0.1), (9, 0.5), (10, 1.2)] {
            let (pr, a, r) = problem_instance(seed, alpha);
            let t = pr.objective(&a, &r).unwrap();
            let f = pr.objective_frobenius(&a, &r).unwrap();
            assert!((t - f).abs() < 1e-9, "{t} vs {f}");
            assert!(t >= pr.minimum() - 1e-12);
        }
    }

    #[test]
    fn objective_at_generating_coordinates_is_minimal() {
        let mut r = rng(11);
        let s = FlagShape::nested(&[3, 4], 9).unwrap();
        let m = MetricParams::embedded();
        let y = FlagPoint::random(&s, &mut r).unwrap();
        let h = random_horizontal(&y, &s, 1.0, &m, &mut r).unwrap();
        let z = flag_exp(&h, 1.0, &m).unwrap();
        let pr = FlagLogProblem::new(&y, &z, h.coords().q.clone(), &s, &m).unwrap();
        let v = pr.objective(&h.coords().a, &h.coords().r).unwrap();
        assert!((v - pr.minimum()).abs() < 1e-8);
        assert!(pr.misfit(&h.coords().a, &h.coords().r).unwrap() < 1e-20);
        let (ga, gr) = pr.gradient(&h.coords().a, &h.coords().r).unwrap();
        assert!(frob(&ga) + frob(&gr) < 1e-8);
        // at zero with Z = Ỹ the value is −TrΛ²
        let pr0 = FlagLogProblem::with_default_basis(&y, &y, &s, &m).unwrap();
        assert_eq!(pr0.k(), 0);
        assert_relative_eq!(pr0.objective(&Mat::zeros(4, 4), &Mat::zeros(0, 4)).unwrap(), -4.0, epsilon = 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (seed, alpha) in [(12, 0.1), (13, 0.5), (14, 1.0), (15, 1.2)] {
            let (pr, a, r) = problem_instance(seed, alpha);
            let (ga, gr) = pr.gradient(&a, &r).unwrap();
            for rg in pr.shape().index().ranges() {
                assert_eq!(frob(&block(&ga, rg.start, rg.start, rg.len(), rg.len())), 0.0);
            }
            let x = pr.packing().pack(&a, &r);
            let g = pr.packing().pack(&ga, &gr);
            let h = 1e-6;
            for i in 0..x.len() {
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fd = (Objective::value(&pr, &xp).unwrap() - Objective::value(&pr, &xm).unwrap()) / (2.0 * h);
                let an = pr.packing().weights()[i] * g[i];
                assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "α={alpha} i={i}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn hess_zero_matches_finite_differences() {
        for alpha in [0.3, 0.5, 1.1] {
            let (pr, _, _) = problem_instance(16, alpha);
            let mut r = rng(17);
            let da = asym_blocks(&gaussian(5, 5, &mut r), pr.shape().index());
            let dr = gaussian(pr.k(), 5, &mut r);
            let h = 1e-4;
            let f0 = pr.objective(&Mat::zeros(5, 5), &Mat::zeros(pr.k(), 5)).unwrap();
            let fp = pr.objective(&(&da * h), &(&dr * h)).unwrap();
            let fm = pr.objective(&(&da * -h), &(&dr * -h)).unwrap();
            let fd = (fp - 2.0 * f0 + fm) / (h * h);
            let cf = pr.hess_zero(&da, &dr).unwrap();
            assert!((fd - cf).abs() <= 1e-5 * (1.0 + cf.abs()), "α={alpha}: {fd} vs {cf}");
        }
    }

    #[test]
    fn hess_zero_reduced_form_at_coinciding_points() {
        // Z = Ỹ with an explicit Q ⊥ Ỹ: 2Tr(ΔRᵀΔRΛ² − ΔAᵀΛΔAΛ + ΔAᵀΔAΛ²)
        let mut r = rng(18);
        let s = FlagShape::nested(&[2, 3, 5], 9).unwrap();
        let m = MetricParams::with_ratio(0.7).unwrap();
        let y = FlagPoint::random(&s, &mut r).unwrap();
        let w = gaussian(9, 3, &mut r);
        let q = (&w - y.as_matrix() * (y.as_matrix().transpose() * &w)).qr().q();
        let pr = FlagLogProblem::new(&y, &y, q, &s, &m).unwrap();
        let l = s.lambda_matrix();
        let da = asym_blocks(&gaussian(5, 5, &mut r), s.index());
        let dr = gaussian(3, 5, &mut r);
        let reduced = 2.0
            * (dr.transpose() * &dr * &l * &l - da.transpose() * &l * &da * &l + da.transpose() * &da * &l * &l).trace();
        assert_relative_eq!(pr.hess_zero(&da, &dr).unwrap(), reduced, epsilon = 1e-10, max_relative = 1e-10);
    }
}
