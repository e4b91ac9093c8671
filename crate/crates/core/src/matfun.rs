//! Matrix functions used by the geodesic formulas.
//!
//! [`expm`] and [`expm_frechet`] share one scaling-and-squaring Padé path
//! (degree 3, 5, 7, 9 or 13 chosen from the 1-norm), so the value returned by
//! `expm_frechet` is computed exactly like `expm`. The Fréchet derivative is
//! propagated alongside the Padé numerator/denominator and through the
//! squaring phase. [`expm_frechet_block`] is the slower `2m × 2m` block route,
//! kept as an independent cross-check.

use nalgebra::SymmetricEigen;

use crate::error::ensure_shape;
use crate::linalg::{frob, is_finite, vcat};
use crate::{Error, Mat, Result};

/// `exp(A)` together with `L_exp(A, E)`.
#[derive(Debug, Clone)]
pub struct FrechetPair {
    pub value: Mat,
    pub derivative: Mat,
}

// 1-norm bounds for the Padé degrees that keep the backward error of both the
// exponential and its Fréchet derivative at double-precision unit roundoff.
const ELL_3: f64 = 1.08e-2;
const ELL_5: f64 = 2.00e-1;
const ELL_7: f64 = 7.83e-1;
const ELL_9: f64 = 1.78e0;
const ELL_13: f64 = 4.74e0;

const B3: [f64; 4] = [120., 60., 12., 1.];
const B5: [f64; 6] = [30240., 15120., 3360., 420., 30., 1.];
const B7: [f64; 8] = [17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.];
const B9: [f64; 10] = [
    17643225600.,
    8821612800.,
    2075673600.,
    302702400.,
    30270240.,
    2162160.,
    110880.,
    3960.,
    90.,
    1.,
];
const B13: [f64; 14] = [
    64764752532480000.,
    32382376266240000.,
    7771770303897600.,
    1187353796428800.,
    129060195264000.,
    10559470521600.,
    670442572800.,
    33522128640.,
    1323241920.,
    40840800.,
    960960.,
    16380.,
    182.,
    1.,
];

fn one_norm(a: &Mat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `Σ c_i M_i` over matching slices, plus `c0·I` when `identity` is given.
fn lincomb(terms: &[(f64, &Mat)], identity: Option<f64>, n: usize) -> Mat {
    let mut out = match identity {
        Some(c) => Mat::identity(n, n) * c,
        None => Mat::zeros(n, n),
    };
    for (c, m) in terms {
        out += *m * *c;
    }
    out
}

/// Padé numerator/denominator pieces `U`, `V` and their directional
/// derivatives `Lu`, `Lv` (when `e` is given) for a low-degree approximant.
fn pade_low(a: &Mat, e: Option<&Mat>, b: &[f64]) -> (Mat, Mat, Option<(Mat, Mat)>) {
    let n = a.nrows();
    let m = b.len() - 1; // degree
    let half = m / 2; // number of even powers A^2, A^4, ...
    let a2 = a * a;
    let mut pows = vec![a2];
    while pows.len() < half {
        let next = if pows.len() == 3 {
            // A^8 = A^4 A^4
            &pows[1] * &pows[1]
        } else {
            &pows[0] * pows.last().unwrap()
        };
        pows.push(next);
    }
    // Derivatives M_{2j} of A^{2j} along E.
    let ders = e.map(|e| {
        let m2 = a * e + e * a;
        let mut ders = vec![m2];
        for j in 1..half {
            let next = if j == 3 {
                &pows[1] * &ders[1] + &ders[1] * &pows[1]
            } else {
                &pows[j - 1] * &ders[0] + &ders[j - 1] * &pows[0]
            };
            ders.push(next);
        }
        ders
    });
    let odd: Vec<(f64, &Mat)> = (0..half).map(|j| (b[2 * j + 3], &pows[j])).collect();
    let even: Vec<(f64, &Mat)> = (0..half).map(|j| (b[2 * j + 2], &pows[j])).collect();
    let w = lincomb(&odd, Some(b[1]), n);
    let u = a * &w;
    let v = lincomb(&even, Some(b[0]), n);
    let lulv = e.zip(ders.as_ref()).map(|(e, ders)| {
        let odd_d: Vec<(f64, &Mat)> = (0..half).map(|j| (b[2 * j + 3], &ders[j])).collect();
        let even_d: Vec<(f64, &Mat)> = (0..half).map(|j| (b[2 * j + 2], &ders[j])).collect();
        let lw = lincomb(&odd_d, None, n);
        let lu = a * lw + e * &w;
        let lv = lincomb(&even_d, None, n);
        (lu, lv)
    });
    (u, v, lulv)
}

fn pade13(a: &Mat, e: Option<&Mat>) -> (Mat, Mat, Option<(Mat, Mat)>) {
    let n = a.nrows();
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let w1 = lincomb(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], None, n);
    let w2 = lincomb(&[(b[7], &a6), (b[5], &a4), (b[3], &a2)], Some(b[1]), n);
    let z1 = lincomb(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], None, n);
    let z2 = lincomb(&[(b[6], &a6), (b[4], &a4), (b[2], &a2)], Some(b[0]), n);
    let w = &a6 * &w1 + w2;
    let u = a * &w;
    let v = &a6 * &z1 + z2;
    let lulv = e.map(|e| {
        let m2 = a * e + e * a;
        let m4 = &a2 * &m2 + &m2 * &a2;
        let m6 = &a4 * &m2 + &m4 * &a2;
        let lw1 = lincomb(&[(b[13], &m6), (b[11], &m4), (b[9], &m2)], None, n);
        let lw2 = lincomb(&[(b[7], &m6), (b[5], &m4), (b[3], &m2)], None, n);
        let lz1 = lincomb(&[(b[12], &m6), (b[10], &m4), (b[8], &m2)], None, n);
        let lz2 = lincomb(&[(b[6], &m6), (b[4], &m4), (b[2], &m2)], None, n);
        let lw = &a6 * lw1 + &m6 * &w1 + lw2;
        let lu = a * lw + e * &w;
        let lv = &a6 * lz1 + &m6 * &z1 + lz2;
        (lu, lv)
    });
    (u, v, lulv)
}

fn expm_impl(a: &Mat, e: Option<&Mat>) -> Result<(Mat, Option<Mat>)> {
    ensure_shape(a.is_square(), || format!("expm needs a square matrix, got {:?}", a.shape()))?;
    if let Some(e) = e {
        ensure_shape(e.shape() == a.shape(), || {
            format!("direction {:?} does not match {:?}", e.shape(), a.shape())
        })?;
        if !is_finite(e) {
            return Err(Error::Domain("non-finite direction matrix".into()));
        }
    }
    if !is_finite(a) {
        return Err(Error::Domain("non-finite matrix passed to expm".into()));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok((Mat::zeros(0, 0), e.map(|_| Mat::zeros(0, 0))));
    }
    let norm = one_norm(a);
    let (u, v, lulv, s) = if norm <= ELL_3 {
        let (u, v, l) = pade_low(a, e, &B3);
        (u, v, l, 0)
    } else if norm <= ELL_5 {
        let (u, v, l) = pade_low(a, e, &B5);
        (u, v, l, 0)
    } else if norm <= ELL_7 {
        let (u, v, l) = pade_low(a, e, &B7);
        (u, v, l, 0)
    } else if norm <= ELL_9 {
        let (u, v, l) = pade_low(a, e, &B9);
        (u, v, l, 0)
    } else {
        let s = (norm / ELL_13).log2().ceil().max(0.0) as i32;
        let scale = 2f64.powi(-s);
        let a_s = a * scale;
        let e_s = e.map(|e| e * scale);
        let (u, v, l) = pade13(&a_s, e_s.as_ref());
        (u, v, l, s)
    };
    let lu = (&v - &u).lu();
    let mut r = lu
        .solve(&(&u + &v))
        .ok_or_else(|| Error::Numeric("singular Padé denominator".into()))?;
    let mut l = match lulv {
        Some((lu_, lv_)) => {
            let rhs = &lu_ + &lv_ + (&lu_ - &lv_) * &r;
            Some(lu.solve(&rhs).ok_or_else(|| Error::Numeric("singular Padé denominator".into()))?)
        }
        None => None,
    };
    for _ in 0..s {
        if let Some(lm) = l.as_mut() {
            *lm = &r * &*lm + &*lm * &r;
        }
        r = &r * &r;
    }
    if !is_finite(&r) {
        return Err(Error::Numeric("matrix exponential overflowed".into()));
    }
    Ok((r, l))
}

/// Matrix exponential by scaling and squaring with Padé approximants.
pub fn expm(a: &Mat) -> Result<Mat> {
    expm_impl(a, None).map(|(r, _)| r)
}

/// `exp(A)` and the Fréchet derivative `L_exp(A, E)`, computed together.
pub fn expm_frechet(a: &Mat, e: &Mat) -> Result<FrechetPair> {
    let (value, derivative) = expm_impl(a, Some(e))?;
    Ok(FrechetPair { value, derivative: derivative.expect("direction supplied") })
}

/// Fréchet derivative read off the top-right block of `exp([[A, E], [0, A]])`.
pub fn expm_frechet_block(a: &Mat, e: &Mat) -> Result<FrechetPair> {
    ensure_shape(a.is_square() && e.shape() == a.shape(), || {
        format!("expm_frechet_block: {:?} vs {:?}", a.shape(), e.shape())
    })?;
    let m = a.nrows();
    let top = crate::linalg::hcat(a, e);
    let bottom = crate::linalg::hcat(&Mat::zeros(m, m), a);
    let big = expm(&vcat(&top, &bottom))?;
    Ok(FrechetPair {
        value: big.view((0, 0), (m, m)).into_owned(),
        derivative: big.view((0, m), (m, m)).into_owned(),
    })
}

/// Symmetric matrix accepted by [`sym_apply`]; eigenvalues below zero are
/// clamped to zero when a spectral function is applied.
#[derive(Debug, Clone)]
pub struct SymmetricPsd(Mat);

impl SymmetricPsd {
    /// Accepts `s` when `‖S − Sᵀ‖_F ≤ 1e-10·‖S‖_F`, and symmetrizes it.
    pub fn new(s: Mat) -> Result<Self> {
        ensure_shape(s.is_square(), || format!("expected square matrix, got {:?}", s.shape()))?;
        if !is_finite(&s) {
            return Err(Error::Domain("non-finite symmetric matrix".into()));
        }
        let tol = 1e-10 * frob(&s);
        if frob(&(&s - s.transpose())) > tol {
            return Err(Error::Domain("matrix is not symmetric".into()));
        }
        Ok(Self(crate::linalg::sym(&s)))
    }

    /// `ηᵀη` for any `η`, symmetric by construction.
    pub fn gram(eta: &Mat) -> Self {
        Self(crate::linalg::sym(&(eta.transpose() * eta)))
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }
}

/// `U·diag(f(λᵢ))·Uᵀ` for `S = U·diag(λᵢ)·Uᵀ`, with `λᵢ` clamped at zero.
pub fn sym_apply(s: &SymmetricPsd, f: impl Fn(f64) -> f64) -> Result<Mat> {
    let n = s.0.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let eig = SymmetricEigen::try_new(s.0.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("symmetric eigendecomposition failed".into()))?;
    let mut scaled = eig.eigenvectors.clone();
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let fl = f(lam.max(0.0));
        scaled.column_mut(j).scale_mut(fl);
    }
    Ok(scaled * eig.eigenvectors.transpose())
}

/// `cos(√x)`, extended to `x ≤ 0` by clamping.
pub fn csr(x: f64) -> f64 {
    x.max(0.0).sqrt().cos()
}

/// `sin(√x)/√x`, with value 1 at 0.
pub fn ssr(x: f64) -> f64 {
    let x = x.max(0.0);
    if x < 1e-4 {
        1.0 - x / 6.0 + x * x / 120.0 - x * x * x / 5040.0
    } else {
        let r = x.sqrt();
        r.sin() / r
    }
}

const ARCCOS_SERIES_SWITCH: f64 = 1e-6;
const SIGMA_TOL: f64 = 1e-8;

fn arccos_factor_scalar(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    let u = 1.0 - s;
    if u < ARCCOS_SERIES_SWITCH {
        1.0 + u / 3.0 + 2.0 * u * u / 15.0
    } else {
        s.acos() / (u * (1.0 + s)).sqrt()
    }
}

/// `(1 − σ²)^{-1/2}·arccos σ` elementwise, equal to 1 at `σ = 1`.
pub fn arccos_factor(sigma: &[f64]) -> Result<Vec<f64>> {
    sigma
        .iter()
        .map(|&s| {
            if !(-SIGMA_TOL..=1.0 + SIGMA_TOL).contains(&s) {
                Err(Error::Domain(format!("singular value {s} outside [0, 1]")))
            } else {
                Ok(arccos_factor_scalar(s))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random(n: usize, m: usize, scale: f64, rng: &mut ChaCha8Rng) -> Mat {
        Mat::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0) * scale)
    }

    // Eigendecomposition oracle for symmetric arguments.
    fn expm_sym_oracle(a: &Mat) -> Mat {
        let eig = SymmetricEigen::new(a.clone());
        let mut v = eig.eigenvectors.clone();
        for j in 0..v.ncols() {
            v.column_mut(j).scale_mut(eig.eigenvalues[j].exp());
        }
        v * eig.eigenvectors.transpose()
    }

    #[test]
    fn expm_zero_is_identity() {
        let r = expm(&Mat::zeros(3, 3)).unwrap();
        assert_eq!(r, Mat::identity(3, 3));
    }

    #[test]
    fn expm_quarter_turn() {
        let th = PI / 2.0;
        let a = Mat::from_row_slice(2, 2, &[0.0, -th, th, 0.0]);
        let r = expm(&a).unwrap();
        let want = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(frob(&(r - want)) < 1e-14);
    }

    #[test]
    fn expm_symmetric_matches_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for scale in [0.001, 0.1, 0.5, 1.5, 3.0] {
            let b = random(5, 5, scale, &mut rng);
            let a = crate::linalg::sym(&b);
            let r = expm(&a).unwrap();
            let o = expm_sym_oracle(&a);
            assert!(frob(&(&r - &o)) <= 1e-12 * frob(&o), "scale {scale}");
        }
    }

    #[test]
    fn expm_rejects_non_finite() {
        let mut a = Mat::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(expm(&a), Err(Error::Domain(_))));
    }

    #[test]
    fn frechet_linear_and_zero_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(4, 4, 1.0, &mut rng);
        let e = random(4, 4, 1.0, &mut rng);
        let z = expm_frechet(&a, &Mat::zeros(4, 4)).unwrap();
        assert_eq!(frob(&z.derivative), 0.0);
        let id = expm_frechet(&Mat::zeros(4, 4), &e).unwrap();
        assert!(frob(&(id.derivative - &e)) < 1e-15);
    }

    #[test]
    fn frechet_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for scale in [0.005, 0.1, 0.6, 1.2, 4.0] {
            let a = random(4, 4, scale, &mut rng);
            let e = random(4, 4, 1.0, &mut rng);
            let fd = (expm(&(&a + &e * h)).unwrap() - expm(&(&a - &e * h)).unwrap()) / (2.0 * h);
            let l = expm_frechet(&a, &e).unwrap().derivative;
            assert!(frob(&(&l - &fd)) <= 1e-6 * frob(&fd), "scale {scale}");
        }
    }

    #[test]
    fn frechet_block_route_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for scale in [0.01, 0.3, 1.0, 2.0, 8.0] {
            let a = random(5, 5, scale, &mut rng);
            let e = random(5, 5, 1.0, &mut rng);
            let x = expm_frechet(&a, &e).unwrap();
            let y = expm_frechet_block(&a, &e).unwrap();
            assert!(frob(&(&x.derivative - &y.derivative)) <= 1e-11 * frob(&y.derivative));
            assert!(frob(&(&x.value - &y.value)) <= 1e-12 * frob(&y.value));
        }
    }

    #[test]
    fn frechet_value_is_expm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for scale in [0.001, 0.1, 0.5, 1.5, 9.0] {
            let a = random(6, 6, scale, &mut rng);
            let e = random(6, 6, 1.0, &mut rng);
            assert_eq!(expm_frechet(&a, &e).unwrap().value, expm(&a).unwrap());
        }
    }

    #[test]
    fn frechet_shape_mismatch() {
        assert!(matches!(
            expm_frechet(&Mat::zeros(2, 2), &Mat::zeros(3, 3)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn sym_apply_scalars() {
        let c = sym_apply(&SymmetricPsd::new(Mat::zeros(2, 2)).unwrap(), csr).unwrap();
        assert!(frob(&(c - Mat::identity(2, 2))) < 1e-15);
        let s = SymmetricPsd::new(Mat::identity(2, 2) * (PI * PI / 4.0)).unwrap();
        let v = sym_apply(&s, ssr).unwrap();
        assert!(frob(&(v - Mat::identity(2, 2) * (2.0 / PI))) < 1e-14);
    }

    #[test]
    fn sym_apply_pythagorean_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = random(5, 5, 2.0, &mut rng);
        let s = SymmetricPsd::gram(&g);
        let c = sym_apply(&s, csr).unwrap();
        let sn = sym_apply(&s, ssr).unwrap();
        let lhs = &c * &c + s.as_matrix() * &sn * &sn;
        assert!(frob(&(lhs - Mat::identity(5, 5))) < 1e-10);
    }

    #[test]
    fn symmetric_psd_rejects_asymmetric() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(SymmetricPsd::new(m).is_err());
    }

    #[test]
    fn arccos_factor_values() {
        let v = arccos_factor(&[1.0, 0.0, 0.5]).unwrap();
        assert_eq!(v[0], 1.0);
        assert_relative_eq!(v[1], PI / 2.0, epsilon = 1e-15);
        assert_relative_eq!(v[2], 0.5f64.acos() / 0.75f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(v[2], 1.2092, epsilon = 1e-4);
    }

    #[test]
    fn arccos_factor_continuous_across_switch() {
        let below = arccos_factor(&[1.0 - 0.999e-6]).unwrap()[0];
        let above = arccos_factor(&[1.0 - 1.001e-6]).unwrap()[0];
        assert!((below - above).abs() < 1e-9);
    }

    #[test]
    fn arccos_factor_domain() {
        assert!(arccos_factor(&[1.1]).is_err());
        assert!(arccos_factor(&[-0.1]).is_err());
        assert_eq!(arccos_factor(&[1.0 + 1e-12]).unwrap()[0], 1.0);
    }
}
