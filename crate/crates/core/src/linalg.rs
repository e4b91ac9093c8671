//! Small dense helpers shared by the manifold modules.

use crate::{Error, Mat, Result};

pub fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn asym(m: &Mat) -> Mat {
    (m - m.transpose()) * 0.5
}

pub fn frob(m: &Mat) -> f64 {
    m.norm()
}

/// `Tr(aᵀ b)`.
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.dot(b)
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// `[a b]`
pub fn hcat(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// `[a; b]`
pub fn vcat(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

/// Copy of the `(r0.., c0..)` block of size `nr × nc`.
pub fn block(m: &Mat, r0: usize, c0: usize, nr: usize, nc: usize) -> Mat {
    m.view((r0, c0), (nr, nc)).into_owned()
}

/// Orthonormality defect `‖YᵀY − I‖_F`.
pub fn orth_defect(y: &Mat) -> f64 {
    let g = y.transpose() * y;
    frob(&(g - Mat::identity(y.ncols(), y.ncols())))
}

/// Thin SVD `m = u·diag(s)·vt` with `s` descending.
pub struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub vt: Mat,
}

/// Thin SVD through faer. nalgebra's implicit-shift SVD returns wrong factors
/// for a few percent of rank-deficient inputs, which the complement bases hit
/// routinely.
pub fn svd(m: &Mat) -> Result<Svd> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd { u: Mat::zeros(rows, 0), s: Vec::new(), vt: Mat::zeros(0, cols) });
    }
    let f = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let d = f.thin_svd().map_err(|e| Error::Numeric(format!("SVD failed: {e:?}")))?;
    let (u, v, s) = (d.U(), d.V(), d.S().column_vector());
    Ok(Svd {
        u: Mat::from_fn(rows, k, |i, j| u[(i, j)]),
        s: (0..k).map(|i| s[i]).collect(),
        vt: Mat::from_fn(k, cols, |i, j| v[(j, i)]),
    })
}

/// Orthonormal basis of the column span of `m`, with the numerical rank
/// decided by `σᵢ > max(rows, cols)·ε·scale`.
///
/// Full-rank inputs use the thin QR factor. Rank-deficient inputs use the
/// leading left singular vectors.
pub fn range_basis(m: &Mat, scale: f64) -> Result<Mat> {
    let (rows, cols) = m.shape();
    if cols == 0 || rows == 0 {
        return Ok(Mat::zeros(rows, 0));
    }
    let d = svd(m)?;
    let tol = rows.max(cols) as f64 * f64::EPSILON * scale;
    let rank = d.s.iter().filter(|&&s| s > tol).count();
    if rank == cols && rank <= rows {
        return Ok(m.clone().qr().q());
    }
    Ok(d.u.columns(0, rank).into_owned())
}

/// Orthonormal basis of the span of `(I − YYᵀ)·M`, orthogonal to `Y` to
/// working precision even when `M` is nearly inside the span of `Y`.
///
/// The projection is applied twice before the rank decision and once more to
/// the basis itself, followed by a QR clean-up.
pub fn complement_basis(y: &Mat, m: &Mat, scale: f64) -> Result<Mat> {
    let project = |x: &Mat| x - y * (y.transpose() * x);
    let normal = project(&project(m));
    let q = range_basis(&normal, scale)?;
    if q.ncols() == 0 {
        return Ok(q);
    }
    Ok(project(&q).qr().q())
}

/// Packed lower-triangle pairs `(i, j)`, `i > j`, in column-major order.
pub fn lower_pairs(p: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(p * p.saturating_sub(1) / 2);
    for j in 0..p {
        for i in (j + 1)..p {
            out.push((i, j));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_basis_drops_noise() {
        let mut m = Mat::zeros(5, 3);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 1e-17;
        let q = range_basis(&m, 1.0).unwrap();
        assert_eq!(q.ncols(), 1);
        assert!(orth_defect(&q) < 1e-14);
    }

    #[test]
    fn range_basis_full_rank_spans_input() {
        let m = Mat::from_fn(6, 3, |i, j| ((i * 3 + j * j) as f64).sqrt() + (i == j) as u8 as f64);
        let q = range_basis(&m, 1.0).unwrap();
        assert_eq!(q.ncols(), 3);
        let resid = &m - &q * (q.transpose() * &m);
        assert!(frob(&resid) < 1e-12);
    }

    #[test]
    fn svd_of_rank_deficient_and_repeated() {
        use rand::{Rng, SeedableRng};
        let mut g = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for it in 0..500 {
            let rows = g.random_range(2..9);
            let cols = g.random_range(1..=rows);
            let rank = g.random_range(0..=cols);
            let a = Mat::from_fn(rows, rank, |_, _| g.random_range(-1.0..1.0));
            let b = Mat::from_fn(rank, cols, |_, _| g.random_range(-1.0..1.0));
            let mut m = &a * &b;
            if it % 4 == 0 {
                // orthonormal columns with one zeroed: singular values {0, 1, 1, ...}
                m = Mat::from_fn(rows, rows, |_, _| g.random_range(-1.0..1.0)).qr().q().columns(0, cols).into_owned();
                m.column_mut(0).fill(0.0);
            }
            let d = svd(&m).unwrap();
            let rec = &d.u * Mat::from_diagonal(&nalgebra::DVector::from_vec(d.s.clone())) * &d.vt;
            assert!(frob(&(rec - &m)) <= 1e-13 * (1.0 + frob(&m)));
            assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
            let k = d.s.len();
            assert!(frob(&(d.u.transpose() * &d.u - Mat::identity(k, k))) < 1e-13);
        }
    }

    #[test]
    fn range_basis_of_exact_rank_one() {
        use rand::{Rng, SeedableRng};
        let mut g = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let col = Mat::from_fn(7, 1, |_, _| g.random_range(-1.0..1.0));
            let row = Mat::from_fn(1, 3, |_, _| g.random_range(-1.0..1.0));
            let m = &col * &row;
            let q = range_basis(&m, frob(&m)).unwrap();
            assert_eq!(q.ncols(), 1);
            assert!((frob(&(q.transpose() * &m)) - frob(&m)).abs() < 1e-12 * frob(&m));
        }
    }

    #[test]
    fn complement_basis_of_round_off_stays_orthogonal() {
        let y = Mat::from_fn(6, 2, |i, j| ((i + 2 * j) as f64).sin()).qr().q();
        let noise = Mat::from_fn(6, 2, |i, j| 1e-14 * ((i * j) as f64).cos());
        let m = &y + noise;
        let q = complement_basis(&y, &m, 1.0).unwrap();
        assert!(frob(&(y.transpose() * &q)) < 1e-14);
        assert!(orth_defect(&q) < 1e-14);
    }

    #[test]
    fn lower_pairs_column_major() {
        assert_eq!(lower_pairs(3), vec![(1, 0), (2, 0), (2, 1)]);
    }
}
