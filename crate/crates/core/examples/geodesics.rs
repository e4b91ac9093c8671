//! Three closed-form geodesic formulas agree, and the two closed loops
//! return to the start.

use std::f64::consts::PI;

use stiefel_log::linalg::{frob, orth_defect};
use stiefel_log::stiefel::{
    decompose_tangent, geodesic, geodesic_alt, geodesic_fullsize, random_point, random_tangent, tangent_norm, MetricParams,
    StiefelPoint, TangentVector,
};
use stiefel_log::{Mat, Result};

fn main() -> Result<()> {
    let y = random_point(10, 4, 1)?;
    for alpha in [0.1, 0.5, 1.0, 1.2] {
        let m = MetricParams::with_ratio(alpha)?;
        let eta = random_tangent(&y, 2.0, &m, 2)?;
        let c = decompose_tangent(&eta)?;
        let a = geodesic(&y, &c, 1.0, &m)?;
        let b = geodesic_alt(&y, &c, 1.0, &m)?;
        let f = geodesic_fullsize(&y, &eta, 1.0, &m)?;
        println!(
            "alpha {alpha:>3}: |p+k - 2p| = {:.1e}  |p+k - n| = {:.1e}  defect = {:.1e}",
            frob(&(a.as_matrix() - b.as_matrix())),
            frob(&(a.as_matrix() - f.as_matrix())),
            orth_defect(a.as_matrix()),
        );
    }

    // closed loops through Ỹ = I_{n,p}
    let m = MetricParams::new(1.0, 0.7)?;
    let y = StiefelPoint::new(Mat::identity(5, 3))?;
    let mut r_loop = Mat::zeros(5, 3);
    r_loop[(3, 0)] = 2.0 * PI;
    let mut a_loop = Mat::zeros(5, 3);
    a_loop[(1, 0)] = 2.0 * PI;
    a_loop[(0, 1)] = -2.0 * PI;
    for (name, w) in [("R-type", r_loop), ("A-type", a_loop)] {
        let t = TangentVector::new(&y, w)?;
        let end = geodesic(&y, &decompose_tangent(&t)?, 1.0, &m)?;
        println!("{name} loop: length {:.6}, return residual {:.1e}", tangent_norm(&t, &m), frob(&(end.as_matrix() - y.as_matrix())));
    }
    Ok(())
}
