//! Hessian spectrum along one geodesic of St(5, 10) and the first
//! degeneracy time.

use stiefel_log::logsolve::{cut_value_search, hessian_spectrum, CutSearch};
use stiefel_log::stiefel::{random_point, random_tangent, MetricParams};
use stiefel_log::Result;

fn main() -> Result<()> {
    let y = random_point(10, 5, 4)?;
    for alpha in [0.1, 1.0] {
        let m = MetricParams::with_ratio(alpha)?;
        let dir = random_tangent(&y, 1.0, &m, 9)?;
        let grid: Vec<f64> = (0..8).map(|i| 0.05 + 0.6 * i as f64).collect();
        for s in hessian_spectrum(&y, &dir, &grid, &m)? {
            println!("alpha {alpha}: t = {:.2}  eig in [{:.3e}, {:.4}]", s.t, s.min, s.max);
        }
        match cut_value_search(&y, &dir, &m, &CutSearch::default())? {
            Some(t) => println!("alpha {alpha}: approximate cut value {t:.6}"),
            None => println!("alpha {alpha}: no degeneracy below 1.4 pi"),
        }
    }
    Ok(())
}
