//! Trust-region logarithm on St(2, 4) from both initializations.

use std::f64::consts::PI;

use stiefel_log::logsolve::{stiefel_log, Init, SolverOptions};
use stiefel_log::stiefel::{exp, random_point, random_tangent, MetricParams};
use stiefel_log::Result;

fn main() -> Result<()> {
    let y = random_point(4, 2, 11)?;
    for alpha in [0.5, 1.0] {
        let m = MetricParams::with_ratio(alpha)?;
        for (i, dist) in [0.5, 1.3].into_iter().enumerate() {
            let eta = random_tangent(&y, dist * PI, &m, 20 + i as u64)?;
            let z = exp(&eta, &m)?;
            for init in [Init::Zero, Init::Projection] {
                let rep = stiefel_log(&y, &z, &m, init, &SolverOptions::default())?;
                println!(
                    "alpha {alpha} dist {dist}pi init {init:<4}: success {} iters {:>2} evals {:>4} length {:.6} (generated {:.6}) residual {:.1e}",
                    rep.success, rep.iterations, rep.weighted_evals, rep.length, dist * PI, rep.endpoint_residual
                );
            }
        }
    }
    Ok(())
}
