//! Flag logarithm on Flag(3,4;9) and its agreement with the Grassmann
//! closed form when the flag has a single block.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stiefel_log::flag::{flag_equal, flag_exp, random_horizontal, FlagPoint, FlagShape};
use stiefel_log::grassmann::grass_dist;
use stiefel_log::logsolve::{flag_log, Init, SolverOptions};
use stiefel_log::stiefel::{geodesic, MetricParams};
use stiefel_log::Result;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = FlagShape::nested(&[3, 4], 9)?;
    println!("Flag(3,4;9): d = {:?}, lambda = {:?}", s.d(), s.lambda());
    let m = MetricParams::with_ratio(1.0)?;
    let y = FlagPoint::random(&s, &mut rng)?;
    for dist in [0.5, 0.99, 1.3] {
        let h = random_horizontal(&y, &s, dist * PI, &m, &mut rng)?;
        let z = flag_exp(&h, 1.0, &m)?;
        let rep = flag_log(&y, &z, &s, &m, Init::Zero, &SolverOptions::default())?;
        let end = FlagPoint::new(geodesic(y.stiefel(), &rep.coords, 1.0, &m)?, &s)?;
        println!(
            "dist {dist}pi: success {} length {:.6} (generated {:.6}) same flag {}",
            rep.success,
            rep.length,
            dist * PI,
            flag_equal(&end, &z, &s, 1e-8)
        );
    }

    let g = FlagShape::grassmann(3, 10)?;
    let a = FlagPoint::random(&g, &mut rng)?;
    let b = FlagPoint::random(&g, &mut rng)?;
    let rep = flag_log(&a, &b, &g, &m, Init::Zero, &SolverOptions::default())?;
    println!("Gr(3,10): numerical {:.9} closed form {:.9}", rep.length, grass_dist(a.stiefel(), b.stiefel(), &m)?);
    Ok(())
}
