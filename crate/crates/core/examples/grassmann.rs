//! Closed-form Grassmann logarithm: principal angles, distance and the
//! exp/log round trip.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stiefel_log::grassmann::{grass_exp, grass_log, horizontal_with_angles, principal_angles, HorizontalVector};
use stiefel_log::linalg::frob;
use stiefel_log::stiefel::{random_point_rng, MetricParams};
use stiefel_log::Result;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = MetricParams::embedded();
    let y = random_point_rng(12, 3, &mut rng)?;
    let h = horizontal_with_angles(&y, &[1.2, 0.7, 0.1], &mut rng)?;
    let z = grass_exp(&h)?;
    let angles = principal_angles(&y, &z)?;
    println!("principal angles {angles:.6?}");
    let log = grass_log(&y, &z, &m)?;
    println!("distance {:.9} (expected {:.9})", log.distance, (1.2f64.powi(2) + 0.7f64.powi(2) + 0.1f64.powi(2)).sqrt());
    println!("tangent recovered to {:.1e}", frob(&(log.eta.eta() - h.eta())));
    let back = grass_exp(&HorizontalVector::new(&y, log.eta.eta().clone())?)?;
    println!("endpoint vs aligned target {:.1e}", frob(&(back.as_matrix() - log.aligned.as_matrix())));
    Ok(())
}
