//! Karcher mean of a 50-point cluster on St(10, 40).

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stiefel_log::meanstat::{karcher_mean, sample_cluster, Manifold, MeanOptions};
use stiefel_log::stiefel::{random_point_rng, MetricParams};
use stiefel_log::Result;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = MetricParams::with_ratio(0.5)?;
    let center = random_point_rng(40, 10, &mut rng)?;
    let pts = sample_cluster(&center, 50, (0.4 * PI, 0.5 * PI), &m, &Manifold::Stiefel, &mut rng)?;
    let opts = MeanOptions { max_iter: 4, ..Default::default() };
    let rep = karcher_mean(&pts, &pts[0], &m, &Manifold::Stiefel, &opts)?;
    for (i, (g, d)) in rep.grad_norms.iter().zip(&rep.msd).enumerate() {
        println!("iteration {i}: log10 |grad| = {:>8.4}  mean sq. distance = {d:.6}", g.log10());
    }
    Ok(())
}
