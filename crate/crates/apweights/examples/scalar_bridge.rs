//! The scalar bridge: for W(x) = |x| I_m on a cube Q = [0, L], the
//! order-independent characteristic of the single cube Q equals
//! (avg_Q w) exp(-avg_Q log w) = e/2 = 1.35914..., no matter which
//! order p, edge L, or matrix dimension m is used.
//!
//! Run with `cargo run --release --example scalar_bridge`.

use apweights::characteristics::apinf_characteristic;
use apweights::geometry::{Cube, ProbeFamily};
use apweights::quadrature::QuadratureConfig;
use apweights::weights::Weight;

fn main() -> apweights::Result<()> {
    let quad = QuadratureConfig::default();
    let oracle = std::f64::consts::E / 2.0;
    println!("oracle  (avg w) exp(-avg log w) on [0,L] for w = |x|: {oracle:.6}");
    println!("{:>4} {:>6} {:>6} {:>12} {:>12}", "m", "p", "L", "value", "error");

    for m in [1usize, 2, 3] {
        let weight = Weight::power_identity(1.0, 1, m)?;
        for p in [0.5, 1.0, 2.0] {
            for l in [0.25, 1.0, 4.0] {
                let family = ProbeFamily {
                    cubes: vec![Cube::from_corner(&[0.0], l)?],
                    description: format!("single cube [0, {l}]"),
                    seed: 0,
                };
                let report = apinf_characteristic(&weight, p, &family, &quad)?;
                println!(
                    "{:>4} {:>6} {:>6} {:>12.6} {:>12.2e}",
                    m,
                    p,
                    l,
                    report.value,
                    (report.value - oracle).abs()
                );
            }
        }
    }
    Ok(())
}
