//! Reducing-operator multipliers: scaling the level-j conditional
//! expectation of a test function by gamma_j = ||W^{1/p} A_Q^{-1}|| on
//! each dyadic cube stays bounded on the mixed l^q(L^p) norm, with a
//! constant independent of how deep the level range goes.
//!
//! Run with `cargo run --release --example multiplier_bound`.

use apweights::characteristics::multiplier_bound_check;
use apweights::quadrature::QuadratureConfig;
use apweights::weights::Weight;

fn main() -> apweights::Result<()> {
    let quad = QuadratureConfig::default();
    let weight = Weight::power_identity(1.0, 1, 1)?;

    for q_exp in [1.0, 2.0, f64::INFINITY] {
        let report = multiplier_bound_check(&weight, 2.0, q_exp, 0..=6, 40, &quad, 33)?;
        println!("q exponent {q_exp}:");
        for (depth, ratio) in &report.per_depth {
            println!("  levels 0..={depth}: worst ratio {ratio:.5}");
        }
        println!(
            "  depth-growth slope {:?}, bounded: {}",
            report.slope, report.ok
        );
    }
    Ok(())
}
