//! Membership of the power weights w(x) = |x|^a on the real line: the
//! order-p characteristic is finite exactly when a lies in (-1, p-1)
//! for p > 1 and in (-1, 0] at p = 1. The computed divergence flag is
//! compared against that predicate for a grid of (a, p) pairs.
//!
//! Run with `cargo run --release --example membership_table`.

use apweights::characteristics::ap_characteristic;
use apweights::geometry::probe_family;
use apweights::quadrature::QuadratureConfig;
use apweights::weights::Weight;

fn main() -> apweights::Result<()> {
    let quad = QuadratureConfig::default();
    println!(
        "{:>6} {:>5} {:>10} {:>10} {:>8}",
        "a", "p", "computed", "expected", "match"
    );
    let mut mismatches = 0;
    for &a in &[-0.9, -0.5, 0.0, 1.0, 1.9, 2.1, 3.0] {
        let weight = Weight::power_identity(a, 1, 1)?;
        let family = probe_family(&[-4.0], &[4.0], -2, 3, &weight.singular_points(), 8, 7)?;
        for &p in &[1.0, 1.5, 3.0] {
            let report = ap_characteristic(&weight, p, &family, &quad)?;
            let finite = !report.is_divergent();
            let expected = if p > 1.0 {
                a > -1.0 && a < p - 1.0
            } else {
                a > -1.0 && a <= 0.0
            };
            if finite != expected {
                mismatches += 1;
            }
            println!(
                "{:>6} {:>5} {:>10} {:>10} {:>8}",
                a,
                p,
                if finite { "finite" } else { "infinite" },
                if expected { "finite" } else { "infinite" },
                if finite == expected { "ok" } else { "MISMATCH" }
            );
        }
    }
    println!("mismatches: {mismatches}");
    Ok(())
}
