//! Structure of the order-independent class: the characteristic never
//! grows when the order does, for p <= 1 it is dominated by the A_p
//! characteristic per cube, the inverse image admits a positive
//! integrability exponent u*, membership self-improves to the order
//! 1 + p/u*, and for p > 1 the dual weight at the conjugate order has a
//! comparable characteristic.
//!
//! Run with `cargo run --release --example class_structure`.

use apweights::characteristics::{dual_weight_check, inclusion_checks, integrability_exponent};
use apweights::geometry::probe_family;
use apweights::quadrature::QuadratureConfig;
use apweights::weights::Weight;

fn main() -> apweights::Result<()> {
    let quad = QuadratureConfig::default();
    let weight = Weight::power_identity(1.0, 1, 2)?;
    let family = probe_family(&[-4.0], &[4.0], -2, 3, &weight.singular_points(), 8, 27)?;
    let p = 1.0;

    let u_grid = [0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0];
    let integ = integrability_exponent(&weight, p, &family, &u_grid, &quad, 27)?;
    println!("integrability sweep at order {p}:");
    for row in &integ.rows {
        println!(
            "  u = {:<5} sup = {:<12.5} stable: {}",
            row.u, row.sup, row.stable
        );
    }
    println!("largest stable exponent u* = {}", integ.u_star);

    let inc = inclusion_checks(&weight, p, 2.0, &family, &quad, 27)?;
    println!(
        "\ncharacteristic at order 2 over order 1: {:.4} (monotone when <= 1)",
        inc.inclusion_constant
    );
    if let Some(dom) = inc.sharp_domination {
        println!("worst per-cube ratio against the A_1 value: {dom:.4}");
    }
    if let (Some(q_union), Some(divergent)) = (inc.q_union, inc.union_divergent) {
        println!(
            "self-improved order 1 + p/u* = {:.4}, characteristic there {}",
            q_union,
            if divergent { "diverges" } else { "stays finite" }
        );
    }

    let dual = dual_weight_check(&weight, 2.0, &family, &quad, 27)?;
    println!(
        "\ndual weight at the conjugate of 2: scaled value {:.4} vs primal {:.4} (ratio {:.4})",
        dual.dual_value_scaled, dual.ap_value, dual.comparability_ratio
    );
    println!("comparable: {}", dual.comparable);
    Ok(())
}
