//! The equivalence chain: the order-independent class admits several
//! per-cube definitions (norm double averages, log-determinant gaps,
//! reducing-operator comparisons, vector forms). On one cube all of
//! them hold with mutually comparable constants; this prints the whole
//! chain for W = |x| I_2 on its worst probe cube.
//!
//! Run with `cargo run --release --example equivalence_chain`.

use apweights::characteristics::{apinf_characteristic, compare_conditions};
use apweights::geometry::probe_family;
use apweights::quadrature::QuadratureConfig;
use apweights::weights::Weight;

fn main() -> apweights::Result<()> {
    let quad = QuadratureConfig::default();
    let weight = Weight::power_identity(1.0, 1, 2)?;
    let p = 2.0;

    let family = probe_family(&[-4.0], &[4.0], -2, 3, &weight.singular_points(), 8, 3)?;
    let apinf = apinf_characteristic(&weight, p, &family, &quad)?;
    println!(
        "worst cube over {} probes: center {:?}, edge {:.4}, value {:.5}",
        family.len(),
        apinf.argmax_cube.center,
        apinf.argmax_cube.edge,
        apinf.value
    );

    let eq = compare_conditions(&weight, p, &apinf.argmax_cube, &quad, 12, 3)?;
    println!("\nsmallest admissible constants on that cube:");
    for c in &eq.constants {
        println!("  ({}) {:<44} {:>10.5}", c.index, c.label, c.value);
    }
    println!("cross ratio (largest / smallest): {:.3}", eq.cross_ratio);
    if eq.flagged.is_empty() {
        println!("no condition flagged as divergent");
    } else {
        println!("flagged: {:?}", eq.flagged);
    }
    Ok(())
}
