//! Weight dimensions: the growth exponent of the two-cube quantity as
//! the outer (or inner) cube is dilated. For w(x) = |x|^a log(2+1/|x|)^b
//! the lower dimension is min(a,0) and the upper dimension is max(a,0);
//! whether the defining supremum is attained depends on the sign of b,
//! which the long-ladder probe detects as unbounded drawup.
//!
//! Run with `cargo run --release --example dimension_fit`.

use apweights::dimensions::{
    attainment_probe, dimension_base_cubes, estimate_dimension, DimensionKind,
};
use apweights::quadrature::QuadratureConfig;
use apweights::weights::{Weight, WeightSpec};

fn main() -> apweights::Result<()> {
    let quad = QuadratureConfig::default();
    let scales: Vec<f64> = (1..=8).map(|j| 2f64.powi(j)).collect();

    for (label, spec, d_lower, d_upper) in [
        ("|x|", WeightSpec::Power { a: 1.0 }, 0.0, 1.0),
        (
            "|x|^-1/2 log(2+1/|x|)",
            WeightSpec::LogIn { a: -0.5, b: 1.0 },
            -0.5,
            0.0,
        ),
    ] {
        let weight = Weight::new(spec, 1)?;
        let base = dimension_base_cubes(&weight, 2f64.powi(-16), 256.0, 2, 5)?;
        println!("w = {label}:");
        for (kind, truth) in [
            (DimensionKind::Lower, d_lower),
            (DimensionKind::Upper, d_upper),
        ] {
            let est = estimate_dimension(&weight, 2.0, kind, &base, &scales, &quad)?;
            println!(
                "  {:?} dimension: fitted {:.4} (true {:.1}), max residual {:.3}",
                kind, est.d_hat, truth, est.residual_max
            );
            let probe = attainment_probe(&weight, 2.0, kind, truth, 24, &quad)?;
            println!(
                "    attainment probe: drawup {:.2} over {} curves => {}",
                probe.max_drawup,
                probe.curves.len(),
                if probe.attained {
                    "supremum attained"
                } else {
                    "supremum not attained"
                }
            );
        }
    }
    Ok(())
}
