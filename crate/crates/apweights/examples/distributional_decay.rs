//! Distributional bound for the reduced weight: on Q the set where
//! ||A_Q W^{-1/p}(y)||^p exceeds e^M occupies at most a
//! log(C [W]) / M fraction of Q. For w(x) = |x| on [0,1] at p = 1 the
//! fraction at level M is exactly e^{-M} / 2, which the measured
//! column reproduces.
//!
//! Run with `cargo run --release --example distributional_decay`.

use apweights::characteristics::{distributional_check, CALIBRATED_C};
use apweights::geometry::Cube;
use apweights::quadrature::QuadratureConfig;
use apweights::weights::Weight;

fn main() -> apweights::Result<()> {
    let quad = QuadratureConfig::default();
    let weight = Weight::power_identity(1.0, 1, 1)?;
    let q = Cube::from_corner(&[0.0], 1.0)?;
    let levels: Vec<f64> = (1..=10).map(f64::from).collect();

    let report = distributional_check(&weight, 1.0, &q, &levels, 4, CALIBRATED_C, &quad, 21)?;
    println!(
        "characteristic {:.5}, calibration constant {}",
        report.characteristic_value, report.calibration_c
    );
    println!(
        "{:>5} {:>12} {:>12} {:>12} {:>8}",
        "M", "fraction", "exact", "bound", "within"
    );
    for row in &report.rows {
        println!(
            "{:>5} {:>12.6} {:>12.6} {:>12.6} {:>8}",
            row.level,
            row.fraction,
            0.5 * (-row.level).exp(),
            row.bound,
            row.within
        );
    }
    if let Some(slope) = report.decay_slope {
        println!("log fraction against level falls with slope {slope:.3}");
    }
    Ok(())
}
