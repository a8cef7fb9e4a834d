//! Reverse Hölder self-improvement: once the scalar-reduction
//! characteristic [W]^sc is known, averages of ||W^{1/p} M||^p improve
//! themselves up to the exponent r = 1 + 1/(2^{n+1} [W]^sc - 1), with
//! the raised-power average controlled by twice the r-th power of the
//! p-th power average.
//!
//! Run with `cargo run --release --example reverse_holder`.

use apweights::characteristics::{reverse_holder_check, sc_characteristic};
use apweights::geometry::probe_family;
use apweights::quadrature::QuadratureConfig;
use apweights::weights::Weight;

fn main() -> apweights::Result<()> {
    let quad = QuadratureConfig::default();
    let weight = Weight::power_identity(1.0, 1, 2)?;
    let p = 2.0;
    let family = probe_family(&[-4.0], &[4.0], -2, 3, &weight.singular_points(), 8, 9)?;

    let sc = sc_characteristic(&weight, p, &family, 12, 12, 4, &quad, 9)?;
    println!(
        "scalar-reduction characteristic: matrix variant {:.5}, vector variant {:.5}",
        sc.matrix_variant.value, sc.vector_variant.value
    );

    let rh = reverse_holder_check(
        &weight,
        p,
        sc.matrix_variant.value.max(1.0),
        8,
        &family,
        &quad,
        9,
    )?;
    println!("endpoint exponent r = {:.6}", rh.endpoint_r);
    println!(
        "factor-2 inequality held on {} sampled (matrix, cube) rows: {}",
        rh.rows.len(),
        rh.all_ok
    );
    println!(
        "sup over cubes of the endpoint reducing average: {:.5} (dyadic maximal form {:.5})",
        rh.reducing_sup, rh.dyadic_maximal_sup
    );
    Ok(())
}
