//! Reducing operators A_Q: a single positive matrix whose images |A_Q z|
//! reproduce the L^p average of |W^{1/p} z| over Q up to certified
//! two-sided constants. For order two the operator is the square root
//! of the average matrix; the general ellipsoid path must agree with it.
//!
//! Run with `cargo run --release --example reducing_operators`.

use apweights::geometry::Cube;
use apweights::linalg::operator_norm;
use apweights::quadrature::QuadratureConfig;
use apweights::reducing::{reduce, reduce_forced_ellipsoid};
use apweights::weights::{builtin_examples, Weight, WeightSpec};

fn main() -> apweights::Result<()> {
    let quad = QuadratureConfig::default();
    let q = Cube::from_corner(&[0.0], 1.0)?;

    let w = Weight::new(
        WeightSpec::Diagonal {
            entries: vec![WeightSpec::Power { a: 1.0 }, WeightSpec::Power { a: 0.0 }],
        },
        1,
    )?;
    println!("W = diag(|x|, 1) on [0,1]:");
    for p in [1.0, 2.0, 3.0] {
        let op = reduce(&w, &q, p, &quad, 11)?;
        let a = op.matrix.matrix();
        println!(
            "  p = {p}: A_Q = [{:.6}, {:.6}; {:.6}, {:.6}]  ({:?}, c_high/c_low = {:.4})",
            a[(0, 0)].re,
            a[(0, 1)].re,
            a[(1, 0)].re,
            a[(1, 1)].re,
            op.method,
            op.c_high / op.c_low
        );
    }

    let exact = reduce(&w, &q, 2.0, &quad, 11)?;
    let fitted = reduce_forced_ellipsoid(&w, &q, 2.0, &quad, 11)?;
    let gap = operator_norm(&(exact.matrix.matrix() - fitted.matrix.matrix()))?
        / exact.matrix.operator_norm();
    println!("ellipsoid path vs exact order-two path: relative gap {gap:.4}");

    println!("\ncertified sandwich across the built-in examples (p = 3):");
    for (name, weight) in builtin_examples(1)? {
        let q = Cube::from_corner(&vec![0.0; weight.n], 1.0)?;
        let op = reduce(&weight, &q, 3.0, &quad, 11)?;
        let m = weight.matrix_dim() as f64;
        println!(
            "  {:<28} c_high/c_low = {:.4}  (bound 2 sqrt(m) = {:.4})",
            name,
            op.c_high / op.c_low,
            2.0 * m.sqrt()
        );
    }
    Ok(())
}
