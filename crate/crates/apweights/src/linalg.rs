//! Small dense Hermitian matrix helpers.
//!
//! Everything here operates on `m x m` complex matrices with `m` small
//! (default limit 8). Operator norms are largest singular values. Matrix
//! powers go through the Hermitian eigendecomposition, re-symmetrizing
//! first so that accumulated round-off in averaged matrices cannot leak
//! imaginary parts into eigenvalues.

use crate::{Error, Result};
use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Default bound on the matrix dimension `m`.
pub const DEFAULT_MAX_DIM: usize = 8;

/// Relative asymmetry tolerated by [`HermitianMatrix::try_new`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalue ratio below which negative powers are refused.
pub const CONDITION_FLOOR: f64 = 1e-14;

/// A validated Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    data: CMatrix,
}

impl HermitianMatrix {
    /// Validates squareness, the dimension limit and Hermitian symmetry
    /// (relative asymmetry below [`HERMITIAN_TOL`]), then stores the
    /// symmetrized part `(A + A*)/2`.
    pub fn try_new(a: CMatrix) -> Result<Self> {
        Self::try_new_with_limit(a, DEFAULT_MAX_DIM)
    }

    pub fn try_new_with_limit(a: CMatrix, limit: usize) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix is not square",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::DimensionMismatch("empty matrix".into()));
        }
        if a.nrows() > limit {
            return Err(Error::MatrixTooLarge {
                m: a.nrows(),
                limit,
            });
        }
        let adj = a.adjoint();
        let defect = (&a - &adj).norm();
        let scale = a.norm().max(1e-300);
        if defect / scale > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                defect: defect / scale,
            });
        }
        let sym = (&a + adj).map(|z| z * 0.5);
        Ok(Self { data: sym })
    }

    /// Hermitian matrix from real diagonal entries.
    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let m = diag.len();
        let mut a = CMatrix::zeros(m, m);
        for (i, &d) in diag.iter().enumerate() {
            a[(i, i)] = C64::new(d, 0.0);
        }
        Self::try_new(a)
    }

    pub fn identity(m: usize) -> Self {
        Self {
            data: CMatrix::identity(m, m),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    /// Real eigenvalues in ascending order with a unitary eigenbasis.
    pub fn eigendecompose(&self) -> (DVector<f64>, CMatrix) {
        let se = self.data.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
        let vals = DVector::from_iterator(self.dim(), order.iter().map(|&i| se.eigenvalues[i]));
        let vecs = CMatrix::from_columns(
            &order
                .iter()
                .map(|&i| se.eigenvectors.column(i).into_owned())
                .collect::<Vec<_>>(),
        );
        (vals, vecs)
    }
}

/// A Hermitian matrix with strictly positive eigenvalues, carrying its
/// eigendecomposition so repeated powers cost one decomposition.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    eigvals: DVector<f64>,
    eigvecs: CMatrix,
    matrix: CMatrix,
}

impl SpdMatrix {
    /// Accepts Hermitian input whose eigenvalues are strictly positive
    /// (allowing a relative round-off margin of `1e-12` of the largest).
    pub fn try_from_hermitian(h: &HermitianMatrix) -> Result<Self> {
        let (vals, vecs) = h.eigendecompose();
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = vals[0];
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::NonFiniteIntegrand(vec![]));
        }
        if min <= 0.0 {
            if min < -1e-12 * max.abs().max(1e-300) {
                return Err(Error::NotPositiveDefinite { min_eig: min });
            }
            return Err(Error::NotPositiveDefinite { min_eig: min });
        }
        Ok(Self {
            eigvals: vals,
            eigvecs: vecs,
            matrix: h.matrix().clone(),
        })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            eigvals: DVector::from_element(m, 1.0),
            eigvecs: CMatrix::identity(m, m),
            matrix: CMatrix::identity(m, m),
        }
    }

    /// Positive definite matrix from strictly positive diagonal entries.
    pub fn from_positive_diagonal(diag: &[f64]) -> Result<Self> {
        for &d in diag {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::NotPositiveDefinite { min_eig: d });
            }
        }
        Self::try_from_hermitian(&HermitianMatrix::from_real_diagonal(diag)?)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigvals
    }

    /// `A^alpha = U diag(lambda_i^alpha) U*` for real `alpha`.
    ///
    /// Negative powers require the eigenvalue ratio to stay above
    /// [`CONDITION_FLOOR`].
    pub fn power(&self, alpha: f64) -> Result<SpdMatrix> {
        let max = self.eigvals[self.dim() - 1];
        let min = self.eigvals[0];
        if alpha < 0.0 && min / max < CONDITION_FLOOR {
            return Err(Error::IllConditioned { ratio: min / max });
        }
        let powered: Vec<f64> = self.eigvals.iter().map(|l| l.powf(alpha)).collect();
        if powered.iter().any(|v| !v.is_finite()) {
            return Err(Error::IllConditioned { ratio: min / max });
        }
        let mut d = CMatrix::zeros(self.dim(), self.dim());
        for (i, &v) in powered.iter().enumerate() {
            d[(i, i)] = C64::new(v, 0.0);
        }
        let mat = &self.eigvecs * d * self.eigvecs.adjoint();
        // Round-trip through the Hermitian constructor to strip round-off.
        let h = HermitianMatrix::try_new_with_limit(mat, self.dim())?;
        let (vals, vecs) = h.eigendecompose();
        Ok(SpdMatrix {
            matrix: h.into_matrix(),
            eigvals: vals,
            eigvecs: vecs,
        })
    }

    pub fn inverse(&self) -> Result<SpdMatrix> {
        self.power(-1.0)
    }

    /// Largest eigenvalue; for positive definite matrices this is the
    /// operator norm.
    pub fn operator_norm(&self) -> f64 {
        self.eigvals[self.dim() - 1]
    }

    pub fn apply(&self, z: &DVector<C64>) -> DVector<C64> {
        &self.matrix * z
    }
}

/// Operator norm `sup_{|z|=1} |Az|`: the largest singular value.
pub fn operator_norm(a: &CMatrix) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix is not square",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFiniteIntegrand(vec![]));
    }
    let svd = a.clone().svd(false, false);
    Ok(svd
        .singular_values
        .iter()
        .cloned()
        .fold(0.0f64, f64::max))
}

/// Relative defect `| ||AB|| - ||BA|| | / max(||AB||, ||BA||)`.
///
/// For nonnegative definite `A`, `B` the two norms agree exactly, so this
/// measures pure round-off; values around 1e-12 are expected.
pub fn norm_commutation_defect(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dims {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let ab = operator_norm(&(a.matrix() * b.matrix()))?;
    let ba = operator_norm(&(b.matrix() * a.matrix()))?;
    Ok((ab - ba).abs() / ab.max(ba).max(1e-300))
}

/// `( sum_i |A e_i|^p )^(1/p)` over the columns of `A`.
///
/// Comparable to the operator norm with constants depending only on `m`
/// and `p`: `||A|| <= sqrt(m) * max_i |A e_i|` and each column norm is at
/// most `||A||`. Used by the scalar-versus-vector reverse Hölder bridge.
pub fn column_p_norm(a: &CMatrix, p: f64) -> Result<f64> {
    if p <= 0.0 {
        return Err(Error::InvalidParameter(format!("p = {p} must be > 0")));
    }
    let mut acc = 0.0f64;
    for j in 0..a.ncols() {
        acc += a.column(j).norm().powf(p);
    }
    Ok(acc.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn random_hermitian(m: usize, seed: u64) -> HermitianMatrix {
        let mut rng = stream(seed, Purpose::MatrixSamples, 1000 + m as u64);
        let a = CMatrix::from_fn(m, m, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let h = &a + a.adjoint();
        HermitianMatrix::try_new(h).unwrap()
    }

    fn random_spd(m: usize, seed: u64) -> SpdMatrix {
        let mut rng = stream(seed, Purpose::MatrixSamples, 2000 + m as u64);
        let a = CMatrix::from_fn(m, m, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let spd = &a * a.adjoint() + CMatrix::identity(m, m) * C64::new(0.1, 0.0);
        SpdMatrix::try_from_hermitian(&HermitianMatrix::try_new(spd).unwrap()).unwrap()
    }

    #[test]
    fn operator_norm_identity_is_one() {
        let id = CMatrix::identity(3, 3);
        assert!((operator_norm(&id).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn operator_norm_diagonal_picks_max() {
        let d = HermitianMatrix::from_real_diagonal(&[3.0, 1.0]).unwrap();
        assert!((operator_norm(d.matrix()).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn operator_norm_dominates_sphere_samples() {
        // Independent oracle: |Az| for unit z never exceeds the SVD norm.
        for m in 1..=4 {
            let h = random_hermitian(m, 11);
            let norm = operator_norm(h.matrix()).unwrap();
            let mut rng = stream(11, Purpose::Directions, m as u64);
            let mut best = 0.0f64;
            for _ in 0..500 {
                let z = DVector::from_fn(m, |_, _| {
                    C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                });
                let n = z.norm();
                if n < 1e-9 {
                    continue;
                }
                best = best.max((h.matrix() * &z).norm() / n);
            }
            assert!(norm >= best - 1e-6 * norm.max(1.0));
            assert!(best >= 0.5 * norm, "sphere sample should get within 2x");
        }
    }

    #[test]
    fn matrix_power_square_root_of_diagonal() {
        let d = SpdMatrix::from_positive_diagonal(&[4.0, 9.0]).unwrap();
        let r = d.power(0.5).unwrap();
        assert!((r.matrix()[(0, 0)].re - 2.0).abs() < 1e-12);
        assert!((r.matrix()[(1, 1)].re - 3.0).abs() < 1e-12);
        assert!(r.matrix()[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn matrix_power_zero_gives_identity() {
        let a = random_spd(3, 5);
        let p0 = a.power(0.0).unwrap();
        assert!((p0.matrix() - CMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn matrix_power_minus_one_matches_direct_inverse() {
        // Independent oracle: nalgebra LU inverse.
        let a = random_spd(3, 6);
        let inv = a.power(-1.0).unwrap();
        let direct = a.matrix().clone().try_inverse().unwrap();
        assert!((inv.matrix() - direct).norm() < 1e-10);
    }

    #[test]
    fn matrix_power_composes() {
        let a = random_spd(4, 7);
        let half = a.power(0.5).unwrap();
        let recomposed = half.matrix() * half.matrix();
        assert!((recomposed - a.matrix()).norm() < 1e-10);
    }

    #[test]
    fn negative_power_of_singularish_matrix_fails() {
        let h = HermitianMatrix::from_real_diagonal(&[1.0, 1e-16]).unwrap();
        let spd = SpdMatrix::try_from_hermitian(&h).unwrap();
        assert!(matches!(
            spd.power(-1.0),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut a = CMatrix::identity(2, 2);
        a[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(
            HermitianMatrix::try_new(a),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn dimension_limit_enforced() {
        let a = CMatrix::identity(9, 9);
        assert!(matches!(
            HermitianMatrix::try_new(a),
            Err(Error::MatrixTooLarge { .. })
        ));
    }

    #[test]
    fn indefinite_rejected_by_spd() {
        let h = HermitianMatrix::from_real_diagonal(&[1.0, -0.5]).unwrap();
        assert!(matches!(
            SpdMatrix::try_from_hermitian(&h),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn commutation_defect_tiny_for_nonnegative_pairs() {
        for seed in 0..20u64 {
            let a = random_spd(3, seed);
            let b = random_spd(3, seed + 100);
            let ah = HermitianMatrix::try_new(a.matrix().clone()).unwrap();
            let bh = HermitianMatrix::try_new(b.matrix().clone()).unwrap();
            let defect = norm_commutation_defect(&ah, &bh).unwrap();
            assert!(defect < 1e-10, "defect {defect:.3e} at seed {seed}");
        }
    }

    #[test]
    fn column_p_norm_brackets_operator_norm() {
        for seed in 0..10u64 {
            for &p in &[0.5, 1.0, 2.0, 3.0] {
                let a = random_spd(3, 300 + seed);
                let m = a.dim() as f64;
                let op = operator_norm(a.matrix()).unwrap();
                let col = column_p_norm(a.matrix(), p).unwrap();
                assert!(col <= m.powf(1.0 / p) * op * (1.0 + 1e-12));
                assert!(op <= m.sqrt() * col * (1.0 + 1e-12));
            }
        }
    }
}
