//! Built-in matrix weight families and their evaluation.
//!
//! The scalar building blocks are, with `r = |x|`:
//!
//! * `Power(a)`:  `r^a`
//! * `LogOut(a, b)`:  `r^a [log(2 + r)]^b` (log factor active far out)
//! * `LogIn(a, b)`:  `r^a [log(2 + 1/r)]^b` (log factor active near 0)
//!
//! Matrix weights are assembled from these by multiplying the identity,
//! forming diagonals, conjugating by a fixed unitary, translating,
//! rescaling, or raising to a constant power. A two-singularity quotient
//! family with prescribed growth exponents at 0 and at `x0 = (1,0,...,0)`
//! drives the dimension sharpness experiments. All scalar evaluation runs
//! in log space so large exponents cannot overflow before they are needed.
//!
//! `analytic_average` and `membership_truth` are test oracles; the
//! computational pipeline never consults them.

use crate::linalg::{C64, CMatrix, HermitianMatrix, DEFAULT_MAX_DIM};
use crate::geometry::Cube;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Complex matrix as nested `[re, im]` pairs, row-major.
pub type ComplexMatrixData = Vec<Vec<[f64; 2]>>;

/// Weight family expression tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    /// `|x|^a` (scalar).
    Power { a: f64 },
    /// `|x|^a [log(2+|x|)]^b` (scalar).
    LogOut { a: f64, b: f64 },
    /// `|x|^a [log(2+1/|x|)]^b` (scalar).
    LogIn { a: f64, b: f64 },
    /// Scalar weight times `I_m`.
    ScalarTimesIdentity { m: usize, scalar: Box<WeightSpec> },
    /// Diagonal matrix of scalar weights.
    Diagonal { entries: Vec<WeightSpec> },
    /// `U W U*` for a fixed unitary `U`.
    Conjugated { u: ComplexMatrixData, inner: Box<WeightSpec> },
    /// `W(x - shift)`.
    Translated { shift: Vec<f64>, inner: Box<WeightSpec> },
    /// `t * W` for a positive constant `t`.
    Scaled { coeff: f64, inner: Box<WeightSpec> },
    /// `W^t` for a real constant `t` (same eigenbasis, powered eigenvalues).
    ExponentScaled { factor: f64, inner: Box<WeightSpec> },
    /// Quotient weight with growth `d1` at the origin and `d2` at
    /// `x0 = (1,0,...,0)`, times `I_m`.
    Sharpness { d1: f64, d2: f64, m: usize },
    /// Piecewise-constant user weight sampled on a uniform grid.
    Sampled {
        lo: Vec<f64>,
        hi: Vec<f64>,
        cells_per_axis: usize,
        values: Vec<ComplexMatrixData>,
    },
}

/// A weight spec together with its ambient dimension, validated.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Weight {
    pub spec: WeightSpec,
    /// Ambient dimension of `R^n`.
    pub n: usize,
}

/// Shape of the spectral decomposition across all of `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub enum EigenStructure {
    /// `W = w I_m`: one scalar log, trivial basis.
    ScalarLike,
    /// `W = U diag(w_i) U*` with `U` constant in `x` (possibly identity).
    SharedBasis,
    /// Eigenbasis varies with `x` (sampled weights).
    Varying,
}

/// Ground truth about membership and dimensions, when the family admits one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipTruth {
    /// Member of `A_{p,infty}` for every `p` (equivalently scalar `A_infty`
    /// for the scalar families).
    pub a_infty: bool,
    pub a_one: Option<bool>,
    pub d_lower: Option<DimensionTruth>,
    pub d_upper: Option<DimensionTruth>,
    ap_rule: ApRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionTruth {
    pub value: f64,
    pub attained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum ApRule {
    /// Scalar `|x|^a` in dimension `n`: `A_p` iff `a` lies in
    /// `(-n, n(p-1))` for `p > 1`, and iff `a` lies in `(-n, 0]` for
    /// `p <= 1`.
    PowerLaw { a: f64, n: f64 },
    Constant(bool),
    Unknown,
}

impl MembershipTruth {
    pub fn a_p(&self, p: f64) -> Option<bool> {
        match &self.ap_rule {
            ApRule::PowerLaw { a, n } => {
                if p <= 1.0 {
                    Some(*a > -n && *a <= 0.0)
                } else {
                    Some(*a > -n && *a < n * (p - 1.0))
                }
            }
            ApRule::Constant(v) => Some(*v),
            ApRule::Unknown => None,
        }
    }
}

/// Exactness tag for [`analytic_average`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticAverage {
    pub value: f64,
    /// Exact antiderivative vs. comparability envelope (correct up to
    /// dimensional constants only).
    pub exact: bool,
}

impl Weight {
    pub fn new(spec: WeightSpec, n: usize) -> Result<Self> {
        let w = Weight { spec, n };
        w.validate(DEFAULT_MAX_DIM)?;
        Ok(w)
    }

    /// Identity weight `I_m`.
    pub fn identity(n: usize, m: usize) -> Result<Self> {
        Self::power_identity(0.0, n, m)
    }

    /// `|x|^a I_m`.
    pub fn power_identity(a: f64, n: usize, m: usize) -> Result<Self> {
        let scalar = WeightSpec::Power { a };
        if m == 1 {
            Self::new(scalar, n)
        } else {
            Self::new(
                WeightSpec::ScalarTimesIdentity {
                    m,
                    scalar: Box::new(scalar),
                },
                n,
            )
        }
    }

    pub fn validate(&self, max_dim: usize) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("ambient dimension n must be >= 1".into()));
        }
        let m = self.matrix_dim();
        if m > max_dim {
            return Err(Error::MatrixTooLarge { m, limit: max_dim });
        }
        validate_spec(&self.spec, self.n)?;
        Ok(())
    }

    /// Matrix dimension `m`.
    pub fn matrix_dim(&self) -> usize {
        spec_dim(&self.spec)
    }

    pub fn eigen_structure(&self) -> EigenStructure {
        spec_structure(&self.spec)
    }

    /// Points where some eigenvalue of `W` or `W^{-1}` is 0 or infinite.
    pub fn singular_points(&self) -> Vec<Vec<f64>> {
        let mut pts = Vec::new();
        collect_singular(&self.spec, &vec![0.0; self.n], &mut pts);
        // Dedupe on quantized coordinates.
        let mut seen = std::collections::HashSet::new();
        pts.retain(|p| {
            let key: Vec<i64> = p.iter().map(|v| (v * 1e12).round() as i64).collect();
            seen.insert(key)
        });
        pts
    }

    /// Natural logs of the eigenvalues of `W(x)` plus the (constant or
    /// per-cell) eigenbasis; `None` means the standard basis.
    pub fn log_eigenvalues(&self, x: &[f64]) -> Result<(Vec<f64>, Option<CMatrix>)> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "point dim {} vs ambient {}",
                x.len(),
                self.n
            )));
        }
        eval_logs(&self.spec, x)
    }

    /// `W^alpha(x)` assembled from the spectral data.
    ///
    /// Vanishing eigenvalues are allowed (the result is then singular);
    /// infinite ones raise [`Error::SingularEvaluation`].
    pub fn evaluate(&self, x: &[f64], alpha: f64) -> Result<HermitianMatrix> {
        let (logs, basis) = self.log_eigenvalues(x)?;
        let m = logs.len();
        let vals: Vec<f64> = logs.iter().map(|l| (alpha * l).exp()).collect();
        if vals.iter().any(|v| v.is_infinite() || v.is_nan()) {
            return Err(Error::SingularEvaluation(x.to_vec()));
        }
        let mut d = CMatrix::zeros(m, m);
        for (i, &v) in vals.iter().enumerate() {
            d[(i, i)] = C64::new(v, 0.0);
        }
        let mat = match &basis {
            None => d,
            Some(u) => u * d * u.adjoint(),
        };
        HermitianMatrix::try_new_with_limit(mat, m)
    }

    /// `||W^{1/p}(x) W^{-1/p}(y)||^p` for `p > 0`.
    ///
    /// With a shared eigenbasis this is `exp(max_i (log w_i(x) - log
    /// w_i(y)))`, independent of `p`.
    pub fn norm_ratio_pow(&self, x: &[f64], y: &[f64], p: f64) -> Result<f64> {
        match self.eigen_structure() {
            EigenStructure::ScalarLike | EigenStructure::SharedBasis => {
                let (lx, _) = self.log_eigenvalues(x)?;
                let (ly, _) = self.log_eigenvalues(y)?;
                let mut best = f64::NEG_INFINITY;
                for i in 0..lx.len() {
                    best = best.max(lx[i] - ly[i]);
                }
                let v = best.exp();
                if !v.is_finite() {
                    return Err(Error::SingularEvaluation(y.to_vec()));
                }
                Ok(v)
            }
            EigenStructure::Varying => {
                let wx = self.evaluate(x, 1.0 / p)?;
                let wy = self.evaluate(y, -1.0 / p)?;
                let norm = crate::linalg::operator_norm(&(wx.matrix() * wy.matrix()))?;
                Ok(norm.powf(p))
            }
        }
    }

    /// `|W^{1/p}(x) z|^p` for `p > 0`.
    pub fn vector_image_pow(
        &self,
        x: &[f64],
        z: &nalgebra::DVector<C64>,
        p: f64,
    ) -> Result<f64> {
        let (logs, basis) = self.log_eigenvalues(x)?;
        Self::image_pow_from_logs(&logs, &basis, z, p, x)
    }

    /// `|W^{1/p} z|^p` from spectral data already in hand, shared by the
    /// batched direction integrals in the reducing-operator solver.
    pub(crate) fn image_pow_from_logs(
        logs: &[f64],
        basis: &Option<CMatrix>,
        z: &nalgebra::DVector<C64>,
        p: f64,
        x: &[f64],
    ) -> Result<f64> {
        let zz = match basis {
            None => z.clone(),
            Some(u) => u.adjoint() * z,
        };
        // |W^{1/p} z|^2 = sum_i e^{2 l_i / p} |z'_i|^2, accumulated around
        // the largest exponent to avoid overflow.
        let mut lmax = f64::NEG_INFINITY;
        for (i, l) in logs.iter().enumerate() {
            if zz[i].norm_sqr() > 0.0 {
                lmax = lmax.max(2.0 * l / p);
            }
        }
        if lmax == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter("zero direction vector".into()));
        }
        let mut acc = 0.0;
        for (i, l) in logs.iter().enumerate() {
            acc += (2.0 * l / p - lmax).exp() * zz[i].norm_sqr();
        }
        let v = ((lmax + acc.ln()) * (p / 2.0)).exp();
        if !v.is_finite() {
            return Err(Error::SingularEvaluation(x.to_vec()));
        }
        Ok(v)
    }

    /// `||W^{1/p}(x) M||^p` for `p > 0` and a fixed matrix `M`.
    pub fn matrix_image_pow(&self, x: &[f64], mat: &CMatrix, p: f64) -> Result<f64> {
        let v = (p * self.log_matrix_image(x, mat, 1.0 / p)?).exp();
        if !v.is_finite() {
            return Err(Error::SingularEvaluation(x.to_vec()));
        }
        Ok(v)
    }

    /// `ln ||W^alpha(x) M||` for any real `alpha`, stable across the
    /// dynamic ranges that power-law weights produce near their singular
    /// points. A zero image yields negative infinity.
    pub fn log_matrix_image(&self, x: &[f64], mat: &CMatrix, alpha: f64) -> Result<f64> {
        let (logs, basis) = self.log_eigenvalues(x)?;
        let m = logs.len();
        if mat.nrows() != m {
            return Err(Error::DimensionMismatch(format!(
                "matrix rows {} vs weight dim {m}",
                mat.nrows()
            )));
        }
        if alpha == 0.0 {
            return Ok(crate::linalg::operator_norm(mat)?.ln());
        }
        let scaled_logs: Vec<f64> = logs.iter().map(|l| alpha * l).collect();
        if scaled_logs.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::SingularEvaluation(x.to_vec()));
        }
        let c = scaled_logs
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if c == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        // Scale rows of U* M by e^{alpha l_i - c}; the max exponent is
        // factored out so the norm computation sees entries of order one.
        let mut mm = match &basis {
            None => mat.clone(),
            Some(u) => u.adjoint() * mat,
        };
        for i in 0..m {
            let f = if scaled_logs[i] == f64::NEG_INFINITY {
                0.0
            } else {
                (scaled_logs[i] - c).exp()
            };
            for j in 0..mm.ncols() {
                mm[(i, j)] *= f;
            }
        }
        Ok(c + crate::linalg::operator_norm(&mm)?.ln())
    }

    /// `ln |W^alpha(x) z|`; errors on the zero vector.
    pub fn log_vector_image(
        &self,
        x: &[f64],
        z: &nalgebra::DVector<C64>,
        alpha: f64,
    ) -> Result<f64> {
        let (logs, basis) = self.log_eigenvalues(x)?;
        if z.len() != logs.len() {
            return Err(Error::DimensionMismatch(format!(
                "vector len {} vs weight dim {}",
                z.len(),
                logs.len()
            )));
        }
        let zz = match &basis {
            None => z.clone(),
            Some(u) => u.adjoint() * z,
        };
        let mut c = f64::NEG_INFINITY;
        for (i, l) in logs.iter().enumerate() {
            if zz[i].norm_sqr() > 0.0 {
                let v = 2.0 * alpha * l;
                if v.is_nan() || v == f64::INFINITY {
                    return Err(Error::SingularEvaluation(x.to_vec()));
                }
                c = c.max(v);
            }
        }
        if c == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter("zero direction vector".into()));
        }
        let mut acc = 0.0;
        for (i, l) in logs.iter().enumerate() {
            if zz[i].norm_sqr() > 0.0 {
                acc += (2.0 * alpha * l - c).exp() * zz[i].norm_sqr();
            }
        }
        Ok((c + acc.ln()) / 2.0)
    }

    /// Weight evaluating to `W(x)^t`.
    pub fn exponent_scaled(&self, t: f64) -> Result<Weight> {
        Weight::new(
            WeightSpec::ExponentScaled {
                factor: t,
                inner: Box::new(self.spec.clone()),
            },
            self.n,
        )
    }

    /// Closed-form or comparability average of the scalar factor over a
    /// cube. Test oracle only.
    pub fn analytic_average(&self, q: &Cube) -> Option<AnalyticAverage> {
        analytic_avg_spec(&self.spec, q, self.n)
    }

    /// Stated membership/dimension truth for this family, if the
    /// literature pins one down.
    pub fn membership_truth(&self) -> Option<MembershipTruth> {
        truth_of(&self.spec, self.n as f64)
    }
}

/// Named example weights, one per family constructor, all with matrix
/// dimension at most 3 and all in the order-independent class on `R^n`.
/// Verification suites and cross-family checks iterate over this list.
pub fn builtin_examples(n: usize) -> Result<Vec<(String, Weight)>> {
    let theta = std::f64::consts::FRAC_PI_6;
    let rotation = vec![
        vec![[theta.cos(), 0.0], [-theta.sin(), 0.0]],
        vec![[theta.sin(), 0.0], [theta.cos(), 0.0]],
    ];
    let mut shift = vec![0.0; n];
    shift[0] = 0.5;
    let specs: Vec<(&str, WeightSpec)> = vec![
        (
            "identity",
            WeightSpec::ScalarTimesIdentity {
                m: 2,
                scalar: Box::new(WeightSpec::Power { a: 0.0 }),
            },
        ),
        ("power |x|", WeightSpec::Power { a: 1.0 }),
        (
            "power |x|^-1/2 times I_2",
            WeightSpec::ScalarTimesIdentity {
                m: 2,
                scalar: Box::new(WeightSpec::Power { a: -0.5 }),
            },
        ),
        ("log-out (1,1)", WeightSpec::LogOut { a: 1.0, b: 1.0 }),
        ("log-in (0.5,-1)", WeightSpec::LogIn { a: 0.5, b: -1.0 }),
        (
            "diagonal(|x|, 1)",
            WeightSpec::Diagonal {
                entries: vec![WeightSpec::Power { a: 1.0 }, WeightSpec::Power { a: 0.0 }],
            },
        ),
        (
            "diagonal(|x|, 1, |x|^-1/2)",
            WeightSpec::Diagonal {
                entries: vec![
                    WeightSpec::Power { a: 1.0 },
                    WeightSpec::Power { a: 0.0 },
                    WeightSpec::Power { a: -0.5 },
                ],
            },
        ),
        (
            "rotated diagonal",
            WeightSpec::Conjugated {
                u: rotation,
                inner: Box::new(WeightSpec::Diagonal {
                    entries: vec![
                        WeightSpec::Power { a: 1.0 },
                        WeightSpec::Power { a: -0.5 },
                    ],
                }),
            },
        ),
        (
            "translated |x - x0|",
            WeightSpec::Translated {
                shift,
                inner: Box::new(WeightSpec::Power { a: 1.0 }),
            },
        ),
        (
            "scaled 3|x|",
            WeightSpec::Scaled {
                coeff: 3.0,
                inner: Box::new(WeightSpec::Power { a: 1.0 }),
            },
        ),
        (
            "square root of |x|^2",
            WeightSpec::ExponentScaled {
                factor: 0.5,
                inner: Box::new(WeightSpec::Power { a: 2.0 }),
            },
        ),
        (
            "two-singularity quotient",
            WeightSpec::Sharpness {
                d1: 0.5,
                d2: 1.0,
                m: 1,
            },
        ),
    ];
    specs
        .into_iter()
        .map(|(name, spec)| Ok((name.to_string(), Weight::new(spec, n)?)))
        .collect()
}

fn spec_dim(spec: &WeightSpec) -> usize {
    match spec {
        WeightSpec::Power { .. } | WeightSpec::LogOut { .. } | WeightSpec::LogIn { .. } => 1,
        WeightSpec::ScalarTimesIdentity { m, .. } => *m,
        WeightSpec::Diagonal { entries } => entries.len(),
        WeightSpec::Conjugated { inner, .. } => spec_dim(inner),
        WeightSpec::Translated { inner, .. } => spec_dim(inner),
        WeightSpec::Scaled { inner, .. } => spec_dim(inner),
        WeightSpec::ExponentScaled { inner, .. } => spec_dim(inner),
        WeightSpec::Sharpness { m, .. } => *m,
        WeightSpec::Sampled { values, .. } => values.first().map_or(0, |v| v.len()),
    }
}

fn spec_structure(spec: &WeightSpec) -> EigenStructure {
    match spec {
        WeightSpec::Power { .. }
        | WeightSpec::LogOut { .. }
        | WeightSpec::LogIn { .. }
        | WeightSpec::Sharpness { .. } => EigenStructure::ScalarLike,
        WeightSpec::ScalarTimesIdentity { .. } => EigenStructure::ScalarLike,
        WeightSpec::Diagonal { .. } | WeightSpec::Conjugated { .. } => EigenStructure::SharedBasis,
        WeightSpec::Translated { inner, .. }
        | WeightSpec::Scaled { inner, .. }
        | WeightSpec::ExponentScaled { inner, .. } => spec_structure(inner),
        WeightSpec::Sampled { .. } => EigenStructure::Varying,
    }
}

fn is_scalar_shaped(spec: &WeightSpec) -> bool {
    matches!(
        spec,
        WeightSpec::Power { .. } | WeightSpec::LogOut { .. } | WeightSpec::LogIn { .. }
    ) || match spec {
        WeightSpec::Translated { inner, .. }
        | WeightSpec::Scaled { inner, .. }
        | WeightSpec::ExponentScaled { inner, .. } => is_scalar_shaped(inner),
        _ => false,
    }
}

fn validate_spec(spec: &WeightSpec, n: usize) -> Result<()> {
    match spec {
        WeightSpec::Power { a } | WeightSpec::LogOut { a, b: _ } | WeightSpec::LogIn { a, b: _ } => {
            if !a.is_finite() {
                return Err(Error::Config(format!("non-finite exponent {a}")));
            }
            Ok(())
        }
        WeightSpec::ScalarTimesIdentity { m, scalar } => {
            if *m == 0 {
                return Err(Error::Config("m must be >= 1".into()));
            }
            if !is_scalar_shaped(scalar) {
                return Err(Error::Config(
                    "scalar_times_identity needs a scalar inner weight".into(),
                ));
            }
            validate_spec(scalar, n)
        }
        WeightSpec::Diagonal { entries } => {
            if entries.is_empty() {
                return Err(Error::Config("diagonal weight with no entries".into()));
            }
            for e in entries {
                if !is_scalar_shaped(e) {
                    return Err(Error::Config("diagonal entries must be scalar weights".into()));
                }
                validate_spec(e, n)?;
            }
            Ok(())
        }
        WeightSpec::Conjugated { u, inner } => {
            let m = spec_dim(inner);
            let um = parse_complex_matrix(u)?;
            if um.nrows() != m {
                return Err(Error::Config(format!(
                    "conjugating matrix is {}x{} but weight has m = {m}",
                    um.nrows(),
                    um.ncols()
                )));
            }
            let defect = (um.adjoint() * &um - CMatrix::identity(m, m)).norm();
            if defect > 1e-10 {
                return Err(Error::Config(format!(
                    "conjugating matrix is not unitary (defect {defect:.2e})"
                )));
            }
            if !matches!(
                spec_structure(inner),
                EigenStructure::ScalarLike | EigenStructure::SharedBasis
            ) {
                return Err(Error::Config(
                    "conjugation requires a diagonal-like inner weight".into(),
                ));
            }
            validate_spec(inner, n)
        }
        WeightSpec::Translated { shift, inner } => {
            if shift.len() != n {
                return Err(Error::Config(format!(
                    "shift {shift:?} has wrong dimension (n = {n})"
                )));
            }
            validate_spec(inner, n)
        }
        WeightSpec::Scaled { coeff, inner } => {
            if !(*coeff > 0.0 && coeff.is_finite()) {
                return Err(Error::Config(format!("scale factor {coeff} must be > 0")));
            }
            validate_spec(inner, n)
        }
        WeightSpec::ExponentScaled { factor, inner } => {
            if !factor.is_finite() {
                return Err(Error::Config("non-finite exponent factor".into()));
            }
            validate_spec(inner, n)
        }
        WeightSpec::Sharpness { d1, d2, m } => {
            if *m == 0 {
                return Err(Error::Config("m must be >= 1".into()));
            }
            if !(*d1 >= 0.0 && *d2 >= 0.0 && d1.is_finite() && d2.is_finite()) {
                return Err(Error::Config(format!(
                    "sharpness exponents d1 = {d1}, d2 = {d2} must be >= 0"
                )));
            }
            if *d1 >= n as f64 {
                return Err(Error::Config(format!(
                    "sharpness d1 = {d1} must be < n = {n} for local integrability"
                )));
            }
            Ok(())
        }
        WeightSpec::Sampled {
            lo,
            hi,
            cells_per_axis,
            values,
        } => {
            if lo.len() != n || hi.len() != n {
                return Err(Error::Config("sampled grid box has wrong dimension".into()));
            }
            if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                return Err(Error::Config("sampled grid box is empty".into()));
            }
            let cells = cells_per_axis.pow(n as u32);
            if *cells_per_axis == 0 || values.len() != cells {
                return Err(Error::Config(format!(
                    "expected {cells} sampled matrices, got {}",
                    values.len()
                )));
            }
            let m = spec_dim(spec);
            for v in values {
                let mat = parse_complex_matrix(v)?;
                if mat.nrows() != m {
                    return Err(Error::Config("inconsistent sampled matrix sizes".into()));
                }
                let h = HermitianMatrix::try_new_with_limit(mat, DEFAULT_MAX_DIM)?;
                crate::linalg::SpdMatrix::try_from_hermitian(&h)?;
            }
            Ok(())
        }
    }
}

pub(crate) fn parse_complex_matrix(data: &ComplexMatrixData) -> Result<CMatrix> {
    let m = data.len();
    if m == 0 || data.iter().any(|row| row.len() != m) {
        return Err(Error::Config("matrix data is not square".into()));
    }
    Ok(CMatrix::from_fn(m, m, |i, j| {
        C64::new(data[i][j][0], data[i][j][1])
    }))
}

fn collect_singular(spec: &WeightSpec, shift: &[f64], out: &mut Vec<Vec<f64>>) {
    let push_origin = |out: &mut Vec<Vec<f64>>| out.push(shift.to_vec());
    match spec {
        WeightSpec::Power { a } => {
            if *a != 0.0 {
                push_origin(out);
            }
        }
        WeightSpec::LogOut { a, .. } => {
            if *a != 0.0 {
                push_origin(out);
            }
        }
        WeightSpec::LogIn { a, b } => {
            if *a != 0.0 || *b != 0.0 {
                push_origin(out);
            }
        }
        WeightSpec::ScalarTimesIdentity { scalar, .. } => collect_singular(scalar, shift, out),
        WeightSpec::Diagonal { entries } => {
            for e in entries {
                collect_singular(e, shift, out);
            }
        }
        WeightSpec::Conjugated { inner, .. } => collect_singular(inner, shift, out),
        WeightSpec::Translated { shift: s, inner } => {
            let moved: Vec<f64> = shift.iter().zip(s).map(|(a, b)| a + b).collect();
            collect_singular(inner, &moved, out);
        }
        WeightSpec::Scaled { inner, .. } => collect_singular(inner, shift, out),
        WeightSpec::ExponentScaled { factor, inner } => {
            if *factor != 0.0 {
                collect_singular(inner, shift, out);
            }
        }
        WeightSpec::Sharpness { .. } => {
            push_origin(out);
            let mut x0 = shift.to_vec();
            x0[0] += 1.0;
            out.push(x0);
        }
        WeightSpec::Sampled { .. } => {}
    }
}

fn radius(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `ln(r^a)` handling `r = 0` by sign conventions on the extended line.
fn log_power(r: f64, a: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if r == 0.0 {
        if a > 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        a * r.ln()
    }
}

fn log_scalar(spec: &WeightSpec, x: &[f64]) -> Result<f64> {
    match spec {
        WeightSpec::Power { a } => Ok(log_power(radius(x), *a)),
        WeightSpec::LogOut { a, b } => {
            let r = radius(x);
            Ok(log_power(r, *a) + b * (2.0 + r).ln().ln())
        }
        WeightSpec::LogIn { a, b } => {
            let r = radius(x);
            if r == 0.0 {
                // The power factor dominates the log factor.
                let s = if *a != 0.0 { -*a } else { *b };
                return Ok(if s > 0.0 {
                    f64::INFINITY
                } else if s < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    0.0
                });
            }
            Ok(log_power(r, *a) + b * (2.0 + 1.0 / r).ln().ln())
        }
        WeightSpec::Sharpness { d1, d2, .. } => {
            let l1 = log_scalar(
                &WeightSpec::LogIn { a: -d1, b: 1.0 },
                x,
            )?;
            let mut y = x.to_vec();
            y[0] -= 1.0;
            let l2 = log_scalar(&WeightSpec::LogIn { a: -d2, b: 1.0 }, &y)?;
            Ok(l1 - l2)
        }
        WeightSpec::Translated { shift, inner } => {
            let y: Vec<f64> = x.iter().zip(shift).map(|(a, b)| a - b).collect();
            log_scalar(inner, &y)
        }
        WeightSpec::Scaled { coeff, inner } => Ok(coeff.ln() + log_scalar(inner, x)?),
        WeightSpec::ExponentScaled { factor, inner } => Ok(factor * log_scalar(inner, x)?),
        _ => Err(Error::InvalidParameter(
            "log_scalar on a non-scalar weight".into(),
        )),
    }
}

fn eval_logs(spec: &WeightSpec, x: &[f64]) -> Result<(Vec<f64>, Option<CMatrix>)> {
    match spec {
        WeightSpec::Power { .. } | WeightSpec::LogOut { .. } | WeightSpec::LogIn { .. } => {
            Ok((vec![log_scalar(spec, x)?], None))
        }
        WeightSpec::Sharpness { m, .. } => {
            let l = log_scalar(spec, x)?;
            Ok((vec![l; *m], None))
        }
        WeightSpec::ScalarTimesIdentity { m, scalar } => {
            let l = log_scalar(scalar, x)?;
            Ok((vec![l; *m], None))
        }
        WeightSpec::Diagonal { entries } => {
            let logs = entries
                .iter()
                .map(|e| log_scalar(e, x))
                .collect::<Result<Vec<f64>>>()?;
            Ok((logs, None))
        }
        WeightSpec::Conjugated { u, inner } => {
            let (logs, basis) = eval_logs(inner, x)?;
            let um = parse_complex_matrix(u)?;
            let combined = match basis {
                None => um,
                Some(b) => um * b,
            };
            Ok((logs, Some(combined)))
        }
        WeightSpec::Translated { shift, inner } => {
            let y: Vec<f64> = x.iter().zip(shift).map(|(a, b)| a - b).collect();
            eval_logs(inner, &y)
        }
        WeightSpec::Scaled { coeff, inner } => {
            let (logs, basis) = eval_logs(inner, x)?;
            let lc = coeff.ln();
            Ok((logs.into_iter().map(|l| l + lc).collect(), basis))
        }
        WeightSpec::ExponentScaled { factor, inner } => {
            let (logs, basis) = eval_logs(inner, x)?;
            Ok((logs.into_iter().map(|l| factor * l).collect(), basis))
        }
        WeightSpec::Sampled {
            lo,
            hi,
            cells_per_axis,
            values,
        } => {
            let n = lo.len();
            let k = *cells_per_axis;
            let mut idx = 0usize;
            for i in 0..n {
                let t = ((x[i] - lo[i]) / (hi[i] - lo[i]) * k as f64).floor();
                let cell = (t as i64).clamp(0, k as i64 - 1) as usize;
                idx = idx * k + cell;
            }
            let mat = parse_complex_matrix(&values[idx])?;
            let h = HermitianMatrix::try_new_with_limit(mat, DEFAULT_MAX_DIM)?;
            let (vals, vecs) = h.eigendecompose();
            let logs = vals.iter().map(|v| v.max(1e-300).ln()).collect();
            Ok((logs, Some(vecs)))
        }
    }
}

fn analytic_avg_spec(spec: &WeightSpec, q: &Cube, n: usize) -> Option<AnalyticAverage> {
    match spec {
        WeightSpec::Power { a } => {
            if n != 1 {
                return None;
            }
            let lo = q.lower_corner()[0];
            let hi = q.upper_corner()[0];
            if *a <= -1.0 && lo <= 0.0 && hi >= 0.0 {
                return None;
            }
            // Antiderivative of |x|^a is sign(x) |x|^{a+1} / (a+1).
            let prim = |x: f64| x.signum() * x.abs().powf(a + 1.0) / (a + 1.0);
            if (a + 1.0).abs() < 1e-12 {
                return None;
            }
            Some(AnalyticAverage {
                value: (prim(hi) - prim(lo)) / (hi - lo),
                exact: true,
            })
        }
        WeightSpec::LogOut { a, b } => {
            if n != 1 {
                return None;
            }
            let scale = q.center[0].abs() + q.edge;
            Some(AnalyticAverage {
                value: scale.powf(*a) * (2.0 + scale).ln().powf(*b),
                exact: false,
            })
        }
        WeightSpec::LogIn { a, b } => {
            if n != 1 {
                return None;
            }
            let scale = q.center[0].abs() + q.edge;
            Some(AnalyticAverage {
                value: scale.powf(*a) * (2.0 + 1.0 / scale).ln().powf(*b),
                exact: false,
            })
        }
        WeightSpec::ScalarTimesIdentity { scalar, .. } => analytic_avg_spec(scalar, q, n),
        WeightSpec::Scaled { coeff, inner } => {
            let base = analytic_avg_spec(inner, q, n)?;
            Some(AnalyticAverage {
                value: coeff * base.value,
                exact: base.exact,
            })
        }
        WeightSpec::Translated { shift, inner } => {
            let center: Vec<f64> = q.center.iter().zip(shift).map(|(c, s)| c - s).collect();
            let moved = Cube::new(center, q.edge).ok()?;
            analytic_avg_spec(inner, &moved, n)
        }
        WeightSpec::ExponentScaled { factor, inner } => {
            if let WeightSpec::Power { a } = **inner {
                analytic_avg_spec(&WeightSpec::Power { a: a * factor }, q, n)
            } else {
                None
            }
        }
        _ => None,
    }
}

fn truth_of(spec: &WeightSpec, n: f64) -> Option<MembershipTruth> {
    match spec {
        WeightSpec::Power { a } => Some(power_truth(*a, n)),
        WeightSpec::LogOut { a, b } => {
            if *b == 0.0 {
                return Some(power_truth(*a, n));
            }
            Some(MembershipTruth {
                a_infty: *a > -n,
                a_one: None,
                d_lower: Some(DimensionTruth {
                    value: (-a).max(0.0),
                    attained: *a > 0.0 || *b >= 0.0,
                }),
                d_upper: Some(DimensionTruth {
                    value: a.max(0.0),
                    attained: *a < 0.0 || *b <= 0.0,
                }),
                ap_rule: ApRule::Unknown,
            })
        }
        WeightSpec::LogIn { a, b } => {
            if *b == 0.0 {
                return Some(power_truth(*a, n));
            }
            Some(MembershipTruth {
                a_infty: *a > -n,
                a_one: None,
                d_lower: Some(DimensionTruth {
                    value: (-a).max(0.0),
                    attained: *a > 0.0 || *b <= 0.0,
                }),
                d_upper: Some(DimensionTruth {
                    value: a.max(0.0),
                    attained: *a < 0.0 || *b >= 0.0,
                }),
                ap_rule: ApRule::Unknown,
            })
        }
        WeightSpec::ScalarTimesIdentity { scalar, .. } => truth_of(scalar, n),
        WeightSpec::Translated { inner, .. } => truth_of(inner, n),
        WeightSpec::Scaled { inner, .. } => truth_of(inner, n),
        WeightSpec::ExponentScaled { factor, inner } => {
            if let WeightSpec::Power { a } = **inner {
                Some(power_truth(a * factor, n))
            } else {
                None
            }
        }
        WeightSpec::Conjugated { inner, .. } => truth_of(inner, n),
        WeightSpec::Diagonal { entries } => {
            // Identical entries reduce to the scalar case; mixed diagonals
            // have no stated ground truth.
            let first = entries.first()?;
            if entries.iter().all(|e| e == first) {
                truth_of(first, n)
            } else {
                None
            }
        }
        WeightSpec::Sharpness { d1, d2, .. } => Some(MembershipTruth {
            a_infty: true,
            a_one: None,
            d_lower: Some(DimensionTruth {
                value: *d1,
                attained: false,
            }),
            d_upper: Some(DimensionTruth {
                value: *d2,
                attained: false,
            }),
            ap_rule: ApRule::Unknown,
        }),
        WeightSpec::Sampled { .. } => None,
    }
}

fn power_truth(a: f64, n: f64) -> MembershipTruth {
    MembershipTruth {
        a_infty: a > -n,
        a_one: Some(a > -n && a <= 0.0),
        d_lower: Some(DimensionTruth {
            value: (-a).max(0.0),
            attained: true,
        }),
        d_upper: Some(DimensionTruth {
            value: a.max(0.0),
            attained: true,
        }),
        ap_rule: ApRule::PowerLaw { a, n },
    }
}
