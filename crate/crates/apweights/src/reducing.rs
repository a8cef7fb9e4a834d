//! Reducing operators: positive matrices whose norm reproduces the
//! direction-averaged size of a weight on a cube.
//!
//! For a weight `W`, order `p` and cube `Q`, the target functional is
//!
//! ```text
//! rho(z) = ( avg_{x in Q} |W^{1/p}(x) z|^p )^{1/p}
//! ```
//!
//! and the reducing operator `A_Q` is a positive matrix with
//! `|A_Q z| ~ rho(z)` for every direction `z`, with two-sided constants
//! depending only on the matrix dimension. Three construction paths:
//!
//! * scalar-times-identity weights: `A_Q = avg(w)^{1/p} I`, exact;
//! * order two: `A_Q = (avg W)^{1/2}`, exact because `rho^2` is the
//!   quadratic form of the averaged matrix;
//! * general order: sample directions, normalize them onto the unit
//!   sphere of `rho`, and take the minimum-volume origin-centered
//!   ellipsoid of the sample. The ellipsoid radius along each held-out
//!   direction certifies the two-sided constants that are reported.
//!
//! The ellipsoid solver runs multiplicative coordinate ascent on the dual
//! weights until the worst KKT violation is small, then switches to an
//! active-set Newton iteration for the final digits.

use nalgebra::DVector;
use rand::Rng;

use crate::geometry::Cube;
use crate::linalg::{C64, CMatrix, HermitianMatrix, SpdMatrix};
use crate::quadrature::{cube_average, cube_average_vec, QuadratureConfig};
use crate::rng::{stream, Purpose};
use crate::weights::{EigenStructure, Weight};
use crate::{Error, Result};

/// How a reducing operator was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionMethod {
    /// Scalar weight times identity, averaged exactly.
    ScalarAverage,
    /// Order two, square root of the averaged matrix.
    ExactOrderTwo,
    /// Minimum-volume ellipsoid over sampled directions.
    Ellipsoid,
}

/// A positive matrix `A_Q` equivalent to the direction functional `rho`
/// on its cube, together with the certified equivalence ratios.
#[derive(Clone, Debug)]
pub struct ReducingOperator {
    pub cube: Cube,
    pub p: f64,
    pub matrix: SpdMatrix,
    pub method: ReductionMethod,
    /// Certified bounds for `rho(z) / |A_Q z|` over fitted and held-out
    /// directions: `c_low <= rho(z)/|A_Q z| <= c_high`.
    pub c_low: f64,
    pub c_high: f64,
    pub nodes_used: usize,
}

impl ReducingOperator {
    pub fn inverse(&self) -> Result<SpdMatrix> {
        self.matrix.inverse()
    }

    /// `rho` recomputed from scratch along one direction, for spot checks.
    pub fn rho(
        &self,
        weight: &Weight,
        z: &DVector<C64>,
        cfg: &QuadratureConfig,
    ) -> Result<f64> {
        let p = self.p;
        let avg = cube_average(
            |x| weight.vector_image_pow(x, z, p),
            &self.cube,
            &with_weight_singularities(cfg, weight),
        )?;
        Ok(avg.value.powf(1.0 / p))
    }
}

/// Number of fitted (and of held-out) directions for dimension `m`.
pub fn direction_count(m: usize) -> usize {
    (2 * m * m).max(64)
}

/// Merge the weight's singular points into a quadrature configuration.
pub fn with_weight_singularities(cfg: &QuadratureConfig, weight: &Weight) -> QuadratureConfig {
    let mut out = cfg.clone();
    for s in weight.singular_points() {
        if !out.singular_points.iter().any(|t| t == &s) {
            out.singular_points.push(s);
        }
    }
    out
}

/// Build the reducing operator of order `p` for `weight` on `q`.
pub fn reduce(
    weight: &Weight,
    q: &Cube,
    p: f64,
    cfg: &QuadratureConfig,
    seed: u64,
) -> Result<ReducingOperator> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("order p = {p}")));
    }
    let quad = with_weight_singularities(cfg, weight);
    let m = weight.matrix_dim();

    if weight.eigen_structure() == EigenStructure::ScalarLike {
        let avg = cube_average(
            |x| {
                let (logs, _) = weight.log_eigenvalues(x)?;
                let v = logs[0].exp();
                if !v.is_finite() {
                    return Err(Error::SingularEvaluation(x.to_vec()));
                }
                Ok(v)
            },
            q,
            &quad,
        )?;
        if !(avg.value > 0.0) {
            return Err(Error::NotPositiveDefinite {
                min_eig: avg.value,
            });
        }
        let a = SpdMatrix::from_positive_diagonal(&vec![avg.value.powf(1.0 / p); m])?;
        return Ok(ReducingOperator {
            cube: q.clone(),
            p,
            matrix: a,
            method: ReductionMethod::ScalarAverage,
            c_low: 1.0,
            c_high: 1.0,
            nodes_used: avg.nodes_used,
        });
    }

    if (p - 2.0).abs() < 1e-12 {
        return reduce_exact_order_two(weight, q, &quad);
    }
    reduce_by_ellipsoid(weight, q, p, &quad, seed)
}

/// `A_Q = (avg W)^{1/2}`; here `rho(z)^2 = z^* (avg W) z` exactly, so the
/// certification ratios are 1 by construction.
fn reduce_exact_order_two(
    weight: &Weight,
    q: &Cube,
    quad: &QuadratureConfig,
) -> Result<ReducingOperator> {
    let m = weight.matrix_dim();
    // Pack the Hermitian matrix as m real diagonal entries followed by
    // re/im pairs of the strict upper triangle.
    let ncomp = m * m;
    let res = cube_average_vec(
        |x, out| {
            let wmat = weight.evaluate(x, 1.0)?;
            let a = wmat.matrix();
            let mut k = 0;
            for i in 0..m {
                out[k] = a[(i, i)].re;
                k += 1;
            }
            for i in 0..m {
                for j in (i + 1)..m {
                    out[k] = a[(i, j)].re;
                    out[k + 1] = a[(i, j)].im;
                    k += 2;
                }
            }
            Ok(())
        },
        ncomp,
        q,
        quad,
    )?;
    let mut avg = CMatrix::zeros(m, m);
    let mut k = 0;
    for i in 0..m {
        avg[(i, i)] = C64::new(res.values[k], 0.0);
        k += 1;
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let v = C64::new(res.values[k], res.values[k + 1]);
            avg[(i, j)] = v;
            avg[(j, i)] = v.conj();
            k += 2;
        }
    }
    let herm = HermitianMatrix::try_new_with_limit(avg, m)?;
    let spd = SpdMatrix::try_from_hermitian(&herm)?;
    Ok(ReducingOperator {
        cube: q.clone(),
        p: 2.0,
        matrix: spd.power(0.5)?,
        method: ReductionMethod::ExactOrderTwo,
        c_low: 1.0,
        c_high: 1.0,
        nodes_used: res.nodes_used,
    })
}

/// Build the reducing operator through the ellipsoid path regardless of
/// order or eigenstructure, skipping the closed-form shortcuts. The
/// general path can then be cross-checked against the exact order-two
/// operator on the same cube.
pub fn reduce_forced_ellipsoid(
    weight: &Weight,
    q: &Cube,
    p: f64,
    cfg: &QuadratureConfig,
    seed: u64,
) -> Result<ReducingOperator> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("order p = {p}")));
    }
    let quad = with_weight_singularities(cfg, weight);
    reduce_by_ellipsoid(weight, q, p, &quad, seed)
}

fn reduce_by_ellipsoid(
    weight: &Weight,
    q: &Cube,
    p: f64,
    quad: &QuadratureConfig,
    seed: u64,
) -> Result<ReducingOperator> {
    let m = weight.matrix_dim();
    let count = direction_count(m);
    let mut fitted = coordinate_orbit(m);
    let mut rng = stream(seed, Purpose::Directions, 0);
    while fitted.len() < count {
        fitted.push(random_unit(&mut rng, m));
    }
    let mut held = Vec::with_capacity(count);
    let mut rng_h = stream(seed, Purpose::HeldOut, 0);
    while held.len() < count {
        held.push(random_unit(&mut rng_h, m));
    }

    let mut all = fitted.clone();
    all.extend(held.iter().cloned());
    let (rho, nodes_used) = rho_batch(weight, q, p, &all, quad)?;

    let points: Vec<DVector<C64>> = fitted
        .iter()
        .zip(&rho)
        .map(|(z, r)| z / C64::new(*r, 0.0))
        .collect();
    let (mass, gap) = min_volume_ellipsoid(&points, m, 1e-12)?;

    // Ellipsoid { z : z^* M^{-1} z <= m (1 + gap) } covers every fitted
    // point; its Gram square root plays the role of A_Q before scaling.
    let inflated = mass.inverse()?.power(1.0)?;
    let shape = scale_spd(&inflated, 1.0 / (m as f64 * (1.0 + gap.max(0.0))))?;
    let a0 = shape.power(0.5)?;

    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (z, r) in all.iter().zip(&rho) {
        let image = a0.apply(z).norm();
        if !(image > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eig: 0.0 });
        }
        let ratio = r / image;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    // Center the certified band at 1 on the geometric mean.
    let s = (lo * hi).sqrt();
    let a = scale_spd(&a0, s)?;
    Ok(ReducingOperator {
        cube: q.clone(),
        p,
        matrix: a,
        method: ReductionMethod::Ellipsoid,
        c_low: lo / s,
        c_high: hi / s,
        nodes_used,
    })
}

fn scale_spd(a: &SpdMatrix, s: f64) -> Result<SpdMatrix> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("ellipsoid scale {s}")));
    }
    let m = a.matrix() * C64::new(s, 0.0);
    SpdMatrix::try_from_hermitian(&HermitianMatrix::try_new_with_limit(m, a.dim())?)
}

/// Coordinate axes plus all two-axis combinations with fourth-root-of-unity
/// phases. If the sampled functional is the Euclidean norm, any ellipsoid
/// covering this orbit inside the unit ball must be the unit ball, so the
/// solver reproduces the identity exactly.
fn coordinate_orbit(m: usize) -> Vec<DVector<C64>> {
    let mut dirs = Vec::new();
    for i in 0..m {
        let mut z = DVector::from_element(m, C64::new(0.0, 0.0));
        z[i] = C64::new(1.0, 0.0);
        dirs.push(z);
    }
    let inv = 1.0 / 2.0f64.sqrt();
    let phases = [
        C64::new(1.0, 0.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, 1.0),
        C64::new(0.0, -1.0),
    ];
    for i in 0..m {
        for j in (i + 1)..m {
            for ph in phases {
                let mut z = DVector::from_element(m, C64::new(0.0, 0.0));
                z[i] = C64::new(inv, 0.0);
                z[j] = ph * inv;
                dirs.push(z);
            }
        }
    }
    dirs
}

pub(crate) fn random_unit<R: Rng>(rng: &mut R, m: usize) -> DVector<C64> {
    loop {
        let mut z = DVector::from_element(m, C64::new(0.0, 0.0));
        for i in 0..m {
            // Box-Muller pairs give an isotropic complex Gaussian.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = (-2.0 * u1.ln()).sqrt();
            z[i] = C64::new(r * u2.cos(), r * u2.sin());
        }
        let norm = z.norm();
        if norm > 1e-6 {
            return z / C64::new(norm, 0.0);
        }
    }
}

/// `rho(z_k)` for a batch of directions, sharing one spectral
/// decomposition of the weight per quadrature node.
fn rho_batch(
    weight: &Weight,
    q: &Cube,
    p: f64,
    dirs: &[DVector<C64>],
    quad: &QuadratureConfig,
) -> Result<(Vec<f64>, usize)> {
    let res = cube_average_vec(
        |x, out| {
            let (logs, basis) = weight.log_eigenvalues(x)?;
            for (k, z) in dirs.iter().enumerate() {
                out[k] = Weight::image_pow_from_logs(&logs, &basis, z, p, x)?;
            }
            Ok(())
        },
        dirs.len(),
        q,
        quad,
    )?;
    let mut rho = Vec::with_capacity(dirs.len());
    for v in &res.values {
        if !(*v > 0.0 && v.is_finite()) {
            return Err(Error::NotPositiveDefinite { min_eig: *v });
        }
        rho.push(v.powf(1.0 / p));
    }
    Ok((rho, res.nodes_used))
}

/// Minimum-volume origin-centered ellipsoid of a point cloud in `C^m`.
///
/// Returns the dual Gram matrix `M = sum_i u_i z_i z_i^*` at the optimum
/// and the achieved KKT gap `max_i (z_i^* M^{-1} z_i) / m - 1`. The
/// covering ellipsoid is `{ z : z^* M^{-1} z <= m (1 + gap) }`.
///
/// Coordinate ascent on the dual weights with both add and away steps,
/// each with its exact line search. Away steps remove mass from the
/// support point with the smallest leverage, which keeps convergence
/// linear even when the touching set is degenerate.
pub fn min_volume_ellipsoid(
    points: &[DVector<C64>],
    m: usize,
    target_gap: f64,
) -> Result<(SpdMatrix, f64)> {
    let n = points.len();
    if n < m {
        return Err(Error::InvalidParameter(
            "fewer directions than matrix dimension".into(),
        ));
    }
    let md = m as f64;
    let mut state = EllipsoidState::new(points, m);

    let mut gap = f64::INFINITY;
    let mut away_slack = f64::INFINITY;
    for _stage in 0..10 {
        for iter in 0..40_000usize {
            if iter % 1024 == 1023 {
                state.refresh_mass();
            }
            let (jmax, gmax, jmin, gmin) = state.extreme_leverages(target_gap)?;
            gap = gmax / md - 1.0;
            away_slack = (md - gmin) / md;
            if gap <= target_gap && away_slack <= target_gap * 10.0 {
                return finish_ellipsoid(state.mass, gap.max(0.0));
            }
            if gmax - md >= md - gmin || jmin == usize::MAX {
                let beta = ((gmax - md) / (md * (gmax - 1.0))).clamp(1e-17, 0.9);
                state.add_step(jmax, beta);
            } else {
                state.away_step(jmin, gmin, md);
            }
        }
        // Equalize the leverages of the surviving support directly; the
        // ascent resumes if the polish leaves residual violations.
        state.newton_polish(md)?;
        let (_, gmax, _, gmin) = state.extreme_leverages(target_gap)?;
        gap = gmax / md - 1.0;
        away_slack = (md - gmin) / md;
        if gap <= target_gap && away_slack <= target_gap * 10.0 {
            return finish_ellipsoid(state.mass, gap.max(0.0));
        }
    }

    if gap <= 1e-7 && away_slack <= 1e-5 {
        state.refresh_mass();
        return finish_ellipsoid(state.mass, gap.max(0.0));
    }
    Err(Error::EllipsoidNoConvergence {
        achieved: gap,
        requested: target_gap,
    })
}

struct EllipsoidState<'a> {
    points: &'a [DVector<C64>],
    m: usize,
    u: Vec<f64>,
    mass: CMatrix,
    inv: CMatrix,
    inv_fresh: bool,
}

impl<'a> EllipsoidState<'a> {
    fn new(points: &'a [DVector<C64>], m: usize) -> Self {
        let n = points.len();
        let mut s = Self {
            points,
            m,
            u: vec![1.0 / n as f64; n],
            mass: CMatrix::zeros(m, m),
            inv: CMatrix::zeros(m, m),
            inv_fresh: false,
        };
        s.refresh_mass();
        s
    }

    fn refresh_mass(&mut self) {
        let mut acc = CMatrix::zeros(self.m, self.m);
        for (w, z) in self.u.iter().zip(self.points) {
            if *w > 0.0 {
                for a in 0..self.m {
                    for b in 0..self.m {
                        acc[(a, b)] += z[a] * z[b].conj() * C64::new(*w, 0.0);
                    }
                }
            }
        }
        self.mass = acc;
        self.inv_fresh = false;
    }

    fn ensure_inverse(&mut self, target_gap: f64) -> Result<()> {
        if !self.inv_fresh {
            self.inv = self.mass.clone().try_inverse().ok_or(
                Error::EllipsoidNoConvergence {
                    achieved: f64::INFINITY,
                    requested: target_gap,
                },
            )?;
            self.inv_fresh = true;
        }
        Ok(())
    }

    fn leverage(&self, i: usize) -> f64 {
        let z = &self.points[i];
        let mut acc = 0.0;
        for a in 0..self.m {
            // Diagonal contribution plus twice the real part above it.
            acc += self.inv[(a, a)].re * z[a].norm_sqr();
            for b in (a + 1)..self.m {
                acc += 2.0 * (z[a].conj() * self.inv[(a, b)] * z[b]).re;
            }
        }
        acc
    }

    fn extreme_leverages(&mut self, target_gap: f64) -> Result<(usize, f64, usize, f64)> {
        self.ensure_inverse(target_gap)?;
        let mut jmax = 0usize;
        let mut gmax = f64::NEG_INFINITY;
        let mut jmin = usize::MAX;
        let mut gmin = f64::INFINITY;
        for i in 0..self.points.len() {
            let g = self.leverage(i);
            if g > gmax {
                gmax = g;
                jmax = i;
            }
            if self.u[i] > 0.0 && g < gmin {
                gmin = g;
                jmin = i;
            }
        }
        Ok((jmax, gmax, jmin, gmin))
    }

    fn rank_one(&mut self, j: usize, scale: f64, coeff: f64) {
        for w in self.u.iter_mut() {
            *w *= scale;
        }
        self.u[j] += coeff;
        if self.u[j] < 1e-17 {
            self.u[j] = 0.0;
        }
        let z = &self.points[j];
        for a in 0..self.m {
            for b in 0..self.m {
                let zz = z[a] * z[b].conj();
                self.mass[(a, b)] = self.mass[(a, b)] * C64::new(scale, 0.0)
                    + zz * C64::new(coeff, 0.0);
            }
        }
        self.inv_fresh = false;
    }

    fn add_step(&mut self, j: usize, beta: f64) {
        self.rank_one(j, 1.0 - beta, beta);
    }

    fn away_step(&mut self, j: usize, gmin: f64, md: f64) {
        let uj = self.u[j];
        let cap = if uj < 1.0 { uj / (1.0 - uj) } else { 1.0 };
        let beta = if gmin > 1.0 {
            ((md - gmin) / (md * (gmin - 1.0))).min(cap)
        } else {
            cap
        };
        self.rank_one(j, 1.0 + beta.max(0.0), -beta.max(0.0));
    }

    /// Newton iteration driving all support leverages to the KKT value at
    /// once. Leaves the state unchanged on numerical failure.
    fn newton_polish(&mut self, md: f64) -> Result<()> {
        for _round in 0..40 {
            self.refresh_mass();
            self.ensure_inverse(1e-12)?;
            let umax = self.u.iter().cloned().fold(0.0, f64::max);
            let support: Vec<usize> = (0..self.points.len())
                .filter(|&i| self.u[i] > umax * 1e-12)
                .collect();
            let s = support.len();
            if s == 0 {
                return Ok(());
            }
            let mut k = nalgebra::DMatrix::<f64>::zeros(s, s);
            for (a, &i) in support.iter().enumerate() {
                for (b, &j) in support.iter().enumerate() {
                    let mut v = C64::new(0.0, 0.0);
                    let zi = &self.points[i];
                    let zj = &self.points[j];
                    for x in 0..self.m {
                        for y in 0..self.m {
                            v += zi[x].conj() * self.inv[(x, y)] * zj[y];
                        }
                    }
                    k[(a, b)] = v.norm_sqr();
                }
            }
            let ridge = 1e-12 * k.trace().max(1.0) / s as f64;
            for a in 0..s {
                k[(a, a)] += ridge;
            }
            let rhs = nalgebra::DVector::<f64>::from_iterator(
                s,
                support.iter().map(|&i| self.leverage(i) - md),
            );
            let resid = rhs.amax();
            if resid < md * 1e-13 {
                return Ok(());
            }
            let delta = match k.clone().lu().solve(&rhs) {
                Some(d) => d,
                None => return Ok(()),
            };
            // Keep the step inside the nonnegative orthant.
            let mut alpha = 1.0f64;
            for (a, &i) in support.iter().enumerate() {
                if delta[a] < 0.0 {
                    alpha = alpha.min(-self.u[i] / delta[a]);
                }
            }
            if !(alpha > 0.0) || !alpha.is_finite() {
                return Ok(());
            }
            let alpha = alpha.min(1.0);
            for (a, &i) in support.iter().enumerate() {
                self.u[i] = (self.u[i] + alpha * delta[a]).max(0.0);
            }
            self.inv_fresh = false;
        }
        self.refresh_mass();
        Ok(())
    }
}

fn finish_ellipsoid(mass: CMatrix, gap: f64) -> Result<(SpdMatrix, f64)> {
    let m = mass.nrows();
    let herm = HermitianMatrix::try_new_with_limit(mass, m)?;
    Ok((SpdMatrix::try_from_hermitian(&herm)?, gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::operator_norm;
    use crate::weights::WeightSpec;

    fn unit_interval() -> Cube {
        Cube::from_corner(&[0.0], 1.0).unwrap()
    }

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn direction(parts: &[(f64, f64)]) -> DVector<C64> {
        DVector::from_iterator(parts.len(), parts.iter().map(|(r, i)| C64::new(*r, *i)))
    }

    #[test]
    fn ellipsoid_of_coordinate_cross_is_unit_ball() {
        // Points +-e_i and the two-axis orbit lie on the unit sphere; the
        // minimal ellipsoid must be the unit ball itself.
        let pts = coordinate_orbit(3);
        let (mass, gap) = min_volume_ellipsoid(&pts, 3, 1e-12).unwrap();
        assert!(gap.abs() < 1e-9, "gap {gap}");
        let shape = mass.inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 3.0 } else { 0.0 };
                let got = shape.matrix()[(i, j)];
                assert!(
                    (got.re - expect).abs() < 1e-8 && got.im.abs() < 1e-8,
                    "shape({i},{j}) = {got}"
                );
            }
        }
    }

    #[test]
    fn ellipsoid_recovers_axis_scaling() {
        // Four points on the ellipse with semi-axes (2, 1).
        let pts = vec![
            direction(&[(2.0, 0.0), (0.0, 0.0)]),
            direction(&[(-2.0, 0.0), (0.0, 0.0)]),
            direction(&[(0.0, 0.0), (1.0, 0.0)]),
            direction(&[(0.0, 0.0), (-1.0, 0.0)]),
        ];
        let (mass, gap) = min_volume_ellipsoid(&pts, 2, 1e-12).unwrap();
        assert!(gap.abs() < 1e-10);
        let shape = mass.inverse().unwrap();
        // z^* M^{-1} z = 2 on the boundary: entries 2/4 and 2/1.
        assert!((shape.matrix()[(0, 0)].re - 0.5).abs() < 1e-9);
        assert!((shape.matrix()[(1, 1)].re - 2.0).abs() < 1e-9);
    }

    #[test]
    fn interior_points_do_not_disturb_the_ellipsoid() {
        let mut pts = coordinate_orbit(2);
        let mut rng = stream(7, Purpose::Directions, 99);
        for _ in 0..30 {
            pts.push(random_unit(&mut rng, 2) * C64::new(0.6, 0.0));
        }
        let (mass, gap) = min_volume_ellipsoid(&pts, 2, 1e-12).unwrap();
        assert!(gap.abs() < 1e-9);
        let shape = mass.inverse().unwrap();
        assert!((shape.matrix()[(0, 0)].re - 2.0).abs() < 1e-8);
        assert!((shape.matrix()[(1, 1)].re - 2.0).abs() < 1e-8);
        assert!(shape.matrix()[(0, 1)].norm() < 1e-8);
    }

    #[test]
    fn identity_weight_reduces_to_identity_all_orders() {
        for (m, p) in [(2usize, 1.0f64), (2, 3.0), (3, 1.0), (2, 0.5)] {
            let w = Weight::identity(1, m).unwrap();
            let a = reduce(&w, &unit_interval(), p, &quad(), 11).unwrap();
            for i in 0..m {
                for j in 0..m {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    let got = a.matrix.matrix()[(i, j)];
                    assert!(
                        (got.re - expect).abs() < 1e-8 && got.im.abs() < 1e-8,
                        "m={m} p={p} entry ({i},{j}) = {got}"
                    );
                }
            }
            assert!(a.c_low > 1.0 - 1e-8 && a.c_high < 1.0 + 1e-8);
        }
    }

    #[test]
    fn order_two_matches_square_root_of_average() {
        // Diagonal weight (|x|, 1) on [0,1]: averaged matrix diag(1/2, 1).
        let w = Weight::new(
            WeightSpec::Diagonal {
                entries: vec![
                    WeightSpec::Power { a: 1.0 },
                    WeightSpec::Power { a: 0.0 },
                ],
            },
            1,
        )
        .unwrap();
        let a = reduce(&w, &unit_interval(), 2.0, &quad(), 3).unwrap();
        assert_eq!(a.method, ReductionMethod::ExactOrderTwo);
        let m = a.matrix.matrix();
        assert!((m[(0, 0)].re - 0.5f64.sqrt()).abs() < 1e-7, "{}", m[(0, 0)]);
        assert!((m[(1, 1)].re - 1.0).abs() < 1e-7);
        assert!(m[(0, 1)].norm() < 1e-9);
    }

    #[test]
    fn scalar_weight_uses_average_shortcut() {
        // w = |x| times the identity at order 1 averages to 1/2.
        let w = Weight::power_identity(1.0, 1, 2).unwrap();
        let a = reduce(&w, &unit_interval(), 1.0, &quad(), 5).unwrap();
        assert_eq!(a.method, ReductionMethod::ScalarAverage);
        assert!((a.matrix.matrix()[(0, 0)].re - 0.5).abs() < 1e-7);
        assert!((a.matrix.matrix()[(1, 1)].re - 0.5).abs() < 1e-7);
    }

    #[test]
    fn ellipsoid_path_agrees_with_scalar_shortcut() {
        // The same scalar weight written as a diagonal matrix goes through
        // the ellipsoid path; the sphere orbit pins the answer exactly.
        let w = Weight::new(
            WeightSpec::Diagonal {
                entries: vec![
                    WeightSpec::Power { a: 1.0 },
                    WeightSpec::Power { a: 1.0 },
                ],
            },
            1,
        )
        .unwrap();
        let a = reduce(&w, &unit_interval(), 1.0, &quad(), 5).unwrap();
        assert_eq!(a.method, ReductionMethod::Ellipsoid);
        assert!((a.matrix.matrix()[(0, 0)].re - 0.5).abs() < 1e-6);
        assert!((a.matrix.matrix()[(1, 1)].re - 0.5).abs() < 1e-6);
        assert!(a.matrix.matrix()[(0, 1)].norm() < 1e-7);
    }

    #[test]
    fn scaling_the_weight_scales_the_operator() {
        let base = Weight::new(
            WeightSpec::Diagonal {
                entries: vec![
                    WeightSpec::Power { a: 1.0 },
                    WeightSpec::Power { a: 2.0 },
                ],
            },
            1,
        )
        .unwrap();
        let scaled = Weight::new(
            WeightSpec::Scaled {
                coeff: 16.0,
                inner: Box::new(base.spec.clone()),
            },
            1,
        )
        .unwrap();
        let p = 4.0;
        let a = reduce(&base, &unit_interval(), p, &quad(), 21).unwrap();
        let b = reduce(&scaled, &unit_interval(), p, &quad(), 21).unwrap();
        // W -> 16 W multiplies A_Q by 16^{1/4} = 2.
        let factor = 16.0f64.powf(1.0 / p);
        let diff = b.matrix.matrix() - a.matrix.matrix() * C64::new(factor, 0.0);
        assert!(operator_norm(&diff).unwrap() < 2e-6 * factor);
    }

    #[test]
    fn unitary_conjugation_carries_through() {
        let entries = vec![WeightSpec::Power { a: 1.0 }, WeightSpec::Power { a: -0.5 }];
        let inner = WeightSpec::Diagonal { entries };
        let t = std::f64::consts::FRAC_PI_6;
        let u = vec![
            vec![[t.cos(), 0.0], [-t.sin(), 0.0]],
            vec![[t.sin(), 0.0], [t.cos(), 0.0]],
        ];
        let plain = Weight::new(inner.clone(), 1).unwrap();
        let rotated = Weight::new(
            WeightSpec::Conjugated {
                u,
                inner: Box::new(inner),
            },
            1,
        )
        .unwrap();
        let p = 1.0;
        let a = reduce(&plain, &unit_interval(), p, &quad(), 9).unwrap();
        let b = reduce(&rotated, &unit_interval(), p, &quad(), 9).unwrap();
        let c = t.cos();
        let s = t.sin();
        let rot = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(c, 0.0),
                C64::new(-s, 0.0),
                C64::new(s, 0.0),
                C64::new(c, 0.0),
            ],
        );
        let expected = &rot * a.matrix.matrix() * rot.adjoint();
        let diff = b.matrix.matrix() - expected;
        let rel = operator_norm(&diff).unwrap() / a.matrix.operator_norm();
        // Directions are not rotated with the weight, so agreement is up
        // to the sampling resolution of the ellipsoid, not exact.
        assert!(rel < 0.05, "relative deviation {rel}");
    }

    #[test]
    fn ellipsoid_and_exact_order_two_agree() {
        let w = Weight::new(
            WeightSpec::Diagonal {
                entries: vec![
                    WeightSpec::Power { a: 1.0 },
                    WeightSpec::Power { a: 0.0 },
                ],
            },
            1,
        )
        .unwrap();
        let exact = reduce_exact_order_two(&w, &unit_interval(), &quad()).unwrap();
        let sampled =
            reduce_forced_ellipsoid(&w, &unit_interval(), 2.0, &quad(), 13).unwrap();
        let diff = exact.matrix.matrix() - sampled.matrix.matrix();
        let rel = operator_norm(&diff).unwrap() / exact.matrix.operator_norm();
        assert!(rel < 0.04, "relative gap {rel}");
        assert!(sampled.c_high / sampled.c_low < 1.1);
    }

    #[test]
    fn certified_band_brackets_one_and_respects_john_bound() {
        let w = Weight::new(
            WeightSpec::Diagonal {
                entries: vec![
                    WeightSpec::Power { a: 2.0 },
                    WeightSpec::Power { a: -0.5 },
                ],
            },
            1,
        )
        .unwrap();
        for p in [0.7, 1.0, 3.0] {
            let a = reduce(&w, &unit_interval(), p, &quad(), 33).unwrap();
            assert!(a.c_low <= 1.0 + 1e-12 && a.c_high >= 1.0 - 1e-12);
            let john = (2.0f64).sqrt();
            assert!(
                a.c_high / a.c_low <= john * 1.05,
                "band [{}, {}] too wide at p = {p}",
                a.c_low,
                a.c_high
            );
        }
    }

    #[test]
    fn divergent_weight_is_rejected() {
        let w = Weight::power_identity(-1.2, 1, 2).unwrap();
        let r = reduce(&w, &unit_interval(), 1.0, &quad(), 2);
        assert!(matches!(r, Err(Error::Divergent { .. })), "{r:?}");
    }

    #[test]
    fn rho_spot_check_matches_operator() {
        let w = Weight::new(
            WeightSpec::Diagonal {
                entries: vec![
                    WeightSpec::Power { a: 1.0 },
                    WeightSpec::Power { a: 0.5 },
                ],
            },
            1,
        )
        .unwrap();
        let p = 1.5;
        let a = reduce(&w, &unit_interval(), p, &quad(), 17).unwrap();
        let z = direction(&[(0.6, 0.0), (0.0, 0.8)]);
        let rho = a.rho(&w, &z, &quad()).unwrap();
        let image = a.matrix.apply(&z).norm();
        let ratio = rho / image;
        assert!(
            ratio >= a.c_low * 0.999 && ratio <= a.c_high * 1.001,
            "ratio {ratio} outside [{}, {}]",
            a.c_low,
            a.c_high
        );
    }
}
