//! Weight characteristics over finite cube families and the verification
//! checks built on them: per-cube condition equivalences, the functional
//! form of the characteristic, distributional and stopping-time estimates,
//! self-improvement exponents, class inclusions, reverse Holder
//! inequalities, and the pointwise multiplier bound.
//!
//! Every supremum over "all cubes" is replaced by a maximum over an
//! explicit [`ProbeFamily`], so every reported value is a certified lower
//! bound for the true characteristic and an exact statement about the
//! family itself.

use crate::geometry::{Cube, DyadicIndex, ProbeFamily};
use crate::linalg::{operator_norm, C64, CMatrix};
use crate::quadrature::{
    cube_average, cube_average_vec, nested_logavg_of_avg, superlevel_fraction, QuadratureConfig,
};
use crate::reducing::{random_unit, reduce, with_weight_singularities, ReducingOperator};
use crate::rng::{stream, Purpose};
use crate::weights::{EigenStructure, Weight};
use crate::{Error, Result};
use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which characteristic a [`CharacteristicReport`] carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharacteristicKind {
    Ap,
    ApInfty,
    ScalarAInfty,
    FujiiWilson,
    Sc,
}

/// One cube's contribution to a characteristic.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerCubeValue {
    pub cube: Cube,
    pub value: f64,
    pub error_estimate: f64,
    pub nodes_used: usize,
}

/// A characteristic evaluated over a probe family.
///
/// `value` is the maximum of the per-cube column, or infinity when any
/// cube was flagged divergent. Finite families certify from below only,
/// hence `lower_bound_flag` is always true.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CharacteristicReport {
    pub kind: CharacteristicKind,
    pub p: f64,
    #[serde(with = "crate::report::nonfinite")]
    pub value: f64,
    pub argmax_cube: Cube,
    pub per_cube: Vec<PerCubeValue>,
    pub family_description: String,
    pub lower_bound_flag: bool,
    pub divergent_cubes: Vec<Cube>,
    /// Box-vs-ball maximal function comparability, for the kinds that use
    /// a grid maximal function.
    pub comparability_factor: Option<f64>,
    pub warnings: Vec<String>,
}

impl CharacteristicReport {
    pub fn is_divergent(&self) -> bool {
        !self.divergent_cubes.is_empty()
    }
}

/// Outcome of one cube before assembly into a report.
enum CubeOutcome {
    Value(PerCubeValue),
    Divergent(Cube),
}

fn assemble_report(
    kind: CharacteristicKind,
    p: f64,
    family_description: String,
    outcomes: Vec<CubeOutcome>,
    comparability_factor: Option<f64>,
    warnings: Vec<String>,
) -> Result<CharacteristicReport> {
    let mut per_cube = Vec::new();
    let mut divergent_cubes = Vec::new();
    for o in outcomes {
        match o {
            CubeOutcome::Value(v) => per_cube.push(v),
            CubeOutcome::Divergent(c) => divergent_cubes.push(c),
        }
    }
    let (value, argmax_cube) = if let Some(c) = divergent_cubes.first() {
        (f64::INFINITY, c.clone())
    } else {
        let best = per_cube
            .iter()
            .max_by(|a, b| a.value.total_cmp(&b.value))
            .ok_or_else(|| Error::Config("empty probe family".into()))?;
        (best.value, best.cube.clone())
    };
    Ok(CharacteristicReport {
        kind,
        p,
        value,
        argmax_cube,
        per_cube,
        family_description,
        lower_bound_flag: true,
        divergent_cubes,
        comparability_factor,
        warnings,
    })
}

/// Map a per-cube computation over the family in parallel, translating
/// divergent integrals into per-cube flags and keeping other errors hard.
fn sweep_family<F>(family: &ProbeFamily, f: F) -> Result<Vec<CubeOutcome>>
where
    F: Fn(&Cube) -> Result<PerCubeValue> + Sync,
{
    family
        .cubes
        .par_iter()
        .map(|q| match f(q) {
            Ok(v) => Ok(CubeOutcome::Value(v)),
            Err(Error::Divergent { .. }) => Ok(CubeOutcome::Divergent(q.clone())),
            Err(e) => Err(e),
        })
        .collect()
}

/// Least-squares slope of `ys` against `xs`.
fn regression_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

fn gaussian_matrix<R: Rng>(rng: &mut R, m: usize) -> CMatrix {
    CMatrix::from_fn(m, m, |_, _| {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = (-2.0 * u1.ln()).sqrt();
        C64::new(r * u2.cos(), r * u2.sin())
    })
}

/// Identity, rank-one, and dense Gaussian matrix samples with labels.
fn matrix_sample_set(m: usize, count: usize, seed: u64) -> Vec<(String, CMatrix)> {
    let mut out = vec![("identity".to_string(), CMatrix::identity(m, m))];
    let mut rng = stream(seed, Purpose::MatrixSamples, 0);
    let rank_ones = count / 2;
    for k in 0..rank_ones {
        let z = random_unit(&mut rng, m);
        let mut mat = CMatrix::zeros(m, m);
        mat.set_column(0, &z);
        out.push((format!("rank_one_{k}"), mat));
    }
    for k in rank_ones..count {
        out.push((format!("gaussian_{k}"), gaussian_matrix(&mut rng, m)));
    }
    out
}

/// Coordinate vectors plus random unit directions.
fn vector_sample_set(m: usize, count: usize, seed: u64, index: u64) -> Vec<DVector<C64>> {
    let mut out: Vec<DVector<C64>> = (0..m)
        .map(|i| {
            let mut e = DVector::from_element(m, C64::new(0.0, 0.0));
            e[i] = C64::new(1.0, 0.0);
            e
        })
        .collect();
    let mut rng = stream(seed, Purpose::Directions, index);
    for _ in 0..count {
        out.push(random_unit(&mut rng, m));
    }
    out
}

// ---------------------------------------------------------------------------
// The two defining characteristics.
// ---------------------------------------------------------------------------

/// Growth factor between successive approach stages above which a value
/// sequence toward a singular point is declared divergent.
const ESSSUP_DIVERGENCE_GROWTH: f64 = 1.25;
/// Each approach stage moves this factor closer to the singular point.
const ESSSUP_LADDER_FACTOR: f64 = 8.0;
const ESSSUP_LADDER_DEPTH: usize = 13;

/// Candidate points for the essential supremum over a cube: stage 0 holds
/// the base grid midpoints and corners, later stages approach each nearby
/// singular point geometrically.
fn esssup_stages(q: &Cube, singular: &[Vec<f64>], base: usize) -> Vec<Vec<Vec<f64>>> {
    let n = q.dim();
    let lo = q.lower_corner();
    let hi = q.upper_corner();
    let cell = q.edge / base as f64;
    let mut stage0 = Vec::new();
    for flat in 0..base.pow(n as u32) {
        let mut rem = flat;
        let pt: Vec<f64> = (0..n)
            .map(|i| {
                let k = rem % base;
                rem /= base;
                lo[i] + (k as f64 + 0.5) * cell
            })
            .collect();
        stage0.push(pt);
    }
    // Corners, nudged inward so they never coincide with a singular point
    // sitting exactly on a vertex.
    let nudge = q.edge * 1e-9;
    for mask in 0..(1usize << n) {
        let pt: Vec<f64> = (0..n)
            .map(|i| {
                if mask >> i & 1 == 0 {
                    lo[i] + nudge
                } else {
                    hi[i] - nudge
                }
            })
            .collect();
        stage0.push(pt);
    }
    let is_singular =
        |y: &[f64]| singular.iter().any(|s| {
            s.iter()
                .zip(y)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * q.edge.max(1.0))
        });
    stage0.retain(|y| !is_singular(y));
    let mut stages = vec![stage0];
    stages.resize_with(1 + ESSSUP_LADDER_DEPTH, Vec::new);
    for s in singular {
        if q.distance_to(s) > 0.5 * q.edge {
            continue;
        }
        // Approach from the point of the cube nearest to the singularity
        // toward the center; when the singularity is the center itself,
        // approach along each axis instead.
        let anchor: Vec<f64> = (0..n).map(|i| s[i].clamp(lo[i], hi[i])).collect();
        let dirs: Vec<(Vec<f64>, f64)> = {
            let d: Vec<f64> = (0..n).map(|i| q.center[i] - anchor[i]).collect();
            let len = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len > 1e-12 * q.edge {
                vec![(d.iter().map(|v| v / len).collect(), len)]
            } else {
                let mut axis = Vec::new();
                for i in 0..n {
                    for sign in [1.0, -1.0] {
                        let room = if sign > 0.0 {
                            hi[i] - anchor[i]
                        } else {
                            anchor[i] - lo[i]
                        };
                        if room > 1e-12 * q.edge {
                            let mut e = vec![0.0; n];
                            e[i] = sign;
                            axis.push((e, room));
                        }
                    }
                }
                axis
            }
        };
        for (dir, reach) in dirs {
            for (k, stage) in stages.iter_mut().enumerate().skip(1) {
                let step = reach * ESSSUP_LADDER_FACTOR.powi(-(k as i32));
                let pt: Vec<f64> = (0..n).map(|i| anchor[i] + dir[i] * step).collect();
                if q.contains(&pt) && !is_singular(&pt) {
                    stage.push(pt);
                }
            }
        }
    }
    stages
}

/// Per-cube `A_p` value for `p <= 1`: the node maximum over `y` of the
/// average over `x` of `||W^{1/p}(x) W^{-1/p}(y)||^p`, with geometric
/// refinement toward singular points. The value sequence along the
/// refinement stages doubles as the divergence detector.
fn ap_le1_per_cube(
    weight: &Weight,
    p: f64,
    q: &Cube,
    cfg: &QuadratureConfig,
) -> Result<PerCubeValue> {
    let quad = with_weight_singularities(cfg, weight);
    let stages = esssup_stages(q, &quad.singular_points, quad.base_subdivisions_per_axis);
    let scalar = weight.eigen_structure() == EigenStructure::ScalarLike;
    let mut nodes = 0usize;
    let scalar_avg = if scalar {
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
        nodes += avg.nodes_used;
        Some(avg)
    } else {
        None
    };
    let mut best = f64::NEG_INFINITY;
    let mut err_at_best = 0.0;
    let mut stage_max = Vec::with_capacity(stages.len());
    for stage in &stages {
        for y in stage {
            let (v, e) = match &scalar_avg {
                Some(avg) => {
                    let (logs, _) = weight.log_eigenvalues(y)?;
                    let wy = logs[0].exp();
                    if wy <= 0.0 || !wy.is_finite() {
                        return Err(Error::SingularEvaluation(y.clone()));
                    }
                    (avg.value / wy, avg.error_estimate / wy)
                }
                None => {
                    let avg = cube_average(|x| weight.norm_ratio_pow(x, y, p), q, &quad)?;
                    nodes += avg.nodes_used;
                    (avg.value, avg.error_estimate)
                }
            };
            if v > best {
                best = v;
                err_at_best = e;
            }
        }
        if !stage.is_empty() || stage_max.is_empty() {
            stage_max.push(best);
        }
    }
    if stage_max.len() >= 2 {
        let last = stage_max[stage_max.len() - 1];
        let prev = stage_max[stage_max.len() - 2];
        if last > ESSSUP_DIVERGENCE_GROWTH * prev {
            return Err(Error::Divergent {
                near: q.center.clone(),
                ratio: last / prev,
            });
        }
    }
    Ok(PerCubeValue {
        cube: q.clone(),
        value: best,
        error_estimate: err_at_best,
        nodes_used: nodes,
    })
}

/// Per-cube `A_p` value for `p > 1`:
/// average over `x` of `[ average over y of ||W^{1/p}(x) W^{-1/p}(y)||^{p'} ]^{p/p'}`.
fn ap_gt1_per_cube(
    weight: &Weight,
    p: f64,
    q: &Cube,
    cfg: &QuadratureConfig,
) -> Result<PerCubeValue> {
    let quad = with_weight_singularities(cfg, weight);
    let pp = p / (p - 1.0);
    if weight.eigen_structure() == EigenStructure::ScalarLike {
        // Scalar case factorizes: (avg w) (avg w^{-p'/p})^{p/p'}.
        let r = cube_average_vec(
            |x, out| {
                let (logs, _) = weight.log_eigenvalues(x)?;
                let l = logs[0];
                out[0] = l.exp();
                out[1] = (-l * pp / p).exp();
                if !out[0].is_finite() || !out[1].is_finite() {
                    return Err(Error::SingularEvaluation(x.to_vec()));
                }
                Ok(())
            },
            2,
            q,
            &quad,
        )?;
        let value = r.values[0] * r.values[1].powf(p / pp);
        let rel = r.error_estimates[0] / r.values[0].abs().max(1e-300)
            + (p / pp) * r.error_estimates[1] / r.values[1].abs().max(1e-300);
        return Ok(PerCubeValue {
            cube: q.clone(),
            value,
            error_estimate: value * rel,
            nodes_used: r.nodes_used,
        });
    }
    let mut inner_cfg = quad.clone();
    inner_cfg.rel_tol = quad.rel_tol / 2.0;
    let outer_cfg = inner_cfg.clone();
    let inner_nodes = std::sync::atomic::AtomicUsize::new(0);
    let outer = cube_average(
        |x| {
            let inner = cube_average(
                |y| Ok(weight.norm_ratio_pow(x, y, p)?.powf(pp / p)),
                q,
                &inner_cfg,
            )?;
            inner_nodes.fetch_add(inner.nodes_used, std::sync::atomic::Ordering::Relaxed);
            Ok(inner.value.powf(p / pp))
        },
        q,
        &outer_cfg,
    )?;
    Ok(PerCubeValue {
        cube: q.clone(),
        value: outer.value,
        error_estimate: outer.error_estimate,
        nodes_used: outer.nodes_used + inner_nodes.into_inner(),
    })
}

/// `[W]_{A_p}` over the family; per-cube divergence marks the weight as
/// lying outside the class at probe scale.
pub fn ap_characteristic(
    weight: &Weight,
    p: f64,
    family: &ProbeFamily,
    cfg: &QuadratureConfig,
) -> Result<CharacteristicReport> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("order p = {p}")));
    }
    let outcomes = sweep_family(family, |q| {
        if p <= 1.0 {
            ap_le1_per_cube(weight, p, q, cfg)
        } else {
            ap_gt1_per_cube(weight, p, q, cfg)
        }
    })?;
    assemble_report(
        CharacteristicKind::Ap,
        p,
        family.description.clone(),
        outcomes,
        None,
        Vec::new(),
    )
}

/// Per-cube `A_{p,infty}` value:
/// `exp( avg_y ln( avg_x ||W^{1/p}(x) W^{-1/p}(y)||^p ) )`.
fn apinf_per_cube(
    weight: &Weight,
    p: f64,
    q: &Cube,
    cfg: &QuadratureConfig,
) -> Result<PerCubeValue> {
    let quad = with_weight_singularities(cfg, weight);
    if weight.eigen_structure() == EigenStructure::ScalarLike {
        // Scalar case: (avg w) exp(-avg ln w), independent of p.
        let r = cube_average_vec(
            |x, out| {
                let (logs, _) = weight.log_eigenvalues(x)?;
                let l = logs[0];
                out[0] = l.exp();
                out[1] = l;
                if !out[0].is_finite() || !l.is_finite() {
                    return Err(Error::SingularEvaluation(x.to_vec()));
                }
                Ok(())
            },
            2,
            q,
            &quad,
        )?;
        let value = r.values[0] * (-r.values[1]).exp();
        let rel = r.error_estimates[0] / r.values[0].abs().max(1e-300) + r.error_estimates[1];
        return Ok(PerCubeValue {
            cube: q.clone(),
            value,
            error_estimate: value * rel,
            nodes_used: r.nodes_used,
        });
    }
    let avg = nested_logavg_of_avg(|x, y| weight.norm_ratio_pow(x, y, p), q, q, &quad)?;
    Ok(PerCubeValue {
        cube: q.clone(),
        value: avg.value,
        error_estimate: avg.error_estimate,
        nodes_used: avg.nodes_used,
    })
}

/// `[W]_{A_{p,infty}}` over the family.
pub fn apinf_characteristic(
    weight: &Weight,
    p: f64,
    family: &ProbeFamily,
    cfg: &QuadratureConfig,
) -> Result<CharacteristicReport> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("order p = {p}")));
    }
    let outcomes = sweep_family(family, |q| apinf_per_cube(weight, p, q, cfg))?;
    assemble_report(
        CharacteristicKind::ApInfty,
        p,
        family.description.clone(),
        outcomes,
        None,
        Vec::new(),
    )
}

/// Scalar `A_infty` characteristic `sup_Q (avg w) exp(avg ln w^{-1})`,
/// the `m = 1` specialization of the order-independent characteristic.
pub fn scalar_a_infty(
    weight: &Weight,
    family: &ProbeFamily,
    cfg: &QuadratureConfig,
) -> Result<CharacteristicReport> {
    if weight.eigen_structure() != EigenStructure::ScalarLike {
        return Err(Error::InvalidParameter(
            "scalar characteristic needs a scalar-times-identity weight".into(),
        ));
    }
    let mut report = apinf_characteristic(weight, 1.0, family, cfg)?;
    report.kind = CharacteristicKind::ScalarAInfty;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Grid maximal function characteristics.
// ---------------------------------------------------------------------------

/// Volume ratio between the circumscribed ball of a cube and the cube
/// itself: the factor by which the box maximal function can undershoot
/// the ball maximal function.
pub fn ball_box_comparability(n: usize) -> Result<f64> {
    match n {
        1 => Ok(1.0),
        2 => Ok(std::f64::consts::PI / 2.0),
        _ => Err(Error::Config(format!(
            "grid maximal function supports n <= 2, got {n}"
        ))),
    }
}

/// Cell averages of a scalar function on a `cells`-per-axis grid over `q`,
/// row-major, each cell integrated adaptively.
fn grid_cell_averages<F>(
    w: &F,
    q: &Cube,
    cells: usize,
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let n = q.dim();
    let lo = q.lower_corner();
    let step = q.edge / cells as f64;
    let mut cell_cfg = cfg.clone();
    cell_cfg.base_subdivisions_per_axis = 2;
    cell_cfg.rel_tol = cfg.rel_tol.max(1e-6);
    let total = cells.pow(n as u32);
    (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut center = vec![0.0; n];
            for i in 0..n {
                let k = rem % cells;
                rem /= cells;
                center[i] = lo[i] + (k as f64 + 0.5) * step;
            }
            let cell = Cube::new(center, step)?;
            Ok(cube_average(w, &cell, &cell_cfg)?.value)
        })
        .collect()
}

/// Exact maximal function over sub-intervals of the grid, 1D.
fn box_maximal_1d(avg: &[f64]) -> Vec<f64> {
    let n = avg.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + avg[i];
    }
    let mut out = vec![f64::NEG_INFINITY; n];
    for i in 0..n {
        for j in i..n {
            let a = (prefix[j + 1] - prefix[i]) / (j + 1 - i) as f64;
            for cell in out.iter_mut().take(j + 1).skip(i) {
                if a > *cell {
                    *cell = a;
                }
            }
        }
    }
    out
}

/// Exact maximal function over sub-boxes of the grid, 2D row-major.
fn box_maximal_2d(avg: &[f64], nx: usize, ny: usize) -> Vec<f64> {
    let mut prefix = vec![0.0; (nx + 1) * (ny + 1)];
    for y in 0..ny {
        for x in 0..nx {
            prefix[(y + 1) * (nx + 1) + x + 1] = avg[y * nx + x]
                + prefix[y * (nx + 1) + x + 1]
                + prefix[(y + 1) * (nx + 1) + x]
                - prefix[y * (nx + 1) + x];
        }
    }
    let boxsum = |x0: usize, x1: usize, y0: usize, y1: usize| {
        prefix[(y1 + 1) * (nx + 1) + x1 + 1] - prefix[y0 * (nx + 1) + x1 + 1]
            - prefix[(y1 + 1) * (nx + 1) + x0]
            + prefix[y0 * (nx + 1) + x0]
    };
    let mut out = vec![f64::NEG_INFINITY; nx * ny];
    for y0 in 0..ny {
        for y1 in y0..ny {
            for x0 in 0..nx {
                for x1 in x0..nx {
                    let a = boxsum(x0, x1, y0, y1) / ((x1 + 1 - x0) * (y1 + 1 - y0)) as f64;
                    for y in y0..=y1 {
                        for x in x0..=x1 {
                            let c = &mut out[y * nx + x];
                            if a > *c {
                                *c = a;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// One cube's maximal-function ratio `(sum of M) / (sum of w)` on a grid
/// with `2^depth` cells per axis, plus the same value one depth coarser.
fn fujii_wilson_per_cube<F>(
    w: &F,
    q: &Cube,
    depth: usize,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let n = q.dim();
    if depth == 0 {
        return Err(Error::Config("grid depth must be >= 1".into()));
    }
    let cells = 1usize << depth;
    let fine = grid_cell_averages(w, q, cells, cfg)?;
    let ratio = |avg: &[f64], nx: usize| -> f64 {
        let maximal = match n {
            1 => box_maximal_1d(avg),
            _ => box_maximal_2d(avg, nx, nx),
        };
        maximal.iter().sum::<f64>() / avg.iter().sum::<f64>()
    };
    let fine_ratio = ratio(&fine, cells);
    // The coarse grid reuses the fine averages: parents average children.
    let half = cells / 2;
    let coarse: Vec<f64> = match n {
        1 => (0..half).map(|i| (fine[2 * i] + fine[2 * i + 1]) / 2.0).collect(),
        _ => (0..half * half)
            .map(|flat| {
                let (cx, cy) = (flat % half, flat / half);
                let at = |x: usize, y: usize| fine[y * cells + x];
                (at(2 * cx, 2 * cy)
                    + at(2 * cx + 1, 2 * cy)
                    + at(2 * cx, 2 * cy + 1)
                    + at(2 * cx + 1, 2 * cy + 1))
                    / 4.0
            })
            .collect(),
    };
    let coarse_ratio = if half >= 1 { ratio(&coarse, half) } else { fine_ratio };
    Ok((fine_ratio, coarse_ratio))
}

/// Fujii-Wilson constant `sup_Q (1/w(Q)) int_Q M(w 1_Q)` of a scalar
/// weight, with the maximal function taken over axis-aligned grid boxes.
pub fn scalar_fujii_wilson(
    weight: &Weight,
    family: &ProbeFamily,
    grid_depth: usize,
    cfg: &QuadratureConfig,
) -> Result<CharacteristicReport> {
    if weight.eigen_structure() != EigenStructure::ScalarLike {
        return Err(Error::InvalidParameter(
            "maximal-function characteristic needs a scalar-times-identity weight".into(),
        ));
    }
    let n = weight.n;
    let factor = ball_box_comparability(n)?;
    let quad = with_weight_singularities(cfg, weight);
    let w = |x: &[f64]| -> Result<f64> {
        let (logs, _) = weight.log_eigenvalues(x)?;
        let v = logs[0].exp();
        if !v.is_finite() {
            return Err(Error::SingularEvaluation(x.to_vec()));
        }
        Ok(v)
    };
    let results: Vec<(usize, f64, f64)> = family
        .cubes
        .iter()
        .enumerate()
        .map(|(i, q)| fujii_wilson_per_cube(&w, q, grid_depth, &quad).map(|(f, c)| (i, f, c)))
        .collect::<Result<_>>()?;
    let mut outcomes = Vec::new();
    let mut warnings = Vec::new();
    for (i, fine, coarse) in results {
        if (fine - coarse).abs() > 0.05 * fine.abs() {
            warnings.push(format!(
                "cube {i}: maximal ratio moved {:.1}% between grid depths; refine",
                100.0 * (fine - coarse).abs() / fine.abs()
            ));
        }
        outcomes.push(CubeOutcome::Value(PerCubeValue {
            cube: family.cubes[i].clone(),
            value: fine,
            error_estimate: (fine - coarse).abs(),
            nodes_used: 1 << (grid_depth * n),
        }));
    }
    assemble_report(
        CharacteristicKind::FujiiWilson,
        1.0,
        family.description.clone(),
        outcomes,
        Some(factor),
        warnings,
    )
}

/// Matrix and vector variants of the scalar-reduction characteristic.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScAlternatives {
    /// `sup_M` of the Fujii-Wilson constant of `||W^{1/p} M||^p`.
    pub matrix_variant: CharacteristicReport,
    /// Same with rank-one images `|W^{1/p} z|^p` only.
    pub vector_variant: CharacteristicReport,
}

/// Scalar-reduction characteristic: the Fujii-Wilson constant of the
/// scalar weights `||W^{1/p}(x) M||^p`, maximized over sampled `M`, with
/// the vector-only variant reported alongside.
#[allow(clippy::too_many_arguments)]
pub fn sc_characteristic(
    weight: &Weight,
    p: f64,
    family: &ProbeFamily,
    matrix_samples: usize,
    vector_samples: usize,
    grid_depth: usize,
    cfg: &QuadratureConfig,
    seed: u64,
) -> Result<ScAlternatives> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("order p = {p}")));
    }
    let m = weight.matrix_dim();
    let quad = with_weight_singularities(cfg, weight);
    let mats = matrix_sample_set(m, matrix_samples, seed);
    let vecs = vector_sample_set(m, vector_samples, seed, 0);

    type ScalarFn<'a> = Box<dyn Fn(&[f64]) -> Result<f64> + Sync + 'a>;
    let per_cube = |q: &Cube, scalars: &[ScalarFn<'_>]| {
        let mut best = f64::NEG_INFINITY;
        let mut err = 0.0;
        let mut nodes = 0usize;
        for w in scalars {
            let (fine, coarse) = fujii_wilson_per_cube(w, q, grid_depth, &quad)?;
            nodes += 1usize << (grid_depth * q.dim());
            if fine > best {
                best = fine;
                err = (fine - coarse).abs();
            }
        }
        Ok(PerCubeValue {
            cube: q.clone(),
            value: best,
            error_estimate: err,
            nodes_used: nodes,
        })
    };

    let matrix_fns: Vec<ScalarFn<'_>> = mats
        .iter()
        .map(|(_, mat)| {
            let mat = mat.clone();
            Box::new(move |x: &[f64]| {
                let v = (p * weight.log_matrix_image(x, &mat, 1.0 / p)?).exp();
                if !v.is_finite() {
                    return Err(Error::SingularEvaluation(x.to_vec()));
                }
                Ok(v)
            }) as ScalarFn<'_>
        })
        .collect();
    let vector_fns: Vec<ScalarFn<'_>> = vecs
        .iter()
        .map(|z| {
            let z = z.clone();
            Box::new(move |x: &[f64]| weight.vector_image_pow(x, &z, p)) as ScalarFn<'_>
        })
        .collect();

    let matrix_outcomes = sweep_family(family, |q| per_cube(q, &matrix_fns))?;
    let vector_outcomes = sweep_family(family, |q| per_cube(q, &vector_fns))?;
    Ok(ScAlternatives {
        matrix_variant: assemble_report(
            CharacteristicKind::Sc,
            p,
            family.description.clone(),
            matrix_outcomes,
            Some(ball_box_comparability(weight.n)?),
            Vec::new(),
        )?,
        vector_variant: assemble_report(
            CharacteristicKind::Sc,
            p,
            family.description.clone(),
            vector_outcomes,
            Some(ball_box_comparability(weight.n)?),
            Vec::new(),
        )?,
    })
}

// ---------------------------------------------------------------------------
// Per-cube condition equivalences.
// ---------------------------------------------------------------------------

/// Best empirical constant for one per-cube condition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionConstant {
    /// Position of the condition in the equivalence chain (2 through 8).
    pub index: u8,
    pub label: String,
    pub value: f64,
}

/// Smallest constants making each per-cube condition hold on one cube,
/// over shared vector and matrix samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub p: f64,
    pub cube: Cube,
    pub constants: Vec<ConditionConstant>,
    /// Largest over smallest finite constant.
    pub cross_ratio: f64,
    pub flagged: Vec<String>,
}

/// Evaluates the chain of per-cube conditions that are mutually
/// equivalent for the order-independent class, reporting the smallest
/// constant for each. The first link of the chain (the lower bound by a
/// constant multiple of `|A_Q^{-1} z|`) coincides with the vector
/// condition at index 2, which is why the report starts there.
pub fn compare_conditions(
    weight: &Weight,
    p: f64,
    q: &Cube,
    cfg: &QuadratureConfig,
    samples: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("order p = {p}")));
    }
    let m = weight.matrix_dim();
    let quad = with_weight_singularities(cfg, weight);
    let op = reduce(weight, q, p, cfg, seed)?;
    let amat = op.matrix.matrix().clone();
    let binv = op.inverse()?;
    let zs = vector_sample_set(m, samples, seed, 1);
    let vs = vector_sample_set(m, samples, seed, 2);
    let mats = matrix_sample_set(m, samples, seed);

    let mut constants = Vec::new();
    let mut flagged = Vec::new();
    let mut push = |index: u8, label: &str, value: Result<f64>, flagged: &mut Vec<String>| {
        let v = match value {
            Ok(v) => v,
            Err(Error::Divergent { .. }) | Err(Error::NonPositiveLog(_)) => {
                flagged.push(label.to_string());
                f64::INFINITY
            }
            Err(e) => return Err(e),
        };
        constants.push(ConditionConstant {
            index,
            label: label.to_string(),
            value: v,
        });
        Ok(())
    };

    // Index 2: exp(avg ln |W^{-1/p} z|) <= C |A_Q^{-1} z|.
    let c2 = (|| {
        let mut best = f64::NEG_INFINITY;
        for z in &zs {
            let avg = cube_average(|x| weight.log_vector_image(x, z, -1.0 / p), q, &quad)?;
            let den = binv.apply(z).norm();
            best = best.max(avg.value.exp() / den);
        }
        Ok(best)
    })();
    push(2, "log-average of |W^{-1/p} z| against |A_Q^{-1} z|", c2, &mut flagged)?;

    // Index 3: exp(avg ln_+ |W^{-1/p} A_Q v|) <= C for unit v.
    let c3 = (|| {
        let mut best = f64::NEG_INFINITY;
        for v in &vs {
            let av = DVector::from_column_slice(
                (&amat * v).as_slice(),
            );
            let avg = cube_average(
                |x| Ok(weight.log_vector_image(x, &av, -1.0 / p)?.max(0.0)),
                q,
                &quad,
            )?;
            best = best.max(avg.value.exp());
        }
        Ok(best)
    })();
    push(3, "positive log-average of |W^{-1/p} A_Q v|", c3, &mut flagged)?;

    // Index 4: matrix form of index 3 over unit-norm matrices.
    let c4 = (|| {
        let mut best = f64::NEG_INFINITY;
        for (_, u) in &mats {
            let norm = operator_norm(u)?;
            if norm <= 0.0 {
                continue;
            }
            let au = &amat * u / C64::new(norm, 0.0);
            let avg = cube_average(
                |x| Ok(weight.log_matrix_image(x, &au, -1.0 / p)?.max(0.0)),
                q,
                &quad,
            )?;
            best = best.max(avg.value.exp());
        }
        Ok(best)
    })();
    push(4, "positive log-average of ||W^{-1/p} A_Q U||", c4, &mut flagged)?;

    // Index 5: the single matrix U = identity.
    let c5 = (|| {
        let avg = cube_average(
            |x| Ok(weight.log_matrix_image(x, &amat, -1.0 / p)?.max(0.0)),
            q,
            &quad,
        )?;
        Ok(avg.value.exp())
    })();
    push(5, "positive log-average of ||W^{-1/p} A_Q||", c5, &mut flagged)?;

    // Index 6: positive log-average over y of the plain norm average
    // over x (norm power one).
    let c6 = (|| {
        let mut inner_cfg = quad.clone();
        inner_cfg.rel_tol = quad.rel_tol / 2.0;
        let outer = cube_average(
            |y| {
                let inner = cube_average(
                    |x| Ok(weight.norm_ratio_pow(x, y, p)?.powf(1.0 / p)),
                    q,
                    &inner_cfg,
                )?;
                if inner.value <= 0.0 || inner.value.is_nan() {
                    return Err(Error::NonPositiveLog(y.to_vec()));
                }
                Ok(inner.value.ln().max(0.0))
            },
            q,
            &inner_cfg,
        )?;
        Ok(outer.value.exp())
    })();
    push(6, "positive log-average of the plain norm double average", c6, &mut flagged)?;

    // Index 7: the per-cube characteristic itself.
    let c7 = apinf_per_cube(weight, p, q, cfg).map(|v| v.value);
    let c7 = match c7 {
        Ok(v) => Ok(v),
        Err(Error::Divergent { near, ratio }) => Err(Error::Divergent { near, ratio }),
        Err(e) => Err(e),
    };
    push(7, "order-independent per-cube characteristic", c7, &mut flagged)?;

    // Index 8: exp(avg ln ||W^{-1/p} M||) <= C ||A_Q^{-1} M||.
    let c8 = (|| {
        let mut best = f64::NEG_INFINITY;
        for (_, mat) in &mats {
            let avg = cube_average(|x| weight.log_matrix_image(x, mat, -1.0 / p), q, &quad)?;
            let den = operator_norm(&(binv.matrix() * mat))?;
            if den <= 0.0 {
                continue;
            }
            best = best.max(avg.value.exp() / den);
        }
        Ok(best)
    })();
    push(8, "log-average of ||W^{-1/p} M|| against ||A_Q^{-1} M||", c8, &mut flagged)?;

    let finite: Vec<f64> = constants
        .iter()
        .map(|c| c.value)
        .filter(|v| v.is_finite())
        .collect();
    let cross_ratio = if finite.is_empty() {
        f64::INFINITY
    } else {
        let max = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = finite.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    };
    Ok(EquivalenceReport {
        p,
        cube: q.clone(),
        constants,
        cross_ratio,
        flagged,
    })
}

// ---------------------------------------------------------------------------
// Functional form of the characteristic.
// ---------------------------------------------------------------------------

/// Candidate fields `H` for the functional form of the characteristic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HCandidate {
    /// `H(y) = W^{-1/p}(y)`, the maximizer.
    InverseRoot,
    /// `H` constant equal to `A_Q^{-1}`.
    ReducingInverse,
    /// `W^{-1/p}` where `||A_Q W^{-1/p}(y)||^p >= e^threshold`, the
    /// constant `A_Q^{-1}` elsewhere.
    Mixture { threshold: f64 },
}

/// One candidate's functional value, or the reason it was excluded.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FunctionalOutcome {
    pub candidate: HCandidate,
    pub value: Option<f64>,
    pub excluded: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub p: f64,
    pub cube: Cube,
    /// The per-cube characteristic the functional values are bounded by.
    pub characteristic_value: f64,
    pub outcomes: Vec<FunctionalOutcome>,
    /// Largest candidate value.
    pub best: f64,
}

/// Evaluates
/// `exp( avg_y ln( avg_x ||W^{1/p}(x) H(y)||^p ) ) / avg_y ||W^{1/p}(y) H(y)||^p`
/// for each candidate `H`. Candidates never exceed the per-cube
/// characteristic, and `H = W^{-1/p}` attains it.
pub fn functional_characteristic(
    weight: &Weight,
    p: f64,
    q: &Cube,
    candidates: &[HCandidate],
    cfg: &QuadratureConfig,
    seed: u64,
) -> Result<FunctionalReport> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("order p = {p}")));
    }
    let quad = with_weight_singularities(cfg, weight);
    let characteristic = apinf_per_cube(weight, p, q, cfg)?.value;
    let needs_reducer = candidates
        .iter()
        .any(|c| !matches!(c, HCandidate::InverseRoot));
    let reducer = if needs_reducer {
        Some(reduce(weight, q, p, cfg, seed)?)
    } else {
        None
    };
    let mut outcomes = Vec::new();
    for cand in candidates {
        let outcome = match cand {
            HCandidate::InverseRoot => {
                // Denominator integrand is identically ||I||^p = 1.
                FunctionalOutcome {
                    candidate: *cand,
                    value: Some(characteristic),
                    excluded: None,
                }
            }
            HCandidate::ReducingInverse => {
                // Constant H: numerator and denominator are the same
                // average, so the ratio is one whenever it is finite.
                let b = reducer.as_ref().unwrap().inverse()?;
                let avg = cube_average(
                    |x| weight.matrix_image_pow(x, b.matrix(), p),
                    q,
                    &quad,
                )?;
                if avg.value > 0.0 && avg.value.is_finite() {
                    FunctionalOutcome {
                        candidate: *cand,
                        value: Some(1.0),
                        excluded: None,
                    }
                } else {
                    FunctionalOutcome {
                        candidate: *cand,
                        value: None,
                        excluded: Some("degenerate average image".into()),
                    }
                }
            }
            HCandidate::Mixture { threshold } => {
                let a = reducer.as_ref().unwrap();
                let amat = a.matrix.matrix().clone();
                let b = a.inverse()?;
                let bmat = b.matrix().clone();
                let thr = *threshold;
                let in_level = |y: &[f64]| -> Result<bool> {
                    Ok(p * weight.log_matrix_image(y, &amat, -1.0 / p)? >= thr)
                };
                let num = nested_logavg_of_avg(
                    |x, y| {
                        if in_level(y)? {
                            weight.norm_ratio_pow(x, y, p)
                        } else {
                            weight.matrix_image_pow(x, &bmat, p)
                        }
                    },
                    q,
                    q,
                    &quad,
                )?;
                let den = cube_average(
                    |y| {
                        if in_level(y)? {
                            Ok(1.0)
                        } else {
                            weight.matrix_image_pow(y, &bmat, p)
                        }
                    },
                    q,
                    &quad,
                )?;
                if den.value > 0.0 && den.value.is_finite() {
                    FunctionalOutcome {
                        candidate: *cand,
                        value: Some(num.value / den.value),
                        excluded: None,
                    }
                } else {
                    FunctionalOutcome {
                        candidate: *cand,
                        value: None,
                        excluded: Some("degenerate denominator".into()),
                    }
                }
            }
        };
        outcomes.push(outcome);
    }
    let best = outcomes
        .iter()
        .filter_map(|o| o.value)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(FunctionalReport {
        p,
        cube: q.clone(),
        characteristic_value: characteristic,
        outcomes,
        best,
    })
}

// ---------------------------------------------------------------------------
// Distributional and stopping-time estimates.
// ---------------------------------------------------------------------------

/// Calibrated absolute constant for the distributional and stopping-time
/// bounds: the smallest power of two for which every built-in
/// ground-truth example satisfies them.
pub const CALIBRATED_C: f64 = 2.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionalRow {
    pub level: f64,
    /// Measured fraction of the cube where `||A_Q W^{-1/p}(y)||^p >= e^level`.
    pub fraction: f64,
    /// `ln(C * characteristic) / level`.
    pub bound: f64,
    /// `fraction * level / ln(C * characteristic)`.
    pub normalized: f64,
    pub within: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionalReport {
    pub p: f64,
    pub cube: Cube,
    pub characteristic_value: f64,
    pub calibration_c: f64,
    pub rows: Vec<DistributionalRow>,
    pub all_within: bool,
    /// Log-log slope of fraction against level, when enough rows have a
    /// positive fraction.
    pub decay_slope: Option<f64>,
}

/// Measures the superlevel sets `{ y : ||A_Q W^{-1/p}(y)||^p >= e^M }`
/// and checks the `ln(C K) / M` measure bound at each level `M`.
#[allow(clippy::too_many_arguments)]
pub fn distributional_check(
    weight: &Weight,
    p: f64,
    q: &Cube,
    levels: &[f64],
    extra_depth: usize,
    c: f64,
    cfg: &QuadratureConfig,
    seed: u64,
) -> Result<DistributionalReport> {
    if !(c > 1.0) {
        return Err(Error::InvalidParameter(format!("calibration constant {c}")));
    }
    let quad = with_weight_singularities(cfg, weight);
    let a = reduce(weight, q, p, cfg, seed)?;
    let amat = a.matrix.matrix().clone();
    let characteristic = apinf_per_cube(weight, p, q, cfg)?.value;
    let log_k = (c * characteristic).ln();
    let mut rows = Vec::new();
    for &level in levels {
        if !(level > 0.0) {
            return Err(Error::InvalidParameter(format!("level {level}")));
        }
        let fraction = superlevel_fraction(
            |y| Ok(p * weight.log_matrix_image(y, &amat, -1.0 / p)?),
            level,
            q,
            &quad,
            extra_depth,
        )?;
        let bound = log_k / level;
        rows.push(DistributionalRow {
            level,
            fraction,
            bound,
            normalized: fraction * level / log_k,
            within: fraction <= bound + 1e-9,
        });
    }
    let positive: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.fraction > 0.0)
        .map(|r| (r.level.ln(), r.fraction.ln()))
        .collect();
    let decay_slope = if positive.len() >= 3 {
        regression_slope(
            &positive.iter().map(|t| t.0).collect::<Vec<_>>(),
            &positive.iter().map(|t| t.1).collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let all_within = rows.iter().all(|r| r.within);
    Ok(DistributionalReport {
        p,
        cube: q.clone(),
        characteristic_value: characteristic,
        calibration_c: c,
        rows,
        all_within,
        decay_slope,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StoppingTimeReport {
    pub p: f64,
    pub cube: Cube,
    pub level: f64,
    pub selected: Vec<Cube>,
    /// Total selected volume over the volume of the root cube.
    pub measure_ratio: f64,
    pub bound: f64,
    pub within_bound: bool,
    pub characteristic_value: f64,
    pub calibration_c: f64,
    /// Subcubes where the reducing operator failed and refinement
    /// continued into the children instead.
    pub refined_failures: usize,
}

/// Greedily selects the maximal dyadic subcubes `R` of `q` with
/// `||A_Q A_R^{-1}||^p >= e^level` down to `max_depth`, and checks that
/// their total measure obeys the `ln(C K) / level` bound.
#[allow(clippy::too_many_arguments)]
pub fn stopping_time_check(
    weight: &Weight,
    p: f64,
    q: &Cube,
    level: f64,
    max_depth: usize,
    c: f64,
    cfg: &QuadratureConfig,
    seed: u64,
) -> Result<StoppingTimeReport> {
    if !(level > 0.0) {
        return Err(Error::InvalidParameter(format!("level {level}")));
    }
    if !(c > 1.0) {
        return Err(Error::InvalidParameter(format!("calibration constant {c}")));
    }
    let root = reduce(weight, q, p, cfg, seed)?;
    let amat = root.matrix.matrix().clone();
    let characteristic = apinf_per_cube(weight, p, q, cfg)?.value;
    let mut selected = Vec::new();
    let mut refined_failures = 0usize;
    let mut frontier: Vec<(Cube, usize)> =
        q.dyadic_children().into_iter().map(|ch| (ch, 1)).collect();
    while let Some((r, depth)) = frontier.pop() {
        match reduce(weight, &r, p, cfg, seed) {
            Ok(sub) => {
                let ratio = p * operator_norm(&(&amat * sub.inverse()?.matrix()))?.ln();
                if ratio >= level {
                    selected.push(r);
                } else if depth < max_depth {
                    frontier.extend(r.dyadic_children().into_iter().map(|ch| (ch, depth + 1)));
                }
            }
            Err(_) if depth < max_depth => {
                refined_failures += 1;
                frontier.extend(r.dyadic_children().into_iter().map(|ch| (ch, depth + 1)));
            }
            Err(e) => return Err(e),
        }
    }
    let measure_ratio = selected.iter().map(Cube::volume).sum::<f64>() / q.volume();
    let bound = (c * characteristic).ln() / level;
    Ok(StoppingTimeReport {
        p,
        cube: q.clone(),
        level,
        selected,
        measure_ratio,
        bound,
        within_bound: measure_ratio <= bound + 1e-9,
        characteristic_value: characteristic,
        calibration_c: c,
        refined_failures,
    })
}

// ---------------------------------------------------------------------------
// Self-improvement exponent.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegrabilityRow {
    pub u: f64,
    /// Supremum over the family of `avg_Q ||W^{-1/p} A_Q||^u`, infinite
    /// when some cube diverged.
    #[serde(with = "crate::report::nonfinite")]
    pub sup: f64,
    pub stable: bool,
    /// `(edge, layer sup)` pairs, finest edge last.
    pub per_layer: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegrabilityReport {
    pub p: f64,
    /// Largest stable exponent, zero when none stabilizes.
    pub u_star: f64,
    pub rows: Vec<IntegrabilityRow>,
    pub diagnostics: Vec<String>,
}

/// Sweeps `avg_Q ||W^{-1/p}(x) A_Q||^u` over the family for each `u`,
/// reporting the largest exponent whose supremum is finite and moves less
/// than ten percent between the two finest cube layers.
pub fn integrability_exponent(
    weight: &Weight,
    p: f64,
    family: &ProbeFamily,
    u_grid: &[f64],
    cfg: &QuadratureConfig,
    seed: u64,
) -> Result<IntegrabilityReport> {
    if u_grid.iter().any(|u| !(u > &0.0)) {
        return Err(Error::InvalidParameter("exponent grid must be positive".into()));
    }
    let quad = with_weight_singularities(cfg, weight);
    let reducers: Vec<ReducingOperator> = family
        .cubes
        .par_iter()
        .map(|q| reduce(weight, q, p, cfg, seed))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for &u in u_grid {
        let per_cube: Vec<Option<f64>> = family
            .cubes
            .par_iter()
            .zip(&reducers)
            .map(|(q, a)| {
                let amat = a.matrix.matrix();
                let avg = cube_average(
                    |x| {
                        let v = (u * weight.log_matrix_image(x, amat, -1.0 / p)?).exp();
                        if !v.is_finite() {
                            return Err(Error::SingularEvaluation(x.to_vec()));
                        }
                        Ok(v)
                    },
                    q,
                    &quad,
                );
                match avg {
                    Ok(r) => Ok(Some(r.value)),
                    Err(Error::Divergent { .. }) | Err(Error::NoConvergence { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_>>()?;
        let mut layers: Vec<(f64, f64)> = Vec::new();
        let mut sup = f64::NEG_INFINITY;
        let mut diverged = false;
        for (q, v) in family.cubes.iter().zip(&per_cube) {
            match v {
                Some(v) => {
                    sup = sup.max(*v);
                    match layers.iter_mut().find(|(e, _)| (e / q.edge - 1.0).abs() < 1e-9) {
                        Some(entry) => entry.1 = entry.1.max(*v),
                        None => layers.push((q.edge, *v)),
                    }
                }
                None => diverged = true,
            }
        }
        layers.sort_by(|a, b| b.0.total_cmp(&a.0));
        let layered_ok = if layers.len() >= 2 {
            let fine = layers[layers.len() - 1].1;
            let prev = layers[layers.len() - 2].1;
            (fine - prev) / prev.abs().max(1e-300) < 0.10
        } else {
            true
        };
        let stable = !diverged && sup.is_finite() && layered_ok;
        if diverged {
            diagnostics.push(format!("u = {u}: some cube average diverged"));
        } else if !layered_ok {
            diagnostics.push(format!("u = {u}: supremum still growing at the finest layer"));
        }
        rows.push(IntegrabilityRow {
            u,
            sup: if diverged { f64::INFINITY } else { sup },
            stable,
            per_layer: layers,
        });
    }
    let u_star = rows
        .iter()
        .filter(|r| r.stable)
        .map(|r| r.u)
        .fold(0.0, f64::max);
    if u_star == 0.0 {
        diagnostics.push("no exponent stabilized on this family".into());
    }
    Ok(IntegrabilityReport {
        p,
        u_star,
        rows,
        diagnostics,
    })
}

// ---------------------------------------------------------------------------
// Class inclusions.
// ---------------------------------------------------------------------------

const DEFAULT_U_GRID: [f64; 10] = [0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InclusionReport {
    pub p: f64,
    pub q_order: f64,
    #[serde(with = "crate::report::nonfinite")]
    pub order_p_value: f64,
    #[serde(with = "crate::report::nonfinite")]
    pub order_q_value: f64,
    /// Empirical constant in the order-monotonicity inequality.
    #[serde(with = "crate::report::nonfinite")]
    pub inclusion_constant: f64,
    #[serde(with = "crate::report::nonfinite")]
    pub ap_value: f64,
    pub ap_divergent: bool,
    /// For `p <= 1`: worst per-cube ratio of the order-independent value
    /// over the `A_p` value (at most one up to quadrature error).
    pub sharp_domination: Option<f64>,
    pub u_star: f64,
    pub q_union: Option<f64>,
    pub union_divergent: Option<bool>,
    pub notes: Vec<String>,
}

/// Checks the monotonicity of the order-independent characteristic in the
/// order, its domination by the `A_p` characteristic (with constant one
/// when `p <= 1`), and the union statement through the self-improvement
/// exponent.
pub fn inclusion_checks(
    weight: &Weight,
    p: f64,
    q_order: f64,
    family: &ProbeFamily,
    cfg: &QuadratureConfig,
    seed: u64,
) -> Result<InclusionReport> {
    if !(0.0 < p && p < q_order) {
        return Err(Error::InvalidParameter(format!(
            "orders must satisfy 0 < p < q, got {p}, {q_order}"
        )));
    }
    let mut notes = Vec::new();
    let apinf_p = apinf_characteristic(weight, p, family, cfg)?;
    let apinf_q = apinf_characteristic(weight, q_order, family, cfg)?;
    let inclusion_constant = apinf_q.value / apinf_p.value;
    let ap = ap_characteristic(weight, p, family, cfg)?;
    let sharp_domination = if p <= 1.0 && !ap.is_divergent() {
        let mut worst = f64::NEG_INFINITY;
        for row in &apinf_p.per_cube {
            if let Some(ap_row) = ap
                .per_cube
                .iter()
                .find(|r| r.cube.center == row.cube.center && r.cube.edge == row.cube.edge)
            {
                worst = worst.max(row.value / ap_row.value);
            }
        }
        Some(worst)
    } else {
        if p <= 1.0 {
            notes.push("A_p diverged; domination holds vacuously".into());
        } else {
            notes.push(format!(
                "order above one: characteristic ratio {:.4} recorded without a constant-one claim",
                apinf_p.value / ap.value
            ));
        }
        None
    };
    let integ = integrability_exponent(weight, p, family, &DEFAULT_U_GRID, cfg, seed)?;
    let (q_union, union_divergent) = if integ.u_star > 0.0 {
        // The self-improvement exponent controls the double-average form
        // after dividing by p, which turns the exponent relation
        // q'/q <= u into this order.
        let qu = 1.0 + p / integ.u_star;
        let union_ap = ap_characteristic(weight, qu, family, cfg)?;
        (Some(qu), Some(union_ap.is_divergent()))
    } else {
        notes.push("no self-improvement exponent stabilized; union statement skipped".into());
        (None, None)
    };
    Ok(InclusionReport {
        p,
        q_order,
        order_p_value: apinf_p.value,
        order_q_value: apinf_q.value,
        inclusion_constant,
        ap_value: ap.value,
        ap_divergent: ap.is_divergent(),
        sharp_domination,
        u_star: integ.u_star,
        q_union,
        union_divergent,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Reverse Holder inequality.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReverseHolderRow {
    pub r: f64,
    pub sample: String,
    pub cube: Cube,
    /// `avg ||W^{1/p} M||^{p r}`.
    pub lhs: f64,
    /// `2 (avg ||W^{1/p} M||^p)^r`.
    pub rhs: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReverseHolderReport {
    pub p: f64,
    /// Largest admissible exponent derived from the scalar-reduction
    /// characteristic.
    pub endpoint_r: f64,
    pub rows: Vec<ReverseHolderRow>,
    pub all_ok: bool,
    /// Supremum over the family of `(avg ||W^{1/p} A_Q^{-1}||^{p r})^{1/r}`
    /// at the endpoint exponent.
    pub reducing_sup: f64,
    /// Same with the inner norm maximized over the dyadic tower between
    /// each point's cell and the root cube.
    pub dyadic_maximal_sup: f64,
    /// Samples and cubes where the raised-power average diverged,
    /// signalling an underestimated scalar-reduction characteristic.
    pub flagged: Vec<String>,
}

/// Verifies `avg ||W^{1/p} M||^{pr} <= 2 (avg ||W^{1/p} M||^p)^r` for
/// exponents up to the endpoint determined by `sc_value`, plus the two
/// reducing-operator corollaries.
#[allow(clippy::too_many_arguments)]
pub fn reverse_holder_check(
    weight: &Weight,
    p: f64,
    sc_value: f64,
    matrix_samples: usize,
    family: &ProbeFamily,
    cfg: &QuadratureConfig,
    seed: u64,
) -> Result<ReverseHolderReport> {
    if !(sc_value >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "scalar-reduction characteristic {sc_value} must be >= 1"
        )));
    }
    let n = weight.n;
    let endpoint_r = 1.0 + 1.0 / (2f64.powi(n as i32 + 1) * sc_value - 1.0);
    let rs = [1.0, 0.5 * (1.0 + endpoint_r), endpoint_r];
    let quad = with_weight_singularities(cfg, weight);
    let mats = matrix_sample_set(weight.matrix_dim(), matrix_samples, seed);
    let mut rows = Vec::new();
    let mut flagged = Vec::new();
    for q in &family.cubes {
        for (label, mat) in &mats {
            // One node-sharing pass per (cube, sample): components are
            // the powers p and p r for every exponent in the sweep.
            let exps: Vec<f64> = std::iter::once(p).chain(rs.iter().map(|r| p * r)).collect();
            let avg = cube_average_vec(
                |x, out| {
                    let l = weight.log_matrix_image(x, mat, 1.0 / p)?;
                    for (k, e) in exps.iter().enumerate() {
                        out[k] = (e * l).exp();
                        if !out[k].is_finite() {
                            return Err(Error::SingularEvaluation(x.to_vec()));
                        }
                    }
                    Ok(())
                },
                exps.len(),
                q,
                &quad,
            );
            let avg = match avg {
                Ok(a) => a,
                Err(Error::Divergent { .. }) => {
                    flagged.push(format!(
                        "{label} on cube at {:?}: raised power diverged",
                        q.center
                    ));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let base = avg.values[0];
            for (k, &r) in rs.iter().enumerate() {
                let lhs = avg.values[k + 1];
                let rhs = 2.0 * base.powf(r);
                rows.push(ReverseHolderRow {
                    r,
                    sample: label.clone(),
                    cube: q.clone(),
                    lhs,
                    rhs,
                    ok: lhs <= rhs * (1.0 + 1e-6) + 1e-12,
                });
            }
        }
    }
    // First corollary: the same average with M = A_Q^{-1} stays bounded
    // by a dimensional constant at the endpoint exponent.
    let mut reducing_sup = f64::NEG_INFINITY;
    for q in &family.cubes {
        let b = reduce(weight, q, p, cfg, seed)?.inverse()?;
        let avg = cube_average(
            |x| {
                let v = (p * endpoint_r * weight.log_matrix_image(x, b.matrix(), 1.0 / p)?).exp();
                if !v.is_finite() {
                    return Err(Error::SingularEvaluation(x.to_vec()));
                }
                Ok(v)
            },
            q,
            &quad,
        );
        match avg {
            Ok(a) => reducing_sup = reducing_sup.max(a.value.powf(1.0 / endpoint_r)),
            Err(Error::Divergent { .. }) => {
                flagged.push(format!(
                    "reducing image on cube at {:?}: raised power diverged",
                    q.center
                ));
            }
            Err(e) => return Err(e),
        }
    }
    // Second corollary: the inner norm is maximized over the dyadic
    // ancestors of each point before averaging.
    const TOWER_DEPTH: usize = 3;
    let mut dyadic_maximal_sup = f64::NEG_INFINITY;
    for q in &family.cubes {
        let mut tower = vec![vec![q.clone()]];
        for d in 0..TOWER_DEPTH {
            let next: Vec<Cube> = tower[d].iter().flat_map(|c| c.dyadic_children()).collect();
            tower.push(next);
        }
        let reducers: Vec<Vec<ReducingOperator>> = tower
            .iter()
            .map(|level| {
                level
                    .par_iter()
                    .map(|c| reduce(weight, c, p, cfg, seed))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut acc = 0.0;
        let leaves = &tower[TOWER_DEPTH];
        for (leaf_idx, leaf) in leaves.iter().enumerate() {
            let x = &leaf.center;
            let mut sup = f64::NEG_INFINITY;
            // Ancestor at depth d has index leaf_idx / 2^{n (TOWER_DEPTH - d)}.
            for (d, level) in reducers.iter().enumerate() {
                let shift = n * (TOWER_DEPTH - d);
                let anc = &level[leaf_idx >> shift];
                let v = (p * endpoint_r
                    * weight.log_matrix_image(x, anc.inverse()?.matrix(), 1.0 / p)?)
                .exp();
                sup = sup.max(v);
            }
            acc += sup;
        }
        let avg = acc / leaves.len() as f64;
        dyadic_maximal_sup = dyadic_maximal_sup.max(avg.powf(1.0 / endpoint_r));
    }
    let all_ok = rows.iter().all(|r| r.ok) && flagged.is_empty();
    Ok(ReverseHolderReport {
        p,
        endpoint_r,
        rows,
        all_ok,
        reducing_sup,
        dyadic_maximal_sup,
        flagged,
    })
}

// ---------------------------------------------------------------------------
// Pointwise multiplier bound.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiplierReport {
    pub p: f64,
    /// Sequence-space exponent; infinity means the supremum norm.
    pub q_exp: f64,
    /// Largest ratio of the multiplied norm over the plain norm at the
    /// full level range.
    pub max_ratio: f64,
    /// `(finest level, max ratio)` as the level range deepens.
    pub per_depth: Vec<(usize, f64)>,
    /// Log-log slope of the ratio against the finest-level cell count.
    pub slope: Option<f64>,
    pub ok: bool,
}

/// Checks that multiplying level-`j` conditional expectations by
/// `gamma_j = ||W^{1/p} A_Q^{-1}||` on each level-`j` dyadic cube of
/// `[0,1]^n` is bounded on the mixed norm, uniformly in the level depth.
#[allow(clippy::too_many_arguments)]
pub fn multiplier_bound_check(
    weight: &Weight,
    p: f64,
    q_exp: f64,
    levels: std::ops::RangeInclusive<usize>,
    trials: usize,
    cfg: &QuadratureConfig,
    seed: u64,
) -> Result<MultiplierReport> {
    if !(q_exp > 0.0) {
        return Err(Error::InvalidParameter(format!("sequence exponent {q_exp}")));
    }
    let n = weight.n;
    let (j_lo, j_hi) = (*levels.start(), *levels.end());
    if j_lo > j_hi || j_hi > 12 / n {
        return Err(Error::InvalidParameter(format!(
            "level range {j_lo}..={j_hi} out of range"
        )));
    }
    // Reducing-operator inverses for every dyadic cube of every level.
    let mut inverses: Vec<Vec<CMatrix>> = Vec::new();
    for j in j_lo..=j_hi {
        let side = 1usize << j;
        let cubes: Vec<Cube> = (0..side.pow(n as u32))
            .map(|flat| {
                let mut rem = flat;
                let mut position = Vec::with_capacity(n);
                for _ in 0..n {
                    position.push((rem % side) as i64);
                    rem /= side;
                }
                DyadicIndex {
                    level: j as i32,
                    position,
                }
                .cube()
            })
            .collect();
        let level_inverses: Vec<CMatrix> = cubes
            .par_iter()
            .map(|c| Ok(reduce(weight, c, p, cfg, seed)?.inverse()?.matrix().clone()))
            .collect::<Result<_>>()?;
        inverses.push(level_inverses);
    }

    // Mixed norm over the finest cells: l^q across levels inside, L^p
    // over the cube outside.
    let mixed_norm = |values: &[Vec<f64>], cellcount: usize| -> f64 {
        let vol = 1.0 / cellcount as f64;
        let mut acc = 0.0;
        for c in 0..cellcount {
            let inner = if q_exp.is_infinite() {
                values.iter().map(|lv| lv[c]).fold(0.0, f64::max)
            } else {
                values
                    .iter()
                    .map(|lv| lv[c].powf(q_exp))
                    .sum::<f64>()
                    .powf(1.0 / q_exp)
            };
            acc += vol * inner.powf(p);
        }
        acc.powf(1.0 / p)
    };

    let depth_ratio = |j_max: usize, trial_base: u64| -> Result<f64> {
        let side = 1usize << j_max;
        let cellcount = side.pow(n as u32);
        // gamma_j at the midpoint of each finest cell.
        let mut gammas: Vec<Vec<f64>> = Vec::new();
        for j in j_lo..=j_max {
            let jside = 1usize << j;
            let mut g = vec![0.0; cellcount];
            for (flat, slot) in g.iter_mut().enumerate() {
                let mut rem = flat;
                let mut x = vec![0.0; n];
                let mut parent_flat = 0usize;
                let mut stride = 1usize;
                for xi in x.iter_mut().take(n) {
                    let k = rem % side;
                    rem /= side;
                    *xi = (k as f64 + 0.5) / side as f64;
                    parent_flat += (k >> (j_max - j)) * stride;
                    stride *= jside;
                }
                let inv = &inverses[j - j_lo][parent_flat];
                *slot = weight.log_matrix_image(&x, inv, 1.0 / p)?.exp();
            }
            gammas.push(g);
        }
        let mut worst: f64 = 0.0;
        for trial in 0..trials {
            let mut rng = stream(seed, Purpose::TrialFunctions, trial_base + trial as u64);
            let mut plain: Vec<Vec<f64>> = Vec::new();
            let mut multiplied: Vec<Vec<f64>> = Vec::new();
            for j in j_lo..=j_max {
                let f: Vec<f64> = (0..cellcount).map(|_| rng.gen_range(0.0..1.0)).collect();
                // Conditional expectation on level-j blocks.
                let jside = 1usize << j;
                let blocks = jside.pow(n as u32);
                let mut sums = vec![0.0; blocks];
                let mut counts = vec![0usize; blocks];
                for (flat, v) in f.iter().enumerate() {
                    let mut rem = flat;
                    let mut parent_flat = 0usize;
                    let mut stride = 1usize;
                    for _ in 0..n {
                        let k = rem % side;
                        rem /= side;
                        parent_flat += (k >> (j_max - j)) * stride;
                        stride *= jside;
                    }
                    sums[parent_flat] += v;
                    counts[parent_flat] += 1;
                }
                let mut e = vec![0.0; cellcount];
                for (flat, slot) in e.iter_mut().enumerate() {
                    let mut rem = flat;
                    let mut parent_flat = 0usize;
                    let mut stride = 1usize;
                    for _ in 0..n {
                        let k = rem % side;
                        rem /= side;
                        parent_flat += (k >> (j_max - j)) * stride;
                        stride *= jside;
                    }
                    *slot = sums[parent_flat] / counts[parent_flat] as f64;
                }
                let g = &gammas[j - j_lo];
                multiplied.push(e.iter().zip(g).map(|(a, b)| a * b).collect());
                plain.push(e);
            }
            let den = mixed_norm(&plain, cellcount);
            if den > 0.0 {
                worst = worst.max(mixed_norm(&multiplied, cellcount) / den);
            }
        }
        Ok(worst)
    };

    let mut per_depth = Vec::new();
    for j_max in (j_lo + 1).max(1)..=j_hi {
        per_depth.push((j_max, depth_ratio(j_max, (j_max as u64) << 32)?));
    }
    let max_ratio = per_depth.last().map(|t| t.1).unwrap_or(f64::NAN);
    let slope = regression_slope(
        &per_depth
            .iter()
            .map(|(d, _)| (*d as f64) * (2f64).ln())
            .collect::<Vec<_>>(),
        &per_depth.iter().map(|(_, r)| r.ln()).collect::<Vec<_>>(),
    );
    let ok = slope.map(|s| s < 0.05).unwrap_or(false) && max_ratio.is_finite();
    Ok(MultiplierReport {
        p,
        q_exp,
        max_ratio,
        per_depth,
        slope,
        ok,
    })
}

// ---------------------------------------------------------------------------
// Dual weight.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualWeightReport {
    pub p: f64,
    #[serde(with = "crate::report::nonfinite")]
    pub ap_value: f64,
    pub ap_divergent: bool,
    /// `A_{p'}` characteristic of `W^{-p'/p}`, raised to `p/p'`.
    #[serde(with = "crate::report::nonfinite")]
    pub dual_value_scaled: f64,
    pub dual_divergent: bool,
    /// Scaled dual value over the primal value.
    #[serde(with = "crate::report::nonfinite")]
    pub comparability_ratio: f64,
    /// Per matrix sample: smallest and largest over the family of
    /// `||A_Q^{-1} M|| / (avg ||W^{-1/p} M||^{p'})^{1/p'}`.
    pub matrix_rows: Vec<(String, f64, f64)>,
    pub comparable: bool,
    pub notes: Vec<String>,
}

/// Compares the characteristic of `W` with that of the dual weight
/// `W^{-p'/p}` at the conjugate order, and checks that `||A_Q^{-1} M||`
/// matches the `p'`-average of `||W^{-1/p} M||` on sampled matrices.
pub fn dual_weight_check(
    weight: &Weight,
    p: f64,
    family: &ProbeFamily,
    cfg: &QuadratureConfig,
    seed: u64,
) -> Result<DualWeightReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "dual comparison needs p > 1, got {p}"
        )));
    }
    let pp = p / (p - 1.0);
    let mut notes = Vec::new();
    let ap = ap_characteristic(weight, p, family, cfg)?;
    let dual = weight.exponent_scaled(-pp / p)?;
    let dual_ap = ap_characteristic(&dual, pp, family, cfg)?;
    let dual_value_scaled = dual_ap.value.powf(p / pp);
    if ap.is_divergent() {
        notes.push("primal characteristic diverged; weight lies outside the class".into());
    }
    if dual_ap.is_divergent() {
        notes.push("dual characteristic diverged".into());
    }
    let mut matrix_rows = Vec::new();
    let mut comparable = !ap.is_divergent() && !dual_ap.is_divergent();
    if comparable {
        let quad = with_weight_singularities(cfg, weight);
        let mats = matrix_sample_set(weight.matrix_dim(), 3, seed);
        for (label, mat) in &mats {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for q in &family.cubes {
                let binv = reduce(weight, q, p, cfg, seed)?.inverse()?;
                let lhs = operator_norm(&(binv.matrix() * mat))?;
                let avg = cube_average(
                    |x| {
                        let v = (pp * weight.log_matrix_image(x, mat, -1.0 / p)?).exp();
                        if !v.is_finite() {
                            return Err(Error::SingularEvaluation(x.to_vec()));
                        }
                        Ok(v)
                    },
                    q,
                    &quad,
                )?;
                let rhs = avg.value.powf(1.0 / pp);
                if rhs > 0.0 {
                    let ratio = lhs / rhs;
                    lo = lo.min(ratio);
                    hi = hi.max(ratio);
                }
            }
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0) {
                comparable = false;
            }
            matrix_rows.push((label.clone(), lo, hi));
        }
    }
    let comparability_ratio = dual_value_scaled / ap.value;
    Ok(DualWeightReport {
        p,
        ap_value: ap.value,
        ap_divergent: ap.is_divergent(),
        dual_value_scaled,
        dual_divergent: dual_ap.is_divergent(),
        comparability_ratio,
        matrix_rows,
        comparable,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightSpec;

    /// Order-independent characteristic of `|x| I` on `[0, 1]`: half of
    /// Euler's number.
    const HALF_E: f64 = 1.3591409142295225;

    fn unit_cube(n: usize) -> Cube {
        Cube::from_corner(&vec![0.0; n], 1.0).unwrap()
    }

    fn single_family(q: &Cube) -> ProbeFamily {
        ProbeFamily {
            cubes: vec![q.clone()],
            description: "one cube".into(),
            seed: 0,
        }
    }

    fn family_of(cubes: Vec<Cube>) -> ProbeFamily {
        ProbeFamily {
            cubes,
            description: "hand built".into(),
            seed: 0,
        }
    }

    fn power(a: f64, n: usize) -> Weight {
        Weight::new(WeightSpec::Power { a }, n).unwrap()
    }

    fn power_times_identity(a: f64, m: usize, n: usize) -> Weight {
        Weight::new(
            WeightSpec::ScalarTimesIdentity {
                m,
                scalar: Box::new(WeightSpec::Power { a }),
            },
            n,
        )
        .unwrap()
    }

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn loose_quad() -> QuadratureConfig {
        QuadratureConfig {
            rel_tol: 1e-4,
            ..QuadratureConfig::default()
        }
    }

    #[test]
    fn box_maximal_1d_hand_values() {
        let m = box_maximal_1d(&[4.0, 2.0, 1.0]);
        assert!((m[0] - 4.0).abs() < 1e-12);
        assert!((m[1] - 3.0).abs() < 1e-12);
        assert!((m[2] - 7.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn box_maximal_2d_hand_values() {
        // Row-major 2x2 grid: row 0 is [1, 5], row 1 is [2, 2].
        let m = box_maximal_2d(&[1.0, 5.0, 2.0, 2.0], 2, 2);
        assert!((m[0] - 3.0).abs() < 1e-12);
        assert!((m[1] - 5.0).abs() < 1e-12);
        assert!((m[2] - 2.5).abs() < 1e-12);
        assert!((m[3] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn identity_weight_unit_characteristics() {
        let w = power_times_identity(0.0, 2, 1);
        let fam = single_family(&unit_cube(1));
        for p in [0.5, 2.0] {
            let ap = ap_characteristic(&w, p, &fam, &quad()).unwrap();
            assert!(!ap.is_divergent());
            assert!((ap.value - 1.0).abs() < 1e-9, "ap at p={p}: {}", ap.value);
            assert!(ap.lower_bound_flag);
        }
        let apinf = apinf_characteristic(&w, 1.0, &fam, &quad()).unwrap();
        assert!((apinf.value - 1.0).abs() < 1e-9);
        let scalar_id = power(0.0, 1);
        let fw = scalar_fujii_wilson(&scalar_id, &fam, 4, &quad()).unwrap();
        assert!((fw.value - 1.0).abs() < 1e-9);
        assert_eq!(fw.comparability_factor, Some(1.0));
        let sc = sc_characteristic(&w, 1.0, &fam, 2, 2, 4, &quad(), 7).unwrap();
        assert!((sc.matrix_variant.value - 1.0).abs() < 1e-9);
        assert!((sc.vector_variant.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn order_independent_value_matches_halved_e_oracle() {
        let w = power(1.0, 1);
        let fam = single_family(&unit_cube(1));
        for p in [0.5, 1.0, 2.0] {
            let r = apinf_characteristic(&w, p, &fam, &quad()).unwrap();
            assert!(
                (r.value - HALF_E).abs() < 1e-4,
                "p = {p}: got {}",
                r.value
            );
        }
    }

    #[test]
    fn generic_nested_path_matches_scalar_fast_path() {
        // Duplicate diagonal entries force the general eigenbasis route
        // while keeping the scalar ground truth.
        let w = Weight::new(
            WeightSpec::Diagonal {
                entries: vec![WeightSpec::Power { a: 1.0 }, WeightSpec::Power { a: 1.0 }],
            },
            1,
        )
        .unwrap();
        assert_ne!(w.eigen_structure(), EigenStructure::ScalarLike);
        let fam = single_family(&unit_cube(1));
        let r = apinf_characteristic(&w, 1.0, &fam, &loose_quad()).unwrap();
        assert!((r.value - HALF_E).abs() < 2e-3, "got {}", r.value);
    }

    #[test]
    fn ap_characteristic_power_oracles() {
        let fam = single_family(&unit_cube(1));
        // avg of x^{-1/2} is 2; the essential supremum of w^{-1} sits at
        // the right endpoint where w = 1.
        let r = ap_characteristic(&power(-0.5, 1), 1.0, &fam, &quad()).unwrap();
        assert!(!r.is_divergent());
        assert!((r.value - 2.0).abs() < 1e-3, "got {}", r.value);
        // (avg x) (avg x^{-1/2})^2 = (1/2) * 4 = 2 at p = 3.
        let r = ap_characteristic(&power(1.0, 1), 3.0, &fam, &quad()).unwrap();
        assert!(!r.is_divergent());
        assert!((r.value - 2.0).abs() < 1e-3, "got {}", r.value);
    }

    #[test]
    fn ap_flags_divergence_outside_class() {
        let fam = single_family(&unit_cube(1));
        // x^3 at p = 3 needs avg of x^{-3/2}, which diverges.
        let r = ap_characteristic(&power(3.0, 1), 3.0, &fam, &quad()).unwrap();
        assert!(r.is_divergent());
        assert!(r.value.is_infinite());
        assert_eq!(r.divergent_cubes.len(), 1);
        // x at p = 1: w^{-1} blows up along the ladder toward the origin.
        let r = ap_characteristic(&power(1.0, 1), 1.0, &fam, &quad()).unwrap();
        assert!(r.is_divergent());
    }

    #[test]
    fn esssup_ladder_handles_interior_singularity() {
        let q = Cube::new(vec![0.0], 1.0).unwrap();
        let r = ap_characteristic(&power(1.0, 1), 1.0, &single_family(&q), &quad()).unwrap();
        assert!(r.is_divergent());
    }

    #[test]
    fn scalar_a_infty_gate_and_value() {
        let fam = single_family(&unit_cube(1));
        let r = scalar_a_infty(&power(1.0, 1), &fam, &quad()).unwrap();
        assert_eq!(r.kind, CharacteristicKind::ScalarAInfty);
        assert!((r.value - HALF_E).abs() < 1e-4);
        let mixed = Weight::new(
            WeightSpec::Diagonal {
                entries: vec![WeightSpec::Power { a: 1.0 }, WeightSpec::Power { a: -0.5 }],
            },
            1,
        )
        .unwrap();
        assert!(scalar_a_infty(&mixed, &fam, &quad()).is_err());
    }

    #[test]
    fn fujii_wilson_linear_weight_oracle() {
        let fam = single_family(&unit_cube(1));
        let r = scalar_fujii_wilson(&power(1.0, 1), &fam, 7, &quad()).unwrap();
        assert!((r.value - 1.5).abs() < 2e-2, "got {}", r.value);
        assert!(r.value >= 1.0);
        // Dominated by a dimensional multiple of the order-independent
        // characteristic.
        assert!(r.value <= 2.0 * HALF_E);
    }

    #[test]
    fn fujii_wilson_2d_smoke() {
        let fam = single_family(&unit_cube(2));
        let r = scalar_fujii_wilson(&power(1.0, 2), &fam, 3, &quad()).unwrap();
        assert!(r.value >= 1.0);
        let expected = std::f64::consts::PI / 2.0;
        assert_eq!(r.comparability_factor, Some(expected));
    }

    #[test]
    fn sc_characteristic_matches_scalar_weight() {
        let w = power_times_identity(1.0, 2, 1);
        let fam = single_family(&unit_cube(1));
        let sc = sc_characteristic(&w, 1.0, &fam, 3, 3, 6, &quad(), 11).unwrap();
        assert!(
            (sc.matrix_variant.value - 1.5).abs() < 2.5e-2,
            "matrix variant {}",
            sc.matrix_variant.value
        );
        assert!(
            (sc.vector_variant.value - 1.5).abs() < 2.5e-2,
            "vector variant {}",
            sc.vector_variant.value
        );
        // The matrix supremum dominates the rank-one supremum.
        assert!(sc.matrix_variant.value >= sc.vector_variant.value - 1e-9);
    }

    #[test]
    fn compare_conditions_identity_all_one() {
        let w = power_times_identity(0.0, 2, 1);
        let r = compare_conditions(&w, 2.0, &unit_cube(1), &quad(), 3, 13).unwrap();
        assert!(r.flagged.is_empty());
        for c in &r.constants {
            assert!(
                (c.value - 1.0).abs() < 1e-6,
                "condition {}: {}",
                c.index,
                c.value
            );
        }
        assert!((r.cross_ratio - 1.0).abs() < 1e-6);
    }

    #[test]
    fn compare_conditions_power_diagonal_close() {
        let w = Weight::new(
            WeightSpec::Diagonal {
                entries: vec![WeightSpec::Power { a: 1.0 }, WeightSpec::Power { a: -0.5 }],
            },
            1,
        )
        .unwrap();
        let r = compare_conditions(&w, 2.0, &unit_cube(1), &loose_quad(), 3, 17).unwrap();
        assert!(r.flagged.is_empty(), "flagged: {:?}", r.flagged);
        assert_eq!(r.constants.len(), 7);
        for c in &r.constants {
            assert!(c.value.is_finite() && c.value > 0.0);
        }
        assert!(r.cross_ratio < 100.0, "cross ratio {}", r.cross_ratio);
    }

    #[test]
    fn functional_form_candidates_ordered() {
        let w = power(1.0, 1);
        let q = unit_cube(1);
        let cands = [
            HCandidate::InverseRoot,
            HCandidate::ReducingInverse,
            HCandidate::Mixture { threshold: 0.01 },
            HCandidate::Mixture { threshold: 10.0 },
        ];
        let r = functional_characteristic(&w, 1.0, &q, &cands, &quad(), 19).unwrap();
        assert!((r.characteristic_value - HALF_E).abs() < 1e-4);
        let vals: Vec<f64> = r.outcomes.iter().map(|o| o.value.unwrap()).collect();
        assert!((vals[0] - HALF_E).abs() < 1e-4);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        // Low threshold keeps most of the maximizer: the closed form of
        // the mixture value at threshold 0.01 is 1.3189.
        assert!((vals[2] - 1.3189).abs() < 5e-3, "mixture low {}", vals[2]);
        // High threshold collapses to the constant candidate.
        assert!((vals[3] - 1.0).abs() < 1e-2, "mixture high {}", vals[3]);
        for v in &vals {
            assert!(*v <= r.characteristic_value + 1e-6);
        }
        assert!((r.best - r.characteristic_value).abs() < 1e-6);
    }

    #[test]
    fn distributional_power_law_fraction() {
        let w = power(1.0, 1);
        let r = distributional_check(
            &w,
            1.0,
            &unit_cube(1),
            &[1.0, 3.0, 5.0],
            6,
            CALIBRATED_C,
            &quad(),
            23,
        )
        .unwrap();
        assert!(r.all_within);
        // Level set {0.5 / y >= e^3} has measure e^{-3} / 2.
        let row3 = &r.rows[1];
        assert!(
            (row3.fraction - 0.5 * (-3.0f64).exp()).abs() < 1e-3,
            "fraction {}",
            row3.fraction
        );
        assert!(row3.normalized <= 1.0 + 1e-9);
        let slope = r.decay_slope.unwrap();
        assert!(slope <= -0.9, "slope {slope}");
    }

    #[test]
    fn stopping_time_matches_dyadic_oracle() {
        let w = power(1.0, 1);
        let q = unit_cube(1);
        let r1 = stopping_time_check(&w, 1.0, &q, 1.0, 6, CALIBRATED_C, &quad(), 29).unwrap();
        assert!(
            (r1.measure_ratio - 0.25).abs() < 1e-9,
            "ratio {}",
            r1.measure_ratio
        );
        assert!(r1.within_bound);
        let r2 = stopping_time_check(&w, 1.0, &q, 2.0, 6, CALIBRATED_C, &quad(), 29).unwrap();
        assert!(
            (r2.measure_ratio - 0.125).abs() < 1e-9,
            "ratio {}",
            r2.measure_ratio
        );
        assert!(r2.measure_ratio <= r1.measure_ratio);
        assert_eq!(r1.refined_failures, 0);
    }

    #[test]
    fn integrability_sweep_finds_threshold() {
        // avg over [0, l] of (A_Q / x^2)^u diverges once 2u >= 1.
        let w = power(2.0, 1);
        let cubes = vec![
            unit_cube(1),
            Cube::from_corner(&[0.0], 0.5).unwrap(),
            Cube::from_corner(&[0.0], 0.25).unwrap(),
            Cube::from_corner(&[0.5], 0.5).unwrap(),
        ];
        let r = integrability_exponent(
            &w,
            1.0,
            &family_of(cubes),
            &[0.15, 0.3, 0.45, 0.5, 0.6],
            &quad(),
            31,
        )
        .unwrap();
        assert!((r.u_star - 0.45).abs() < 1e-12, "u* = {}", r.u_star);
        let at = |u: f64| r.rows.iter().find(|row| row.u == u).unwrap();
        assert!(at(0.45).stable);
        assert!(!at(0.5).stable);
        assert!(at(0.5).sup.is_infinite());
        assert!(!at(0.6).stable);
    }

    #[test]
    fn inclusion_strict_witness_above_one() {
        let w = power(1.0, 1);
        let cubes = vec![
            unit_cube(1),
            Cube::from_corner(&[0.0], 0.5).unwrap(),
            Cube::from_corner(&[0.5], 0.5).unwrap(),
        ];
        let r = inclusion_checks(&w, 2.0, 3.0, &family_of(cubes), &loose_quad(), 37).unwrap();
        assert!(r.ap_divergent, "|x| lies outside the order-2 class");
        assert!(r.order_p_value.is_finite());
        assert!((r.order_p_value - HALF_E).abs() < 1e-3);
        // Shared eigenbasis makes the per-cube value order-independent.
        assert!((r.inclusion_constant - 1.0).abs() < 1e-6);
        assert!(r.sharp_domination.is_none());
        assert!((r.u_star - 1.5).abs() < 1e-12, "u* = {}", r.u_star);
        let qu = r.q_union.unwrap();
        assert!((qu - (1.0 + 2.0 / 1.5)).abs() < 1e-12);
        assert_eq!(r.union_divergent, Some(false));
    }

    #[test]
    fn inclusion_sharp_domination_small_order() {
        let w = power(-0.5, 1);
        let fam = single_family(&unit_cube(1));
        let r = inclusion_checks(&w, 1.0, 2.0, &fam, &quad(), 41).unwrap();
        assert!(!r.ap_divergent);
        let dom = r.sharp_domination.unwrap();
        assert!(dom <= 1.0 + 1e-6, "domination {dom}");
        // (avg w) exp(avg ln 1/w) = 2 e^{-1/2} against the A_1 value 2.
        assert!((dom - (-0.5f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn reverse_holder_linear_weight_closed_form() {
        let w = power(1.0, 1);
        let fam = single_family(&unit_cube(1));
        let r = reverse_holder_check(&w, 1.0, 1.5, 2, &fam, &quad(), 43).unwrap();
        assert!((r.endpoint_r - 1.2).abs() < 1e-12);
        assert!(r.all_ok);
        assert!(r.flagged.is_empty());
        for row in r.rows.iter().filter(|row| row.sample == "identity") {
            let lhs_expected = 1.0 / (1.0 + row.r);
            let rhs_expected = 2.0 * 2f64.powf(-row.r);
            assert!((row.lhs - lhs_expected).abs() < 1e-3);
            assert!((row.rhs - rhs_expected).abs() < 1e-3);
        }
        assert!(r.reducing_sup >= 1.0 - 1e-9 && r.reducing_sup <= 2.0);
        assert!(r.dyadic_maximal_sup.is_finite() && r.dyadic_maximal_sup <= 4.0);
    }

    #[test]
    fn reverse_holder_flags_underestimated_characteristic() {
        // Pretending the scalar-reduction characteristic is 1.01 pushes
        // the endpoint exponent past integrability of x^{-0.8}.
        let w = power(-0.8, 1);
        let fam = single_family(&unit_cube(1));
        let r = reverse_holder_check(&w, 1.0, 1.01, 1, &fam, &quad(), 47).unwrap();
        assert!(!r.flagged.is_empty());
        assert!(!r.all_ok);
    }

    #[test]
    fn multiplier_bound_identity_and_scalar() {
        let id = power_times_identity(0.0, 2, 1);
        let r = multiplier_bound_check(&id, 2.0, 2.0, 1..=4, 2, &quad(), 53).unwrap();
        assert!(r.max_ratio <= 1.0 + 1e-9);
        assert!(r.ok);
        let w = power(0.5, 1);
        for q_exp in [1.0, 2.0, f64::INFINITY] {
            let r = multiplier_bound_check(&w, 2.0, q_exp, 1..=5, 3, &quad(), 53).unwrap();
            assert!(r.max_ratio.is_finite() && r.max_ratio < 10.0);
            assert!(r.ok, "q = {q_exp}: slope {:?}", r.slope);
        }
    }

    #[test]
    fn dual_weight_scalar_equality() {
        let w = power(1.0, 1);
        let cubes = vec![unit_cube(1), Cube::from_corner(&[0.5], 0.5).unwrap()];
        let r = dual_weight_check(&w, 3.0, &family_of(cubes), &quad(), 59).unwrap();
        assert!(!r.ap_divergent && !r.dual_divergent);
        // Scalar identity: the scaled dual characteristic equals the
        // primal one exactly.
        assert!(
            (r.comparability_ratio - 1.0).abs() < 2e-3,
            "ratio {}",
            r.comparability_ratio
        );
        assert!((r.ap_value - 2.0).abs() < 2e-3);
        assert!(r.comparable);
        for (label, lo, hi) in &r.matrix_rows {
            assert!(*lo > 0.2 && *hi < 5.0, "{label}: [{lo}, {hi}]");
        }
    }

    #[test]
    fn dual_weight_expected_divergence() {
        // a = n p / p' puts the weight on the boundary exponent where
        // both the primal and dual averages blow up.
        let w = power(2.0, 1);
        let fam = single_family(&unit_cube(1));
        let r = dual_weight_check(&w, 3.0, &fam, &quad(), 61).unwrap();
        assert!(r.ap_divergent);
        assert!(r.dual_divergent);
        assert!(!r.comparable);
        assert!(!r.notes.is_empty());
    }

    #[test]
    fn report_maximum_grows_with_family() {
        let w = Weight::new(
            WeightSpec::Diagonal {
                entries: vec![WeightSpec::Power { a: 1.0 }, WeightSpec::Power { a: -0.5 }],
            },
            1,
        )
        .unwrap();
        let small = family_of(vec![Cube::from_corner(&[0.5], 0.5).unwrap()]);
        let large = family_of(vec![
            Cube::from_corner(&[0.5], 0.5).unwrap(),
            unit_cube(1),
        ]);
        let cfg = loose_quad();
        let a = apinf_characteristic(&w, 1.0, &small, &cfg).unwrap();
        let b = apinf_characteristic(&w, 1.0, &large, &cfg).unwrap();
        assert!(b.value >= a.value - 1e-12);
        assert_eq!(b.per_cube.len(), 2);
        assert!(b.value >= 1.0 - 1e-9);
    }
}
