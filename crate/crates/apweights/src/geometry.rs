//! Cubes, dyadic lattices, and probe families.
//!
//! All cubes are axis-parallel with half-open realization `[a, a+l)^n`, so
//! dyadic cubes of a fixed level tile space without overlap. A probe family
//! is the finite set of cubes over which suprema are taken; reported
//! characteristics are therefore certified lower bounds.

use crate::rng::{stream, Purpose};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Axis-parallel cube given by center and edge length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub edge: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, edge: f64) -> Result<Self> {
        if !(edge > 0.0 && edge.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cube edge {edge} must be positive and finite"
            )));
        }
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bad cube center {center:?}"
            )));
        }
        Ok(Self { center, edge })
    }

    /// Cube from its lower corner.
    pub fn from_corner(corner: &[f64], edge: f64) -> Result<Self> {
        let center = corner.iter().map(|c| c + edge / 2.0).collect();
        Self::new(center, edge)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn lower_corner(&self) -> Vec<f64> {
        self.center.iter().map(|c| c - self.edge / 2.0).collect()
    }

    pub fn upper_corner(&self) -> Vec<f64> {
        self.center.iter().map(|c| c + self.edge / 2.0).collect()
    }

    pub fn volume(&self) -> f64 {
        self.edge.powi(self.dim() as i32)
    }

    /// Membership in the half-open realization `[a, a+l)^n`.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower_corner()).all(|(xi, lo)| *xi >= lo)
            && x.iter()
                .zip(self.upper_corner())
                .all(|(xi, hi)| *xi < hi)
    }

    /// Distance from a point to the closed cube (zero inside).
    pub fn distance_to(&self, x: &[f64]) -> f64 {
        let lo = self.lower_corner();
        let hi = self.upper_corner();
        x.iter()
            .enumerate()
            .map(|(i, xi)| (lo[i] - xi).max(xi - hi[i]).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// The `2^n` dyadic children of this cube.
    pub fn dyadic_children(&self) -> Vec<Cube> {
        let n = self.dim();
        let half = self.edge / 2.0;
        let lo = self.lower_corner();
        (0..(1usize << n))
            .map(|mask| {
                let corner: Vec<f64> = (0..n)
                    .map(|i| lo[i] + if mask >> i & 1 == 1 { half } else { 0.0 })
                    .collect();
                Cube::from_corner(&corner, half).expect("child edge positive")
            })
            .collect()
    }
}

/// Concentric dilation by `lambda > 0`.
pub fn dilate(q: &Cube, lambda: f64) -> Result<Cube> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "dilation factor {lambda} must be positive"
        )));
    }
    Cube::new(q.center.clone(), q.edge * lambda)
}

/// `1 + |c_Q - c_R| / max(l(Q), l(R))`, the normalized center separation.
pub fn separation_factor(q: &Cube, r: &Cube) -> Result<f64> {
    if q.dim() != r.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cube dims {} vs {}",
            q.dim(),
            r.dim()
        )));
    }
    let dist: f64 = q
        .center
        .iter()
        .zip(&r.center)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(1.0 + dist / q.edge.max(r.edge))
}

/// Index of the dyadic cube `prod_i 2^{-j} [k_i, k_i + 1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicIndex {
    pub level: i32,
    pub position: Vec<i64>,
}

impl DyadicIndex {
    pub fn cube(&self) -> Cube {
        let scale = (-self.level as f64).exp2();
        let center = self
            .position
            .iter()
            .map(|&k| (k as f64 + 0.5) * scale)
            .collect();
        Cube {
            center,
            edge: scale,
        }
    }

    /// Index of the dyadic cube of this level containing `x`.
    pub fn containing(x: &[f64], level: i32) -> Self {
        let inv = (level as f64).exp2();
        DyadicIndex {
            level,
            position: x.iter().map(|xi| (xi * inv).floor() as i64).collect(),
        }
    }

    pub fn parent(&self) -> DyadicIndex {
        DyadicIndex {
            level: self.level - 1,
            position: self.position.iter().map(|k| k.div_euclid(2)).collect(),
        }
    }
}

/// Finite cube family used in place of suprema over all cubes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeFamily {
    pub cubes: Vec<Cube>,
    pub description: String,
    pub seed: u64,
}

impl ProbeFamily {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }
}

/// Builds the probe family for a bounding box `[lo, hi]^n`:
///
/// * every dyadic lattice cube of levels `j_min..=j_max` contained in the
///   box (levels may be negative, giving cubes larger than unit),
/// * for each singular point and level, the cube centered there plus the
///   `2^n` corner-anchored cubes touching it,
/// * `extras` off-lattice cubes with seeded random centers and log-uniform
///   random edges.
///
/// Duplicates are removed; an empty result is a configuration error.
pub fn probe_family(
    lo: &[f64],
    hi: &[f64],
    j_min: i32,
    j_max: i32,
    singular_points: &[Vec<f64>],
    extras: usize,
    seed: u64,
) -> Result<ProbeFamily> {
    let n = lo.len();
    if n == 0 || hi.len() != n {
        return Err(Error::Config(format!(
            "bounding box dims {} vs {}",
            lo.len(),
            hi.len()
        )));
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
        return Err(Error::Config(format!("empty bounding box {lo:?}..{hi:?}")));
    }
    if j_min > j_max {
        return Err(Error::Config(format!("level range {j_min}..{j_max} empty")));
    }
    let mut cubes: Vec<Cube> = Vec::new();

    // Lattice cubes fully inside the box. The tolerance absorbs round-off
    // from boxes whose corners are themselves dyadic.
    for j in j_min..=j_max {
        let scale = (-(j as f64)).exp2();
        let tol = 1e-12 * scale;
        let mut ranges: Vec<(i64, i64)> = Vec::with_capacity(n);
        for i in 0..n {
            let kmin = ((lo[i] - tol) / scale).ceil() as i64;
            let kmax = ((hi[i] + tol) / scale).floor() as i64 - 1;
            ranges.push((kmin, kmax));
        }
        if ranges.iter().any(|(a, b)| a > b) {
            continue;
        }
        let mut pos = ranges.iter().map(|(a, _)| *a).collect::<Vec<i64>>();
        'lattice: loop {
            cubes.push(
                DyadicIndex {
                    level: j,
                    position: pos.clone(),
                }
                .cube(),
            );
            for i in 0..n {
                pos[i] += 1;
                if pos[i] <= ranges[i].1 {
                    continue 'lattice;
                }
                pos[i] = ranges[i].0;
            }
            break;
        }
    }

    // Singular-point cubes: centered and corner-anchored at every level.
    for s in singular_points {
        if s.len() != n {
            return Err(Error::Config(format!(
                "singular point {s:?} has wrong dimension"
            )));
        }
        for j in j_min..=j_max {
            let edge = (-(j as f64)).exp2();
            cubes.push(Cube::new(s.clone(), edge)?);
            for mask in 0..(1usize << n) {
                let corner: Vec<f64> = (0..n)
                    .map(|i| s[i] - if mask >> i & 1 == 1 { edge } else { 0.0 })
                    .collect();
                cubes.push(Cube::from_corner(&corner, edge)?);
            }
        }
    }

    // Off-lattice cubes break any alignment between the family and the
    // dyadic grid of the weight's singularities.
    let mut rng = stream(seed, Purpose::ProbeCubes, 0);
    let min_edge = (-(j_max as f64)).exp2();
    let max_edge = (-(j_min as f64)).exp2();
    for _ in 0..extras {
        let t: f64 = rng.gen();
        let edge = min_edge * (max_edge / min_edge).powf(t);
        let center: Vec<f64> = (0..n)
            .map(|i| lo[i] + rng.gen::<f64>() * (hi[i] - lo[i]))
            .collect();
        cubes.push(Cube::new(center, edge)?);
    }

    // Dedupe on quantized coordinates.
    let mut seen = std::collections::HashSet::new();
    cubes.retain(|c| {
        let key: Vec<u64> = c
            .center
            .iter()
            .chain(std::iter::once(&c.edge))
            .map(|v| (v * 1e14).round() as i64 as u64)
            .collect();
        seen.insert(key)
    });

    if cubes.is_empty() {
        return Err(Error::Config(
            "probe family is empty; widen the box or level range".into(),
        ));
    }
    Ok(ProbeFamily {
        cubes,
        description: format!(
            "box {lo:?}..{hi:?}, levels {j_min}..={j_max}, {} singular points, {extras} off-lattice",
            singular_points.len()
        ),
        seed,
    })
}
