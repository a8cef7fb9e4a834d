//! Experiment configuration: one TOML document describing the weight, the
//! orders, the probe family, the quadrature accuracy, and output routing.
//!
//! Every run-affecting choice lives in this document (or in the explicit
//! command-line overrides applied to it), so re-running a config reproduces
//! the report payload byte for byte.

use crate::geometry::{probe_family, ProbeFamily};
use crate::quadrature::QuadratureConfig;
use crate::weights::{Weight, WeightSpec};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// The weight under study: spec fields flattened next to the ambient
/// dimension, so the TOML section reads
/// `[weight] kind = "power", a = 1.0, n = 1`.
///
/// Numeric spec fields pass through a self-describing layer, so real-valued
/// parameters must be written with a decimal point (`a = 1.0`, not `a = 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightDoc {
    /// Ambient dimension of `R^n`.
    #[serde(default = "default_ambient")]
    pub n: usize,
    #[serde(flatten)]
    pub spec: WeightSpec,
}

fn default_ambient() -> usize {
    1
}

/// Order(s) `p`: a single value or a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Orders {
    One(f64),
    Many(Vec<f64>),
}

impl Default for Orders {
    fn default() -> Self {
        Orders::One(2.0)
    }
}

impl Orders {
    /// The configured orders, validated positive and finite.
    pub fn values(&self) -> Result<Vec<f64>> {
        let ps = match self {
            Orders::One(p) => vec![*p],
            Orders::Many(ps) => ps.clone(),
        };
        if ps.is_empty() {
            return Err(Error::Config("no orders configured".into()));
        }
        for p in &ps {
            if !(*p > 0.0 && p.is_finite()) {
                return Err(Error::Config(format!("order p = {p} must be positive")));
            }
        }
        Ok(ps)
    }
}

/// Probe family over the symmetric box `[-box, box]^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyConfig {
    /// Half-width of the bounding box.
    #[serde(rename = "box")]
    pub half_width: f64,
    /// Coarsest dyadic level (negative levels give cubes larger than unit).
    pub jmin: i32,
    /// Finest dyadic level.
    pub jmax: i32,
    /// Number of seeded off-lattice cubes.
    pub extras: usize,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            half_width: 4.0,
            jmin: -2,
            jmax: 3,
            extras: 8,
        }
    }
}

/// Quadrature accuracy knobs, mapped onto [`QuadratureConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureDoc {
    /// Base subdivisions per axis.
    pub subdiv: usize,
    /// Maximum refinement depth below the base grid.
    pub depth: usize,
    /// Relative tolerance on averaged values.
    pub tol: f64,
    /// Absolute tolerance floor, for averaged logarithms that cross zero.
    pub abs_tol: f64,
}

impl Default for QuadratureDoc {
    fn default() -> Self {
        let d = QuadratureConfig::default();
        Self {
            subdiv: d.base_subdivisions_per_axis,
            depth: d.max_refine_depth,
            tol: d.rel_tol,
            abs_tol: d.abs_tol,
        }
    }
}

/// Where and how the report is written when the command line does not say.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputDoc {
    /// Destination file; standard output when absent.
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

/// Report serialization format.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::Config(format!(
                "unknown output format {other:?} (expected json or csv)"
            ))),
        }
    }
}

/// Top-level experiment configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub weight: WeightDoc,
    #[serde(default)]
    pub p: Orders,
    #[serde(default)]
    pub family: FamilyConfig,
    #[serde(default)]
    pub quadrature: QuadratureDoc,
    /// Root seed for every random choice in the run.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputDoc,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Minimal config for a given weight spec, with library defaults
    /// everywhere else.
    pub fn for_weight(spec: WeightSpec, n: usize) -> Self {
        Self {
            weight: WeightDoc { n, spec },
            p: Orders::default(),
            family: FamilyConfig::default(),
            quadrature: QuadratureDoc::default(),
            seed: 0,
            output: OutputDoc::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weight()?;
        self.p.values()?;
        self.quadrature()?;
        let f = &self.family;
        if !(f.half_width > 0.0 && f.half_width.is_finite()) {
            return Err(Error::Config(format!(
                "family box half-width {} must be positive",
                f.half_width
            )));
        }
        if f.jmin > f.jmax {
            return Err(Error::Config(format!(
                "family levels jmin = {} > jmax = {}",
                f.jmin, f.jmax
            )));
        }
        Ok(())
    }

    /// The validated weight.
    pub fn weight(&self) -> Result<Weight> {
        Weight::new(self.weight.spec.clone(), self.weight.n)
    }

    /// The probe family described by the `family` section, anchored at the
    /// weight's singular points.
    pub fn probe_family(&self, weight: &Weight) -> Result<ProbeFamily> {
        let n = weight.n;
        let b = self.family.half_width;
        probe_family(
            &vec![-b; n],
            &vec![b; n],
            self.family.jmin,
            self.family.jmax,
            &weight.singular_points(),
            self.family.extras,
            self.seed,
        )
    }

    /// The validated quadrature configuration.
    pub fn quadrature(&self) -> Result<QuadratureConfig> {
        let q = &self.quadrature;
        let cfg = QuadratureConfig {
            base_subdivisions_per_axis: q.subdiv,
            max_refine_depth: q.depth,
            rel_tol: q.tol,
            abs_tol: q.abs_tol,
            singular_points: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Command-line overrides; `None` keeps the configured value.
    pub fn apply_overrides(&mut self, seed: Option<u64>, tol: Option<f64>) -> Result<()> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(t) = tol {
            self.quadrature.tol = t;
        }
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
        p = [1.0, 2.0]
        seed = 42

        [weight]
        kind = "log_out"
        a = -0.5
        b = 1.0
        n = 1

        [family]
        box = 2.0
        jmin = 0
        jmax = 2
        extras = 3

        [quadrature]
        subdiv = 8
        depth = 10
        tol = 1e-5

        [output]
        path = "out.json"
        format = "csv"
    "#;

    #[test]
    fn full_document_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(FULL).unwrap();
        assert_eq!(cfg.weight.n, 1);
        assert_eq!(
            cfg.weight.spec,
            WeightSpec::LogOut { a: -0.5, b: 1.0 }
        );
        assert_eq!(cfg.p.values().unwrap(), vec![1.0, 2.0]);
        assert_eq!(cfg.family.half_width, 2.0);
        assert_eq!(cfg.family.extras, 3);
        assert_eq!(cfg.quadrature.tol, 1e-5);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.output.format, OutputFormat::Csv);
        assert_eq!(cfg.output.path.as_deref(), Some(Path::new("out.json")));

        let json_a = serde_json::to_string(&cfg).unwrap();
        let json_b = serde_json::to_string(&ExperimentConfig::from_toml_str(FULL).unwrap()).unwrap();
        assert_eq!(json_a, json_b);
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "[weight]\nkind = \"power\"\na = 1.0\n",
        )
        .unwrap();
        assert_eq!(cfg.weight.n, 1);
        assert_eq!(cfg.p.values().unwrap(), vec![2.0]);
        assert_eq!(cfg.family.half_width, 4.0);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.output.format, OutputFormat::Json);
        assert!(cfg.output.path.is_none());
        let quad = cfg.quadrature().unwrap();
        assert_eq!(quad.rel_tol, 1e-6);
    }

    #[test]
    fn nested_weight_specs_parse() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [weight]
            kind = "scalar_times_identity"
            m = 2
            n = 1
            [weight.scalar]
            kind = "power"
            a = 1.0
            "#,
        )
        .unwrap();
        let w = cfg.weight().unwrap();
        assert_eq!(w.matrix_dim(), 2);
    }

    #[test]
    fn family_section_builds_probe_family() {
        let cfg = ExperimentConfig::from_toml_str(
            "[weight]\nkind = \"power\"\na = -0.5\n\n[family]\nbox = 1.0\njmin = 0\njmax = 1\nextras = 2\n",
        )
        .unwrap();
        let w = cfg.weight().unwrap();
        let fam_a = cfg.probe_family(&w).unwrap();
        let fam_b = cfg.probe_family(&w).unwrap();
        assert!(!fam_a.is_empty());
        assert_eq!(fam_a.cubes.len(), fam_b.cubes.len());
        for (a, b) in fam_a.cubes.iter().zip(&fam_b.cubes) {
            assert_eq!(a.center, b.center);
            assert_eq!(a.edge, b.edge);
        }
    }

    #[test]
    fn invalid_documents_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("[weight]\nkind = \"nope\"\n").is_err());
        assert!(ExperimentConfig::from_toml_str(
            "p = -2.0\n[weight]\nkind = \"power\"\na = 1.0\n"
        )
        .is_err());
        assert!(ExperimentConfig::from_toml_str(
            "[weight]\nkind = \"power\"\na = 1.0\n\n[family]\njmin = 3\njmax = 1\n"
        )
        .is_err());
        assert!(ExperimentConfig::from_toml_str(
            "[weight]\nkind = \"power\"\na = 1.0\n\n[quadrature]\ntol = -1.0\n"
        )
        .is_err());
    }

    #[test]
    fn overrides_replace_seed_and_tolerance() {
        let mut cfg = ExperimentConfig::from_toml_str(
            "seed = 7\n[weight]\nkind = \"power\"\na = 1.0\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        cfg.apply_overrides(Some(11), Some(1e-4)).unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.quadrature.tol, 1e-4);
        assert!(cfg.apply_overrides(None, Some(-1.0)).is_err());
    }
}
