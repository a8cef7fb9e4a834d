//! Versioned report documents: a schema tag, the config echo, computed
//! results, assertion outcomes, and timing, plus a flat CSV projection
//! and a merge operation over same-schema reports.
//!
//! The payload (schema, config, results, assertions) of a run is a pure
//! function of its configuration: rerunning the same config byte-for-byte
//! reproduces it. Run metadata that legitimately varies (timestamps, wall
//! time, thread count) lives in the `header` and `timing` fields, outside
//! the payload.

use crate::characteristics::{
    CharacteristicReport, DistributionalReport, DualWeightReport, EquivalenceReport,
    FunctionalReport, InclusionReport, IntegrabilityReport, MultiplierReport,
    ReverseHolderReport, ScAlternatives, StoppingTimeReport,
};
use crate::dimensions::{
    AttainmentReport, DimensionClassReport, DimensionEstimate, EquivalentQuantities,
    SharpEstimateReport, SharpnessFit,
};
use crate::reducing::{ReducingOperator, ReductionMethod};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Schema tag carried by every report this crate writes.
pub const REPORT_SCHEMA: &str = "apweights.report.v1";

/// Serde adapter for `f64` values that may be infinite (a divergent
/// supremum): JSON has no non-finite numbers, so those serialize as
/// strings and round-trip losslessly.
pub mod nonfinite {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("bad numeric string {other:?}"))),
            },
        }
    }
}

/// Run metadata allowed to differ between byte-identical payloads.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Header {
    /// Seconds since the Unix epoch at report creation, when known.
    pub created_unix: Option<u64>,
    /// Producing tool and version.
    pub tool: String,
}

impl Header {
    pub fn now() -> Self {
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        Header {
            created_unix: created,
            tool: format!("apweights {}", env!("CARGO_PKG_VERSION")),
        }
    }
}

/// Wall-clock accounting, outside the deterministic payload.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_ms: u64,
    pub jobs: Option<usize>,
}

/// One verified statement: what was checked and what happened. Failing
/// assertions carry the full serialized object they failed on.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<serde_json::Value>,
}

impl Assertion {
    pub fn passed(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Assertion {
            name: name.into(),
            passed: true,
            detail: detail.into(),
            context: None,
        }
    }

    pub fn failed<T: Serialize>(
        name: impl Into<String>,
        detail: impl Into<String>,
        context: &T,
    ) -> Self {
        Assertion {
            name: name.into(),
            passed: false,
            detail: detail.into(),
            context: serde_json::to_value(context).ok(),
        }
    }

    /// Builds from a checked condition, serializing `context` on failure.
    pub fn check<T: Serialize>(
        name: impl Into<String>,
        ok: bool,
        detail: impl Into<String>,
        context: &T,
    ) -> Self {
        if ok {
            Assertion::passed(name, detail)
        } else {
            Assertion::failed(name, detail, context)
        }
    }
}

/// Serializable projection of a [`ReducingOperator`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReductionResult {
    pub cube: crate::geometry::Cube,
    pub p: f64,
    /// Row-major complex entries `[re, im]`.
    pub matrix: Vec<Vec<[f64; 2]>>,
    pub method: String,
    pub c_low: f64,
    pub c_high: f64,
    pub nodes_used: usize,
}

impl From<&ReducingOperator> for ReductionResult {
    fn from(op: &ReducingOperator) -> Self {
        let m = op.matrix.matrix();
        let matrix = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .map(|j| {
                        let z = m[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        let method = match op.method {
            ReductionMethod::ScalarAverage => "scalar_average",
            ReductionMethod::ExactOrderTwo => "exact_order_two",
            ReductionMethod::Ellipsoid => "ellipsoid",
        };
        ReductionResult {
            cube: op.cube.clone(),
            p: op.p,
            matrix,
            method: method.into(),
            c_low: op.c_low,
            c_high: op.c_high,
            nodes_used: op.nodes_used,
        }
    }
}

/// One computed result, tagged by what produced it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ResultEntry {
    Characteristic(CharacteristicReport),
    Sc(ScAlternatives),
    Reduction(ReductionResult),
    Equivalence(EquivalenceReport),
    Functional(FunctionalReport),
    Distributional(DistributionalReport),
    StoppingTime(StoppingTimeReport),
    Integrability(IntegrabilityReport),
    Inclusion(InclusionReport),
    ReverseHolder(ReverseHolderReport),
    Multiplier(MultiplierReport),
    DualWeight(DualWeightReport),
    Dimension(DimensionEstimate),
    Attainment(AttainmentReport),
    SharpEstimate(SharpEstimateReport),
    SharpnessFit(SharpnessFit),
    ClassProperties(DimensionClassReport),
    Quantities(EquivalentQuantities),
}

/// A result entry under a human-readable label.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabeledResult {
    pub label: String,
    #[serde(flatten)]
    pub entry: ResultEntry,
}

/// The deterministic part of a report.
#[derive(Serialize)]
struct Payload<'a> {
    schema: &'a str,
    config: &'a serde_json::Value,
    results: &'a [LabeledResult],
    assertions: &'a [Assertion],
}

/// A full report document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub header: Header,
    /// Echo of the experiment configuration that produced the results.
    pub config: serde_json::Value,
    pub results: Vec<LabeledResult>,
    pub assertions: Vec<Assertion>,
    pub timing: Timing,
}

impl Report {
    pub fn new(config: serde_json::Value) -> Self {
        Report {
            schema: REPORT_SCHEMA.into(),
            header: Header::now(),
            config,
            results: Vec::new(),
            assertions: Vec::new(),
            timing: Timing::default(),
        }
    }

    pub fn push(&mut self, label: impl Into<String>, entry: ResultEntry) {
        self.results.push(LabeledResult {
            label: label.into(),
            entry,
        });
    }

    /// True when every assertion passed (vacuously true without any).
    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    /// The deterministic payload: everything except header and timing.
    /// Identical configurations produce identical payload bytes.
    pub fn payload_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Payload {
            schema: &self.schema,
            config: &self.config,
            results: &self.results,
            assertions: &self.assertions,
        })?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Flat projection for plotting: one `record,label,p,x,y,detail` row
    /// per scale point, per-cube value, fitted slope, or assertion.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("record,label,p,x,y,detail\n");
        for r in &self.results {
            entry_csv(&mut out, &r.label, &r.entry);
        }
        for a in &self.assertions {
            row(
                &mut out,
                "assertion",
                &a.name,
                None,
                None,
                Some(if a.passed { 1.0 } else { 0.0 }),
                &a.detail,
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::from("inf")
    }
}

fn row(
    out: &mut String,
    record: &str,
    label: &str,
    p: Option<f64>,
    x: Option<f64>,
    y: Option<f64>,
    detail: &str,
) {
    let p = p.map(num).unwrap_or_default();
    let x = x.map(num).unwrap_or_default();
    let y = y.map(num).unwrap_or_default();
    let _ = writeln!(
        out,
        "{},{},{},{},{},{}",
        record,
        csv_field(label),
        p,
        x,
        y,
        csv_field(detail)
    );
}

fn cube_str(c: &crate::geometry::Cube) -> String {
    format!("cube center {:?} edge {}", c.center, c.edge)
}

fn characteristic_csv(out: &mut String, label: &str, c: &CharacteristicReport) {
    for pc in &c.per_cube {
        row(
            out,
            "characteristic_cube",
            label,
            Some(c.p),
            Some(pc.cube.edge),
            Some(pc.value),
            &cube_str(&pc.cube),
        );
    }
    let detail = if c.is_divergent() {
        format!("divergent on {}", cube_str(&c.argmax_cube))
    } else {
        format!("argmax {}", cube_str(&c.argmax_cube))
    };
    row(
        out,
        "characteristic",
        label,
        Some(c.p),
        None,
        Some(c.value),
        &detail,
    );
}

fn entry_csv(out: &mut String, label: &str, entry: &ResultEntry) {
    match entry {
        ResultEntry::Characteristic(c) => characteristic_csv(out, label, c),
        ResultEntry::Sc(sc) => {
            characteristic_csv(out, &format!("{label} (matrix images)"), &sc.matrix_variant);
            characteristic_csv(out, &format!("{label} (vector images)"), &sc.vector_variant);
        }
        ResultEntry::Reduction(rr) => {
            let detail = format!("method {}; c_low {}", rr.method, num(rr.c_low));
            row(out, "reduction", label, Some(rr.p), None, Some(rr.c_high), &detail);
        }
        ResultEntry::Equivalence(eq) => {
            for c in &eq.constants {
                row(
                    out,
                    "equivalence_condition",
                    label,
                    Some(eq.p),
                    Some(c.index as f64),
                    Some(c.value),
                    &c.label,
                );
            }
            row(
                out,
                "equivalence",
                label,
                Some(eq.p),
                None,
                Some(eq.cross_ratio),
                &format!("{} flagged", eq.flagged.len()),
            );
        }
        ResultEntry::Functional(f) => {
            row(
                out,
                "functional",
                label,
                Some(f.p),
                None,
                Some(f.best),
                &format!("per-cube characteristic {}", num(f.characteristic_value)),
            );
        }
        ResultEntry::Distributional(d) => {
            for r in &d.rows {
                row(
                    out,
                    "distributional_level",
                    label,
                    Some(d.p),
                    Some(r.level),
                    Some(r.fraction),
                    &format!("bound {}", num(r.bound)),
                );
            }
            row(
                out,
                "distributional",
                label,
                Some(d.p),
                None,
                d.decay_slope,
                &format!("all_within {}", d.all_within),
            );
        }
        ResultEntry::StoppingTime(s) => {
            row(
                out,
                "stopping_time",
                label,
                Some(s.p),
                Some(s.level),
                Some(s.measure_ratio),
                &format!("bound {}; within {}", num(s.bound), s.within_bound),
            );
        }
        ResultEntry::Integrability(i) => {
            for r in &i.rows {
                row(
                    out,
                    "integrability_exponent",
                    label,
                    Some(i.p),
                    Some(r.u),
                    Some(r.sup),
                    &format!("stable {}", r.stable),
                );
            }
            row(out, "integrability", label, Some(i.p), None, Some(i.u_star), "u_star");
        }
        ResultEntry::Inclusion(i) => {
            row(
                out,
                "inclusion",
                label,
                Some(i.p),
                Some(i.q_order),
                Some(i.inclusion_constant),
                &format!(
                    "value {} at p, {} at q",
                    num(i.order_p_value),
                    num(i.order_q_value)
                ),
            );
        }
        ResultEntry::ReverseHolder(r) => {
            row(
                out,
                "reverse_holder",
                label,
                Some(r.p),
                Some(r.endpoint_r),
                Some(r.reducing_sup),
                &format!("all_ok {}; {} flagged", r.all_ok, r.flagged.len()),
            );
        }
        ResultEntry::Multiplier(m) => {
            for (depth, ratio) in &m.per_depth {
                row(
                    out,
                    "multiplier_depth",
                    label,
                    Some(m.p),
                    Some(*depth as f64),
                    Some(*ratio),
                    "",
                );
            }
            row(
                out,
                "multiplier",
                label,
                Some(m.p),
                Some(m.q_exp),
                Some(m.max_ratio),
                &format!("ok {}", m.ok),
            );
        }
        ResultEntry::DualWeight(d) => {
            row(
                out,
                "dual_weight",
                label,
                Some(d.p),
                None,
                Some(d.comparability_ratio),
                &format!("comparable {}", d.comparable),
            );
        }
        ResultEntry::Dimension(d) => {
            for s in &d.per_scale {
                row(
                    out,
                    "dimension_point",
                    label,
                    None,
                    Some(s.lambda),
                    Some(s.log_value.exp()),
                    "",
                );
            }
            row(
                out,
                "dimension_fit",
                label,
                None,
                None,
                Some(d.d_hat),
                &format!(
                    "residual_max {}; attained {}",
                    num(d.residual_max),
                    d.attained
                ),
            );
        }
        ResultEntry::Attainment(a) => {
            for (k, c) in a.curves.iter().enumerate() {
                for s in &c.per_scale {
                    row(
                        out,
                        "attainment_point",
                        &format!("{label} curve {k}"),
                        None,
                        Some(s.lambda),
                        Some(s.log_value.exp()),
                        "",
                    );
                }
            }
            row(
                out,
                "attainment",
                label,
                None,
                Some(a.d_reference),
                Some(a.max_drawup),
                &format!("attained {}", a.attained),
            );
        }
        ResultEntry::SharpEstimate(s) => {
            for (k, pair) in s.pairs.iter().enumerate() {
                row(
                    out,
                    "sharp_pair",
                    label,
                    Some(s.p),
                    Some(k as f64),
                    Some(pair.ratio),
                    "",
                );
            }
            row(
                out,
                "sharp_estimate",
                label,
                Some(s.p),
                None,
                Some(s.max_ratio),
                &format!("{} pairs, {} skipped", s.pairs.len(), s.skipped),
            );
        }
        ResultEntry::SharpnessFit(f) => {
            let detail = format!(
                "floors d1 {}, d2 {}, d1+d2 {}; bounds_ok {}",
                num(f.d1),
                num(f.d2),
                num(f.d1 + f.d2),
                f.bounds_ok
            );
            row(out, "sharpness_fit_a", label, Some(f.p), None, Some(f.a_fit), &detail);
            row(out, "sharpness_fit_b", label, Some(f.p), None, Some(f.b_fit), &detail);
            row(out, "sharpness_fit_c", label, Some(f.p), None, Some(f.c_fit), &detail);
        }
        ResultEntry::ClassProperties(c) => {
            row(
                out,
                "class_properties",
                label,
                Some(c.p),
                Some(c.r_exponent),
                Some(c.apinf_value),
                &format!("all_ok {}", c.all_ok),
            );
        }
        ResultEntry::Quantities(q) => {
            row(
                out,
                "equivalent_quantities",
                label,
                None,
                None,
                Some(q.max_over_min),
                &format!(
                    "operator {}; avg_of_logavg {}; logavg_of_avg {}",
                    num(q.operator_form),
                    num(q.avg_of_logavg),
                    num(q.logavg_of_avg)
                ),
            );
        }
    }
}

/// Merges same-schema reports: results and assertions concatenate, except
/// that characteristic entries sharing a label, kind, and order fuse into
/// one entry whose per-cube column is the union and whose value and argmax
/// are recomputed over it. Merging a single report reproduces it.
pub fn merge_reports(reports: Vec<Report>) -> Result<Report> {
    if reports.is_empty() {
        return Err(Error::Config("nothing to merge".into()));
    }
    let schema = reports[0].schema.clone();
    if let Some(bad) = reports.iter().find(|r| r.schema != schema) {
        return Err(Error::Config(format!(
            "schema mismatch: {} vs {}",
            schema, bad.schema
        )));
    }
    let configs: Vec<&serde_json::Value> = reports.iter().map(|r| &r.config).collect();
    let config = if configs.windows(2).all(|w| w[0] == w[1]) {
        configs[0].clone()
    } else {
        serde_json::Value::Array(configs.into_iter().cloned().collect())
    };

    let mut results: Vec<LabeledResult> = Vec::new();
    let mut assertions = Vec::new();
    let mut wall_ms = 0u64;
    let mut jobs = None;
    for rep in reports {
        wall_ms += rep.timing.wall_ms;
        jobs = jobs.or(rep.timing.jobs);
        assertions.extend(rep.assertions);
        for r in rep.results {
            let merged = match (&r.entry, find_characteristic(&mut results, &r)) {
                (ResultEntry::Characteristic(c), Some(into)) => {
                    fuse_characteristics(into, c);
                    true
                }
                _ => false,
            };
            if !merged {
                results.push(r);
            }
        }
    }

    Ok(Report {
        schema,
        header: Header::now(),
        config,
        results,
        assertions,
        timing: Timing {
            wall_ms,
            jobs,
        },
    })
}

fn find_characteristic<'a>(
    results: &'a mut [LabeledResult],
    candidate: &LabeledResult,
) -> Option<&'a mut CharacteristicReport> {
    let ResultEntry::Characteristic(c) = &candidate.entry else {
        return None;
    };
    results.iter_mut().find_map(|r| {
        if r.label != candidate.label {
            return None;
        }
        match &mut r.entry {
            ResultEntry::Characteristic(have) if have.kind == c.kind && have.p == c.p => Some(have),
            _ => None,
        }
    })
}

fn fuse_characteristics(into: &mut CharacteristicReport, from: &CharacteristicReport) {
    into.per_cube.extend(from.per_cube.iter().cloned());
    into.divergent_cubes.extend(from.divergent_cubes.iter().cloned());
    into.warnings.extend(from.warnings.iter().cloned());
    if into.family_description != from.family_description {
        into.family_description =
            format!("{} + {}", into.family_description, from.family_description);
    }
    if let Some(c) = into.divergent_cubes.first() {
        into.value = f64::INFINITY;
        into.argmax_cube = c.clone();
    } else if let Some(best) = into
        .per_cube
        .iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
    {
        into.value = best.value;
        into.argmax_cube = best.cube.clone();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::CharacteristicKind;
    use crate::dimensions::{DimensionKind, ScalePoint};
    use crate::geometry::Cube;

    fn char_report(p: f64, values: &[(f64, f64)]) -> CharacteristicReport {
        let per_cube: Vec<crate::characteristics::PerCubeValue> = values
            .iter()
            .map(|(edge, v)| crate::characteristics::PerCubeValue {
                cube: Cube::new(vec![0.5], *edge).unwrap(),
                value: *v,
                error_estimate: 1e-9,
                nodes_used: 10,
            })
            .collect();
        let best = per_cube
            .iter()
            .max_by(|a, b| a.value.total_cmp(&b.value))
            .unwrap();
        CharacteristicReport {
            kind: CharacteristicKind::ApInfty,
            p,
            value: best.value,
            argmax_cube: best.cube.clone(),
            per_cube: per_cube.clone(),
            family_description: "test family".into(),
            lower_bound_flag: true,
            divergent_cubes: Vec::new(),
            comparability_factor: None,
            warnings: Vec::new(),
        }
    }

    fn dim_estimate(d_hat: f64) -> DimensionEstimate {
        DimensionEstimate {
            kind: DimensionKind::Lower,
            d_hat,
            intercept: 0.0,
            residual_max: 0.01,
            scale_range: (2.0, 8.0),
            per_scale: vec![
                ScalePoint {
                    lambda: 2.0,
                    log_lambda: 2f64.ln(),
                    log_value: d_hat * 2f64.ln(),
                },
                ScalePoint {
                    lambda: 8.0,
                    log_lambda: 8f64.ln(),
                    log_value: d_hat * 8f64.ln(),
                },
            ],
            attained: true,
            warnings: Vec::new(),
        }
    }

    fn base_report() -> Report {
        let mut rep = Report::new(serde_json::json!({"seed": 0}));
        rep.push(
            "apinf p=2",
            ResultEntry::Characteristic(char_report(2.0, &[(1.0, 1.5), (0.5, 1.2)])),
        );
        rep.assertions.push(Assertion::passed("sanity", "ok"));
        rep
    }

    #[test]
    fn payload_is_deterministic_and_excludes_header() {
        let mut a = base_report();
        let mut b = base_report();
        a.header.created_unix = Some(1);
        b.header.created_unix = Some(2);
        a.timing.wall_ms = 10;
        b.timing.wall_ms = 99;
        assert_eq!(a.payload_json().unwrap(), b.payload_json().unwrap());
        assert_ne!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn json_round_trip_preserves_divergent_values() {
        let mut rep = base_report();
        let mut div = char_report(3.0, &[(1.0, 2.0)]);
        div.divergent_cubes.push(Cube::new(vec![0.0], 1.0).unwrap());
        div.value = f64::INFINITY;
        rep.push("ap p=3", ResultEntry::Characteristic(div));
        let text = rep.to_json().unwrap();
        let back = Report::from_json(&text).unwrap();
        let ResultEntry::Characteristic(c) = &back.results[1].entry else {
            panic!("wrong entry type");
        };
        assert!(c.value.is_infinite());
        assert_eq!(back.results.len(), 2);
        assert_eq!(rep.payload_json().unwrap(), back.payload_json().unwrap());
    }

    #[test]
    fn merge_of_single_report_is_identity() {
        let rep = base_report();
        let payload = rep.payload_json().unwrap();
        let merged = merge_reports(vec![rep]).unwrap();
        assert_eq!(merged.payload_json().unwrap(), payload);
    }

    #[test]
    fn merge_recomputes_maximum_over_union() {
        let mut a = base_report();
        let mut b = Report::new(serde_json::json!({"seed": 0}));
        b.push(
            "apinf p=2",
            ResultEntry::Characteristic(char_report(2.0, &[(0.25, 2.5)])),
        );
        a.timing.wall_ms = 5;
        b.timing.wall_ms = 7;
        let merged = merge_reports(vec![a, b]).unwrap();
        assert_eq!(merged.results.len(), 1);
        let ResultEntry::Characteristic(c) = &merged.results[0].entry else {
            panic!("wrong entry type");
        };
        assert_eq!(c.per_cube.len(), 3);
        assert_eq!(c.value, 2.5);
        assert_eq!(c.argmax_cube.edge, 0.25);
        assert_eq!(merged.timing.wall_ms, 12);
    }

    #[test]
    fn merge_rejects_schema_mismatch() {
        let a = base_report();
        let mut b = base_report();
        b.schema = "apweights.report.v0".into();
        assert!(matches!(
            merge_reports(vec![a, b]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn csv_has_slope_rows_and_scale_points() {
        let mut rep = Report::new(serde_json::json!(null));
        for k in 0..10 {
            rep.push(
                format!("lower fit {k}"),
                ResultEntry::Dimension(dim_estimate(0.1 * k as f64)),
            );
        }
        let csv = rep.to_csv();
        let slope_rows = csv
            .lines()
            .filter(|l| l.starts_with("dimension_fit,"))
            .count();
        let point_rows = csv
            .lines()
            .filter(|l| l.starts_with("dimension_point,"))
            .count();
        assert_eq!(slope_rows, 10);
        assert_eq!(point_rows, 20);
        assert!(csv.starts_with("record,label,p,x,y,detail\n"));
    }

    #[test]
    fn csv_escapes_commas_and_quotes() {
        let mut rep = Report::new(serde_json::json!(null));
        rep.assertions.push(Assertion::passed(
            "has, comma",
            "say \"quote\"",
        ));
        let csv = rep.to_csv();
        assert!(csv.contains("\"has, comma\""));
        assert!(csv.contains("\"say \"\"quote\"\"\""));
    }
}
