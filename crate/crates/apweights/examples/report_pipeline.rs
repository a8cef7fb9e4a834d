//! The configuration and report pipeline used by the `apweights`
//! binary, driven as a library: parse a TOML experiment, compute a
//! characteristic, serialize the report, merge two reports, and project
//! the merge to CSV.
//!
//! Run with `cargo run --release --example report_pipeline`.

use apweights::characteristics::apinf_characteristic;
use apweights::config::ExperimentConfig;
use apweights::report::{merge_reports, Report, ResultEntry};

const EXPERIMENT: &str = r#"
p = 2.0
seed = 42

[weight]
kind = "scalar_times_identity"
m = 2
n = 1

[weight.scalar]
kind = "power"
a = 1.0

[family]
box = 2.0
jmin = -1
jmax = 2
extras = 4
"#;

fn main() -> apweights::Result<()> {
    let config = ExperimentConfig::from_toml_str(EXPERIMENT)?;
    let weight = config.weight()?;
    let family = config.probe_family(&weight)?;
    let quad = config.quadrature()?;

    let mut halves = Vec::new();
    for (part, cubes) in [
        ("left half", &family.cubes[..family.len() / 2]),
        ("right half", &family.cubes[family.len() / 2..]),
    ] {
        let sub = apweights::geometry::ProbeFamily {
            cubes: cubes.to_vec(),
            description: format!("{} of {}", part, family.description),
            seed: family.seed,
        };
        let value = apinf_characteristic(&weight, 2.0, &sub, &quad)?;
        let mut report = Report::new(serde_json::to_value(&config).unwrap());
        report.push("apinf p=2", ResultEntry::Characteristic(value));
        println!(
            "{part}: {} cubes, report of {} bytes",
            sub.len(),
            report.to_json()?.len()
        );
        halves.push(report);
    }

    let merged = merge_reports(halves)?;
    let ResultEntry::Characteristic(c) = &merged.results[0].entry else {
        unreachable!()
    };
    println!(
        "merged: value {:.5} over {} cubes (maximum recomputed across both halves)",
        c.value,
        c.per_cube.len()
    );

    println!("\nCSV projection, first lines:");
    for line in merged.to_csv().lines().take(5) {
        println!("  {line}");
    }
    Ok(())
}
