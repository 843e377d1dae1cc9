//! The JSON reports emitted by the CLI validate against the schema files
//! shipped in `schemas/`.

use genspec::analysis::{MultiscaleReport, PointReport, TimescaleReport, Verdict};
use genspec::frames::LocalDynamics;
use genspec::reduction::ReducedModel;

fn validate(schema_file: &str, value: &serde_json::Value) {
    let schema_path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schemas/");
    let text = std::fs::read_to_string(format!("{schema_path}{schema_file}")).unwrap();
    let schema: serde_json::Value = serde_json::from_str(&text).unwrap();
    let compiled = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = compiled
        .iter_errors(value)
        .map(|e| format!("{}: {e}", e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{schema_file}: {errors:?}");
}

#[test]
fn multiscale_report_matches_schema() {
    let report = MultiscaleReport {
        mu_tan_avg: 692.5,
        mu_nor_avg: 20.0,
        d_tan_avg: 1478.9,
        d_nor_avg: 1.28,
        ratio_mu: 34.6,
        ratio_d: 1152.9,
        threshold: 10.0,
        verdict: Verdict::Multiscale,
        seed: vec![5.0, 0.0],
        fibre_points: 101,
        skipped_points: 0,
        per_point: vec![PointReport {
            index: 0,
            arc_length: 0.0,
            point: vec![5.0, 0.0],
            weight: 0.01,
            dynamics: LocalDynamics {
                mu_hat: vec![1.0, 0.0],
                d_hat: vec![vec![1.0, 0.0], vec![0.0, 0.0]],
                mu_tan: 1.0,
                mu_nor: 0.0,
                d_tan: 1.0,
                d_nor: 0.0,
            },
        }],
    };
    validate(
        "multiscale_report.schema.json",
        &serde_json::to_value(&report).unwrap(),
    );
    // Inconclusive reports carry NaN averages, serialized as null.
    let inconclusive = MultiscaleReport {
        mu_tan_avg: f64::NAN,
        mu_nor_avg: f64::NAN,
        d_tan_avg: f64::NAN,
        d_nor_avg: f64::NAN,
        ratio_mu: f64::NAN,
        ratio_d: f64::NAN,
        verdict: Verdict::Inconclusive,
        per_point: Vec::new(),
        fibre_points: 0,
        ..report
    };
    validate(
        "multiscale_report.schema.json",
        &serde_json::to_value(&inconclusive).unwrap(),
    );
}

#[test]
fn timescale_report_matches_schema() {
    let report = TimescaleReport {
        slow_eigs: vec![[0.0, 0.0], [-0.6467, 0.1097]],
        fibre_eigs: vec![[-1.7e-4, 0.0], [-1001.9, 0.0]],
        ratios: vec![6.45e-4],
        err: vec![1.9e-3],
        epsilon_estimate: 6.0e-4,
        method: "arclength".into(),
        theta_degrees: None,
        conjugate_pairing: true,
    };
    validate(
        "timescale_report.schema.json",
        &serde_json::to_value(&report).unwrap(),
    );
}

#[test]
fn reduced_model_matches_schema() {
    let model = ReducedModel {
        x: vec![0.0, 0.125],
        mu_tilde: vec![0.01, f64::NAN],
        d_tilde: vec![1.1, f64::NAN],
        condition: vec![1.5, f64::INFINITY],
        eigpairs_used: vec![1, 2],
        gaps: vec![1],
    };
    validate(
        "reduced_model.schema.json",
        &serde_json::to_value(&model).unwrap(),
    );
}
