use std::collections::BTreeMap;
use std::sync::Arc;

use fairsim_core::engine::{run, Algorithm, MetricsLedger, RunSpec};
use fairsim_core::report::{emit_csv, emit_summary, fmt_g6, manifest_paths, series_csv, TABLES};
use fairsim_core::trajectory::synthesize;
use fairsim_core::Config;

fn ledgers(algorithms: &[Algorithm]) -> Vec<MetricsLedger> {
    let scenario = Arc::new(synthesize("constant_speed_ring", 3, 3, 5.0, 21).unwrap());
    algorithms
        .iter()
        .map(|&a| {
            run(&RunSpec::new(
                scenario.clone(),
                a,
                Config::default(),
                5.0,
                4,
            ))
            .unwrap()
        })
        .collect()
}

fn read_table(path: &std::path::Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            header
                .iter()
                .zip(rec.iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

#[test]
fn tables_have_one_column_per_algorithm() {
    let ls = ledgers(&[Algorithm::Fair, Algorithm::SaMax]);
    let dir = tempfile::tempdir().unwrap();
    let manifest = emit_csv(&ls, dir.path()).unwrap();
    for (name, _) in TABLES {
        let rows = read_table(&dir.path().join(name));
        assert_eq!(rows.len(), 1, "{name}");
        assert!(
            rows[0].contains_key("FAIR") && rows[0].contains_key("SA_MAX"),
            "{name}"
        );
        assert_eq!(rows[0]["n_ucv"], "3");
    }
    for path in manifest_paths(&manifest, dir.path()) {
        assert!(path.exists(), "{}", path.display());
    }
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn series_has_the_panel_columns() {
    let ls = ledgers(&[Algorithm::Fair]);
    let bytes = series_csv(&ls[0]);
    let mut r = csv::Reader::from_reader(&bytes[..]);
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    for col in [
        "speed",
        "snr",
        "rate",
        "grant",
        "energy",
        "utilization",
        "resolution",
    ] {
        assert!(header.iter().any(|h| h == col), "missing {col}");
    }
    assert_eq!(r.records().count(), ls[0].vehicles.len());
}

#[test]
fn reports_regenerate_byte_for_byte() {
    let ls = ledgers(&[Algorithm::Fair, Algorithm::DaMin]);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = emit_csv(&ls, a.path()).unwrap();
    let mb = emit_csv(&ledgers(&[Algorithm::Fair, Algorithm::DaMin]), b.path()).unwrap();
    assert_eq!(ma, mb);
    for f in &ma.files {
        assert_eq!(
            std::fs::read(a.path().join(&f.name)).unwrap(),
            std::fs::read(b.path().join(&f.name)).unwrap(),
            "{}",
            f.name
        );
    }
}

#[test]
fn summary_ratios_match_table_cells() {
    let ls = ledgers(&[Algorithm::Fair, Algorithm::SaMax]);
    let dir = tempfile::tempdir().unwrap();
    emit_csv(&ls, dir.path()).unwrap();
    let summary = emit_summary(&ls).unwrap();
    let cmp = &summary.comparisons[0];
    let row = &read_table(&dir.path().join("fps_ucv.csv"))[0];
    let cell = |k: &str| row[k].parse::<f64>().unwrap();
    let from_cells = cell("FAIR") / cell("SA_MAX");
    let ratio = cmp.fps_ucv_ratio.unwrap();
    assert!(
        (ratio - from_cells).abs() <= 1e-5 * ratio,
        "{ratio} vs {from_cells}"
    );
}

#[test]
fn fair_against_itself_is_one() {
    let ls = ledgers(&[Algorithm::Fair]);
    let mut twin = ls[0].clone();
    // same numbers under a baseline label
    twin.meta.algorithm = Algorithm::SaMax;
    let summary = emit_summary(&[ls[0].clone(), twin]).unwrap();
    let c = &summary.comparisons[0];
    assert_eq!(c.utilization_ratio, Some(1.0));
    assert_eq!(c.fps_ucv_ratio, Some(1.0));
    assert_eq!(c.q_u_delta, 0.0);
}

#[test]
fn summary_needs_a_baseline() {
    let ls = ledgers(&[Algorithm::Fair]);
    assert!(emit_summary(&ls).is_err());
    let other = ledgers(&[Algorithm::SaMax]);
    assert!(emit_summary(&other).is_err());
}

#[test]
fn summary_rejects_other_scenarios() {
    let mut ls = ledgers(&[Algorithm::Fair, Algorithm::SaMax]);
    ls[1].meta.scenario_hash = "0".repeat(64);
    assert!(emit_summary(&ls).is_err());
}

#[test]
fn numbers_print_with_six_digits() {
    assert_eq!(fmt_g6(0.014_205_780_346), "0.0142058");
    assert_eq!(fmt_g6(-2.5), "-2.5");
}
