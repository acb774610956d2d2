//! Comparison tables, per-vehicle series and run summaries written as CSV
//! plus a JSON manifest with file hashes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{Aggregates, Algorithm, MetricsLedger, RunMeta};

pub const FORMAT_VERSION: u32 = 1;

pub const UTILIZATION_DEFINITION: &str = "channel utilization = airtime carrying delivered \
frames / period_T; reserved runs count min(grant, frames * frame_latency) per grant, \
contention runs count successful transmission airtime";

const NOTES: &[&str] = &[
    "receive power p_rev is a modeled constant, not a measurement",
    "collided frames in contention runs are not charged energy",
    "contention-run utilization in Q is delivered bits / (period_T * rate)",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no ledgers to report")]
    Empty,
    #[error("ledgers do not form one comparison: {0}")]
    MismatchedScenario(String),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// `%g`-style rendering with six significant digits.
pub fn fmt_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific form");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt_g6(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt_g6)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub utilization_definition: String,
    pub notes: Vec<String>,
    pub runs: Vec<RunMeta>,
    pub files: Vec<FileEntry>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| ReportError::Io {
        path: path.display().to_string(),
        source: e.error,
    })?;
    Ok(())
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Row key of the comparison tables.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
struct LoadKey {
    n_ucv: usize,
    n_dcv: usize,
    weights: [f64; 4],
    seed: u64,
}

impl LoadKey {
    fn of(meta: &RunMeta) -> Self {
        let w = &meta.weights;
        LoadKey {
            n_ucv: meta.n_ucv,
            n_dcv: meta.n_dcv,
            weights: [w.uplink.w1, w.uplink.w2, w.downlink.w1, w.downlink.w2],
            seed: meta.seed,
        }
    }

    fn cells(&self) -> Vec<String> {
        let mut cells = vec![self.n_ucv.to_string(), self.n_dcv.to_string()];
        cells.extend(self.weights.iter().map(|w| fmt_g6(*w)));
        cells.push(self.seed.to_string());
        cells
    }
}

type Metric = fn(&Aggregates) -> f64;

pub const TABLES: [(&str, Metric); 6] = [
    ("utilization.csv", |a| a.mean_channel_utilization),
    ("fps_ucv.csv", |a| a.avg_fps_ucv),
    ("fps_dcv.csv", |a| a.avg_fps_dcv),
    ("q_u.csv", |a| a.mean_q_u),
    ("q_d.csv", |a| a.mean_q_d),
    ("energy.csv", |a| a.lifetime_energy),
];

fn comparison_table(ledgers: &[MetricsLedger], metric: Metric) -> Vec<u8> {
    let algorithms: BTreeSet<Algorithm> = ledgers.iter().map(|l| l.meta.algorithm).collect();
    let mut rows: Vec<(LoadKey, BTreeMap<Algorithm, f64>)> = Vec::new();
    for l in ledgers {
        let key = LoadKey::of(&l.meta);
        let value = metric(&l.aggregates);
        match rows.iter_mut().find(|(k, _)| *k == key) {
            Some((_, cells)) => {
                cells.insert(l.meta.algorithm, value);
            }
            None => rows.push((key, BTreeMap::from([(l.meta.algorithm, value)]))),
        }
    }
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut header: Vec<String> = ["n_ucv", "n_dcv", "w1", "w2", "wbar1", "wbar2", "seed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(algorithms.iter().map(|a| a.to_string()));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(key, cells)| {
            let mut row = key.cells();
            row.extend(algorithms.iter().map(|a| opt_g6(cells.get(a).copied())));
            row
        })
        .collect();
    csv_bytes(&header, &body)
}

pub const SERIES_COLUMNS: [&str; 11] = [
    "period",
    "time",
    "vehicle_id",
    "direction",
    "speed",
    "snr",
    "rate",
    "grant",
    "energy",
    "utilization",
    "resolution",
];

/// Per-vehicle series of one run.
pub fn series_csv(ledger: &MetricsLedger) -> Vec<u8> {
    let header: Vec<String> = SERIES_COLUMNS.iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = ledger
        .vehicles
        .iter()
        .map(|r| {
            vec![
                r.period.to_string(),
                fmt_g6(r.time),
                r.vehicle_id.to_string(),
                r.direction.to_string(),
                fmt_g6(r.speed),
                fmt_g6(r.snr),
                fmt_g6(r.rate),
                opt_g6(r.grant),
                fmt_g6(r.energy),
                fmt_g6(r.utilization),
                r.resolution.map_or_else(String::new, |res| res.to_string()),
            ]
        })
        .collect();
    csv_bytes(&header, &rows)
}

/// File stem shared by the per-run outputs.
pub fn run_stem(meta: &RunMeta) -> String {
    format!(
        "{}_{}",
        meta.algorithm.as_str().to_ascii_lowercase(),
        &meta.spec_hash[..12]
    )
}

/// Writes the comparison tables, per-run series and audit streams, and a
/// manifest. Output bytes depend only on the ledgers.
pub fn emit_csv(ledgers: &[MetricsLedger], out_dir: &Path) -> Result<Manifest, ReportError> {
    if ledgers.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    for (name, metric) in TABLES {
        files.push((name.to_string(), comparison_table(ledgers, metric)));
    }
    for l in ledgers {
        let stem = run_stem(&l.meta);
        files.push((format!("series_{stem}.csv"), series_csv(l)));
        files.push((format!("audit_{stem}.jsonl"), l.audit_jsonl().into_bytes()));
    }

    let mut entries = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        write_atomic(&out_dir.join(name), bytes)?;
        entries.push(FileEntry {
            name: name.clone(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        utilization_definition: UTILIZATION_DEFINITION.into(),
        notes: NOTES.iter().map(|s| s.to_string()).collect(),
        runs: ledgers.iter().map(|l| l.meta.clone()).collect(),
        files: entries,
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_atomic(&out_dir.join("manifest.json"), &json)?;
    Ok(manifest)
}

/// FAIR relative to one other run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: Algorithm,
    pub seed: u64,
    /// `None` when the baseline value is zero.
    pub utilization_ratio: Option<f64>,
    pub fps_ucv_ratio: Option<f64>,
    pub fps_dcv_ratio: Option<f64>,
    /// FAIR minus baseline.
    pub q_u_delta: f64,
    pub q_d_delta: f64,
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| a / b)
}

impl Comparison {
    pub fn between(fair: &Aggregates, other: &Aggregates, baseline: Algorithm, seed: u64) -> Self {
        Comparison {
            baseline,
            seed,
            utilization_ratio: ratio(
                fair.mean_channel_utilization,
                other.mean_channel_utilization,
            ),
            fps_ucv_ratio: ratio(fair.avg_fps_ucv, other.avg_fps_ucv),
            fps_dcv_ratio: ratio(fair.avg_fps_dcv, other.avg_fps_dcv),
            q_u_delta: fair.mean_q_u - other.mean_q_u,
            q_d_delta: fair.mean_q_d - other.mean_q_d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario_hash: String,
    pub fair: Aggregates,
    pub comparisons: Vec<Comparison>,
}

/// Ratios of one FAIR run against every baseline run of the same scenario.
pub fn emit_summary(ledgers: &[MetricsLedger]) -> Result<Summary, ReportError> {
    let fair: Vec<&MetricsLedger> = ledgers
        .iter()
        .filter(|l| l.meta.algorithm == Algorithm::Fair)
        .collect();
    let [fair] = fair[..] else {
        return Err(ReportError::MismatchedScenario(format!(
            "need exactly one FAIR run, got {}",
            fair.len()
        )));
    };
    let baselines: Vec<&MetricsLedger> = ledgers
        .iter()
        .filter(|l| l.meta.algorithm != Algorithm::Fair)
        .collect();
    if baselines.is_empty() {
        return Err(ReportError::MismatchedScenario("no baseline run".into()));
    }
    for b in &baselines {
        if b.meta.scenario_hash != fair.meta.scenario_hash
            || b.meta.n_periods != fair.meta.n_periods
        {
            return Err(ReportError::MismatchedScenario(format!(
                "{} run covers a different scenario or duration",
                b.meta.algorithm
            )));
        }
    }
    Ok(Summary {
        scenario_hash: fair.meta.scenario_hash.clone(),
        fair: fair.aggregates.clone(),
        comparisons: baselines
            .iter()
            .map(|b| {
                Comparison::between(
                    &fair.aggregates,
                    &b.aggregates,
                    b.meta.algorithm,
                    b.meta.seed,
                )
            })
            .collect(),
    })
}

/// Paths of every file listed in a manifest.
pub fn manifest_paths(manifest: &Manifest, out_dir: &Path) -> Vec<PathBuf> {
    manifest
        .files
        .iter()
        .map(|f| out_dir.join(&f.name))
        .collect()
}
