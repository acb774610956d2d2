//! Configuration, unit conventions and the domain types shared by every
//! other module.
//!
//! Units: seconds, meters, m/s, MHz, dBm, bits. Angles are radians in memory
//! and degrees in JSON files.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::ContentionConfig;
use crate::energy::EnergyParams;
use crate::radio::RateTable;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("speed must be nonnegative, got {0}")]
    NegativeSpeed(f64),
    #[error("camera coverage outrun at speed {speed} m/s (2l - theta*V*tau = {coverage})")]
    CoverageOutrun { speed: f64, coverage: f64 },
    #[error("sigma ratio undefined for a vehicle with zero changed area")]
    ZeroSpeed,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bad override `{0}`: expected dotted.key=value")]
    OverrideSyntax(String),
    #[error("override key `{0}` does not name a config field")]
    OverrideKey(String),
}

/// Opaque vehicle identifier. Ordering is lexicographic and is used for
/// deterministic tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub String);

impl VehicleId {
    pub fn new(id: impl Into<String>) -> Self {
        VehicleId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VehicleId {
    fn from(s: &str) -> Self {
        VehicleId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Uplink,
    Downlink,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Uplink => f.write_str("uplink"),
            Direction::Downlink => f.write_str("downlink"),
        }
    }
}

/// A frame resolution `k x s` in pixels. Serialized as `[k, s]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(u32, u32)", into = "(u32, u32)")]
pub struct Resolution {
    pub k: u32,
    pub s: u32,
}

impl Resolution {
    pub const fn new(k: u32, s: u32) -> Self {
        Resolution { k, s }
    }

    pub fn pixels(&self) -> u64 {
        self.k as u64 * self.s as u64
    }

    /// Binds the resolution to a color depth.
    pub fn with_depth(self, gamma: u32) -> ResolutionChoice {
        ResolutionChoice {
            k: self.k,
            s: self.s,
            bits: self.pixels() * gamma as u64,
        }
    }
}

impl From<(u32, u32)> for Resolution {
    fn from((k, s): (u32, u32)) -> Self {
        Resolution { k, s }
    }
}

impl From<Resolution> for (u32, u32) {
    fn from(r: Resolution) -> Self {
        (r.k, r.s)
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.k, self.s)
    }
}

/// A resolution together with the payload size of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionChoice {
    pub k: u32,
    pub s: u32,
    pub bits: u64,
}

impl ResolutionChoice {
    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.k, self.s)
    }

    pub fn pixels(&self) -> u64 {
        self.k as u64 * self.s as u64
    }
}

/// Energy-vs-utilization preference for one direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preference {
    /// Energy weight.
    pub w1: f64,
    /// Utilization weight.
    pub w2: f64,
}

impl Preference {
    pub const fn new(w1: f64, w2: f64) -> Self {
        Preference { w1, w2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub uplink: Preference,
    pub downlink: Preference,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            uplink: Preference::new(1.0, 1.0),
            downlink: Preference::new(1.0, 1.0),
        }
    }
}

/// Resolutions supported by both the camera and the video source, ascending.
pub fn default_resolution_ladder() -> Vec<Resolution> {
    [
        (128, 128),
        (128, 224),
        (224, 224),
        (224, 320),
        (320, 320),
        (320, 480),
        (480, 480),
        (640, 480),
    ]
    .into_iter()
    .map(Resolution::from)
    .collect()
}

mod degrees {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rad: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(rad.to_degrees())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d).map(f64::to_radians)
    }
}

/// Simulation parameters. The JSON form stores `camera_fov_theta` in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Allocation period, seconds.
    #[serde(rename = "period_T")]
    pub period_t: f64,
    /// Acceptable frame rate used to size the largest reservation.
    pub fps0: f64,
    /// Speed above which a vehicle is treated as on a highway, m/s.
    pub v_highway: f64,
    /// Periods without a grant before a vehicle gets case-2 priority.
    pub beta_unallocated: u32,
    /// Stopped vehicles offload once every this many periods.
    pub stop_offload_interval: u32,
    #[serde(with = "degrees")]
    pub camera_fov_theta: f64,
    pub camera_range_l: f64,
    pub color_depth_gamma: u32,
    /// Carrier frequency, MHz.
    pub carrier_freq_f: f64,
    pub pathloss_exponent_n: f64,
    /// dBm
    pub tx_power: f64,
    /// dBm
    pub noise_floor: f64,
    /// Speeds at or below this are a temporary stop, m/s.
    pub stop_speed_epsilon: f64,
    pub uplink_resolutions: Vec<Resolution>,
    pub downlink_resolutions: Vec<Resolution>,
    pub default_weights: Weights,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            period_t: 0.1,
            fps0: 10.0,
            v_highway: 26.8,
            beta_unallocated: 3,
            stop_offload_interval: 10,
            camera_fov_theta: 50f64.to_radians(),
            camera_range_l: 55.0,
            color_depth_gamma: 8,
            carrier_freq_f: 2400.0,
            pathloss_exponent_n: 6.0,
            tx_power: 20.0,
            noise_floor: -90.0,
            stop_speed_epsilon: 0.1,
            uplink_resolutions: default_resolution_ladder(),
            downlink_resolutions: default_resolution_ladder(),
            default_weights: Weights::default(),
        }
    }
}

impl SimConfig {
    pub fn ladder(&self, dir: Direction) -> &[Resolution] {
        match dir {
            Direction::Uplink => &self.uplink_resolutions,
            Direction::Downlink => &self.downlink_resolutions,
        }
    }

    /// Largest resolution of a ladder. Panics on an empty ladder, which
    /// `validate_config` rejects.
    pub fn max_resolution(&self, dir: Direction) -> ResolutionChoice {
        let r = *self.ladder(dir).last().expect("empty resolution ladder");
        r.with_depth(self.color_depth_gamma)
    }

    pub fn min_resolution(&self, dir: Direction) -> ResolutionChoice {
        let r = *self.ladder(dir).first().expect("empty resolution ladder");
        r.with_depth(self.color_depth_gamma)
    }

    /// Frames a vehicle may deliver per period.
    pub fn frame_cap(&self) -> u32 {
        (self.fps0 * self.period_t - 1e-9).ceil().max(0.0) as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub(crate) fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }

    pub(crate) fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }
}

fn check_ladder(report: &mut ValidationReport, field: &str, ladder: &[Resolution]) {
    if ladder.is_empty() {
        report.push(field, "resolution list is empty");
        return;
    }
    if ladder.iter().any(|r| r.pixels() == 0) {
        report.push(field, "resolution with zero pixels");
    }
    if ladder.windows(2).any(|w| w[0].pixels() >= w[1].pixels()) {
        report.push(
            field,
            "resolutions must be strictly ascending by pixel count k*s",
        );
    }
}

/// Checks the invariants of a [`SimConfig`]; an empty report means valid.
pub fn validate_config(cfg: &SimConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !(cfg.period_t > 0.0) {
        report.push("period_T", format!("must be > 0, got {}", cfg.period_t));
    }
    if !(cfg.fps0 > 0.0) {
        report.push("fps0", format!("must be > 0, got {}", cfg.fps0));
    }
    if cfg.beta_unallocated < 1 {
        report.push("beta_unallocated", "must be >= 1");
    }
    if cfg.stop_offload_interval < 1 {
        report.push("stop_offload_interval", "must be >= 1");
    }
    if !(cfg.v_highway > 0.0) {
        report.push("v_highway", "must be > 0");
    }
    if !(cfg.camera_fov_theta > 0.0) {
        report.push("camera_fov_theta", "must be > 0");
    }
    if !(cfg.camera_range_l > 0.0) {
        report.push("camera_range_l", "must be > 0");
    }
    if cfg.color_depth_gamma == 0 {
        report.push("color_depth_gamma", "must be >= 1");
    }
    if !(cfg.carrier_freq_f > 0.0) {
        report.push("carrier_freq_f", "must be > 0");
    }
    if !(cfg.pathloss_exponent_n > 0.0) {
        report.push("pathloss_exponent_n", "must be > 0");
    }
    if !(cfg.stop_speed_epsilon >= 0.0) {
        report.push("stop_speed_epsilon", "must be >= 0");
    }
    check_ladder(&mut report, "uplink_resolutions", &cfg.uplink_resolutions);
    check_ladder(
        &mut report,
        "downlink_resolutions",
        &cfg.downlink_resolutions,
    );
    let w = &cfg.default_weights;
    for (name, v) in [
        ("default_weights.uplink.w1", w.uplink.w1),
        ("default_weights.uplink.w2", w.uplink.w2),
        ("default_weights.downlink.w1", w.downlink.w1),
        ("default_weights.downlink.w2", w.downlink.w2),
    ] {
        if !(v > 0.0) {
            report.push(name, format!("must be > 0, got {v}"));
        }
    }
    report
}

/// Changed-surroundings proxy for one vehicle over one period:
/// `(2l - theta * V * tau) * V` with `tau = period_T`.
pub fn delta_area(speed: f64, cfg: &SimConfig) -> Result<f64, ScenarioError> {
    if !(speed >= 0.0) {
        return Err(ScenarioError::NegativeSpeed(speed));
    }
    let travelled = speed * cfg.period_t;
    let coverage = 2.0 * cfg.camera_range_l - cfg.camera_fov_theta * travelled;
    if coverage <= 0.0 {
        return Err(ScenarioError::CoverageOutrun { speed, coverage });
    }
    Ok(coverage * speed)
}

/// Ratio of changed areas `dS_n / dS_m`.
pub fn sigma_ratio(
    state_n: &VehicleState,
    state_m: &VehicleState,
    cfg: &SimConfig,
) -> Result<f64, ScenarioError> {
    sigma_from_speeds(state_n.speed, state_m.speed, cfg)
}

pub(crate) fn sigma_from_speeds(v_n: f64, v_m: f64, cfg: &SimConfig) -> Result<f64, ScenarioError> {
    let a_n = delta_area(v_n, cfg)?;
    let a_m = delta_area(v_m, cfg)?;
    if a_n == 0.0 || a_m == 0.0 {
        return Err(ScenarioError::ZeroSpeed);
    }
    Ok(a_n / a_m)
}

/// One vehicle at one simulation instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub vehicle_id: VehicleId,
    pub time: f64,
    pub position: (f64, f64),
    pub speed: f64,
    pub is_ucv: bool,
    pub is_dcv: bool,
    pub weights: Weights,
    pub unallocated_streak: u32,
}

/// Everything a run needs besides the scenario, as stored in a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Config {
    #[serde(flatten)]
    pub sim: SimConfig,
    pub energy: EnergyParams,
    pub contention: ContentionConfig,
    pub rate_table: RateTable,
}

impl Config {
    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = validate_config(&self.sim);
        report.extend(self.energy.validate());
        report.extend(
            self.energy
                .validate_ladder("uplink_resolutions", &self.sim.uplink_resolutions),
        );
        report.extend(
            self.energy
                .validate_ladder("downlink_resolutions", &self.sim.downlink_resolutions),
        );
        report.extend(self.contention.validate());
        report.extend(self.rate_table.validate());
        report
    }

    /// Applies `dotted.key=value`. The value is parsed as JSON when possible
    /// and taken as a string otherwise.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::OverrideSyntax(assignment.to_string()))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::OverrideSyntax(assignment.to_string()));
        }
        let value: serde_json::Value = serde_json::from_str(raw.trim())
            .unwrap_or_else(|_| serde_json::Value::String(raw.trim().to_string()));

        let mut doc = self.to_json_value();
        let mut slot = &mut doc;
        for part in key.split('.') {
            slot = match slot {
                serde_json::Value::Object(map) => map
                    .get_mut(part)
                    .ok_or_else(|| ConfigError::OverrideKey(key.to_string()))?,
                serde_json::Value::Array(items) => {
                    let idx: usize = part
                        .parse()
                        .map_err(|_| ConfigError::OverrideKey(key.to_string()))?;
                    items
                        .get_mut(idx)
                        .ok_or_else(|| ConfigError::OverrideKey(key.to_string()))?
                }
                _ => return Err(ConfigError::OverrideKey(key.to_string())),
            };
        }
        *slot = value;
        *self = serde_json::from_value(doc)?;
        Ok(())
    }
}
