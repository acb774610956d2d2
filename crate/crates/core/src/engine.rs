//! Period-by-period simulation loop and the metrics it records.
//!
//! Every period: sample vehicle states, compute links, then either reserve
//! and adapt (FAIR) or contend with fixed resolutions (baselines), and
//! account frames, energy and airtime.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adapter::{solve_p0, solve_p1, AdaptError, AdaptRequest, AdaptationDecision};
use crate::allocator::{allocate, dop_max, AllocError, AllocationPlan, CaseLabel};
use crate::baseline::{
    baseline_resolution, BaselinePolicy, ContentionChannel, FlowDemand, PeriodOutcome,
};
use crate::energy::{accounted_offload_energy, download_frame_energy, offload_frame_energy};
use crate::radio::{frame_latency, link_state, LinkState, RadioError};
use crate::scenario::{
    Config, Direction, Resolution, ValidationReport, VehicleId, VehicleState, Weights,
};
use crate::trajectory::{sample_states, to_csv_string, Scenario, TrajectoryError};

/// Links are evaluated no closer than this to the server, meters.
pub const MIN_LINK_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Algorithm {
    Fair,
    SaMax,
    SaMin,
    DaMax,
    DaMin,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Fair,
        Algorithm::SaMax,
        Algorithm::SaMin,
        Algorithm::DaMax,
        Algorithm::DaMin,
    ];

    pub fn baseline_policy(&self) -> Option<BaselinePolicy> {
        match self {
            Algorithm::Fair => None,
            Algorithm::SaMax => Some(BaselinePolicy::SA_MAX),
            Algorithm::SaMin => Some(BaselinePolicy::SA_MIN),
            Algorithm::DaMax => Some(BaselinePolicy::DA_MAX),
            Algorithm::DaMin => Some(BaselinePolicy::DA_MIN),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Fair => "FAIR",
            Algorithm::SaMax => "SA_MAX",
            Algorithm::SaMin => "SA_MIN",
            Algorithm::DaMax => "DA_MAX",
            Algorithm::DaMin => "DA_MIN",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace(['+', '-'], "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == norm)
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid config: {}", .0.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidConfig(ValidationReport),
    #[error("duration {duration} s exceeds the scenario's {available} s")]
    DurationExceedsScenario { duration: f64, available: f64 },
    #[error("duration must be >= 0, got {0}")]
    NegativeDuration(f64),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Radio(#[from] RadioError),
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub scenario: Arc<Scenario>,
    pub algorithm: Algorithm,
    pub config: Config,
    /// seconds from the scenario's time origin
    pub duration: f64,
    pub seed: u64,
    /// `key=value` overrides applied to `config`, kept for the record.
    pub overrides: Vec<String>,
}

impl RunSpec {
    pub fn new(
        scenario: Arc<Scenario>,
        algorithm: Algorithm,
        config: Config,
        duration: f64,
        seed: u64,
    ) -> Self {
        RunSpec {
            scenario,
            algorithm,
            config,
            duration,
            seed,
            overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub period_t: f64,
    pub duration: f64,
    pub n_periods: u64,
    pub n_ucv: usize,
    pub n_dcv: usize,
    pub weights: Weights,
    /// sha256 of the scenario in CSV form
    pub scenario_hash: String,
    /// sha256 over scenario hash, algorithm, config, duration and seed
    pub spec_hash: String,
    pub config: serde_json::Value,
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub index: u64,
    pub start: f64,
    pub n_ucv: usize,
    pub n_dcv: usize,
    /// Airtime carrying delivered frames, seconds.
    pub busy_airtime: f64,
    pub channel_utilization: f64,
    /// Unreserved time (FAIR) or idle time (baselines), seconds.
    pub leftover: f64,
    pub collisions: u32,
    pub collision_airtime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub period: u64,
    pub time: f64,
    pub vehicle_id: VehicleId,
    pub direction: Direction,
    pub speed: f64,
    pub distance: f64,
    pub snr: f64,
    pub rate: f64,
    pub case: Option<CaseLabel>,
    /// Reserved airtime; `None` under contention.
    pub grant: Option<f64>,
    pub resolution: Option<Resolution>,
    pub frames: u32,
    pub fps: f64,
    pub utilization: f64,
    /// Energy of one frame at the chosen resolution, joules.
    pub frame_energy: f64,
    pub q: Option<f64>,
    /// Energy of all frames delivered this period, joules.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub avg_fps_ucv: f64,
    pub avg_fps_dcv: f64,
    pub mean_q_u: f64,
    pub mean_q_d: f64,
    pub lifetime_energy: f64,
    pub mean_channel_utilization: f64,
    pub collisions: u64,
    pub frames_ucv: u64,
    pub frames_dcv: u64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl Aggregates {
    /// Recomputes every aggregate from the series.
    pub fn from_series(periods: &[PeriodRecord], vehicles: &[VehicleRecord]) -> Self {
        let of = |d: Direction| vehicles.iter().filter(move |r| r.direction == d);
        Aggregates {
            avg_fps_ucv: mean(of(Direction::Uplink).map(|r| r.fps)),
            avg_fps_dcv: mean(of(Direction::Downlink).map(|r| r.fps)),
            mean_q_u: mean(of(Direction::Uplink).filter_map(|r| r.q)),
            mean_q_d: mean(of(Direction::Downlink).filter_map(|r| r.q)),
            lifetime_energy: vehicles.iter().map(|r| r.energy).sum(),
            mean_channel_utilization: mean(periods.iter().map(|p| p.channel_utilization)),
            collisions: periods.iter().map(|p| p.collisions as u64).sum(),
            frames_ucv: of(Direction::Uplink).map(|r| r.frames as u64).sum(),
            frames_dcv: of(Direction::Downlink).map(|r| r.frames as u64).sum(),
        }
    }
}

/// One line of the per-period audit stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditRecord {
    Fair {
        plan: AllocationPlan,
        decisions: Vec<AdaptationDecision>,
    },
    Baseline {
        outcome: PeriodOutcome,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLedger {
    pub meta: RunMeta,
    pub periods: Vec<PeriodRecord>,
    pub vehicles: Vec<VehicleRecord>,
    pub aggregates: Aggregates,
    pub audit: Vec<AuditRecord>,
}

impl MetricsLedger {
    /// The audit stream as JSON lines.
    pub fn audit_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.audit {
            out.push_str(&serde_json::to_string(record).expect("audit serializes"));
            out.push('\n');
        }
        out
    }

    pub fn series_for<'a>(
        &'a self,
        id: &'a VehicleId,
        direction: Direction,
    ) -> impl Iterator<Item = &'a VehicleRecord> + 'a {
        self.vehicles
            .iter()
            .filter(move |r| &r.vehicle_id == id && r.direction == direction)
    }
}

/// Per-period channel utilization and its run average.
pub fn channel_utilization(ledger: &MetricsLedger) -> (Vec<f64>, f64) {
    let series: Vec<f64> = ledger
        .periods
        .iter()
        .map(|p| p.channel_utilization)
        .collect();
    let avg = mean(series.iter().copied());
    (series, avg)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn scenario_hash(scenario: &Scenario) -> String {
    sha256_hex(to_csv_string(scenario).as_bytes())
}

struct Sample {
    state: VehicleState,
    link: LinkState,
}

fn sample(
    scenario: &Scenario,
    t: f64,
    cfg: &Config,
    streaks: &BTreeMap<VehicleId, u32>,
) -> Result<Vec<Sample>, EngineError> {
    if scenario.tracks.is_empty() {
        return Ok(Vec::new());
    }
    let (sx, sy) = scenario.server_position;
    let mut out = Vec::new();
    for mut state in sample_states(scenario, t, &cfg.sim)? {
        state.unallocated_streak = streaks.get(&state.vehicle_id).copied().unwrap_or(0);
        let d = (state.position.0 - sx)
            .hypot(state.position.1 - sy)
            .max(MIN_LINK_DISTANCE);
        let link = link_state(d, &cfg.sim, &cfg.rate_table)?;
        out.push(Sample { state, link });
    }
    Ok(out)
}

fn base_record(k: u64, t: f64, s: &Sample, direction: Direction) -> VehicleRecord {
    VehicleRecord {
        period: k,
        time: t,
        vehicle_id: s.state.vehicle_id.clone(),
        direction,
        speed: s.state.speed,
        distance: s.link.distance,
        snr: s.link.snr,
        rate: s.link.rate,
        case: None,
        grant: None,
        resolution: None,
        frames: 0,
        fps: 0.0,
        utilization: 0.0,
        frame_energy: 0.0,
        q: None,
        energy: 0.0,
    }
}

struct PeriodResult {
    period: PeriodRecord,
    vehicles: Vec<VehicleRecord>,
    audit: AuditRecord,
}

fn fair_period(
    k: u64,
    t: f64,
    samples: &[Sample],
    cfg: &Config,
    streaks: &mut BTreeMap<VehicleId, u32>,
) -> Result<PeriodResult, EngineError> {
    let sim = &cfg.sim;
    let states: Vec<VehicleState> = samples.iter().map(|s| s.state.clone()).collect();
    let links: BTreeMap<VehicleId, LinkState> = samples
        .iter()
        .map(|s| (s.state.vehicle_id.clone(), s.link))
        .collect();
    let plan = match allocate(&states, &links, k, t, sim) {
        Ok(a) => {
            *streaks = a.streaks;
            a.plan
        }
        Err(AllocError::NoVehicles) => {
            streaks.clear();
            AllocationPlan::idle(k, t, sim.period_t)
        }
        Err(e) => return Err(e.into()),
    };

    let mut decisions = Vec::new();
    let mut records = Vec::new();
    let mut busy = 0.0;
    for s in samples {
        let id = &s.state.vehicle_id;
        let rate = s.link.rate;
        if s.state.is_ucv {
            let mut rec = base_record(k, t, s, Direction::Uplink);
            let grant = plan.dop_for(id);
            rec.case = grant.map(|g| g.case);
            let duration = grant.map_or(0.0, |g| g.duration);
            rec.grant = Some(duration);
            if duration > 0.0 && rate > 0.0 {
                let full_rate = match (rec.case, plan.highway_rate_min) {
                    (Some(CaseLabel::Highway), Some(r_min)) => r_min,
                    _ => rate,
                };
                let req = AdaptRequest {
                    vehicle_id: id.clone(),
                    grant: duration,
                    rate,
                    weights: s.state.weights.uplink,
                    dop_max: Some(dop_max(full_rate, sim)?),
                };
                match solve_p0(&req, sim, &cfg.energy) {
                    Ok(d) => {
                        let latency = frame_latency(&d.resolution, rate)?;
                        busy += duration.min(d.frames_this_period as f64 * latency);
                        rec.resolution = Some(d.resolution.resolution());
                        rec.frames = d.frames_this_period;
                        rec.fps = d.achieved_fps;
                        rec.utilization = d.utilization;
                        rec.frame_energy = d.frame_energy;
                        rec.q = Some(d.objective_q);
                        rec.energy = d.frames_this_period as f64
                            * accounted_offload_energy(
                                &d.resolution,
                                rate,
                                d.frames_this_period,
                                &cfg.energy,
                            )?;
                        decisions.push(d);
                    }
                    Err(AdaptError::Infeasible { .. }) => {}
                    Err(e) => unreachable!("grant and rate checked above: {e}"),
                }
            }
            records.push(rec);
        }
        if s.state.is_dcv {
            let mut rec = base_record(k, t, s, Direction::Downlink);
            let duration = plan.ddp_for(id).map_or(0.0, |g| g.duration);
            rec.grant = Some(duration);
            if duration > 0.0 && rate > 0.0 {
                let req = AdaptRequest {
                    vehicle_id: id.clone(),
                    grant: duration,
                    rate,
                    weights: s.state.weights.downlink,
                    dop_max: None,
                };
                match solve_p1(&req, sim, &cfg.energy) {
                    Ok(d) => {
                        let latency = frame_latency(&d.resolution, rate)?;
                        busy += duration.min(d.frames_this_period as f64 * latency);
                        rec.resolution = Some(d.resolution.resolution());
                        rec.frames = d.frames_this_period;
                        rec.fps = d.achieved_fps;
                        rec.utilization = d.utilization;
                        rec.frame_energy = d.frame_energy;
                        rec.q = Some(d.objective_q);
                        rec.energy = d.frames_this_period as f64 * d.frame_energy;
                        decisions.push(d);
                    }
                    Err(AdaptError::Infeasible { .. }) => {}
                    Err(e) => unreachable!("grant and rate checked above: {e}"),
                }
            }
            records.push(rec);
        }
    }

    let period = PeriodRecord {
        index: k,
        start: t,
        n_ucv: samples.iter().filter(|s| s.state.is_ucv).count(),
        n_dcv: samples.iter().filter(|s| s.state.is_dcv).count(),
        busy_airtime: busy,
        channel_utilization: busy / sim.period_t,
        leftover: plan.leftover,
        collisions: 0,
        collision_airtime: 0.0,
    };
    Ok(PeriodResult {
        period,
        vehicles: records,
        audit: AuditRecord::Fair { plan, decisions },
    })
}

fn baseline_period(
    k: u64,
    t: f64,
    samples: &[Sample],
    cfg: &Config,
    policy: BaselinePolicy,
    channel: &mut ContentionChannel,
) -> Result<PeriodResult, EngineError> {
    let sim = &cfg.sim;
    let arrivals = sim.frame_cap();
    let roles = |s: &Sample| {
        [
            (s.state.is_ucv, Direction::Uplink),
            (s.state.is_dcv, Direction::Downlink),
        ]
        .into_iter()
        .filter_map(|(on, d)| on.then_some(d))
        .collect::<Vec<_>>()
    };

    let mut demands = Vec::new();
    for s in samples.iter().filter(|s| s.link.rate > 0.0) {
        for direction in roles(s) {
            let res = baseline_resolution(policy, direction, sim);
            demands.push(FlowDemand {
                vehicle_id: s.state.vehicle_id.clone(),
                direction,
                frame_airtime: frame_latency(&res, s.link.rate)?,
                arrivals,
            });
        }
    }
    let outcome = channel.step(t, sim.period_t, &demands);

    let mut records = Vec::new();
    for s in samples {
        for direction in roles(s) {
            let mut rec = base_record(k, t, s, direction);
            let rate = s.link.rate;
            if rate > 0.0 {
                let res = baseline_resolution(policy, direction, sim);
                let frames = outcome
                    .flow(&s.state.vehicle_id, direction)
                    .map_or(0, |f| f.frames_delivered);
                let (frame_energy, weights) = match direction {
                    Direction::Uplink => (
                        offload_frame_energy(&res, rate, &cfg.energy)?,
                        s.state.weights.uplink,
                    ),
                    Direction::Downlink => (
                        download_frame_energy(&res, rate, &cfg.energy)?,
                        s.state.weights.downlink,
                    ),
                };
                let utilization = frames as f64 * res.bits as f64 / (sim.period_t * rate);
                rec.resolution = Some(res.resolution());
                rec.frames = frames;
                rec.fps = frames as f64 / sim.period_t;
                rec.utilization = utilization;
                rec.frame_energy = frame_energy;
                rec.q = Some(weights.w1 * frame_energy - weights.w2 * utilization);
                rec.energy = match direction {
                    Direction::Uplink => {
                        frames as f64 * accounted_offload_energy(&res, rate, frames, &cfg.energy)?
                    }
                    Direction::Downlink => frames as f64 * frame_energy,
                };
            }
            records.push(rec);
        }
    }

    let period = PeriodRecord {
        index: k,
        start: t,
        n_ucv: samples.iter().filter(|s| s.state.is_ucv).count(),
        n_dcv: samples.iter().filter(|s| s.state.is_dcv).count(),
        busy_airtime: outcome.success_airtime,
        channel_utilization: outcome.success_airtime / sim.period_t,
        leftover: outcome.idle_time,
        collisions: outcome.collisions,
        collision_airtime: outcome.collision_airtime,
    };
    Ok(PeriodResult {
        period,
        vehicles: records,
        audit: AuditRecord::Baseline { outcome },
    })
}

fn spec_hash(scenario_hash: &str, spec: &RunSpec, config: &serde_json::Value) -> String {
    let doc = serde_json::json!({
        "scenario": scenario_hash,
        "algorithm": spec.algorithm,
        "config": config,
        "duration": spec.duration,
        "seed": spec.seed,
    });
    sha256_hex(doc.to_string().as_bytes())
}

/// Runs one simulation. Deterministic for a given spec.
pub fn run(spec: &RunSpec) -> Result<MetricsLedger, EngineError> {
    let cfg = &spec.config;
    let report = cfg.validate();
    if !report.is_valid() {
        return Err(EngineError::InvalidConfig(report));
    }
    if !(spec.duration >= 0.0) {
        return Err(EngineError::NegativeDuration(spec.duration));
    }
    let scenario = &*spec.scenario;
    if !scenario.tracks.is_empty() {
        let available = scenario.duration();
        if spec.duration > available + 1e-9 {
            return Err(EngineError::DurationExceedsScenario {
                duration: spec.duration,
                available,
            });
        }
    }
    let period_t = cfg.sim.period_t;
    let n_periods = (spec.duration / period_t + 1e-9).floor() as u64;

    let mut channel = spec.algorithm.baseline_policy().map(|p| {
        let seed = spec.seed ^ cfg.contention.seed.rotate_left(32);
        (p, ContentionChannel::new(p, &cfg.contention, seed))
    });
    let mut streaks: BTreeMap<VehicleId, u32> = BTreeMap::new();
    let mut periods = Vec::with_capacity(n_periods as usize);
    let mut vehicles = Vec::new();
    let mut audit = Vec::with_capacity(n_periods as usize);
    for k in 0..n_periods {
        let t = scenario.time_origin + k as f64 * period_t;
        let samples = sample(scenario, t, cfg, &streaks)?;
        let result = match channel.as_mut() {
            None => fair_period(k, t, &samples, cfg, &mut streaks)?,
            Some((policy, ch)) => baseline_period(k, t, &samples, cfg, *policy, ch)?,
        };
        periods.push(result.period);
        vehicles.extend(result.vehicles);
        audit.push(result.audit);
    }

    let config = cfg.to_json_value();
    let s_hash = scenario_hash(scenario);
    let meta = RunMeta {
        algorithm: spec.algorithm,
        seed: spec.seed,
        period_t,
        duration: spec.duration,
        n_periods,
        n_ucv: scenario.n_ucv(),
        n_dcv: scenario.n_dcv(),
        weights: cfg.sim.default_weights,
        spec_hash: spec_hash(&s_hash, spec, &config),
        scenario_hash: s_hash,
        config,
        overrides: spec.overrides.clone(),
    };
    let aggregates = Aggregates::from_series(&periods, &vehicles);
    Ok(MetricsLedger {
        meta,
        periods,
        vehicles,
        aggregates,
        audit,
    })
}

/// Runs independent specs in parallel; results keep the input order.
pub fn sweep(specs: &[RunSpec]) -> Vec<Result<MetricsLedger, EngineError>> {
    specs.par_iter().map(run).collect()
}
