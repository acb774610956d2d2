//! Contention-based baselines: slotted CSMA/CA with binary exponential
//! backoff and fixed frame resolution.
//!
//! Each offloading vehicle owns one uplink flow at the station AIFSN; each
//! downloading vehicle owns one downlink flow queued at the server. A
//! backlogged flow waits its AIFSN plus a uniform backoff; the smallest
//! countdown transmits one frame, equal countdowns collide. Backoff state
//! and transmissions in flight carry across period boundaries.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::{Direction, ResolutionChoice, SimConfig, ValidationReport, VehicleId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContentionConfig {
    /// Server AIFSN in DIFFERENT mode.
    pub aifsn_server: u32,
    pub aifsn_station: u32,
    /// seconds
    pub slot_time: f64,
    pub cw_min: u32,
    pub cw_max: u32,
    pub seed: u64,
    /// Every flow always has a frame waiting.
    pub saturated: bool,
    /// Periods' worth of frames a flow may hold before dropping new ones.
    pub queue_periods: u32,
}

impl Default for ContentionConfig {
    fn default() -> Self {
        ContentionConfig {
            aifsn_server: 1,
            aifsn_station: 2,
            slot_time: 9e-6,
            cw_min: 15,
            cw_max: 1023,
            seed: 0,
            saturated: false,
            queue_periods: 1,
        }
    }
}

impl ContentionConfig {
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.aifsn_server < 1 {
            report.push("contention.aifsn_server", "must be >= 1");
        }
        if self.aifsn_station < 1 {
            report.push("contention.aifsn_station", "must be >= 1");
        }
        if !(self.slot_time > 0.0) {
            report.push("contention.slot_time", "must be > 0");
        }
        if self.cw_min < 1 {
            report.push("contention.cw_min", "must be >= 1");
        }
        if self.cw_min > self.cw_max {
            report.push("contention.cw_max", "must be >= cw_min");
        }
        if self.queue_periods < 1 {
            report.push("contention.queue_periods", "must be >= 1");
        }
        report
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AifsMode {
    /// Server and stations share the station AIFSN.
    Same,
    /// The server waits the shorter server AIFSN.
    Different,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResolutionMode {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BaselinePolicy {
    pub aifs_mode: AifsMode,
    pub resolution_mode: ResolutionMode,
}

impl BaselinePolicy {
    pub const SA_MAX: BaselinePolicy = BaselinePolicy::new(AifsMode::Same, ResolutionMode::Max);
    pub const SA_MIN: BaselinePolicy = BaselinePolicy::new(AifsMode::Same, ResolutionMode::Min);
    pub const DA_MAX: BaselinePolicy =
        BaselinePolicy::new(AifsMode::Different, ResolutionMode::Max);
    pub const DA_MIN: BaselinePolicy =
        BaselinePolicy::new(AifsMode::Different, ResolutionMode::Min);

    pub const fn new(aifs_mode: AifsMode, resolution_mode: ResolutionMode) -> Self {
        BaselinePolicy {
            aifs_mode,
            resolution_mode,
        }
    }

    pub fn aifsn(&self, direction: Direction, cfg: &ContentionConfig) -> u32 {
        match (self.aifs_mode, direction) {
            (AifsMode::Different, Direction::Downlink) => cfg.aifsn_server,
            _ => cfg.aifsn_station,
        }
    }
}

impl fmt::Display for BaselinePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = match self.aifs_mode {
            AifsMode::Same => "SA",
            AifsMode::Different => "DA",
        };
        let r = match self.resolution_mode {
            ResolutionMode::Max => "MAX",
            ResolutionMode::Min => "MIN",
        };
        write!(f, "{a}_{r}")
    }
}

impl FromStr for BaselinePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace(['+', '-'], "_").as_str() {
            "SA_MAX" => Ok(Self::SA_MAX),
            "SA_MIN" => Ok(Self::SA_MIN),
            "DA_MAX" => Ok(Self::DA_MAX),
            "DA_MIN" => Ok(Self::DA_MIN),
            _ => Err(format!("unknown baseline `{s}`")),
        }
    }
}

/// Fixed resolution used by a baseline: the ladder's top or bottom.
pub fn baseline_resolution(
    policy: BaselinePolicy,
    direction: Direction,
    cfg: &SimConfig,
) -> ResolutionChoice {
    match policy.resolution_mode {
        ResolutionMode::Max => cfg.max_resolution(direction),
        ResolutionMode::Min => cfg.min_resolution(direction),
    }
}

/// Offered load of one flow for one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowDemand {
    pub vehicle_id: VehicleId,
    pub direction: Direction,
    /// Airtime of one frame at the flow's link rate, seconds.
    pub frame_airtime: f64,
    /// Frames generated at the start of the period.
    pub arrivals: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub vehicle_id: VehicleId,
    pub direction: Direction,
    pub success_airtime: f64,
    pub frames_delivered: u32,
    /// Frames lost in collisions.
    pub frames_collided: u32,
    /// Frames discarded because the queue was full.
    pub frames_dropped: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodOutcome {
    pub period_start: f64,
    pub period_t: f64,
    pub success_airtime: f64,
    pub collision_airtime: f64,
    pub idle_time: f64,
    /// Collision events, each involving two or more flows.
    pub collisions: u32,
    /// Flows active this period or finishing a transmission in it, by key.
    pub flows: Vec<FlowStats>,
}

impl PeriodOutcome {
    pub fn flow(&self, id: &VehicleId, direction: Direction) -> Option<&FlowStats> {
        self.flows
            .iter()
            .find(|f| &f.vehicle_id == id && f.direction == direction)
    }
}

type FlowKey = (VehicleId, Direction);

fn entry(stats: &mut BTreeMap<FlowKey, FlowStats>, key: &FlowKey) {
    stats.entry(key.clone()).or_insert_with(|| FlowStats {
        vehicle_id: key.0.clone(),
        direction: key.1,
        success_airtime: 0.0,
        frames_delivered: 0,
        frames_collided: 0,
        frames_dropped: 0,
    });
}

#[derive(Debug, Clone)]
struct Flow {
    aifsn: u32,
    cw: u32,
    backoff: Option<u32>,
    queue: u32,
    frame_airtime: f64,
}

/// A transmission still on the air at a period boundary.
#[derive(Debug, Clone)]
struct InFlight {
    end: f64,
    /// The sender when the transmission succeeds.
    winner: Option<FlowKey>,
}

/// Channel state of one baseline run.
#[derive(Debug, Clone)]
pub struct ContentionChannel {
    policy: BaselinePolicy,
    cfg: ContentionConfig,
    rng: ChaCha8Rng,
    flows: BTreeMap<FlowKey, Flow>,
    in_flight: Option<InFlight>,
}

impl ContentionChannel {
    pub fn new(policy: BaselinePolicy, cfg: &ContentionConfig, seed: u64) -> Self {
        ContentionChannel {
            policy,
            cfg: cfg.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            flows: BTreeMap::new(),
            in_flight: None,
        }
    }

    /// Simulates `[start, start + period_t)`. Flows absent from `demands`
    /// leave the channel; their queued frames are discarded.
    pub fn step(&mut self, start: f64, period_t: f64, demands: &[FlowDemand]) -> PeriodOutcome {
        let end = start + period_t;
        let slot = self.cfg.slot_time;
        let mut stats: BTreeMap<FlowKey, FlowStats> = BTreeMap::new();
        let mut out = PeriodOutcome {
            period_start: start,
            period_t,
            success_airtime: 0.0,
            collision_airtime: 0.0,
            idle_time: 0.0,
            collisions: 0,
            flows: Vec::new(),
        };

        let active: BTreeMap<FlowKey, &FlowDemand> = demands
            .iter()
            .map(|d| ((d.vehicle_id.clone(), d.direction), d))
            .collect();
        self.flows.retain(|k, _| active.contains_key(k));
        for (key, d) in &active {
            entry(&mut stats, key);
            let flow = self.flows.entry(key.clone()).or_insert_with(|| Flow {
                aifsn: self.policy.aifsn(key.1, &self.cfg),
                cw: self.cfg.cw_min,
                backoff: None,
                queue: 0,
                frame_airtime: d.frame_airtime,
            });
            flow.frame_airtime = d.frame_airtime;
            let limit = if self.cfg.saturated {
                u32::MAX
            } else {
                d.arrivals.saturating_mul(self.cfg.queue_periods)
            };
            let arrivals = if self.cfg.saturated {
                limit
            } else {
                d.arrivals
            };
            let room = limit - flow.queue.min(limit);
            let accepted = arrivals.min(room);
            flow.queue += accepted;
            if !self.cfg.saturated {
                stats.get_mut(key).unwrap().frames_dropped += arrivals - accepted;
            }
        }

        let mut t = start;
        if let Some(tx) = self.in_flight.take() {
            let busy_end = tx.end.min(end);
            let portion = busy_end - start;
            match &tx.winner {
                Some(key) => {
                    out.success_airtime += portion;
                    entry(&mut stats, key);
                    let s = stats.get_mut(key).unwrap();
                    s.success_airtime += portion;
                    if tx.end <= end {
                        s.frames_delivered += 1;
                    }
                }
                None => out.collision_airtime += portion,
            }
            t = busy_end;
            if tx.end > end {
                self.in_flight = Some(tx);
            }
        }

        while t < end && self.in_flight.is_none() {
            let mut next: Option<u32> = None;
            for flow in self.flows.values_mut() {
                if flow.queue == 0 {
                    continue;
                }
                let b = *flow
                    .backoff
                    .get_or_insert_with(|| self.rng.gen_range(0..flow.cw.max(1)));
                let countdown = flow.aifsn + b;
                next = Some(next.map_or(countdown, |m: u32| m.min(countdown)));
            }
            let Some(m) = next else {
                out.idle_time += end - t;
                break;
            };
            let tx_start = t + m as f64 * slot;
            if tx_start >= end {
                // nobody reached zero before the boundary; keep their progress
                let elapsed = ((end - t) / slot).floor() as u32;
                for flow in self.flows.values_mut() {
                    if let Some(b) = flow.backoff.as_mut() {
                        *b = b.saturating_sub(elapsed.saturating_sub(flow.aifsn));
                    }
                }
                out.idle_time += end - t;
                break;
            }
            out.idle_time += tx_start - t;

            let winners: Vec<FlowKey> = self
                .flows
                .iter()
                .filter(|(_, f)| f.queue > 0 && f.aifsn + f.backoff.unwrap_or(0) == m)
                .map(|(k, _)| k.clone())
                .collect();
            for (key, flow) in self.flows.iter_mut() {
                if flow.queue == 0 || winners.contains(key) {
                    continue;
                }
                if let Some(b) = flow.backoff.as_mut() {
                    *b = b.saturating_sub(m.saturating_sub(flow.aifsn));
                }
            }
            let airtime = winners
                .iter()
                .map(|k| self.flows[k].frame_airtime)
                .fold(0.0, f64::max);
            let success = winners.len() == 1;
            for key in &winners {
                let flow = self.flows.get_mut(key).unwrap();
                flow.queue -= 1;
                flow.backoff = None;
                if success {
                    flow.cw = self.cfg.cw_min;
                } else {
                    flow.cw = (2 * (flow.cw + 1) - 1).min(self.cfg.cw_max);
                    entry(&mut stats, key);
                    stats.get_mut(key).unwrap().frames_collided += 1;
                }
            }
            if !success {
                out.collisions += 1;
            }

            let tx_end = tx_start + airtime;
            let portion = tx_end.min(end) - tx_start;
            if success {
                let key = &winners[0];
                out.success_airtime += portion;
                let s = stats.get_mut(key).unwrap();
                s.success_airtime += portion;
                if tx_end <= end {
                    s.frames_delivered += 1;
                }
            } else {
                out.collision_airtime += portion;
            }
            if tx_end > end {
                self.in_flight = Some(InFlight {
                    end: tx_end,
                    winner: success.then(|| winners[0].clone()),
                });
            }
            t = tx_end.min(end);
        }

        out.flows = stats.into_values().collect();
        out
    }
}

/// One period on a fresh channel.
pub fn contend_period(
    demands: &[FlowDemand],
    policy: BaselinePolicy,
    cfg: &ContentionConfig,
    period_t: f64,
    seed: u64,
) -> PeriodOutcome {
    ContentionChannel::new(policy, cfg, seed).step(0.0, period_t, demands)
}
