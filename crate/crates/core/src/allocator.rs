//! Symmetrical reservation of uplink and downlink airtime for one period.
//!
//! Every period the server orders the offloading vehicles by speed and
//! reserves a dedicated offloading period (DOP) for each: highway vehicles
//! first, then vehicles that have gone unserved for `beta` periods, then the
//! fastest remaining vehicle with the full reservation, then everyone else
//! scaled by their changed-area ratio to the fastest one. Stopped vehicles
//! get a single minimum frame on their cadence. Whatever time is left is
//! split evenly into dedicated downloading periods (DDP).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radio::{frame_latency, LinkState, RadioError};
use crate::scenario::{delta_area, Direction, ScenarioError, SimConfig, VehicleId, VehicleState};

#[derive(Debug, Error, PartialEq)]
pub enum AllocError {
    #[error("no vehicles to allocate")]
    NoVehicles,
    #[error("no link state for vehicle {0}")]
    MissingLink(VehicleId),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CaseLabel {
    Highway,
    ContinuousUnallocated,
    TemporaryStop,
    Normal,
}

impl CaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseLabel::Highway => "HIGHWAY",
            CaseLabel::ContinuousUnallocated => "CONTINUOUS_UNALLOCATED",
            CaseLabel::TemporaryStop => "TEMPORARY_STOP",
            CaseLabel::Normal => "NORMAL",
        }
    }
}

pub fn classify_one(state: &VehicleState, cfg: &SimConfig) -> CaseLabel {
    if state.speed > cfg.v_highway {
        CaseLabel::Highway
    } else if state.speed <= cfg.stop_speed_epsilon {
        CaseLabel::TemporaryStop
    } else if state.unallocated_streak >= cfg.beta_unallocated {
        CaseLabel::ContinuousUnallocated
    } else {
        CaseLabel::Normal
    }
}

/// Labels every offloading vehicle in `states`.
pub fn classify(states: &[VehicleState], cfg: &SimConfig) -> BTreeMap<VehicleId, CaseLabel> {
    states
        .iter()
        .filter(|s| s.is_ucv)
        .map(|s| (s.vehicle_id.clone(), classify_one(s, cfg)))
        .collect()
}

/// Reservation that carries `fps0 * T` frames at the largest uplink
/// resolution at `rate`.
pub fn dop_max(rate: f64, cfg: &SimConfig) -> Result<f64, RadioError> {
    let per_frame = frame_latency(&cfg.max_resolution(Direction::Uplink), rate)?;
    Ok(per_frame * cfg.fps0 * cfg.period_t)
}

/// Reservation for one stopped vehicle: a single minimum-resolution frame.
pub fn stop_dop(rate: f64, cfg: &SimConfig) -> Result<f64, RadioError> {
    frame_latency(&cfg.min_resolution(Direction::Uplink), rate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DopGrant {
    pub vehicle_id: VehicleId,
    pub duration: f64,
    pub case: CaseLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdpGrant {
    pub vehicle_id: VehicleId,
    pub duration: f64,
}

/// Reservations for one period. `dop_grants` lists every offloading vehicle
/// in the order it was considered, including zero grants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub period_index: u64,
    pub period_start: f64,
    pub period_t: f64,
    pub dop_grants: Vec<DopGrant>,
    pub ddp_grants: Vec<DdpGrant>,
    pub leftover: f64,
    /// Vehicle that received the full reservation and anchors the scaling.
    pub reference: Option<VehicleId>,
    /// Rate used to size highway reservations.
    pub highway_rate_min: Option<f64>,
}

impl AllocationPlan {
    pub fn idle(period_index: u64, period_start: f64, period_t: f64) -> Self {
        AllocationPlan {
            period_index,
            period_start,
            period_t,
            dop_grants: Vec::new(),
            ddp_grants: Vec::new(),
            leftover: period_t,
            reference: None,
            highway_rate_min: None,
        }
    }

    pub fn total_dop(&self) -> f64 {
        self.dop_grants.iter().map(|g| g.duration).sum()
    }

    pub fn total_ddp(&self) -> f64 {
        self.ddp_grants.iter().map(|g| g.duration).sum()
    }

    pub fn dop_for(&self, id: &VehicleId) -> Option<&DopGrant> {
        self.dop_grants.iter().find(|g| &g.vehicle_id == id)
    }

    pub fn ddp_for(&self, id: &VehicleId) -> Option<&DdpGrant> {
        self.ddp_grants.iter().find(|g| &g.vehicle_id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub plan: AllocationPlan,
    /// Updated unallocated streak for every offloading vehicle.
    pub streaks: BTreeMap<VehicleId, u32>,
}

struct Budget {
    remaining: f64,
    exhausted: bool,
}

impl Budget {
    /// Grants `demand`, or whatever is left when it does not fit.
    fn take(&mut self, demand: f64) -> f64 {
        if self.exhausted {
            return 0.0;
        }
        if self.remaining <= demand {
            let granted = self.remaining;
            self.remaining = 0.0;
            self.exhausted = true;
            granted
        } else {
            self.remaining -= demand;
            demand
        }
    }
}

/// Descending speed, ties by id.
fn speed_order(a: &VehicleState, b: &VehicleState) -> std::cmp::Ordering {
    b.speed
        .total_cmp(&a.speed)
        .then_with(|| a.vehicle_id.cmp(&b.vehicle_id))
}

/// Runs one period of the reservation algorithm.
///
/// Streaks are read from `VehicleState::unallocated_streak` and returned
/// updated in [`Allocation::streaks`].
pub fn allocate(
    states: &[VehicleState],
    links: &BTreeMap<VehicleId, LinkState>,
    period_index: u64,
    period_start: f64,
    cfg: &SimConfig,
) -> Result<Allocation, AllocError> {
    if states.iter().all(|s| !s.is_ucv && !s.is_dcv) {
        return Err(AllocError::NoVehicles);
    }
    let rate_of = |s: &VehicleState| -> Result<f64, AllocError> {
        links
            .get(&s.vehicle_id)
            .map(|l| l.rate)
            .ok_or_else(|| AllocError::MissingLink(s.vehicle_id.clone()))
    };

    let mut ucvs: Vec<(&VehicleState, CaseLabel, f64)> = Vec::new();
    for s in states.iter().filter(|s| s.is_ucv) {
        ucvs.push((s, classify_one(s, cfg), rate_of(s)?));
    }
    ucvs.sort_by(|a, b| speed_order(a.0, b.0));
    let mut dcvs: Vec<(&VehicleState, f64)> = Vec::new();
    for s in states.iter().filter(|s| s.is_dcv) {
        dcvs.push((s, rate_of(s)?));
    }
    dcvs.sort_by(|a, b| a.0.vehicle_id.cmp(&b.0.vehicle_id));

    let mut budget = Budget {
        remaining: cfg.period_t,
        exhausted: false,
    };
    let mut dop_grants: Vec<DopGrant> = Vec::with_capacity(ucvs.len());
    let mut done = vec![false; ucvs.len()];
    let mut held = vec![false; ucvs.len()];
    let connected = |i: usize| ucvs[i].2 > 0.0;

    // Highway vehicles share one conservative reservation sized at the
    // slowest highway link.
    let highway: Vec<usize> = (0..ucvs.len())
        .filter(|&i| connected(i) && ucvs[i].1 == CaseLabel::Highway)
        .collect();
    let highway_rate_min = highway
        .iter()
        .map(|&i| ucvs[i].2)
        .min_by(|a, b| a.total_cmp(b));
    if let Some(r_min) = highway_rate_min {
        let demand = dop_max(r_min, cfg).expect("positive rate");
        for &i in &highway {
            dop_grants.push(DopGrant {
                vehicle_id: ucvs[i].0.vehicle_id.clone(),
                duration: budget.take(demand),
                case: ucvs[i].1,
            });
            done[i] = true;
        }
    }

    // The fastest remaining moving vehicle anchors the speed scaling.
    let reference = (0..ucvs.len()).find(|&i| {
        connected(i) && !matches!(ucvs[i].1, CaseLabel::Highway | CaseLabel::TemporaryStop)
    });
    let area_x = match reference {
        Some(x) => Some(delta_area(ucvs[x].0.speed, cfg)?),
        None => None,
    };
    // Each vehicle's own full reservation, shrunk by its speed relative to
    // the reference.
    let scaled = |i: usize| -> Result<f64, AllocError> {
        let area_x = area_x.expect("scaled grants need a reference vehicle");
        let full = dop_max(ucvs[i].2, cfg).expect("positive rate");
        Ok(full * delta_area(ucvs[i].0.speed, cfg)? / area_x)
    };

    // Vehicles starved for beta periods outrank everyone but highway
    // traffic, the reference included.
    for i in 0..ucvs.len() {
        if done[i] || !connected(i) || ucvs[i].1 != CaseLabel::ContinuousUnallocated {
            continue;
        }
        let demand = scaled(i)?;
        dop_grants.push(DopGrant {
            vehicle_id: ucvs[i].0.vehicle_id.clone(),
            duration: budget.take(demand),
            case: ucvs[i].1,
        });
        done[i] = true;
    }

    if let Some(x) = reference.filter(|&x| !done[x]) {
        let full = dop_max(ucvs[x].2, cfg).expect("positive rate");
        dop_grants.push(DopGrant {
            vehicle_id: ucvs[x].0.vehicle_id.clone(),
            duration: budget.take(full),
            case: ucvs[x].1,
        });
        done[x] = true;
    }

    let on_cadence = period_index.is_multiple_of(cfg.stop_offload_interval.max(1) as u64);
    for i in 0..ucvs.len() {
        if done[i] || !connected(i) {
            continue;
        }
        let demand = match ucvs[i].1 {
            CaseLabel::TemporaryStop => {
                held[i] = true;
                if on_cadence {
                    stop_dop(ucvs[i].2, cfg).expect("positive rate")
                } else {
                    0.0
                }
            }
            _ => scaled(i)?,
        };
        let duration = if demand > 0.0 {
            budget.take(demand)
        } else {
            0.0
        };
        dop_grants.push(DopGrant {
            vehicle_id: ucvs[i].0.vehicle_id.clone(),
            duration,
            case: ucvs[i].1,
        });
        done[i] = true;
    }

    // Disconnected vehicles, listed last with nothing.
    let mut offline: Vec<usize> = (0..ucvs.len()).filter(|&i| !done[i]).collect();
    offline.sort_by(|&a, &b| ucvs[a].0.vehicle_id.cmp(&ucvs[b].0.vehicle_id));
    for i in offline {
        dop_grants.push(DopGrant {
            vehicle_id: ucvs[i].0.vehicle_id.clone(),
            duration: 0.0,
            case: ucvs[i].1,
        });
    }

    let online_dcvs: Vec<&(&VehicleState, f64)> = dcvs.iter().filter(|d| d.1 > 0.0).collect();
    let total_dop: f64 = dop_grants.iter().map(|g| g.duration).sum();
    let mut ddp_grants = Vec::with_capacity(dcvs.len());
    let spare = cfg.period_t - total_dop;
    if spare > 0.0 && !online_dcvs.is_empty() {
        let share = spare / online_dcvs.len() as f64;
        for (s, _) in &online_dcvs {
            ddp_grants.push(DdpGrant {
                vehicle_id: s.vehicle_id.clone(),
                duration: share,
            });
        }
    }
    let total_ddp: f64 = ddp_grants.iter().map(|g| g.duration).sum();
    let leftover = (cfg.period_t - total_dop - total_ddp).max(0.0);

    let mut streaks = BTreeMap::new();
    for (i, (s, _, _)) in ucvs.iter().enumerate() {
        let granted = dop_grants
            .iter()
            .find(|g| g.vehicle_id == s.vehicle_id)
            .is_some_and(|g| g.duration > 0.0);
        let streak = if granted {
            0
        } else if held[i] {
            s.unallocated_streak
        } else {
            s.unallocated_streak.saturating_add(1)
        };
        streaks.insert(s.vehicle_id.clone(), streak);
    }

    Ok(Allocation {
        plan: AllocationPlan {
            period_index,
            period_start,
            period_t: cfg.period_t,
            dop_grants,
            ddp_grants,
            leftover,
            reference: reference.map(|x| ucvs[x].0.vehicle_id.clone()),
            highway_rate_min,
        },
        streaks,
    })
}
