//! Per-vehicle frame resolution selection for a granted period.
//!
//! An offloading vehicle picks the uplink resolution minimizing
//! `w1 * EU - w2 * UU` where `UU` is the share of its grant a frame fills;
//! a downloading vehicle does the same with receive energy and the downlink
//! ladder. Resolutions that do not fit in the grant are excluded.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{download_frame_energy, offload_frame_energy, EnergyParams};
use crate::scenario::{Direction, Preference, ResolutionChoice, SimConfig, VehicleId};

/// Relative slack on the fit constraint so that a grant sized for exactly
/// one frame admits that frame despite rounding.
const FIT_EPS: f64 = 1e-12;
/// Relative distance at which a grant counts as the full reservation.
const FULL_GRANT_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptError {
    #[error("grant is zero")]
    ZeroGrant,
    #[error("link is down")]
    LinkDown,
    #[error("grant {grant} s is too short for one minimum-resolution frame")]
    Infeasible { grant: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptRequest {
    pub vehicle_id: VehicleId,
    /// Granted airtime this period, seconds.
    pub grant: f64,
    /// bits/second
    pub rate: f64,
    pub weights: Preference,
    /// Full reservation for this vehicle; a grant equal to it selects the
    /// largest resolution directly. Ignored for downlink.
    pub dop_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationDecision {
    pub vehicle_id: VehicleId,
    pub direction: Direction,
    pub resolution: ResolutionChoice,
    pub objective_q: f64,
    pub utilization: f64,
    /// Per-frame energy used in the objective, joules.
    pub frame_energy: f64,
    pub frames_this_period: u32,
    pub achieved_fps: f64,
}

impl AdaptationDecision {
    pub fn objective_with(&self, weights: Preference) -> f64 {
        weights.w1 * self.frame_energy - weights.w2 * self.utilization
    }
}

/// Fraction of a grant one frame occupies: `bits / (grant * R)`.
pub fn utilization_uplink(
    res: &ResolutionChoice,
    grant: f64,
    rate: f64,
) -> Result<f64, AdaptError> {
    if !(grant > 0.0) {
        return Err(AdaptError::ZeroGrant);
    }
    if !(rate > 0.0) {
        return Err(AdaptError::LinkDown);
    }
    Ok(res.bits as f64 / (grant * rate))
}

pub fn utilization_downlink(
    res: &ResolutionChoice,
    grant: f64,
    rate: f64,
) -> Result<f64, AdaptError> {
    utilization_uplink(res, grant, rate)
}

/// Frames that fit in `grant`, capped at the per-period frame target, and
/// the resulting frame rate over one period.
pub fn frames_in_grant(
    res: &ResolutionChoice,
    grant: f64,
    rate: f64,
    cfg: &SimConfig,
) -> (u32, f64) {
    if !(grant > 0.0) || !(rate > 0.0) || res.bits == 0 {
        return (0, 0.0);
    }
    let fit = (grant * rate / res.bits as f64 + 1e-9).floor();
    let count = (fit.max(0.0) as u64).min(cfg.frame_cap() as u64) as u32;
    (count, count as f64 / cfg.period_t)
}

fn check(req: &AdaptRequest) -> Result<(), AdaptError> {
    if !(req.grant > 0.0) {
        return Err(AdaptError::ZeroGrant);
    }
    if !(req.rate > 0.0) {
        return Err(AdaptError::LinkDown);
    }
    Ok(())
}

fn decide(
    req: &AdaptRequest,
    direction: Direction,
    res: ResolutionChoice,
    energy: f64,
    cfg: &SimConfig,
) -> AdaptationDecision {
    let utilization = res.bits as f64 / (req.grant * req.rate);
    let (frames, fps) = frames_in_grant(&res, req.grant, req.rate, cfg);
    AdaptationDecision {
        vehicle_id: req.vehicle_id.clone(),
        direction,
        resolution: res,
        objective_q: req.weights.w1 * energy - req.weights.w2 * utilization,
        utilization,
        frame_energy: energy,
        frames_this_period: frames,
        achieved_fps: fps,
    }
}

fn search(
    req: &AdaptRequest,
    direction: Direction,
    cfg: &SimConfig,
    energy_of: impl Fn(&ResolutionChoice) -> f64,
) -> Result<AdaptationDecision, AdaptError> {
    let mut best: Option<(f64, ResolutionChoice, f64)> = None;
    // ascending ladder with `<=` keeps the larger resolution on ties
    for r in cfg.ladder(direction) {
        let res = r.with_depth(cfg.color_depth_gamma);
        let utilization = res.bits as f64 / (req.grant * req.rate);
        if utilization > 1.0 + FIT_EPS {
            continue;
        }
        let energy = energy_of(&res);
        let q = req.weights.w1 * energy - req.weights.w2 * utilization;
        if best.as_ref().is_none_or(|(bq, _, _)| q <= *bq) {
            best = Some((q, res, energy));
        }
    }
    let (_, res, energy) = best.ok_or(AdaptError::Infeasible { grant: req.grant })?;
    Ok(decide(req, direction, res, energy, cfg))
}

/// Uplink resolution for an offloading vehicle.
pub fn solve_p0(
    req: &AdaptRequest,
    cfg: &SimConfig,
    params: &EnergyParams,
) -> Result<AdaptationDecision, AdaptError> {
    check(req)?;
    let energy_of = |res: &ResolutionChoice| {
        offload_frame_energy(res, req.rate, params).expect("positive rate")
    };
    if let Some(full) = req.dop_max {
        if (req.grant - full).abs() <= FULL_GRANT_EPS * full {
            let res = cfg.max_resolution(Direction::Uplink);
            return Ok(decide(req, Direction::Uplink, res, energy_of(&res), cfg));
        }
    }
    search(req, Direction::Uplink, cfg, energy_of)
}

/// Downlink resolution for a downloading vehicle.
pub fn solve_p1(
    req: &AdaptRequest,
    cfg: &SimConfig,
    params: &EnergyParams,
) -> Result<AdaptationDecision, AdaptError> {
    check(req)?;
    search(req, Direction::Downlink, cfg, |res| {
        download_frame_energy(res, req.rate, params).expect("positive rate")
    })
}
