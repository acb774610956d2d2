//! Per-frame and life-time energy for offloading and downloading vehicles.
//!
//! Offloading one frame costs camera sampling plus a transmission made of a
//! promotion phase, the data phase, and a tail phase. Downloading costs the
//! receive power over the frame's airtime.

use serde::{Deserialize, Serialize};

use crate::engine::MetricsLedger;
use crate::radio::{frame_latency, RadioError};
use crate::scenario::{Resolution, ResolutionChoice, ValidationReport};

/// How promotion and tail energy are charged when several frames go out
/// back-to-back inside one reservation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    /// Every frame pays one promotion and one tail.
    #[default]
    PerFrame,
    /// One promotion and one tail per burst, spread evenly over its frames.
    Coalesced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyParams {
    /// Promotion power, W.
    pub p_pro: f64,
    /// Promotion duration, s.
    pub t_pro: f64,
    /// Tail power, W.
    pub p_tail: f64,
    /// Tail duration, s.
    pub t_tail: f64,
    /// Transmit power slope, W per Mbps.
    pub ptr_slope: f64,
    /// Transmit power intercept, W.
    pub ptr_intercept: f64,
    /// Camera sampling energy polynomial `[c3, c2, c1, c0]` over pixel count.
    pub cam_poly: [f64; 4],
    /// Receive power, W. Modeled constant.
    pub p_rev: f64,
    pub tail_mode: TailMode,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            p_pro: 1.97,
            t_pro: 0.034,
            p_tail: 1.61,
            t_tail: 0.21,
            ptr_slope: 0.01821,
            ptr_intercept: 0.7368,
            cam_poly: [-1.772e-17, 7.491e-12, 2.379e-6, 0.6068],
            p_rev: 1.0,
            tail_mode: TailMode::PerFrame,
        }
    }
}

impl EnergyParams {
    pub fn e_pro(&self) -> f64 {
        self.p_pro * self.t_pro
    }

    pub fn e_tail(&self) -> f64 {
        self.p_tail * self.t_tail
    }

    /// Average power of the data phase at `rate` bits/second.
    pub fn transmit_power(&self, rate: f64) -> f64 {
        self.ptr_slope * (rate / 1e6) + self.ptr_intercept
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for (name, v) in [
            ("energy.p_pro", self.p_pro),
            ("energy.t_pro", self.t_pro),
            ("energy.p_tail", self.p_tail),
            ("energy.t_tail", self.t_tail),
            ("energy.p_rev", self.p_rev),
        ] {
            if !(v >= 0.0) {
                report.push(name, format!("must be >= 0, got {v}"));
            }
        }
        report
    }

    /// Camera energy must stay positive over every resolution in use.
    pub fn validate_ladder(&self, field: &str, ladder: &[Resolution]) -> ValidationReport {
        let mut report = ValidationReport::default();
        for r in ladder {
            let e = camera_energy(&r.with_depth(1), self);
            if !(e > 0.0) {
                report.push(field, format!("camera energy {e} J at {r} is not positive"));
            }
        }
        report
    }
}

/// Energy of one transmission: promotion, data phase and tail.
pub fn transmit_energy(
    res: &ResolutionChoice,
    rate: f64,
    params: &EnergyParams,
) -> Result<f64, RadioError> {
    let airtime = frame_latency(res, rate)?;
    Ok(params.e_pro() + params.transmit_power(rate) * airtime + params.e_tail())
}

/// Energy of sampling one frame, a cubic in the pixel count.
pub fn camera_energy(res: &ResolutionChoice, params: &EnergyParams) -> f64 {
    let x = res.pixels() as f64;
    let [c3, c2, c1, c0] = params.cam_poly;
    ((c3 * x + c2) * x + c1) * x + c0
}

/// Per-frame offloading energy, each frame charged its own promotion and tail.
pub fn offload_frame_energy(
    res: &ResolutionChoice,
    rate: f64,
    params: &EnergyParams,
) -> Result<f64, RadioError> {
    Ok(camera_energy(res, params) + transmit_energy(res, rate, params)?)
}

/// Per-frame offloading energy as charged under the configured tail mode
/// when `frames` frames share one burst.
pub fn accounted_offload_energy(
    res: &ResolutionChoice,
    rate: f64,
    frames: u32,
    params: &EnergyParams,
) -> Result<f64, RadioError> {
    match params.tail_mode {
        TailMode::PerFrame => offload_frame_energy(res, rate, params),
        TailMode::Coalesced => {
            let airtime = frame_latency(res, rate)?;
            let overhead = (params.e_pro() + params.e_tail()) / frames.max(1) as f64;
            Ok(camera_energy(res, params) + params.transmit_power(rate) * airtime + overhead)
        }
    }
}

pub fn download_frame_energy(
    res: &ResolutionChoice,
    rate: f64,
    params: &EnergyParams,
) -> Result<f64, RadioError> {
    Ok(params.p_rev * frame_latency(res, rate)?)
}

/// Total frame energy over periods starting in `[start, end)`.
pub fn lifetime_energy(ledger: &MetricsLedger, window: (f64, f64)) -> f64 {
    let (start, end) = window;
    ledger
        .vehicles
        .iter()
        .filter(|r| r.time >= start && r.time < end)
        .map(|r| r.energy)
        .sum()
}
