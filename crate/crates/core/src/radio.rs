//! Distance to path loss, SNR, data rate and per-frame transfer latency.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{ResolutionChoice, SimConfig, ValidationReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadioError {
    #[error("distance must be > 0, got {0} m")]
    NonPositiveDistance(f64),
    #[error("link is down (rate 0)")]
    LinkDown,
}

/// One step of the SNR to rate map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateStep {
    /// dB
    pub min_snr: f64,
    /// bits/second
    pub rate: f64,
}

/// Monotone SNR threshold table. The default is the 4-stream 802.11n table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateTable {
    pub steps: Vec<RateStep>,
}

impl Default for RateTable {
    fn default() -> Self {
        const MBPS: f64 = 1e6;
        let steps = [
            (2.0, 29.0),
            (5.0, 58.0),
            (9.0, 87.0),
            (11.0, 116.0),
            (15.0, 173.0),
            (18.0, 231.0),
            (20.0, 260.0),
            (25.0, 289.0),
        ]
        .into_iter()
        .map(|(min_snr, mbps)| RateStep {
            min_snr,
            rate: mbps * MBPS,
        })
        .collect();
        RateTable { steps }
    }
}

impl RateTable {
    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.steps.is_empty() {
            report.push("rate_table", "table is empty");
        }
        if self
            .steps
            .iter()
            .any(|s| !(s.rate > 0.0) || !s.min_snr.is_finite())
        {
            report.push("rate_table", "rates must be > 0 and thresholds finite");
        }
        if self
            .steps
            .windows(2)
            .any(|w| w[0].min_snr >= w[1].min_snr || w[0].rate >= w[1].rate)
        {
            report.push(
                "rate_table",
                "thresholds and rates must be strictly increasing",
            );
        }
        report
    }

    pub fn min_rate(&self) -> f64 {
        self.steps.first().map_or(0.0, |s| s.rate)
    }
}

/// Vehicle-to-server link at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub distance: f64,
    /// dB
    pub path_loss: f64,
    /// dB
    pub snr: f64,
    /// bits/second, 0 when disconnected
    pub rate: f64,
    pub connected: bool,
}

/// `20 log10(f) + 10 n log10(d) - 24` with `f` in MHz.
pub fn path_loss(distance: f64, cfg: &SimConfig) -> Result<f64, RadioError> {
    if !(distance > 0.0) {
        return Err(RadioError::NonPositiveDistance(distance));
    }
    Ok(
        20.0 * cfg.carrier_freq_f.log10() + 10.0 * cfg.pathloss_exponent_n * distance.log10()
            - 24.0,
    )
}

pub fn snr(path_loss: f64, cfg: &SimConfig) -> f64 {
    cfg.tx_power - path_loss - cfg.noise_floor
}

/// Highest rate whose threshold is at or below `snr`; 0 below the table.
pub fn rate_lookup(snr: f64, table: &RateTable) -> f64 {
    table
        .steps
        .iter()
        .rev()
        .find(|s| s.min_snr <= snr)
        .map_or(0.0, |s| s.rate)
}

pub fn link_state(
    distance: f64,
    cfg: &SimConfig,
    table: &RateTable,
) -> Result<LinkState, RadioError> {
    let path_loss = path_loss(distance, cfg)?;
    let snr = snr(path_loss, cfg);
    let rate = rate_lookup(snr, table);
    Ok(LinkState {
        distance,
        path_loss,
        snr,
        rate,
        connected: rate > 0.0,
    })
}

/// Airtime of one frame, seconds.
pub fn frame_latency(res: &ResolutionChoice, rate: f64) -> Result<f64, RadioError> {
    if !(rate > 0.0) {
        return Err(RadioError::LinkDown);
    }
    Ok(res.bits as f64 / rate)
}
