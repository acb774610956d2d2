//! Drone-recorded trajectory files and synthetic trajectories.
//!
//! Files follow the layout of the public drone datasets: one row per track
//! per native frame with center position and velocity. Time of a frame is
//! `time_origin + frame / frame_rate`. States between frames are held from
//! the latest frame at or before the query time.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{SimConfig, VehicleId, VehicleState};

/// Slack used when mapping a time onto native frame indices.
const FRAME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: u64,
        column: String,
        message: String,
    },
    #[error("missing column `{0}`")]
    Schema(String),
    #[error("no vehicle tracks in scenario")]
    EmptyScenario,
    #[error("time {t} s is outside the scenario span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("unknown synthetic pattern `{0}`")]
    InvalidPattern(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentClass {
    Car,
    Truck,
    Van,
    Bus,
    Pedestrian,
    Bicycle,
    Motorcycle,
}

impl AgentClass {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.trim().to_ascii_lowercase().as_str() {
            "car" => AgentClass::Car,
            "truck" | "truck_bus" | "trailer" => AgentClass::Truck,
            "van" => AgentClass::Van,
            "bus" => AgentClass::Bus,
            "pedestrian" => AgentClass::Pedestrian,
            "bicycle" => AgentClass::Bicycle,
            "motorcycle" => AgentClass::Motorcycle,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            AgentClass::Car => "car",
            AgentClass::Truck => "truck",
            AgentClass::Van => "van",
            AgentClass::Bus => "bus",
            AgentClass::Pedestrian => "pedestrian",
            AgentClass::Bicycle => "bicycle",
            AgentClass::Motorcycle => "motorcycle",
        }
    }

    pub fn is_vehicle(&self) -> bool {
        !matches!(
            self,
            AgentClass::Pedestrian | AgentClass::Bicycle | AgentClass::Motorcycle
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub track_id: VehicleId,
    pub frame_index: u64,
    pub x: f64,
    pub y: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub speed: f64,
    pub agent_class: AgentClass,
}

impl TrajectoryPoint {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        track_id: VehicleId,
        frame_index: u64,
        x: f64,
        y: f64,
        v_x: f64,
        v_y: f64,
        agent_class: AgentClass,
    ) -> Self {
        TrajectoryPoint {
            track_id,
            frame_index,
            x,
            y,
            v_x,
            v_y,
            speed: v_x.hypot(v_y),
            agent_class,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Ucv,
    Dcv,
    Both,
}

impl Role {
    pub fn is_ucv(&self) -> bool {
        matches!(self, Role::Ucv | Role::Both)
    }

    pub fn is_dcv(&self) -> bool {
        matches!(self, Role::Dcv | Role::Both)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Ucv => "ucv",
            Role::Dcv => "dcv",
            Role::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ucv" => Some(Role::Ucv),
            "dcv" => Some(Role::Dcv),
            "both" => Some(Role::Both),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub tracks: BTreeMap<VehicleId, Vec<TrajectoryPoint>>,
    pub server_position: (f64, f64),
    /// Tracks without an entry take no part in a run.
    pub role_assignment: BTreeMap<VehicleId, Role>,
    pub time_origin: f64,
    /// Native frames per second.
    pub frame_rate: f64,
}

impl Scenario {
    pub fn frame_time(&self, frame: u64) -> f64 {
        self.time_origin + frame as f64 / self.frame_rate
    }

    /// Time of the first and last native frame over all tracks.
    pub fn span(&self) -> (f64, f64) {
        let first = self
            .tracks
            .values()
            .filter_map(|t| t.first())
            .map(|p| p.frame_index)
            .min()
            .unwrap_or(0);
        let last = self
            .tracks
            .values()
            .filter_map(|t| t.last())
            .map(|p| p.frame_index)
            .max()
            .unwrap_or(0);
        (self.frame_time(first), self.frame_time(last))
    }

    /// Length of time from the origin to the last frame.
    pub fn duration(&self) -> f64 {
        self.span().1 - self.time_origin
    }

    pub fn n_ucv(&self) -> usize {
        self.role_assignment.values().filter(|r| r.is_ucv()).count()
    }

    pub fn n_dcv(&self) -> usize {
        self.role_assignment.values().filter(|r| r.is_dcv()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnNames {
    pub track_id: String,
    pub frame: String,
    pub x: String,
    pub y: String,
    pub v_x: String,
    pub v_y: String,
    /// Optional in the file; rows default to cars when absent.
    pub class: String,
    /// Optional in the file; the role policy applies when absent.
    pub role: String,
}

impl Default for ColumnNames {
    fn default() -> Self {
        ColumnNames {
            track_id: "trackId".into(),
            frame: "frame".into(),
            x: "xCenter".into(),
            y: "yCenter".into(),
            v_x: "xVelocity".into(),
            v_y: "yVelocity".into(),
            class: "class".into(),
            role: "role".into(),
        }
    }
}

/// How tracks are given roles when the file has no role column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RolePolicy {
    /// Tracks in id order alternate UCV, DCV, UCV, ...
    #[default]
    Alternate,
    AllBoth,
    /// The first `ucv` tracks in id order are UCVs, the next `dcv` are DCVs,
    /// the rest stay passive.
    Counts {
        ucv: usize,
        dcv: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SchemaOptions {
    pub columns: ColumnNames,
    /// Overrides the file metadata; 25 Hz when neither is given.
    pub frame_rate: Option<f64>,
    pub role_policy: RolePolicy,
    /// Overrides the file metadata and the centroid default.
    pub server_position: Option<(f64, f64)>,
}

const META_TAG: &str = "# fairsim";

#[derive(Default)]
struct Metadata {
    server: (Option<f64>, Option<f64>),
    time_origin: Option<f64>,
    frame_rate: Option<f64>,
}

fn parse_metadata(line: &str) -> Result<Metadata, TrajectoryError> {
    let mut meta = Metadata::default();
    for pair in line.trim_start_matches(META_TAG).split_whitespace() {
        let Some((key, value)) = pair.split_once('=') else {
            continue;
        };
        let v: f64 = value.parse().map_err(|_| TrajectoryError::Parse {
            row: 1,
            column: key.to_string(),
            message: format!("bad metadata value `{value}`"),
        })?;
        match key {
            "server_x" => meta.server.0 = Some(v),
            "server_y" => meta.server.1 = Some(v),
            "time_origin" => meta.time_origin = Some(v),
            "frame_rate" => meta.frame_rate = Some(v),
            _ => {}
        }
    }
    Ok(meta)
}

pub fn load_csv(path: impl AsRef<Path>, opts: &SchemaOptions) -> Result<Scenario, TrajectoryError> {
    let file = std::fs::File::open(path)?;
    read_csv(file, opts)
}

pub fn read_csv(mut input: impl Read, opts: &SchemaOptions) -> Result<Scenario, TrajectoryError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let (meta, body, offset) = match text.split_once('\n') {
        Some((first, rest)) if first.starts_with(META_TAG) => (parse_metadata(first)?, rest, 1),
        _ => (Metadata::default(), text.as_str(), 0),
    };

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| find(name).ok_or_else(|| TrajectoryError::Schema(name.to_string()));
    let c = &opts.columns;
    let (i_id, i_frame, i_x, i_y, i_vx, i_vy) = (
        required(&c.track_id)?,
        required(&c.frame)?,
        required(&c.x)?,
        required(&c.y)?,
        required(&c.v_x)?,
        required(&c.v_y)?,
    );
    let i_class = find(&c.class);
    let i_role = find(&c.role);

    let mut tracks: BTreeMap<VehicleId, Vec<TrajectoryPoint>> = BTreeMap::new();
    let mut roles: BTreeMap<VehicleId, Role> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line()) + offset;
        let field = |i: usize, name: &str| -> Result<&str, TrajectoryError> {
            record.get(i).ok_or_else(|| TrajectoryError::Parse {
                row,
                column: name.to_string(),
                message: "missing field".into(),
            })
        };
        let number = |i: usize, name: &str| -> Result<f64, TrajectoryError> {
            let raw = field(i, name)?;
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(TrajectoryError::Parse {
                    row,
                    column: name.to_string(),
                    message: format!("not a finite number: `{raw}`"),
                }),
            }
        };
        let class = match i_class {
            Some(i) => {
                let raw = field(i, &c.class)?;
                AgentClass::parse(raw).ok_or_else(|| TrajectoryError::Parse {
                    row,
                    column: c.class.clone(),
                    message: format!("unknown class `{raw}`"),
                })?
            }
            None => AgentClass::Car,
        };
        if !class.is_vehicle() {
            continue;
        }
        let raw_frame = field(i_frame, &c.frame)?;
        let frame_index: u64 = raw_frame.parse().map_err(|_| TrajectoryError::Parse {
            row,
            column: c.frame.clone(),
            message: format!("not a frame index: `{raw_frame}`"),
        })?;
        let id = VehicleId::new(field(i_id, &c.track_id)?);
        let point = TrajectoryPoint::new(
            id.clone(),
            frame_index,
            number(i_x, &c.x)?,
            number(i_y, &c.y)?,
            number(i_vx, &c.v_x)?,
            number(i_vy, &c.v_y)?,
            class,
        );
        if let Some(i) = i_role {
            let raw = field(i, &c.role)?;
            if !raw.is_empty() {
                let role = Role::parse(raw).ok_or_else(|| TrajectoryError::Parse {
                    row,
                    column: c.role.clone(),
                    message: format!("unknown role `{raw}`"),
                })?;
                roles.entry(id.clone()).or_insert(role);
            }
        }
        tracks.entry(id).or_default().push(point);
    }

    if tracks.is_empty() {
        return Err(TrajectoryError::EmptyScenario);
    }
    for (id, points) in tracks.iter_mut() {
        points.sort_by_key(|p| p.frame_index);
        if let Some(w) = points
            .windows(2)
            .find(|w| w[0].frame_index == w[1].frame_index)
        {
            return Err(TrajectoryError::Parse {
                row: 0,
                column: c.frame.clone(),
                message: format!("track {id} repeats frame {}", w[0].frame_index),
            });
        }
    }

    let role_assignment = if i_role.is_some() {
        roles
    } else {
        assign_roles(tracks.keys(), opts.role_policy)
    };
    let server_position = match (opts.server_position, meta.server) {
        (Some(p), _) => p,
        (None, (Some(x), Some(y))) => (x, y),
        _ => centroid(&tracks),
    };
    Ok(Scenario {
        tracks,
        server_position,
        role_assignment,
        time_origin: meta.time_origin.unwrap_or(0.0),
        frame_rate: opts.frame_rate.or(meta.frame_rate).unwrap_or(25.0),
    })
}

fn assign_roles<'a>(
    ids: impl Iterator<Item = &'a VehicleId>,
    policy: RolePolicy,
) -> BTreeMap<VehicleId, Role> {
    ids.enumerate()
        .filter_map(|(i, id)| {
            let role = match policy {
                RolePolicy::Alternate if i % 2 == 0 => Role::Ucv,
                RolePolicy::Alternate => Role::Dcv,
                RolePolicy::AllBoth => Role::Both,
                RolePolicy::Counts { ucv, .. } if i < ucv => Role::Ucv,
                RolePolicy::Counts { ucv, dcv } if i < ucv + dcv => Role::Dcv,
                RolePolicy::Counts { .. } => return None,
            };
            Some((id.clone(), role))
        })
        .collect()
}

fn centroid(tracks: &BTreeMap<VehicleId, Vec<TrajectoryPoint>>) -> (f64, f64) {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for p in tracks.values().flatten() {
        sx += p.x;
        sy += p.y;
        n += 1;
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        (sx / n as f64, sy / n as f64)
    }
}

/// Writes a scenario in the default column layout, with a metadata comment
/// line carrying the server position, time origin and frame rate.
pub fn to_csv_string(scenario: &Scenario) -> String {
    let c = ColumnNames::default();
    let mut out = format!(
        "{META_TAG} server_x={} server_y={} time_origin={} frame_rate={}\n",
        scenario.server_position.0,
        scenario.server_position.1,
        scenario.time_origin,
        scenario.frame_rate
    );
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            &c.track_id,
            &c.frame,
            &c.x,
            &c.y,
            &c.v_x,
            &c.v_y,
            &c.class,
            &c.role,
        ])
        .expect("in-memory write");
    for (id, points) in &scenario.tracks {
        let role = scenario.role_assignment.get(id).map_or("", |r| r.as_str());
        for p in points {
            writer
                .write_record([
                    id.as_str(),
                    &p.frame_index.to_string(),
                    &p.x.to_string(),
                    &p.y.to_string(),
                    &p.v_x.to_string(),
                    &p.v_y.to_string(),
                    p.agent_class.as_str(),
                    role,
                ])
                .expect("in-memory write");
        }
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    out.push_str(std::str::from_utf8(&bytes).expect("utf-8 fields"));
    out
}

pub fn write_csv(scenario: &Scenario, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, to_csv_string(scenario))
}

/// States of every role-holding vehicle alive at `t`, in id order.
/// Streaks start at zero; the engine carries its own.
pub fn sample_states(
    scenario: &Scenario,
    t: f64,
    cfg: &SimConfig,
) -> Result<Vec<VehicleState>, TrajectoryError> {
    let (start, end) = scenario.span();
    if !(t >= scenario.time_origin.min(start) - FRAME_EPS && t <= end + FRAME_EPS) {
        return Err(TrajectoryError::OutOfRange { t, start, end });
    }
    let frame_pos = (t - scenario.time_origin) * scenario.frame_rate + FRAME_EPS;
    if frame_pos < 0.0 {
        return Ok(Vec::new());
    }
    let frame = frame_pos.floor() as u64;
    let mut states = Vec::new();
    for (id, role) in &scenario.role_assignment {
        let Some(points) = scenario.tracks.get(id) else {
            continue;
        };
        let (Some(first), Some(last)) = (points.first(), points.last()) else {
            continue;
        };
        if frame < first.frame_index || frame > last.frame_index {
            continue;
        }
        let idx = points.partition_point(|p| p.frame_index <= frame) - 1;
        let p = &points[idx];
        states.push(VehicleState {
            vehicle_id: id.clone(),
            time: t,
            position: (p.x, p.y),
            speed: p.speed,
            is_ucv: role.is_ucv(),
            is_dcv: role.is_dcv(),
            weights: cfg.default_weights,
            unallocated_streak: 0,
        });
    }
    Ok(states)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// Constant speed around a circle centered on the server.
    ConstantSpeedRing,
    /// Ring driving that alternates 4 s of motion with 2 s standing still.
    StopAndGo,
    /// Straight passes above highway speed, wrapping around a 120 m strip.
    HighwayPass,
}

impl Pattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pattern::ConstantSpeedRing => "constant_speed_ring",
            Pattern::StopAndGo => "stop_and_go",
            Pattern::HighwayPass => "highway_pass",
        }
    }

    /// Speed range used when the caller does not give one, m/s.
    pub fn default_speed_range(&self) -> (f64, f64) {
        match self {
            Pattern::ConstantSpeedRing => (0.0, 17.72),
            Pattern::StopAndGo => (5.0, 17.72),
            Pattern::HighwayPass => (28.0, 36.0),
        }
    }
}

impl FromStr for Pattern {
    type Err = TrajectoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant_speed_ring" => Ok(Pattern::ConstantSpeedRing),
            "stop_and_go" => Ok(Pattern::StopAndGo),
            "highway_pass" => Ok(Pattern::HighwayPass),
            other => Err(TrajectoryError::InvalidPattern(other.to_string())),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    /// Falls back to [`Pattern::default_speed_range`].
    pub speed_range: Option<(f64, f64)>,
    /// Ring radius, or lateral offset for highway passes, meters.
    pub radius_range: (f64, f64),
    pub frame_rate: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            speed_range: None,
            radius_range: (4.0, 10.0),
            frame_rate: 25.0,
        }
    }
}

const DRIVE_S: f64 = 4.0;
const STOP_S: f64 = 2.0;
const STRIP_HALF: f64 = 60.0;

/// Distance covered by a stop-and-go vehicle after `u` seconds of its cycle.
fn stop_and_go_distance(u: f64, speed: f64) -> f64 {
    let cycle = DRIVE_S + STOP_S;
    let full = (u / cycle).floor();
    speed * (full * DRIVE_S + (u - full * cycle).min(DRIVE_S))
}

pub fn synthesize(
    pattern: &str,
    n_ucv: usize,
    n_dcv: usize,
    duration: f64,
    seed: u64,
) -> Result<Scenario, TrajectoryError> {
    synthesize_with(
        pattern.parse()?,
        n_ucv,
        n_dcv,
        duration,
        seed,
        &SynthParams::default(),
    )
}

pub fn synthesize_with(
    pattern: Pattern,
    n_ucv: usize,
    n_dcv: usize,
    duration: f64,
    seed: u64,
    params: &SynthParams,
) -> Result<Scenario, TrajectoryError> {
    if n_ucv + n_dcv == 0 {
        return Err(TrajectoryError::EmptyScenario);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (v_lo, v_hi) = params.speed_range.unwrap_or(pattern.default_speed_range());
    let (r_lo, r_hi) = params.radius_range;
    let fr = params.frame_rate;
    let n_frames = (duration.max(0.0) * fr).round() as u64;

    let ids = (0..n_ucv)
        .map(|i| (VehicleId::new(format!("ucv-{i:03}")), Role::Ucv))
        .chain((0..n_dcv).map(|i| (VehicleId::new(format!("dcv-{i:03}")), Role::Dcv)));
    let mut tracks = BTreeMap::new();
    let mut role_assignment = BTreeMap::new();
    for (id, role) in ids {
        let speed = rng.gen_range(v_lo..=v_hi);
        let radius = rng.gen_range(r_lo..=r_hi);
        let phase = rng.gen_range(0.0..TAU);
        let sense = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let offset = rng.gen_range(0.0..DRIVE_S + STOP_S);
        let mut points = Vec::with_capacity(n_frames as usize + 1);
        for f in 0..=n_frames {
            let t = f as f64 / fr;
            let (x, y, vx, vy) = match pattern {
                Pattern::ConstantSpeedRing | Pattern::StopAndGo => {
                    let (dist, v) = if pattern == Pattern::StopAndGo {
                        let u = t + offset;
                        let moving = u % (DRIVE_S + STOP_S) < DRIVE_S;
                        (
                            stop_and_go_distance(u, speed) - stop_and_go_distance(offset, speed),
                            if moving { speed } else { 0.0 },
                        )
                    } else {
                        (speed * t, speed)
                    };
                    let angle = phase + sense * dist / radius;
                    let (s, c) = angle.sin_cos();
                    (radius * c, radius * s, -sense * v * s, sense * v * c)
                }
                Pattern::HighwayPass => {
                    let start = phase / TAU * 2.0 * STRIP_HALF - STRIP_HALF;
                    let x = (start + STRIP_HALF + sense * speed * t).rem_euclid(2.0 * STRIP_HALF)
                        - STRIP_HALF;
                    (x, sense * radius, sense * speed, 0.0)
                }
            };
            points.push(TrajectoryPoint::new(
                id.clone(),
                f,
                x,
                y,
                vx,
                vy,
                AgentClass::Car,
            ));
        }
        role_assignment.insert(id.clone(), role);
        tracks.insert(id, points);
    }
    Ok(Scenario {
        tracks,
        server_position: (0.0, 0.0),
        role_assignment,
        time_origin: 0.0,
        frame_rate: fr,
    })
}
