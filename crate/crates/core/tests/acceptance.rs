//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the report reads top to bottom; exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use fairsim_core::adapter::{solve_p0, solve_p1, AdaptRequest};
use fairsim_core::allocator::{allocate, dop_max, AllocationPlan, CaseLabel};
use fairsim_core::energy::{camera_energy, transmit_energy, EnergyParams};
use fairsim_core::engine::{run, sweep, Aggregates, Algorithm, MetricsLedger, RunSpec};
use fairsim_core::radio::{path_loss, LinkState};
use fairsim_core::report::{emit_csv, series_csv};
use fairsim_core::scenario::{
    sigma_ratio, Config, Direction, Preference, Resolution, SimConfig, VehicleId, VehicleState,
    Weights,
};
use fairsim_core::trajectory::synthesize;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestCaseError, TestRunner};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn close(x: f64, want: f64, tol: f64) -> bool {
    (x - want).abs() <= tol
}

// ---------------------------------------------------------------- 1

fn formulas() -> Outcome {
    let cfg = SimConfig::default();
    let p = EnergyParams::default();
    let vga = Resolution::new(640, 480).with_depth(8);
    let mut failures = Vec::new();
    let mut check = |name: &str, got: f64, want: f64, tol: f64| {
        if !close(got, want, tol) {
            failures.push(format!("{name}={got} want {want}±{tol}"));
        }
    };

    let pl = path_loss(10.0, &cfg).unwrap();
    check("path_loss", pl, 103.604_224_834_232_11, 1e-6);
    // printed to three decimals
    check("path_loss(printed)", pl, 103.604, 5e-4);

    let eu_tr = transmit_energy(&vga, 173e6, &p).unwrap();
    check("EU_tr", eu_tr, 0.460_30, 1e-4);
    check("EU_tr(hand)", eu_tr, 0.460_299_714_959_537_6, 1e-12);

    let eu_cam = camera_energy(&vga, &p);
    check("EU_cam", eu_cam, 1.530_88, 1e-4);
    check("EU_cam(hand)", eu_cam, 1.530_847_215_165_44, 1e-12);

    let dop = dop_max(173e6, &cfg).unwrap();
    check("DOP_max", dop, 0.014_206, 1e-6);
    check("DOP_max(hand)", dop, 0.014_205_780_346_820_81, 1e-15);

    let state = |speed: f64| VehicleState {
        vehicle_id: VehicleId::from("v"),
        time: 0.0,
        position: (0.0, 0.0),
        speed,
        is_ucv: true,
        is_dcv: false,
        weights: Weights::default(),
        unallocated_streak: 0,
    };
    let sigma = sigma_ratio(&state(20.0), &state(10.0), &cfg).unwrap();
    check("sigma", sigma, 1.9841, 1e-4);
    check("sigma(hand)", sigma, 1.984_006_488_878_22, 1e-12);

    if failures.is_empty() {
        outcome(
            true,
            format!("PL={pl:.6} EU_tr={eu_tr:.6} EU_cam={eu_cam:.6} DOP={dop:.9} sigma={sigma:.6}"),
        )
    } else {
        outcome(false, failures.join("; "))
    }
}

// ---------------------------------------------------------------- 2

const RATES: [f64; 8] = [29e6, 58e6, 87e6, 116e6, 173e6, 231e6, 260e6, 289e6];

#[derive(Debug, Clone)]
struct Period {
    ucvs: Vec<(f64, f64, u32)>,
    dcv_rates: Vec<f64>,
    index: u64,
}

fn speed() -> impl Strategy<Value = f64> {
    prop_oneof![
        1 => Just(0.0),
        2 => prop::sample::select(vec![5.0, 10.0, 15.0]),
        5 => 0.1f64..26.8,
        2 => 26.81f64..40.0,
    ]
}

fn rate() -> impl Strategy<Value = f64> {
    prop_oneof![
        1 => Just(0.0),
        9 => prop::sample::select(RATES.to_vec()),
    ]
}

fn period() -> impl Strategy<Value = Period> {
    (
        prop::collection::vec((speed(), rate(), 0u32..=3), 1..12),
        prop::collection::vec(rate(), 0..6),
        0u64..40,
    )
        .prop_map(|(ucvs, dcv_rates, index)| Period {
            ucvs,
            dcv_rates,
            index,
        })
}

fn build(p: &Period) -> (Vec<VehicleState>, BTreeMap<VehicleId, LinkState>) {
    let link = |rate: f64| LinkState {
        distance: 5.0,
        path_loss: 0.0,
        snr: 0.0,
        rate,
        connected: rate > 0.0,
    };
    let mut states = Vec::new();
    let mut links = BTreeMap::new();
    for (i, &(speed, rate, streak)) in p.ucvs.iter().enumerate() {
        let id = VehicleId::new(format!("u{i:02}"));
        states.push(VehicleState {
            vehicle_id: id.clone(),
            time: 0.0,
            position: (0.0, 0.0),
            speed,
            is_ucv: true,
            is_dcv: false,
            weights: Weights::default(),
            unallocated_streak: streak,
        });
        links.insert(id, link(rate));
    }
    for (i, &rate) in p.dcv_rates.iter().enumerate() {
        let id = VehicleId::new(format!("d{i:02}"));
        states.push(VehicleState {
            vehicle_id: id.clone(),
            time: 0.0,
            position: (0.0, 0.0),
            speed: 8.0,
            is_ucv: false,
            is_dcv: true,
            weights: Weights::default(),
            unallocated_streak: 0,
        });
        links.insert(id, link(rate));
    }
    (states, links)
}

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(what()))
    }
}

fn check_period(p: &Period, cfg: &SimConfig) -> Result<(), TestCaseError> {
    let (states, links) = build(p);
    let a = allocate(&states, &links, p.index, 0.0, cfg).expect("allocates");
    let plan: &AllocationPlan = &a.plan;
    let t = cfg.period_t;

    let total = plan.total_dop() + plan.total_ddp() + plan.leftover;
    ensure((total - t).abs() <= 1e-12, || {
        format!("budget {total} != {t}")
    })?;
    ensure(
        plan.dop_grants.iter().all(|g| g.duration >= 0.0)
            && plan.ddp_grants.iter().all(|g| g.duration >= 0.0)
            && plan.leftover >= 0.0,
        || "negative duration".into(),
    )?;

    let by_id: BTreeMap<&VehicleId, &VehicleState> =
        states.iter().map(|s| (&s.vehicle_id, s)).collect();
    let rate_of = |id: &VehicleId| links[id].rate;

    // speed priority among NORMAL grants at equal rates
    let normal: Vec<_> = plan
        .dop_grants
        .iter()
        .filter(|g| g.case == CaseLabel::Normal && rate_of(&g.vehicle_id) > 0.0)
        .collect();
    for a in &normal {
        for b in &normal {
            let (va, vb) = (by_id[&a.vehicle_id].speed, by_id[&b.vehicle_id].speed);
            if rate_of(&a.vehicle_id) == rate_of(&b.vehicle_id) && va > vb {
                ensure(a.duration >= b.duration, || {
                    format!(
                        "{} at {va} got {} < {} at {vb}",
                        a.vehicle_id, a.duration, b.duration
                    )
                })?;
            }
        }
    }

    // highway guarantee
    let highway: Vec<_> = plan
        .dop_grants
        .iter()
        .filter(|g| g.case == CaseLabel::Highway && rate_of(&g.vehicle_id) > 0.0)
        .collect();
    let max_bits = cfg.max_resolution(Direction::Uplink).bits as f64;
    let frames = cfg.fps0 * t;
    if !highway.is_empty() {
        let r_min = highway
            .iter()
            .map(|g| rate_of(&g.vehicle_id))
            .fold(f64::INFINITY, f64::min);
        let highway_demand = highway.len() as f64 * max_bits * frames / r_min;
        if highway_demand <= t {
            for g in &highway {
                let carried = g.duration * rate_of(&g.vehicle_id);
                ensure(carried >= max_bits * frames * (1.0 - 1e-12), || {
                    format!("highway {} carries {carried} bits", g.vehicle_id)
                })?;
            }
        }
    }

    // the reference gets a full reservation when what precedes it leaves room
    if let Some(x) = &plan.reference {
        let full = max_bits * frames / rate_of(x);
        let pos = plan
            .dop_grants
            .iter()
            .position(|g| &g.vehicle_id == x)
            .unwrap();
        let before: f64 = plan.dop_grants[..pos].iter().map(|g| g.duration).sum();
        let got = plan.dop_grants[pos].duration;
        if before + full <= t {
            ensure((got - full).abs() <= 1e-12 * full, || {
                format!("reference {x} got {got}, full {full}")
            })?;
        }
    }

    // starvation bound
    let any_normal_served = normal.iter().any(|g| g.duration > 0.0);
    if any_normal_served {
        for (id, streak) in &a.streaks {
            if rate_of(id) > 0.0 {
                ensure(*streak <= cfg.beta_unallocated, || {
                    format!("{id} streak {streak} while a NORMAL vehicle was served")
                })?;
            }
        }
    }

    // determinism
    let again = allocate(&states, &links, p.index, 0.0, cfg).expect("allocates");
    ensure(
        again == a
            && serde_json::to_string(&again.plan).unwrap()
                == serde_json::to_string(&a.plan).unwrap(),
        || "allocation is not deterministic".into(),
    )?;
    Ok(())
}

fn allocation_invariants() -> Outcome {
    let cfg = SimConfig::default();
    let cases = 10_000;
    let mut runner = TestRunner::new(PropConfig {
        cases,
        failure_persistence: None,
        ..PropConfig::default()
    });
    match runner.run(&period(), |p| check_period(&p, &cfg)) {
        Ok(()) => outcome(true, format!("{cases} randomized periods")),
        Err(e) => outcome(false, e.to_string()),
    }
}

// ---------------------------------------------------------------- 3

/// Offload energy by hand: camera cubic, promotion, data phase, tail.
fn hand_offload(bits: f64, pixels: f64, rate: f64) -> f64 {
    let cam = ((-1.772e-17 * pixels + 7.491e-12) * pixels + 2.379e-6) * pixels + 0.6068;
    let p_tr = 0.01821 * (rate / 1e6) + 0.7368;
    cam + 1.97 * 0.034 + p_tr * bits / rate + 1.61 * 0.21
}

fn hand_download(bits: f64, rate: f64) -> f64 {
    bits / rate
}

/// Exhaustive argmin of `w1 * E - w2 * U` over the ladder, ties to larger.
fn enumerate(
    ladder: &[Resolution],
    grant: f64,
    rate: f64,
    w: Preference,
    energy: impl Fn(f64, f64) -> f64,
) -> Option<Resolution> {
    let mut best: Option<(f64, Resolution)> = None;
    for &r in ladder {
        let pixels = (r.k * r.s) as f64;
        let bits = pixels * 8.0;
        let u = bits / (grant * rate);
        if u > 1.0 + 1e-12 {
            continue;
        }
        let q = w.w1 * energy(bits, pixels) - w.w2 * u;
        let better = match best {
            None => true,
            Some((bq, br)) => q < bq || (q == bq && r.k * r.s >= br.k * br.s),
        };
        if better {
            best = Some((q, r));
        }
    }
    best.map(|(_, r)| r)
}

fn optimizer_oracle() -> Outcome {
    let cfg = SimConfig::default();
    let p = EnergyParams::default();
    let strategy = (
        prop::sample::select(RATES.to_vec()),
        0.0005f64..0.1,
        0.01f64..50.0,
        0.01f64..50.0,
        0.001f64..1000.0,
        prop::bool::weighted(0.1),
    );
    let mut runner = TestRunner::new(PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let max = Resolution::new(640, 480);
    let result = runner.run(&strategy, |(rate, grant, w1, w2, scale, full)| {
        let full_grant = 640.0 * 480.0 * 8.0 / rate;
        let grant = if full { full_grant } else { grant };
        let w = Preference::new(w1, w2);
        let scaled = Preference::new(w1 * scale, w2 * scale);
        let req = |weights| AdaptRequest {
            vehicle_id: VehicleId::from("v"),
            grant,
            rate,
            weights,
            dop_max: Some(full_grant),
        };

        let up_want = if full {
            Some(max)
        } else {
            enumerate(cfg.ladder(Direction::Uplink), grant, rate, w, |b, px| {
                hand_offload(b, px, rate)
            })
        };
        let up = solve_p0(&req(w), &cfg, &p)
            .ok()
            .map(|d| d.resolution.resolution());
        ensure(up == up_want, || format!("P0 {up:?} != oracle {up_want:?}"))?;
        let up_scaled = solve_p0(&req(scaled), &cfg, &p)
            .ok()
            .map(|d| d.resolution.resolution());
        ensure(up_scaled == up, || {
            format!("P0 scaled {up_scaled:?} != {up:?}")
        })?;

        let down_req = AdaptRequest {
            dop_max: None,
            ..req(w)
        };
        let down_want = enumerate(cfg.ladder(Direction::Downlink), grant, rate, w, |b, _| {
            hand_download(b, rate)
        });
        let down = solve_p1(&down_req, &cfg, &p)
            .ok()
            .map(|d| d.resolution.resolution());
        ensure(down == down_want, || {
            format!("P1 {down:?} != oracle {down_want:?}")
        })?;
        let down_scaled = solve_p1(
            &AdaptRequest {
                weights: scaled,
                ..down_req.clone()
            },
            &cfg,
            &p,
        )
        .ok()
        .map(|d| d.resolution.resolution());
        ensure(down_scaled == down, || {
            format!("P1 scaled {down_scaled:?} != {down:?}")
        })?;
        Ok(())
    });
    match result {
        Ok(()) => outcome(
            true,
            "1000 instances, uplink and downlink, with weight scaling",
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

// ---------------------------------------------------------------- 4, 5

const SCENARIO_SEEDS: [u64; 3] = [1, 2, 3];
const SECONDS: f64 = 30.0;

/// Aggregates averaged over the scenario seeds.
#[derive(Debug, Clone, Copy, Default)]
struct Mean {
    utilization: f64,
    fps_ucv: f64,
    fps_dcv: f64,
}

fn averaged(n_ucv: usize, n_dcv: usize, algorithms: &[Algorithm]) -> BTreeMap<Algorithm, Mean> {
    let mut specs = Vec::new();
    for &seed in &SCENARIO_SEEDS {
        let scenario = Arc::new(
            synthesize("constant_speed_ring", n_ucv, n_dcv, SECONDS, seed).expect("synthesizes"),
        );
        for &a in algorithms {
            specs.push(RunSpec::new(
                scenario.clone(),
                a,
                Config::default(),
                SECONDS,
                seed,
            ));
        }
    }
    let ledgers: Vec<MetricsLedger> = sweep(&specs)
        .into_iter()
        .map(|r| r.expect("runs"))
        .collect();
    let mut out: BTreeMap<Algorithm, Mean> = BTreeMap::new();
    let n = SCENARIO_SEEDS.len() as f64;
    for l in &ledgers {
        let g: &Aggregates = &l.aggregates;
        let m = out.entry(l.meta.algorithm).or_default();
        m.utilization += g.mean_channel_utilization / n;
        m.fps_ucv += g.avg_fps_ucv / n;
        m.fps_dcv += g.avg_fps_dcv / n;
    }
    out
}

fn utilization_separation() -> Outcome {
    let algorithms = [Algorithm::Fair, Algorithm::SaMax, Algorithm::DaMax];
    let loads = [(4, 4), (7, 8), (10, 10)];
    let mut detail = Vec::new();
    let mut ratios: Vec<(f64, f64)> = Vec::new();
    for (u, d) in loads {
        let m = averaged(u, d, &algorithms);
        let fair = m[&Algorithm::Fair].utilization;
        let sa = m[&Algorithm::SaMax].utilization;
        let da = m[&Algorithm::DaMax].utilization;
        ratios.push((fair / sa, fair / da));
        detail.push(format!(
            "N={}: FAIR {fair:.3} SA_MAX {sa:.3} ({:.2}x) DA_MAX {da:.3} ({:.2}x)",
            u + d,
            fair / sa,
            fair / da
        ));
    }
    let (sa20, da20) = ratios[2];
    let doubled = sa20 >= 2.0 && da20 >= 2.0;
    let monotone = ratios
        .windows(2)
        .all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
    detail.push(format!("2x at N=20: {doubled}, monotone: {monotone}"));
    outcome(doubled && monotone, detail.join("; "))
}

fn frame_rates() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for (u, d) in [(2, 2), (4, 4)] {
        let fair = averaged(u, d, &[Algorithm::Fair])[&Algorithm::Fair];
        let ok = fair.fps_ucv >= 9.0;
        pass &= ok;
        detail.push(format!(
            "{u}+{d} FAIR fps(UCV) {:.2} >= 9: {ok}",
            fair.fps_ucv
        ));
    }
    let m = averaged(10, 10, &[Algorithm::Fair, Algorithm::SaMax]);
    let (fair, sa) = (m[&Algorithm::Fair], m[&Algorithm::SaMax]);
    let up = fair.fps_ucv >= 3.0 * sa.fps_ucv;
    let down = fair.fps_dcv >= 3.0 * sa.fps_dcv;
    pass &= up && down;
    detail.push(format!(
        "10+10 fps(UCV) FAIR {:.2} vs SA_MAX {:.2} >= 3x: {up}; fps(DCV) FAIR {:.2} vs SA_MAX {:.2} >= 3x: {down}",
        fair.fps_ucv, sa.fps_ucv, fair.fps_dcv, sa.fps_dcv
    ));
    outcome(pass, detail.join("; "))
}

// ---------------------------------------------------------------- 6

fn preference_sensitivity() -> Outcome {
    let scenario =
        Arc::new(synthesize("constant_speed_ring", 3, 1, SECONDS, 11).expect("synthesizes"));
    // the median-speed offloader never holds the full reservation
    let mut speeds: Vec<(f64, VehicleId)> = scenario
        .tracks
        .iter()
        .filter(|(id, _)| scenario.role_assignment[*id].is_ucv())
        .map(|(id, pts)| (pts[0].speed, id.clone()))
        .collect();
    speeds.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tracked = speeds[1].1.clone();

    let with_weights = |w1: f64, w2: f64| {
        let mut cfg = Config::default();
        cfg.sim.default_weights.uplink = Preference::new(w1, w2);
        run(&RunSpec::new(
            scenario.clone(),
            Algorithm::Fair,
            cfg,
            SECONDS,
            1,
        ))
        .expect("runs")
    };
    let saving = with_weights(20.0, 1.0);
    let quality = with_weights(1.0, 20.0);
    let series = |l: &MetricsLedger| -> Vec<(Option<u64>, f64)> {
        l.series_for(&tracked, Direction::Uplink)
            .map(|r| {
                (
                    r.resolution.map(|r| r.k as u64 * r.s as u64),
                    r.frame_energy,
                )
            })
            .collect()
    };
    let (a, b) = (series(&saving), series(&quality));
    let mean_energy = |s: &[(Option<u64>, f64)]| {
        let e: Vec<f64> = s.iter().filter(|x| x.0.is_some()).map(|x| x.1).collect();
        (e.iter().sum::<f64>() / e.len().max(1) as f64, e.len())
    };
    let ((ea, na), (eb, nb)) = (mean_energy(&a), mean_energy(&b));
    let pointwise = a.len() == b.len()
        && a.iter().zip(&b).all(|(x, y)| match (x.0, y.0) {
            (Some(px), Some(py)) => px <= py,
            (None, None) => true,
            _ => false,
        });
    let reduction = 1.0 - ea / eb;
    let pass = na > 0 && nb > 0 && reduction >= 0.20 && pointwise;
    outcome(
        pass,
        format!(
            "{tracked}: mean frame energy {ea:.4} J vs {eb:.4} J, {:.1}% lower; pointwise <=: {pointwise}",
            reduction * 100.0
        ),
    )
}

// ---------------------------------------------------------------- 7

fn determinism() -> Outcome {
    let scenario = Arc::new(synthesize("stop_and_go", 4, 4, 10.0, 7).expect("synthesizes"));
    let specs: Vec<RunSpec> = Algorithm::ALL
        .iter()
        .map(|&a| RunSpec::new(scenario.clone(), a, Config::default(), 10.0, 3))
        .collect();
    let first: Vec<MetricsLedger> = specs.iter().map(|s| run(s).expect("runs")).collect();
    let second: Vec<MetricsLedger> = sweep(&specs)
        .into_iter()
        .map(|r| r.expect("runs"))
        .collect();
    let mut mismatches = Vec::new();
    for (x, y) in first.iter().zip(&second) {
        if x.audit_jsonl() != y.audit_jsonl() || series_csv(x) != series_csv(y) || x != y {
            mismatches.push(x.meta.algorithm.as_str().to_string());
        }
    }
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let m1 = emit_csv(&first, dirs[0].path()).expect("writes");
    let m2 = emit_csv(&second, dirs[1].path()).expect("writes");
    let mut compared = 0;
    for f in &m1.files {
        let a = std::fs::read(dirs[0].path().join(&f.name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(&f.name)).unwrap();
        compared += 1;
        if a != b {
            mismatches.push(f.name.clone());
        }
    }
    let manifest = |d: &tempfile::TempDir| std::fs::read(d.path().join("manifest.json")).unwrap();
    if manifest(&dirs[0]) != manifest(&dirs[1]) || m1.files.len() != m2.files.len() {
        mismatches.push("manifest.json".into());
    }
    if mismatches.is_empty() {
        outcome(
            true,
            format!(
                "{} runs, run vs sweep, {compared} report files byte-identical",
                specs.len()
            ),
        )
    } else {
        outcome(false, format!("differs: {}", mismatches.join(", ")))
    }
}

// ---------------------------------------------------------------- 8

fn baseline_asymmetry() -> Outcome {
    let seconds = 10.0;
    let scenario =
        Arc::new(synthesize("constant_speed_ring", 1, 1, seconds, 5).expect("synthesizes"));
    let mut cfg = Config::default();
    cfg.contention.saturated = true;
    let seeds = 20;
    let specs: Vec<RunSpec> = (0..seeds)
        .map(|s| RunSpec::new(scenario.clone(), Algorithm::DaMax, cfg.clone(), seconds, s))
        .collect();
    let (mut up, mut down) = (0.0, 0.0);
    for l in sweep(&specs) {
        let l = l.expect("runs");
        up += l.aggregates.frames_ucv as f64 / seeds as f64;
        down += l.aggregates.frames_dcv as f64 / seeds as f64;
    }
    outcome(
        down > up,
        format!("mean delivered frames over {seeds} seeds: downlink {down:.1}, uplink {up:.1}"),
    )
}

// ----------------------------------------------------------------

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check, Duration); 8] = [
        ("1 formula conformance", formulas, Duration::from_secs(1)),
        (
            "2 allocation invariants",
            allocation_invariants,
            Duration::from_secs(30),
        ),
        (
            "3 optimizer oracle",
            optimizer_oracle,
            Duration::from_secs(10),
        ),
        (
            "4 utilization separation",
            utilization_separation,
            Duration::from_secs(120),
        ),
        ("5 frame rates", frame_rates, Duration::from_secs(120)),
        (
            "6 preference sensitivity",
            preference_sensitivity,
            Duration::from_secs(30),
        ),
        ("7 determinism", determinism, Duration::from_secs(120)),
        (
            "8 baseline asymmetry",
            baseline_asymmetry,
            Duration::from_secs(30),
        ),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        let timing = if in_time {
            format!("{:.2}s", elapsed.as_secs_f64())
        } else {
            format!(
                "{:.2}s, over the {}s budget",
                elapsed.as_secs_f64(),
                budget.as_secs()
            )
        };
        println!(
            "{} criterion {name} ({timing}): {}",
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
