//! Acceptance criteria 1 to 14, one pass/fail line each.
//!
//! Runs without the libtest harness so every line is printed whether or not
//! it passes; the process exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use lmac_core::markov::{
    build_chain, enumerate_states, lambda_star_closed, lmac_bound, mean_collision_schedules, second_eigenvalue,
    transition_prob_formula, transition_row_brute, CollisionState,
};
use lmac_core::metrics::{jain_index, summarize, AlignedConvergence, RunRecorder, SlidingConvergence, SlotTally};
use lmac_core::schedule_sim::convergence_schedules;
use lmac_core::seeding::replication_seed;
use lmac_core::throughput::throughput_model;
use lmac_core::{Adaptation, Gamma, Horizon, ProtocolKind, ProtocolParams, SimConfig, Simulator, StationGroup};

const GAMMAS: [f64; 3] = [0.1, 0.5, 0.9];
const CAP_SCHEDULES: u64 = 1_000_000;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// `(C, N)` pairs with `2 <= N <= 8`, `N <= C <= 12`.
fn small_grid() -> Vec<(usize, usize)> {
    (2..=12).flat_map(|c| (2..=c.min(8)).map(move |n| (c, n))).collect()
}

/// Station-level enumeration of one L-ZC schedule. Each colliding station
/// either stays or moves; idle slots are exchangeable, so a mover picks an
/// idle slot already chosen by an earlier mover or any fresh one, the latter
/// weighted by how many fresh slots remain.
fn enumerate_row(from: &CollisionState, slots: usize, stations: usize, gamma: f64) -> BTreeMap<Vec<u32>, f64> {
    let idle = from.idle_slots(stations, slots).expect("valid state");
    let owners: Vec<usize> =
        from.parts().iter().enumerate().flat_map(|(slot, &k)| std::iter::repeat_n(slot, k as usize)).collect();
    let mut row = BTreeMap::new();
    let mut kept = vec![0u32; from.collision_slots()];
    let mut moved = Vec::new();
    walk(&owners, 0, 1.0, gamma, idle, &mut kept, &mut moved, &mut row);
    row
}

#[allow(clippy::too_many_arguments)]
fn walk(
    owners: &[usize],
    i: usize,
    weight: f64,
    gamma: f64,
    idle: usize,
    kept: &mut Vec<u32>,
    moved: &mut Vec<u32>,
    row: &mut BTreeMap<Vec<u32>, f64>,
) {
    if i == owners.len() {
        let mut parts: Vec<u32> = kept.iter().chain(moved.iter()).copied().filter(|&k| k >= 2).collect();
        parts.sort_unstable();
        *row.entry(parts).or_insert(0.0) += weight;
        return;
    }
    kept[owners[i]] += 1;
    walk(owners, i + 1, weight * gamma, gamma, idle, kept, moved, row);
    kept[owners[i]] -= 1;
    if idle == 0 {
        return;
    }
    let each = (1.0 - gamma) / idle as f64;
    for j in 0..moved.len() {
        moved[j] += 1;
        walk(owners, i + 1, weight * each, gamma, idle, kept, moved, row);
        moved[j] -= 1;
    }
    if moved.len() < idle {
        let fresh = (idle - moved.len()) as f64;
        moved.push(1);
        walk(owners, i + 1, weight * each * fresh, gamma, idle, kept, moved, row);
        moved.pop();
    }
}

fn criterion_1() -> Verdict {
    let mut worst = 0.0f64;
    let mut pairs = 0usize;
    let mut cross = 0.0f64;
    for (c, n) in small_grid() {
        let states: Vec<CollisionState> =
            enumerate_states(n).into_iter().filter(|s| s.idle_slots(n, c).is_some()).collect();
        for &g in &GAMMAS {
            for from in &states {
                let row = enumerate_row(from, c, n, g);
                // keep the enumerator honest against the plain per-station walk
                if (from.idle_slots(n, c).unwrap() + 1).pow(from.colliding_stations() as u32) <= 20_000 {
                    let brute = transition_row_brute(from, c, n, &g).unwrap();
                    for (to, p) in &brute {
                        let key = to.as_ref().map(|s| s.parts().to_vec()).unwrap_or_default();
                        cross = cross.max((row.get(&key).copied().unwrap_or(0.0) - p).abs());
                    }
                }
                for to in states.iter().filter(|s| s.colliding_stations() == from.colliding_stations()) {
                    let formula = transition_prob_formula(from, to, c, n, &g).unwrap();
                    let oracle = row.get(to.parts()).copied().unwrap_or(0.0);
                    worst = worst.max((formula - oracle).abs());
                    pairs += 1;
                }
            }
        }
    }
    verdict(
        worst <= 1e-12 && cross <= 1e-12,
        format!("max |formula - enumeration| = {worst:.2e} over {pairs} pairs; enumerator vs brute force {cross:.2e}"),
    )
}

fn criterion_2() -> Verdict {
    let mut worst = 0.0f64;
    let mut flagged = Vec::new();
    let mut points = 0;
    for (c, n) in small_grid() {
        for &g in &GAMMAS {
            let chain = build_chain::<f64>(c, n, g).unwrap();
            let sub = second_eigenvalue(&chain);
            let closed = lambda_star_closed(c, n, &g).unwrap();
            worst = worst.max((closed - sub.value).abs());
            if sub.maximiser != 2 {
                flagged.push(format!("(C={c},N={n},g={g}) block {}", sub.maximiser));
            }
            points += 1;
        }
    }
    let blocks = if flagged.is_empty() { "maximising block 2 everywhere".to_string() } else { flagged.join("; ") };
    verdict(worst <= 1e-9, format!("max |closed - numeric| = {worst:.2e} over {points} points; {blocks}"))
}

fn converge(
    kind: ProtocolKind,
    params: ProtocolParams,
    stations: usize,
    slots: usize,
    seed: u64,
) -> Option<(u64, f64)> {
    let cfg = SimConfig { params, seed, ..SimConfig::new(kind, stations, slots) };
    let mut sim = Simulator::new(cfg).unwrap();
    let mut det = AlignedConvergence::new(stations, slots, 0);
    let cap = Horizon::Slots(CAP_SCHEDULES * slots as u64);
    sim.run_until(cap, &mut det, |_, d| d.result().is_some()).unwrap();
    det.result().map(|r| (r.schedules, r.seconds()))
}

fn lzc(gamma: f64) -> ProtocolParams {
    ProtocolParams { gamma: Gamma::Fixed(gamma), ..Default::default() }
}

fn lmac(beta: f64) -> ProtocolParams {
    ProtocolParams { beta, ..Default::default() }
}

fn criterion_3() -> Verdict {
    let runs = 10_000;
    let mut ok = true;
    let mut parts = Vec::new();
    for (c, n, g) in [(8, 8, 0.5), (16, 14, 0.25), (16, 16, 0.3), (16, 16, 0.5), (16, 16, 0.7)] {
        let theory = mean_collision_schedules(&build_chain::<f64>(c, n, g).unwrap()).unwrap();
        let k: Vec<f64> = (0..runs)
            .map(|i| converge(ProtocolKind::Lzc, lzc(g), n, c, replication_seed(3, i)).expect("converges").0 as f64)
            .collect();
        let s = summarize(&k).unwrap();
        let z = (s.mean - theory) / s.stderr;
        ok &= z.abs() <= 3.0;
        parts.push(format!("({c},{n},{g}) theory {theory:.3} sim {:.3} z {z:+.2}", s.mean));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_4() -> Verdict {
    let runs = 400_000;
    let grid: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [14usize, 16] {
        // common random numbers: replication i uses the same seed at every gamma
        let means: Vec<f64> = grid
            .iter()
            .map(|&g| {
                let total: u64 = (0..runs)
                    .map(|i| {
                        convergence_schedules(ProtocolKind::Lzc, &lzc(g), 16, n, replication_seed(4, i), CAP_SCHEDULES)
                            .unwrap()
                            .expect("converges")
                    })
                    .sum();
                total as f64 / runs as f64
            })
            .collect();
        let best = (0..grid.len()).min_by(|&a, &b| means[a].total_cmp(&means[b])).unwrap();
        let target = 1.0 / (16 - n + 2) as f64;
        let hit = (grid[best] - target).abs() <= 0.05 + 1e-9;
        ok &= hit;
        parts.push(format!("N={n} argmin {:.2} (mean {:.4}) target {target:.2}", grid[best], means[best]));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_5() -> Verdict {
    let runs = 1000;
    let mut failures = 0;
    let mut parts = Vec::new();
    for (kind, params) in [(ProtocolKind::Lmac, lmac(0.95)), (ProtocolKind::Lzc, lzc(0.5))] {
        let mut worst = 0;
        for i in 0..runs {
            match converge(kind, params, 16, 16, replication_seed(5, i)) {
                Some((k, _)) => worst = worst.max(k),
                None => failures += 1,
            }
        }
        parts.push(format!("{kind} longest {worst} schedules"));
    }
    verdict(failures == 0, format!("{failures} of {} runs hit the cap; {}", 2 * runs, parts.join(", ")))
}

fn criterion_6() -> Verdict {
    let runs = 500;
    let mean = |kind, params| {
        let v: Vec<(u64, f64)> =
            (0..runs).map(|i| converge(kind, params, 16, 16, replication_seed(6, i)).expect("converges")).collect();
        let k = v.iter().map(|x| x.0 as f64).sum::<f64>() / runs as f64;
        let s = v.iter().map(|x| x.1).sum::<f64>() / runs as f64;
        (k, s)
    };
    let (lk, ls) = mean(ProtocolKind::Lmac, lmac(0.95));
    let (bk, bs) = mean(ProtocolKind::Lbeb, ProtocolParams::default());
    verdict(
        bk >= 10.0 * lk && bs >= 10.0 * ls,
        format!("L-MAC {lk:.1} schedules / {ls:.3} s, L-BEB {bk:.1} / {bs:.2} s: {:.0}x, {:.0}x", bk / lk, bs / ls),
    )
}

fn criterion_7() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, c, tol) in [(8, 16, 0.01), (16, 16, 0.01), (20, 16, 0.10)] {
        let cfg = SimConfig { horizon: Horizon::Seconds(20.0), seed: 7, ..SimConfig::new(ProtocolKind::Lmac, n, c) };
        let mut sim = Simulator::new(cfg.clone()).unwrap();
        let mut rec = RunRecorder::for_config(&cfg);
        sim.run_for(cfg.horizon, &mut rec).unwrap();
        // once converged, only the collision-free part is comparable
        let tally = if n <= c { rec.after_convergence().expect("converges") } else { rec.total };
        let got = tally.throughput(&cfg.phy).unwrap().normalised;
        let model = throughput_model::<f64>(n, c, &cfg.phy).unwrap();
        let rel = (got - model).abs() / model;
        ok &= rel <= tol;
        parts.push(format!("({n},{c}) sim {got:.4} model {model:.4} off {:.2}%", rel * 100.0));
    }
    verdict(ok, parts.join("; "))
}

fn saturated(kind: ProtocolKind, n: usize, c: usize, error_rate: f64, seconds: f64, seed: u64) -> f64 {
    let mut cfg = SimConfig { horizon: Horizon::Seconds(seconds), error_rate, seed, ..SimConfig::new(kind, n, c) };
    cfg.phy = cfg.phy.with_payload(1000);
    lmac_core::metrics::measure(&cfg).unwrap().thr_norm
}

fn criterion_8() -> Verdict {
    let mean = |kind| (0..5).map(|i| saturated(kind, 16, 16, 0.0, 20.0, replication_seed(8, i))).sum::<f64>() / 5.0;
    let dcf = mean(ProtocolKind::Dcf);
    let lm = mean(ProtocolKind::Lmac);
    let lz = mean(ProtocolKind::Lzc);
    verdict(
        lm >= 1.25 * dcf && lz >= 1.25 * dcf,
        format!(
            "DCF {dcf:.4}, L-MAC {lm:.4} (+{:.1}%), L-ZC {lz:.4} (+{:.1}%)",
            (lm / dcf - 1.0) * 100.0,
            (lz / dcf - 1.0) * 100.0
        ),
    )
}

/// Announced length at each access-point schedule boundary.
fn announced_history(start: usize, seed: u64, schedules: usize) -> Vec<usize> {
    let cfg = SimConfig { adaptation: Adaptation::AccessPoint, seed, ..SimConfig::new(ProtocolKind::Lzc, 10, start) };
    let mut sim = Simulator::new(cfg).unwrap();
    let mut len = sim.announced_len().unwrap();
    let mut history = vec![len];
    let mut into = 0;
    while history.len() < schedules {
        sim.step(&mut ()).unwrap();
        into += 1;
        if into == len {
            len = sim.announced_len().unwrap();
            history.push(len);
            into = 0;
        }
    }
    history
}

fn criterion_9() -> Verdict {
    let total = 3000;
    let mut failed = Vec::new();
    let mut latest = 0;
    for start in [5usize, 64] {
        for i in 0..100 {
            let h = announced_history(start, replication_seed(9, i), total);
            // the last change must land on 11, with at least 100 schedules after it
            let settle = h.iter().rposition(|&l| l != 11).map_or(0, |p| p + 1);
            if total - settle < 100 {
                failed.push(format!("C0={start} rep {i} ends at {}", h[total - 1]));
            }
            latest = latest.max(settle);
        }
    }
    verdict(
        failed.is_empty(),
        format!(
            "{} of 200 seeds settle at 11 (latest settles by schedule {latest}) {}",
            200 - failed.len(),
            failed.join(", ")
        ),
    )
}

fn criterion_10() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for i in 0..5 {
        let cfg = SimConfig {
            adaptation: Adaptation::Alzc,
            seed: replication_seed(10, i),
            ..SimConfig::new(ProtocolKind::Lzc, 24, 16)
        };
        let mut sim = Simulator::new(cfg).unwrap();
        sim.run_for(Horizon::Seconds(30.0), &mut ()).unwrap();
        let before: Vec<u64> = sim.stations().iter().map(|s| s.delivered).collect();
        let mut tally = SlotTally::default();
        sim.run_for(Horizon::Seconds(60.0), &mut tally).unwrap();
        let info = sim.stations();
        let all_32 = info.iter().all(|s| s.schedule_len == Some(32));
        let got: Vec<f64> = info.iter().zip(&before).map(|(s, b)| (s.delivered - b) as f64).collect();
        let mean = got.iter().sum::<f64>() / got.len() as f64;
        let spread =
            (got.iter().cloned().fold(f64::MIN, f64::max) - got.iter().cloned().fold(f64::MAX, f64::min)) / mean;
        ok &= all_32 && tally.collision == 0 && spread <= 0.05;
        parts.push(format!("all at 32: {all_32}, collisions {}, spread {:.2}%", tally.collision, spread * 100.0));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_11() -> Verdict {
    let runs = 500;
    let profile = |beta: f64| -> Vec<f64> {
        let mut acc = vec![Vec::new(); 10];
        for i in 0..runs {
            let cfg = SimConfig {
                params: lmac(beta),
                seed: replication_seed(11, i),
                ..SimConfig::new(ProtocolKind::Lmac, 16, 16)
            };
            let mut sim = Simulator::new(cfg.clone()).unwrap();
            let mut rec = RunRecorder::for_config(&cfg);
            sim.run_until(Horizon::Slots(CAP_SCHEDULES * 16), &mut rec, |_, r| r.converged().is_some()).unwrap();
            for (m, v) in acc.iter_mut().enumerate() {
                if let Some(f) = jain_index(&rec.pre_convergence, 16, m + 1) {
                    v.push(f);
                }
            }
        }
        acc.iter().map(|v| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 }).collect()
    };
    let low = profile(0.5);
    let high = profile(0.99);
    let bad: Vec<usize> =
        (0..10).filter(|&m| low[m].partial_cmp(&high[m]).is_none_or(|o| o.is_lt())).map(|m| m + 1).collect();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    verdict(bad.is_empty(), format!("beta 0.5: [{}], beta 0.99: [{}], violated at m = {bad:?}", fmt(&low), fmt(&high)))
}

fn criterion_12() -> Verdict {
    let runs = 200;
    let sample =
        |kind| -> Vec<f64> { (0..runs).map(|i| saturated(kind, 16, 16, 0.1, 5.0, replication_seed(12, i))).collect() };
    let a = summarize(&sample(ProtocolKind::Lmac)).unwrap();
    let b = summarize(&sample(ProtocolKind::Lbeb)).unwrap();
    let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    let z = (a.mean - b.mean) / se;
    verdict(z > 3.0, format!("L-MAC {:.4}, L-BEB {:.4}, difference {z:.1} sigma", a.mean, b.mean))
}

fn criterion_13() -> Verdict {
    let runs = 200;
    let mut times = Vec::new();
    for i in 0..runs {
        let cfg = SimConfig { seed: replication_seed(13, i), ..SimConfig::new(ProtocolKind::Lmac, 8, 16) };
        let mut sim = Simulator::new(cfg).unwrap();
        let mut det = AlignedConvergence::new(8, 16, 0);
        let cap = Horizon::Slots(CAP_SCHEDULES * 16);
        assert!(sim.run_until(cap, &mut det, |_, d| d.result().is_some()).unwrap());
        let join_slot = sim.slot_index();
        let join_us = sim.clock_us();
        sim.add_stations(StationGroup { protocol: ProtocolKind::Lmac, count: 8 }).unwrap();
        let mut det = SlidingConvergence::new(16, 16, join_slot);
        let cap = Horizon::Slots(join_slot + CAP_SCHEDULES * 16);
        assert!(sim.run_until(cap, &mut det, |_, d| d.result().is_some()).unwrap());
        times.push((det.result().unwrap().start_us - join_us) * 1e-6);
    }
    let s = summarize(&times).unwrap();
    verdict(s.mean < 2.0, format!("mean reconvergence {:.3} s (ci95 {:.3}) over {runs} runs", s.mean, s.ci95))
}

fn criterion_14() -> Verdict {
    let runs = 10_000;
    let params = lmac(0.5);
    let tau: Vec<u64> = (0..runs)
        .map(|i| {
            convergence_schedules(ProtocolKind::Lmac, &params, 6, 4, replication_seed(14, i), CAP_SCHEDULES)
                .unwrap()
                .expect("converges")
        })
        .collect();
    let bound = lmac_bound(0.5f64, 6, 4).unwrap();
    let longest = tau.iter().copied().max().unwrap();
    let mut violations = Vec::new();
    for n in 0..=(longest / 2 + 1) as u32 {
        let survival = tau.iter().filter(|&&t| t >= 2 * u64::from(n)).count() as f64 / runs as f64;
        if survival > bound.tail(n) {
            violations.push(n);
        }
    }
    verdict(
        violations.is_empty(),
        format!("K = {:.3e}, longest {longest} schedules, steps above the bound: {violations:?}", bound.k),
    )
}

fn main() -> ExitCode {
    let criteria: [fn() -> Verdict; 14] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
        criterion_11,
        criterion_12,
        criterion_13,
        criterion_14,
    ];
    // numeric arguments pick criteria, e.g. `cargo test --test acceptance -- 4 11`
    let picked: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, check) in criteria.iter().enumerate() {
        if !picked.is_empty() && !picked.contains(&(i + 1)) {
            continue;
        }
        let t = Instant::now();
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2}: {status} ({:.1} s) {}", i + 1, t.elapsed().as_secs_f64(), v.detail);
        failed += usize::from(!v.pass);
    }
    let ran = if picked.is_empty() { criteria.len() } else { picked.len() };
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
