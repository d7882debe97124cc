//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero on any FAIL.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};
use tempfile::TempDir;
use vhb_core::config::{Mode, SessionConfig};
use vhb_core::engine::new_session;
use vhb_core::insights::cumulative_displacement;
use vhb_core::layout::{layout, scale_layout, LayoutName, TargetId};
use vhb_core::log::{parse, serialize, SessionLog, Snapshot};
use vhb_core::player::{simulate_session, PlayerParams};
use vhb_core::rng::{next_flash_delay, GameRng};
use vhb_core::stats::{paired_t, pearson_r, two_sample_t, two_sided_p};
use vhb_core::{Hand, HandSample, Millis, Position3};
use vhb_service::{
    ClientMessage, Frame, HostOptions, HostState, ManualClock, SessionHost,
};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    items[(rng.next_u64() % items.len() as u64) as usize]
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_session(rng: &mut ChaCha8Rng, mode: Mode) -> (SessionConfig, PlayerParams) {
    let name = pick(rng, &LayoutName::ALL);
    let scale = pick(rng, &[1.0, 1.25, 1.5]);
    let mut cfg = SessionConfig::new(mode, scale_layout(&layout(name), scale).unwrap()).with_seed(rng.next_u64());
    cfg.reaction_trials = pick(rng, &[5, 10]);
    cfg.accumulator_limit = Millis(pick(rng, &[30_000, 60_000]));
    cfg.sequence_max_trials = pick(rng, &[5, 10, 20]);
    let params = PlayerParams {
        seed: rng.next_u64(),
        error_rate: 0.15 * unit(rng),
        reaction_mean_s: 0.25 + 0.2 * unit(rng),
        handedness_bias: unit(rng),
        ..Default::default()
    };
    (cfg, params)
}

fn determinism() -> Check {
    let started = Instant::now();
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..100 {
        let mode = pick(&mut rng, &Mode::ALL);
        let (cfg, params) = random_session(&mut rng, mode);
        let mut files = Vec::new();
        for run in 0..2 {
            let log = simulate_session(cfg.clone(), &params).map_err(|e| e.to_string())?;
            let path = dir.path().join(format!("{i}-{run}.vhb.json"));
            std::fs::write(&path, serialize(&log).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        ensure(files[0] == files[1], || format!("config {i} ({mode:?}) differs between runs"))?;
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("100 configs run twice, byte-identical, {secs:.2} s"))
}

fn interval_bounds() -> Check {
    let mut rng = GameRng::seed_from_u64(5);
    let bounds = (Millis(5_000), Millis(15_000));
    let delays: Vec<Millis> = (0..10_000).map(|_| next_flash_delay(&mut rng, bounds)).collect();
    ensure(delays.iter().all(|d| (bounds.0..=bounds.1).contains(d)), || "delay outside [5, 15] s".into())?;
    let mean = delays.iter().map(|d| d.as_secs_f64()).sum::<f64>() / delays.len() as f64;
    ensure((mean - 10.0).abs() <= 0.1, || format!("mean {mean:.4} s"))?;
    Ok(format!("10000 delays in [5, 15] s, mean {mean:.4} s"))
}

fn accumulator_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut total_hits = 0u64;
    for i in 0..1000 {
        let (cfg, params) = random_session(&mut rng, Mode::Accumulator);
        let limit = cfg.accumulator_limit;
        let log = simulate_session(cfg, &params).map_err(|e| e.to_string())?;
        let snaps: Vec<_> = log
            .snapshots
            .iter()
            .map(|s| match s {
                Snapshot::Accumulator(a) => Ok(a),
                _ => Err(format!("session {i}: non-accumulator snapshot")),
            })
            .collect::<Result<_, _>>()?;
        let targets: Vec<TargetId> = snaps.iter().map(|a| a.target).collect();
        ensure(targets.windows(2).all(|w| w[0] != w[1]), || format!("session {i}: repeated lit target"))?;
        // a hit is a press on the target lit at that instant; each one has a snapshot at its time
        let hits = log
            .presses
            .iter()
            .filter(|p| snaps.iter().any(|a| limit - a.remaining_time_s == p.t && Some(a.target) == p.target))
            .count();
        ensure(log.summary.score as usize == hits && hits == snaps.len(), || {
            format!("session {i}: score {} vs {hits} hits", log.summary.score)
        })?;
        if let Some(last) = snaps.last() {
            ensure(last.remaining_time_s.as_secs_f64() >= 0.0 && last.remaining_time_s < limit, || {
                format!("session {i}: remaining time {}", last.remaining_time_s)
            })?;
        }
        ensure(log.summary.duration_s == limit, || format!("session {i}: lasted {}", log.summary.duration_s))?;
        total_hits += hits as u64;
    }
    Ok(format!("1000 sessions, {total_hits} hits, no repeats, lengths exact"))
}

fn sequence_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut by_error, mut by_max) = (0, 0);
    for i in 0..1000 {
        let (mut cfg, mut params) = random_session(&mut rng, Mode::Sequence);
        cfg.flash_interval_bounds = (Millis(1_000), Millis(3_000));
        params.error_rate = 0.1 * unit(&mut rng);
        let max = cfg.sequence_max_trials as usize;
        let log = simulate_session(cfg, &params).map_err(|e| e.to_string())?;
        let snaps: Vec<_> = log
            .snapshots
            .iter()
            .map(|s| match s {
                Snapshot::Sequence(q) => Ok(q),
                _ => Err(format!("session {i}: non-sequence snapshot")),
            })
            .collect::<Result<_, _>>()?;
        ensure(!snaps.is_empty(), || format!("session {i}: no trials"))?;
        let mut prev: &[TargetId] = &[];
        for (k, q) in snaps.iter().enumerate() {
            let seq = &q.flashed_sequence;
            ensure(seq.len() == prev.len() + 1 && seq[..prev.len()] == *prev, || {
                format!("session {i}: trial {} does not extend the previous pattern", k + 1)
            })?;
            let correct = q.repeated_pattern == *seq;
            ensure(q.correct == correct, || format!("session {i}: correct flag wrong at trial {}", k + 1))?;
            prev = seq;
        }
        match snaps.iter().position(|q| !q.correct) {
            Some(first_error) => {
                ensure(first_error == snaps.len() - 1, || format!("session {i}: continued after an error"))?;
                by_error += 1;
            }
            None => {
                ensure(snaps.len() == max, || format!("session {i}: stopped at {} of {max} without error", snaps.len()))?;
                by_max += 1;
            }
        }
    }
    Ok(format!("1000 sessions, {by_error} ended on first error, {by_max} at max trials"))
}

fn reaction_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut count = 0;
    for trials in [5u32, 10] {
        for i in 0..100 {
            let (mut cfg, params) = random_session(&mut rng, Mode::Reaction);
            cfg.reaction_trials = trials;
            let bounds = cfg.flash_interval_bounds;
            let log = simulate_session(cfg, &params).map_err(|e| e.to_string())?;
            ensure(log.snapshots.len() == trials as usize, || {
                format!("{trials}-trial session {i}: {} snapshots", log.snapshots.len())
            })?;
            for s in &log.snapshots {
                let Snapshot::Reaction(r) = s else { return Err("non-reaction snapshot".into()) };
                ensure(r.reaction_time_s > Millis::ZERO, || format!("session {i}: zero reaction time"))?;
                ensure((bounds.0..=bounds.1).contains(&r.inter_flash_interval_s), || {
                    format!("session {i}: interval {}", r.inter_flash_interval_s)
                })?;
            }
            count += 1;
        }
    }
    Ok(format!("{count} sessions with 5 and 10 trials, all reaction times positive"))
}

fn displacement_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = 2 + (rng.next_u64() % 2000) as usize;
        let mut pos = [[0.0f64; 3]; 2];
        let samples: Vec<HandSample> = (0..n)
            .map(|i| {
                let hand = if rng.next_u64() % 2 == 0 { Hand::Left } else { Hand::Right };
                for c in pos[hand.index()].iter_mut() {
                    let step = normal(&mut rng);
                    *c += 0.02 * step;
                }
                let p = pos[hand.index()];
                HandSample { t: Millis(i as u64 * 25), hand, pos: Position3::new(p[0], p[1], p[2]) }
            })
            .collect();
        let got = cumulative_displacement(&samples);
        for (hand, value) in [(Hand::Left, got.left), (Hand::Right, got.right)] {
            let mut last: Option<Position3> = None;
            let mut oracle = 0.0;
            for s in samples.iter().filter(|s| s.hand == hand) {
                if let Some(a) = last {
                    oracle += ((s.pos.x - a.x).powi(2) + (s.pos.y - a.y).powi(2) + (s.pos.z - a.z).powi(2)).sqrt();
                }
                last = Some(s.pos);
            }
            worst = worst.max((value - oracle).abs());
        }
    }
    ensure(worst < 1e-9, || format!("max error {worst:e}"))?;
    Ok(format!("200 walks, max abs error {worst:.1e}"))
}

fn statistics_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
    };
    let p_of = |t: f64, df: f64| 2.0 * StudentsT::new(0.0, 1.0, df).unwrap().cdf(-t.abs());
    let mut worst = 0.0f64;
    let mut track = |a: f64, b: f64| worst = worst.max((a - b).abs());
    for k in 0..100 {
        let n = 3 + (rng.next_u64() % 30) as usize;
        let m = 3 + (rng.next_u64() % 30) as usize;
        let xs: Vec<f64> = (0..n).map(|_| 50.0 + 10.0 * normal(&mut rng)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.45 * x + 8.0 * normal(&mut rng)).collect();
        let zs: Vec<f64> = (0..m).map(|_| 55.0 + 12.0 * normal(&mut rng)).collect();

        let (mx, my) = (mean(&xs), mean(&ys));
        let r_oracle = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / (xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>().sqrt()
                * ys.iter().map(|y| (y - my).powi(2)).sum::<f64>().sqrt());
        track(pearson_r(&xs, &ys).map_err(|e| e.to_string())?, r_oracle);
        let self_r = pearson_r(&xs, &xs).map_err(|e| e.to_string())?;
        ensure((self_r - 1.0).abs() <= 1e-15, || format!("dataset {k}: pearson(x, x) = {self_r}"))?;

        let d: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| x - y).collect();
        let t_paired = mean(&d) / (var(&d).sqrt() / (n as f64).sqrt());
        let paired = paired_t(&xs, &ys).map_err(|e| e.to_string())?;
        track(paired.t_statistic, t_paired);
        track(paired.p_value, p_of(t_paired, n as f64 - 1.0));

        let df = (n + m - 2) as f64;
        let sp2 = ((n as f64 - 1.0) * var(&xs) + (m as f64 - 1.0) * var(&zs)) / df;
        let t_two = (mean(&xs) - mean(&zs)) / (sp2 * (1.0 / n as f64 + 1.0 / m as f64)).sqrt();
        let two = two_sample_t(&xs, &zs).map_err(|e| e.to_string())?;
        let swapped = two_sample_t(&zs, &xs).map_err(|e| e.to_string())?;
        track(two.t_statistic, t_two);
        track(two.p_value, p_of(t_two, df));
        ensure(swapped.t_statistic == -two.t_statistic, || format!("dataset {k}: swap does not negate t"))?;
        for s in [&paired, &two, &swapped] {
            ensure((0.0..=1.0).contains(&s.p_value), || format!("dataset {k}: p = {}", s.p_value))?;
        }
    }
    for df in [1.0, 2.0, 5.0, 17.0, 120.0] {
        let ps: Vec<f64> = (0..400).map(|i| two_sided_p(i as f64 * 0.05, df)).collect();
        ensure(ps.windows(2).all(|w| w[1] <= w[0]), || format!("p not monotone at df {df}"))?;
        ensure(ps.iter().all(|p| (0.0..=1.0).contains(p)), || format!("p outside [0, 1] at df {df}"))?;
    }
    ensure(worst < 1e-9, || format!("max error {worst:e}"))?;
    Ok(format!("100 datasets, max abs error {worst:.1e}; p monotone in |t|"))
}

const EMPTY_GOLDEN: &[u8] = include_bytes!("../../core/tests/fixtures/empty_accumulator.vhb.json");
const REACTION_GOLDEN: &[u8] = include_bytes!("../../core/tests/fixtures/reaction_two_trials.vhb.json");

fn log_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..500 {
        let mode = pick(&mut rng, &Mode::ALL);
        let (cfg, params) = random_session(&mut rng, mode);
        let log = simulate_session(cfg, &params).map_err(|e| e.to_string())?;
        let bytes = serialize(&log).map_err(|e| e.to_string())?;
        let back = parse(&bytes).map_err(|e| format!("log {i}: {e}"))?;
        ensure(back == log, || format!("log {i} ({mode:?}) changed on round trip"))?;
        ensure(serialize(&back).map_err(|e| e.to_string())? == bytes, || format!("log {i}: bytes changed"))?;
    }

    let mut cfg = SessionConfig::new(Mode::Accumulator, layout(LayoutName::Grid3x3));
    cfg.accumulator_limit = Millis(30_000);
    let mut s = new_session(cfg).map_err(|e| e.to_string())?;
    s.advance(Millis(30_000)).map_err(|e| e.to_string())?;
    let empty = serialize(&s.to_log().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(empty == EMPTY_GOLDEN, || "empty accumulator golden differs".into())?;

    let mut cfg = SessionConfig::new(Mode::Reaction, layout(LayoutName::FourCorner)).with_seed(3);
    cfg.reaction_trials = 2;
    let params = PlayerParams { seed: 4, error_rate: 0.3, ..Default::default() };
    let reaction = serialize(&simulate_session(cfg, &params).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(reaction == REACTION_GOLDEN, || "reaction golden differs".into())?;
    for golden in [EMPTY_GOLDEN, REACTION_GOLDEN] {
        let log = parse(golden).map_err(|e| e.to_string())?;
        ensure(serialize(&log).map_err(|e| e.to_string())? == golden, || "golden not byte-stable".into())?;
    }
    Ok("500 logs round-trip; 2 golden fixtures byte-stable".into())
}

/// Plays a recorded session's inputs through the service host as a client
/// would, ticking the server clock between frames, and returns the served log.
fn serve_transcript(recorded: &SessionLog) -> Result<SessionLog, String> {
    let clock = ManualClock::default();
    let mut host = SessionHost::new(
        clock.clone(),
        HostOptions { session_id: recorded.session_id.clone(), default_seed: 0, log_dir: None },
    );
    let c = &recorded.config;
    let mut frames = vec![
        ClientMessage::Hello { client: Some("acceptance".into()) },
        ClientMessage::ConsentAck {},
        ClientMessage::SelectMode {
            mode: recorded.mode,
            layout: Some(recorded.layout.name),
            scale: Some(recorded.layout.scale_factor),
            seed: Some(c.seed),
            reaction_trials: Some(c.reaction_trials),
            accumulator_limit_s: Some(c.accumulator_limit_s),
            flash_interval_bounds_s: Some(c.flash_interval_bounds_s),
            sequence_max_trials: Some(c.sequence_max_trials),
        },
        ClientMessage::Start {},
    ];
    let mut inputs: Vec<(Millis, u8, usize, ClientMessage)> = Vec::new();
    for (i, p) in recorded.presses.iter().enumerate() {
        inputs.push((p.t, 1, i, ClientMessage::Press { t: p.t, target: p.target, hand: p.hand, pos: p.hand_pos }));
    }
    for (i, s) in recorded.hand_samples.iter().enumerate() {
        inputs.push((s.t, 0, i, ClientMessage::HandSample { t: s.t, hand: s.hand, pos: s.pos }));
    }
    inputs.sort_by_key(|(t, k, i, _)| (*t, *k, *i));
    let mut seq = 0;
    let mut send = |host: &mut SessionHost<ManualClock>, msg: ClientMessage| -> Result<(), String> {
        seq += 1;
        let out = host.handle_text(&Frame { seq, msg }.to_json());
        if let Some(err) = out.messages().find(|m| matches!(m, vhb_service::ServerMessage::Error { .. })) {
            return Err(format!("server error {err:?}"));
        }
        Ok(())
    };
    for msg in frames.drain(..) {
        send(&mut host, msg)?;
    }
    for (t, _, _, msg) in inputs {
        while let Some(d) = host.next_deadline().filter(|&d| d <= t) {
            clock.set(d);
            host.tick();
        }
        clock.set(t);
        send(&mut host, msg)?;
    }
    while host.state() != HostState::Over {
        let d = host.next_deadline().ok_or("session stalled")?;
        clock.set(d);
        host.tick();
    }
    host.finished_log().cloned().ok_or_else(|| "no log".into())
}

fn protocol_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut n = 0;
    for mode in Mode::ALL {
        for _ in 0..10 {
            let (mut cfg, params) = random_session(&mut rng, mode);
            cfg.flash_interval_bounds = (Millis(1_000), Millis(4_000));
            let direct = simulate_session(cfg, &params).map_err(|e| e.to_string())?;
            let served = serve_transcript(&direct)?;
            let (a, b) = (serialize(&direct).map_err(|e| e.to_string())?, serialize(&served).map_err(|e| e.to_string())?);
            ensure(a == b, || format!("{mode:?} session {} differs", direct.session_id))?;
            n += 1;
        }
    }
    Ok(format!("{n} client transcripts served byte-identical to the direct engine"))
}

fn fitts_monotonicity() -> Check {
    let base = layout(LayoutName::Classic12);
    let mut medians = Vec::new();
    for factor in [1.0, 1.5, 2.0] {
        let spec = scale_layout(&base, factor).map_err(|e| e.to_string())?;
        let mut gaps = Vec::new();
        for seed in 0..50 {
            let cfg = SessionConfig::new(Mode::Accumulator, spec.clone()).with_seed(seed);
            let params = PlayerParams { seed, ..Default::default() };
            let log = simulate_session(cfg, &params).map_err(|e| e.to_string())?;
            gaps.extend(log.snapshots.iter().filter_map(|s| match s {
                Snapshot::Accumulator(a) => Some(a.inter_press_time_s.as_secs_f64()),
                _ => None,
            }));
        }
        gaps.sort_by(f64::total_cmp);
        let n = gaps.len();
        medians.push(if n % 2 == 1 { gaps[n / 2] } else { 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]) });
    }
    ensure(medians[0] < medians[1] && medians[1] < medians[2], || format!("medians {medians:?}"))?;
    Ok(format!(
        "median inter-press {:.3} < {:.3} < {:.3} s over 50 seeds",
        medians[0], medians[1], medians[2]
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("determinism", determinism),
        ("interval-bounds", interval_bounds),
        ("accumulator-invariants", accumulator_invariants),
        ("sequence-invariants", sequence_invariants),
        ("reaction-invariants", reaction_invariants),
        ("displacement-oracle", displacement_oracle),
        ("statistics-oracle", statistics_oracle),
        ("log-round-trip", log_round_trip),
        ("protocol-equivalence", protocol_equivalence),
        ("fitts-monotonicity", fitts_monotonicity),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        10 - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
