//! A committed event log for a small scenario, plus log-replay checks.
//! Set `PLAGUESIM_BLESS=1` to rewrite the fixture after an intended change.

use std::path::PathBuf;

use plaguesim::events::{feed_from_log, read_ndjson, replay_snapshots, to_ndjson, FeedMessage};
use plaguesim::sim::{run_with, RunOptions};
use plaguesim::ScenarioConfig;

mod common;

const GOLDEN_SEED: u64 = 8;

fn recorded() -> RunOptions {
    RunOptions { record_events: true, stop_after_index_cases: false }
}

/// Gray plague on 200 avatars. Chat betas are frequency-scaled for a much
/// larger population, so they are raised to keep an outbreak going.
fn golden_config() -> ScenarioConfig {
    let mut cfg = common::small("gray-plague", 200, 90);
    for b in cfg.disease.beta_by_channel.values_mut() {
        *b = (*b * 6.0).min(1.0);
    }
    cfg
}

#[test]
fn event_log_matches_committed_fixture() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/gray-plague-small.ndjson");
    let log = to_ndjson(&run_with(&golden_config(), GOLDEN_SEED, recorded()).unwrap().events.unwrap());
    if std::env::var_os("PLAGUESIM_BLESS").is_some() {
        std::fs::write(&path, &log).unwrap();
    }
    let expected = std::fs::read_to_string(&path).expect("fixture present; run with PLAGUESIM_BLESS=1 to create it");
    assert!(log == expected, "event log drifted from {}; rerun with PLAGUESIM_BLESS=1 if intended", path.display());
    let parsed = read_ndjson(expected.as_bytes()).unwrap();
    assert_eq!(to_ndjson(&parsed), expected);
}

#[test]
fn replay_rebuilds_every_snapshot() {
    for name in ["gray-plague", "corrupted-blood", "smallpox", "homogeneous-baseline"] {
        let cfg = common::small(name, 250, 120);
        for seed in 1..=3 {
            let r = run_with(&cfg, seed, recorded()).unwrap();
            let replayed = replay_snapshots(r.events.as_ref().unwrap()).unwrap();
            assert_eq!(replayed, r.snapshots, "{name} seed {seed}");
        }
    }
}

#[test]
fn replay_handles_full_size_runs() {
    let cfg = ScenarioConfig::bundled("corrupted-blood").unwrap();
    let r = run_with(&cfg, 2, recorded()).unwrap();
    assert_eq!(replay_snapshots(r.events.as_ref().unwrap()).unwrap(), r.snapshots);
}

#[test]
fn feed_carries_one_snapshot_per_tick_and_only_notable_events() {
    let r = run_with(&golden_config(), GOLDEN_SEED, recorded()).unwrap();
    let feed = feed_from_log(r.events.as_ref().unwrap()).unwrap();
    let snaps: Vec<_> = feed
        .iter()
        .filter_map(|m| match m {
            FeedMessage::Snapshot(s) => Some(s.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(snaps, r.snapshots);
    assert!(feed.iter().all(|m| match m {
        FeedMessage::Event(e) => e.event.is_notable(),
        _ => true,
    }));
    // Every event precedes the snapshot of its own tick.
    let mut last_snapshot_tick = None;
    for m in &feed {
        match m {
            FeedMessage::Snapshot(s) => last_snapshot_tick = Some(s.tick),
            FeedMessage::Event(e) => assert!(last_snapshot_tick.is_none_or(|t| t < e.tick)),
        }
    }
}

#[test]
fn log_without_run_start_is_rejected() {
    let r = run_with(&golden_config(), GOLDEN_SEED, recorded()).unwrap();
    let events = r.events.unwrap();
    assert!(replay_snapshots(&events[1..]).is_err());
    assert!(replay_snapshots(&[]).unwrap().is_empty());
}
