use plaguesim::batch::{mean_first_generation_r0, run_batch, tune_beta_for_target_r0};
use plaguesim::transmission::ChannelKind;
use plaguesim::{Error, ScenarioConfig};

mod common;

#[test]
fn zero_beta_never_makes_an_epidemic() {
    let mut cfg = ScenarioConfig::bundled("homogeneous-baseline").unwrap();
    cfg.disease.beta_by_channel.insert(ChannelKind::Proximity, 0.0);
    let seeds: Vec<u64> = (1..=200).collect();
    let b = run_batch(&cfg, &seeds).unwrap();
    assert_eq!(b.epidemic_fraction, 0.0);
    assert!(b.runs.iter().all(|r| r.summary.ever_infected == 10));
    assert_eq!(b.aggregate.r0_first_generation.mean, 0.0);
}

#[test]
fn gray_plague_epidemic_fraction_is_strictly_between_zero_and_one() {
    let cfg = ScenarioConfig::bundled("gray-plague").unwrap();
    let seeds: Vec<u64> = (1..=200).collect();
    let b = run_batch(&cfg, &seeds).unwrap();
    assert!(b.epidemic_fraction > 0.0 && b.epidemic_fraction < 1.0, "fraction {}", b.epidemic_fraction);
}

#[test]
fn summaries_come_back_in_seed_order() {
    let cfg = common::small("smallpox", 200, 60);
    let seeds = [9, 2, 7, 4];
    let b = run_batch(&cfg, &seeds).unwrap();
    assert_eq!(b.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), seeds);
    assert_eq!(b.aggregate.attack_rate.n, 4);
}

#[test]
fn empty_batch_is_an_error() {
    let cfg = common::small("smallpox", 200, 60);
    assert!(matches!(run_batch(&cfg, &[]), Err(Error::Invalid(_))));
}

#[test]
fn tuning_rejects_a_channel_the_disease_does_not_use() {
    let cfg = ScenarioConfig::bundled("smallpox").unwrap();
    let err = tune_beta_for_target_r0(&cfg, ChannelKind::GlobalChat, 1.0, 0.1, 10).unwrap_err();
    assert!(matches!(err, Error::UnusableChannel(..)), "{err}");
}

#[test]
fn tuning_reports_failure_for_an_unreachable_target() {
    // With one infectious day and 50 susceptibles, R0 cannot reach 200.
    let mut cfg = common::small("homogeneous-baseline", 50, 30);
    cfg.disease.stages[0].mean_duration_days = None;
    cfg.disease.stages[0].duration_max_days = 1;
    let r = tune_beta_for_target_r0(&cfg, ChannelKind::Proximity, 200.0, 0.1, 5).unwrap();
    assert!(!r.converged);
    assert!(r.iterations <= plaguesim::batch::MAX_TUNE_ITERATIONS);
    assert_eq!(r.history.len(), r.iterations);
}

#[test]
fn mean_r0_grows_with_beta() {
    let mut cfg = common::small("homogeneous-baseline", 400, 80);
    let mut last = -1.0;
    for beta in [0.0, 0.0005, 0.002] {
        cfg.disease.beta_by_channel.insert(ChannelKind::Proximity, beta);
        let r0 = mean_first_generation_r0(&cfg, 40).unwrap();
        assert!(r0 > last, "beta {beta}: {r0} <= {last}");
        last = r0;
    }
}
