//! Small hand-built fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use plaguesim::behavior::{AwarenessState, BehaviorProfile};
use plaguesim::disease::{DiseaseDefinition, InfectionState, StageSpec};
use plaguesim::population::{Avatar, AvatarId, Population, SocialGraph};
use plaguesim::transmission::ChannelKind;
use plaguesim::world::ZoneId;

pub fn stage(name: &str, min: u32, max: u32, mult: f64) -> StageSpec {
    StageSpec {
        name: name.into(),
        duration_min_days: min,
        duration_max_days: max,
        mean_duration_days: None,
        infectiousness_multiplier: mult,
        symptoms_visible: false,
        mobility_modifier: 1.0,
        withdrawal_probability_per_tick: 0.0,
        withdrawal_window_ticks: None,
        mortality_hazard_per_tick: 0.0,
        cure_sensitive: true,
    }
}

pub fn disease(betas: &[(ChannelKind, f64)]) -> DiseaseDefinition {
    DiseaseDefinition {
        name: "fixture".into(),
        stages: vec![stage("sick", 100, 100, 1.0)],
        beta_by_channel: betas.iter().copied().collect::<BTreeMap<_, _>>(),
        grants_immunity_on_recovery: true,
        immunity_duration_ticks: None,
        immune_can_transmit: false,
        carrier_ticks: 0,
        carrier_infectiousness_multiplier: 0.0,
        heal_mortality_reduction: 0.0,
        mutation: None,
        lineage: 0,
    }
}

pub fn avatar(id: u32, zone: u32) -> Avatar {
    Avatar {
        id: AvatarId(id),
        zone: ZoneId(zone),
        home_zone: ZoneId(zone),
        vocation: "fixture".into(),
        level: 1,
        heal_capability: 0.0,
        behavior: BehaviorProfile { curiosity: 0.5, risk_aversion: 0.5, move_probability_per_tick: 0.0 },
        awareness: AwarenessState::default(),
        believed_epicenter: None,
        infection: None,
        immune: false,
        immune_until: None,
        carrier_until: None,
        last_case: None,
        alive: true,
        masked: false,
        ever_infected: false,
        pets: vec![],
    }
}

pub fn infected(id: u32, zone: u32) -> Avatar {
    let mut a = avatar(id, zone);
    a.infection = Some(InfectionState {
        stage_index: 0,
        ticks_in_stage: 0,
        scheduled_stage_duration: 100,
        generation: 0,
        infector: None,
        channel_of_infection: None,
        tick_of_infection: 0,
        case_id: id as usize,
    });
    a.ever_infected = true;
    a
}

pub fn population(avatars: Vec<Avatar>) -> Population {
    let n = avatars.len();
    Population { avatars, pets: vec![], social: SocialGraph::from_edges(n, vec![]).unwrap() }
}

/// A bundled scenario shrunk for quick property runs.
pub fn small(name: &str, count: usize, horizon: u64) -> plaguesim::ScenarioConfig {
    let mut cfg = plaguesim::ScenarioConfig::bundled(name).expect("bundled scenario");
    cfg.population.count = count;
    cfg.run.horizon_ticks = horizon;
    cfg.run.index_cases.count = cfg.run.index_cases.count.min(count / 10).max(1);
    cfg.schedule.retain(|s| s.tick <= horizon);
    cfg.validate().expect("shrunk scenario stays valid");
    cfg
}
