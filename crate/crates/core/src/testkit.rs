//! Hand-built worlds, avatars and diseases for unit tests.

use std::collections::BTreeMap;

use crate::behavior::{AwarenessState, BehaviorProfile};
use crate::disease::{DiseaseDefinition, InfectionState, StageSpec};
use crate::population::{Avatar, AvatarId, Pet, PetId, PetStatus, Population, SocialGraph};
use crate::transmission::ChannelKind;
use crate::world::{build_world, WorldMap, WorldSpec, ZoneId, ZoneSpec};

/// Zones named by `names`, linked as a path in that order.
pub fn line_world(names: &[&str]) -> WorldMap {
    let zones = names
        .iter()
        .enumerate()
        .map(|(i, n)| ZoneSpec {
            name: n.to_string(),
            density_weight: 1.0,
            is_city: false,
            adjacent: names.get(i + 1).map(|s| vec![s.to_string()]).unwrap_or_default(),
            teleports: vec![],
        })
        .collect();
    build_world(&WorldSpec { zones }).unwrap()
}

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

/// One long infectious stage with the given per-channel β.
pub fn disease(betas: &[(ChannelKind, f64)]) -> DiseaseDefinition {
    DiseaseDefinition {
        name: "test".into(),
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
        vocation: "test".into(),
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

pub fn infection(case_id: usize, generation: u32) -> InfectionState {
    InfectionState {
        stage_index: 0,
        ticks_in_stage: 0,
        scheduled_stage_duration: 100,
        generation,
        infector: None,
        channel_of_infection: None,
        tick_of_infection: 0,
        case_id,
    }
}

pub fn infected(id: u32, zone: u32) -> Avatar {
    let mut a = avatar(id, zone);
    a.infection = Some(infection(id as usize, 0));
    a.ever_infected = true;
    a
}

pub fn population(avatars: Vec<Avatar>) -> Population {
    let n = avatars.len();
    Population { avatars, pets: vec![], social: SocialGraph::from_edges(n, vec![]).unwrap() }
}

pub fn pet(id: u32, owner: u32) -> Pet {
    Pet { id: PetId(id), owner: AvatarId(owner), status: PetStatus::Summoned, carried_infection: None, shedding_left: 0 }
}
