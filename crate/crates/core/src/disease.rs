//! Staged diseases as per-agent Markov chains.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::ValidationError;
use crate::rng::{chance, uniform_inclusive};
use crate::transmission::{ChannelKind, InfectorRef};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub name: String,
    pub duration_min_days: u32,
    pub duration_max_days: u32,
    /// When set, the stage length is geometric with this mean (truncated to the
    /// min/max range) instead of uniform over it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_duration_days: Option<f64>,
    pub infectiousness_multiplier: f64,
    #[serde(default)]
    pub symptoms_visible: bool,
    #[serde(default = "one")]
    pub mobility_modifier: f64,
    #[serde(default)]
    pub withdrawal_probability_per_tick: f64,
    /// Withdrawal only happens during the first N ticks of the stage when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub withdrawal_window_ticks: Option<u32>,
    #[serde(default)]
    pub mortality_hazard_per_tick: f64,
    #[serde(default = "yes")]
    pub cure_sensitive: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl StageSpec {
    pub fn withdrawal_probability_at(&self, ticks_in_stage: u32) -> f64 {
        match self.withdrawal_window_ticks {
            Some(w) if ticks_in_stage >= w => 0.0,
            _ => self.withdrawal_probability_per_tick,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationPolicy {
    pub per_tick_probability: f64,
    pub beta_perturbation_fraction: f64,
    pub severity_perturbation_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseDefinition {
    pub name: String,
    pub stages: Vec<StageSpec>,
    #[serde(default)]
    pub beta_by_channel: BTreeMap<ChannelKind, f64>,
    #[serde(default = "yes")]
    pub grants_immunity_on_recovery: bool,
    /// Absent means permanent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub immunity_duration_ticks: Option<u64>,
    /// Recovered immune avatars keep transmitting for `carrier_ticks` ticks.
    #[serde(default)]
    pub immune_can_transmit: bool,
    #[serde(default)]
    pub carrier_ticks: u64,
    #[serde(default)]
    pub carrier_infectiousness_multiplier: f64,
    /// Scales an avatar's mortality hazard by `1 - reduction * heal_capability`.
    #[serde(default)]
    pub heal_mortality_reduction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<MutationPolicy>,
    #[serde(default)]
    pub lineage: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfectionState {
    pub stage_index: usize,
    pub ticks_in_stage: u32,
    pub scheduled_stage_duration: u32,
    pub generation: u32,
    pub infector: Option<InfectorRef>,
    pub channel_of_infection: Option<ChannelKind>,
    pub tick_of_infection: u64,
    /// Index of this episode in the run's transmission tree.
    pub case_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Advance {
    Continuing { state: InfectionState, entered_stage: Option<usize> },
    Recovered,
    Died,
}

pub fn validate_disease(def: &DiseaseDefinition) -> Result<(), ValidationError> {
    let mut errors = Vec::new();
    let mut prob = |what: String, p: f64| {
        if !(0.0..=1.0).contains(&p) {
            errors.push(format!("{what} = {p} outside [0, 1]"));
        }
    };
    for (ch, &b) in &def.beta_by_channel {
        prob(format!("beta for channel {ch}"), b);
    }
    for s in &def.stages {
        prob(format!("stage `{}` mobility_modifier", s.name), s.mobility_modifier);
        prob(format!("stage `{}` withdrawal_probability_per_tick", s.name), s.withdrawal_probability_per_tick);
        prob(format!("stage `{}` mortality_hazard_per_tick", s.name), s.mortality_hazard_per_tick);
    }
    if let Some(m) = &def.mutation {
        prob("mutation per_tick_probability".into(), m.per_tick_probability);
        prob("mutation beta_perturbation_fraction".into(), m.beta_perturbation_fraction);
        prob("mutation severity_perturbation_fraction".into(), m.severity_perturbation_fraction);
    }
    prob("heal_mortality_reduction".into(), def.heal_mortality_reduction);

    if def.stages.is_empty() {
        errors.push("no stages".to_string());
    }
    for s in &def.stages {
        if s.duration_min_days > s.duration_max_days {
            errors.push(format!(
                "stage `{}`: duration_min_days {} > duration_max_days {}",
                s.name, s.duration_min_days, s.duration_max_days
            ));
        }
        if s.duration_max_days == 0 {
            errors.push(format!("stage `{}`: duration_max_days must be positive", s.name));
        }
        if !(s.infectiousness_multiplier >= 0.0) || !s.infectiousness_multiplier.is_finite() {
            errors.push(format!("stage `{}`: infectiousness_multiplier must be finite and nonnegative", s.name));
        }
        if let Some(m) = s.mean_duration_days {
            if !(m >= 1.0) || !m.is_finite() {
                errors.push(format!("stage `{}`: mean_duration_days must be at least 1", s.name));
            }
        }
    }
    if def.immunity_duration_ticks == Some(0) {
        errors.push("immunity_duration_ticks must be positive when present".to_string());
    }
    if !(def.carrier_infectiousness_multiplier >= 0.0) {
        errors.push("carrier_infectiousness_multiplier must be nonnegative".to_string());
    }
    ValidationError::check(errors)
}

/// Draws a stage length in ticks; always at least one.
pub fn draw_stage_duration<R: Rng + ?Sized>(stage: &StageSpec, rng: &mut R) -> u32 {
    let lo = stage.duration_min_days.max(1);
    let hi = stage.duration_max_days.max(lo);
    match stage.mean_duration_days {
        Some(mean) if mean > 1.0 => {
            let g = Geometric::new(1.0 / mean).expect("p in (0, 1)");
            let d = 1u64.saturating_add(g.sample(rng));
            (d.min(u32::MAX as u64) as u32).clamp(lo, hi)
        }
        Some(_) => lo,
        None => uniform_inclusive(rng, lo, hi),
    }
}

impl InfectionState {
    /// A fresh episode entering the first stage.
    pub fn new_case<R: Rng + ?Sized>(
        def: &DiseaseDefinition,
        rng: &mut R,
        generation: u32,
        infector: Option<InfectorRef>,
        channel: Option<ChannelKind>,
        tick: u64,
        case_id: usize,
    ) -> Self {
        InfectionState {
            stage_index: 0,
            ticks_in_stage: 0,
            scheduled_stage_duration: draw_stage_duration(&def.stages[0], rng),
            generation,
            infector,
            channel_of_infection: channel,
            tick_of_infection: tick,
            case_id,
        }
    }
}

pub fn advance_infection<R: Rng + ?Sized>(state: &InfectionState, def: &DiseaseDefinition, rng: &mut R) -> Advance {
    advance_infection_scaled(state, def, 1.0, rng)
}

/// One tick of progression. The mortality hazard is applied first, then the
/// stage clock; the stage ends once its scheduled length has elapsed.
pub fn advance_infection_scaled<R: Rng + ?Sized>(
    state: &InfectionState,
    def: &DiseaseDefinition,
    hazard_scale: f64,
    rng: &mut R,
) -> Advance {
    let stage = &def.stages[state.stage_index];
    let hazard = (stage.mortality_hazard_per_tick * hazard_scale).clamp(0.0, 1.0);
    if chance(rng, hazard) {
        return Advance::Died;
    }
    let mut next = state.clone();
    next.ticks_in_stage += 1;
    if next.ticks_in_stage < next.scheduled_stage_duration {
        return Advance::Continuing { state: next, entered_stage: None };
    }
    let idx = state.stage_index + 1;
    if idx >= def.stages.len() {
        return Advance::Recovered;
    }
    next.stage_index = idx;
    next.ticks_in_stage = 0;
    next.scheduled_stage_duration = draw_stage_duration(&def.stages[idx], rng);
    Advance::Continuing { state: next, entered_stage: Some(idx) }
}

/// β of the channel times the stage multiplier, clamped to [0, 1].
pub fn effective_infectiousness(state: &InfectionState, def: &DiseaseDefinition, channel: ChannelKind) -> f64 {
    let beta = def.beta(channel);
    let mult = def.stages.get(state.stage_index).map_or(0.0, |s| s.infectiousness_multiplier);
    (beta * mult).clamp(0.0, 1.0)
}

/// With the policy's per-tick probability returns a perturbed variant, else `None`.
pub fn try_mutate<R: Rng + ?Sized>(def: &DiseaseDefinition, rng: &mut R) -> Option<DiseaseDefinition> {
    let policy = def.mutation.as_ref()?;
    if !chance(rng, policy.per_tick_probability) {
        return None;
    }
    let mut variant = def.clone();
    let f = policy.beta_perturbation_fraction;
    for beta in variant.beta_by_channel.values_mut() {
        *beta = (*beta * perturbation(rng, f)).clamp(0.0, 1.0);
    }
    let s = policy.severity_perturbation_fraction;
    for stage in &mut variant.stages {
        stage.mortality_hazard_per_tick = (stage.mortality_hazard_per_tick * perturbation(rng, s)).clamp(0.0, 1.0);
    }
    variant.lineage = def.lineage + 1;
    variant.name = format!("{}.{}", def.name, variant.lineage);
    Some(variant)
}

pub fn mutate_disease<R: Rng + ?Sized>(def: &DiseaseDefinition, rng: &mut R) -> DiseaseDefinition {
    try_mutate(def, rng).unwrap_or_else(|| def.clone())
}

fn perturbation<R: Rng + ?Sized>(rng: &mut R, fraction: f64) -> f64 {
    if fraction <= 0.0 {
        1.0
    } else {
        rng.random_range((1.0 - fraction)..=(1.0 + fraction))
    }
}

impl DiseaseDefinition {
    pub fn beta(&self, channel: ChannelKind) -> f64 {
        self.beta_by_channel.get(&channel).copied().unwrap_or(0.0)
    }

    pub fn uses_channel(&self, channel: ChannelKind) -> bool {
        self.beta_by_channel.contains_key(&channel)
    }

    pub fn stage(&self, state: &InfectionState) -> &StageSpec {
        &self.stages[state.stage_index]
    }

    pub fn is_infectious(&self, state: &InfectionState) -> bool {
        self.stages[state.stage_index].infectiousness_multiplier > 0.0
    }

    /// Upper bound on ticks from infection to the absorbing state.
    pub fn max_course_ticks(&self) -> u64 {
        self.stages.iter().map(|s| s.duration_max_days.max(1) as u64).sum()
    }

    /// The smallpox staging: two noninfectious incubation stages (the first one
    /// cure-sensitive), a highly infectious prodromal stage, and a symptomatic
    /// stage at a tenth of prodromal infectiousness with withdrawal concentrated
    /// in its first three days.
    pub fn smallpox() -> Self {
        DiseaseDefinition {
            name: "smallpox".into(),
            stages: vec![
                StageSpec {
                    name: "incubating_cure_sensitive".into(),
                    duration_min_days: 3,
                    duration_max_days: 3,
                    mean_duration_days: None,
                    infectiousness_multiplier: 0.0,
                    symptoms_visible: false,
                    mobility_modifier: 1.0,
                    withdrawal_probability_per_tick: 0.0,
                    withdrawal_window_ticks: None,
                    mortality_hazard_per_tick: 0.0,
                    cure_sensitive: true,
                },
                StageSpec {
                    name: "incubating_cure_insensitive".into(),
                    duration_min_days: 7,
                    duration_max_days: 11,
                    mean_duration_days: None,
                    infectiousness_multiplier: 0.0,
                    symptoms_visible: false,
                    mobility_modifier: 1.0,
                    withdrawal_probability_per_tick: 0.0,
                    withdrawal_window_ticks: None,
                    mortality_hazard_per_tick: 0.0,
                    cure_sensitive: false,
                },
                StageSpec {
                    name: "prodromal".into(),
                    duration_min_days: 3,
                    duration_max_days: 5,
                    mean_duration_days: None,
                    infectiousness_multiplier: 1.0,
                    symptoms_visible: false,
                    mobility_modifier: 1.0,
                    withdrawal_probability_per_tick: 0.0,
                    withdrawal_window_ticks: None,
                    mortality_hazard_per_tick: 0.0,
                    cure_sensitive: true,
                },
                StageSpec {
                    name: "symptomatic".into(),
                    duration_min_days: 14,
                    duration_max_days: 17,
                    mean_duration_days: None,
                    infectiousness_multiplier: 0.1,
                    symptoms_visible: true,
                    mobility_modifier: 0.5,
                    withdrawal_probability_per_tick: 0.5,
                    withdrawal_window_ticks: Some(3),
                    mortality_hazard_per_tick: 0.02,
                    cure_sensitive: true,
                },
            ],
            beta_by_channel: BTreeMap::from([(ChannelKind::Proximity, 0.002)]),
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
}
