//! The deterministic tick loop.
//!
//! Each executed tick runs these phases in order, consuming the run's single
//! RNG stream only as listed:
//!
//! 1. interventions due this tick, then ongoing treatments (avatar-id order);
//! 2. information: chat and message activity draws, then rumor and warning diffusion;
//! 3. movement (withdrawal, then destination), then pet dismiss and resummon draws;
//! 4. contact enumeration (no randomness);
//! 5. exposure resolution in avatar-id order, then pet pick-up;
//! 6. stage progression of cases older than this tick, immunity expiry, mutation;
//! 7. snapshot.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::behavior::{decide_move, epicenter_estimate, inform, shows_symptoms, spread_information, AwarenessChange, MoveDecision};
use crate::disease::{advance_infection_scaled, try_mutate, Advance, DiseaseDefinition, InfectionState};
use crate::error::{Error, Result};
use crate::events::{Event, EventRecord};
use crate::intervention::{resolve_zones, treat, validate_intervention, ActiveEffects, Audience, CureQuestEffect, Intervention, TreatmentOutcome};
use crate::metrics::{build_snapshot, run_summary, AvatarView, HealthClass, RunSummary, TickSnapshot, TransmissionTree};
use crate::population::{generate_with, Avatar, AvatarId, Population};
use crate::rng::{chance, seeded, SimRng};
use crate::scenario::{Placement, ScenarioConfig};
use crate::transmission::{pet_after_tick, pet_dismiss, pet_expose, pet_resummon, resolve_exposures, Activity, ChannelKind, ContactPlan, InfectionRecord};
use crate::world::{build_world, WorldMap, ZoneId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep the full event log.
    pub record_events: bool,
    /// Stop as soon as every index case has ended; enough for first-generation R0.
    pub stop_after_index_cases: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub seed: u64,
    pub snapshots: Vec<TickSnapshot>,
    pub tree: TransmissionTree,
    pub summary: RunSummary,
    #[serde(skip)]
    pub events: Option<Vec<EventRecord>>,
}

#[derive(Debug, Clone)]
struct Pending {
    tick: u64,
    seq: u64,
    intervention: Intervention,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    seed: u64,
    world: WorldMap,
    population: Population,
    disease: DiseaseDefinition,
    rng: SimRng,
    tick: u64,
    pending: Vec<Pending>,
    next_seq: u64,
    effects: ActiveEffects,
    tree: TransmissionTree,
    snapshots: Vec<TickSnapshot>,
    events: Vec<EventRecord>,
    options: RunOptions,
    epicenter: Option<ZoneId>,
    zone_has_case: Vec<bool>,
    channel_counts: BTreeMap<ChannelKind, u64>,
    index_cases: u64,
}

impl Simulation {
    pub fn new(config: ScenarioConfig, seed: u64, options: RunOptions) -> Result<Self> {
        config.validate()?;
        let world = build_world(&config.world)?;
        let mut rng = seeded(seed);
        let population = generate_with(&config.population, &world, &config.behavior.profile, &mut rng);
        let pending = config
            .schedule
            .iter()
            .enumerate()
            .map(|(i, s)| Pending { tick: s.tick, seq: i as u64, intervention: s.intervention.clone() })
            .collect::<Vec<_>>();
        let mut sim = Simulation {
            next_seq: pending.len() as u64,
            pending,
            seed,
            zone_has_case: vec![false; world.len()],
            disease: config.disease.clone(),
            world,
            population,
            rng,
            tick: 0,
            effects: ActiveEffects::default(),
            tree: TransmissionTree::new(),
            snapshots: Vec::new(),
            events: Vec::new(),
            options,
            epicenter: None,
            channel_counts: BTreeMap::new(),
            index_cases: 0,
            config,
        };
        sim.pending.sort_by_key(|p| (p.tick, p.seq));
        sim.seed_index_cases();
        sim.take_snapshot();
        Ok(sim)
    }

    fn log(&mut self, tick: u64, event: Event) {
        if self.options.record_events {
            self.events.push(EventRecord { tick, event });
        }
    }

    fn seed_index_cases(&mut self) {
        let n = self.population.len();
        let k = self.config.run.index_cases.count.min(n);
        let mut chosen: Vec<usize> = sample(&mut self.rng, n, k).into_vec();
        chosen.sort_unstable();
        if let Placement::Zone(name) = &self.config.run.index_cases.placement {
            let z = self.world.zone_id(name).expect("validated");
            for &i in &chosen {
                let a = &mut self.population.avatars[i];
                a.zone = z;
                a.home_zone = z;
            }
        }
        let start = Event::RunStart {
            scenario: self.config.name.clone(),
            seed: self.seed,
            variant: self.disease.name.clone(),
            zones: self.world.zones().iter().map(|z| z.name.clone()).collect(),
            avatar_zones: self.population.avatars.iter().map(|a| a.zone).collect(),
        };
        self.log(0, start);
        let records: Vec<InfectionRecord> = chosen
            .iter()
            .enumerate()
            .map(|(i, &a)| InfectionRecord {
                case_id: i,
                infectee: AvatarId(a as u32),
                infector: None,
                channel: None,
                tick: 0,
                generation: 0,
                zone: self.population.avatars[a].zone,
            })
            .collect();
        self.infect(records, 0);
    }

    // ---- accessors ----

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn world(&self) -> &WorldMap {
        &self.world
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    /// Direct access for tools and tests; changes made here bypass the event log.
    pub fn population_mut(&mut self) -> &mut Population {
        &mut self.population
    }

    pub fn disease(&self) -> &DiseaseDefinition {
        &self.disease
    }

    pub fn effects(&self) -> &ActiveEffects {
        &self.effects
    }

    pub fn tree(&self) -> &TransmissionTree {
        &self.tree
    }

    pub fn snapshots(&self) -> &[TickSnapshot] {
        &self.snapshots
    }

    pub fn latest_snapshot(&self) -> &TickSnapshot {
        self.snapshots.last().expect("initial snapshot exists")
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn epicenter(&self) -> Option<ZoneId> {
        self.epicenter
    }

    /// Composed infection probability of every avatar under the given activity,
    /// if exposures were resolved on the current state.
    pub fn exposure_probabilities(&self, activity: &Activity) -> Vec<f64> {
        let plan = ContactPlan::build(&self.world, &self.population, &self.disease, activity, self.tick + 1);
        self.population.avatars.iter().map(|a| plan.exposure_probability(a, activity)).collect()
    }

    // ---- interventions ----

    /// Queues an intervention for the next tick boundary. Returns the tick it
    /// will apply at.
    pub fn submit(&mut self, intervention: Intervention) -> Result<u64> {
        self.submit_at(self.tick + 1, intervention)
    }

    pub fn submit_at(&mut self, tick: u64, intervention: Intervention) -> Result<u64> {
        if tick <= self.tick {
            return Err(Error::Rejected(format!("tick {tick} is not after the current tick {}", self.tick)));
        }
        validate_intervention(&self.world, &intervention).map_err(|e| Error::Rejected(e.to_string()))?;
        let p = Pending { tick, seq: self.next_seq, intervention };
        self.next_seq += 1;
        let at = self.pending.partition_point(|q| (q.tick, q.seq) <= (p.tick, p.seq));
        self.pending.insert(at, p);
        Ok(tick)
    }

    pub fn pending_interventions(&self) -> impl Iterator<Item = (u64, &Intervention)> {
        self.pending.iter().map(|p| (p.tick, &p.intervention))
    }

    fn apply_intervention(&mut self, iv: Intervention, t: u64) {
        self.log(t, Event::InterventionApplied { intervention: iv.clone() });
        match iv {
            Intervention::Warning { audience, .. } => {
                let zones = match &audience {
                    Audience::Global => None,
                    Audience::Zones(names) => Some(resolve_zones(&self.world, names)),
                };
                let changes = inform(&mut self.population, zones.as_deref(), self.epicenter, t);
                self.log_awareness(t, changes);
            }
            Intervention::AreaRestriction { zones } => {
                for z in resolve_zones(&self.world, &zones) {
                    self.world.set_restricted(z, true);
                }
            }
            Intervention::LiftRestriction { zones } => {
                for z in resolve_zones(&self.world, &zones) {
                    self.world.set_restricted(z, false);
                }
            }
            Intervention::CureQuest {
                start_tick,
                uptake_probability_per_tick,
                efficacy,
                grants_immunity,
                requires_cure_sensitive_stage,
            } => {
                self.effects.cure_quest = Some(CureQuestEffect {
                    active_from: start_tick.unwrap_or(t).max(t),
                    uptake: uptake_probability_per_tick,
                    efficacy,
                    grants_immunity,
                    requires_cure_sensitive_stage,
                });
            }
            Intervention::SymptomMask { uptake_probability_per_tick } => {
                self.effects.symptom_mask = Some(uptake_probability_per_tick);
            }
            Intervention::TemporaryCure { uptake_probability_per_tick, efficacy } => {
                self.effects.temporary_cure = Some((uptake_probability_per_tick, efficacy));
            }
            Intervention::Hotfix { channel, new_beta } => {
                self.disease.beta_by_channel.insert(channel, new_beta);
            }
        }
    }

    fn log_awareness(&mut self, t: u64, changes: Vec<AwarenessChange>) {
        if self.options.record_events {
            for c in changes {
                self.log(t, Event::Awareness { avatar: c.avatar, kind: c.kind, accuracy: c.accuracy });
            }
        }
    }

    // ---- run control ----

    fn has_active_infection(&self) -> bool {
        let t = self.tick;
        self.population.avatars.iter().any(|a| {
            a.alive && (a.infection.is_some() || (self.disease.immune_can_transmit && a.carrier_until.is_some_and(|u| t < u)))
        }) || self
            .population
            .pets
            .iter()
            .any(|p| p.carried_infection.is_some() && self.population.avatar(p.owner).alive)
    }

    /// Whether the run has reached its horizon, or nothing infectious is left
    /// and no intervention is pending.
    pub fn is_finished(&self) -> bool {
        if self.tick >= self.config.run.horizon_ticks {
            return true;
        }
        if self.options.stop_after_index_cases && self.tree.roots().all(|r| self.tree.is_completed(r.case_id)) {
            return true;
        }
        self.pending.is_empty() && !self.has_active_infection()
    }

    /// Executes one tick unless finished. Returns whether a tick ran.
    pub fn step(&mut self) -> bool {
        if self.is_finished() {
            return false;
        }
        let t = self.tick + 1;
        self.log(t, Event::Tick);

        // 1. interventions and treatments
        while self.pending.first().is_some_and(|p| p.tick == t) {
            let p = self.pending.remove(0);
            self.apply_intervention(p.intervention, t);
        }
        self.treatments(t);

        // 2. information
        let mut activity = Activity::draw(&self.population, &self.config.behavior.participation, &mut self.rng);
        let changes = spread_information(
            &self.world,
            &mut self.population,
            &self.disease,
            &activity,
            &self.config.behavior.information,
            self.epicenter,
            &mut self.rng,
            t,
        );
        self.log_awareness(t, changes);

        // 3. movement and pets
        self.movement(t, &mut activity);
        self.pet_summons(t);

        // 4. contacts
        let plan = ContactPlan::build(&self.world, &self.population, &self.disease, &activity, t);
        if self.options.record_events {
            let counts = plan.contact_counts(&self.population, &activity);
            let counts = ChannelKind::ALL.into_iter().map(|c| (c, counts[c.index()])).collect();
            self.log(t, Event::Contacts { counts });
        }

        // 5. exposures
        let records = resolve_exposures(&plan, &self.population, &activity, &mut self.rng, self.tree.len());
        self.pet_pickup(t, &plan);
        self.infect(records, t);
        for pet in &mut self.population.pets {
            pet_after_tick(pet);
        }

        // 6. progression
        self.progress(t);

        self.tick = t;
        // 7. snapshot
        self.take_snapshot();
        true
    }

    /// Steps until finished.
    pub fn run_to_end(&mut self) {
        while self.step() {}
    }

    pub fn into_result(self) -> RunResult {
        let summary = run_summary(&self.snapshots, &self.tree, self.config.run.epidemic_threshold);
        RunResult {
            scenario: self.config.name,
            seed: self.seed,
            snapshots: self.snapshots,
            tree: self.tree,
            summary,
            events: self.options.record_events.then_some(self.events),
        }
    }

    pub fn summary(&self) -> RunSummary {
        run_summary(&self.snapshots, &self.tree, self.config.run.epidemic_threshold)
    }

    // ---- phases ----

    fn treatments(&mut self, t: u64) {
        let fx = &self.effects;
        if fx.cure_quest.is_none() && fx.symptom_mask.is_none() && fx.temporary_cure.is_none() {
            return;
        }
        for i in 0..self.population.len() {
            let a = &self.population.avatars[i];
            if a.infection.is_none() || !a.alive {
                continue;
            }
            match treat(a, &self.disease, &self.effects, t, &mut self.rng) {
                TreatmentOutcome::None => {}
                TreatmentOutcome::Masked => {
                    self.population.avatars[i].masked = true;
                    self.log(t, Event::Masked { avatar: AvatarId(i as u32) });
                }
                TreatmentOutcome::Cured { immune, temporary } => {
                    let case = self.end_episode(i, t, immune, None, false);
                    self.log(t, Event::Cured { avatar: AvatarId(i as u32), case, immune, temporary });
                }
            }
        }
    }

    /// Clears the avatar's infection and returns the case id.
    fn end_episode(&mut self, i: usize, t: u64, immune: bool, immune_until: Option<u64>, carrier: bool) -> usize {
        let carrier_ticks = self.disease.carrier_ticks;
        let a = &mut self.population.avatars[i];
        let inf = a.infection.take().expect("avatar was infected");
        a.masked = false;
        a.immune = immune;
        a.immune_until = if immune { immune_until } else { None };
        a.last_case = Some((inf.case_id, inf.generation));
        if carrier && carrier_ticks > 0 {
            a.carrier_until = Some(t + carrier_ticks + 1);
        } else {
            a.carrier_until = None;
            self.tree.end_case(inf.case_id, t);
        }
        inf.case_id
    }

    fn movement(&mut self, t: u64, activity: &mut Activity) {
        for i in 0..self.population.len() {
            let a = &self.population.avatars[i];
            match decide_move(a, &self.world, &self.disease, &mut self.rng) {
                MoveDecision::Stay => {}
                MoveDecision::Withdrawn => activity.withdraw(a.id),
                MoveDecision::MoveTo(to) => {
                    let from = a.zone;
                    self.population.avatars[i].zone = to;
                    self.log(t, Event::Move { avatar: AvatarId(i as u32), from, to });
                }
            }
        }
    }

    fn pet_summons(&mut self, t: u64) {
        let params = self.config.behavior.pets.clone();
        for k in 0..self.population.pets.len() {
            let owner = self.population.pets[k].owner;
            let (alive, zone) = {
                let o = self.population.avatar(owner);
                (o.alive, o.zone)
            };
            if !alive {
                continue;
            }
            let pet = &mut self.population.pets[k];
            let id = pet.id;
            match pet.status {
                crate::population::PetStatus::Summoned => {
                    if chance(&mut self.rng, params.dismiss_probability_per_tick) {
                        pet_dismiss(pet);
                        let carrying = pet.carried_infection.is_some();
                        self.log(t, Event::PetDismiss { pet: id, owner, zone, carrying });
                    }
                }
                crate::population::PetStatus::Dismissed => {
                    if chance(&mut self.rng, params.resummon_probability_per_tick) {
                        let shedding = pet_resummon(pet, params.shedding_ticks);
                        self.log(t, Event::PetResummon { pet: id, owner, zone, shedding });
                    }
                }
            }
        }
    }

    fn pet_pickup(&mut self, t: u64, plan: &ContactPlan) {
        if self.population.pets.is_empty() || self.disease.beta(ChannelKind::PetVector) <= 0.0 {
            return;
        }
        let mut pets = std::mem::take(&mut self.population.pets);
        for pet in &mut pets {
            if let Some(source) = pet_expose(pet, &self.population, plan, &self.disease, &mut self.rng) {
                let case = pet.carried_infection.as_ref().map_or(0, |c| c.snapshot.case_id);
                self.log(t, Event::PetAcquire { pet: pet.id, owner: pet.owner, source, case });
            }
        }
        self.population.pets = pets;
    }

    fn infect(&mut self, records: Vec<InfectionRecord>, t: u64) {
        for r in records {
            let state = InfectionState::new_case(&self.disease, &mut self.rng, r.generation, r.infector, r.channel, t, r.case_id);
            let visible = self.disease.stages[0].symptoms_visible;
            let a = &mut self.population.avatars[r.infectee.index()];
            a.infection = Some(state);
            a.ever_infected = true;
            a.masked = false;
            a.carrier_until = None;
            match r.channel {
                Some(ch) => *self.channel_counts.entry(ch).or_insert(0) += 1,
                None => self.index_cases += 1,
            }
            let zone = r.zone;
            self.tree.push(r.clone());
            self.log(t, Event::Infection { record: r, visible });
            if !self.zone_has_case[zone.index()] {
                self.zone_has_case[zone.index()] = true;
                let name = self.world.name(zone).to_string();
                self.log(t, Event::FirstCaseInZone { zone, name });
            }
        }
    }

    fn progress(&mut self, t: u64) {
        let reduction = self.disease.heal_mortality_reduction;
        for i in 0..self.population.len() {
            let a = &self.population.avatars[i];
            let Some(inf) = a.infection.as_ref().filter(|inf| a.alive && inf.tick_of_infection < t) else {
                continue;
            };
            let scale = 1.0 - reduction * a.heal_capability;
            let id = a.id;
            match advance_infection_scaled(inf, &self.disease, scale, &mut self.rng) {
                Advance::Continuing { state, entered_stage } => {
                    self.population.avatars[i].infection = Some(state);
                    if let Some(stage) = entered_stage {
                        let visible = self.disease.stages[stage].symptoms_visible;
                        self.log(t, Event::Stage { avatar: id, stage, visible });
                    }
                }
                Advance::Recovered => {
                    let immune = self.disease.grants_immunity_on_recovery;
                    let until = self.disease.immunity_duration_ticks.map(|d| t + d);
                    let carrier = immune && self.disease.immune_can_transmit;
                    let case = self.end_episode(i, t, immune, until, carrier);
                    self.log(t, Event::Recovered { avatar: id, case, immune });
                }
                Advance::Died => {
                    let a = &mut self.population.avatars[i];
                    let inf = a.infection.take().expect("infected");
                    a.alive = false;
                    a.masked = false;
                    a.last_case = Some((inf.case_id, inf.generation));
                    self.tree.end_case(inf.case_id, t);
                    self.log(t, Event::Died { avatar: id, case: inf.case_id });
                }
            }
        }
        for i in 0..self.population.len() {
            let a = &mut self.population.avatars[i];
            if a.immune && a.immune_until.is_some_and(|u| u <= t) {
                a.immune = false;
                a.immune_until = None;
                let id = a.id;
                self.log(t, Event::ImmunityLost { avatar: id });
            }
            let a = &mut self.population.avatars[i];
            if a.carrier_until.is_some_and(|u| u <= t + 1) {
                a.carrier_until = None;
                if let Some((case, _)) = a.last_case {
                    self.tree.end_case(case, t);
                }
            }
        }
        if let Some(variant) = try_mutate(&self.disease, &mut self.rng) {
            self.disease = variant;
            let e = Event::Mutation { variant: self.disease.name.clone(), beta_by_channel: self.disease.beta_by_channel.clone() };
            self.log(t, e);
        }
    }

    fn take_snapshot(&mut self) {
        let views = self.population.avatars.iter().map(|a| avatar_view(a, &self.disease));
        let snap = build_snapshot(
            self.tick,
            &self.disease.name,
            &self.world.zones().iter().map(|z| z.name.clone()).collect::<Vec<_>>(),
            &self.world.zones().iter().map(|z| z.restricted).collect::<Vec<_>>(),
            views,
            &self.channel_counts,
            self.index_cases,
        );
        self.epicenter = epicenter_estimate(&self.world, &self.population, &self.disease);
        self.snapshots.push(snap);
    }
}

fn avatar_view(a: &Avatar, def: &DiseaseDefinition) -> AvatarView {
    let class = if !a.alive {
        HealthClass::Dead
    } else if a.infection.is_some() {
        HealthClass::Infected
    } else if a.immune {
        HealthClass::Immune
    } else if a.ever_infected {
        HealthClass::Recovered
    } else {
        HealthClass::Susceptible
    };
    AvatarView { zone: a.zone, class, visible: shows_symptoms(a, def), awareness: a.awareness.kind }
}

/// Runs a scenario to completion with its own seed or an override.
pub fn run(config: &ScenarioConfig, seed_override: Option<u64>) -> Result<RunResult> {
    run_with(config, seed_override.unwrap_or(config.run.seed), RunOptions { record_events: true, ..Default::default() })
}

pub fn run_with(config: &ScenarioConfig, seed: u64, options: RunOptions) -> Result<RunResult> {
    let mut sim = Simulation::new(config.clone(), seed, options)?;
    sim.run_to_end();
    Ok(sim.into_result())
}
