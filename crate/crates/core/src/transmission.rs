//! Contact enumeration on every channel, exposure composition, infection
//! resolution, and the pet reservoir.
//!
//! Co-located and chat contacts are held as per-zone pools of sources rather
//! than materialized pairs: every target in a pool sees the same sources, so the
//! survival product is computed once per pool. [`ContactPlan::contacts`] expands
//! the pools into explicit [`ContactEvent`]s when a caller needs them.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::disease::{effective_infectiousness, DiseaseDefinition, InfectionState};
use crate::population::{Avatar, AvatarId, CarriedInfection, Pet, PetId, PetStatus, Population};
use crate::rng::chance;
use crate::world::{WorldMap, ZoneId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Proximity,
    ZoneChat,
    GlobalChat,
    DirectMessage,
    PetVector,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 5] = [
        ChannelKind::Proximity,
        ChannelKind::ZoneChat,
        ChannelKind::GlobalChat,
        ChannelKind::DirectMessage,
        ChannelKind::PetVector,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::Proximity => "proximity",
            ChannelKind::ZoneChat => "zone_chat",
            ChannelKind::GlobalChat => "global_chat",
            ChannelKind::DirectMessage => "direct_message",
            ChannelKind::PetVector => "pet_vector",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Whether infections on this channel happen at a place.
    pub fn is_spatial(self) -> bool {
        !matches!(self, ChannelKind::GlobalChat | ChannelKind::DirectMessage)
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChannelKind::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown channel `{s}`"))
    }
}

/// Who passed an infection on. Pet-borne infections are credited to the avatar
/// whose infection the pet picked up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InfectorRef {
    Avatar { avatar: AvatarId, case: usize },
    Pet { pet: PetId, owner: AvatarId, source: AvatarId, case: usize },
}

impl InfectorRef {
    /// Case credited with the offspring.
    pub fn case(&self) -> usize {
        match *self {
            InfectorRef::Avatar { case, .. } | InfectorRef::Pet { case, .. } => case,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum ContactSource {
    Avatar(AvatarId),
    Pet(PetId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub source: ContactSource,
    pub target: AvatarId,
    pub channel: ChannelKind,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfectionRecord {
    pub case_id: usize,
    pub infectee: AvatarId,
    /// `None` for index cases.
    pub infector: Option<InfectorRef>,
    pub channel: Option<ChannelKind>,
    pub tick: u64,
    pub generation: u32,
    /// Zone of the infectee at infection time.
    pub zone: ZoneId,
}

/// Per-tick chat and messaging participation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParticipationParams {
    pub zone_chat: f64,
    pub global_chat: f64,
    pub message_send: f64,
}

impl Default for ParticipationParams {
    fn default() -> Self {
        Self { zone_chat: 0.8, global_chat: 0.2, message_send: 0.5 }
    }
}

impl ParticipationParams {
    pub(crate) fn validate(&self, errors: &mut Vec<String>) {
        for (n, p) in [("zone_chat", self.zone_chat), ("global_chat", self.global_chat), ("message_send", self.message_send)] {
            if !(0.0..=1.0).contains(&p) {
                errors.push(format!("participation {n} = {p} outside [0, 1]"));
            }
        }
    }
}

/// What each avatar does this tick, drawn once before any diffusion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Activity {
    pub zone_chat: Vec<bool>,
    pub global_chat: Vec<bool>,
    pub withdrawn: Vec<bool>,
    /// Messages sent this tick as (sender, recipient), sorted.
    pub messages: Vec<(AvatarId, AvatarId)>,
}

impl Activity {
    /// Everyone in both chats, nobody withdrawn, no messages.
    pub fn all_chatting(n: usize) -> Self {
        Self {
            zone_chat: vec![true; n],
            global_chat: vec![true; n],
            withdrawn: vec![false; n],
            messages: Vec::new(),
        }
    }

    pub fn idle(n: usize) -> Self {
        Self {
            zone_chat: vec![false; n],
            global_chat: vec![false; n],
            withdrawn: vec![false; n],
            messages: Vec::new(),
        }
    }

    /// Avatar-id order; for each living avatar: zone chat, global chat, then one
    /// draw per outgoing social edge.
    pub fn draw<R: Rng + ?Sized>(population: &Population, params: &ParticipationParams, rng: &mut R) -> Self {
        let n = population.len();
        let mut act = Self::idle(n);
        for a in &population.avatars {
            if !a.alive {
                continue;
            }
            let i = a.id.index();
            act.zone_chat[i] = chance(rng, params.zone_chat);
            act.global_chat[i] = chance(rng, params.global_chat);
            for &to in population.social.outgoing(a.id) {
                if chance(rng, params.message_send) {
                    act.messages.push((a.id, to));
                }
            }
        }
        act
    }

    pub fn withdraw(&mut self, id: AvatarId) {
        let i = id.index();
        self.withdrawn[i] = true;
        self.zone_chat[i] = false;
        self.global_chat[i] = false;
    }
}

/// An infectious party with its per-contact infection probability on one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contributor {
    pub source: ContactSource,
    pub infector: InfectorRef,
    pub generation: u32,
    pub infectiousness: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pool {
    pub members: Vec<Contributor>,
    survival: f64,
    weight: f64,
}

impl Pool {
    fn new() -> Self {
        Self { members: Vec::new(), survival: 1.0, weight: 0.0 }
    }

    fn push(&mut self, c: Contributor) {
        self.survival *= 1.0 - c.infectiousness;
        self.weight += c.infectiousness;
        self.members.push(c);
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Probability that no member infects a given target.
    pub fn survival(&self) -> f64 {
        self.survival
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct ZonePools {
    all: Pool,
    residents: Pool,
}

impl ZonePools {
    fn new() -> Self {
        Self { all: Pool::new(), residents: Pool::new() }
    }
}

/// All contact structure for one tick.
#[derive(Debug, Clone)]
pub struct ContactPlan {
    pub tick: u64,
    proximity: Vec<ZonePools>,
    zone_chat: Vec<ZonePools>,
    global_chat: Pool,
    /// (target, contributor), sorted by target.
    direct: Vec<(AvatarId, Contributor)>,
    pets: Vec<Pool>,
    restricted: Vec<bool>,
    /// Infected avatars by zone, for pets picking up infections.
    infected_by_zone: Vec<Vec<AvatarId>>,
}

/// How an avatar infects others right now, if at all.
fn avatar_source(a: &Avatar, def: &DiseaseDefinition, tick: u64) -> Option<(InfectorRef, u32, f64)> {
    if !a.alive {
        return None;
    }
    if let Some(inf) = &a.infection {
        if def.is_infectious(inf) {
            let r = InfectorRef::Avatar { avatar: a.id, case: inf.case_id };
            return Some((r, inf.generation, 1.0));
        }
        return None;
    }
    match (a.carrier_until, a.last_case) {
        (Some(until), Some((case, generation))) if def.immune_can_transmit && tick < until => {
            let r = InfectorRef::Avatar { avatar: a.id, case };
            Some((r, generation, def.carrier_infectiousness_multiplier))
        }
        _ => None,
    }
}

fn avatar_infectiousness(a: &Avatar, def: &DiseaseDefinition, channel: ChannelKind, carrier_mult: f64) -> f64 {
    match &a.infection {
        Some(inf) => effective_infectiousness(inf, def, channel),
        None => (def.beta(channel) * carrier_mult).clamp(0.0, 1.0),
    }
}

fn pet_infectiousness(carried: &CarriedInfection, def: &DiseaseDefinition) -> f64 {
    effective_infectiousness(&carried.snapshot, def, ChannelKind::PetVector)
}

impl ContactPlan {
    /// Reads state only and consumes no randomness.
    pub fn build(world: &WorldMap, population: &Population, def: &DiseaseDefinition, activity: &Activity, tick: u64) -> Self {
        let zones = world.len();
        let mut plan = ContactPlan {
            tick,
            proximity: vec![ZonePools::new(); zones],
            zone_chat: vec![ZonePools::new(); zones],
            global_chat: Pool::new(),
            direct: Vec::new(),
            pets: vec![Pool::new(); zones],
            restricted: world.zones().iter().map(|z| z.restricted).collect(),
            infected_by_zone: vec![Vec::new(); zones],
        };
        for a in &population.avatars {
            if a.alive && a.infection.is_some() {
                plan.infected_by_zone[a.zone.index()].push(a.id);
            }
            let Some((infector, generation, mult)) = avatar_source(a, def, tick) else {
                continue;
            };
            let i = a.id.index();
            let contributor = |ch| Contributor {
                source: ContactSource::Avatar(a.id),
                infector,
                generation,
                infectiousness: avatar_infectiousness(a, def, ch, mult),
            };
            let resident = a.home_zone == a.zone;
            if !activity.withdrawn[i] {
                let z = &mut plan.proximity[a.zone.index()];
                z.all.push(contributor(ChannelKind::Proximity));
                if resident {
                    z.residents.push(contributor(ChannelKind::Proximity));
                }
                if activity.zone_chat[i] {
                    let z = &mut plan.zone_chat[a.zone.index()];
                    z.all.push(contributor(ChannelKind::ZoneChat));
                    if resident {
                        z.residents.push(contributor(ChannelKind::ZoneChat));
                    }
                }
                if activity.global_chat[i] {
                    plan.global_chat.push(contributor(ChannelKind::GlobalChat));
                }
            }
        }
        for &(from, to) in &activity.messages {
            let sender = population.avatar(from);
            if let Some((infector, generation, mult)) = avatar_source(sender, def, tick) {
                plan.direct.push((
                    to,
                    Contributor {
                        source: ContactSource::Avatar(from),
                        infector,
                        generation,
                        infectiousness: avatar_infectiousness(sender, def, ChannelKind::DirectMessage, mult),
                    },
                ));
            }
        }
        plan.direct.sort_by_key(|(t, c)| (*t, c.source));
        for pet in &population.pets {
            if let Some(carried) = shedding(pet) {
                let owner = population.avatar(pet.owner);
                if !owner.alive {
                    continue;
                }
                plan.pets[owner.zone.index()].push(Contributor {
                    source: ContactSource::Pet(pet.id),
                    infector: InfectorRef::Pet {
                        pet: pet.id,
                        owner: pet.owner,
                        source: carried.source,
                        case: carried.snapshot.case_id,
                    },
                    generation: carried.snapshot.generation,
                    infectiousness: pet_infectiousness(carried, def),
                });
            }
        }
        plan
    }

    /// Source pools that reach `target`, by channel.
    fn pools_for<'a>(&'a self, target: &Avatar, activity: &Activity) -> impl Iterator<Item = (ChannelKind, &'a Pool)> + 'a {
        let i = target.id.index();
        let z = target.zone.index();
        let local = |zp: &'a ZonePools| -> Option<&'a Pool> {
            if !self.restricted[z] {
                Some(&zp.all)
            } else if target.home_zone == target.zone {
                Some(&zp.residents)
            } else {
                None
            }
        };
        let prox = local(&self.proximity[z]);
        let zchat = if activity.zone_chat[i] { local(&self.zone_chat[z]) } else { None };
        let gchat = activity.global_chat[i].then_some(&self.global_chat);
        [
            (ChannelKind::Proximity, prox),
            (ChannelKind::ZoneChat, zchat),
            (ChannelKind::GlobalChat, gchat),
            (ChannelKind::PetVector, Some(&self.pets[z])),
        ]
        .into_iter()
        .filter_map(|(ch, p)| p.filter(|p| !p.is_empty()).map(|p| (ch, p)))
    }

    fn direct_for(&self, target: AvatarId) -> &[(AvatarId, Contributor)] {
        let lo = self.direct.partition_point(|(t, _)| *t < target);
        let hi = self.direct.partition_point(|(t, _)| *t <= target);
        &self.direct[lo..hi]
    }

    /// Every (contributor, channel) reaching the target, in channel order.
    pub fn contributors_for<'a>(&'a self, target: &Avatar, activity: &Activity) -> Vec<(ChannelKind, &'a Contributor)> {
        let mut out: Vec<(ChannelKind, &Contributor)> = Vec::new();
        for (ch, pool) in self.pools_for(target, activity) {
            if ch == ChannelKind::PetVector {
                continue;
            }
            out.extend(pool.members.iter().map(|c| (ch, c)));
        }
        out.extend(self.direct_for(target.id).iter().map(|(_, c)| (ChannelKind::DirectMessage, c)));
        let z = target.zone.index();
        out.extend(self.pets[z].members.iter().map(|c| (ChannelKind::PetVector, c)));
        out
    }

    /// Composed infection probability for a susceptible target.
    pub fn exposure_probability(&self, target: &Avatar, activity: &Activity) -> f64 {
        if !target.is_susceptible() {
            return 0.0;
        }
        let mut survival = 1.0;
        for (_, pool) in self.pools_for(target, activity) {
            survival *= pool.survival();
        }
        for (_, c) in self.direct_for(target.id) {
            survival *= 1.0 - c.infectiousness;
        }
        1.0 - survival
    }

    /// Contacts expanded into explicit events, in target-id then channel order.
    pub fn contacts(&self, population: &Population, activity: &Activity) -> Vec<ContactEvent> {
        let mut out = Vec::new();
        for a in population.avatars.iter().filter(|a| a.is_susceptible()) {
            for (channel, c) in self.contributors_for(a, activity) {
                out.push(ContactEvent { source: c.source, target: a.id, channel, tick: self.tick });
            }
        }
        out
    }

    /// Contact counts by channel without materializing events.
    pub fn contact_counts(&self, population: &Population, activity: &Activity) -> [u64; 5] {
        let mut counts = [0u64; 5];
        for a in population.avatars.iter().filter(|a| a.is_susceptible()) {
            for (ch, pool) in self.pools_for(a, activity) {
                counts[ch.index()] += pool.len() as u64;
            }
            counts[ChannelKind::DirectMessage.index()] += self.direct_for(a.id).len() as u64;
        }
        counts
    }

    pub fn infected_in_zone(&self, zone: ZoneId) -> &[AvatarId] {
        &self.infected_by_zone[zone.index()]
    }
}

/// Contacts on every channel for one tick; see [`ContactPlan::build`].
pub fn enumerate_contacts(
    world: &WorldMap,
    population: &Population,
    def: &DiseaseDefinition,
    activity: &Activity,
    tick: u64,
) -> Vec<ContactEvent> {
    ContactPlan::build(world, population, def, activity, tick).contacts(population, activity)
}

/// `1 - Π(1 - p_i)` over independent contacts.
pub fn compose_exposure<I: IntoIterator<Item = f64>>(infectiousness: I) -> f64 {
    1.0 - infectiousness.into_iter().fold(1.0, |s, p| s * (1.0 - p))
}

/// Composed probability over explicit contacts on one target, looking up each
/// source's current infectiousness.
pub fn exposure_probability(contacts: &[ContactEvent], population: &Population, def: &DiseaseDefinition) -> f64 {
    compose_exposure(contacts.iter().map(|c| match c.source {
        ContactSource::Avatar(id) => {
            let a = population.avatar(id);
            match avatar_source(a, def, c.tick) {
                Some((_, _, mult)) => avatar_infectiousness(a, def, c.channel, mult),
                None => 0.0,
            }
        }
        ContactSource::Pet(id) => population.pets[id.index()]
            .carried_infection
            .as_ref()
            .map_or(0.0, |ci| pet_infectiousness(ci, def)),
    }))
}

/// Picks the contact credited with an infection, proportional to infectiousness.
pub fn attribute<'a, R: Rng + ?Sized>(
    contributors: &[(ChannelKind, &'a Contributor)],
    rng: &mut R,
) -> Option<(ChannelKind, &'a Contributor)> {
    let weights: Vec<f64> = contributors.iter().map(|(_, c)| c.infectiousness).collect();
    crate::rng::weighted_index(rng, &weights).map(|i| contributors[i])
}

/// Resolves every susceptible target in avatar-id order. Returns one record per
/// new infection; case ids are assigned from `next_case_id` upward. The
/// population itself is not modified.
pub fn resolve_exposures<R: Rng + ?Sized>(
    plan: &ContactPlan,
    population: &Population,
    activity: &Activity,
    rng: &mut R,
    next_case_id: usize,
) -> Vec<InfectionRecord> {
    let mut records = Vec::new();
    for a in population.avatars.iter().filter(|a| a.is_susceptible()) {
        let p = plan.exposure_probability(a, activity);
        if p <= 0.0 || !chance(rng, p) {
            continue;
        }
        let contributors = plan.contributors_for(a, activity);
        let (channel, c) = attribute(&contributors, rng).expect("positive exposure has a contributor");
        records.push(InfectionRecord {
            case_id: next_case_id + records.len(),
            infectee: a.id,
            infector: Some(c.infector),
            channel: Some(channel),
            tick: plan.tick,
            generation: c.generation + 1,
            zone: a.zone,
        });
    }
    records
}

fn shedding(pet: &Pet) -> Option<&CarriedInfection> {
    if pet.status == PetStatus::Summoned && pet.shedding_left > 0 {
        pet.carried_infection.as_ref()
    } else {
        None
    }
}

/// A summoned, empty pet next to infected avatars may pick up one of their
/// infections. Returns the source avatar when it does.
pub fn pet_expose<R: Rng + ?Sized>(
    pet: &mut Pet,
    population: &Population,
    plan: &ContactPlan,
    def: &DiseaseDefinition,
    rng: &mut R,
) -> Option<AvatarId> {
    if pet.status != PetStatus::Summoned || pet.carried_infection.is_some() {
        return None;
    }
    let owner = population.avatar(pet.owner);
    if !owner.alive {
        return None;
    }
    let candidates: Vec<(AvatarId, f64)> = plan
        .infected_in_zone(owner.zone)
        .iter()
        .filter_map(|&id| {
            let inf = population.avatar(id).infection.as_ref()?;
            let e = effective_infectiousness(inf, def, ChannelKind::PetVector);
            (e > 0.0).then_some((id, e))
        })
        .collect();
    let p = compose_exposure(candidates.iter().map(|&(_, e)| e));
    if p <= 0.0 || !chance(rng, p) {
        return None;
    }
    let weights: Vec<f64> = candidates.iter().map(|&(_, e)| e).collect();
    let (source, _) = candidates[crate::rng::weighted_index(rng, &weights)?];
    let snapshot: InfectionState = population.avatar(source).infection.clone()?;
    pet.carried_infection = Some(CarriedInfection { snapshot, source });
    Some(source)
}

/// Dismissal freezes whatever the pet carries.
pub fn pet_dismiss(pet: &mut Pet) {
    pet.status = PetStatus::Dismissed;
    pet.shedding_left = 0;
}

/// Resummons next to the owner. A carrying pet sheds for `shedding_ticks` ticks;
/// returns whether it will.
pub fn pet_resummon(pet: &mut Pet, shedding_ticks: u32) -> bool {
    pet.status = PetStatus::Summoned;
    if pet.carried_infection.is_some() && shedding_ticks > 0 {
        pet.shedding_left = shedding_ticks;
        true
    } else {
        pet.carried_infection = None;
        false
    }
}

/// End-of-tick bookkeeping for a shedding pet; clears the snapshot once the
/// window closes.
pub fn pet_after_tick(pet: &mut Pet) {
    if pet.status == PetStatus::Summoned && pet.shedding_left > 0 {
        pet.shedding_left -= 1;
        if pet.shedding_left == 0 {
            pet.carried_infection = None;
        }
    }
}
