//! Avatar population synthesis: zone placement, heterogeneous traits, the
//! messaging graph, and pets.

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::behavior::{AwarenessState, BehaviorProfile, ProfileDistribution};
use crate::disease::InfectionState;
use crate::error::ValidationError;
use crate::rng::{seeded, SimRng};
use crate::world::{WorldMap, ZoneId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AvatarId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PetId(pub u32);

impl AvatarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl PetId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AvatarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "avatar#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Avatar {
    pub id: AvatarId,
    pub zone: ZoneId,
    /// Spawn zone; decides residency when a zone is restricted.
    pub home_zone: ZoneId,
    pub vocation: String,
    pub level: u32,
    pub heal_capability: f64,
    pub behavior: BehaviorProfile,
    pub awareness: AwarenessState,
    pub believed_epicenter: Option<ZoneId>,
    pub infection: Option<InfectionState>,
    pub immune: bool,
    pub immune_until: Option<u64>,
    /// Recovered immune carriers transmit until this tick (exclusive).
    pub carrier_until: Option<u64>,
    /// Case id of the last finished episode, used to credit carrier transmissions.
    pub last_case: Option<(usize, u32)>,
    pub alive: bool,
    pub masked: bool,
    pub ever_infected: bool,
    pub pets: Vec<PetId>,
}

impl Avatar {
    pub fn is_susceptible(&self) -> bool {
        self.alive && self.infection.is_none() && !self.immune
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PetStatus {
    Summoned,
    Dismissed,
}

/// A frozen copy of an infection picked up from an avatar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarriedInfection {
    pub snapshot: InfectionState,
    pub source: AvatarId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pet {
    pub id: PetId,
    pub owner: AvatarId,
    pub status: PetStatus,
    pub carried_infection: Option<CarriedInfection>,
    /// Remaining ticks of shedding after a resummon.
    pub shedding_left: u32,
}

/// Directed messaging relationships.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SocialGraph {
    edges: Vec<(AvatarId, AvatarId)>,
    #[serde(skip)]
    out: Vec<Vec<AvatarId>>,
}

impl SocialGraph {
    /// Self-edges and duplicates are dropped; the result is sorted.
    pub fn from_edges(n: usize, mut edges: Vec<(AvatarId, AvatarId)>) -> Result<Self, ValidationError> {
        let mut errors = Vec::new();
        for &(a, b) in &edges {
            if a.index() >= n || b.index() >= n {
                errors.push(format!("social edge ({}, {}) references a missing avatar", a.0, b.0));
            }
        }
        ValidationError::check(errors)?;
        edges.retain(|(a, b)| a != b);
        edges.sort_unstable();
        edges.dedup();
        let mut out = vec![Vec::new(); n];
        for &(a, b) in &edges {
            out[a.index()].push(b);
        }
        Ok(Self { edges, out })
    }

    pub fn edges(&self) -> &[(AvatarId, AvatarId)] {
        &self.edges
    }

    pub fn outgoing(&self, a: AvatarId) -> &[AvatarId] {
        self.out.get(a.index()).map_or(&[], |v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HealDistribution {
    Uniform { low: f64, high: f64 },
    /// Normal truncated to [0, 1] by rejection.
    TruncatedNormal { mean: f64, sd: f64 },
}

impl Default for HealDistribution {
    fn default() -> Self {
        HealDistribution::Uniform { low: 0.0, high: 1.0 }
    }
}

impl HealDistribution {
    fn validate(&self, label: &str, errors: &mut Vec<String>) {
        match *self {
            HealDistribution::Uniform { low, high } => {
                if !(0.0 <= low && low <= high && high <= 1.0) {
                    errors.push(format!("vocation `{label}`: uniform heal range [{low}, {high}] must lie within [0, 1]"));
                }
            }
            HealDistribution::TruncatedNormal { mean, sd } => {
                if !(0.0..=1.0).contains(&mean) || !(sd >= 0.0) || !sd.is_finite() {
                    errors.push(format!("vocation `{label}`: truncated normal needs mean in [0, 1] and sd >= 0"));
                }
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            HealDistribution::Uniform { low, high } => {
                if high > low {
                    rng.random_range(low..=high)
                } else {
                    low
                }
            }
            HealDistribution::TruncatedNormal { mean, sd } => {
                if sd == 0.0 {
                    return mean;
                }
                let n = Normal::new(mean, sd).expect("validated");
                for _ in 0..1000 {
                    let x = n.sample(rng);
                    if (0.0..=1.0).contains(&x) {
                        return x;
                    }
                }
                mean
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocationSpec {
    pub label: String,
    pub weight: f64,
    #[serde(default)]
    pub heal: HealDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationSpec {
    pub count: usize,
    pub vocation_mix: Vec<VocationSpec>,
    pub level_range: [u32; 2],
    pub social_degree_mean: f64,
    pub pets_per_avatar_mean: f64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        let v = |label: &str, heal| VocationSpec { label: label.into(), weight: 1.0, heal };
        PopulationSpec {
            count: 2000,
            vocation_mix: vec![
                v("knight", HealDistribution::Uniform { low: 0.0, high: 0.6 }),
                v("paladin", HealDistribution::Uniform { low: 0.1, high: 0.8 }),
                v("sorcerer", HealDistribution::Uniform { low: 0.0, high: 0.5 }),
                v("druid", HealDistribution::Uniform { low: 0.3, high: 1.0 }),
            ],
            level_range: [1, 100],
            social_degree_mean: 4.0,
            pets_per_avatar_mean: 0.3,
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut errors = Vec::new();
        if self.vocation_mix.is_empty() {
            errors.push("vocation_mix is empty".to_string());
        }
        for v in &self.vocation_mix {
            if !(v.weight >= 0.0) || !v.weight.is_finite() {
                errors.push(format!("vocation `{}`: weight must be finite and nonnegative", v.label));
            }
            v.heal.validate(&v.label, &mut errors);
        }
        if !self.vocation_mix.is_empty() && !(self.vocation_mix.iter().map(|v| v.weight).sum::<f64>() > 0.0) {
            errors.push("vocation weights must sum to a positive value".to_string());
        }
        let [lo, hi] = self.level_range;
        if lo == 0 || lo > hi {
            errors.push(format!("level_range [{lo}, {hi}] must be a nonempty range of positive levels"));
        }
        if !(self.social_degree_mean >= 0.0) || !self.social_degree_mean.is_finite() {
            errors.push("social_degree_mean must be finite and nonnegative".to_string());
        }
        if !(self.pets_per_avatar_mean >= 0.0) || !self.pets_per_avatar_mean.is_finite() {
            errors.push("pets_per_avatar_mean must be finite and nonnegative".to_string());
        }
        ValidationError::check(errors)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub avatars: Vec<Avatar>,
    pub pets: Vec<Pet>,
    pub social: SocialGraph,
}

impl Population {
    pub fn len(&self) -> usize {
        self.avatars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.avatars.is_empty()
    }

    pub fn avatar(&self, id: AvatarId) -> &Avatar {
        &self.avatars[id.index()]
    }

    pub fn avatar_mut(&mut self, id: AvatarId) -> &mut Avatar {
        &mut self.avatars[id.index()]
    }

    pub fn zone_counts(&self, zones: usize) -> Vec<usize> {
        let mut c = vec![0; zones];
        for a in &self.avatars {
            c[a.zone.index()] += 1;
        }
        c
    }

    /// Rebuilds derived indexes after deserialization.
    pub fn reindex(&mut self) {
        let edges = std::mem::take(&mut self.social.edges);
        self.social = SocialGraph::from_edges(self.avatars.len(), edges).expect("edges were valid");
    }
}

pub fn generate_population(
    spec: &PopulationSpec,
    world: &WorldMap,
    profile: &ProfileDistribution,
    seed: u64,
) -> Result<Population, ValidationError> {
    spec.validate()?;
    profile.validate()?;
    let mut rng = seeded(seed);
    Ok(generate_with(spec, world, profile, &mut rng))
}

pub(crate) fn generate_with(
    spec: &PopulationSpec,
    world: &WorldMap,
    profile: &ProfileDistribution,
    rng: &mut SimRng,
) -> Population {
    let zone_pick = WeightedIndex::new(world.density_weights()).expect("world validated");
    let vocation_pick = WeightedIndex::new(spec.vocation_mix.iter().map(|v| v.weight)).expect("spec validated");
    let [lo, hi] = spec.level_range;

    let mut avatars = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let zone = ZoneId(zone_pick.sample(rng) as u32);
        let vocation = &spec.vocation_mix[vocation_pick.sample(rng)];
        let level = rng.random_range(lo..=hi);
        let heal_capability = vocation.heal.sample(rng);
        let behavior = profile.sample(rng);
        avatars.push(Avatar {
            id: AvatarId(i as u32),
            zone,
            home_zone: zone,
            vocation: vocation.label.clone(),
            level,
            heal_capability,
            behavior,
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
            pets: Vec::new(),
        });
    }

    let edges = random_digraph(spec.count, spec.social_degree_mean, rng);
    let social = SocialGraph::from_edges(spec.count, edges).expect("generated edges are in range");

    let mut pets = Vec::new();
    if spec.pets_per_avatar_mean > 0.0 {
        let poisson = Poisson::new(spec.pets_per_avatar_mean).expect("validated");
        for a in avatars.iter_mut() {
            let k: f64 = poisson.sample(rng);
            for _ in 0..k as usize {
                let id = PetId(pets.len() as u32);
                a.pets.push(id);
                pets.push(Pet {
                    id,
                    owner: a.id,
                    status: PetStatus::Summoned,
                    carried_infection: None,
                    shedding_left: 0,
                });
            }
        }
    }
    Population { avatars, pets, social }
}

/// Directed graph with independent edges and the requested mean out-degree.
/// Walks the `n(n-1)` ordered pairs with geometric skips.
fn random_digraph(n: usize, mean_degree: f64, rng: &mut SimRng) -> Vec<(AvatarId, AvatarId)> {
    if n < 2 || mean_degree <= 0.0 {
        return Vec::new();
    }
    let slots = (n as u64) * (n as u64 - 1);
    let p = (mean_degree / (n as f64 - 1.0)).min(1.0);
    let to_edge = |k: u64| {
        let i = k / (n as u64 - 1);
        let mut j = k % (n as u64 - 1);
        if j >= i {
            j += 1;
        }
        (AvatarId(i as u32), AvatarId(j as u32))
    };
    if p >= 1.0 {
        return (0..slots).map(to_edge).collect();
    }
    let skip = Geometric::new(p).expect("p in (0, 1)");
    let mut edges = Vec::with_capacity((slots as f64 * p * 1.1) as usize + 8);
    let mut k = skip.sample(rng);
    while k < slots {
        edges.push(to_edge(k));
        k = k.saturating_add(1).saturating_add(skip.sample(rng));
    }
    edges
}
