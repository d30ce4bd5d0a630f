//! Developer interventions: warnings, area restrictions, cures, symptom masks
//! and hotfixes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::disease::DiseaseDefinition;
use crate::error::ValidationError;
use crate::population::Avatar;
use crate::rng::chance;
use crate::transmission::ChannelKind;
use crate::world::{WorldMap, ZoneId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Audience {
    Global,
    Zones(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Intervention {
    Warning {
        audience: Audience,
        /// Reserved; warnings always carry the truth.
        #[serde(default = "one")]
        accuracy_hint: f64,
    },
    AreaRestriction {
        zones: Vec<String>,
    },
    LiftRestriction {
        zones: Vec<String>,
    },
    CureQuest {
        /// Quest opens at this tick if later than the tick it is applied at.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start_tick: Option<u64>,
        uptake_probability_per_tick: f64,
        efficacy: f64,
        grants_immunity: bool,
        #[serde(default)]
        requires_cure_sensitive_stage: bool,
    },
    SymptomMask {
        uptake_probability_per_tick: f64,
    },
    TemporaryCure {
        uptake_probability_per_tick: f64,
        efficacy: f64,
    },
    Hotfix {
        channel: ChannelKind,
        new_beta: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Intervention {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Intervention::Warning { .. } => "warning",
            Intervention::AreaRestriction { .. } => "area_restriction",
            Intervention::LiftRestriction { .. } => "lift_restriction",
            Intervention::CureQuest { .. } => "cure_quest",
            Intervention::SymptomMask { .. } => "symptom_mask",
            Intervention::TemporaryCure { .. } => "temporary_cure",
            Intervention::Hotfix { .. } => "hotfix",
        }
    }

    pub fn zone_names(&self) -> &[String] {
        match self {
            Intervention::Warning { audience: Audience::Zones(z), .. }
            | Intervention::AreaRestriction { zones: z }
            | Intervention::LiftRestriction { zones: z } => z,
            _ => &[],
        }
    }
}

/// Checks parameter bounds and that every named zone exists.
pub fn validate_intervention(world: &WorldMap, iv: &Intervention) -> Result<(), ValidationError> {
    let mut errors = Vec::new();
    let mut prob = |what: &str, p: f64| {
        if !(0.0..=1.0).contains(&p) {
            errors.push(format!("{} {what} = {p} outside [0, 1]", iv.kind_name()));
        }
    };
    match *iv {
        Intervention::Warning { accuracy_hint, .. } => prob("accuracy_hint", accuracy_hint),
        Intervention::CureQuest { uptake_probability_per_tick, efficacy, .. }
        | Intervention::TemporaryCure { uptake_probability_per_tick, efficacy } => {
            prob("uptake_probability_per_tick", uptake_probability_per_tick);
            prob("efficacy", efficacy);
        }
        Intervention::SymptomMask { uptake_probability_per_tick } => {
            prob("uptake_probability_per_tick", uptake_probability_per_tick)
        }
        Intervention::Hotfix { new_beta, .. } => prob("new_beta", new_beta),
        Intervention::AreaRestriction { .. } | Intervention::LiftRestriction { .. } => {}
    }
    if matches!(iv, Intervention::AreaRestriction { .. } | Intervention::LiftRestriction { .. }) && iv.zone_names().is_empty() {
        errors.push(format!("{} needs at least one zone", iv.kind_name()));
    }
    for z in iv.zone_names() {
        if world.zone_id(z).is_none() {
            errors.push(format!("unknown zone `{z}`"));
        }
    }
    ValidationError::check(errors)
}

pub(crate) fn resolve_zones(world: &WorldMap, names: &[String]) -> Vec<ZoneId> {
    names.iter().filter_map(|n| world.zone_id(n)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CureQuestEffect {
    pub active_from: u64,
    pub uptake: f64,
    pub efficacy: f64,
    pub grants_immunity: bool,
    pub requires_cure_sensitive_stage: bool,
}

/// Interventions that keep acting every tick once applied. A newer one of the
/// same kind replaces the older.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActiveEffects {
    pub cure_quest: Option<CureQuestEffect>,
    /// Uptake per tick.
    pub symptom_mask: Option<f64>,
    /// (uptake, efficacy).
    pub temporary_cure: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreatmentOutcome {
    None,
    /// Infection cleared; `immune` says whether immunity came with it.
    Cured { immune: bool, temporary: bool },
    Masked,
}

/// One tick of ongoing treatments for one infected avatar: the cure quest,
/// then the temporary cure, then the mask.
pub fn treat<R: Rng + ?Sized>(
    avatar: &Avatar,
    def: &DiseaseDefinition,
    effects: &ActiveEffects,
    tick: u64,
    rng: &mut R,
) -> TreatmentOutcome {
    let Some(inf) = avatar.infection.as_ref().filter(|_| avatar.alive) else {
        return TreatmentOutcome::None;
    };
    let stage = def.stage(inf);
    if let Some(q) = effects.cure_quest.filter(|q| tick >= q.active_from) {
        if chance(rng, q.uptake) {
            let eligible = !q.requires_cure_sensitive_stage || stage.cure_sensitive;
            if eligible && chance(rng, q.efficacy) {
                return TreatmentOutcome::Cured { immune: q.grants_immunity, temporary: false };
            }
        }
    }
    if !stage.symptoms_visible {
        return TreatmentOutcome::None;
    }
    if let Some((uptake, efficacy)) = effects.temporary_cure {
        if chance(rng, uptake) && chance(rng, efficacy) {
            return TreatmentOutcome::Cured { immune: false, temporary: true };
        }
    }
    if let Some(uptake) = effects.symptom_mask {
        if !avatar.masked && chance(rng, uptake) {
            return TreatmentOutcome::Masked;
        }
    }
    TreatmentOutcome::None
}
