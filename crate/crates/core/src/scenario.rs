//! Scenario files: one JSON document describing a reproducible experiment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::behavior::{InformationParams, ProfileDistribution};
use crate::disease::{validate_disease, DiseaseDefinition};
use crate::error::{Error, Result, ValidationError};
use crate::intervention::{validate_intervention, Intervention};
use crate::population::PopulationSpec;
use crate::transmission::ParticipationParams;
use crate::world::{build_world, WorldSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PetParams {
    pub dismiss_probability_per_tick: f64,
    pub resummon_probability_per_tick: f64,
    /// Ticks a resummoned carrier keeps shedding.
    pub shedding_ticks: u32,
}

impl Default for PetParams {
    fn default() -> Self {
        Self { dismiss_probability_per_tick: 0.05, resummon_probability_per_tick: 0.2, shedding_ticks: 3 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehaviorSection {
    pub profile: ProfileDistribution,
    pub participation: ParticipationParams,
    pub information: InformationParams,
    pub pets: PetParams,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Random,
    Zone(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexCases {
    pub count: usize,
    pub placement: Placement,
}

impl Default for IndexCases {
    fn default() -> Self {
        Self { count: 1, placement: Placement::Random }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub tick_length_days: f64,
    pub horizon_ticks: u64,
    pub seed: u64,
    pub index_cases: IndexCases,
    pub epidemic_threshold: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { tick_length_days: 1.0, horizon_ticks: 365, seed: 1, index_cases: IndexCases::default(), epidemic_threshold: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledIntervention {
    pub tick: u64,
    #[serde(flatten)]
    pub intervention: Intervention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub world: WorldSpec,
    #[serde(default)]
    pub population: PopulationSpec,
    pub disease: DiseaseDefinition,
    #[serde(default)]
    pub behavior: BehaviorSection,
    #[serde(default)]
    pub schedule: Vec<ScheduledIntervention>,
    #[serde(default)]
    pub run: RunSection,
}

const BUNDLED: &[(&str, &str)] = &[
    ("gray-plague", include_str!("../scenarios/gray-plague.json")),
    ("corrupted-blood", include_str!("../scenarios/corrupted-blood.json")),
    ("homogeneous-baseline", include_str!("../scenarios/homogeneous-baseline.json")),
    ("smallpox", include_str!("../scenarios/smallpox.json")),
];

/// Names accepted by [`ScenarioConfig::bundled`].
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

impl ScenarioConfig {
    /// Parses and validates a scenario document.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Parse { line: inner.line(), column: inner.column(), path, message: inner.to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn bundled(name: &str) -> Option<Self> {
        let (_, text) = BUNDLED.iter().find(|(n, _)| *n == name)?;
        Some(Self::from_json(text).expect("bundled scenarios are valid"))
    }

    /// A bundled scenario name, or else a path to a scenario file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match Self::bundled(name_or_path) {
            Some(cfg) => Ok(cfg),
            None => load_scenario(name_or_path),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Runs every module's validation and reports all violations at once.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut errors = Vec::new();
        let mut take = |r: Result<(), ValidationError>| {
            if let Err(e) = r {
                errors.extend(e.violations);
            }
        };
        let world = build_world(&self.world);
        if let Err(e) = &world {
            take(Err(e.clone()));
        }
        take(self.population.validate());
        take(self.behavior.profile.validate());
        take(validate_disease(&self.disease));
        let mut more = Vec::new();
        self.behavior.participation.validate(&mut more);
        self.behavior.information.validate(&mut more);
        let pets = &self.behavior.pets;
        for (n, p) in [
            ("dismiss_probability_per_tick", pets.dismiss_probability_per_tick),
            ("resummon_probability_per_tick", pets.resummon_probability_per_tick),
        ] {
            if !(0.0..=1.0).contains(&p) {
                more.push(format!("pets {n} = {p} outside [0, 1]"));
            }
        }
        let run = &self.run;
        if !(run.tick_length_days > 0.0) || !run.tick_length_days.is_finite() {
            more.push("run tick_length_days must be positive".to_string());
        }
        if !(0.0..=1.0).contains(&run.epidemic_threshold) {
            more.push(format!("run epidemic_threshold = {} outside [0, 1]", run.epidemic_threshold));
        }
        if run.index_cases.count > self.population.count {
            more.push(format!(
                "index_cases count {} exceeds population count {}",
                run.index_cases.count, self.population.count
            ));
        }
        if let Ok(w) = &world {
            if let Placement::Zone(z) = &run.index_cases.placement {
                if w.zone_id(z).is_none() {
                    more.push(format!("index_cases placement: unknown zone `{z}`"));
                }
            }
            for entry in &self.schedule {
                if entry.tick == 0 || entry.tick > run.horizon_ticks {
                    more.push(format!(
                        "schedule entry at tick {}: outside 1..={}",
                        entry.tick, run.horizon_ticks
                    ));
                }
                if let Err(e) = validate_intervention(w, &entry.intervention) {
                    more.extend(e.violations.into_iter().map(|v| format!("schedule entry at tick {}: {v}", entry.tick)));
                }
            }
        }
        errors.extend(more);
        ValidationError::check(errors)
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    ScenarioConfig::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transmission::ChannelKind;

    #[test]
    fn bundled_all_load() {
        for n in bundled_names() {
            let cfg = ScenarioConfig::bundled(n).unwrap();
            assert_eq!(cfg.name, n);
        }
        assert!(ScenarioConfig::bundled("nope").is_none());
    }

    #[test]
    fn round_trip() {
        let cfg = ScenarioConfig::bundled("gray-plague").unwrap();
        assert_eq!(ScenarioConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn parse_error_has_position_and_field() {
        let text = "{\n  \"name\": \"x\",\n  \"disease\": {\"name\": \"d\", \"stages\": 5}\n}";
        match ScenarioConfig::from_json(text).unwrap_err() {
            Error::Parse { line, path, .. } => {
                assert_eq!(line, 3);
                assert_eq!(path, "disease.stages");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn schedule_zone_error_names_tick_and_zone() {
        let mut cfg = ScenarioConfig::bundled("gray-plague").unwrap();
        cfg.schedule.push(ScheduledIntervention {
            tick: 7,
            intervention: Intervention::AreaRestriction { zones: vec!["atlantis".into()] },
        });
        let e = cfg.validate().unwrap_err();
        assert!(e.violations.iter().any(|v| v.contains("tick 7") && v.contains("atlantis")), "{e}");
    }

    #[test]
    fn all_violations_reported() {
        let mut cfg = ScenarioConfig::bundled("smallpox").unwrap();
        cfg.disease.beta_by_channel.insert(ChannelKind::Proximity, 2.0);
        cfg.run.tick_length_days = 0.0;
        cfg.behavior.pets.dismiss_probability_per_tick = -1.0;
        assert_eq!(cfg.validate().unwrap_err().violations.len(), 3);
    }
}
