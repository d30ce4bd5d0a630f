//! Per-tick snapshots, the transmission tree, and ex-post measures: R0 by
//! generation and by zone, and the run summary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::behavior::{epicenter_from_counts, AwarenessKind};
use crate::transmission::{ChannelKind, InfectionRecord};
use crate::world::ZoneId;

/// Pseudo-zone for infections over global chat and direct messages.
pub const NONSPATIAL: &str = "nonspatial";

/// Mutually exclusive health classes; every avatar is in exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HealthClass {
    Susceptible,
    Infected,
    Immune,
    /// Had an episode, is not immune, is alive and not infected.
    Recovered,
    Dead,
}

/// What a snapshot needs to know about one avatar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvatarView {
    pub zone: ZoneId,
    pub class: HealthClass,
    /// Symptoms visible to others (infected, visible stage, unmasked).
    pub visible: bool,
    pub awareness: AwarenessKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneSnapshot {
    pub name: String,
    pub restricted: bool,
    pub susceptible: u64,
    pub infected: u64,
    pub recovered: u64,
    pub dead: u64,
    pub immune: u64,
    /// Living avatars in the zone.
    pub present: u64,
    pub symptomatic: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AwarenessCounts {
    pub unaware: u64,
    pub rumor_aware: u64,
    pub informed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickSnapshot {
    pub tick: u64,
    pub variant: String,
    pub zones: Vec<ZoneSnapshot>,
    /// Cumulative infections by channel, index cases excluded.
    pub channel_infections: BTreeMap<ChannelKind, u64>,
    pub index_cases: u64,
    /// Over living avatars.
    pub awareness: AwarenessCounts,
    pub epicenter: Option<String>,
}

impl TickSnapshot {
    fn total(&self, f: impl Fn(&ZoneSnapshot) -> u64) -> u64 {
        self.zones.iter().map(f).sum()
    }

    pub fn susceptible(&self) -> u64 {
        self.total(|z| z.susceptible)
    }

    pub fn infected(&self) -> u64 {
        self.total(|z| z.infected)
    }

    pub fn recovered(&self) -> u64 {
        self.total(|z| z.recovered)
    }

    pub fn dead(&self) -> u64 {
        self.total(|z| z.dead)
    }

    pub fn immune(&self) -> u64 {
        self.total(|z| z.immune)
    }

    pub fn living(&self) -> u64 {
        self.total(|z| z.present)
    }

    pub fn symptomatic(&self) -> u64 {
        self.total(|z| z.symptomatic)
    }

    pub fn population(&self) -> u64 {
        self.total(|z| z.susceptible + z.infected + z.recovered + z.dead + z.immune)
    }

    pub fn zone(&self, name: &str) -> Option<&ZoneSnapshot> {
        self.zones.iter().find(|z| z.name == name)
    }
}

/// Builds a snapshot from per-avatar views. Used both by the live loop and by
/// log replay so the two agree by construction on what is counted.
pub fn build_snapshot<I: IntoIterator<Item = AvatarView>>(
    tick: u64,
    variant: &str,
    zone_names: &[String],
    restricted: &[bool],
    views: I,
    channel_infections: &BTreeMap<ChannelKind, u64>,
    index_cases: u64,
) -> TickSnapshot {
    let mut zones: Vec<ZoneSnapshot> = zone_names
        .iter()
        .zip(restricted)
        .map(|(n, &r)| ZoneSnapshot { name: n.clone(), restricted: r, ..Default::default() })
        .collect();
    let mut awareness = AwarenessCounts::default();
    let mut visible = vec![0usize; zones.len()];
    for v in views {
        let z = &mut zones[v.zone.index()];
        match v.class {
            HealthClass::Susceptible => z.susceptible += 1,
            HealthClass::Infected => z.infected += 1,
            HealthClass::Immune => z.immune += 1,
            HealthClass::Recovered => z.recovered += 1,
            HealthClass::Dead => z.dead += 1,
        }
        if v.class == HealthClass::Dead {
            continue;
        }
        z.present += 1;
        if v.visible {
            z.symptomatic += 1;
            visible[v.zone.index()] += 1;
        }
        match v.awareness {
            AwarenessKind::Unaware => awareness.unaware += 1,
            AwarenessKind::RumorAware => awareness.rumor_aware += 1,
            AwarenessKind::Informed => awareness.informed += 1,
        }
    }
    let mut channels = channel_infections.clone();
    for ch in ChannelKind::ALL {
        channels.entry(ch).or_insert(0);
    }
    TickSnapshot {
        tick,
        variant: variant.to_string(),
        zones,
        channel_infections: channels,
        index_cases,
        awareness,
        epicenter: epicenter_from_counts(&visible).map(|z| zone_names[z.index()].clone()),
    }
}

/// All infection records of a run, indexed by case id, with the tick each
/// case stopped being able to infect.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransmissionTree {
    records: Vec<InfectionRecord>,
    ended: Vec<Option<u64>>,
}

/// One line of `tree.ndjson`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeLine {
    #[serde(flatten)]
    pub record: InfectionRecord,
    pub ended_tick: Option<u64>,
}

impl TransmissionTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tree in which every case has completed; handy for hand-built trees.
    pub fn completed(records: Vec<InfectionRecord>) -> Self {
        let ended = records.iter().map(|r| Some(r.tick)).collect();
        Self::from_parts(records, ended)
    }

    /// # Panics
    /// If the lengths differ or case ids are not `0..n` in order.
    pub fn from_parts(records: Vec<InfectionRecord>, ended: Vec<Option<u64>>) -> Self {
        assert_eq!(records.len(), ended.len());
        for (i, r) in records.iter().enumerate() {
            assert_eq!(r.case_id, i, "case ids must be dense and ordered");
        }
        Self { records, ended }
    }

    pub fn from_lines(lines: Vec<TreeLine>) -> Self {
        let (records, ended) = lines.into_iter().map(|l| (l.record, l.ended_tick)).unzip();
        Self::from_parts(records, ended)
    }

    pub fn lines(&self) -> impl Iterator<Item = TreeLine> + '_ {
        self.records.iter().zip(&self.ended).map(|(r, &e)| TreeLine { record: r.clone(), ended_tick: e })
    }

    pub fn push(&mut self, record: InfectionRecord) {
        assert_eq!(record.case_id, self.records.len(), "case ids are assigned in order");
        self.records.push(record);
        self.ended.push(None);
    }

    pub fn end_case(&mut self, case: usize, tick: u64) {
        if self.ended[case].is_none() {
            self.ended[case] = Some(tick);
        }
    }

    pub fn records(&self) -> &[InfectionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_completed(&self, case: usize) -> bool {
        self.ended[case].is_some()
    }

    pub fn ended_tick(&self, case: usize) -> Option<u64> {
        self.ended[case]
    }

    /// Offspring per case, counted by scanning infector references.
    pub fn offspring_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.records.len()];
        for r in &self.records {
            if let Some(inf) = r.infector {
                counts[inf.case()] += 1;
            }
        }
        counts
    }

    /// Children of each case.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.records.len()];
        for r in &self.records {
            if let Some(inf) = r.infector {
                out[inf.case()].push(r.case_id);
            }
        }
        out
    }

    /// Case ids grouped by generation.
    pub fn by_generation(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut out: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.generation).or_default().push(r.case_id);
        }
        out
    }

    /// Index cases: records with no infector.
    pub fn roots(&self) -> impl Iterator<Item = &InfectionRecord> {
        self.records.iter().filter(|r| r.infector.is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStat {
    pub generation: u32,
    pub completed_cases: usize,
    pub offspring: usize,
    /// `None` when the generation has no completed case.
    pub mean: Option<f64>,
}

/// `None` marks an undefined value (no completed cases), never zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R0Estimate {
    pub first_generation: Option<f64>,
    pub weighted_all: Option<f64>,
    pub per_generation: Vec<GenerationStat>,
    pub completed_cases: usize,
}

/// Mean offspring of completed cases, per generation and overall. Generations
/// above `up_to_generation` are ignored.
pub fn estimate_r0(tree: &TransmissionTree, up_to_generation: Option<u32>) -> R0Estimate {
    let offspring = tree.offspring_counts();
    let mut per: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for r in tree.records() {
        if up_to_generation.is_some_and(|g| r.generation > g) {
            continue;
        }
        let e = per.entry(r.generation).or_default();
        if tree.is_completed(r.case_id) {
            e.0 += 1;
            e.1 += offspring[r.case_id];
        }
    }
    let per_generation: Vec<GenerationStat> = per
        .iter()
        .map(|(&g, &(n, o))| GenerationStat {
            generation: g,
            completed_cases: n,
            offspring: o,
            mean: (n > 0).then(|| o as f64 / n as f64),
        })
        .collect();
    let completed: usize = per.values().map(|v| v.0).sum();
    let total: usize = per.values().map(|v| v.1).sum();
    R0Estimate {
        first_generation: per_generation.iter().find(|g| g.generation == 0).and_then(|g| g.mean),
        weighted_all: (completed > 0).then(|| total as f64 / completed as f64),
        per_generation,
        completed_cases: completed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneR0 {
    /// Mean offspring of completed cases infected in each zone; zones without
    /// cases are absent.
    pub by_zone: BTreeMap<String, f64>,
    /// Coefficient of variation of zone R0 over mean zone density, across
    /// spatial zones with positive density. `None` with no such zone.
    pub dispersion: Option<f64>,
}

/// Zone of infection is where the infectee stood, or [`NONSPATIAL`] for chat
/// and message channels. Index cases count in their zone.
pub fn r0_by_zone(tree: &TransmissionTree, snapshots: &[TickSnapshot]) -> ZoneR0 {
    let names: Vec<String> = snapshots.first().map(|s| s.zones.iter().map(|z| z.name.clone()).collect()).unwrap_or_default();
    let offspring = tree.offspring_counts();
    let mut acc: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in tree.records() {
        if !tree.is_completed(r.case_id) {
            continue;
        }
        let key = match r.channel {
            Some(ch) if !ch.is_spatial() => NONSPATIAL.to_string(),
            _ => names.get(r.zone.index()).cloned().unwrap_or_else(|| r.zone.to_string()),
        };
        let e = acc.entry(key).or_default();
        e.0 += 1;
        e.1 += offspring[r.case_id];
    }
    let by_zone: BTreeMap<String, f64> = acc.into_iter().map(|(k, (n, o))| (k, o as f64 / n as f64)).collect();

    let mut density = vec![0.0; names.len()];
    for s in snapshots {
        for (d, z) in density.iter_mut().zip(&s.zones) {
            *d += z.present as f64;
        }
    }
    let ratios: Vec<f64> = names
        .iter()
        .zip(&density)
        .filter_map(|(n, &d)| {
            let d = d / snapshots.len().max(1) as f64;
            let r = by_zone.get(n)?;
            (d > 0.0).then_some(r / d)
        })
        .collect();
    ZoneR0 { by_zone, dispersion: coefficient_of_variation(&ratios) }
}

fn coefficient_of_variation(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Some(0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some(var.sqrt() / mean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub population: u64,
    pub ever_infected: u64,
    pub attack_rate: f64,
    /// Peak fraction of the population infected at once.
    pub peak_prevalence: f64,
    pub peak_infected: u64,
    pub peak_tick: u64,
    pub deaths: u64,
    /// Last tick executed.
    pub duration: u64,
    pub epidemic_threshold: f64,
    pub epidemic_occurred: bool,
    pub r0_first_generation: Option<f64>,
    pub r0_weighted_all: Option<f64>,
}

pub fn run_summary(snapshots: &[TickSnapshot], tree: &TransmissionTree, threshold: f64) -> RunSummary {
    let population = snapshots.first().map_or(0, TickSnapshot::population);
    let ever: BTreeSet<_> = tree.records().iter().map(|r| r.infectee).collect();
    let ever_infected = ever.len() as u64;
    let attack_rate = if population == 0 { 0.0 } else { ever_infected as f64 / population as f64 };
    let (mut peak_infected, mut peak_tick) = (0, 0);
    for s in snapshots {
        if s.infected() > peak_infected {
            peak_infected = s.infected();
            peak_tick = s.tick;
        }
    }
    let r0 = estimate_r0(tree, None);
    RunSummary {
        population,
        ever_infected,
        attack_rate,
        peak_prevalence: if population == 0 { 0.0 } else { peak_infected as f64 / population as f64 },
        peak_infected,
        peak_tick,
        deaths: snapshots.last().map_or(0, TickSnapshot::dead),
        duration: snapshots.last().map_or(0, |s| s.tick),
        epidemic_threshold: threshold,
        epidemic_occurred: population > 0 && attack_rate >= threshold,
        r0_first_generation: r0.first_generation,
        r0_weighted_all: r0.weighted_all,
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"));
        writeln!(f, "population          {}", self.population)?;
        writeln!(f, "ever infected       {}", self.ever_infected)?;
        writeln!(f, "attack rate         {:.4}", self.attack_rate)?;
        writeln!(f, "peak prevalence     {:.4} ({} avatars at tick {})", self.peak_prevalence, self.peak_infected, self.peak_tick)?;
        writeln!(f, "deaths              {}", self.deaths)?;
        writeln!(f, "duration (ticks)    {}", self.duration)?;
        writeln!(
            f,
            "epidemic            {} (threshold {})",
            if self.epidemic_occurred { "yes" } else { "no" },
            self.epidemic_threshold
        )?;
        writeln!(f, "R0 first generation {}", opt(self.r0_first_generation))?;
        write!(f, "R0 weighted         {}", opt(self.r0_weighted_all))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::AvatarId;
    use crate::transmission::InfectorRef;

    fn rec(case_id: usize, parent: Option<usize>, generation: u32) -> InfectionRecord {
        InfectionRecord {
            case_id,
            infectee: AvatarId(case_id as u32),
            infector: parent.map(|p| InfectorRef::Avatar { avatar: AvatarId(p as u32), case: p }),
            channel: parent.map(|_| ChannelKind::Proximity),
            tick: generation as u64,
            generation,
            zone: ZoneId(0),
        }
    }

    #[test]
    fn lone_index_case() {
        let t = TransmissionTree::completed(vec![rec(0, None, 0)]);
        let e = estimate_r0(&t, None);
        assert_eq!(e.first_generation, Some(0.0));
        assert_eq!(e.weighted_all, Some(0.0));
    }

    #[test]
    fn no_completed_cases_is_undefined() {
        let mut t = TransmissionTree::new();
        t.push(rec(0, None, 0));
        let e = estimate_r0(&t, None);
        assert_eq!(e.first_generation, None);
        assert_eq!(e.weighted_all, None);
        assert_eq!(estimate_r0(&TransmissionTree::new(), None).weighted_all, None);
    }

    #[test]
    fn ongoing_cases_excluded() {
        let mut t = TransmissionTree::new();
        t.push(rec(0, None, 0));
        t.push(rec(1, Some(0), 1));
        t.push(rec(2, None, 0));
        t.end_case(0, 5);
        let e = estimate_r0(&t, None);
        assert_eq!(e.first_generation, Some(1.0));
        assert_eq!(e.completed_cases, 1);
    }

    #[test]
    fn generation_cap() {
        let t = TransmissionTree::completed(vec![rec(0, None, 0), rec(1, Some(0), 1), rec(2, Some(1), 2)]);
        let e = estimate_r0(&t, Some(1));
        assert_eq!(e.per_generation.len(), 2);
        assert_eq!(e.weighted_all, Some(1.0));
    }

    #[test]
    fn nonspatial_attribution() {
        let mut r = rec(1, Some(0), 1);
        r.channel = Some(ChannelKind::GlobalChat);
        let t = TransmissionTree::completed(vec![rec(0, None, 0), r]);
        let snaps = vec![build_snapshot(
            0,
            "x",
            &["a".to_string()],
            &[false],
            [AvatarView { zone: ZoneId(0), class: HealthClass::Infected, visible: false, awareness: AwarenessKind::Unaware }],
            &BTreeMap::new(),
            1,
        )];
        let z = r0_by_zone(&t, &snaps);
        assert_eq!(z.by_zone.get("a"), Some(&1.0));
        assert_eq!(z.by_zone.get(NONSPATIAL), Some(&0.0));
        assert_eq!(z.dispersion, Some(0.0));
    }

    #[test]
    fn summary_basics() {
        let views = (0..4).map(|i| AvatarView {
            zone: ZoneId(0),
            class: if i == 0 { HealthClass::Infected } else { HealthClass::Susceptible },
            visible: false,
            awareness: AwarenessKind::Unaware,
        });
        let s0 = build_snapshot(0, "x", &["a".into()], &[false], views, &BTreeMap::new(), 1);
        let t = TransmissionTree::completed(vec![rec(0, None, 0)]);
        let s = run_summary(&[s0], &t, 0.05);
        assert_eq!(s.population, 4);
        assert_eq!(s.attack_rate, 0.25);
        assert!(s.epidemic_occurred);
        assert_eq!(s.peak_infected, 1);
        assert_eq!(s.peak_tick, 0);
    }
}
