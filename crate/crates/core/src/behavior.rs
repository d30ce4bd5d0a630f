//! Information diffusion (rumors and warnings) and the movement policy that
//! couples awareness to where avatars go.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::disease::DiseaseDefinition;
use crate::error::ValidationError;
use crate::population::{Avatar, AvatarId, Population};
use crate::rng::{chance, weighted_index};
use crate::transmission::{Activity, ChannelKind};
use crate::world::{WorldMap, ZoneId, UNREACHABLE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AwarenessKind {
    Unaware,
    RumorAware,
    Informed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AwarenessState {
    pub kind: AwarenessKind,
    /// `None` while unaware; exactly 1 when informed.
    pub accuracy: Option<f64>,
    pub acquired_tick: u64,
}

impl Default for AwarenessState {
    fn default() -> Self {
        Self { kind: AwarenessKind::Unaware, accuracy: None, acquired_tick: 0 }
    }
}

impl AwarenessState {
    pub fn rumor(accuracy: f64, tick: u64) -> Self {
        Self { kind: AwarenessKind::RumorAware, accuracy: Some(accuracy), acquired_tick: tick }
    }

    pub fn informed(tick: u64) -> Self {
        Self { kind: AwarenessKind::Informed, accuracy: Some(1.0), acquired_tick: tick }
    }

    pub fn is_unaware(&self) -> bool {
        self.kind == AwarenessKind::Unaware
    }

    pub fn is_aware(&self) -> bool {
        !self.is_unaware()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorProfile {
    pub curiosity: f64,
    pub risk_aversion: f64,
    pub move_probability_per_tick: f64,
}

impl BehaviorProfile {
    pub fn is_attracted(&self) -> bool {
        self.curiosity > self.risk_aversion
    }
}

/// How traits are drawn for a fresh population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileDistribution {
    pub curiosity_mean: f64,
    pub risk_aversion_mean: f64,
    /// Spread of both traits; draws are clamped to [0, 1].
    pub trait_sd: f64,
    pub move_probability: f64,
}

impl Default for ProfileDistribution {
    fn default() -> Self {
        Self { curiosity_mean: 0.7, risk_aversion_mean: 0.3, trait_sd: 0.15, move_probability: 0.2 }
    }
}

impl ProfileDistribution {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut errors = Vec::new();
        for (n, p) in [
            ("curiosity_mean", self.curiosity_mean),
            ("risk_aversion_mean", self.risk_aversion_mean),
            ("move_probability", self.move_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                errors.push(format!("behavior {n} = {p} outside [0, 1]"));
            }
        }
        if !(self.trait_sd >= 0.0) || !self.trait_sd.is_finite() {
            errors.push("behavior trait_sd must be finite and nonnegative".to_string());
        }
        ValidationError::check(errors)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BehaviorProfile {
        let mut draw = |mean: f64| {
            if self.trait_sd == 0.0 {
                mean
            } else {
                Normal::new(mean, self.trait_sd).expect("validated").sample(rng).clamp(0.0, 1.0)
            }
        };
        let curiosity = draw(self.curiosity_mean);
        let risk_aversion = draw(self.risk_aversion_mean);
        BehaviorProfile { curiosity, risk_aversion, move_probability_per_tick: self.move_probability }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InformationParams {
    /// Per-contact probability of passing on what one knows, by channel.
    pub beta_by_channel: BTreeMap<ChannelKind, f64>,
    /// Accuracy multiplier per rumor hop.
    pub decay: f64,
    /// Chance per tick that an unaware avatar notices visible symptoms in its zone.
    pub observation_probability: f64,
    /// Accuracy of a first-hand observation.
    pub observer_accuracy: f64,
}

impl Default for InformationParams {
    fn default() -> Self {
        Self {
            beta_by_channel: BTreeMap::from([
                (ChannelKind::ZoneChat, 0.3),
                (ChannelKind::GlobalChat, 0.05),
                (ChannelKind::DirectMessage, 0.5),
            ]),
            decay: 0.8,
            observation_probability: 0.3,
            observer_accuracy: 1.0,
        }
    }
}

impl InformationParams {
    pub(crate) fn validate(&self, errors: &mut Vec<String>) {
        for (ch, &b) in &self.beta_by_channel {
            if !(0.0..=1.0).contains(&b) {
                errors.push(format!("information beta for channel {ch} = {b} outside [0, 1]"));
            }
            if !matches!(ch, ChannelKind::ZoneChat | ChannelKind::GlobalChat | ChannelKind::DirectMessage) {
                errors.push(format!("information does not travel over channel {ch}"));
            }
        }
        for (n, p) in [
            ("decay", self.decay),
            ("observation_probability", self.observation_probability),
            ("observer_accuracy", self.observer_accuracy),
        ] {
            if !(0.0..=1.0).contains(&p) {
                errors.push(format!("information {n} = {p} outside [0, 1]"));
            }
        }
    }

    fn beta(&self, ch: ChannelKind) -> f64 {
        self.beta_by_channel.get(&ch).copied().unwrap_or(0.0)
    }
}

/// Whether other players can see this avatar's symptoms.
pub fn shows_symptoms(a: &Avatar, def: &DiseaseDefinition) -> bool {
    a.alive && !a.masked && a.infection.as_ref().is_some_and(|i| def.stage(i).symptoms_visible)
}

pub fn visible_symptoms_by_zone(world: &WorldMap, population: &Population, def: &DiseaseDefinition) -> Vec<usize> {
    let mut counts = vec![0; world.len()];
    for a in population.avatars.iter().filter(|a| shows_symptoms(a, def)) {
        counts[a.zone.index()] += 1;
    }
    counts
}

/// Zone with the most visible symptoms, lowest id on ties; `None` when nothing is visible.
pub fn epicenter_from_counts(counts: &[usize]) -> Option<ZoneId> {
    let mut best: Option<(usize, usize)> = None;
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| ZoneId(i as u32))
}

pub fn epicenter_estimate(world: &WorldMap, population: &Population, def: &DiseaseDefinition) -> Option<ZoneId> {
    epicenter_from_counts(&visible_symptoms_by_zone(world, population, def))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AwarenessChange {
    pub avatar: AvatarId,
    pub kind: AwarenessKind,
    pub accuracy: Option<f64>,
}

#[derive(Clone, Copy)]
struct Sender {
    accuracy: f64,
    belief: Option<ZoneId>,
}

/// One synchronous round of information diffusion.
///
/// Informed avatars refresh their belief to `epicenter`. Unaware avatars who see
/// symptoms (their own, or in their zone with `observation_probability`) become
/// rumor-aware at `observer_accuracy`. Then avatars aware at the start of the
/// round pass what they know over chat and messages: a receiver's accuracy is
/// the sender's times `decay`, and it keeps the sender's belief with
/// probability `decay`, otherwise believes a uniformly random zone. Only
/// unaware avatars take up rumors, so accuracy never increases along a chain.
#[allow(clippy::too_many_arguments)]
pub fn spread_information<R: Rng + ?Sized>(
    world: &WorldMap,
    population: &mut Population,
    def: &DiseaseDefinition,
    activity: &Activity,
    params: &InformationParams,
    epicenter: Option<ZoneId>,
    rng: &mut R,
    tick: u64,
) -> Vec<AwarenessChange> {
    let n = population.len();
    let mut senders: Vec<Option<Sender>> = vec![None; n];
    let mut zone_chat: Vec<Vec<AvatarId>> = vec![Vec::new(); world.len()];
    let mut global_chat: Vec<AvatarId> = Vec::new();
    for a in population.avatars.iter_mut().filter(|a| a.alive) {
        if a.awareness.kind == AwarenessKind::Informed {
            a.believed_epicenter = epicenter;
        }
        if a.awareness.is_aware() {
            let i = a.id.index();
            senders[i] = Some(Sender { accuracy: a.awareness.accuracy.unwrap_or(1.0), belief: a.believed_epicenter });
            if activity.zone_chat[i] {
                zone_chat[a.zone.index()].push(a.id);
            }
            if activity.global_chat[i] {
                global_chat.push(a.id);
            }
        }
    }
    let mut dm: Vec<(AvatarId, AvatarId)> = activity
        .messages
        .iter()
        .filter(|(from, _)| senders[from.index()].is_some())
        .map(|&(from, to)| (to, from))
        .collect();
    dm.sort_unstable();

    let visible = visible_symptoms_by_zone(world, population, def);
    let mut changes = Vec::new();

    for a in population.avatars.iter_mut().filter(|a| a.alive && a.awareness.is_unaware()) {
        let sees_own = !a.masked && a.infection.as_ref().is_some_and(|i| def.stage(i).symptoms_visible);
        if sees_own || (visible[a.zone.index()] > 0 && chance(rng, params.observation_probability)) {
            a.awareness = AwarenessState::rumor(params.observer_accuracy, tick);
            a.believed_epicenter = Some(a.zone);
            changes.push(AwarenessChange { avatar: a.id, kind: a.awareness.kind, accuracy: a.awareness.accuracy });
        }
    }

    let b_zone = params.beta(ChannelKind::ZoneChat);
    let b_global = params.beta(ChannelKind::GlobalChat);
    let b_dm = params.beta(ChannelKind::DirectMessage);
    let zones = world.len() as u32;
    for a in population.avatars.iter_mut().filter(|a| a.alive && a.awareness.is_unaware()) {
        let i = a.id.index();
        if senders[i].is_some() {
            continue;
        }
        let mut heard: Vec<(AvatarId, f64)> = Vec::new();
        if activity.zone_chat[i] && b_zone > 0.0 {
            heard.extend(zone_chat[a.zone.index()].iter().map(|&s| (s, b_zone)));
        }
        if activity.global_chat[i] && b_global > 0.0 {
            heard.extend(global_chat.iter().map(|&s| (s, b_global)));
        }
        if b_dm > 0.0 {
            let lo = dm.partition_point(|(t, _)| *t < a.id);
            let hi = dm.partition_point(|(t, _)| *t <= a.id);
            heard.extend(dm[lo..hi].iter().map(|&(_, s)| (s, b_dm)));
        }
        heard.retain(|(s, _)| *s != a.id);
        if heard.is_empty() {
            continue;
        }
        let p = 1.0 - heard.iter().fold(1.0, |acc, (_, b)| acc * (1.0 - b));
        if !chance(rng, p) {
            continue;
        }
        let weights: Vec<f64> = heard.iter().map(|(_, b)| *b).collect();
        let (from, _) = heard[weighted_index(rng, &weights).expect("positive weights")];
        let sender = senders[from.index()].expect("sender is aware");
        let belief = if chance(rng, params.decay) || zones == 0 {
            sender.belief
        } else {
            Some(ZoneId(rng.random_range(0..zones)))
        };
        a.awareness = AwarenessState::rumor(sender.accuracy * params.decay, tick);
        a.believed_epicenter = belief;
        changes.push(AwarenessChange { avatar: a.id, kind: a.awareness.kind, accuracy: a.awareness.accuracy });
    }
    changes
}

/// Makes every living avatar in the audience informed. Returns who changed.
pub fn inform(population: &mut Population, audience: Option<&[ZoneId]>, epicenter: Option<ZoneId>, tick: u64) -> Vec<AwarenessChange> {
    let mut changes = Vec::new();
    for a in population.avatars.iter_mut().filter(|a| a.alive) {
        if audience.is_some_and(|zs| !zs.contains(&a.zone)) {
            continue;
        }
        a.believed_epicenter = epicenter;
        if a.awareness.kind != AwarenessKind::Informed {
            a.awareness = AwarenessState::informed(tick);
            changes.push(AwarenessChange { avatar: a.id, kind: a.awareness.kind, accuracy: a.awareness.accuracy });
        }
    }
    changes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveDecision {
    Stay,
    /// Too sick to move or chat this tick.
    Withdrawn,
    MoveTo(ZoneId),
}

/// Movement for one avatar this tick.
///
/// Withdrawal is drawn first for infected avatars. Otherwise the avatar moves
/// with `move_probability × mobility_modifier`, one hop over adjacency or
/// teleport links. Aware avatars that know of an epicenter head toward it when
/// curiosity exceeds risk aversion and away from it otherwise (lowest zone id
/// on ties); everyone else picks a neighbor uniformly. A mover whose pick is
/// restricted ends up instead in the unrestricted neighbor of that zone closest
/// to where it started.
pub fn decide_move<R: Rng + ?Sized>(avatar: &Avatar, world: &WorldMap, def: &DiseaseDefinition, rng: &mut R) -> MoveDecision {
    if !avatar.alive {
        return MoveDecision::Stay;
    }
    let mut mobility = 1.0;
    if let Some(inf) = &avatar.infection {
        let stage = def.stage(inf);
        if chance(rng, stage.withdrawal_probability_at(inf.ticks_in_stage)) {
            return MoveDecision::Withdrawn;
        }
        mobility = stage.mobility_modifier;
    }
    if !chance(rng, avatar.behavior.move_probability_per_tick * mobility) {
        return MoveDecision::Stay;
    }
    let here = avatar.zone;
    let neighbors = world.neighbors(here);
    if neighbors.is_empty() {
        return MoveDecision::Stay;
    }
    let target = match (avatar.awareness.is_aware(), avatar.believed_epicenter) {
        (true, Some(epi)) => {
            let candidates = std::iter::once(here).chain(neighbors.iter().copied());
            let d = |z: ZoneId| world.raw_distance(z, epi);
            if avatar.behavior.is_attracted() {
                candidates.min_by_key(|&z| (d(z), z)).expect("nonempty")
            } else {
                candidates
                    .map(|z| (if d(z) == UNREACHABLE { 0 } else { d(z) }, z))
                    .max_by_key(|&(dist, z)| (dist, std::cmp::Reverse(z)))
                    .expect("nonempty")
                    .1
            }
        }
        _ => neighbors[rng.random_range(0..neighbors.len())],
    };
    if target == here {
        return MoveDecision::Stay;
    }
    if !world.is_restricted(target) {
        return MoveDecision::MoveTo(target);
    }
    let overflow = world
        .neighbors(target)
        .iter()
        .copied()
        .filter(|&z| !world.is_restricted(z))
        .min_by_key(|&z| (world.raw_distance(here, z), z));
    match overflow {
        Some(z) if z != here => MoveDecision::MoveTo(z),
        _ => MoveDecision::Stay,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::testkit::*;

    fn quiet_params(dm: f64) -> InformationParams {
        InformationParams {
            beta_by_channel: BTreeMap::from([(ChannelKind::DirectMessage, dm)]),
            decay: 0.8,
            observation_probability: 0.0,
            observer_accuracy: 1.0,
        }
    }

    #[test]
    fn nothing_to_talk_about_keeps_everyone_unaware() {
        let w = line_world(&["a", "b"]);
        let mut pop = population((0..20).map(|i| avatar(i, i % 2)).collect());
        let def = disease(&[]);
        let act = Activity::all_chatting(20);
        let mut rng = seeded(1);
        for t in 1..50 {
            let ch = spread_information(&w, &mut pop, &def, &act, &InformationParams::default(), None, &mut rng, t);
            assert!(ch.is_empty());
        }
        assert!(pop.avatars.iter().all(|a| a.awareness.is_unaware()));
    }

    #[test]
    fn rumor_chain_decays_per_hop() {
        let w = line_world(&["a", "b", "c", "d"]);
        let mut pop = population((0..4).map(|i| avatar(i, i)).collect());
        pop.avatars[0].awareness = AwarenessState::rumor(1.0, 0);
        let def = disease(&[]);
        let mut act = Activity::idle(4);
        act.messages = vec![(AvatarId(0), AvatarId(1)), (AvatarId(1), AvatarId(2)), (AvatarId(2), AvatarId(3))];
        let mut rng = seeded(2);
        for t in 1..=3 {
            spread_information(&w, &mut pop, &def, &act, &quiet_params(1.0), None, &mut rng, t);
            // One hop per round: only avatars aware at the start of a round pass it on.
            assert_eq!(pop.avatars.iter().filter(|a| a.awareness.is_aware()).count(), 1 + t as usize);
        }
        let acc: Vec<f64> = pop.avatars.iter().map(|a| a.awareness.accuracy.unwrap()).collect();
        let hand = [1.0, 0.8, 0.8 * 0.8, 0.8 * 0.8 * 0.8];
        for (a, h) in acc.iter().zip(hand) {
            assert!((a - h).abs() < 1e-12);
        }
        assert!((acc[3] - 0.512).abs() < 1e-12);
    }

    #[test]
    fn own_visible_symptoms_make_an_avatar_aware() {
        let w = line_world(&["a"]);
        let mut def = disease(&[]);
        def.stages[0].symptoms_visible = true;
        let mut pop = population(vec![infected(0, 0)]);
        let ch = spread_information(&w, &mut pop, &def, &Activity::idle(1), &quiet_params(0.0), None, &mut seeded(1), 1);
        assert_eq!(ch.len(), 1);
        assert_eq!(pop.avatars[0].awareness.kind, AwarenessKind::RumorAware);
        assert_eq!(pop.avatars[0].believed_epicenter, Some(ZoneId(0)));
    }

    #[test]
    fn warning_informs_exactly_the_audience() {
        let mut pop = population((0..10).map(|i| avatar(i, i % 2)).collect());
        pop.avatars[4].awareness = AwarenessState::rumor(0.3, 0);
        let ch = inform(&mut pop, Some(&[ZoneId(0)]), Some(ZoneId(1)), 5);
        assert_eq!(ch.len(), 5);
        for a in &pop.avatars {
            let in_zone = a.zone == ZoneId(0);
            assert_eq!(a.awareness.kind == AwarenessKind::Informed, in_zone);
            if in_zone {
                assert_eq!(a.awareness.accuracy, Some(1.0));
                assert_eq!(a.believed_epicenter, Some(ZoneId(1)));
            }
        }
    }

    #[test]
    fn informed_is_absorbing() {
        let w = line_world(&["a"]);
        let mut pop = population((0..3).map(|i| avatar(i, 0)).collect());
        inform(&mut pop, None, None, 1);
        let def = disease(&[]);
        let act = Activity::all_chatting(3);
        for t in 2..20 {
            spread_information(&w, &mut pop, &def, &act, &InformationParams::default(), None, &mut seeded(t), t);
        }
        assert!(pop.avatars.iter().all(|a| a.awareness == AwarenessState::informed(1)));
    }

    #[test]
    fn epicenter_is_the_busiest_visible_zone_lowest_id_on_ties() {
        assert_eq!(epicenter_from_counts(&[0, 0, 0]), None);
        assert_eq!(epicenter_from_counts(&[1, 3, 3]), Some(ZoneId(1)));
        assert_eq!(epicenter_from_counts(&[0, 0, 2]), Some(ZoneId(2)));
    }

    #[test]
    fn masked_avatars_are_invisible() {
        let w = line_world(&["a", "b"]);
        let mut def = disease(&[]);
        def.stages[0].symptoms_visible = true;
        let mut pop = population(vec![infected(0, 0), infected(1, 1), infected(2, 1)]);
        assert_eq!(epicenter_estimate(&w, &pop, &def), Some(ZoneId(1)));
        pop.avatars[1].masked = true;
        pop.avatars[2].masked = true;
        assert_eq!(epicenter_estimate(&w, &pop, &def), Some(ZoneId(0)));
    }

    #[test]
    fn zero_mobility_stage_never_moves() {
        let w = line_world(&["a", "b", "c"]);
        let mut def = disease(&[]);
        def.stages[0].mobility_modifier = 0.0;
        let mut a = infected(0, 1);
        a.behavior.move_probability_per_tick = 1.0;
        let mut rng = seeded(4);
        for _ in 0..1000 {
            assert_eq!(decide_move(&a, &w, &def, &mut rng), MoveDecision::Stay);
        }
    }

    #[test]
    fn withdrawal_is_drawn_before_movement() {
        let w = line_world(&["a", "b"]);
        let mut def = disease(&[]);
        def.stages[0].withdrawal_probability_per_tick = 1.0;
        let mut a = infected(0, 0);
        a.behavior.move_probability_per_tick = 1.0;
        assert_eq!(decide_move(&a, &w, &def, &mut seeded(1)), MoveDecision::Withdrawn);
        def.stages[0].withdrawal_window_ticks = Some(2);
        a.infection.as_mut().unwrap().ticks_in_stage = 2;
        assert_eq!(decide_move(&a, &w, &def, &mut seeded(1)), MoveDecision::MoveTo(ZoneId(1)));
    }

    #[test]
    fn curious_informed_avatar_descends_to_the_epicenter() {
        let w = line_world(&["a", "b", "c", "d", "e"]);
        let def = disease(&[]);
        let mut a = avatar(0, 0);
        a.behavior = BehaviorProfile { curiosity: 1.0, risk_aversion: 0.0, move_probability_per_tick: 0.5 };
        a.awareness = AwarenessState::informed(0);
        a.believed_epicenter = Some(ZoneId(3));
        let mut rng = seeded(8);
        let mut d = w.hop_distance(a.zone, ZoneId(3)).unwrap();
        assert_eq!(d, 3);
        for _ in 0..200 {
            if let MoveDecision::MoveTo(z) = decide_move(&a, &w, &def, &mut rng) {
                let nd = w.hop_distance(z, ZoneId(3)).unwrap();
                assert_eq!(nd + 1, d, "every move is one hop closer");
                a.zone = z;
                d = nd;
            }
        }
        assert_eq!(a.zone, ZoneId(3));
    }

    #[test]
    fn risk_averse_aware_avatar_moves_away() {
        let w = line_world(&["a", "b", "c"]);
        let def = disease(&[]);
        let mut a = avatar(0, 1);
        a.behavior = BehaviorProfile { curiosity: 0.0, risk_aversion: 1.0, move_probability_per_tick: 1.0 };
        a.awareness = AwarenessState::rumor(0.5, 0);
        a.believed_epicenter = Some(ZoneId(0));
        assert_eq!(decide_move(&a, &w, &def, &mut seeded(1)), MoveDecision::MoveTo(ZoneId(2)));
    }

    #[test]
    fn blocked_movers_overflow_next_to_the_restriction() {
        // a - b - c - d with c restricted. A curious mover in b heading for c
        // is held in b, the open neighbor of c closest to where it started.
        let mut w = line_world(&["a", "b", "c", "d"]);
        w.set_restricted(ZoneId(2), true);
        let def = disease(&[]);
        let mut a = avatar(0, 1);
        a.behavior = BehaviorProfile { curiosity: 1.0, risk_aversion: 0.0, move_probability_per_tick: 1.0 };
        a.awareness = AwarenessState::informed(0);
        a.believed_epicenter = Some(ZoneId(2));
        assert_eq!(decide_move(&a, &w, &def, &mut seeded(1)), MoveDecision::Stay);
        // From a, the pick is b which is open.
        a.zone = ZoneId(0);
        assert_eq!(decide_move(&a, &w, &def, &mut seeded(1)), MoveDecision::MoveTo(ZoneId(1)));
    }

    #[test]
    fn unaware_movers_pick_neighbors_uniformly() {
        let w = line_world(&["a", "b", "c"]);
        let def = disease(&[]);
        let mut a = avatar(0, 1);
        a.behavior.move_probability_per_tick = 1.0;
        let mut rng = seeded(6);
        let n = 20_000;
        let left = (0..n).filter(|_| decide_move(&a, &w, &def, &mut rng) == MoveDecision::MoveTo(ZoneId(0))).count();
        assert!((left as f64 / n as f64 - 0.5).abs() < 0.02);
    }
}
