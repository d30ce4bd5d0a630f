//! The NDJSON event log, snapshot reconstruction from it, and the operator feed.
//!
//! The log is complete enough that [`replay_snapshots`] rebuilds every
//! [`TickSnapshot`] of a run without touching the simulation.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::behavior::AwarenessKind;
use crate::error::{Error, Result};
use crate::intervention::Intervention;
use crate::metrics::{build_snapshot, AvatarView, HealthClass, TickSnapshot};
use crate::population::{AvatarId, PetId};
use crate::transmission::{ChannelKind, InfectionRecord};
use crate::world::ZoneId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub tick: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    RunStart {
        scenario: String,
        seed: u64,
        variant: String,
        zones: Vec<String>,
        /// Zone of every avatar after placement, by avatar id.
        avatar_zones: Vec<ZoneId>,
    },
    /// Marks the start of an executed tick.
    Tick,
    InterventionApplied {
        intervention: Intervention,
    },
    Awareness {
        avatar: AvatarId,
        kind: AwarenessKind,
        accuracy: Option<f64>,
    },
    Move {
        avatar: AvatarId,
        from: ZoneId,
        to: ZoneId,
    },
    PetDismiss {
        pet: PetId,
        owner: AvatarId,
        zone: ZoneId,
        carrying: bool,
    },
    PetResummon {
        pet: PetId,
        owner: AvatarId,
        zone: ZoneId,
        shedding: bool,
    },
    PetAcquire {
        pet: PetId,
        owner: AvatarId,
        source: AvatarId,
        case: usize,
    },
    /// Contacts enumerated this tick, by channel.
    Contacts {
        counts: BTreeMap<ChannelKind, u64>,
    },
    Infection {
        record: InfectionRecord,
        /// Whether the first stage shows symptoms.
        visible: bool,
    },
    FirstCaseInZone {
        zone: ZoneId,
        name: String,
    },
    Stage {
        avatar: AvatarId,
        stage: usize,
        visible: bool,
    },
    Masked {
        avatar: AvatarId,
    },
    Cured {
        avatar: AvatarId,
        case: usize,
        immune: bool,
        temporary: bool,
    },
    Recovered {
        avatar: AvatarId,
        case: usize,
        immune: bool,
    },
    Died {
        avatar: AvatarId,
        case: usize,
    },
    ImmunityLost {
        avatar: AvatarId,
    },
    Mutation {
        variant: String,
        beta_by_channel: BTreeMap<ChannelKind, f64>,
    },
}

impl Event {
    /// Events the operator feed forwards besides snapshots.
    pub fn is_notable(&self) -> bool {
        matches!(
            self,
            Event::InterventionApplied { .. } | Event::FirstCaseInZone { .. } | Event::Died { .. } | Event::Mutation { .. }
        )
    }
}

pub fn write_ndjson<W: Write>(mut w: W, events: &[EventRecord]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_ndjson(events: &[EventRecord]) -> String {
    let mut buf = Vec::new();
    write_ndjson(&mut buf, events).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn read_ndjson<R: BufRead>(r: R) -> Result<Vec<EventRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|source| Error::Io { path: "<event log>".into(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            column: e.column(),
            path: String::new(),
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Shadow {
    zone: ZoneId,
    alive: bool,
    infected: bool,
    visible: bool,
    masked: bool,
    immune: bool,
    ever: bool,
    awareness: AwarenessKind,
}

impl Shadow {
    fn view(&self) -> AvatarView {
        let class = if !self.alive {
            HealthClass::Dead
        } else if self.infected {
            HealthClass::Infected
        } else if self.immune {
            HealthClass::Immune
        } else if self.ever {
            HealthClass::Recovered
        } else {
            HealthClass::Susceptible
        };
        AvatarView {
            zone: self.zone,
            class,
            visible: self.alive && self.infected && self.visible && !self.masked,
            awareness: self.awareness,
        }
    }

    fn end_episode(&mut self) {
        self.infected = false;
        self.visible = false;
        self.masked = false;
    }
}

struct Replay {
    names: Vec<String>,
    restricted: Vec<bool>,
    avatars: Vec<Shadow>,
    channels: BTreeMap<ChannelKind, u64>,
    index_cases: u64,
    variant: String,
}

impl Replay {
    fn apply(&mut self, e: &Event) {
        match e {
            Event::RunStart { .. } | Event::Tick | Event::Contacts { .. } | Event::FirstCaseInZone { .. } => {}
            Event::PetDismiss { .. } | Event::PetResummon { .. } | Event::PetAcquire { .. } => {}
            Event::InterventionApplied { intervention } => {
                let flag = match intervention {
                    Intervention::AreaRestriction { .. } => true,
                    Intervention::LiftRestriction { .. } => false,
                    _ => return,
                };
                for z in intervention.zone_names() {
                    if let Some(i) = self.names.iter().position(|n| n == z) {
                        self.restricted[i] = flag;
                    }
                }
            }
            Event::Awareness { avatar, kind, .. } => self.avatars[avatar.index()].awareness = *kind,
            Event::Move { avatar, to, .. } => self.avatars[avatar.index()].zone = *to,
            Event::Infection { record, visible } => {
                let a = &mut self.avatars[record.infectee.index()];
                a.infected = true;
                a.ever = true;
                a.visible = *visible;
                a.masked = false;
                match record.channel {
                    Some(ch) => *self.channels.entry(ch).or_insert(0) += 1,
                    None => self.index_cases += 1,
                }
            }
            Event::Stage { avatar, visible, .. } => self.avatars[avatar.index()].visible = *visible,
            Event::Masked { avatar } => self.avatars[avatar.index()].masked = true,
            Event::Cured { avatar, immune, .. } | Event::Recovered { avatar, immune, .. } => {
                let a = &mut self.avatars[avatar.index()];
                a.end_episode();
                a.immune = *immune;
            }
            Event::Died { avatar, .. } => {
                let a = &mut self.avatars[avatar.index()];
                a.end_episode();
                a.alive = false;
            }
            Event::ImmunityLost { avatar } => self.avatars[avatar.index()].immune = false,
            Event::Mutation { variant, .. } => self.variant = variant.clone(),
        }
    }

    fn snapshot(&self, tick: u64) -> TickSnapshot {
        build_snapshot(
            tick,
            &self.variant,
            &self.names,
            &self.restricted,
            self.avatars.iter().map(Shadow::view),
            &self.channels,
            self.index_cases,
        )
    }
}

/// Rebuilds the snapshot sequence of a run from its event log alone.
pub fn replay_snapshots(events: &[EventRecord]) -> Result<Vec<TickSnapshot>> {
    let Some(first) = events.first() else {
        return Ok(Vec::new());
    };
    let Event::RunStart { variant, zones, avatar_zones, .. } = &first.event else {
        return Err(Error::Invalid("event log does not begin with run_start".into()));
    };
    let mut replay = Replay {
        restricted: vec![false; zones.len()],
        names: zones.clone(),
        avatars: avatar_zones
            .iter()
            .map(|&zone| Shadow {
                zone,
                alive: true,
                infected: false,
                visible: false,
                masked: false,
                immune: false,
                ever: false,
                awareness: AwarenessKind::Unaware,
            })
            .collect(),
        channels: BTreeMap::new(),
        index_cases: 0,
        variant: variant.clone(),
    };
    let mut out = Vec::new();
    let mut current = first.tick;
    for rec in &events[1..] {
        if rec.tick != current {
            out.push(replay.snapshot(current));
            current = rec.tick;
        }
        replay.apply(&rec.event);
    }
    out.push(replay.snapshot(current));
    Ok(out)
}

/// One message on a session's stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum FeedMessage {
    Snapshot(TickSnapshot),
    Event(EventRecord),
}

/// The feed a session emits for a given log: per tick, the notable events in
/// log order followed by that tick's snapshot.
pub fn feed_from_log(events: &[EventRecord]) -> Result<Vec<FeedMessage>> {
    let snapshots = replay_snapshots(events)?;
    let mut by_tick: BTreeMap<u64, Vec<&EventRecord>> = BTreeMap::new();
    for e in events.iter().filter(|e| e.event.is_notable()) {
        by_tick.entry(e.tick).or_default().push(e);
    }
    let mut out = Vec::new();
    for s in snapshots {
        for e in by_tick.remove(&s.tick).unwrap_or_default() {
            out.push(FeedMessage::Event(e.clone()));
        }
        out.push(FeedMessage::Snapshot(s));
    }
    Ok(out)
}
