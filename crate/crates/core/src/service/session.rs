//! One simulation loop per session, on its own thread. Protocol handlers talk
//! to it only through a bounded command queue; the latest snapshot is
//! published behind an `Arc` swap so readers never wait on the loop.

use std::sync::mpsc::{sync_channel, Receiver, RecvTimeoutError, SyncSender, TrySendError};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc::UnboundedSender, oneshot};

use crate::behavior::AwarenessKind;
use crate::error::{Error, Result};
use crate::events::{EventRecord, FeedMessage};
use crate::intervention::Intervention;
use crate::metrics::TickSnapshot;
use crate::scenario::ScenarioConfig;
use crate::sim::{RunOptions, Simulation};

pub const COMMAND_QUEUE_CAPACITY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RunMode {
    Paused,
    Stepping,
    Playing { ticks_per_second: f64 },
}

/// What readers see without going through the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub id: u64,
    pub scenario: String,
    pub seed: u64,
    pub tick: u64,
    pub finished: bool,
    #[serde(flatten)]
    pub mode: RunMode,
    pub snapshot: TickSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvatarDetail {
    pub id: u32,
    pub zone: String,
    pub home_zone: String,
    pub vocation: String,
    pub level: u32,
    pub heal_capability: f64,
    pub alive: bool,
    pub awareness: AwarenessKind,
    pub stage: Option<String>,
    pub immune: bool,
    pub masked: bool,
    pub pets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvatarPage {
    pub total: usize,
    pub offset: usize,
    pub avatars: Vec<AvatarDetail>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub tick: u64,
    #[serde(flatten)]
    pub mode: RunMode,
    pub finished: bool,
    /// Tick an accepted intervention will apply at.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub applies_at: Option<u64>,
}

pub(crate) type Reply<T> = oneshot::Sender<Result<T>>;

pub(crate) enum Command {
    Step(u64, Reply<Ack>),
    Play(f64, Reply<Ack>),
    Pause(Reply<Ack>),
    Intervene(Intervention, Reply<Ack>),
    Avatars { zone: Option<String>, offset: usize, limit: usize, reply: Reply<AvatarPage> },
    Events(Reply<Vec<EventRecord>>),
    Subscribe(UnboundedSender<Arc<str>>, Reply<()>),
}

/// Cheap to clone; dropping the last clone stops the loop.
#[derive(Clone)]
pub struct SessionHandle {
    pub id: u64,
    commands: SyncSender<Command>,
    status: Arc<RwLock<Arc<SessionStatus>>>,
}

impl SessionHandle {
    /// Builds the simulation and starts its loop, paused at tick 0.
    pub fn spawn(id: u64, config: ScenarioConfig, seed: u64) -> Result<Self> {
        let sim = Simulation::new(config, seed, RunOptions { record_events: true, stop_after_index_cases: false })?;
        let status = Arc::new(RwLock::new(Arc::new(status_of(id, &sim, RunMode::Paused))));
        let (tx, rx) = sync_channel(COMMAND_QUEUE_CAPACITY);
        // Setup events are summarized by the tick-0 snapshot every subscriber receives first.
        let published_events = sim.events().len();
        let mut lp = Loop { id, sim, mode: RunMode::Paused, status: status.clone(), subscribers: Vec::new(), published_events };
        // Detached: the loop exits once every command sender is gone.
        std::thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || lp.run(rx))
            .map_err(|e| Error::Invalid(format!("cannot start session thread: {e}")))?;
        Ok(SessionHandle { id, commands: tx, status })
    }

    pub fn status(&self) -> Arc<SessionStatus> {
        self.status.read().expect("status lock").clone()
    }

    fn send(&self, c: Command) -> Result<()> {
        self.commands.try_send(c).map_err(|e| match e {
            TrySendError::Full(_) => Error::Rejected("command queue is full".into()),
            TrySendError::Disconnected(_) => Error::Invalid("session loop has stopped".into()),
        })
    }

    async fn ask<T>(&self, make: impl FnOnce(Reply<T>) -> Command) -> Result<T> {
        let (tx, rx) = oneshot::channel();
        self.send(make(tx))?;
        rx.await.map_err(|_| Error::Invalid("session loop has stopped".into()))?
    }

    pub async fn step(&self, n: u64) -> Result<Ack> {
        self.ask(|r| Command::Step(n, r)).await
    }

    pub async fn play(&self, ticks_per_second: f64) -> Result<Ack> {
        self.ask(|r| Command::Play(ticks_per_second, r)).await
    }

    pub async fn pause(&self) -> Result<Ack> {
        self.ask(Command::Pause).await
    }

    pub async fn intervene(&self, iv: Intervention) -> Result<Ack> {
        self.ask(|r| Command::Intervene(iv, r)).await
    }

    pub async fn avatars(&self, zone: Option<String>, offset: usize, limit: usize) -> Result<AvatarPage> {
        self.ask(|reply| Command::Avatars { zone, offset, limit, reply }).await
    }

    pub async fn events(&self) -> Result<Vec<EventRecord>> {
        self.ask(Command::Events).await
    }

    /// Registers a feed subscriber. The current snapshot is sent first.
    pub async fn subscribe(&self, tx: UnboundedSender<Arc<str>>) -> Result<()> {
        self.ask(|r| Command::Subscribe(tx, r)).await
    }
}

fn status_of(id: u64, sim: &Simulation, mode: RunMode) -> SessionStatus {
    SessionStatus {
        id,
        scenario: sim.config().name.clone(),
        seed: sim.seed(),
        tick: sim.tick(),
        finished: sim.is_finished(),
        mode,
        snapshot: sim.latest_snapshot().clone(),
    }
}

fn encode(m: &FeedMessage) -> Arc<str> {
    serde_json::to_string(m).expect("feed message serializes").into()
}

struct Loop {
    id: u64,
    sim: Simulation,
    mode: RunMode,
    status: Arc<RwLock<Arc<SessionStatus>>>,
    subscribers: Vec<UnboundedSender<Arc<str>>>,
    published_events: usize,
}

impl Loop {
    fn run(&mut self, rx: Receiver<Command>) {
        let mut next_tick_at = Instant::now();
        loop {
            let cmd = match self.mode {
                RunMode::Playing { ticks_per_second } => {
                    let wait = next_tick_at.saturating_duration_since(Instant::now());
                    match rx.recv_timeout(wait) {
                        Ok(c) => Some(c),
                        Err(RecvTimeoutError::Timeout) => {
                            self.advance();
                            next_tick_at = Instant::now() + Duration::from_secs_f64(1.0 / ticks_per_second);
                            if self.sim.is_finished() {
                                self.mode = RunMode::Paused;
                                self.publish_status();
                            }
                            None
                        }
                        Err(RecvTimeoutError::Disconnected) => return,
                    }
                }
                _ => match rx.recv() {
                    Ok(c) => Some(c),
                    Err(_) => return,
                },
            };
            if let Some(c) = cmd {
                if let Command::Play(..) = c {
                    next_tick_at = Instant::now();
                }
                self.handle(c);
            }
        }
    }

    fn ack(&self, applies_at: Option<u64>) -> Ack {
        Ack { tick: self.sim.tick(), mode: self.mode, finished: self.sim.is_finished(), applies_at }
    }

    fn handle(&mut self, c: Command) {
        match c {
            Command::Step(n, reply) => {
                self.mode = RunMode::Stepping;
                for _ in 0..n {
                    if !self.advance() {
                        break;
                    }
                }
                self.mode = RunMode::Paused;
                self.publish_status();
                let _ = reply.send(Ok(self.ack(None)));
            }
            Command::Play(rate, reply) => {
                if !(rate > 0.0) || !rate.is_finite() {
                    let _ = reply.send(Err(Error::Rejected(format!("ticks_per_second must be positive, got {rate}"))));
                    return;
                }
                self.mode = RunMode::Playing { ticks_per_second: rate };
                self.publish_status();
                let _ = reply.send(Ok(self.ack(None)));
            }
            Command::Pause(reply) => {
                self.mode = RunMode::Paused;
                self.publish_status();
                let _ = reply.send(Ok(self.ack(None)));
            }
            Command::Intervene(iv, reply) => {
                let r = self.sim.submit(iv).map(|at| self.ack(Some(at)));
                self.publish_status();
                let _ = reply.send(r);
            }
            Command::Avatars { zone, offset, limit, reply } => {
                let _ = reply.send(self.avatars(zone, offset, limit));
            }
            Command::Events(reply) => {
                let _ = reply.send(Ok(self.sim.events().to_vec()));
            }
            Command::Subscribe(tx, reply) => {
                let msg = encode(&FeedMessage::Snapshot(self.sim.latest_snapshot().clone()));
                if tx.send(msg).is_ok() {
                    self.subscribers.push(tx);
                }
                let _ = reply.send(Ok(()));
            }
        }
    }

    /// One tick plus publication. Returns false when the run is finished.
    fn advance(&mut self) -> bool {
        if !self.sim.step() {
            return false;
        }
        let mut out: Vec<Arc<str>> = Vec::new();
        for e in &self.sim.events()[self.published_events..] {
            if e.event.is_notable() {
                out.push(encode(&FeedMessage::Event(e.clone())));
            }
        }
        self.published_events = self.sim.events().len();
        out.push(encode(&FeedMessage::Snapshot(self.sim.latest_snapshot().clone())));
        self.subscribers.retain(|s| out.iter().all(|m| s.send(m.clone()).is_ok()));
        self.publish_status();
        true
    }

    fn publish_status(&self) {
        let s = Arc::new(status_of(self.id, &self.sim, self.mode));
        *self.status.write().expect("status lock") = s;
    }

    fn avatars(&self, zone: Option<String>, offset: usize, limit: usize) -> Result<AvatarPage> {
        let world = self.sim.world();
        let zid = match &zone {
            Some(name) => Some(world.zone_id(name).ok_or_else(|| Error::Rejected(format!("unknown zone `{name}`")))?),
            None => None,
        };
        let def = self.sim.disease();
        let matching: Vec<_> = self.sim.population().avatars.iter().filter(|a| zid.is_none_or(|z| a.zone == z)).collect();
        let avatars = matching
            .iter()
            .skip(offset)
            .take(limit)
            .map(|a| AvatarDetail {
                id: a.id.0,
                zone: world.name(a.zone).to_string(),
                home_zone: world.name(a.home_zone).to_string(),
                vocation: a.vocation.clone(),
                level: a.level,
                heal_capability: a.heal_capability,
                alive: a.alive,
                awareness: a.awareness.kind,
                stage: a.infection.as_ref().map(|i| def.stage(i).name.clone()),
                immune: a.immune,
                masked: a.masked,
                pets: a.pets.len(),
            })
            .collect();
        Ok(AvatarPage { total: matching.len(), offset, avatars })
    }
}
