//! The deterministic session engine.
//!
//! A [`Session`] owns the simulation, the verse game and the gift economy.
//! It consumes [`ChatEvent`]s in `seq` order at tick boundaries and advances
//! one tick per [`Session::step`]. After every tick it hashes its complete
//! state; equal seeds, configs and event logs give equal hash streams, which
//! is what [`replay`] checks.

mod replay;

use std::io::{self, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use replay::{
    read_log, replay, EventRecord, LogHeader, LogRecord, ReplayError, ReplayLog, ReplayOutcome,
    ReplayWriter,
};

use crate::chatparse::{parse_comment, ChatEvent, Command, CommandAliases, EventKind, ViewerId};
use crate::economy::{Economy, EconomyAction, EconomySettings};
use crate::entitysim::{Effect, Entity, FlagEntry, SimState, DEFAULT_STORY_MAX_CHARS};
use crate::protocol::{EntityView, GameView, Notice, Snapshot, PROTOCOL_VERSION};
use crate::scenegeo::{project, SceneConfig, WorldPoint};
use crate::versegame::{Corpus, Finale, GameSettings, GameState, Phase, Rejected, Topic};

/// A verse round opened automatically `start_s` seconds into the session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledRound {
    pub start_s: f64,
    pub topic: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSettings {
    pub tick_rate: u32,
    pub game: GameSettings,
    pub economy: EconomySettings,
    pub story_max_chars: usize,
    pub schedule: Vec<ScheduledRound>,
}

impl Default for SessionSettings {
    fn default() -> Self {
        SessionSettings {
            tick_rate: crate::entitysim::DEFAULT_TICK_RATE,
            game: GameSettings::default(),
            economy: EconomySettings::default(),
            story_max_chars: DEFAULT_STORY_MAX_CHARS,
            // a flower round one minute in, then the local round
            schedule: vec![
                ScheduledRound {
                    start_s: 60.0,
                    topic: "花".into(),
                },
                ScheduledRound {
                    start_s: 480.0,
                    topic: "杭州,江南".into(),
                },
            ],
        }
    }
}

/// Immutable inputs shared by a live session and its replays.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub scene: Arc<SceneConfig>,
    pub corpus: Arc<Corpus>,
    pub aliases: Arc<CommandAliases>,
    pub settings: SessionSettings,
}

impl SessionConfig {
    /// Demo scene, bundled corpus and alias table, default settings.
    pub fn demo() -> Self {
        SessionConfig {
            scene: Arc::new(SceneConfig::demo()),
            corpus: Arc::new(Corpus::sample()),
            aliases: Arc::new(CommandAliases::default()),
            settings: SessionSettings::default(),
        }
    }

    pub fn with_settings(mut self, settings: SessionSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn scene_digest(&self) -> String {
        sha256_hex(self.scene.canonical_json().as_bytes())
    }

    pub fn corpus_digest(&self) -> String {
        sha256_hex(self.corpus.canonical_text().as_bytes())
    }

    pub fn aliases_digest(&self) -> String {
        let text: String = self
            .aliases
            .aliases()
            .iter()
            .map(|a| format!("{}={}\n", a.kind.key(), a.text))
            .collect();
        sha256_hex(text.as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("event seq {got} does not follow {last}")]
    OutOfOrder { last: u64, got: u64 },
}

/// What one tick produced.
#[derive(Debug, Clone)]
pub struct TickReport {
    pub tick: u64,
    pub effects: Vec<Effect>,
    pub notices: Vec<Notice>,
    /// sha256 of the canonical post-tick state.
    pub hash: [u8; 32],
}

impl TickReport {
    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash)
    }
}

struct HashWriter(Sha256);

impl Write for HashWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

#[derive(Serialize)]
struct HashedState<'a> {
    sim: &'a SimState,
    game: &'a GameState,
    economy: &'a Economy,
    next_round: usize,
    last_seq: Option<u64>,
    notices: &'a [Notice],
}

pub struct Session {
    config: SessionConfig,
    seed: u64,
    sim: SimState,
    game: GameState,
    economy: Economy,
    next_round: usize,
    last_seq: Option<u64>,
    notices: Vec<Notice>,
    /// Notices of the most recent tick, kept for the snapshot.
    last_notices: Vec<Notice>,
    chain: [u8; 32],
    last_hash: [u8; 32],
    finales: Vec<(u64, Finale)>,
}

impl Session {
    pub fn new(config: SessionConfig, seed: u64) -> Self {
        let settings = &config.settings;
        let sim = SimState::new(seed, settings.tick_rate)
            .with_story_max_chars(settings.story_max_chars);
        let game = GameState::new(settings.game.threshold);
        let economy = Economy::new(settings.economy, settings.tick_rate);
        let mut session = Session {
            config,
            seed,
            sim,
            game,
            economy,
            next_round: 0,
            last_seq: None,
            notices: Vec::new(),
            last_notices: Vec::new(),
            chain: [0; 32],
            last_hash: [0; 32],
            finales: Vec::new(),
        };
        session.advance_schedule();
        session.last_hash = session.compute_hash(&[]);
        session
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn scene(&self) -> &SceneConfig {
        &self.config.scene
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tick(&self) -> u64 {
        self.sim.tick()
    }

    pub fn tick_rate(&self) -> u32 {
        self.sim.tick_rate()
    }

    pub fn sim(&self) -> &SimState {
        &self.sim
    }

    pub fn game(&self) -> &GameState {
        &self.game
    }

    pub fn economy(&self) -> &Economy {
        &self.economy
    }

    /// Finished verse rounds with the tick they ended on.
    pub fn finales(&self) -> &[(u64, Finale)] {
        &self.finales
    }

    pub fn last_seq(&self) -> Option<u64> {
        self.last_seq
    }

    /// Hash of the state after the most recent tick.
    pub fn state_hash(&self) -> [u8; 32] {
        self.last_hash
    }

    /// Running hash over every per-tick hash so far.
    pub fn chain_hash(&self) -> [u8; 32] {
        self.chain
    }

    /// Applies one event at the current tick boundary.
    pub fn apply(&mut self, event: &ChatEvent) -> Result<(), SessionError> {
        if let Some(last) = self.last_seq {
            if event.seq <= last {
                return Err(SessionError::OutOfOrder {
                    last,
                    got: event.seq,
                });
            }
        }
        self.last_seq = Some(event.seq);
        let viewer = &event.viewer_id;
        let name = event.display_name.as_str();
        self.sim.touch_viewer(viewer, name, event.seq);
        let now = self.sim.tick();
        match &event.kind {
            EventKind::Comment { text } => {
                let command = parse_comment(text, self.game.is_running(), &self.config.aliases);
                self.dispatch(viewer, name, command, now);
            }
            EventKind::Gift { amount } => match self.economy.on_gift(viewer, name, *amount, now) {
                Ok(actions) => self.run_actions(actions),
                Err(e) => self.notices.push(Notice::to(viewer, e.to_string())),
            },
        }
        Ok(())
    }

    fn dispatch(&mut self, viewer: &ViewerId, name: &str, command: Command, now: u64) {
        let scene = Arc::clone(&self.config.scene);
        let outcome = match command {
            Command::ReleaseLotus => self.sim.spawn_lotus(&scene, viewer).map(drop),
            Command::DashLotus => self.sim.dash_lotus(&scene, viewer, None).map(drop),
            Command::HitLotus(target) => self.sim.dash_lotus(&scene, viewer, Some(&target)).map(drop),
            Command::ShineLotus => self.sim.shine_lotus(&scene, viewer).map(drop),
            Command::FeedFish => {
                self.sim.feed_fish(&scene, name);
                Ok(())
            }
            Command::Story(text) => {
                let actions = self.economy.on_story(viewer, name, &text, now);
                self.run_actions(actions);
                Ok(())
            }
            Command::Verse(text) => {
                let corpus = Arc::clone(&self.config.corpus);
                match self.game.submit_verse(&corpus, viewer, name, &text, now) {
                    Ok(_) => {
                        let count = self.game.accepted_count();
                        self.notices.push(Notice::all(format!(
                            "{name} recited a verse ({count}/{})",
                            self.game.threshold() + 1
                        )));
                    }
                    Err(Rejected::Duplicate) => {
                        self.notices.push(Notice::to(viewer, Rejected::Duplicate.to_string()));
                    }
                    // anything else is ordinary chat
                    Err(_) => {}
                }
                Ok(())
            }
            Command::Plain(_) => Ok(()),
        };
        if let Err(rejection) = outcome {
            self.notices.push(Notice::to(viewer, rejection.to_string()));
        }
    }

    fn run_actions(&mut self, actions: Vec<EconomyAction>) {
        let scene = Arc::clone(&self.config.scene);
        for action in actions {
            match action {
                EconomyAction::SpawnFirework { name } => {
                    self.sim.spawn_firework(&scene, &name);
                }
                EconomyAction::SpawnUmbrella { name, story } => {
                    self.sim.spawn_umbrella(&scene, &name, &story);
                }
                EconomyAction::Notice { viewer, text } => {
                    self.notices.push(Notice::to(&viewer, text));
                }
            }
        }
    }

    fn advance_schedule(&mut self) {
        if self.game.is_running() {
            return;
        }
        let Some(round) = self.config.settings.schedule.get(self.next_round) else {
            return;
        };
        let now = self.sim.tick();
        if now < self.sim.ticks_for(round.start_s) {
            return;
        }
        let topic = Topic::parse(&round.topic);
        let duration = self.sim.ticks_for(self.config.settings.game.duration_s);
        self.next_round += 1;
        if self.game.start_game(topic.clone(), duration, now).is_ok() {
            self.notices.push(Notice::all(format!(
                "verse round: recite lines containing {}",
                topic.tokens.join(" or ")
            )));
        }
    }

    /// Opens a verse round now, outside the schedule. Returns false if one
    /// is already running. Live servers only use the schedule, so replays
    /// stay exact; this is for scripted scenarios.
    pub fn start_round(&mut self, topic: Topic) -> bool {
        let duration = self.sim.ticks_for(self.config.settings.game.duration_s);
        self.game.start_game(topic, duration, self.sim.tick()).is_ok()
    }

    /// Advances one tick.
    pub fn step(&mut self) -> TickReport {
        let scene = Arc::clone(&self.config.scene);
        let effects = self.sim.step(&scene);
        let now = self.sim.tick();
        if let Some(finale) = self.game.finish_game(now) {
            let flag = finale
                .top3
                .iter()
                .map(|e| FlagEntry {
                    name: e.name.clone(),
                    score: e.score,
                })
                .collect();
            self.sim.run_boat(&scene, flag);
            let text = match finale.phase {
                Phase::Won => format!("{} verses! the boat sets out", finale.accepted),
                _ => format!("time is up with {} verses; the boat sets out", finale.accepted),
            };
            self.notices.push(Notice::all(text));
            self.finales.push((now, finale));
        }
        self.advance_schedule();
        let notices = std::mem::take(&mut self.notices);
        let hash = self.compute_hash(&notices);
        let mut chain = Sha256::new();
        chain.update(self.chain);
        chain.update(hash);
        self.chain = chain.finalize().into();
        self.last_hash = hash;
        self.last_notices = notices.clone();
        TickReport {
            tick: now,
            effects,
            notices,
            hash,
        }
    }

    fn compute_hash(&self, notices: &[Notice]) -> [u8; 32] {
        let state = HashedState {
            sim: &self.sim,
            game: &self.game,
            economy: &self.economy,
            next_round: self.next_round,
            last_seq: self.last_seq,
            notices,
        };
        let mut w = HashWriter(Sha256::new());
        serde_json::to_writer(&mut w, &state).expect("session state serializes");
        w.0.finalize().into()
    }

    /// The client view of the current tick.
    pub fn snapshot(&self, seq: u64, session_id: &str) -> Snapshot {
        let tick = self.sim.tick();
        let camera = self.config.scene.camera();
        let on_water = |x: f64, y: f64| {
            let p = WorldPoint::new(x, y, 0.0);
            (project(camera, p), Some([x, y]), Some(camera.depth(p)))
        };
        let entities = self
            .sim
            .entities()
            .iter()
            .map(|(&id, entity)| {
                let mut view = EntityView {
                    id,
                    kind: entity.kind_name().to_string(),
                    owner: None,
                    pos: None,
                    world: None,
                    depth: None,
                    phase: entity.lifetime().map(|l| l.phase(tick)),
                    shining: false,
                    dashing: false,
                    color: None,
                    text: None,
                    flag: None,
                };
                match entity {
                    Entity::Lotus(l) => {
                        (view.pos, view.world, view.depth) = on_water(l.position.x, l.position.y);
                        view.owner = Some(self.sim.display_name(&l.owner).to_string());
                        view.shining = l.is_shining(tick);
                        view.dashing = matches!(l.mode, crate::entitysim::LotusMode::Dashing { .. });
                        view.color = Some(l.color);
                    }
                    Entity::Fish(f) => {
                        (view.pos, view.world, view.depth) = on_water(f.position.x, f.position.y);
                        view.owner = Some(f.trigger_name.clone());
                    }
                    Entity::Firework(f) => {
                        view.pos = Some(f.position);
                        view.owner = Some(f.trigger_name.clone());
                    }
                    Entity::Umbrella(u) => {
                        view.pos = Some(u.position(tick));
                        view.owner = Some(u.trigger_name.clone());
                        view.text = Some(u.story.clone());
                    }
                    Entity::Boat(b) => {
                        let p = b.position(tick);
                        (view.pos, view.world, view.depth) = on_water(p.x, p.y);
                        view.flag = Some(
                            b.top3
                                .iter()
                                .map(|f| crate::versegame::ScoreEntry {
                                    name: f.name.clone(),
                                    score: f.score,
                                })
                                .collect(),
                        );
                    }
                }
                view
            })
            .collect();
        Snapshot {
            v: PROTOCOL_VERSION,
            seq,
            tick,
            session_id: session_id.to_string(),
            notices: self.last_notices.clone(),
            game: GameView {
                phase: self.game.phase(),
                topic: self.game.topic().label(),
                count: self.game.accepted_count(),
                threshold: self.game.threshold(),
                remaining_s: self.game.remaining_ticks(tick) as f64 / self.tick_rate() as f64,
            },
            scoreboard: self.game.scoreboard(),
            entities,
        }
    }
}
