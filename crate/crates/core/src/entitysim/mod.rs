//! Authoritative fixed-timestep simulation of every virtual entity.
//!
//! Commands are applied between ticks; [`SimState::tick`] then advances one
//! timestep and returns everything that happened since the previous call.
//! All randomness flows from one seeded ChaCha stream, so identical seeds and
//! command sequences give bit-identical states.

mod entity;
mod physics;

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

pub use entity::{
    Boat, Entity, EntityId, FlagEntry, Fish, Firework, Lifetime, Lotus, LotusColor, LotusMode,
    Umbrella,
};
pub use physics::{collide, confine_to_lake, Body, Impact};

use crate::chatparse::ViewerId;
use crate::scenegeo::{
    distance_to_segment, in_viewport, sample_visible_lake_point, ImagePoint, SceneConfig, Vec2,
    WorldPoint,
};

pub const DEFAULT_TICK_RATE: u32 = 30;
pub const DEFAULT_STORY_MAX_CHARS: usize = 140;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoundCue {
    Splash,
    Ripple,
    Firework,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DespawnReason {
    LeftViewport,
    Expired,
    BrokenByBoat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Effect {
    Spawned {
        id: EntityId,
        kind: String,
    },
    Despawned {
        id: EntityId,
        kind: String,
        reason: DespawnReason,
    },
    Collision {
        a: EntityId,
        b: EntityId,
        impact: Impact,
    },
    Shore {
        id: EntityId,
    },
    Sound {
        cue: SoundCue,
        at: Option<EntityId>,
    },
}

/// Why a lotus command was refused. The text goes back to the viewer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    AlreadyReleased,
    NoLotus,
    NoSuchLotus(String),
    SelfTarget,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::AlreadyReleased => f.write_str("you already have a lotus on the lake"),
            Rejection::NoLotus => f.write_str("release first: send `release lotus`"),
            Rejection::NoSuchLotus(name) => write!(f, "no such lotus: {name}"),
            Rejection::SelfTarget => f.write_str("you cannot hit your own lotus"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ViewerRecord {
    display_name: String,
    last_active: u64,
}

fn serialize_rng<S: Serializer>(rng: &ChaCha8Rng, s: S) -> Result<S::Ok, S::Error> {
    let seed = hex::encode(rng.get_seed());
    let pos = rng.get_word_pos().to_string();
    (seed, rng.get_stream(), pos).serialize(s)
}

/// Everything the simulation owns. Serializes canonically (ordered maps,
/// RNG position included) for state hashing.
#[derive(Debug, Clone, Serialize)]
pub struct SimState {
    tick: u64,
    tick_rate: u32,
    story_max_chars: usize,
    #[serde(serialize_with = "serialize_rng")]
    rng: ChaCha8Rng,
    next_id: EntityId,
    entities: BTreeMap<EntityId, Entity>,
    lotus_by_owner: BTreeMap<ViewerId, EntityId>,
    viewers: BTreeMap<ViewerId, ViewerRecord>,
    #[serde(skip)]
    effects: Vec<Effect>,
}

impl SimState {
    pub fn new(seed: u64, tick_rate: u32) -> Self {
        assert!(tick_rate > 0, "tick rate must be positive");
        SimState {
            tick: 0,
            tick_rate,
            story_max_chars: DEFAULT_STORY_MAX_CHARS,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_id: 1,
            entities: BTreeMap::new(),
            lotus_by_owner: BTreeMap::new(),
            viewers: BTreeMap::new(),
            effects: Vec::new(),
        }
    }

    pub fn with_story_max_chars(mut self, max: usize) -> Self {
        self.story_max_chars = max.max(1);
        self
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn tick_rate(&self) -> u32 {
        self.tick_rate
    }

    /// Converts seconds to whole ticks at this state's rate.
    pub fn ticks_for(&self, seconds: f64) -> u64 {
        (seconds * self.tick_rate as f64).round().max(0.0) as u64
    }

    pub fn entities(&self) -> &BTreeMap<EntityId, Entity> {
        &self.entities
    }

    pub fn entity(&self, id: EntityId) -> Option<&Entity> {
        self.entities.get(&id)
    }

    pub fn lotus_of(&self, owner: &ViewerId) -> Option<(EntityId, &Lotus)> {
        let id = *self.lotus_by_owner.get(owner)?;
        self.entities[&id].as_lotus().map(|l| (id, l))
    }

    pub fn lotuses(&self) -> impl Iterator<Item = (EntityId, &Lotus)> {
        self.entities
            .iter()
            .filter_map(|(id, e)| e.as_lotus().map(|l| (*id, l)))
    }

    pub fn display_name<'a>(&'a self, viewer: &'a ViewerId) -> &'a str {
        self.viewers
            .get(viewer)
            .map(|r| r.display_name.as_str())
            .unwrap_or(viewer.as_str())
    }

    /// Records the viewer's current display name and activity stamp. Used to
    /// resolve `hit` targets.
    pub fn touch_viewer(&mut self, viewer: &ViewerId, display_name: &str, activity: u64) {
        let rec = self
            .viewers
            .entry(viewer.clone())
            .or_insert_with(|| ViewerRecord {
                display_name: display_name.to_string(),
                last_active: activity,
            });
        rec.display_name = display_name.to_string();
        rec.last_active = rec.last_active.max(activity);
    }

    fn allocate_id(&mut self) -> EntityId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn insert(&mut self, entity: Entity) -> EntityId {
        let id = self.allocate_id();
        if let Entity::Lotus(l) = &entity {
            self.lotus_by_owner.insert(l.owner.clone(), id);
        }
        self.effects.push(Effect::Spawned {
            id,
            kind: entity.kind_name().to_string(),
        });
        self.entities.insert(id, entity);
        id
    }

    fn remove(&mut self, id: EntityId, reason: DespawnReason) {
        if let Some(entity) = self.entities.remove(&id) {
            if let Entity::Lotus(l) = &entity {
                self.lotus_by_owner.remove(&l.owner);
            }
            self.effects.push(Effect::Despawned {
                id,
                kind: entity.kind_name().to_string(),
                reason,
            });
        }
    }

    /// Releases a lotus for `owner` at a random visible lake point with a
    /// random color.
    pub fn spawn_lotus(
        &mut self,
        scene: &SceneConfig,
        owner: &ViewerId,
    ) -> Result<EntityId, Rejection> {
        if self.lotus_by_owner.contains_key(owner) {
            return Err(Rejection::AlreadyReleased);
        }
        let position = sample_visible_lake_point(&mut self.rng, scene);
        let color = LotusColor::ALL[self.rng.random_range(0..LotusColor::ALL.len())];
        Ok(self.insert_lotus(scene, owner, position, color))
    }

    /// Places a lotus at an exact spot. Scenario setup and tests use this;
    /// chat commands go through [`SimState::spawn_lotus`].
    pub fn insert_lotus(
        &mut self,
        scene: &SceneConfig,
        owner: &ViewerId,
        position: Vec2,
        color: LotusColor,
    ) -> EntityId {
        if let Some(old) = self.lotus_by_owner.get(owner).copied() {
            self.remove(old, DespawnReason::Expired);
        }
        let physics = scene.physics();
        let id = self.insert(Entity::Lotus(Lotus {
            owner: owner.clone(),
            color,
            position,
            velocity: Vec2::new(physics.idle_drift_speed, 0.0),
            mode: LotusMode::Idle,
            shining_until: None,
            radius: physics.lotus_radius,
        }));
        self.effects.push(Effect::Sound {
            cue: SoundCue::Ripple,
            at: Some(id),
        });
        id
    }

    fn lotus_mut(&mut self, id: EntityId) -> &mut Lotus {
        match self.entities.get_mut(&id) {
            Some(Entity::Lotus(l)) => l,
            _ => unreachable!("lotus index out of sync"),
        }
    }

    /// Resolves a display name to a live lotus other than `owner`'s. Among
    /// several viewers sharing the name the most recently active one wins.
    fn find_target(&self, owner: &ViewerId, name: &str) -> Result<EntityId, Rejection> {
        let name = name.trim();
        let pick = |exact: bool| {
            self.lotus_by_owner
                .iter()
                .filter(|(viewer, _)| *viewer != owner)
                .filter_map(|(viewer, id)| {
                    let rec = self.viewers.get(viewer)?;
                    let hit = if exact {
                        rec.display_name == name
                    } else {
                        rec.display_name.to_lowercase() == name.to_lowercase()
                    };
                    hit.then_some((rec.last_active, *id))
                })
                .max_by_key(|(active, id)| (*active, std::cmp::Reverse(*id)))
                .map(|(_, id)| id)
        };
        if let Some(id) = pick(true).or_else(|| pick(false)) {
            return Ok(id);
        }
        let own_name = self.viewers.get(owner).map(|r| r.display_name.as_str());
        if own_name.is_some_and(|n| n == name || n.to_lowercase() == name.to_lowercase()) {
            return Err(Rejection::SelfTarget);
        }
        Err(Rejection::NoSuchLotus(name.to_string()))
    }

    /// Starts a dash: random heading without a target, straight at the
    /// target's lotus otherwise.
    pub fn dash_lotus(
        &mut self,
        scene: &SceneConfig,
        owner: &ViewerId,
        target: Option<&str>,
    ) -> Result<EntityId, Rejection> {
        let (id, lotus) = self.lotus_of(owner).ok_or(Rejection::NoLotus)?;
        let from = lotus.position;
        let heading = match target {
            Some(name) => {
                let target_id = self.find_target(owner, name)?;
                let to = self.entities[&target_id].as_lotus().unwrap().position;
                (to - from).normalized().ok_or(Rejection::SelfTarget)?
            }
            None => {
                let angle = self.rng.random_range(0.0..std::f64::consts::TAU);
                Vec2::new(angle.cos(), angle.sin())
            }
        };
        let physics = scene.physics();
        let until = self.tick + self.ticks_for(physics.dash_duration_s);
        let lotus = self.lotus_mut(id);
        lotus.velocity = heading * physics.dash_speed;
        lotus.mode = LotusMode::Dashing { until };
        Ok(id)
    }

    /// Lights the owner's lotus. A repeat call restarts the timer rather
    /// than adding to it.
    pub fn shine_lotus(
        &mut self,
        scene: &SceneConfig,
        owner: &ViewerId,
    ) -> Result<EntityId, Rejection> {
        let (id, _) = self.lotus_of(owner).ok_or(Rejection::NoLotus)?;
        let until = self.tick + self.ticks_for(scene.physics().shine_duration_s);
        self.lotus_mut(id).shining_until = Some(until);
        Ok(id)
    }

    pub fn feed_fish(&mut self, scene: &SceneConfig, trigger_name: &str) -> EntityId {
        let position = sample_visible_lake_point(&mut self.rng, scene);
        let life = Lifetime::new(self.tick, self.ticks_for(scene.physics().fish_duration_s));
        let id = self.insert(Entity::Fish(Fish {
            trigger_name: trigger_name.to_string(),
            position,
            life,
        }));
        self.effects.push(Effect::Sound {
            cue: SoundCue::Splash,
            at: Some(id),
        });
        id
    }

    pub fn spawn_firework(&mut self, scene: &SceneConfig, trigger_name: &str) -> EntityId {
        let sky = *scene.sky_band();
        let position = ImagePoint::new(
            self.rng.random_range(sky.min_u..=sky.max_u),
            self.rng.random_range(sky.min_v..=sky.max_v),
        );
        let life = Lifetime::new(self.tick, self.ticks_for(scene.physics().firework_duration_s));
        let id = self.insert(Entity::Firework(Firework {
            trigger_name: trigger_name.to_string(),
            position,
            life,
        }));
        self.effects.push(Effect::Sound {
            cue: SoundCue::Firework,
            at: Some(id),
        });
        id
    }

    /// An umbrella carrying `story` across the screen, left to right, at a
    /// random height within the sky band.
    pub fn spawn_umbrella(
        &mut self,
        scene: &SceneConfig,
        trigger_name: &str,
        story: &str,
    ) -> EntityId {
        let sky = *scene.sky_band();
        let viewport = *scene.viewport();
        let v = self.rng.random_range(sky.min_v..=sky.max_v);
        let life = Lifetime::new(self.tick, self.ticks_for(scene.physics().umbrella_duration_s));
        self.insert(Entity::Umbrella(Umbrella {
            trigger_name: trigger_name.to_string(),
            story: truncate_story(story, self.story_max_chars),
            from: ImagePoint::new(viewport.min_u, v),
            to: ImagePoint::new(viewport.max_u, v),
            life,
        }))
    }

    /// Launches the finale boat along the scene's boat path.
    pub fn run_boat(&mut self, scene: &SceneConfig, top3: Vec<FlagEntry>) -> EntityId {
        let path = scene.boat();
        let life = Lifetime::new(self.tick, self.ticks_for(path.duration_s));
        self.insert(Entity::Boat(Boat {
            top3,
            from: path.start(),
            to: path.end(),
            life,
        }))
    }

    /// Advances one timestep and drains the effects accumulated since the
    /// last call.
    pub fn step(&mut self, scene: &SceneConfig) -> Vec<Effect> {
        self.tick += 1;
        let now = self.tick;
        let dt = 1.0 / self.tick_rate as f64;
        let physics = scene.physics().clone();
        let drift = Vec2::new(physics.idle_drift_speed, 0.0);
        let settle = (-dt / physics.idle_settle_s).exp();

        let lotus_ids: Vec<EntityId> = self.lotus_by_owner.values().copied().collect::<Vec<_>>();
        let mut lotus_ids = lotus_ids;
        lotus_ids.sort_unstable();

        // motion
        let mut previous = BTreeMap::new();
        for &id in &lotus_ids {
            let lotus = self.lotus_mut(id);
            previous.insert(id, lotus.position);
            if let LotusMode::Dashing { until } = lotus.mode {
                if now > until {
                    lotus.mode = LotusMode::Idle;
                }
            }
            if lotus.mode == LotusMode::Idle {
                lotus.velocity = drift + (lotus.velocity - drift) * settle;
            }
            lotus.position += lotus.velocity * dt;
            if lotus.shining_until.is_some_and(|until| until < now) {
                lotus.shining_until = None;
            }
        }

        // lotus-lotus impacts
        for i in 0..lotus_ids.len() {
            for j in (i + 1)..lotus_ids.len() {
                let (ia, ib) = (lotus_ids[i], lotus_ids[j]);
                let a = self.entities[&ia].as_lotus().unwrap();
                let b = self.entities[&ib].as_lotus().unwrap();
                let mut body_a = Body {
                    position: a.position,
                    velocity: a.velocity,
                    radius: a.radius,
                };
                let mut body_b = Body {
                    position: b.position,
                    velocity: b.velocity,
                    radius: b.radius,
                };
                let before = (body_a, body_b);
                let impact = collide(&mut body_a, &mut body_b, physics.restitution);
                if (body_a, body_b) != before {
                    let a = self.lotus_mut(ia);
                    a.position = body_a.position;
                    a.velocity = body_a.velocity;
                    let b = self.lotus_mut(ib);
                    b.position = body_b.position;
                    b.velocity = body_b.velocity;
                }
                if let Some(impact) = impact {
                    self.effects.push(Effect::Collision {
                        a: ia,
                        b: ib,
                        impact,
                    });
                }
            }
        }

        // shore, then viewport
        let lake = scene.lake();
        for &id in &lotus_ids {
            let fallback = previous[&id];
            let lotus = self.lotus_mut(id);
            let (mut pos, mut vel) = (lotus.position, lotus.velocity);
            if confine_to_lake(lake, &mut pos, &mut vel, fallback) {
                lotus.position = pos;
                lotus.velocity = vel;
                self.effects.push(Effect::Shore { id });
            }
        }
        for &id in &lotus_ids {
            let pos = self.entities[&id].as_lotus().unwrap().position;
            if !in_viewport(scene.camera(), scene.viewport(), WorldPoint::on_water(pos)) {
                self.remove(id, DespawnReason::LeftViewport);
            }
        }

        // finale boats sweep their path segment for this tick
        let boats: Vec<(EntityId, Vec2, Vec2)> = self
            .entities
            .iter()
            .filter_map(|(id, e)| match e {
                Entity::Boat(b) => Some((*id, b.position(now - 1), b.position(now))),
                _ => None,
            })
            .collect();
        for (_, from, to) in boats {
            let half_width = scene.boat().half_width;
            let broken: Vec<EntityId> = self
                .lotuses()
                .filter(|(_, l)| distance_to_segment(l.position, from, to) <= half_width + l.radius)
                .map(|(id, _)| id)
                .collect();
            for id in broken {
                self.remove(id, DespawnReason::BrokenByBoat);
            }
        }

        let finished: Vec<EntityId> = self
            .entities
            .iter()
            .filter(|(_, e)| e.lifetime().is_some_and(|l| l.is_finished(now)))
            .map(|(id, _)| *id)
            .collect();
        for id in finished {
            self.remove(id, DespawnReason::Expired);
        }

        std::mem::take(&mut self.effects)
    }
}

/// Shortens a story to at most `max` characters, the last being an ellipsis
/// when anything was cut.
pub fn truncate_story(story: &str, max: usize) -> String {
    if story.chars().count() <= max {
        return story.to_string();
    }
    let mut out: String = story.chars().take(max.saturating_sub(1)).collect();
    out.push('…');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> SceneConfig {
        SceneConfig::demo()
    }

    fn viewer(n: &str) -> ViewerId {
        ViewerId::new(n)
    }

    #[test]
    fn one_lotus_per_owner() {
        let scene = scene();
        let mut s = SimState::new(1, 30);
        let alice = viewer("a");
        let id = s.spawn_lotus(&scene, &alice).unwrap();
        assert!(scene.lake().contains(s.lotus_of(&alice).unwrap().1.position));
        assert_eq!(s.spawn_lotus(&scene, &alice), Err(Rejection::AlreadyReleased));
        assert_eq!(s.entities().len(), 1);
        assert_eq!(s.lotus_of(&alice).unwrap().0, id);
    }

    #[test]
    fn shine_lasts_sixty_ticks_at_thirty_hz() {
        let scene = scene();
        let mut s = SimState::new(1, 30);
        let a = viewer("a");
        s.insert_lotus(&scene, &a, Vec2::new(0.0, 20.0), LotusColor::Blue);
        s.shine_lotus(&scene, &a).unwrap();
        assert_eq!(s.lotus_of(&a).unwrap().1.shining_until, Some(60));
        for t in 1..=60 {
            s.step(&scene);
            assert!(s.lotus_of(&a).unwrap().1.is_shining(t), "tick {t}");
        }
        s.step(&scene);
        assert_eq!(s.tick(), 61);
        assert!(!s.lotus_of(&a).unwrap().1.is_shining(61));
        assert_eq!(s.lotus_of(&a).unwrap().1.shining_until, None);
    }

    #[test]
    fn shine_twice_extends_not_stacks() {
        let scene = scene();
        let mut s = SimState::new(1, 30);
        let a = viewer("a");
        s.insert_lotus(&scene, &a, Vec2::new(0.0, 20.0), LotusColor::Blue);
        s.shine_lotus(&scene, &a).unwrap();
        for _ in 0..10 {
            s.step(&scene);
        }
        s.shine_lotus(&scene, &a).unwrap();
        assert_eq!(s.lotus_of(&a).unwrap().1.shining_until, Some(70));
        assert_eq!(s.shine_lotus(&scene, &viewer("nobody")), Err(Rejection::NoLotus));
    }

    #[test]
    fn targeted_dash_heads_at_target() {
        let scene = scene();
        let mut s = SimState::new(1, 30);
        let (a, b) = (viewer("a"), viewer("b"));
        s.touch_viewer(&a, "Alice", 1);
        s.touch_viewer(&b, "Bob", 2);
        s.insert_lotus(&scene, &a, Vec2::new(0.0, 20.0), LotusColor::Pink);
        s.insert_lotus(&scene, &b, Vec2::new(5.0, 20.0), LotusColor::White);
        s.dash_lotus(&scene, &a, Some("Bob")).unwrap();
        let lotus = s.lotus_of(&a).unwrap().1;
        assert_eq!(lotus.velocity, Vec2::new(scene.physics().dash_speed, 0.0));
        assert_eq!(lotus.mode, LotusMode::Dashing { until: 60 });
    }

    #[test]
    fn dash_rejections() {
        let scene = scene();
        let mut s = SimState::new(1, 30);
        let (a, b) = (viewer("a"), viewer("b"));
        s.touch_viewer(&a, "Alice", 1);
        assert_eq!(s.dash_lotus(&scene, &a, None), Err(Rejection::NoLotus));
        s.insert_lotus(&scene, &a, Vec2::new(0.0, 20.0), LotusColor::Pink);
        assert_eq!(
            s.dash_lotus(&scene, &a, Some("Ghost")),
            Err(Rejection::NoSuchLotus("Ghost".into()))
        );
        assert_eq!(s.dash_lotus(&scene, &a, Some("Alice")), Err(Rejection::SelfTarget));
        // a different viewer with the same position is degenerate too
        s.touch_viewer(&b, "Bob", 2);
        s.insert_lotus(&scene, &b, Vec2::new(0.0, 20.0), LotusColor::Pink);
        assert_eq!(s.dash_lotus(&scene, &a, Some("Bob")), Err(Rejection::SelfTarget));
    }

    #[test]
    fn name_collisions_prefer_most_recent_activity() {
        let scene = scene();
        let mut s = SimState::new(1, 30);
        let (a, b, c) = (viewer("a"), viewer("b"), viewer("c"));
        s.touch_viewer(&a, "Me", 1);
        s.touch_viewer(&b, "Twin", 2);
        s.touch_viewer(&c, "Twin", 3);
        s.insert_lotus(&scene, &a, Vec2::new(0.0, 20.0), LotusColor::Pink);
        s.insert_lotus(&scene, &b, Vec2::new(0.0, 25.0), LotusColor::Pink);
        s.insert_lotus(&scene, &c, Vec2::new(0.0, 15.0), LotusColor::Pink);
        s.dash_lotus(&scene, &a, Some("Twin")).unwrap();
        assert!(s.lotus_of(&a).unwrap().1.velocity.y < 0.0);
        s.touch_viewer(&b, "Twin", 10);
        s.dash_lotus(&scene, &a, Some("twin")).unwrap();
        assert!(s.lotus_of(&a).unwrap().1.velocity.y > 0.0);
    }

    #[test]
    fn random_dash_is_reproducible() {
        let scene = scene();
        let run = || {
            let mut s = SimState::new(77, 30);
            let a = viewer("a");
            s.spawn_lotus(&scene, &a).unwrap();
            s.dash_lotus(&scene, &a, None).unwrap();
            s.lotus_of(&a).unwrap().1.velocity
        };
        let v = run();
        assert_eq!(v, run());
        assert!((v.length() - scene.physics().dash_speed).abs() < 1e-12);
    }

    #[test]
    fn dashing_head_on_exchange_in_tick() {
        let mut file = scene().file().clone();
        file.physics.restitution = 1.0;
        let scene = SceneConfig::from_file(file).unwrap();
        let mut s = SimState::new(1, 30);
        let (a, b) = (viewer("a"), viewer("b"));
        s.touch_viewer(&a, "A", 1);
        s.touch_viewer(&b, "B", 2);
        s.insert_lotus(&scene, &a, Vec2::new(0.0, 20.0), LotusColor::Pink);
        s.insert_lotus(&scene, &b, Vec2::new(1.0, 20.0), LotusColor::Blue);
        s.dash_lotus(&scene, &a, Some("B")).unwrap();
        s.dash_lotus(&scene, &b, Some("A")).unwrap();
        let va = s.lotus_of(&a).unwrap().1.velocity;
        let vb = s.lotus_of(&b).unwrap().1.velocity;
        let mut collided = false;
        for _ in 0..30 {
            let fx = s.step(&scene);
            if fx.iter().any(|e| matches!(e, Effect::Collision { .. })) {
                collided = true;
                break;
            }
        }
        assert!(collided);
        assert_eq!(s.lotus_of(&a).unwrap().1.velocity, vb);
        assert_eq!(s.lotus_of(&b).unwrap().1.velocity, va);
    }

    #[test]
    fn idle_lotus_drifts_right_and_leaves() {
        let scene = scene();
        let mut s = SimState::new(3, 30);
        let a = viewer("a");
        let id = s.insert_lotus(&scene, &a, Vec2::new(5.0, 10.0), LotusColor::White);
        let x0 = s.lotus_of(&a).unwrap().1.position.x;
        s.step(&scene);
        assert!(s.lotus_of(&a).unwrap().1.position.x > x0);
        let mut left_at = None;
        for _ in 0..100_000 {
            let fx = s.step(&scene);
            if fx.contains(&Effect::Despawned {
                id,
                kind: "lotus".into(),
                reason: DespawnReason::LeftViewport,
            }) {
                left_at = Some(s.tick());
                break;
            }
        }
        assert!(left_at.is_some());
        assert!(s.lotus_of(&a).is_none());
        // the owner may release again
        assert!(s.spawn_lotus(&scene, &a).is_ok());
    }

    #[test]
    fn fish_lifecycle_and_names() {
        let scene = scene();
        let mut s = SimState::new(9, 30);
        let f1 = s.feed_fish(&scene, "Alice");
        let f2 = s.feed_fish(&scene, "Bob");
        let fx = s.step(&scene);
        assert!(fx.iter().any(|e| matches!(e, Effect::Sound { cue: SoundCue::Splash, .. })));
        let names: Vec<_> = [f1, f2]
            .iter()
            .map(|id| match s.entity(*id).unwrap() {
                Entity::Fish(f) => {
                    assert!(scene.lake().contains(f.position));
                    f.trigger_name.clone()
                }
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(names, ["Alice", "Bob"]);
        let duration = s.ticks_for(scene.physics().fish_duration_s);
        for _ in 1..duration {
            s.step(&scene);
        }
        assert!(s.entity(f1).is_none() && s.entity(f2).is_none());
    }

    #[test]
    fn fish_spawn_is_deterministic() {
        let scene = scene();
        let pos = |seed| {
            let mut s = SimState::new(seed, 30);
            let id = s.feed_fish(&scene, "x");
            match s.entity(id).unwrap() {
                Entity::Fish(f) => f.position,
                _ => unreachable!(),
            }
        };
        assert_eq!(pos(4), pos(4));
        assert_ne!(pos(4), pos(5));
    }

    #[test]
    fn firework_in_sky_band_with_name() {
        let scene = scene();
        let mut s = SimState::new(2, 30);
        for i in 0..50 {
            let id = s.spawn_firework(&scene, &format!("gifter{i}"));
            match s.entity(id).unwrap() {
                Entity::Firework(f) => {
                    assert!(scene.sky_band().contains(f.position));
                    assert_eq!(f.trigger_name, format!("gifter{i}"));
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn umbrella_story_truncation_boundary() {
        assert_eq!(truncate_story(&"a".repeat(140), 140), "a".repeat(140));
        let long = truncate_story(&"b".repeat(141), 140);
        assert_eq!(long.chars().count(), 140);
        assert!(long.ends_with('…'));
        let scene = scene();
        let mut s = SimState::new(2, 30);
        let id = s.spawn_umbrella(&scene, "g", &"故".repeat(200));
        match s.entity(id).unwrap() {
            Entity::Umbrella(u) => {
                assert_eq!(u.story.chars().count(), 140);
                assert_eq!(u.position(0).u, scene.viewport().min_u);
                assert!(u.from.v == u.to.v);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn umbrella_moves_left_to_right_at_constant_speed() {
        let scene = scene();
        let mut s = SimState::new(2, 30);
        let id = s.spawn_umbrella(&scene, "g", "hello");
        let mut xs = Vec::new();
        for _ in 0..5 {
            s.step(&scene);
            if let Entity::Umbrella(u) = s.entity(id).unwrap() {
                xs.push(u.position(s.tick()).u);
            }
        }
        let steps: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(steps.iter().all(|d| *d > 0.0 && (d - steps[0]).abs() < 1e-9));
    }

    #[test]
    fn boat_breaks_lotus_on_path_and_spares_others() {
        let scene = scene();
        let mut s = SimState::new(2, 30);
        let path = scene.boat().clone();
        let (on, off) = (viewer("on"), viewer("off"));
        let on_id = s.insert_lotus(&scene, &on, Vec2::new(5.0, path.start[1]), LotusColor::Pink);
        let margin = path.half_width + scene.physics().lotus_radius + 0.5;
        s.insert_lotus(&scene, &off, Vec2::new(5.0, path.start[1] + margin), LotusColor::Pink);
        s.run_boat(&scene, vec![FlagEntry { name: "A".into(), score: 3 }]);
        let mut broken = false;
        for _ in 0..s.ticks_for(path.duration_s) {
            broken |= s.step(&scene).contains(&Effect::Despawned {
                id: on_id,
                kind: "lotus".into(),
                reason: DespawnReason::BrokenByBoat,
            });
        }
        assert!(broken);
        assert!(s.lotus_of(&off).is_some());
        assert!(!s.entities().values().any(|e| matches!(e, Entity::Boat(_))));
    }

    #[test]
    fn ids_never_reused() {
        let scene = scene();
        let mut s = SimState::new(2, 30);
        let a = viewer("a");
        let first = s.feed_fish(&scene, "a");
        for _ in 0..100 {
            s.step(&scene);
        }
        let second = s.spawn_lotus(&scene, &a).unwrap();
        assert!(second > first);
    }
}
