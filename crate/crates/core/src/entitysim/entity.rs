use serde::{Deserialize, Serialize};

use crate::chatparse::ViewerId;
use crate::scenegeo::{ImagePoint, Vec2};

pub type EntityId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LotusColor {
    Pink,
    White,
    Yellow,
    Blue,
}

impl LotusColor {
    pub const ALL: [LotusColor; 4] = [
        LotusColor::Pink,
        LotusColor::White,
        LotusColor::Yellow,
        LotusColor::Blue,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LotusMode {
    Idle,
    /// Dashing through tick `until` inclusive.
    Dashing { until: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lotus {
    pub owner: ViewerId,
    pub color: LotusColor,
    pub position: Vec2,
    pub velocity: Vec2,
    pub mode: LotusMode,
    pub shining_until: Option<u64>,
    pub radius: f64,
}

impl Lotus {
    pub fn is_shining(&self, tick: u64) -> bool {
        self.shining_until.is_some_and(|until| tick <= until)
    }
}

/// Start tick and length of a one-shot animation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lifetime {
    pub started: u64,
    pub duration: u64,
}

impl Lifetime {
    pub fn new(started: u64, duration: u64) -> Self {
        Lifetime {
            started,
            duration: duration.max(1),
        }
    }

    /// Animation progress in [0, 1].
    pub fn phase(&self, tick: u64) -> f64 {
        let elapsed = tick.saturating_sub(self.started).min(self.duration);
        elapsed as f64 / self.duration as f64
    }

    pub fn is_finished(&self, tick: u64) -> bool {
        tick.saturating_sub(self.started) >= self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fish {
    pub trigger_name: String,
    pub position: Vec2,
    pub life: Lifetime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Firework {
    pub trigger_name: String,
    pub position: ImagePoint,
    pub life: Lifetime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Umbrella {
    pub trigger_name: String,
    pub story: String,
    pub from: ImagePoint,
    pub to: ImagePoint,
    pub life: Lifetime,
}

impl Umbrella {
    pub fn position(&self, tick: u64) -> ImagePoint {
        let t = self.life.phase(tick);
        ImagePoint::new(
            self.from.u + (self.to.u - self.from.u) * t,
            self.from.v + (self.to.v - self.from.v) * t,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagEntry {
    pub name: String,
    pub score: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boat {
    pub top3: Vec<FlagEntry>,
    pub from: Vec2,
    pub to: Vec2,
    pub life: Lifetime,
}

impl Boat {
    pub fn position(&self, tick: u64) -> Vec2 {
        self.from.lerp(self.to, self.life.phase(tick))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Entity {
    Lotus(Lotus),
    Fish(Fish),
    Firework(Firework),
    Umbrella(Umbrella),
    Boat(Boat),
}

impl Entity {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Entity::Lotus(_) => "lotus",
            Entity::Fish(_) => "fish",
            Entity::Firework(_) => "firework",
            Entity::Umbrella(_) => "umbrella",
            Entity::Boat(_) => "boat",
        }
    }

    pub fn as_lotus(&self) -> Option<&Lotus> {
        match self {
            Entity::Lotus(l) => Some(l),
            _ => None,
        }
    }

    pub fn lifetime(&self) -> Option<&Lifetime> {
        match self {
            Entity::Lotus(_) => None,
            Entity::Fish(f) => Some(&f.life),
            Entity::Firework(f) => Some(&f.life),
            Entity::Umbrella(u) => Some(&u.life),
            Entity::Boat(b) => Some(&b.life),
        }
    }
}
