//! Gifts, story entitlements and the session gift ledger.
//!
//! A gift below the story threshold sets off a firework. A gift at or above
//! it grants the gifter one `#MyStory` post, which is shown on an umbrella.
//! Each viewer holds at most one open entitlement; a new qualifying gift
//! replaces it. All amounts are integer fen.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::chatparse::{classify_gift, GiftEffect, GiftTiers, NonPositiveGift, ViewerId};
use crate::money::Cny;

pub const DEFAULT_ENTITLEMENT_TTL_S: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entitlement {
    pub granted_at: u64,
    pub expires_at: u64,
    pub consumed: bool,
}

impl Entitlement {
    pub fn is_open(&self, now: u64) -> bool {
        !self.consumed && now < self.expires_at
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerEffect {
    Firework,
    StoryEntitlement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub viewer: ViewerId,
    pub name: String,
    pub amount: Cny,
    pub fen: i64,
    pub tick: u64,
    pub effect: LedgerEffect,
}

/// Append-only record of accepted gifts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Ledger {
    records: Vec<LedgerRecord>,
}

impl Ledger {
    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    pub fn total(&self) -> Cny {
        Cny::from_fen(self.records.iter().map(|r| r.fen).sum())
    }

    pub fn total_for(&self, viewer: &ViewerId) -> Cny {
        Cny::from_fen(
            self.records
                .iter()
                .filter(|r| &r.viewer == viewer)
                .map(|r| r.fen)
                .sum(),
        )
    }

    /// Writes one JSON record per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// What the session should do after a gift or story.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EconomyAction {
    SpawnFirework { name: String },
    SpawnUmbrella { name: String, story: String },
    Notice { viewer: ViewerId, text: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconomySettings {
    pub tiers: GiftTiers,
    pub entitlement_ttl_s: f64,
}

impl Default for EconomySettings {
    fn default() -> Self {
        EconomySettings {
            tiers: GiftTiers::default(),
            entitlement_ttl_s: DEFAULT_ENTITLEMENT_TTL_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Economy {
    tiers: GiftTiers,
    ttl_ticks: u64,
    ttl_minutes: f64,
    ledger: Ledger,
    entitlements: BTreeMap<ViewerId, Entitlement>,
}

impl Economy {
    pub fn new(settings: EconomySettings, tick_rate: u32) -> Self {
        Economy {
            tiers: settings.tiers,
            ttl_ticks: (settings.entitlement_ttl_s * tick_rate as f64).round() as u64,
            ttl_minutes: settings.entitlement_ttl_s / 60.0,
            ledger: Ledger::default(),
            entitlements: BTreeMap::new(),
        }
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn entitlement(&self, viewer: &ViewerId) -> Option<&Entitlement> {
        self.entitlements.get(viewer)
    }

    pub fn tiers(&self) -> &GiftTiers {
        &self.tiers
    }

    pub fn on_gift(
        &mut self,
        viewer: &ViewerId,
        name: &str,
        amount: Cny,
        now: u64,
    ) -> Result<Vec<EconomyAction>, NonPositiveGift> {
        let effect = classify_gift(amount, None, &self.tiers)?;
        let ledger_effect = match effect {
            GiftEffect::Firework => LedgerEffect::Firework,
            GiftEffect::StoryEntitlement { .. } => LedgerEffect::StoryEntitlement,
        };
        self.ledger.records.push(LedgerRecord {
            viewer: viewer.clone(),
            name: name.to_string(),
            amount,
            fen: amount.fen(),
            tick: now,
            effect: ledger_effect,
        });
        Ok(match effect {
            GiftEffect::Firework => vec![EconomyAction::SpawnFirework {
                name: name.to_string(),
            }],
            GiftEffect::StoryEntitlement { .. } => {
                self.entitlements.insert(
                    viewer.clone(),
                    Entitlement {
                        granted_at: now,
                        expires_at: now + self.ttl_ticks,
                        consumed: false,
                    },
                );
                vec![EconomyAction::Notice {
                    viewer: viewer.clone(),
                    text: format!(
                        "thank you, {name}! share your story with #MyStory <text> within {} min",
                        self.ttl_minutes
                    ),
                }]
            }
        })
    }

    pub fn on_story(
        &mut self,
        viewer: &ViewerId,
        name: &str,
        text: &str,
        now: u64,
    ) -> Vec<EconomyAction> {
        match self.entitlements.get_mut(viewer) {
            Some(e) if e.is_open(now) => {
                e.consumed = true;
                vec![EconomyAction::SpawnUmbrella {
                    name: name.to_string(),
                    story: text.to_string(),
                }]
            }
            _ => vec![EconomyAction::Notice {
                viewer: viewer.clone(),
                text: format!(
                    "stories need a gift of {} CNY or more first",
                    self.tiers.story_threshold
                ),
            }],
        }
    }
}
