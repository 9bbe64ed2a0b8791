//! Classification of viewer comments and gifts into simulation commands.
//!
//! Command words come from an alias table so the same grammar serves the
//! English command set and the Chinese one used on the live platform. The
//! alias file is plain UTF-8, one `key = alias` pair per line:
//!
//! ```text
//! # comments start with '#' as the first non-blank character
//! release_lotus = release lotus
//! hit_lotus     = hit {id} with my lotus
//! story         = #MyStory
//! ```
//!
//! Keys are `release_lotus`, `dash_lotus`, `hit_lotus`, `shine_lotus`,
//! `feed_fish` and `story`. A key may repeat; every line adds one alias.
//! `hit_lotus` aliases must contain the `{id}` placeholder exactly once.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Cny;

/// Opaque per-viewer identity assigned at connection time.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ViewerId(pub String);

impl ViewerId {
    pub fn new(id: impl Into<String>) -> Self {
        ViewerId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ViewerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A comment or gift, stamped at ingestion. The only input to a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatEvent {
    pub seq: u64,
    /// Milliseconds since session start.
    pub timestamp_ms: u64,
    pub viewer_id: ViewerId,
    pub display_name: String,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Comment { text: String },
    Gift { amount: Cny },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Command {
    ReleaseLotus,
    DashLotus,
    HitLotus(String),
    ShineLotus,
    FeedFish,
    Story(String),
    Verse(String),
    Plain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    ReleaseLotus,
    DashLotus,
    HitLotus,
    ShineLotus,
    FeedFish,
    Story,
}

impl CommandKind {
    pub const ALL: [CommandKind; 6] = [
        CommandKind::ReleaseLotus,
        CommandKind::DashLotus,
        CommandKind::HitLotus,
        CommandKind::ShineLotus,
        CommandKind::FeedFish,
        CommandKind::Story,
    ];

    pub fn key(self) -> &'static str {
        match self {
            CommandKind::ReleaseLotus => "release_lotus",
            CommandKind::DashLotus => "dash_lotus",
            CommandKind::HitLotus => "hit_lotus",
            CommandKind::ShineLotus => "shine_lotus",
            CommandKind::FeedFish => "feed_fish",
            CommandKind::Story => "story",
        }
    }

    fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.key() == key)
    }
}

const ID_PLACEHOLDER: &str = "{id}";

#[derive(Debug, Clone, PartialEq, Eq)]
enum Pattern {
    /// The whole normalized comment must equal the alias.
    Whole(String),
    /// `prefix <target> suffix`; the target is everything in between.
    Target { prefix: String, suffix: String },
    /// Hashtag at the start of the comment; the rest is the payload.
    Leading(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alias {
    pub kind: CommandKind,
    /// The alias as written in the table, after whitespace normalization.
    pub text: String,
    pattern: Pattern,
}

impl Alias {
    fn new(kind: CommandKind, raw: &str) -> Result<Self, AliasErrorKind> {
        let text = normalize_comment(raw);
        if text.is_empty() {
            return Err(AliasErrorKind::EmptyAlias);
        }
        let placeholders = text.matches(ID_PLACEHOLDER).count();
        let pattern = match kind {
            CommandKind::HitLotus => {
                if placeholders != 1 {
                    return Err(AliasErrorKind::Placeholder(kind));
                }
                let (prefix, suffix) = text.split_once(ID_PLACEHOLDER).unwrap();
                if prefix.trim().is_empty() && suffix.trim().is_empty() {
                    return Err(AliasErrorKind::EmptyAlias);
                }
                Pattern::Target {
                    prefix: prefix.to_string(),
                    suffix: suffix.to_string(),
                }
            }
            _ if placeholders != 0 => return Err(AliasErrorKind::Placeholder(kind)),
            CommandKind::Story => Pattern::Leading(text.clone()),
            _ => Pattern::Whole(text.clone()),
        };
        Ok(Alias {
            kind,
            text,
            pattern,
        })
    }

    /// A comment that this alias should parse as, using `target` for the
    /// `{id}` slot.
    pub fn example(&self, target: &str) -> String {
        self.text.replace(ID_PLACEHOLDER, target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}{kind}", line_prefix("alias table", *.line))]
pub struct AliasError {
    pub line: usize,
    pub kind: AliasErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AliasErrorKind {
    #[error("expected `key = alias`")]
    MissingSeparator,
    #[error("unknown command key `{0}`")]
    UnknownKey(String),
    #[error("alias is empty")]
    EmptyAlias,
    #[error("wrong number of `{{id}}` placeholders for {0:?}")]
    Placeholder(CommandKind),
    #[error("alias `{0}` is already bound to another command")]
    Ambiguous(String),
    #[error("cannot read alias file: {0}")]
    Io(String),
}

/// Alias table mapping command words to commands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandAliases {
    aliases: Vec<Alias>,
    story_tags: Vec<String>,
}

/// The shipped table: English commands plus the Chinese aliases.
pub const DEFAULT_ALIASES: &str = include_str!("../data/aliases.txt");

impl Default for CommandAliases {
    fn default() -> Self {
        CommandAliases::parse(DEFAULT_ALIASES).expect("bundled alias table is valid")
    }
}

impl CommandAliases {
    pub fn parse(source: &str) -> Result<Self, AliasError> {
        let mut aliases: Vec<Alias> = Vec::new();
        for (idx, raw_line) in source.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw_line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |kind| AliasError { line, kind };
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| err(AliasErrorKind::MissingSeparator))?;
            let key = key.trim();
            let kind = CommandKind::from_key(key)
                .ok_or_else(|| err(AliasErrorKind::UnknownKey(key.to_string())))?;
            let alias = Alias::new(kind, value).map_err(err)?;
            let folded = alias.text.to_ascii_lowercase();
            if let Some(existing) = aliases
                .iter()
                .find(|a| a.text.to_ascii_lowercase() == folded)
            {
                if existing.kind != kind {
                    return Err(err(AliasErrorKind::Ambiguous(alias.text)));
                }
                continue;
            }
            aliases.push(alias);
        }
        let story_tags = aliases
            .iter()
            .filter(|a| a.kind == CommandKind::Story)
            .map(|a| a.text.clone())
            .collect();
        Ok(CommandAliases {
            aliases,
            story_tags,
        })
    }

    pub fn load(path: &Path) -> Result<Self, AliasError> {
        let source = std::fs::read_to_string(path).map_err(|e| AliasError {
            line: 0,
            kind: AliasErrorKind::Io(format!("{}: {e}", path.display())),
        })?;
        Self::parse(&source)
    }

    pub fn aliases(&self) -> &[Alias] {
        &self.aliases
    }

    pub fn story_tags(&self) -> &[String] {
        &self.story_tags
    }
}

/// `"<what> line N: "`, or nothing for errors not tied to a line (line 0).
pub(crate) fn line_prefix(what: &str, line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!("{what} line {line}: ")
    }
}

/// Trims the text and collapses every run of whitespace to one ASCII space.
pub fn normalize_comment(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

// ASCII letters compare case-insensitively; everything else byte-exact.
fn strip_prefix_ci<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    let head = text.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix)
        .then(|| &text[prefix.len()..])
}

fn strip_suffix_ci<'a>(text: &'a str, suffix: &str) -> Option<&'a str> {
    let cut = text.len().checked_sub(suffix.len())?;
    let tail = text.get(cut..)?;
    tail.eq_ignore_ascii_case(suffix).then(|| &text[..cut])
}

/// Classifies one comment. Never fails: anything unrecognized becomes a
/// verse attempt while a game round is running and plain chat otherwise.
pub fn parse_comment(text: &str, game_active: bool, aliases: &CommandAliases) -> Command {
    let text = normalize_comment(text);

    for alias in &aliases.aliases {
        if let Pattern::Whole(word) = &alias.pattern {
            if text.eq_ignore_ascii_case(word) {
                return match alias.kind {
                    CommandKind::ReleaseLotus => Command::ReleaseLotus,
                    CommandKind::DashLotus => Command::DashLotus,
                    CommandKind::ShineLotus => Command::ShineLotus,
                    CommandKind::FeedFish => Command::FeedFish,
                    CommandKind::HitLotus | CommandKind::Story => unreachable!(),
                };
            }
        }
    }

    for alias in &aliases.aliases {
        if let Pattern::Target { prefix, suffix } = &alias.pattern {
            let target = strip_prefix_ci(&text, prefix).and_then(|rest| strip_suffix_ci(rest, suffix));
            if let Some(target) = target {
                let target = target.trim();
                if !target.is_empty() {
                    return Command::HitLotus(target.to_string());
                }
            }
        }
    }

    for tag in &aliases.story_tags {
        if let Some(rest) = strip_prefix_ci(&text, tag) {
            return Command::Story(rest.trim().to_string());
        }
    }

    if game_active {
        Command::Verse(text)
    } else {
        Command::Plain(text)
    }
}

/// Price tiers for gifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GiftTiers {
    /// Gifts at or above this amount grant a story entitlement; anything
    /// below sets off a firework.
    pub story_threshold: Cny,
}

impl Default for GiftTiers {
    fn default() -> Self {
        GiftTiers {
            story_threshold: Cny::from_yuan(10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GiftEffect {
    Firework,
    StoryEntitlement {
        /// Story text that accompanied the gift, if any; redeemed at once.
        pending_story: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("gift amount {0} is not positive")]
pub struct NonPositiveGift(pub Cny);

pub fn classify_gift(
    amount: Cny,
    pending_text: Option<&str>,
    tiers: &GiftTiers,
) -> Result<GiftEffect, NonPositiveGift> {
    if !amount.is_positive() {
        tracing::warn!(%amount, "rejected non-positive gift");
        return Err(NonPositiveGift(amount));
    }
    if amount < tiers.story_threshold {
        Ok(GiftEffect::Firework)
    } else {
        Ok(GiftEffect::StoryEntitlement {
            pending_story: pending_text.map(str::to_string),
        })
    }
}
