//! Cooperative Fei Hua Ling rounds.
//!
//! During a round viewers recite classical verse lines containing the
//! round's topic token. A line scores when it is in the corpus and nobody
//! has recited it yet this round; the audience wins when the count of unique
//! lines strictly exceeds the threshold before the clock runs out.
//!
//! Corpus files are UTF-8, one record per line:
//! `verse<TAB>title<TAB>author<TAB>dynasty`. Blank lines and lines starting
//! with `#` are skipped. Verses are normalized on load and must be unique.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chatparse::ViewerId;

/// True for whitespace and for the punctuation stripped from verses: ASCII
/// punctuation, General Punctuation (U+2010–U+205E), CJK Symbols and
/// Punctuation (U+3000–U+303F), vertical and compatibility forms
/// (U+FE10–U+FE6F), full-width ASCII punctuation and half-width CJK
/// punctuation (U+FF01–U+FF65, excluding letters and digits), and the
/// middle dot U+00B7.
pub fn is_verse_separator(c: char) -> bool {
    if c.is_whitespace() || c.is_ascii_punctuation() || c == '\u{00B7}' {
        return true;
    }
    let cp = c as u32;
    matches!(cp,
        0x2010..=0x205E
        | 0x3000..=0x303F
        | 0xFE10..=0xFE1F
        | 0xFE30..=0xFE6F
        | 0xFF01..=0xFF0F
        | 0xFF1A..=0xFF20
        | 0xFF3B..=0xFF40
        | 0xFF5B..=0xFF65)
}

/// Removes whitespace and punctuation, keeping every other character.
pub fn normalize_verse(text: &str) -> String {
    text.chars().filter(|c| !is_verse_separator(*c)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerseSource {
    pub title: String,
    pub author: String,
    pub dynasty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}{kind}", crate::chatparse::line_prefix("corpus", *.line))]
pub struct CorpusError {
    pub line: usize,
    pub kind: CorpusErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusErrorKind {
    #[error("expected 4 tab-separated fields, found {0}")]
    FieldCount(usize),
    #[error("verse is empty after normalization")]
    EmptyVerse,
    #[error("verse `{0}` already appears on line {1}")]
    Duplicate(String, usize),
    #[error("cannot read corpus: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    entries: BTreeMap<String, VerseSource>,
}

/// The bundled sample corpus.
pub const SAMPLE_CORPUS: &str = include_str!("../data/poems.tsv");

impl Corpus {
    pub fn sample() -> Self {
        Corpus::parse(SAMPLE_CORPUS).expect("bundled corpus is valid")
    }

    pub fn parse(source: &str) -> Result<Self, CorpusError> {
        let mut entries = BTreeMap::new();
        let mut first_line = BTreeMap::new();
        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let raw = raw.trim_end_matches('\r');
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() != 4 {
                return Err(CorpusError {
                    line,
                    kind: CorpusErrorKind::FieldCount(fields.len()),
                });
            }
            let verse = normalize_verse(fields[0]);
            if verse.is_empty() {
                return Err(CorpusError {
                    line,
                    kind: CorpusErrorKind::EmptyVerse,
                });
            }
            if let Some(&earlier) = first_line.get(&verse) {
                return Err(CorpusError {
                    line,
                    kind: CorpusErrorKind::Duplicate(verse, earlier),
                });
            }
            first_line.insert(verse.clone(), line);
            entries.insert(
                verse,
                VerseSource {
                    title: fields[1].trim().to_string(),
                    author: fields[2].trim().to_string(),
                    dynasty: fields[3].trim().to_string(),
                },
            );
        }
        Ok(Corpus { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|e| CorpusError {
            line: 0,
            kind: CorpusErrorKind::Io(format!("{}: {e}", path.display())),
        })?;
        Self::parse(&text)
    }

    pub fn from_verses<I, S>(verses: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let text: String = verses
            .into_iter()
            .map(|v| format!("{}\t-\t-\t-\n", v.as_ref()))
            .collect();
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Looks up an already-normalized verse.
    pub fn get(&self, verse: &str) -> Option<&VerseSource> {
        self.entries.get(verse)
    }

    pub fn contains(&self, verse: &str) -> bool {
        self.entries.contains_key(verse)
    }

    pub fn verses(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Corpus lines matching any of the topic tokens.
    pub fn verses_on<'a>(&'a self, topic: &'a Topic) -> impl Iterator<Item = &'a str> + 'a {
        self.verses().filter(move |v| topic.matches(v))
    }

    pub fn canonical_text(&self) -> String {
        self.entries
            .iter()
            .map(|(v, s)| format!("{v}\t{}\t{}\t{}\n", s.title, s.author, s.dynasty))
            .collect()
    }
}

/// A round's theme: any one of the tokens must appear in the verse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub tokens: Vec<String>,
}

impl Topic {
    /// Builds a topic from tokens; empty tokens are dropped.
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Topic {
            tokens: tokens
                .into_iter()
                .map(|t| normalize_verse(t.as_ref()))
                .filter(|t| !t.is_empty())
                .collect(),
        }
    }

    /// Parses `"杭州,江南"` or `"杭州/江南"`.
    pub fn parse(spec: &str) -> Self {
        Topic::new(spec.split([',', '/', '，']))
    }

    pub fn label(&self) -> String {
        self.tokens.join("/")
    }

    pub fn matches(&self, normalized_verse: &str) -> bool {
        self.tokens.iter().any(|t| normalized_verse.contains(t.as_str()))
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Running,
    Won,
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(rename_all = "snake_case")]
pub enum Rejected {
    #[error("that line does not contain the topic")]
    NoTopicToken,
    #[error("that line is not in the poem collection")]
    NotInCorpus,
    #[error("that line was already recited this round")]
    Duplicate,
    #[error("no verse round is running")]
    GameOver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("a verse round is already running")]
pub struct AlreadyRunning;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptedVerse {
    pub verse: String,
    pub viewer: ViewerId,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct PlayerScore {
    display_name: String,
    score: u32,
    first_tick: u64,
    first_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub name: String,
    pub score: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameSettings {
    pub duration_s: f64,
    /// The round is won when the unique-verse count strictly exceeds this.
    pub threshold: u32,
}

impl Default for GameSettings {
    fn default() -> Self {
        GameSettings {
            duration_s: 300.0,
            threshold: 20,
        }
    }
}

/// Outcome of a finished round; the top three ride the finale boat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finale {
    pub phase: Phase,
    pub accepted: usize,
    pub top3: Vec<ScoreEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameState {
    phase: Phase,
    topic: Topic,
    started_at: u64,
    duration: u64,
    threshold: u32,
    accepted: Vec<AcceptedVerse>,
    accepted_set: BTreeSet<String>,
    scores: BTreeMap<ViewerId, PlayerScore>,
}

impl GameState {
    pub fn new(threshold: u32) -> Self {
        GameState {
            phase: Phase::Idle,
            topic: Topic { tokens: Vec::new() },
            started_at: 0,
            duration: 0,
            threshold,
            accepted: Vec::new(),
            accepted_set: BTreeSet::new(),
            scores: BTreeMap::new(),
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn topic(&self) -> &Topic {
        &self.topic
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    pub fn started_at(&self) -> u64 {
        self.started_at
    }

    pub fn expiry(&self) -> u64 {
        self.started_at + self.duration
    }

    pub fn remaining_ticks(&self, now: u64) -> u64 {
        match self.phase {
            Phase::Running => self.expiry().saturating_sub(now),
            _ => 0,
        }
    }

    pub fn accepted(&self) -> &[AcceptedVerse] {
        &self.accepted
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted.len()
    }

    pub fn score_of(&self, viewer: &ViewerId) -> u32 {
        self.scores.get(viewer).map_or(0, |s| s.score)
    }

    pub fn total_score(&self) -> u64 {
        self.scores.values().map(|s| s.score as u64).sum()
    }

    pub fn is_running(&self) -> bool {
        self.phase == Phase::Running
    }

    /// Opens a round. A finished round is cleared first; a running one is
    /// left alone and the call rejected.
    pub fn start_game(
        &mut self,
        topic: Topic,
        duration_ticks: u64,
        now: u64,
    ) -> Result<(), AlreadyRunning> {
        if self.phase == Phase::Running {
            return Err(AlreadyRunning);
        }
        self.reset();
        self.topic = topic;
        self.started_at = now;
        self.duration = duration_ticks;
        self.phase = Phase::Running;
        Ok(())
    }

    /// Returns to idle, dropping the previous round's results.
    pub fn reset(&mut self) {
        let threshold = self.threshold;
        *self = GameState::new(threshold);
    }

    pub fn submit_verse(
        &mut self,
        corpus: &Corpus,
        viewer: &ViewerId,
        display_name: &str,
        text: &str,
        now: u64,
    ) -> Result<u32, Rejected> {
        if self.phase != Phase::Running || now >= self.expiry() {
            return Err(Rejected::GameOver);
        }
        let verse = normalize_verse(text);
        if !self.topic.matches(&verse) {
            return Err(Rejected::NoTopicToken);
        }
        if !corpus.contains(&verse) {
            return Err(Rejected::NotInCorpus);
        }
        if self.accepted_set.contains(&verse) {
            return Err(Rejected::Duplicate);
        }
        let index = self.accepted.len();
        self.accepted_set.insert(verse.clone());
        self.accepted.push(AcceptedVerse {
            verse,
            viewer: viewer.clone(),
            tick: now,
        });
        let entry = self
            .scores
            .entry(viewer.clone())
            .or_insert_with(|| PlayerScore {
                display_name: display_name.to_string(),
                score: 0,
                first_tick: now,
                first_index: index,
            });
        entry.display_name = display_name.to_string();
        entry.score += 1;
        Ok(entry.score)
    }

    /// Top three by score; ties go to whoever scored first.
    pub fn scoreboard(&self) -> Vec<ScoreEntry> {
        let mut players: Vec<&PlayerScore> = self.scores.values().collect();
        players.sort_by_key(|p| (Reverse(p.score), p.first_tick, p.first_index));
        players
            .into_iter()
            .take(3)
            .map(|p| ScoreEntry {
                name: p.display_name.clone(),
                score: p.score,
            })
            .collect()
    }

    /// True when the round should end now: out of time or over threshold.
    pub fn is_due(&self, now: u64) -> bool {
        self.phase == Phase::Running
            && (now >= self.expiry() || self.accepted.len() > self.threshold as usize)
    }

    /// Ends a due round, returning the outcome for the finale. `None` if
    /// the round is not running or not yet due.
    pub fn finish_game(&mut self, now: u64) -> Option<Finale> {
        if !self.is_due(now) {
            return None;
        }
        self.phase = if self.accepted.len() > self.threshold as usize {
            Phase::Won
        } else {
            Phase::Lost
        };
        Some(Finale {
            phase: self.phase,
            accepted: self.accepted.len(),
            top3: self.scoreboard(),
        })
    }
}
