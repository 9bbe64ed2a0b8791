//! Scripted bot audiences for load tests and demos.
//!
//! Each bot draws its whole behaviour from its own ChaCha stream seeded
//! from the script seed and its index: when to act and what to send. Given
//! the same script the bots send the same messages at the same offsets, so
//! the sent-side numbers in the report are reproducible. What the server
//! makes of them can still vary with how concurrent sends interleave.

use std::collections::BTreeMap;
use std::future::Future;
use std::io;
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tokio::io::{AsyncRead, AsyncWrite};
use tokio::sync::Mutex;
use tokio::time::Instant;

use crate::client::{connect, ClientReceiver};
use crate::money::Cny;
use crate::protocol::{decode_server, ClientMessage, ServerMessage};
use crate::session::ScheduledRound;
use crate::versegame::{Corpus, Phase, Topic};

/// Relative weights of bot actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMix {
    pub release: u32,
    pub dash: u32,
    pub hit: u32,
    pub shine: u32,
    pub feed_fish: u32,
    pub small_gift: u32,
    pub story_gift: u32,
    pub verse: u32,
    pub chat: u32,
}

impl Default for FeatureMix {
    fn default() -> Self {
        FeatureMix {
            release: 6,
            dash: 12,
            hit: 8,
            shine: 10,
            feed_fish: 8,
            small_gift: 4,
            story_gift: 2,
            verse: 40,
            chat: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AudienceScript {
    pub bots: usize,
    pub duration: Duration,
    pub seed: u64,
    /// Mean pause between one bot's actions.
    pub mean_gap: Duration,
    pub mix: FeatureMix,
    /// Verses the bots know.
    pub corpus: Arc<Corpus>,
    /// The server's round schedule, so bots recite on topic.
    pub schedule: Vec<ScheduledRound>,
    pub round_duration_s: f64,
}

impl AudienceScript {
    pub fn new(bots: usize, duration: Duration, seed: u64, corpus: Arc<Corpus>) -> Self {
        let defaults = crate::session::SessionSettings::default();
        AudienceScript {
            bots,
            duration,
            seed,
            mean_gap: Duration::from_secs(5),
            mix: FeatureMix::default(),
            corpus,
            schedule: defaults.schedule,
            round_duration_s: defaults.game.duration_s,
        }
    }

    fn topic_at(&self, t: f64) -> Option<Topic> {
        self.schedule
            .iter()
            .find(|r| t >= r.start_s && t < r.start_s + self.round_duration_s)
            .map(|r| Topic::parse(&r.topic))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub topic: String,
    pub phase: Phase,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudienceReport {
    pub bots: usize,
    pub seed: u64,
    pub duration_s: f64,
    pub connected: usize,
    pub connect_errors: usize,
    /// Error count per bot name; bots without errors are omitted.
    pub bot_errors: BTreeMap<String, u64>,
    pub events_sent: u64,
    pub events_per_sec: f64,
    /// Sent actions by feature.
    pub usage: BTreeMap<String, u64>,
    pub notices_received: u64,
    pub snapshots_received: u64,
    pub game_outcomes: Vec<GameOutcome>,
    pub note: String,
}

impl AudienceReport {
    /// True when there were bots and none could connect.
    pub fn all_failed(&self) -> bool {
        self.bots > 0 && self.connected == 0
    }
}

#[derive(Default)]
struct BotTally {
    connected: bool,
    errors: u64,
    sent: u64,
    usage: BTreeMap<String, u64>,
    notices: u64,
    snapshots: u64,
    outcomes: Vec<GameOutcome>,
}

fn bot_name(i: usize) -> String {
    format!("bot-{i:02}")
}

const CHATTER: [&str; 6] = [
    "hello from the lake",
    "好美的西湖",
    "the willows look lovely",
    "晚上好",
    "what a view",
    "加油",
];

enum Action {
    Send(&'static str, ClientMessage),
    Idle,
}

fn choose_action(
    rng: &mut ChaCha8Rng,
    script: &AudienceScript,
    me: usize,
    t: f64,
    pending_story: &mut bool,
    first: bool,
) -> Action {
    if first {
        return Action::Send("release_lotus", ClientMessage::comment("release lotus"));
    }
    if *pending_story {
        *pending_story = false;
        let n = rng.random_range(1..1000);
        return Action::Send(
            "story",
            ClientMessage::comment(format!("#MyStory {} remembers the lake, visit {n}", bot_name(me))),
        );
    }
    let m = script.mix;
    let weights = [
        m.release, m.dash, m.hit, m.shine, m.feed_fish, m.small_gift, m.story_gift, m.verse, m.chat,
    ];
    let total: u32 = weights.iter().sum();
    if total == 0 {
        return Action::Idle;
    }
    let mut roll = rng.random_range(0..total);
    let mut pick = 0;
    while roll >= weights[pick] {
        roll -= weights[pick];
        pick += 1;
    }
    match pick {
        0 => Action::Send("release_lotus", ClientMessage::comment("release lotus")),
        1 => Action::Send("dash_lotus", ClientMessage::comment("dash my lotus")),
        2 => {
            if script.bots < 2 {
                return Action::Send("dash_lotus", ClientMessage::comment("dash my lotus"));
            }
            let mut other = rng.random_range(0..script.bots - 1);
            if other >= me {
                other += 1;
            }
            Action::Send(
                "hit_lotus",
                ClientMessage::comment(format!("hit {} with my lotus", bot_name(other))),
            )
        }
        3 => Action::Send("shine_lotus", ClientMessage::comment("shine my lotus")),
        4 => Action::Send("feed_fish", ClientMessage::comment("feed fish")),
        5 => {
            let fen = rng.random_range(1..1000);
            Action::Send("small_gift", ClientMessage::gift(Cny::from_fen(fen)))
        }
        6 => {
            let fen = rng.random_range(1000..=3000);
            *pending_story = true;
            Action::Send("story_gift", ClientMessage::gift(Cny::from_fen(fen)))
        }
        7 => match script.topic_at(t) {
            Some(topic) => {
                let verses: Vec<&str> = script.corpus.verses_on(&topic).collect();
                if verses.is_empty() {
                    return Action::Idle;
                }
                let verse = verses[rng.random_range(0..verses.len())];
                Action::Send("verse", ClientMessage::comment(verse))
            }
            None => {
                let line = CHATTER[rng.random_range(0..CHATTER.len())];
                Action::Send("chat", ClientMessage::comment(line))
            }
        },
        _ => {
            let line = CHATTER[rng.random_range(0..CHATTER.len())];
            Action::Send("chat", ClientMessage::comment(line))
        }
    }
}

// Snapshots are frequent; only look inside one when its head shows notices
// or when this bot tracks the game and a second has passed.
fn inspect_frame(frame: &[u8], tally: &mut BotTally, track_game: bool, me: &crate::chatparse::ViewerId) {
    let head = &frame[..frame.len().min(256)];
    let is_snapshot = head.starts_with(br#"{"type":"snapshot""#);
    if is_snapshot {
        tally.snapshots += 1;
        let quiet = head.windows(13).any(|w| w == br#""notices":[],"#);
        if quiet && !(track_game && tally.snapshots.is_multiple_of(30)) {
            return;
        }
    }
    let Ok(text) = std::str::from_utf8(frame) else {
        tally.errors += 1;
        return;
    };
    match decode_server(text) {
        Ok(ServerMessage::Snapshot(s)) => {
            tally.notices += s.notices.iter().filter(|n| n.is_for(me)).count() as u64;
            if track_game && matches!(s.game.phase, Phase::Won | Phase::Lost) {
                let outcome = GameOutcome {
                    topic: s.game.topic.clone(),
                    phase: s.game.phase,
                    count: s.game.count,
                };
                if tally.outcomes.last() != Some(&outcome) {
                    tally.outcomes.push(outcome);
                }
            }
        }
        Ok(ServerMessage::Notice { .. }) => tally.notices += 1,
        Ok(ServerMessage::Error { .. }) => tally.errors += 1,
        Ok(_) => {}
        Err(_) => tally.errors += 1,
    }
}

async fn read_frames<S: AsyncRead + AsyncWrite + Unpin>(
    mut rx: ClientReceiver<S>,
    tally: Arc<Mutex<BotTally>>,
    track_game: bool,
    me: crate::chatparse::ViewerId,
) {
    loop {
        match rx.next_frame().await {
            Ok(Some(frame)) => inspect_frame(&frame, &mut *tally.lock().await, track_game, &me),
            Ok(None) => break,
            Err(_) => {
                tally.lock().await.errors += 1;
                break;
            }
        }
    }
}

async fn run_bot<S>(
    me: usize,
    stream: io::Result<S>,
    script: Arc<AudienceScript>,
    start: Instant,
) -> BotTally
where
    S: AsyncRead + AsyncWrite + Unpin + Send + 'static,
{
    let tally = Arc::new(Mutex::new(BotTally::default()));
    let stream = match stream {
        Ok(s) => s,
        Err(e) => {
            tracing::debug!(bot = me, error = %e, "connect failed");
            tally.lock().await.errors += 1;
            return unwrap_tally(tally).await;
        }
    };
    let (mut tx, rx, welcome) = match connect(stream, &bot_name(me)).await {
        Ok(parts) => parts,
        Err(e) => {
            tracing::debug!(bot = me, error = %e, "handshake failed");
            tally.lock().await.errors += 1;
            return unwrap_tally(tally).await;
        }
    };
    tally.lock().await.connected = true;
    let reader = tokio::spawn(read_frames(rx, Arc::clone(&tally), me == 0, welcome.viewer_id));

    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    rng.set_stream(me as u64 + 1);
    let mean = script.mean_gap.as_secs_f64();
    let end = script.duration.as_secs_f64();
    // first action somewhere in the first mean gap, then spaced around it
    let mut t = -rng.random_range(0.0..0.5 * mean);
    let mut pending_story = false;
    let mut first = true;
    loop {
        t += if pending_story { 1.0 } else { rng.random_range(0.5 * mean..1.5 * mean) };
        if t >= end {
            break;
        }
        let action = choose_action(&mut rng, &script, me, t, &mut pending_story, first);
        first = false;
        tokio::time::sleep_until(start + Duration::from_secs_f64(t)).await;
        if let Action::Send(feature, msg) = action {
            let ok = tx.send(&msg).await.is_ok();
            let mut tally = tally.lock().await;
            if ok {
                tally.sent += 1;
                *tally.usage.entry(feature.to_string()).or_default() += 1;
            } else {
                tally.errors += 1;
                break;
            }
        }
    }
    tokio::time::sleep_until(start + script.duration).await;
    let _ = tx.close().await;
    reader.abort();
    let _ = reader.await;
    unwrap_tally(tally).await
}

async fn unwrap_tally(tally: Arc<Mutex<BotTally>>) -> BotTally {
    std::mem::take(&mut *tally.lock().await)
}

/// Runs the script against a server. `connect` opens the transport for bot
/// `i`; it is called once per bot.
pub async fn simulate_audience<F, Fut, S>(script: AudienceScript, connect: F) -> AudienceReport
where
    F: Fn(usize) -> Fut,
    Fut: Future<Output = io::Result<S>> + Send + 'static,
    S: AsyncRead + AsyncWrite + Unpin + Send + 'static,
{
    let script = Arc::new(script);
    let start = Instant::now();
    let tasks: Vec<_> = (0..script.bots)
        .map(|i| {
            let fut = connect(i);
            let script = Arc::clone(&script);
            tokio::spawn(async move { run_bot(i, fut.await, script, start).await })
        })
        .collect();
    let mut report = AudienceReport {
        bots: script.bots,
        seed: script.seed,
        duration_s: script.duration.as_secs_f64(),
        connected: 0,
        connect_errors: 0,
        bot_errors: BTreeMap::new(),
        events_sent: 0,
        events_per_sec: 0.0,
        usage: BTreeMap::new(),
        notices_received: 0,
        snapshots_received: 0,
        game_outcomes: Vec::new(),
        note: "sent-side counts follow from the seed; received counts and outcomes \
               also depend on how concurrent sends interleave at the server"
            .into(),
    };
    for (i, task) in tasks.into_iter().enumerate() {
        let tally = match task.await {
            Ok(t) => t,
            Err(_) => BotTally {
                errors: 1,
                ..BotTally::default()
            },
        };
        if tally.connected {
            report.connected += 1;
        } else {
            report.connect_errors += 1;
        }
        if tally.errors > 0 {
            report.bot_errors.insert(bot_name(i), tally.errors);
        }
        report.events_sent += tally.sent;
        for (k, v) in tally.usage {
            *report.usage.entry(k).or_default() += v;
        }
        report.notices_received += tally.notices;
        report.snapshots_received += tally.snapshots;
        if i == 0 {
            report.game_outcomes = tally.outcomes;
        }
    }
    if report.duration_s > 0.0 {
        report.events_per_sec = report.events_sent as f64 / report.duration_s;
    }
    report
}
