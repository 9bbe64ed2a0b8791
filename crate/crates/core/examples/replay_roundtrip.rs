//! Records a short scripted session to a log in memory, reads it back and
//! replays it, comparing hashes.

use mrsls::chatparse::{ChatEvent, EventKind, ViewerId};
use mrsls::session::{read_log, replay, LogHeader, ReplayWriter, Session, SessionConfig};

fn main() {
    let config = SessionConfig::demo();
    let seed = 5;
    let mut session = Session::new(config.clone(), seed);
    let mut log = ReplayWriter::new(Vec::new(), LogHeader::new("example", seed, &config)).unwrap();
    let script = [
        (3, "v1", "release lotus"),
        (3, "v2", "release lotus"),
        (40, "v1", "dash my lotus"),
        (41, "v2", "shine my lotus"),
        (90, "v3", "feed fish"),
    ];
    for (seq, (tick, viewer, text)) in (1..).zip(script) {
        while session.tick() < tick {
            session.step();
        }
        let event = ChatEvent {
            seq,
            timestamp_ms: tick * 1000 / 30,
            viewer_id: ViewerId::new(viewer),
            display_name: viewer.to_uppercase(),
            kind: EventKind::Comment { text: text.into() },
        };
        log.event(session.tick(), &event).unwrap();
        session.apply(&event).unwrap();
    }
    while session.tick() < 150 {
        session.step();
    }
    let bytes = log.end(&session).unwrap();
    print!("{}", String::from_utf8_lossy(&bytes));

    let parsed = read_log(bytes.as_slice()).unwrap();
    let outcome = replay(&parsed, config, seed).unwrap();
    println!("live   {}", hex::encode(session.chain_hash()));
    println!("replay {}", outcome.chain());
    println!("match: {:?}", outcome.matches(&parsed));
}
