//! Feeds gifts and a story through a session and prints the effects and the
//! ledger.

use mrsls::chatparse::{ChatEvent, EventKind, ViewerId};
use mrsls::money::Cny;
use mrsls::session::{Session, SessionConfig};

fn main() {
    let mut session = Session::new(SessionConfig::demo(), 1);
    let events = [
        ("v1", "ada", EventKind::Gift { amount: Cny::from_fen(500) }),
        ("v2", "bo", EventKind::Gift { amount: Cny::from_yuan(15) }),
        ("v2", "bo", EventKind::Comment { text: "#MyStory we met under the willows".into() }),
        ("v3", "chen", EventKind::Comment { text: "#MyStory no gift yet".into() }),
        ("v3", "chen", EventKind::Gift { amount: Cny::from_fen(999) }),
    ];
    for (seq, (id, name, kind)) in events.into_iter().enumerate() {
        session
            .apply(&ChatEvent {
                seq: seq as u64 + 1,
                timestamp_ms: seq as u64 * 100,
                viewer_id: ViewerId::new(id),
                display_name: name.into(),
                kind,
            })
            .unwrap();
        let report = session.step();
        for notice in report.notices {
            println!("notice for {:?}: {}", notice.target, notice.text);
        }
    }
    for e in session.snapshot(0, "demo").entities {
        println!("{} {} by {}", e.kind, e.text.unwrap_or_default(), e.owner.unwrap_or_default());
    }
    let ledger = session.economy().ledger();
    ledger.write_jsonl(std::io::stdout()).unwrap();
    println!("total {} CNY", ledger.total());
}
