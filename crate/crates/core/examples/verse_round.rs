//! Plays a verse round against the sample corpus: a handful of viewers
//! recite lines about flowers until the count passes the threshold.

use mrsls::chatparse::ViewerId;
use mrsls::versegame::{Corpus, GameState, Topic};

fn main() {
    let corpus = Corpus::sample();
    let topic = Topic::parse("花");
    let mut game = GameState::new(5);
    game.start_game(topic.clone(), 300 * 30, 0).unwrap();

    let players = [("v1", "ada"), ("v2", "bo"), ("v3", "chen")];
    let lines: Vec<&str> = corpus.verses_on(&topic).take(8).collect();
    let mut tick = 0;
    for (i, line) in lines.iter().enumerate() {
        let (id, name) = players[i % players.len()];
        tick += 45;
        let result = game.submit_verse(&corpus, &ViewerId::new(id), name, line, tick);
        println!("{name:>4}: {line} -> {result:?}");
        // someone always repeats the last line
        let repeat = game.submit_verse(&corpus, &ViewerId::new("v9"), "echo", line, tick);
        println!("echo: {line} -> {repeat:?}");
        if let Some(finale) = game.finish_game(tick) {
            println!("round over: {:?} with {} verses", finale.phase, finale.accepted);
            for entry in finale.top3 {
                println!("  {} {}", entry.name, entry.score);
            }
            break;
        }
    }
}
