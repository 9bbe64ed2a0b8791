//! Classifies a few chat comments with the bundled alias table.
//!
//! ```text
//! cargo run --example parse_commands -- "hit Bob with my lotus" "#MyStory hello"
//! ```

use mrsls::chatparse::{parse_comment, CommandAliases};

fn main() {
    let aliases = CommandAliases::default();
    let mut inputs: Vec<String> = std::env::args().skip(1).collect();
    if inputs.is_empty() {
        inputs = [
            "release lotus",
            "  Dash   MY lotus ",
            "hit Bob with my lotus",
            "用我的莲花撞小明",
            "喂鱼",
            "#MyStory we met on the broken bridge",
            "人面桃花相映红",
        ]
        .map(String::from)
        .to_vec();
    }
    for text in &inputs {
        let idle = parse_comment(text, false, &aliases);
        let in_round = parse_comment(text, true, &aliases);
        println!("{text:?}\n    no round: {idle:?}\n    in round: {in_round:?}");
    }
}
