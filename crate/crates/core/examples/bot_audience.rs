//! Runs a scripted bot audience against an in-memory server with the clock
//! paused, so ten minutes of session time take seconds.
//!
//! ```text
//! cargo run --release --example bot_audience -- 40 600
//! ```

use std::time::Duration;

use mrsls::audience::{simulate_audience, AudienceScript};
use mrsls::server::{Server, ServerOptions};
use mrsls::session::SessionConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let bots = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let seconds = args.next().and_then(|a| a.parse().ok()).unwrap_or(600);

    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .start_paused(true)
        .build()
        .unwrap();
    rt.block_on(async {
        let config = SessionConfig::demo();
        let server = Server::start(config.clone(), ServerOptions::new("bots", 7), None).unwrap();
        let handle = server.handle();
        let script = AudienceScript::new(bots, Duration::from_secs(seconds), 7, config.corpus.clone());
        let report = simulate_audience(script, move |_| {
            let handle = handle.clone();
            async move { Ok(handle.connect_in_memory()) }
        })
        .await;
        let summary = server.shutdown().await.unwrap();
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
        println!(
            "{} ticks, {} events, {} rounds finished, ledger {} CNY",
            summary.ticks,
            summary.events,
            summary.finales.len(),
            summary.ledger.total()
        );
    });
}
