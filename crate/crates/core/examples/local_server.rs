//! Starts a server on a local port and drives it with one in-process
//! client for a few seconds. Connect your own client to the printed
//! address while it runs.

use std::time::Duration;

use mrsls::client;
use mrsls::protocol::{ClientMessage, ServerMessage};
use mrsls::server::{Server, ServerOptions};
use mrsls::session::SessionConfig;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut options = ServerOptions::new("local", 42);
    options.max_ticks = Some(30 * 5);
    let server = Server::start(SessionConfig::demo(), options, None)?;
    let handle = server.handle();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    println!("listening on {addr}");
    tokio::spawn({
        let handle = handle.clone();
        async move { handle.serve_tcp(listener).await }
    });

    let stream = tokio::net::TcpStream::connect(addr).await?;
    let (mut tx, mut rx, welcome) = client::connect(stream, "ada").await?;
    println!("welcome: {welcome:?}");
    tx.send(&ClientMessage::comment("release lotus")).await?;
    tokio::time::sleep(Duration::from_millis(200)).await;
    tx.send(&ClientMessage::comment("shine my lotus")).await?;

    while let Some(msg) = rx.next().await? {
        if let ServerMessage::Snapshot(s) = msg {
            if s.seq % 30 == 0 {
                let lotus = s.entities.iter().find(|e| e.kind == "lotus");
                println!(
                    "seq {} tick {}: {} entities, lotus at {:?} shining {}",
                    s.seq,
                    s.tick,
                    s.entities.len(),
                    lotus.and_then(|l| l.pos),
                    lotus.is_some_and(|l| l.shining)
                );
            }
        }
    }
    let summary = server.finish().await?;
    println!("ended at tick {}, final hash {}", summary.ticks, summary.final_hash);
    Ok(())
}
