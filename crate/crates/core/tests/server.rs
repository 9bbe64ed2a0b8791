use std::time::Duration;

use futures::{SinkExt, StreamExt};
use mrsls::client::{self, ClientError, ClientReceiver};
use mrsls::money::Cny;
use mrsls::protocol::{decode_server, encode_client, ClientMessage, ServerMessage, Snapshot};
use mrsls::server::{Server, ServerOptions};
use mrsls::session::{read_log, SessionConfig};
use tokio::io::DuplexStream;
use tokio_tungstenite::tungstenite::Message;

fn start(options: ServerOptions) -> Server {
    Server::start(SessionConfig::demo(), options, None).unwrap()
}

fn options() -> ServerOptions {
    ServerOptions::new("test", 1)
}

async fn next_snapshot(rx: &mut ClientReceiver<DuplexStream>) -> Snapshot {
    loop {
        match rx.next().await.unwrap() {
            Some(ServerMessage::Snapshot(s)) => return s,
            Some(_) => continue,
            None => panic!("closed while waiting for a snapshot"),
        }
    }
}

/// Next message that is not a snapshot.
async fn next_reply(rx: &mut ClientReceiver<DuplexStream>) -> Option<ServerMessage> {
    loop {
        match rx.next().await.unwrap() {
            Some(ServerMessage::Snapshot(_)) => continue,
            other => return other,
        }
    }
}

fn error_code(msg: Option<ServerMessage>) -> String {
    match msg {
        Some(ServerMessage::Error { code, .. }) => code,
        other => panic!("expected an error, got {other:?}"),
    }
}

#[tokio::test(start_paused = true)]
async fn first_message_must_be_hello() {
    let server = start(options());
    let (mut tx, mut rx) = client::raw(server.handle().connect_in_memory());
    tx.send(&ClientMessage::comment("release lotus")).await.unwrap();
    assert_eq!(error_code(rx.next().await.unwrap()), "protocol");
    assert!(rx.next().await.unwrap().is_none());
    server.shutdown().await.unwrap();
}

#[tokio::test(start_paused = true)]
async fn display_name_limits() {
    let server = start(options());
    let handle = server.handle();
    let long = "x".repeat(33);
    for bad in ["", "   ", long.as_str()] {
        match client::connect(handle.connect_in_memory(), bad).await {
            Err(ClientError::Refused { code, .. }) => assert_eq!(code, "bad_name"),
            other => panic!("{bad:?} accepted: {:?}", other.map(|w| w.2)),
        }
    }
    let ok = "莲".repeat(32);
    assert!(client::connect(handle.connect_in_memory(), &ok).await.is_ok());
    server.shutdown().await.unwrap();
}

#[tokio::test(start_paused = true)]
async fn silent_clients_time_out() {
    let mut opts = options();
    opts.hello_timeout = Duration::from_secs(2);
    let server = start(opts);
    let handle = server.handle();
    let (_tx, mut rx) = client::raw(handle.connect_in_memory());
    assert!(rx.next().await.unwrap().is_none());

    // a length prefix with no body behind it
    let mut stream = handle.connect_in_memory();
    tokio::io::AsyncWriteExt::write_all(&mut stream, &100u32.to_be_bytes()).await.unwrap();
    let (_tx, mut rx) = client::raw(stream);
    assert_eq!(error_code(rx.next().await.unwrap()), "timeout");
    server.shutdown().await.unwrap();
}

#[tokio::test(start_paused = true)]
async fn welcome_then_gap_free_snapshots() {
    let server = start(options());
    let (_tx, mut rx, welcome) = client::connect(server.handle().connect_in_memory(), "ada")
        .await
        .unwrap();
    assert_eq!(welcome.viewer_id.as_str(), "v1");
    assert_eq!(welcome.session_id, "test");
    assert_eq!(welcome.tick_rate, 30);
    assert_eq!(welcome.image_size, [1920, 1080]);
    let first = next_snapshot(&mut rx).await;
    let mut last = first.seq;
    for _ in 0..60 {
        let s = next_snapshot(&mut rx).await;
        assert_eq!(s.seq, last + 1);
        assert_eq!(s.tick, s.seq);
        last = s.seq;
    }
    server.shutdown().await.unwrap();
}

#[tokio::test(start_paused = true)]
async fn late_joiner_gets_current_state_first() {
    let server = start(options());
    let handle = server.handle();
    let (mut tx, mut rx, _) = client::connect(handle.connect_in_memory(), "early").await.unwrap();
    tx.send(&ClientMessage::comment("release lotus")).await.unwrap();
    loop {
        let s = next_snapshot(&mut rx).await;
        if s.tick >= 45 {
            break;
        }
    }
    let (_tx2, mut rx2, _) = client::connect(handle.connect_in_memory(), "late").await.unwrap();
    let first = next_snapshot(&mut rx2).await;
    assert!(first.tick >= 45);
    let lotus = first.entities.iter().find(|e| e.kind == "lotus").expect("lotus visible");
    assert_eq!(lotus.owner.as_deref(), Some("early"));
    let second = next_snapshot(&mut rx2).await;
    assert_eq!(second.seq, first.seq + 1);
    server.shutdown().await.unwrap();
}

#[tokio::test(start_paused = true)]
async fn refused_inputs_get_private_notices() {
    let log = tempfile::NamedTempFile::new().unwrap();
    let writer = std::io::BufWriter::new(log.reopen().unwrap());
    let server = Server::start(SessionConfig::demo(), options(), Some(Box::new(writer))).unwrap();
    let (mut tx, mut rx, _) = client::connect(server.handle().connect_in_memory(), "ada")
        .await
        .unwrap();

    tx.send(&ClientMessage::comment("a".repeat(501))).await.unwrap();
    match next_reply(&mut rx).await {
        Some(ServerMessage::Notice { notice, .. }) => assert!(notice.text.contains("500")),
        other => panic!("{other:?}"),
    }
    tx.send(&ClientMessage::gift(Cny::ZERO)).await.unwrap();
    match next_reply(&mut rx).await {
        Some(ServerMessage::Notice { notice, .. }) => assert!(notice.text.contains("positive")),
        other => panic!("{other:?}"),
    }
    // burst of two, then the bucket is empty
    for i in 0..3 {
        tx.send(&ClientMessage::comment(format!("hello {i}"))).await.unwrap();
    }
    match next_reply(&mut rx).await {
        Some(ServerMessage::Notice { notice, .. }) => assert!(notice.text.contains("slow down")),
        other => panic!("{other:?}"),
    }
    tokio::time::sleep(Duration::from_secs(1)).await;
    tx.send(&ClientMessage::comment("hello again")).await.unwrap();
    tokio::time::sleep(Duration::from_millis(100)).await;

    let summary = server.shutdown().await.unwrap();
    assert_eq!(summary.events, 3);
    let parsed = read_log(std::io::BufReader::new(std::fs::File::open(log.path()).unwrap())).unwrap();
    let seqs: Vec<u64> = parsed.events.iter().map(|e| e.seq).collect();
    assert_eq!(seqs, [1, 2, 3]);
}

#[tokio::test(start_paused = true)]
async fn malformed_frames_and_repeat_hello() {
    let server = start(options());
    let (mut tx, mut rx, _) = client::connect(server.handle().connect_in_memory(), "ada")
        .await
        .unwrap();
    tx.send_raw("{not json".into()).await.unwrap();
    assert_eq!(error_code(next_reply(&mut rx).await), "bad_message");
    tx.send(&ClientMessage::hello("ada")).await.unwrap();
    assert_eq!(error_code(next_reply(&mut rx).await), "protocol");
    tx.send(&ClientMessage::ping(Some(9))).await.unwrap();
    match next_reply(&mut rx).await {
        Some(ServerMessage::Pong { nonce, .. }) => assert_eq!(nonce, Some(9)),
        other => panic!("{other:?}"),
    }
    server.shutdown().await.unwrap();
}

#[tokio::test(start_paused = true)]
async fn resync_resends_latest_snapshot() {
    let server = start(options());
    let (mut tx, mut rx, _) = client::connect(server.handle().connect_in_memory(), "ada")
        .await
        .unwrap();
    let s = next_snapshot(&mut rx).await;
    tx.send(&ClientMessage::resync()).await.unwrap();
    // the resent frame repeats a seq already seen or the one just broadcast
    let mut seen = vec![s.seq];
    for _ in 0..3 {
        seen.push(next_snapshot(&mut rx).await.seq);
    }
    assert!(seen.windows(2).any(|w| w[1] <= w[0]), "{seen:?}");
    server.shutdown().await.unwrap();
}

#[tokio::test(start_paused = true)]
async fn lagging_client_is_dropped_others_keep_going() {
    let mut opts = options();
    opts.backlog = 4;
    opts.max_ticks = Some(3000);
    let server = start(opts);
    let handle = server.handle();
    // connects, then never reads
    let (_slow_tx, _slow_rx, _) = client::connect(handle.connect_in_memory(), "slow").await.unwrap();
    let (_tx, mut rx, _) = client::connect(handle.connect_in_memory(), "fast").await.unwrap();
    let mut last = next_snapshot(&mut rx).await.seq;
    while let Some(msg) = rx.next().await.unwrap() {
        if let ServerMessage::Snapshot(s) = msg {
            assert_eq!(s.seq, last + 1);
            last = s.seq;
        }
    }
    let summary = server.finish().await.unwrap();
    assert_eq!(summary.slow_disconnects, 1);
    assert_eq!(last, 3000);
}

#[tokio::test]
async fn websocket_transport() {
    let server = start(options());
    let handle = server.handle();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let accept = {
        let handle = handle.clone();
        tokio::spawn(async move { handle.serve_tcp(listener).await })
    };
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/"))
        .await
        .unwrap();
    ws.send(Message::text(encode_client(&ClientMessage::hello("web"))))
        .await
        .unwrap();
    ws.send(Message::text(encode_client(&ClientMessage::comment("release lotus"))))
        .await
        .unwrap();
    let mut got_welcome = false;
    let mut lotus_seen = false;
    while let Some(msg) = ws.next().await {
        let text = match msg.unwrap() {
            Message::Text(t) => t,
            _ => continue,
        };
        match decode_server(&text).unwrap() {
            ServerMessage::Welcome { viewer_id, .. } => {
                assert!(!got_welcome);
                assert_eq!(viewer_id.as_str(), "v1");
                got_welcome = true;
            }
            ServerMessage::Snapshot(s) => {
                assert!(got_welcome);
                if s.entities.iter().any(|e| e.kind == "lotus" && e.owner.as_deref() == Some("web")) {
                    lotus_seen = true;
                    break;
                }
            }
            other => panic!("{other:?}"),
        }
    }
    assert!(lotus_seen);
    let summary = server.shutdown().await.unwrap();
    assert_eq!(summary.events, 1);
    accept.await.unwrap().unwrap();
}

#[tokio::test]
async fn framed_transport_over_tcp() {
    let server = start(options());
    let handle = server.handle();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn({
        let handle = handle.clone();
        async move { handle.serve_tcp(listener).await }
    });
    let stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    let (mut tx, mut rx, welcome) = client::connect(stream, "tcp").await.unwrap();
    assert_eq!(welcome.viewer_id.as_str(), "v1");
    tx.send(&ClientMessage::ping(None)).await.unwrap();
    loop {
        match rx.next().await.unwrap() {
            Some(ServerMessage::Pong { nonce: None, .. }) => break,
            Some(ServerMessage::Snapshot(_)) => {}
            other => panic!("{other:?}"),
        }
    }
    assert_eq!(handle.client_count(), 1);
    server.shutdown().await.unwrap();
}
