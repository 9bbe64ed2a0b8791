//! Minimal client for the length-prefixed transport. Used by the bot
//! audience, the examples and the integration tests.

use std::io;

use futures::stream::{SplitSink, SplitStream};
use futures::{SinkExt, StreamExt};
use thiserror::Error;
use tokio::io::{AsyncRead, AsyncWrite};
use tokio_util::bytes::{Bytes, BytesMut};
use tokio_util::codec::{Framed, LengthDelimitedCodec};

use crate::chatparse::ViewerId;
use crate::protocol::{
    decode_server, encode_client, frame_codec, ClientMessage, ProtocolError, ServerMessage,
    MAX_SERVER_FRAME,
};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("server refused: {code}: {message}")]
    Refused { code: String, message: String },
    #[error("connection closed during handshake")]
    Closed,
    #[error("expected welcome, got {0}")]
    Unexpected(String),
}

/// What the server said in its welcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Welcome {
    pub viewer_id: ViewerId,
    pub session_id: String,
    pub tick_rate: u32,
    pub background_plate: String,
    pub image_size: [u32; 2],
}

pub struct ClientSender<S> {
    sink: SplitSink<Framed<S, LengthDelimitedCodec>, Bytes>,
}

pub struct ClientReceiver<S> {
    stream: SplitStream<Framed<S, LengthDelimitedCodec>>,
}

impl<S: AsyncRead + AsyncWrite + Unpin> ClientSender<S> {
    pub async fn send(&mut self, msg: &ClientMessage) -> Result<(), ClientError> {
        self.send_raw(encode_client(msg)).await
    }

    /// Sends arbitrary text as one frame; tests use this for malformed input.
    pub async fn send_raw(&mut self, text: String) -> Result<(), ClientError> {
        self.sink.send(Bytes::from(text)).await?;
        Ok(())
    }

    pub async fn close(&mut self) -> Result<(), ClientError> {
        self.sink.close().await?;
        Ok(())
    }
}

impl<S: AsyncRead + AsyncWrite + Unpin> ClientReceiver<S> {
    /// Next raw frame; `None` when the server closed the connection.
    pub async fn next_frame(&mut self) -> Result<Option<BytesMut>, ClientError> {
        Ok(self.stream.next().await.transpose()?)
    }

    pub async fn next(&mut self) -> Result<Option<ServerMessage>, ClientError> {
        let Some(frame) = self.next_frame().await? else {
            return Ok(None);
        };
        let text = std::str::from_utf8(&frame).map_err(|_| ProtocolError::Utf8)?;
        Ok(Some(decode_server(text)?))
    }
}

/// Opens a framed connection without greeting. The caller sends `Hello`.
pub fn raw<S: AsyncRead + AsyncWrite + Unpin>(stream: S) -> (ClientSender<S>, ClientReceiver<S>) {
    let (sink, stream) = Framed::new(stream, frame_codec(MAX_SERVER_FRAME)).split();
    (ClientSender { sink }, ClientReceiver { stream })
}

/// Greets the server and waits for the welcome.
pub async fn connect<S: AsyncRead + AsyncWrite + Unpin>(
    stream: S,
    display_name: &str,
) -> Result<(ClientSender<S>, ClientReceiver<S>, Welcome), ClientError> {
    let (mut tx, mut rx) = raw(stream);
    tx.send(&ClientMessage::hello(display_name)).await?;
    match rx.next().await? {
        Some(ServerMessage::Welcome {
            viewer_id,
            session_id,
            tick_rate,
            background_plate,
            image_size,
            ..
        }) => Ok((
            tx,
            rx,
            Welcome {
                viewer_id,
                session_id,
                tick_rate,
                background_plate,
                image_size,
            },
        )),
        Some(ServerMessage::Error { code, message, .. }) => {
            Err(ClientError::Refused { code, message })
        }
        Some(other) => Err(ClientError::Unexpected(format!("{other:?}"))),
        None => Err(ClientError::Closed),
    }
}
