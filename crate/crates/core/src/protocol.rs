//! Wire messages between the server and viewer clients.
//!
//! Every message is a UTF-8 JSON object with a `type` tag and a schema
//! version `v`. On plain sockets each message travels in a frame prefixed
//! by its byte length (u32, big-endian); browser clients use WebSocket text
//! messages instead. Field names are documented in `docs/protocol.md`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;
use tokio_util::codec::LengthDelimitedCodec;

use crate::chatparse::ViewerId;
use crate::entitysim::LotusColor;
use crate::money::Cny;
use crate::scenegeo::ImagePoint;
use crate::versegame::{Phase, ScoreEntry};

pub const PROTOCOL_VERSION: u32 = 1;
/// Largest frame a client may send.
pub const MAX_CLIENT_FRAME: usize = 64 * 1024;
/// Largest frame the server sends.
pub const MAX_SERVER_FRAME: usize = 16 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported protocol version {0}")]
    Version(u32),
    #[error("frame is not UTF-8")]
    Utf8,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn version_1() -> u32 {
    PROTOCOL_VERSION
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hello {
        v: u32,
        display_name: String,
    },
    Comment {
        v: u32,
        text: String,
    },
    Gift {
        v: u32,
        amount: Cny,
    },
    Ping {
        v: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nonce: Option<u64>,
    },
    /// Asks for the latest full snapshot, e.g. after a gap in `seq`.
    Resync {
        v: u32,
    },
}

impl ClientMessage {
    pub fn hello(display_name: impl Into<String>) -> Self {
        ClientMessage::Hello {
            v: PROTOCOL_VERSION,
            display_name: display_name.into(),
        }
    }

    pub fn comment(text: impl Into<String>) -> Self {
        ClientMessage::Comment {
            v: PROTOCOL_VERSION,
            text: text.into(),
        }
    }

    pub fn gift(amount: Cny) -> Self {
        ClientMessage::Gift {
            v: PROTOCOL_VERSION,
            amount,
        }
    }

    pub fn ping(nonce: Option<u64>) -> Self {
        ClientMessage::Ping {
            v: PROTOCOL_VERSION,
            nonce,
        }
    }

    pub fn resync() -> Self {
        ClientMessage::Resync {
            v: PROTOCOL_VERSION,
        }
    }

    pub fn version(&self) -> u32 {
        match self {
            ClientMessage::Hello { v, .. }
            | ClientMessage::Comment { v, .. }
            | ClientMessage::Gift { v, .. }
            | ClientMessage::Ping { v, .. }
            | ClientMessage::Resync { v } => *v,
        }
    }
}

/// Who a notice is for: everyone, or one viewer. Serialized as the string
/// `"all"` or the viewer id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum NoticeTarget {
    All,
    Viewer(ViewerId),
}

impl Serialize for NoticeTarget {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            NoticeTarget::All => s.serialize_str("all"),
            NoticeTarget::Viewer(id) => s.serialize_str(id.as_str()),
        }
    }
}

impl<'de> Deserialize<'de> for NoticeTarget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(if s == "all" {
            NoticeTarget::All
        } else {
            NoticeTarget::Viewer(ViewerId(s))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notice {
    pub target: NoticeTarget,
    pub text: String,
}

impl Notice {
    pub fn all(text: impl Into<String>) -> Self {
        Notice {
            target: NoticeTarget::All,
            text: text.into(),
        }
    }

    pub fn to(viewer: &ViewerId, text: impl Into<String>) -> Self {
        Notice {
            target: NoticeTarget::Viewer(viewer.clone()),
            text: text.into(),
        }
    }

    pub fn is_for(&self, viewer: &ViewerId) -> bool {
        match &self.target {
            NoticeTarget::All => true,
            NoticeTarget::Viewer(v) => v == viewer,
        }
    }
}

/// One entity as clients draw it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityView {
    pub id: u64,
    pub kind: String,
    /// Owner or trigger display name, shown on the name tag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
    /// Image position; `None` if the point is behind the camera.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<ImagePoint>,
    /// Lake-plane position for water entities, meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<[f64; 2]>,
    /// Camera depth for back-to-front compositing; absent for overlays.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub shining: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub dashing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<LotusColor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<Vec<ScoreEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameView {
    pub phase: Phase,
    pub topic: String,
    pub count: usize,
    pub threshold: u32,
    pub remaining_s: f64,
}

/// Full scene state for one tick. `notices` and `game` come before the
/// entity list so light clients can read them from the head of the frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    #[serde(default = "version_1")]
    pub v: u32,
    /// Broadcast sequence number; one per tick, no gaps.
    pub seq: u64,
    pub tick: u64,
    pub session_id: String,
    pub notices: Vec<Notice>,
    pub game: GameView,
    pub scoreboard: Vec<ScoreEntry>,
    pub entities: Vec<EntityView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Welcome {
        v: u32,
        viewer_id: ViewerId,
        session_id: String,
        tick_rate: u32,
        background_plate: String,
        image_size: [u32; 2],
    },
    Snapshot(Snapshot),
    Notice {
        v: u32,
        #[serde(flatten)]
        notice: Notice,
    },
    Pong {
        v: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nonce: Option<u64>,
        tick: u64,
    },
    Error {
        v: u32,
        code: String,
        message: String,
    },
}

impl ServerMessage {
    pub fn notice(notice: Notice) -> Self {
        ServerMessage::Notice {
            v: PROTOCOL_VERSION,
            notice,
        }
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            v: PROTOCOL_VERSION,
            code: code.to_string(),
            message: message.into(),
        }
    }

    fn version(&self) -> u32 {
        match self {
            ServerMessage::Welcome { v, .. }
            | ServerMessage::Notice { v, .. }
            | ServerMessage::Pong { v, .. }
            | ServerMessage::Error { v, .. } => *v,
            ServerMessage::Snapshot(s) => s.v,
        }
    }
}

pub fn encode_server(msg: &ServerMessage) -> String {
    serde_json::to_string(msg).expect("server messages serialize")
}

pub fn decode_server(text: &str) -> Result<ServerMessage, ProtocolError> {
    let msg: ServerMessage = serde_json::from_str(text)?;
    match msg.version() {
        PROTOCOL_VERSION => Ok(msg),
        v => Err(ProtocolError::Version(v)),
    }
}

pub fn encode_client(msg: &ClientMessage) -> String {
    serde_json::to_string(msg).expect("client messages serialize")
}

pub fn decode_client(text: &str) -> Result<ClientMessage, ProtocolError> {
    let msg: ClientMessage = serde_json::from_str(text)?;
    match msg.version() {
        PROTOCOL_VERSION => Ok(msg),
        v => Err(ProtocolError::Version(v)),
    }
}

/// Length-prefixed framing: u32 big-endian byte count, then the payload.
pub fn frame_codec(max_frame: usize) -> LengthDelimitedCodec {
    LengthDelimitedCodec::builder()
        .length_field_type::<u32>()
        .big_endian()
        .max_frame_length(max_frame)
        .new_codec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use bytes_ext::*;
    use tokio_util::codec::{Decoder, Encoder};

    mod bytes_ext {
        pub use tokio_util::bytes::{Bytes, BytesMut};
    }

    #[test]
    fn client_message_field_names() {
        assert_eq!(
            encode_client(&ClientMessage::hello("Li Bai")),
            r#"{"type":"hello","v":1,"display_name":"Li Bai"}"#
        );
        assert_eq!(
            encode_client(&ClientMessage::gift("15.00".parse().unwrap())),
            r#"{"type":"gift","v":1,"amount":"15.00"}"#
        );
        let m = decode_client(r#"{"type":"gift","v":1,"amount":9.99}"#).unwrap();
        assert_eq!(m, ClientMessage::gift(Cny::from_fen(999)));
        let m = decode_client(r#"{"v":1,"type":"comment","text":"feed fish"}"#).unwrap();
        assert_eq!(m, ClientMessage::comment("feed fish"));
    }

    #[test]
    fn rejects_wrong_version_and_garbage() {
        assert!(matches!(
            decode_client(r#"{"type":"ping","v":2}"#),
            Err(ProtocolError::Version(2))
        ));
        assert!(decode_client(r#"{"type":"comment","text":"x"}"#).is_err());
        assert!(decode_client(r#"{"type":"launch","v":1}"#).is_err());
        assert!(decode_client("not json").is_err());
    }

    #[test]
    fn notice_targets() {
        let n = Notice::to(&ViewerId::new("v7"), "hi");
        let text = encode_server(&ServerMessage::notice(n.clone()));
        assert_eq!(text, r#"{"type":"notice","v":1,"target":"v7","text":"hi"}"#);
        assert_eq!(
            decode_server(&text).unwrap(),
            ServerMessage::notice(n)
        );
        let all: Notice = serde_json::from_str(r#"{"target":"all","text":"x"}"#).unwrap();
        assert_eq!(all.target, NoticeTarget::All);
        assert!(all.is_for(&ViewerId::new("anyone")));
    }

    #[test]
    fn framing_round_trip_and_limit() {
        let mut codec = frame_codec(16);
        let mut buf = BytesMut::new();
        codec.encode(Bytes::from_static(b"{\"a\":1}"), &mut buf).unwrap();
        assert_eq!(&buf[..4], &[0, 0, 0, 7]);
        let frame = codec.decode(&mut buf).unwrap().unwrap();
        assert_eq!(&frame[..], b"{\"a\":1}");

        let mut buf = BytesMut::from(&[0u8, 0, 0, 200][..]);
        assert!(codec.decode(&mut buf).is_err());
    }
}
