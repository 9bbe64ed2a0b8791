//! Authoritative real-time server for mixed-reality scenic live streams.
//!
//! Viewers' chat comments and gifts drive virtual lotuses, fish, fireworks,
//! umbrellas and a finale boat over a fixed-camera lake scene, alongside a
//! collaborative classical-verse game. The server owns all state, advances
//! it on a fixed tick, and broadcasts a snapshot of the scene every tick.
//!
//! | module | role |
//! |---|---|
//! | [`chatparse`] | comment and gift classification |
//! | [`scenegeo`] | camera, lake outline, geometric queries |
//! | [`entitysim`] | tick-based entity simulation |
//! | [`versegame`] | verse rounds, corpus, scoreboard |
//! | [`economy`] | gift tiers, story entitlements, ledger |
//! | [`session`] | deterministic session engine and replay log |
//! | [`protocol`] | wire messages and framing |
//! | [`server`] | network ingress, tick loop, broadcast |
//! | [`audience`] | scripted bot audiences |

pub mod audience;
pub mod chatparse;
pub mod client;
pub mod economy;
pub mod entitysim;
pub mod money;
pub mod protocol;
pub mod scenegeo;
pub mod server;
pub mod session;
pub mod versegame;
