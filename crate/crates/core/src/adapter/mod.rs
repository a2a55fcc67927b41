//! Out-of-process scorers: a newline-delimited JSON protocol, a server for
//! any in-process scorer and a client that is itself a scorer.

mod client;
pub mod protocol;
mod server;

pub use client::{RemoteConfig, RemoteScorer, RemoteState};
pub use server::{serve, serve_tcp, Session};
