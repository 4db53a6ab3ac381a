//! Wire protocol, server daemon, client, and benchmark harness.

pub mod bench;
pub mod client;
pub mod conn;
pub mod metrics;
pub mod server;
pub mod wire;
