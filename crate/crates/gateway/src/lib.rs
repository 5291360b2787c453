//! Path-aware forward proxy: planning, emulated transport, control API and
//! a small origin server for experiments.

pub mod control;
pub mod emu;
pub mod error;
pub mod formats;
pub mod gateway;
pub mod http_util;
pub mod pathdb;
pub mod origin;
pub mod plt;
pub mod proxy;
pub mod resolver;

use pan_gate_core::{Clock, Timestamp};

pub use error::GatewayError;
pub use gateway::{Gateway, GatewayConfig};

/// Wall clock in Unix milliseconds.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        let d = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).unwrap_or_default();
        Timestamp::from_millis(d.as_millis() as u64)
    }
}
