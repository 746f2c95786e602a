//! Bus backends and the environment bridge.

mod bridge;
mod inproc;
pub mod resp;

use std::time::{SystemTime, UNIX_EPOCH};

pub use bridge::{BusPort, EnvBridge, ResetControl, OBSERVATION_TIMEOUT};
pub use inproc::InProcessBus;
pub use resp::RespBus;

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}
