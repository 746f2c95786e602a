//! Bus naming contract and backend trait.
//!
//! Agent-side code talks to the environment only through these six keys.
//! Sensor keys flow upstream from the environment, command keys flow
//! downstream to it. Every payload is a UTF-8 JSON object whose field set is
//! fixed per key.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::env::{Observation, PoseDelta};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelKey {
    RgbLatest,
    LidarLatest,
    RgbNotify,
    PoseDelta,
    Exposure,
    Terminate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Upstream,
    Downstream,
}

impl ChannelKey {
    pub const ALL: [ChannelKey; 6] = [
        ChannelKey::RgbLatest,
        ChannelKey::LidarLatest,
        ChannelKey::RgbNotify,
        ChannelKey::PoseDelta,
        ChannelKey::Exposure,
        ChannelKey::Terminate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKey::RgbLatest => "sensor/rgb/latest",
            ChannelKey::LidarLatest => "sensor/lidar/latest",
            ChannelKey::RgbNotify => "sensor/rgb/notify",
            ChannelKey::PoseDelta => "cmd/pose_delta",
            ChannelKey::Exposure => "cmd/exposure",
            ChannelKey::Terminate => "cmd/terminate",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            ChannelKey::RgbLatest | ChannelKey::LidarLatest | ChannelKey::RgbNotify => Direction::Upstream,
            _ => Direction::Downstream,
        }
    }

    /// Check that `payload` decodes to this key's schema.
    pub fn validate(self, payload: &[u8]) -> Result<(), BusError> {
        match self {
            ChannelKey::RgbLatest => decode::<Observation>(self, payload).map(|_| ()),
            ChannelKey::LidarLatest => decode::<LidarRecord>(self, payload).map(|_| ()),
            ChannelKey::RgbNotify => decode::<NotifyRecord>(self, payload).map(|_| ()),
            ChannelKey::PoseDelta => decode::<PoseDelta>(self, payload).map(|_| ()),
            ChannelKey::Exposure => decode::<ExposureCommand>(self, payload).map(|_| ()),
            ChannelKey::Terminate => decode::<TerminateCommand>(self, payload).map(|_| ()),
        }
    }
}

impl fmt::Display for ChannelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelKey {
    type Err = BusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChannelKey::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| BusError::UnknownKey(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BusError {
    #[error("unknown bus key `{0}`")]
    UnknownKey(String),
    #[error("payload on `{key}` violates its schema: {detail}")]
    SchemaViolation { key: ChannelKey, detail: String },
    #[error("bus backend unavailable: {0}")]
    BackendUnavailable(String),
}

/// Decode a payload into the typed record for `key`.
pub fn decode<T: DeserializeOwned>(key: ChannelKey, payload: &[u8]) -> Result<T, BusError> {
    let first = payload.iter().find(|b| !b.is_ascii_whitespace());
    if first != Some(&b'{') {
        return Err(BusError::SchemaViolation { key, detail: "payload must be a JSON object".into() });
    }
    serde_json::from_slice(payload).map_err(|e| BusError::SchemaViolation { key, detail: e.to_string() })
}

pub fn encode<T: Serialize>(record: &T) -> Vec<u8> {
    serde_json::to_vec(record).expect("bus records serialize")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BusMessage {
    pub key: ChannelKey,
    pub payload: Vec<u8>,
    pub seq: u64,
    pub timestamp_ms: u64,
}

/// `sensor/lidar/latest` record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidarRecord {
    pub range_m: Option<f64>,
    pub step_index: u32,
}

/// `sensor/rgb/notify` record: a new frame is available. `status` is `ok`
/// or the error kind of the command that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NotifyRecord {
    pub step_index: u32,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// `cmd/exposure` record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExposureCommand {
    pub gain_delta: f64,
}

/// `cmd/terminate` record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminateCommand {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// A downstream command, ready to publish.
#[derive(Clone, Debug, PartialEq)]
pub enum ControlCommand {
    Pose(PoseDelta),
    Exposure(ExposureCommand),
    Terminate(TerminateCommand),
}

impl ControlCommand {
    pub fn key(&self) -> ChannelKey {
        match self {
            ControlCommand::Pose(_) => ChannelKey::PoseDelta,
            ControlCommand::Exposure(_) => ChannelKey::Exposure,
            ControlCommand::Terminate(_) => ChannelKey::Terminate,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            ControlCommand::Pose(d) => encode(d),
            ControlCommand::Exposure(e) => encode(e),
            ControlCommand::Terminate(t) => encode(t),
        }
    }

    pub fn decode(key: ChannelKey, payload: &[u8]) -> Result<Self, BusError> {
        match key {
            ChannelKey::PoseDelta => decode(key, payload).map(ControlCommand::Pose),
            ChannelKey::Exposure => decode(key, payload).map(ControlCommand::Exposure),
            ChannelKey::Terminate => decode(key, payload).map(ControlCommand::Terminate),
            other => Err(BusError::SchemaViolation { key: other, detail: "not a command key".into() }),
        }
    }
}

pub type Handler = Box<dyn Fn(&BusMessage) + Send + Sync + 'static>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubscriptionId(pub u64);

/// A pub/sub backend honoring the naming contract.
///
/// `publish` validates the payload, assigns the next per-key sequence
/// number and makes the message visible to `get_latest` before it returns.
/// Subscribers see messages of one key in publish order.
pub trait Bus: Send + Sync {
    fn publish(&self, key: ChannelKey, payload: &[u8]) -> Result<u64, BusError>;
    fn get_latest(&self, key: ChannelKey) -> Result<Option<BusMessage>, BusError>;
    fn subscribe(&self, key: ChannelKey, handler: Handler) -> Result<SubscriptionId, BusError>;
    fn unsubscribe(&self, id: SubscriptionId) -> Result<(), BusError>;
}

/// Publish by key name, rejecting names outside the contract.
pub fn publish_named(bus: &dyn Bus, name: &str, payload: &[u8]) -> Result<u64, BusError> {
    bus.publish(name.parse()?, payload)
}

pub fn get_latest_named(bus: &dyn Bus, name: &str) -> Result<Option<BusMessage>, BusError> {
    bus.get_latest(name.parse()?)
}
