//! Core of the SpaceMind embodied agent.
//!
//! Everything in this crate is allocation-only and free of IO: the kinematic
//! proximity-operations simulator, the bus naming contract, the tool layer,
//! the skill layer, the three reasoning modes with hierarchical memory, the
//! self-evolution pipeline and the episode loop. Backends that need threads,
//! sockets or a filesystem live in the `spacemind` crate and plug in through
//! the [`bus::Bus`], [`runner::EnvPort`] and [`evolution::LearnedStore`] traits.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod bus;
pub mod env;
pub mod evolution;
pub mod reasoning;
pub mod runner;
pub mod skills;
pub mod text;
pub mod tools;

pub use bus::{Bus, BusError, BusMessage, ChannelKey, ControlCommand};
pub use env::{
    evaluate, InitialCondition, Observation, Outcome, Pose, SatelliteModel, SimConfig, Simulator, TaskKind, TaskSpec,
};
pub use reasoning::{DecisionProvider, MemoryState, ReasoningMode, ScriptedProvider};
pub use runner::{run_episode, EndReason, EpisodeConfig, Trajectory};
pub use skills::{Skill, SkillCatalog, SkillCategory};
pub use tools::{ToolCall, ToolProfile, ToolResult};
