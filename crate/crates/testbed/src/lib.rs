//! Mock toy backend and scripted client sessions.
//!
//! [`serve`] runs an HTTP server whose weaknesses are switched on and off by
//! [`Toggles`]; [`emulate_toy_session`] drives scripted clients and writes
//! labeled captures for the analysis side.

pub mod config;
pub mod emulator;
pub mod fixture;
pub mod goal;
pub mod server;
pub mod store;

pub use config::{ConfigError, TestbedConfig, Toggles, UserRecord, DEFAULT_TOKEN_TTL};
pub use emulator::{
    emulate_toy_session, emulate_with_testbed, scenario_profile, EmulateError, Label, Scenario, ScenarioOutputs,
};
pub use goal::{compute_hydration_goal, NonPositiveInput};
pub use server::{serve, LogEntry, ServeError, ServerHandle};
pub use store::{PhotoLookup, StoreError};
