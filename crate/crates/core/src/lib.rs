//! Analysis engine for auditing Internet-connected children's toys.
//!
//! The crate is organised by audit stage:
//!
//! - [`capture`] turns pcap files or JSONL transaction logs into
//!   [`capture::HttpTransaction`] lists and summarises per-endpoint traffic.
//! - [`detect`] runs passive detectors over transactions and active probes
//!   against a live target, producing [`detect::Finding`]s.
//! - [`mine`] implements the two-phase photo-token mining attack (prefix
//!   oracle sweep, then sharded suffix search) and its runtime estimator.
//! - [`staticscan`] looks for plaintext secret constants in source trees.
//! - [`compliance`] maps findings onto regulation and privacy-policy clauses
//!   and renders audit reports.
//!
//! Everything here is a pure transformation over its inputs except the
//! active probes and the miner, which issue HTTP requests through
//! [`client::ProbeClient`].

pub mod capture;
pub mod client;
pub mod compliance;
pub mod detect;
pub mod flatconfig;
pub mod fsutil;
pub mod mine;
pub mod staticscan;

pub use capture::{HttpTransaction, Method};
pub use detect::{DetectorId, Evidence, Finding, Severity};
