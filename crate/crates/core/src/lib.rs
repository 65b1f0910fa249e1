//! Bounded-model epistemic verification for Firing Rebels with Relay.
//!
//! Runs of a small byzantine message-passing system are enumerated under a
//! pluggable protocol ([`enumerate`]), frozen into an interpreted system
//! ([`system`]) and queried with a temporal-epistemic logic ([`formula`],
//! [`eval`]). [`checker`] turns the FRR conditions and the knowledge
//! theorems around them into validity checks with witnesses.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod checker;
pub mod enumerate;
pub mod eval;
pub mod formula;
pub mod model;
pub mod pointset;
pub mod protocol;
pub mod system;

pub use checker::{CheckReport, Checker, PropertyId, Verdict};
pub use enumerate::{enumerate_runs, sample_runs, AdversaryConfig, ChoiceLog, RunSet};
pub use eval::{check_valid, eval, Evaluator, Validity};
pub use formula::{parse, Atom, Event, Formula, ParseError};
pub use model::{AgentId, Label, LocalHistory, MessageId, Occurrence, RoundOutcome, Run, RunError};
pub use pointset::PointSet;
pub use protocol::{Protocol, ProtocolDecision, ProtocolSpec};
pub use system::{build_system, InterpretedSystem, Point, SystemError};
