//! Exact envy-free chore division for any number of players (at least four).
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: pieces of the unit interval with exact rational endpoints.
//! - [`valuation`]: piecewise-constant player measures and their queries.
//! - [`agents`]: the honest strategies players follow when the rules leave a choice.
//! - [`protocol`]: the state machine that runs the division and records a transcript.
//! - [`verify`]: an independent auditor that replays a transcript and checks every guarantee.
//! - [`io`]: the text formats for instances, transcripts and allocations.
//! - [`cli`]: the `run`, `gen` and `verify` commands behind the `chorediv` binary.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod agents;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod protocol;
pub mod valuation;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{frac, Fraction, Interval, Piece};
pub use valuation::{Extreme, StepDensity};
