//! Fixed points of quantum channels at finite truncation.
//!
//! * [`linalg`]: dense complex operators, tensor products, partial traces, norms.
//! * [`state`]: certified density operators and projections.
//! * [`channels`]: Kraus, superoperator and Stinespring channels, CPTP checks,
//!   the Deutsch CTC channel and the truncated right shift.
//! * [`fixpoint`]: Cesàro averaging and spectral fixed-point solvers.
//! * [`fock`]: truncated Fock spaces, constraint sets and truncation inequalities.
//! * [`ctc`]: end-to-end Deutsch CTC scenarios.

pub mod channels;
pub mod ctc;
pub mod error;
pub mod fixpoint;
pub mod fock;
pub mod linalg;
pub mod random;
pub mod state;

pub use error::{QfixError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
