//! Hurwitz certification of Metzler matrices through cycle gains, and
//! global stability certificates for monotone networks.
//!
//! The entry point for linear systems is [`stability::full_report`], which
//! runs leading minors, Schur complements, condensation, sum- and max-gain
//! conditions, a diagonal Lyapunov check and the cactus certificate, and
//! compares them with a Perron root estimate. Nonlinear networks go through
//! [`nonlinear::certify`].

pub mod config;
pub mod error;
pub mod expansion;
pub mod fixtures;
pub mod gains;
pub mod graph;
pub mod io;
pub mod matrix;
pub mod nonlinear;
pub mod sampling;
pub mod simulate;
pub mod stability;

#[cfg(test)]
mod test_support;

pub use config::{AnalysisConfig, Verdict};
pub use error::{Error, Result};
pub use expansion::{contract_check, expand, ExpandedMatrix};
pub use gains::{EdgeGainTable, FeasibilityWitness, TotalGains};
pub use graph::{SimpleCycle, WeightedDigraph};
pub use matrix::{MetzlerMatrix, SquareMatrix};
pub use nonlinear::{GasCertificate, Method, MonotoneNetworkSpec, Nonlinearity};
pub use simulate::{InputSignal, System, Trajectory};
pub use stability::{full_report, StabilityReport};
