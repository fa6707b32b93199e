//! Bounds, certificates, and distribution estimates over the set of
//! risk-neutral probabilities implied by derivative market quotes.
//!
//! A market with `n` investments (options, futures, the underlying itself)
//! quoted against `m` discretized expiration prices induces the polytope
//!
//! ```text
//! Π = { π ∈ Δ : Pᵀπ ≤ c }
//! ```
//!
//! where `Δ` is the probability simplex, `P` the m×n payoff matrix and `c`
//! the fee-adjusted acquisition costs. `Π` is empty exactly when a static
//! long-only arbitrage exists. Everything this crate does is an optimization
//! problem over `Π`:
//!
//! - [`polytope`] builds `Π`, decides emptiness, and produces a certificate
//!   either way (a feasible distribution, or an arbitrage portfolio).
//! - [`analysis`] computes bounds on expectations, ratios of expectations
//!   (conditional probabilities), the CDF/CCDF, VaR, CVaR, and fair prices
//!   of new instruments, plus dual-variable sensitivity reports.
//! - [`estimate`] finds the maximum-entropy member of `Π`, KL projections
//!   onto `Π`, and the closest discretized log-normal by alternating
//!   projection.
//! - [`market`] models instruments, fees, and payoff assembly; [`chain`]
//!   loads quote snapshots and run configuration for the `rnp` CLI.
//!
//! The solver backend ([`optimize`]) formulates each problem as a conic
//! program over `(π, tail sums of π)` so that vanilla option constraints
//! stay O(1)-sparse; this keeps single solves well under a second even at
//! `m ≈ 5000` outcomes.

pub mod analysis;
pub mod chain;
pub mod error;
pub mod estimate;
pub mod market;
pub mod optimize;
pub mod polytope;

mod conic;

pub use analysis::{BoundPair, CdfBounds, DualReport, HoldoutRecord, PriceFunction};
pub use chain::{ChainSnapshot, LoadedSnapshot, RunConfig};
pub use error::Error;
pub use estimate::{AlternationTrace, LogNormalFit};
pub use market::{FeeSchedule, Instrument, InstrumentKind, Market, PriceGrid, Quote, QuoteKind};
pub use optimize::{
    EntropyProgramOverPi, LinearProgramOverPi, Sense, SolveResult, SolveStatus,
};
pub use polytope::{ArbitrageCertificate, ArbitrageCheck, Distribution, RiskNeutralSet};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Numerical thresholds shared by all operations.
///
/// Feasibility residuals are measured relative to `max(1, |bound|)` so the
/// same thresholds work for unit-scale test fixtures and index-scale chains.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    /// Constraint residual allowed when testing membership of Π.
    pub feas: f64,
    /// Worst-case-return threshold separating arbitrage from solver noise.
    pub arb: f64,
    /// Relative tolerance on optimal objective values.
    pub opt: f64,
    /// Complementary-slackness residual allowed per constraint.
    pub cs: f64,
    /// Slack allowed on `Σπ = 1` when constructing a [`Distribution`].
    pub simplex: f64,
    /// Smallest denominator for which ratio bounds are attempted.
    pub denom: f64,
    /// KL divergence at which the log-normal alternation declares convergence.
    pub div: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feas: 1e-8,
            arb: 1e-6,
            opt: 1e-7,
            cs: 1e-6,
            simplex: 1e-6,
            denom: 1e-9,
            div: 1e-6,
        }
    }
}
