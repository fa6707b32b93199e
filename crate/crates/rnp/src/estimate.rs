//! Distribution estimation over Π: maximum entropy, KL projection, the
//! alternating closest-log-normal procedure, and the log-normal volatility
//! summary.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::market::PriceGrid;
use crate::optimize::{sample_feasible, solve_entropy, EntropyProgramOverPi};
use crate::polytope::{Distribution, RiskNeutralSet};
use crate::Result;

/// Standard normal CDF.
fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// A log-normal fit `log p ~ N(mu, sigma²)` attached to the grid it was
/// fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogNormalFit {
    pub mu: f64,
    pub sigma: f64,
    pub grid: PriceGrid,
}

impl LogNormalFit {
    pub fn new(mu: f64, sigma: f64, grid: PriceGrid) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "log-normal fit requires finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
            )));
        }
        Ok(Self { mu, sigma, grid })
    }
}

/// One step of the alternation: the fit of the previous iterate, its
/// discretization `eta`, the projection `pi` of `eta` back onto Π, and
/// `KL(pi ‖ eta)`.
#[derive(Debug, Clone)]
pub struct AlternationStep {
    pub pi: Distribution,
    pub fit: LogNormalFit,
    pub eta: Distribution,
    pub divergence: f64,
}

/// Trace of the closest-log-normal alternation. The loop stops at the first
/// step whose divergence reaches the tolerance, so on a converged trace the
/// final divergence is the smallest recorded.
#[derive(Debug, Clone)]
pub struct AlternationTrace {
    pub steps: Vec<AlternationStep>,
    pub converged: bool,
}

impl AlternationTrace {
    pub fn final_divergence(&self) -> f64 {
        self.steps.last().map_or(f64::INFINITY, |s| s.divergence)
    }

    pub fn final_fit(&self) -> Option<&LogNormalFit> {
        self.steps.last().map(|s| &s.fit)
    }
}

/// The entropy-maximizing member of Π.
pub fn max_entropy(set: &RiskNeutralSet) -> Result<Distribution> {
    let result = solve_entropy(set, &EntropyProgramOverPi::max_entropy())?;
    Ok(result.require_optimal()?.clone())
}

/// The KL-closest member of Π to `eta`.
pub fn kl_project(set: &RiskNeutralSet, eta: &Distribution) -> Result<Distribution> {
    let result = solve_entropy(set, &EntropyProgramOverPi::kl_to(eta.clone()))?;
    Ok(result.require_optimal()?.clone())
}

/// Fits `log p ~ N(mu, sigma²)` to a distribution by matching the first two
/// moments of `log p` (population variance: π is a distribution, not a
/// sample).
pub fn fit_lognormal_moments(pi: &Distribution, grid: &PriceGrid) -> Result<LogNormalFit> {
    if pi.len() != grid.len() {
        return Err(Error::InvalidArgument(format!(
            "distribution has {} entries but the grid has {} levels",
            pi.len(),
            grid.len()
        )));
    }
    let logs: Vec<f64> = grid.values().iter().map(|&p| p.ln()).collect();
    let mu: f64 = pi.probs().iter().zip(&logs).map(|(p, l)| p * l).sum();
    let var: f64 = pi
        .probs()
        .iter()
        .zip(&logs)
        .map(|(p, l)| p * (l - mu) * (l - mu))
        .sum();
    if !(var > 0.0) {
        return Err(Error::DegenerateFit { mu });
    }
    LogNormalFit::new(mu, var.sqrt(), grid.clone())
}

/// Discretizes a log-normal onto the fit's grid: each level receives the
/// normal mass of its cell `[a_i, b_i)` in log space, where cells are
/// arithmetic-midpoint intervals with open tails absorbing everything
/// outside the grid span. Cells whose mass underflows are floored at
/// 1e-300 so the result stays usable as a KL reference; masses are
/// renormalized to sum to one.
pub fn discretize_lognormal(fit: &LogNormalFit) -> Distribution {
    let mut masses: Vec<f64> = fit
        .grid
        .cell_edges()
        .into_iter()
        .map(|(lo, hi)| {
            let z_lo = if lo <= 0.0 { f64::NEG_INFINITY } else { (lo.ln() - fit.mu) / fit.sigma };
            let z_hi =
                if hi.is_infinite() { f64::INFINITY } else { (hi.ln() - fit.mu) / fit.sigma };
            (normal_cdf(z_hi) - normal_cdf(z_lo)).max(1e-300)
        })
        .collect();
    let total: f64 = masses.iter().sum();
    for m in masses.iter_mut() {
        *m /= total;
    }
    Distribution::with_tolerance(masses, 1e-9).expect("normalized masses form a distribution")
}

/// Runs fit -> discretize -> project from a feasible starting point until
/// `KL(π_{k+1} ‖ η_k)` reaches `tol_div` or `max_iters` iterations.
///
/// The alternation runs between Π and the (nonconvex) discretized
/// log-normal family; the trace records every iterate and no global
/// optimality is claimed. A degenerate (point-mass) fit inside the loop
/// terminates the trace with `converged = false`.
pub fn closest_lognormal(
    set: &RiskNeutralSet,
    pi0: &Distribution,
    max_iters: usize,
    tol_div: f64,
) -> Result<AlternationTrace> {
    if set.constraint_violation(pi0) > set.tolerances().feas {
        return Err(Error::InvalidArgument(
            "alternation must start from a member of the risk-neutral set".into(),
        ));
    }
    let grid = set.grid().clone();
    let mut current = pi0.clone();
    let mut steps = Vec::new();
    for _ in 0..max_iters {
        let fit = match fit_lognormal_moments(&current, &grid) {
            Ok(fit) => fit,
            Err(Error::DegenerateFit { .. }) => {
                return Ok(AlternationTrace { steps, converged: false })
            }
            Err(e) => return Err(e),
        };
        let eta = discretize_lognormal(&fit);
        let next = kl_project(set, &eta)?;
        let divergence = next.kl_divergence(&eta);
        current = next.clone();
        steps.push(AlternationStep { pi: next, fit, eta, divergence });
        if divergence <= tol_div {
            return Ok(AlternationTrace { steps, converged: true });
        }
    }
    Ok(AlternationTrace { steps, converged: false })
}

/// Multi-start wrapper: runs the alternation from every start and keeps the
/// trace with the smallest final divergence.
pub fn closest_lognormal_multi(
    set: &RiskNeutralSet,
    starts: &[Distribution],
    max_iters: usize,
    tol_div: f64,
) -> Result<AlternationTrace> {
    if starts.is_empty() {
        return Err(Error::InvalidArgument("multi-start needs at least one starting point".into()));
    }
    let mut best: Option<AlternationTrace> = None;
    for pi0 in starts {
        let trace = closest_lognormal(set, pi0, max_iters, tol_div)?;
        let replace = match &best {
            None => true,
            Some(b) => trace.final_divergence() < b.final_divergence(),
        };
        if replace {
            best = Some(trace);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Default starting points: the maximum-entropy member plus `extra` draws
/// from seeded random linear objectives over Π.
pub fn default_starts(set: &RiskNeutralSet, extra: usize, seed: u64) -> Result<Vec<Distribution>> {
    let mut starts = vec![max_entropy(set)?];
    starts.extend(sample_feasible(set, extra, seed)?);
    Ok(starts)
}

/// Annualized volatility implied by a log-normal fit over a finite horizon:
/// `sigma * sqrt(day_count / days_to_expiry)`.
pub fn annualized_volatility(fit: &LogNormalFit, days_to_expiry: f64, day_count: f64) -> Result<f64> {
    if !(days_to_expiry > 0.0) || !(day_count > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon and day count must be positive, got {days_to_expiry} and {day_count}"
        )));
    }
    if !(fit.sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {}", fit.sigma)));
    }
    Ok(fit.sigma * (day_count / days_to_expiry).sqrt())
}
