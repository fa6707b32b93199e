//! Bounds over Π: expectations, ratios (conditional probabilities),
//! CDF/CCDF envelopes, VaR, CVaR, prices of new instruments with hold-out
//! validation, and dual-variable sensitivity reports.
//!
//! Each bound is the optimal value of a convex program over Π; the returned
//! witness distributions are members of Π that attain the bound, so every
//! result doubles as its own certificate.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::market::{quote_to_investments, FeeSchedule, InstrumentKind, Market, PriceGrid, Quote, QuoteKind};
use crate::optimize::{
    solve_linear, solve_linear_fractional, EntropyProgramOverPi, EpigraphRow, LinearProgramOverPi,
    ObjectiveOverPi, Sense, SolveResult, SolveStatus,
};
use crate::polytope::{Distribution, RiskNeutralSet};
use crate::Result;
use crate::Tolerances;

/// A function of the expiration price, tabulated on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceFunction {
    values: Vec<f64>,
}

impl PriceFunction {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("price function values must be finite".into()));
        }
        Ok(Self { values })
    }

    pub fn from_fn(grid: &PriceGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_values(grid.values().iter().map(|&p| f(p)).collect())
    }

    /// g(p) = p.
    pub fn identity(grid: &PriceGrid) -> Self {
        Self { values: grid.values().to_vec() }
    }

    pub fn constant(grid: &PriceGrid, value: f64) -> Result<Self> {
        Self::from_values(vec![value; grid.len()])
    }

    /// Indicator of an arbitrary price set; the expectation is Prob(p ∈ C).
    pub fn indicator(grid: &PriceGrid, member: impl Fn(f64) -> bool) -> Self {
        Self {
            values: grid
                .values()
                .iter()
                .map(|&p| if member(p) { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    /// Indicator of the closed interval `[lo, hi]`.
    pub fn interval_indicator(grid: &PriceGrid, lo: f64, hi: f64) -> Self {
        Self::indicator(grid, |p| (lo..=hi).contains(&p))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Lower/upper bound with the distributions attaining each side.
#[derive(Debug, Clone)]
pub struct BoundPair {
    pub lower: f64,
    pub upper: f64,
    pub argmin_pi: Distribution,
    pub argmax_pi: Distribution,
}

/// CDF (or CCDF) envelopes over Π, evaluated at `xs`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CdfBounds {
    pub xs: Vec<f64>,
    pub f_min: Vec<f64>,
    pub f_max: Vec<f64>,
}

/// One row of the sensitivity table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualEntry {
    pub label: String,
    pub cost: f64,
    pub lambda: f64,
}

/// Dual variables λ* on the cost constraints `Pᵀπ ≤ c` of a solved program,
/// with the per-investment table sorted by λ descending. `-λ*` is the
/// gradient of the optimal value with respect to the costs, and
/// `L*(c + Δc) ≥ L*(c) - λ*ᵀΔc` holds globally.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualReport {
    pub lambda: Vec<f64>,
    pub objective_value: f64,
    pub per_investment: Vec<DualEntry>,
}

/// Result of holding one quoted option out of the market and re-pricing it
/// from everything else.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoldoutRecord {
    pub label: String,
    pub bid: Option<f64>,
    pub ask: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// The bid (after fee credit) exceeds the upper bound: selling at this
    /// bid is inconsistent with the rest of the market.
    pub bid_violation: bool,
    /// The ask (after fees) is below the lower bound.
    pub ask_violation: bool,
    /// Π became empty once the option was removed.
    pub infeasible: bool,
}

fn require_optimal(result: SolveResult) -> Result<(f64, Distribution)> {
    match result.status {
        SolveStatus::Optimal => {
            let value = result.value;
            Ok((value, result.pi.expect("optimal results carry a witness")))
        }
        SolveStatus::Infeasible => Err(Error::EmptySet),
        SolveStatus::NumericalFailure => {
            Err(Error::NumericalFailure("bound computation did not reach optimality".into()))
        }
    }
}

fn check_len(set: &RiskNeutralSet, g: &PriceFunction) -> Result<()> {
    if g.len() != set.m() {
        return Err(Error::InvalidArgument(format!(
            "price function has {} entries but the grid has {} levels",
            g.len(),
            set.m()
        )));
    }
    Ok(())
}

fn linear_bounds(set: &RiskNeutralSet, values: &[f64]) -> Result<BoundPair> {
    let (lower, argmin_pi) = require_optimal(solve_linear(
        set,
        &LinearProgramOverPi::new(values.to_vec(), Sense::Min),
    )?)?;
    let (upper, argmax_pi) = require_optimal(solve_linear(
        set,
        &LinearProgramOverPi::new(values.to_vec(), Sense::Max),
    )?)?;
    Ok(BoundPair { lower, upper, argmin_pi, argmax_pi })
}

/// Bounds on `E g(p)` over Π.
pub fn expectation_bounds(set: &RiskNeutralSet, g: &PriceFunction) -> Result<BoundPair> {
    check_len(set, g)?;
    linear_bounds(set, g.values())
}

/// Bounds on the quasilinear ratio `E f(p) / E g(p)` over Π, computed
/// through the Charnes-Cooper transform.
///
/// Refuses when the denominator can fall below the configured minimum on Π:
/// the ratio is then undefined (for conditional probabilities, the
/// conditioning event may have probability 0 under some feasible π).
pub fn ratio_bounds(
    set: &RiskNeutralSet,
    f: &PriceFunction,
    g: &PriceFunction,
) -> Result<BoundPair> {
    check_len(set, f)?;
    check_len(set, g)?;
    let denominator = expectation_bounds(set, g)?;
    let required = set.tolerances().denom;
    if denominator.lower < required {
        return Err(Error::DegenerateDenominator {
            min_denominator: denominator.lower,
            required,
        });
    }
    let (lower, argmin_pi) =
        require_optimal(solve_linear_fractional(set, f.values(), g.values(), Sense::Min)?)?;
    let (upper, argmax_pi) =
        require_optimal(solve_linear_fractional(set, f.values(), g.values(), Sense::Max)?)?;
    Ok(BoundPair { lower, upper, argmin_pi, argmax_pi })
}

fn cdf_objective(g: &PriceFunction, x: f64, upper_tail: bool) -> Vec<f64> {
    g.values()
        .iter()
        .map(|&v| {
            let inside = if upper_tail { v >= x } else { v <= x };
            if inside {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

fn tail_bounds(
    set: &RiskNeutralSet,
    g: &PriceFunction,
    xs: &[f64],
    upper_tail: bool,
) -> Result<CdfBounds> {
    check_len(set, g)?;
    let mut xs = xs.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("evaluation points must not be NaN"));
    xs.dedup();
    let mut f_min = Vec::with_capacity(xs.len());
    let mut f_max = Vec::with_capacity(xs.len());
    for &x in &xs {
        let objective = cdf_objective(g, x, upper_tail);
        let (lo, _) = require_optimal(solve_linear(
            set,
            &LinearProgramOverPi::new(objective.clone(), Sense::Min),
        )?)?;
        let (hi, _) = require_optimal(solve_linear(
            set,
            &LinearProgramOverPi::new(objective, Sense::Max),
        )?)?;
        f_min.push(lo.clamp(0.0, 1.0));
        f_max.push(hi.clamp(0.0, 1.0));
    }
    Ok(CdfBounds { xs, f_min, f_max })
}

/// Envelopes of `F(x) = Prob(g(p) ≤ x)` over Π, one pair of LPs per
/// evaluation point. Points are sorted and deduplicated.
pub fn cdf_bounds(set: &RiskNeutralSet, g: &PriceFunction, xs: &[f64]) -> Result<CdfBounds> {
    tail_bounds(set, g, xs, false)
}

/// Envelopes of `Prob(g(p) ≥ x)`, by its own pair of LPs per point rather
/// than `1 - CDF`: at atoms of g the two differ.
pub fn ccdf_bounds(set: &RiskNeutralSet, g: &PriceFunction, xs: &[f64]) -> Result<CdfBounds> {
    tail_bounds(set, g, xs, true)
}

fn distinct_sorted(values: &[f64]) -> Vec<f64> {
    let mut xs = values.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("price function must not contain NaN"));
    xs.dedup();
    xs
}

/// Bounds on `VaR(g(p); ε)` for several probability levels, sharing one
/// CDF-envelope sweep over the distinct values of g.
///
/// The generalized inverse `F⁻¹(ε) = inf{x : F(x) ≥ ε}` is evaluated on
/// right-continuous step envelopes, so `lower = F_max⁻¹(ε)` and
/// `upper = F_min⁻¹(ε)` are always values of g. The returned witnesses
/// attain the bounds: VaR under `argmin_pi` equals `lower`, and under
/// `argmax_pi` equals `upper`.
pub fn var_bounds_many(
    set: &RiskNeutralSet,
    g: &PriceFunction,
    epsilons: &[f64],
) -> Result<Vec<BoundPair>> {
    check_len(set, g)?;
    for &eps in epsilons {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidProbability(eps));
        }
    }
    let xs = distinct_sorted(g.values());
    let envelopes = cdf_bounds(set, g, &xs)?;
    // Numerical hygiene before inversion: envelopes of true CDFs are
    // nondecreasing with F_max ≥ F_min; restore both against solver noise.
    let mut f_min = envelopes.f_min.clone();
    let mut f_max = envelopes.f_max.clone();
    for k in 1..f_min.len() {
        f_min[k] = f_min[k].max(f_min[k - 1]);
        f_max[k] = f_max[k].max(f_max[k - 1]);
    }
    for k in 0..f_max.len() {
        f_max[k] = f_max[k].max(f_min[k]);
    }

    let invert = |env: &[f64], eps: f64| -> usize {
        env.iter().position(|&v| v >= eps).unwrap_or(env.len() - 1)
    };
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let lower_idx = invert(&f_max, eps);
        let upper_idx = invert(&f_min, eps);
        let lower = xs[lower_idx];
        let upper = xs[upper_idx];
        // Witnesses: the CDF maximizer at the lower point reaches ε there,
        // so its VaR is exactly `lower`; the CDF minimizer just below the
        // upper point stays under ε until `upper`.
        let (_, argmin_pi) = require_optimal(solve_linear(
            set,
            &LinearProgramOverPi::new(cdf_objective(g, lower, false), Sense::Max),
        )?)?;
        let argmax_pi = if upper_idx == 0 {
            argmin_pi.clone()
        } else {
            require_optimal(solve_linear(
                set,
                &LinearProgramOverPi::new(
                    cdf_objective(g, xs[upper_idx - 1], false),
                    Sense::Min,
                ),
            )?)?
            .1
        };
        out.push(BoundPair { lower, upper, argmin_pi, argmax_pi });
    }
    Ok(out)
}

/// Bounds on `VaR(g(p); ε)` for a single probability level.
pub fn var_bounds(set: &RiskNeutralSet, g: &PriceFunction, eps: f64) -> Result<BoundPair> {
    Ok(var_bounds_many(set, g, &[eps])?.pop().expect("one epsilon in, one bound out"))
}

/// Number of CVaR thresholds above which the single epigraph LP (one row
/// per candidate, each dense in π) is replaced by an exact ternary search
/// over the same candidates, one small LP per probe.
const CVAR_EPIGRAPH_LIMIT: usize = 600;

/// Upper bound on `CVaR(g(p); ε) = inf_β (β + E(g(p) - β)_+ / (1 - ε))`
/// over Π.
///
/// The inner infimum is attained at a value of g, so the candidate set is
/// the distinct values of g on the grid. Small candidate sets solve one LP
/// with an auxiliary variable and one epigraph row per candidate; large
/// ones exploit that `β ↦ β + max_π E(g-β)_+/(1-ε)` is convex piecewise
/// linear with kinks exactly at the candidates (max and inf commute here by
/// compact-convex minimax), so a ternary search over candidates is exact.
pub fn cvar_upper_bound(set: &RiskNeutralSet, g: &PriceFunction, eps: f64) -> Result<f64> {
    check_len(set, g)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidProbability(eps));
    }
    let betas = distinct_sorted(g.values());
    if betas.len() <= CVAR_EPIGRAPH_LIMIT {
        let prog = LinearProgramOverPi {
            objective: vec![0.0; set.m()],
            sense: Sense::Max,
            epigraph: betas
                .iter()
                .map(|&beta| EpigraphRow {
                    coeffs: g
                        .values()
                        .iter()
                        .map(|&v| (v - beta).max(0.0) / (1.0 - eps))
                        .collect(),
                    offset: beta,
                })
                .collect(),
        };
        let (value, _) = require_optimal(solve_linear(set, &prog)?)?;
        return Ok(value);
    }

    let mut cache: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    let phi = |k: usize, cache: &mut std::collections::HashMap<usize, f64>| -> Result<f64> {
        if let Some(&v) = cache.get(&k) {
            return Ok(v);
        }
        let beta = betas[k];
        let objective: Vec<f64> = g
            .values()
            .iter()
            .map(|&v| (v - beta).max(0.0) / (1.0 - eps))
            .collect();
        let (tail, _) = require_optimal(solve_linear(
            set,
            &LinearProgramOverPi::new(objective, Sense::Max),
        )?)?;
        let v = beta + tail;
        cache.insert(k, v);
        Ok(v)
    };
    let (mut lo, mut hi) = (0usize, betas.len() - 1);
    while hi - lo > 2 {
        let third = (hi - lo) / 3;
        let (m1, m2) = (lo + third, hi - third);
        // Plateaus are fine for convex sequences: on a tie the minimum
        // still lies in [m1, hi].
        if phi(m1, &mut cache)? < phi(m2, &mut cache)? {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let mut best = f64::INFINITY;
    for k in lo..=hi {
        best = best.min(phi(k, &mut cache)?);
    }
    Ok(best)
}

/// Bounds on the arbitrage-consistent cost of a new instrument with the
/// given payoff: any cost outside `[lower, upper]` would empty Π.
pub fn price_bounds(set: &RiskNeutralSet, payoff_new: &PriceFunction) -> Result<BoundPair> {
    expectation_bounds(set, payoff_new)
}

fn is_option_quote(kind: QuoteKind) -> bool {
    matches!(kind, QuoteKind::Call | QuoteKind::Put | QuoteKind::Binary)
}

fn quote_label(quote: &Quote) -> String {
    let kind = match quote.kind {
        QuoteKind::Call => "call",
        QuoteKind::Put => "put",
        QuoteKind::Binary => "binary",
        QuoteKind::Future => "future",
        QuoteKind::Underlying => "underlying",
    };
    match quote.strike {
        Some(s) => format!("{s} {kind}"),
        None => kind.to_string(),
    }
}

/// Holds each quoted option out of the market (both sides at once, so the
/// held-out price cannot leak back in), recomputes its price bounds from
/// the remaining instruments, and flags quotes that fall outside the bounds
/// after fee slack. A set that becomes infeasible after removal is recorded
/// on the record, not treated as fatal.
pub fn holdout_validate(
    quotes: &[Quote],
    fees: &FeeSchedule,
    grid: &PriceGrid,
    discount_factor: f64,
    tols: &Tolerances,
) -> Result<Vec<HoldoutRecord>> {
    let mut records = Vec::new();
    for (held, quote) in quotes.iter().enumerate() {
        if !is_option_quote(quote.kind) || (quote.bid.is_none() && quote.ask.is_none()) {
            continue;
        }
        let mut instruments = Vec::new();
        let mut costs = Vec::new();
        for (i, other) in quotes.iter().enumerate() {
            if i == held {
                continue;
            }
            for (instr, cost) in quote_to_investments(other, fees)? {
                instruments.push(instr);
                costs.push(cost);
            }
        }
        let market = Market::with_discount(grid.clone(), instruments, costs, discount_factor)?;
        let set = RiskNeutralSet::with_tolerances(market, *tols);

        let buy_kind = match quote.kind {
            QuoteKind::Call => InstrumentKind::CallBuy,
            QuoteKind::Put => InstrumentKind::PutBuy,
            _ => InstrumentKind::BinaryAboveBuy,
        };
        let held_payoff = crate::market::Instrument::new(buy_kind, quote.strike)?
            .payoff_column(grid)?
            .iter()
            .map(|&v| discount_factor * v)
            .collect::<Vec<_>>();
        let mut record = HoldoutRecord {
            label: quote_label(quote),
            bid: quote.bid,
            ask: quote.ask,
            lower: None,
            upper: None,
            bid_violation: false,
            ask_violation: false,
            infeasible: false,
        };
        match price_bounds(&set, &PriceFunction::from_values(held_payoff)?) {
            Ok(bounds) => {
                record.lower = Some(bounds.lower);
                record.upper = Some(bounds.upper);
                for (instr, cost) in quote_to_investments(quote, fees)? {
                    let buy_side = matches!(
                        instr.kind(),
                        InstrumentKind::CallBuy
                            | InstrumentKind::PutBuy
                            | InstrumentKind::BinaryAboveBuy
                    );
                    if buy_side {
                        let slack = 1e-6 * (1.0 + bounds.lower.abs());
                        record.ask_violation = cost < bounds.lower - slack;
                    } else {
                        let slack = 1e-6 * (1.0 + bounds.upper.abs());
                        record.bid_violation = -cost > bounds.upper + slack;
                    }
                }
            }
            Err(Error::EmptySet) => record.infeasible = true,
            Err(e) => return Err(e),
        }
        records.push(record);
    }
    Ok(records)
}

/// Solves the given program and reports the dual variables λ* of the market
/// cost constraints, sorted per investment by λ descending.
pub fn sensitivity_report(set: &RiskNeutralSet, objective: &ObjectiveOverPi) -> Result<DualReport> {
    let result = match objective {
        ObjectiveOverPi::Linear(prog) => solve_linear(set, prog)?,
        ObjectiveOverPi::Entropy(prog) => crate::optimize::solve_entropy(set, prog)?,
    };
    match result.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(Error::EmptySet),
        SolveStatus::NumericalFailure => {
            return Err(Error::NumericalFailure("dual extraction did not reach optimality".into()))
        }
    }
    let lambda = result.duals_on_costs.clone();
    let mut per_investment: Vec<DualEntry> = set
        .all_labels()
        .take(set.n_market())
        .zip(set.market().costs())
        .zip(&lambda)
        .map(|((label, &cost), &lambda)| DualEntry { label: label.to_string(), cost, lambda })
        .collect();
    per_investment.sort_by(|a, b| {
        b.lambda
            .partial_cmp(&a.lambda)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(DualReport { lambda, objective_value: result.value, per_investment })
}

/// Convenience: the maximum-entropy sensitivity table (the usual report).
pub fn maxent_sensitivity(set: &RiskNeutralSet) -> Result<DualReport> {
    sensitivity_report(set, &ObjectiveOverPi::Entropy(EntropyProgramOverPi::max_entropy()))
}
