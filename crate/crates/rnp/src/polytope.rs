//! The set of risk-neutral probabilities Π and arbitrage certificates.
//!
//! Π = {π ∈ Δ : Pᵀπ ≤ c}. Exactly one of two things is true for a market:
//! either Π contains a distribution (which certifies that no long-only
//! portfolio has guaranteed positive return) or there is a nonnegative
//! portfolio with strictly positive worst-case return (which certifies that
//! Π is empty). [`RiskNeutralSet::check_arbitrage`] produces whichever
//! certificate applies and re-verifies it by direct arithmetic before
//! returning, so callers never have to trust solver status codes.

use serde::{Deserialize, Serialize};

use crate::conic::{install_pi_block, ConicBuilder, RawStatus};
use crate::error::Error;
use crate::market::{ExpectationForm, Instrument, Market, PriceGrid};
use crate::Result;
use crate::Tolerances;

/// A probability vector on the price grid.
///
/// Construction clamps components in `[-tol, 0)` to zero and renormalizes,
/// so downstream entropy computations always see exact nonnegativity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates against the default simplex tolerance.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(probs, Tolerances::default().simplex)
    }

    pub fn with_tolerance(mut probs: Vec<f64>, tol: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("distribution must have at least one outcome".into()));
        }
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("probabilities must be finite".into()));
        }
        if let Some(&p) = probs.iter().find(|&&p| p < -tol) {
            return Err(Error::InvalidArgument(format!(
                "probability {p} is below -{tol:.1e}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {sum}, expected 1 within {tol:.1e}"
            )));
        }
        for p in probs.iter_mut() {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Ok(Self { probs })
    }

    pub fn uniform(m: usize) -> Self {
        assert!(m > 0, "uniform distribution needs at least one outcome");
        Self { probs: vec![1.0 / m as f64; m] }
    }

    pub fn point_mass(m: usize, index: usize) -> Self {
        assert!(index < m);
        let mut probs = vec![0.0; m];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Shannon entropy in nats, with the convention 0·log 0 = 0.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    /// KL divergence to `reference` in nats. Infinite when this distribution
    /// puts mass where the reference has none.
    pub fn kl_divergence(&self, reference: &Distribution) -> f64 {
        self.probs
            .iter()
            .zip(&reference.probs)
            .map(|(&p, &q)| {
                if p <= 0.0 {
                    0.0
                } else if q <= 0.0 {
                    f64::INFINITY
                } else {
                    p * (p / q).ln()
                }
            })
            .sum()
    }

    /// Expectation of a per-outcome value vector.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }
}

/// A nonnegative portfolio whose return is at least `guaranteed_return`
/// in every outcome. Proof that Π is empty when the return is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageCertificate {
    /// One weight per investment, synthetic constraint rows included.
    pub weights: Vec<f64>,
    pub guaranteed_return: f64,
}

impl ArbitrageCertificate {
    /// Recomputes `min_i (Pw - (cᵀw)1)_i` by direct arithmetic.
    pub fn worst_case_return(&self, set: &RiskNeutralSet) -> f64 {
        let m = set.grid().len();
        let cost: f64 = set
            .all_costs()
            .zip(&self.weights)
            .map(|(c, w)| c * w)
            .sum();
        (0..m)
            .map(|i| {
                let payoff: f64 = set
                    .all_columns()
                    .zip(&self.weights)
                    .map(|(col, w)| col[i] * w)
                    .sum();
                payoff - cost
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Outcome of the arbitrage check: a member of Π, or proof there is none.
#[derive(Debug, Clone)]
pub enum ArbitrageCheck {
    NoArbitrage(Distribution),
    Arbitrage(ArbitrageCertificate),
}

/// Π together with any extra linear constraints, each treated as a
/// synthetic investment with payoff vector `a` and cost `b`.
///
/// Immutable; [`RiskNeutralSet::add_constraint`] returns a new set.
#[derive(Debug, Clone)]
pub struct RiskNeutralSet {
    market: Market,
    extra: Vec<(Instrument, f64, ExpectationForm)>,
    tols: Tolerances,
}

impl RiskNeutralSet {
    pub fn new(market: Market) -> Self {
        Self::with_tolerances(market, Tolerances::default())
    }

    pub fn with_tolerances(market: Market, tols: Tolerances) -> Self {
        Self { market, extra: Vec::new(), tols }
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn grid(&self) -> &PriceGrid {
        self.market.grid()
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tols
    }

    /// Number of outcomes m.
    pub fn m(&self) -> usize {
        self.market.m()
    }

    /// Number of market investments (extra constraint rows not included).
    pub fn n_market(&self) -> usize {
        self.market.n()
    }

    pub fn n_extra(&self) -> usize {
        self.extra.len()
    }

    /// Returns a new set whose membership additionally requires `aᵀπ ≤ bound`.
    pub fn add_constraint(&self, a: &[f64], bound: f64) -> Result<Self> {
        if a.len() != self.m() {
            return Err(Error::InvalidArgument(format!(
                "constraint has {} entries but the grid has {} levels",
                a.len(),
                self.m()
            )));
        }
        if !bound.is_finite() {
            return Err(Error::InvalidArgument("constraint bound must be finite".into()));
        }
        let instr = Instrument::custom(
            format!("constraint {}", self.extra.len() + 1),
            a.to_vec(),
        )?;
        let form = instr.expectation_form(self.grid())?;
        let mut next = self.clone();
        next.extra.push((instr, bound, form));
        Ok(next)
    }

    /// Adds `aᵀπ = bound` as the two rows `(a, bound)` and `(-a, -bound)`.
    pub fn add_equality_constraint(&self, a: &[f64], bound: f64) -> Result<Self> {
        let negated: Vec<f64> = a.iter().map(|v| -v).collect();
        self.add_constraint(a, bound)?.add_constraint(&negated, -bound)
    }

    /// Worst constraint violation of `dist`, measured per row relative to
    /// `max(1, |bound|, ‖payoffs‖∞)`: solver residuals scale with the row's
    /// data magnitude (an out-of-the-money option can cost 0.1 yet pay 20).
    /// Zero means strictly feasible.
    pub fn constraint_violation(&self, dist: &Distribution) -> f64 {
        assert_eq!(dist.len(), self.m(), "distribution is on a different grid");
        let p = self.market.payoff_matrix();
        let mut worst: f64 = 0.0;
        let mut check = |payoffs: &mut dyn Iterator<Item = f64>, bound: f64| {
            let mut value = 0.0;
            let mut scale: f64 = bound.abs().max(1.0);
            for (f, pi) in payoffs.zip(dist.probs()) {
                value += f * pi;
                scale = scale.max(f.abs());
            }
            worst = worst.max((value - bound) / scale);
        };
        for (j, &c) in self.market.costs().iter().enumerate() {
            check(&mut p.column(j).iter().copied(), c);
        }
        for (instr, bound, _) in &self.extra {
            let col = instr
                .payoff_column(self.grid())
                .expect("validated at construction");
            check(&mut col.iter().copied(), *bound);
        }
        worst
    }

    /// Membership test at the configured feasibility tolerance.
    pub fn contains(&self, dist: &Distribution) -> bool {
        self.constraint_violation(dist) <= self.tols.feas
    }

    /// Decides whether the market admits arbitrage.
    ///
    /// Solves the phase-1 program `min u : Eⱼ(π) ≤ cⱼ + u, π ∈ Δ, u ≥ 0`.
    /// Its optimum equals the best guaranteed return achievable by a
    /// normalized portfolio, and its dual variables are that portfolio, so a
    /// single solve yields whichever certificate applies. Certificates are
    /// re-verified arithmetically before being returned.
    pub fn check_arbitrage(&self) -> Result<ArbitrageCheck> {
        let m = self.m();
        if self.n_market() + self.n_extra() == 0 {
            return Ok(ArbitrageCheck::NoArbitrage(Distribution::uniform(m)));
        }

        let mut builder = ConicBuilder::new();
        let relax = builder.new_var();
        let block = install_pi_block(&mut builder, self.grid(), None, true, None);
        let mut dual_rows = Vec::new();
        for (form, cost) in self.all_forms() {
            dual_rows.push(block.relaxed_investment_row(&mut builder, form, cost, relax));
        }
        builder.less_equal(vec![(relax, -1.0)], 0.0);
        let mut objective = vec![0.0; builder.num_vars()];
        objective[relax] = 1.0;

        let sol = builder.solve(&objective, &self.tols, false)?;
        match sol.status {
            RawStatus::Optimal => {}
            RawStatus::Infeasible => {
                return Err(Error::NumericalFailure(
                    "phase-1 arbitrage program reported infeasible".into(),
                ))
            }
            RawStatus::Failed(status) => {
                return Err(Error::NumericalFailure(format!(
                    "arbitrage check failed with solver status {status}"
                )))
            }
        }
        let relax_needed = sol.objective_value.max(0.0);

        if relax_needed > self.tols.arb {
            // Π is empty; the dual variables of the investment rows form the
            // arbitrage portfolio (they are normalized by the phase-1
            // objective gradient: Σλ ≤ 1).
            let mut weights: Vec<f64> = dual_rows
                .iter()
                .map(|&r| sol.duals_nonneg[r].max(0.0))
                .collect();
            let total: f64 = weights.iter().sum();
            if total > 1.0 {
                for w in weights.iter_mut() {
                    *w /= total;
                }
            }
            let certificate = ArbitrageCertificate { weights, guaranteed_return: 0.0 };
            let guaranteed = certificate.worst_case_return(self);
            if guaranteed > self.tols.arb {
                return Ok(ArbitrageCheck::Arbitrage(ArbitrageCertificate {
                    guaranteed_return: guaranteed,
                    ..certificate
                }));
            }
            return Err(Error::NumericalFailure(format!(
                "solver reports arbitrage (min relaxation {relax_needed:.3e}) but the \
                 recovered portfolio only guarantees {guaranteed:.3e}"
            )));
        }

        let pi = Distribution::with_tolerance(block.pi_values(&sol.x), self.tols.simplex)?;
        let violation = self.constraint_violation(&pi);
        // Sets within solver noise of empty admit certificates that are only
        // as feasible as the phase-1 relaxation itself.
        let allowed = self.tols.feas.max(2.0 * relax_needed);
        if violation <= allowed {
            Ok(ArbitrageCheck::NoArbitrage(pi))
        } else {
            Err(Error::NumericalFailure(format!(
                "no-arbitrage certificate violates constraints by {violation:.3e} \
                 (allowed {allowed:.3e})"
            )))
        }
    }

    /// Expectation forms with costs for every row of the set, market
    /// investments first, then synthetic constraint rows.
    pub(crate) fn all_forms(&self) -> impl Iterator<Item = (&ExpectationForm, f64)> {
        self.market
            .forms()
            .iter()
            .zip(self.market.costs().iter().copied())
            .chain(self.extra.iter().map(|(_, b, form)| (form, *b)))
    }

    pub(crate) fn all_costs(&self) -> impl Iterator<Item = f64> + '_ {
        self.market
            .costs()
            .iter()
            .copied()
            .chain(self.extra.iter().map(|(_, b, _)| *b))
    }

    /// Dense payoff columns for every row of the set (market then extra).
    pub(crate) fn all_columns(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let p = self.market.payoff_matrix();
        (0..self.market.n())
            .map(move |j| p.column(j).to_vec())
            .chain(self.extra.iter().map(|(instr, _, _)| {
                instr.payoff_column(self.grid()).expect("validated at construction")
            }))
    }

    /// Labels for every row of the set (market then extra).
    pub(crate) fn all_labels(&self) -> impl Iterator<Item = &str> {
        self.market
            .instruments()
            .iter()
            .map(|i| i.label())
            .chain(self.extra.iter().map(|(i, _, _)| i.label()))
    }
}
