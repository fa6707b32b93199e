//! Python bindings for the core types and operations: build a market from
//! quotes or explicit payoffs, then query bounds, certificates, and
//! estimates over its risk-neutral set.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rnp::analysis::{self, PriceFunction};
use rnp::estimate;
use rnp::market::{self, Quote, QuoteKind};
use rnp::optimize::{solve_linear, LinearProgramOverPi, Sense};
use rnp::polytope;

fn err(e: rnp::Error) -> PyErr {
    match e {
        rnp::Error::NumericalFailure(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// The discretized expiration prices.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct PriceGrid {
    inner: market::PriceGrid,
}

#[pymethods]
impl PriceGrid {
    #[new]
    fn new(values: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: market::PriceGrid::new(values).map_err(err)? })
    }

    /// Arithmetic grid `min, min+step, ..., max`.
    #[staticmethod]
    fn from_range(min: f64, max: f64, step: f64) -> PyResult<Self> {
        Ok(Self { inner: market::PriceGrid::from_range(min, max, step).map_err(err)? })
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Per-transaction fees applied when expanding quotes into investments.
#[pyclass(from_py_object)]
#[derive(Clone, Default)]
struct FeeSchedule {
    inner: market::FeeSchedule,
}

#[pymethods]
impl FeeSchedule {
    #[new]
    #[pyo3(signature = (option_fixed_fee=0.0, option_proportional_fee=0.0,
                        underlying_proportional_fee=0.0, future_buy_fee=0.0,
                        future_sell_rebate=0.0))]
    fn new(
        option_fixed_fee: f64,
        option_proportional_fee: f64,
        underlying_proportional_fee: f64,
        future_buy_fee: f64,
        future_sell_rebate: f64,
    ) -> PyResult<Self> {
        let inner = market::FeeSchedule {
            option_fixed_fee,
            option_proportional_fee,
            underlying_proportional_fee,
            future_buy_fee,
            future_sell_rebate,
        };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }
}

fn parse_kind(kind: &str) -> PyResult<QuoteKind> {
    match kind.to_ascii_lowercase().as_str() {
        "call" => Ok(QuoteKind::Call),
        "put" => Ok(QuoteKind::Put),
        "future" => Ok(QuoteKind::Future),
        "underlying" => Ok(QuoteKind::Underlying),
        "binary" => Ok(QuoteKind::Binary),
        other => Err(PyValueError::new_err(format!("unknown quote kind {other:?}"))),
    }
}

/// Instruments, costs, and the payoff matrix.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Market {
    inner: market::Market,
}

#[pymethods]
impl Market {
    /// Builds from explicit payoff columns (one list per investment).
    #[staticmethod]
    #[pyo3(signature = (grid, payoffs, costs, labels=None))]
    fn from_payoffs(
        grid: PriceGrid,
        payoffs: Vec<Vec<f64>>,
        costs: Vec<f64>,
        labels: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let instruments: Vec<market::Instrument> = payoffs
            .into_iter()
            .enumerate()
            .map(|(j, column)| {
                let label = labels
                    .as_ref()
                    .and_then(|l| l.get(j).cloned())
                    .unwrap_or_else(|| format!("investment {}", j + 1));
                market::Instrument::custom(label, column)
            })
            .collect::<Result<_, _>>()
            .map_err(err)?;
        Ok(Self { inner: market::Market::new(grid.inner, instruments, costs).map_err(err)? })
    }

    /// Builds from `(kind, strike, bid, ask)` quotes, expanding each side
    /// into an investment with fee-adjusted cost.
    #[staticmethod]
    #[pyo3(signature = (grid, quotes, fees=None, discount_factor=1.0))]
    fn from_quotes(
        grid: PriceGrid,
        quotes: Vec<(String, Option<f64>, Option<f64>, Option<f64>)>,
        fees: Option<FeeSchedule>,
        discount_factor: f64,
    ) -> PyResult<Self> {
        let fees = fees.unwrap_or_default().inner;
        let mut instruments = Vec::new();
        let mut costs = Vec::new();
        for (kind, strike, bid, ask) in quotes {
            let quote = Quote::new(parse_kind(&kind)?, strike, bid, ask);
            for (instr, cost) in market::quote_to_investments(&quote, &fees).map_err(err)? {
                instruments.push(instr);
                costs.push(cost);
            }
        }
        Ok(Self {
            inner: market::Market::with_discount(grid.inner, instruments, costs, discount_factor)
                .map_err(err)?,
        })
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.instruments().iter().map(|i| i.label().to_string()).collect()
    }

    #[getter]
    fn costs(&self) -> Vec<f64> {
        self.inner.costs().to_vec()
    }

    /// The m x n payoff matrix as nested lists (rows are outcomes).
    fn payoff_matrix(&self) -> Vec<Vec<f64>> {
        self.inner
            .payoff_matrix()
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect()
    }
}

/// The polytope of risk-neutral probabilities for a market.
#[pyclass]
struct RiskNeutralSet {
    inner: polytope::RiskNeutralSet,
}

#[pymethods]
impl RiskNeutralSet {
    #[new]
    fn new(market: Market) -> Self {
        Self { inner: polytope::RiskNeutralSet::new(market.inner) }
    }

    /// Returns `{"arbitrage": bool, ...}` with whichever certificate applies.
    fn check_arbitrage<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let out = PyDict::new(py);
        match self.inner.check_arbitrage().map_err(err)? {
            polytope::ArbitrageCheck::NoArbitrage(pi) => {
                out.set_item("arbitrage", false)?;
                out.set_item("risk_neutral_probability", pi.probs().to_vec())?;
            }
            polytope::ArbitrageCheck::Arbitrage(cert) => {
                out.set_item("arbitrage", true)?;
                out.set_item("weights", cert.weights)?;
                out.set_item("guaranteed_return", cert.guaranteed_return)?;
            }
        }
        Ok(out)
    }

    /// Membership test at the configured feasibility tolerance.
    fn contains(&self, probs: Vec<f64>) -> PyResult<bool> {
        let d = polytope::Distribution::new(probs).map_err(err)?;
        Ok(self.inner.contains(&d))
    }

    /// New set with the extra constraint `a·π ≤ bound`.
    fn add_constraint(&self, a: Vec<f64>, bound: f64) -> PyResult<Self> {
        Ok(Self { inner: self.inner.add_constraint(&a, bound).map_err(err)? })
    }

    /// `(lower, upper)` bounds on `E g(p)` for per-level values `g`.
    fn expectation_bounds(&self, g: Vec<f64>) -> PyResult<(f64, f64)> {
        let g = PriceFunction::from_values(g).map_err(err)?;
        let b = analysis::expectation_bounds(&self.inner, &g).map_err(err)?;
        Ok((b.lower, b.upper))
    }

    /// `(lower, upper)` bounds on the expected expiration price.
    fn expected_price_bounds(&self) -> PyResult<(f64, f64)> {
        self.expectation_bounds(self.inner.grid().values().to_vec())
    }

    /// Bounds on `E f / E g`.
    fn ratio_bounds(&self, f: Vec<f64>, g: Vec<f64>) -> PyResult<(f64, f64)> {
        let f = PriceFunction::from_values(f).map_err(err)?;
        let g = PriceFunction::from_values(g).map_err(err)?;
        let b = analysis::ratio_bounds(&self.inner, &f, &g).map_err(err)?;
        Ok((b.lower, b.upper))
    }

    /// CDF envelopes of `g` at `xs`: returns `(xs, f_min, f_max)`.
    fn cdf_bounds(&self, g: Vec<f64>, xs: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let g = PriceFunction::from_values(g).map_err(err)?;
        let b = analysis::cdf_bounds(&self.inner, &g, &xs).map_err(err)?;
        Ok((b.xs, b.f_min, b.f_max))
    }

    /// `(lower, upper)` bounds on VaR(g; eps).
    fn var_bounds(&self, g: Vec<f64>, eps: f64) -> PyResult<(f64, f64)> {
        let g = PriceFunction::from_values(g).map_err(err)?;
        let b = analysis::var_bounds(&self.inner, &g, eps).map_err(err)?;
        Ok((b.lower, b.upper))
    }

    /// Upper bound on CVaR(g; eps) over the set.
    fn cvar_upper_bound(&self, g: Vec<f64>, eps: f64) -> PyResult<f64> {
        let g = PriceFunction::from_values(g).map_err(err)?;
        analysis::cvar_upper_bound(&self.inner, &g, eps).map_err(err)
    }

    /// Arbitrage-consistent price bounds for a new payoff.
    fn price_bounds(&self, payoff: Vec<f64>) -> PyResult<(f64, f64)> {
        let payoff = PriceFunction::from_values(payoff).map_err(err)?;
        let b = analysis::price_bounds(&self.inner, &payoff).map_err(err)?;
        Ok((b.lower, b.upper))
    }

    /// The entropy-maximizing member of the set.
    fn max_entropy(&self) -> PyResult<Vec<f64>> {
        Ok(estimate::max_entropy(&self.inner).map_err(err)?.probs().to_vec())
    }

    /// KL projection of a reference onto the set.
    fn kl_project(&self, eta: Vec<f64>) -> PyResult<Vec<f64>> {
        let eta = polytope::Distribution::new(eta).map_err(err)?;
        Ok(estimate::kl_project(&self.inner, &eta).map_err(err)?.probs().to_vec())
    }

    /// Closest discretized log-normal by alternating projection.
    #[pyo3(signature = (max_iters=50, tol_div=1e-6, starts=5, seed=0))]
    fn closest_lognormal<'py>(
        &self,
        py: Python<'py>,
        max_iters: usize,
        tol_div: f64,
        starts: usize,
        seed: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let starting_points =
            estimate::default_starts(&self.inner, starts.saturating_sub(1), seed).map_err(err)?;
        let trace = estimate::closest_lognormal_multi(&self.inner, &starting_points, max_iters, tol_div)
            .map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("converged", trace.converged)?;
        out.set_item("iterations", trace.steps.len())?;
        out.set_item("divergence", trace.final_divergence())?;
        if let Some(fit) = trace.final_fit() {
            out.set_item("mu", fit.mu)?;
            out.set_item("sigma", fit.sigma)?;
        }
        Ok(out)
    }

    /// Dual variables of the entropy maximization problem, sorted by λ
    /// descending: a list of `(label, cost, lambda)` rows.
    fn sensitivity(&self) -> PyResult<Vec<(String, f64, f64)>> {
        let report = analysis::maxent_sensitivity(&self.inner).map_err(err)?;
        Ok(report
            .per_investment
            .into_iter()
            .map(|e| (e.label, e.cost, e.lambda))
            .collect())
    }

    /// Minimizes or maximizes an arbitrary linear objective over the set.
    fn solve_linear(&self, objective: Vec<f64>, maximize: bool) -> PyResult<(f64, Vec<f64>)> {
        let sense = if maximize { Sense::Max } else { Sense::Min };
        let result = solve_linear(&self.inner, &LinearProgramOverPi::new(objective, sense))
            .map_err(err)?;
        let pi = result.require_optimal().map_err(err)?;
        Ok((result.value, pi.probs().to_vec()))
    }
}

#[pymodule]
fn rnp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PriceGrid>()?;
    m.add_class::<FeeSchedule>()?;
    m.add_class::<Market>()?;
    m.add_class::<RiskNeutralSet>()?;
    Ok(())
}
