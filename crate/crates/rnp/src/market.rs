//! Instruments, payoff functions, fee-adjusted costs, and the payoff matrix.
//!
//! Payoffs are settled at a single expiration against a discretized price
//! grid `p_1 < ... < p_m`. An [`Instrument`] is a payoff function plus a
//! side (long/short, buy/write); a [`Market`] is a list of instruments with
//! their acquisition costs and owns the dense m×n payoff matrix
//! `P[i][j] = payoff(instrument j, p_i)`.
//!
//! Besides the dense column, every instrument can describe its expected
//! payoff as a sparse affine function of tail sums of π (see
//! [`ExpectationForm`]); the solver layer uses that to keep vanilla option
//! constraints O(1)-sparse regardless of the grid size.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// The discretized expiration prices `p_1 < p_2 < ... < p_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceGrid {
    values: Vec<f64>,
}

impl PriceGrid {
    /// Builds a grid from explicit levels. Levels must be finite, strictly
    /// positive, and strictly increasing.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("grid must contain at least one price".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidGrid("grid prices must be finite and > 0".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("grid prices must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// Builds the arithmetic grid `min, min+step, ...` with
    /// `m = floor((max-min)/step) + 1` levels.
    pub fn from_range(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(min > 0.0 && step > 0.0 && max > min) {
            return Err(Error::InvalidGrid(format!(
                "range requires 0 < min < max and step > 0, got min={min}, max={max}, step={step}"
            )));
        }
        // The small relative slack keeps e.g. (30000-5)/5 from rounding below
        // an integer and dropping the last level.
        let steps = ((max - min) / step * (1.0 + 1e-12)).floor() as usize;
        Ok(Self {
            values: (0..=steps).map(|i| min + step * i as f64).collect(),
        })
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

    /// Cell edges used when discretizing a continuous density onto the grid:
    /// arithmetic midpoints between levels, with open tails `(0, ...]` and
    /// `[..., +inf)` absorbing all mass outside the grid span.
    pub fn cell_edges(&self) -> Vec<(f64, f64)> {
        let m = self.values.len();
        (0..m)
            .map(|i| {
                let lo = if i == 0 {
                    0.0
                } else {
                    0.5 * (self.values[i - 1] + self.values[i])
                };
                let hi = if i + 1 == m {
                    f64::INFINITY
                } else {
                    0.5 * (self.values[i] + self.values[i + 1])
                };
                (lo, hi)
            })
            .collect()
    }
}

/// Payoff function kinds. Buy/long kinds receive the payoff, write/short
/// kinds pay it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstrumentKind {
    UnderlyingLong,
    UnderlyingShort,
    CallBuy,
    CallWrite,
    PutBuy,
    PutWrite,
    FutureLong,
    FutureShort,
    BinaryAboveBuy,
    BinaryAboveSell,
    CustomPayoff,
}

impl InstrumentKind {
    /// Whether the kind carries a strike.
    pub fn requires_strike(self) -> bool {
        !matches!(
            self,
            InstrumentKind::UnderlyingLong
                | InstrumentKind::UnderlyingShort
                | InstrumentKind::CustomPayoff
        )
    }
}

/// A single investment: a payoff function with an optional strike, or an
/// arbitrary per-outcome payoff vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instrument {
    kind: InstrumentKind,
    strike: Option<f64>,
    payoff_vector: Option<Vec<f64>>,
    label: String,
}

fn format_strike(s: f64) -> String {
    if (s - s.round()).abs() < 1e-9 {
        format!("{}", s.round() as i64)
    } else {
        format!("{s}")
    }
}

impl Instrument {
    /// Builds an instrument of the given kind. `strike` is required for
    /// option, future, and binary kinds and must be positive.
    pub fn new(kind: InstrumentKind, strike: Option<f64>) -> Result<Self> {
        if kind == InstrumentKind::CustomPayoff {
            return Err(Error::InvalidInstrument(
                "custom payoffs must be built with Instrument::custom".into(),
            ));
        }
        match strike {
            Some(s) if !kind.requires_strike() => {
                return Err(Error::InvalidInstrument(format!(
                    "{kind:?} does not take a strike (got {s})"
                )))
            }
            Some(s) if !(s.is_finite() && s > 0.0) => {
                return Err(Error::InvalidInstrument(format!(
                    "strike must be finite and > 0, got {s}"
                )))
            }
            None if kind.requires_strike() => {
                return Err(Error::InvalidInstrument(format!("{kind:?} requires a strike")))
            }
            _ => {}
        }
        let label = match (kind, strike) {
            (InstrumentKind::UnderlyingLong, _) => "long underlying".to_string(),
            (InstrumentKind::UnderlyingShort, _) => "short underlying".to_string(),
            (InstrumentKind::CallBuy, Some(s)) => format!("buy {} call", format_strike(s)),
            (InstrumentKind::CallWrite, Some(s)) => format!("write {} call", format_strike(s)),
            (InstrumentKind::PutBuy, Some(s)) => format!("buy {} put", format_strike(s)),
            (InstrumentKind::PutWrite, Some(s)) => format!("write {} put", format_strike(s)),
            (InstrumentKind::FutureLong, Some(s)) => format!("long {} future", format_strike(s)),
            (InstrumentKind::FutureShort, Some(s)) => format!("short {} future", format_strike(s)),
            (InstrumentKind::BinaryAboveBuy, Some(s)) => format!("buy {} binary", format_strike(s)),
            (InstrumentKind::BinaryAboveSell, Some(s)) => {
                format!("sell {} binary", format_strike(s))
            }
            _ => unreachable!("strike presence validated above"),
        };
        Ok(Self { kind, strike, payoff_vector: None, label })
    }

    /// An arbitrary payoff vector over the grid. Used both for exotic
    /// payoffs and for constraints added to the risk-neutral set, which
    /// behave exactly like synthetic investments.
    pub fn custom(label: impl Into<String>, payoffs: Vec<f64>) -> Result<Self> {
        if payoffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstrument("custom payoffs must be finite".into()));
        }
        Ok(Self {
            kind: InstrumentKind::CustomPayoff,
            strike: None,
            payoff_vector: Some(payoffs),
            label: label.into(),
        })
    }

    pub fn kind(&self) -> InstrumentKind {
        self.kind
    }

    pub fn strike(&self) -> Option<f64> {
        self.strike
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Overrides the autogenerated label.
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Dollar payoff per unit at expiration price `p`.
    ///
    /// Custom payoffs are defined per grid index, not as a function of an
    /// arbitrary price, and report `InvalidInstrument` here; use
    /// [`Instrument::payoff_column`] instead.
    pub fn payoff_at(&self, p: f64) -> Result<f64> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "expiration price must be finite and > 0, got {p}"
            )));
        }
        let strike = |label: &str| {
            self.strike
                .ok_or_else(|| Error::InvalidInstrument(format!("{label} requires a strike")))
        };
        Ok(match self.kind {
            InstrumentKind::UnderlyingLong => p,
            InstrumentKind::UnderlyingShort => -p,
            InstrumentKind::CallBuy => (p - strike("call")?).max(0.0),
            InstrumentKind::CallWrite => -(p - strike("call")?).max(0.0),
            InstrumentKind::PutBuy => (strike("put")? - p).max(0.0),
            InstrumentKind::PutWrite => -(strike("put")? - p).max(0.0),
            InstrumentKind::FutureLong => p - strike("future")?,
            InstrumentKind::FutureShort => strike("future")? - p,
            InstrumentKind::BinaryAboveBuy => {
                if p >= strike("binary")? {
                    1.0
                } else {
                    0.0
                }
            }
            InstrumentKind::BinaryAboveSell => {
                if p >= strike("binary")? {
                    -1.0
                } else {
                    0.0
                }
            }
            InstrumentKind::CustomPayoff => {
                return Err(Error::InvalidInstrument(
                    "custom payoff is defined per grid index, not per price".into(),
                ))
            }
        })
    }

    /// Payoff evaluated on every grid level, i.e. one column of `P`.
    pub fn payoff_column(&self, grid: &PriceGrid) -> Result<Vec<f64>> {
        if let Some(v) = &self.payoff_vector {
            if v.len() != grid.len() {
                return Err(Error::InvalidInstrument(format!(
                    "custom payoff has {} entries but the grid has {} levels",
                    v.len(),
                    grid.len()
                )));
            }
            return Ok(v.clone());
        }
        grid.values().iter().map(|&p| self.payoff_at(p)).collect()
    }

    /// Expected payoff as a sparse affine form over tail sums of π.
    /// Agrees exactly with `payoff_column(grid) · π` for every π ∈ Δ.
    pub fn expectation_form(&self, grid: &PriceGrid) -> Result<ExpectationForm> {
        let ps = grid.values();
        let m = ps.len();
        let mut form = ExpectationForm::default();
        match self.kind {
            InstrumentKind::CustomPayoff => {
                let col = self.payoff_column(grid)?;
                form.pi = col
                    .into_iter()
                    .enumerate()
                    .filter(|(_, v)| *v != 0.0)
                    .collect();
            }
            InstrumentKind::UnderlyingLong | InstrumentKind::UnderlyingShort => {
                let sign = if self.kind == InstrumentKind::UnderlyingLong { 1.0 } else { -1.0 };
                form.tail_price.push((0, sign));
            }
            InstrumentKind::FutureLong | InstrumentKind::FutureShort => {
                let s = self.strike.expect("validated at construction");
                let sign = if self.kind == InstrumentKind::FutureLong { 1.0 } else { -1.0 };
                form.constant = -sign * s;
                form.tail_price.push((0, sign));
            }
            InstrumentKind::CallBuy | InstrumentKind::CallWrite => {
                // E(p - s)_+ = S_j - s T_j with j the first level above the strike.
                let s = self.strike.expect("validated at construction");
                let sign = if self.kind == InstrumentKind::CallBuy { 1.0 } else { -1.0 };
                let j = ps.partition_point(|&p| p <= s);
                if j < m {
                    form.tail_price.push((j, sign));
                    form.tail_prob.push((j, -sign * s));
                }
            }
            InstrumentKind::PutBuy | InstrumentKind::PutWrite => {
                // E(s - p)_+ = s(1 - T_j) - (S_0 - S_j) with j the first level
                // at or above the strike; the s*1 term uses Σπ = 1.
                let s = self.strike.expect("validated at construction");
                let sign = if self.kind == InstrumentKind::PutBuy { 1.0 } else { -1.0 };
                let j = ps.partition_point(|&p| p < s);
                form.constant = sign * s;
                form.tail_prob.push((j.min(m), -sign * s));
                if j == 0 {
                    // Strike at or below the whole grid: payoff is identically 0
                    // once Σπ = 1, and the S terms cancel exactly.
                } else if j < m {
                    form.tail_price.push((0, -sign));
                    form.tail_price.push((j, sign));
                } else {
                    form.tail_price.push((0, -sign));
                }
                form.tail_prob.retain(|&(j, _)| j < m);
            }
            InstrumentKind::BinaryAboveBuy | InstrumentKind::BinaryAboveSell => {
                let s = self.strike.expect("validated at construction");
                let sign = if self.kind == InstrumentKind::BinaryAboveBuy { 1.0 } else { -1.0 };
                let j = ps.partition_point(|&p| p < s);
                if j < m {
                    form.tail_prob.push((j, sign));
                }
            }
        }
        Ok(form)
    }
}

/// `E[f(p)]` written as a sparse affine function of π and its tail sums:
///
/// ```text
/// E[f(p)] = constant + Σ pi[i]·π_i + Σ tail_prob[j]·T_j + Σ tail_price[j]·S_j
/// T_j = Σ_{k ≥ j} π_k          (tail probability)
/// S_j = Σ_{k ≥ j} p_k π_k      (tail price mass)
/// ```
///
/// The constant term relies on `Σπ = 1` and is exact only on the simplex,
/// which is where every consumer evaluates it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExpectationForm {
    pub constant: f64,
    pub pi: Vec<(usize, f64)>,
    pub tail_prob: Vec<(usize, f64)>,
    pub tail_price: Vec<(usize, f64)>,
}

impl ExpectationForm {
    /// Evaluates the form against an explicit probability vector.
    pub fn evaluate(&self, probs: &[f64], grid: &PriceGrid) -> f64 {
        let ps = grid.values();
        let mut tail_prob = vec![0.0; ps.len() + 1];
        let mut tail_price = vec![0.0; ps.len() + 1];
        for i in (0..ps.len()).rev() {
            tail_prob[i] = tail_prob[i + 1] + probs[i];
            tail_price[i] = tail_price[i + 1] + ps[i] * probs[i];
        }
        let mut v = self.constant;
        for &(i, c) in &self.pi {
            v += c * probs[i];
        }
        for &(j, c) in &self.tail_prob {
            v += c * tail_prob[j];
        }
        for &(j, c) in &self.tail_price {
            v += c * tail_price[j];
        }
        v
    }

    /// Scales the whole form (used for discounting).
    pub(crate) fn scaled(mut self, factor: f64) -> Self {
        self.constant *= factor;
        for (_, c) in self
            .pi
            .iter_mut()
            .chain(self.tail_prob.iter_mut())
            .chain(self.tail_price.iter_mut())
        {
            *c *= factor;
        }
        self
    }
}

/// Per-transaction fees and rebates applied when converting quotes to costs.
///
/// Option fees have a fixed per-contract part and a part proportional to the
/// traded premium. Underlying and futures fees are proportional to notional;
/// the futures sell rebate is subtracted from the cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeeSchedule {
    pub option_fixed_fee: f64,
    pub option_proportional_fee: f64,
    pub underlying_proportional_fee: f64,
    pub future_buy_fee: f64,
    pub future_sell_rebate: f64,
}

impl Default for FeeSchedule {
    fn default() -> Self {
        Self::zero()
    }
}

impl FeeSchedule {
    /// A frictionless market.
    pub fn zero() -> Self {
        Self {
            option_fixed_fee: 0.0,
            option_proportional_fee: 0.0,
            underlying_proportional_fee: 0.0,
            future_buy_fee: 0.0,
            future_sell_rebate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("option_fixed_fee", self.option_fixed_fee),
            ("option_proportional_fee", self.option_proportional_fee),
            ("underlying_proportional_fee", self.underlying_proportional_fee),
            ("future_buy_fee", self.future_buy_fee),
            ("future_sell_rebate", self.future_sell_rebate),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "fee {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn option_cost(&self, premium: f64) -> f64 {
        self.option_fixed_fee + self.option_proportional_fee * premium
    }
}

/// Quote kinds accepted from chain snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuoteKind {
    Call,
    Put,
    Future,
    Underlying,
    Binary,
}

/// One two-sided (or one-sided) quote from the market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub kind: QuoteKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bid: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ask: Option<f64>,
}

impl Quote {
    pub fn new(kind: QuoteKind, strike: Option<f64>, bid: Option<f64>, ask: Option<f64>) -> Self {
        Self { kind, strike, bid, ask }
    }
}

/// Expands a quote into up to two investments, one per quoted side.
///
/// The cost of buying is the ask plus fees; the cost of selling is the
/// negated bid plus fees (rebates subtract). Futures are entered at zero
/// premium, so their quoted level becomes the strike of a `p - s` payoff and
/// only the notional fee (or rebate) is paid upfront. A side with an absent
/// quote is skipped; the buy side is also skipped when the book is crossed
/// (ask below bid).
pub fn quote_to_investments(quote: &Quote, fees: &FeeSchedule) -> Result<Vec<(Instrument, f64)>> {
    fees.validate()?;
    for (side, v) in [("bid", quote.bid), ("ask", quote.ask)] {
        if let Some(v) = v {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::MalformedQuote(format!(
                    "{side} must be finite and >= 0, got {v}"
                )));
            }
        }
    }
    if quote.strike.is_none() && !matches!(quote.kind, QuoteKind::Underlying) {
        return Err(Error::MalformedQuote(format!(
            "{:?} quote requires a strike",
            quote.kind
        )));
    }

    let crossed = matches!((quote.bid, quote.ask), (Some(b), Some(a)) if a < b);
    let mut out = Vec::with_capacity(2);

    match quote.kind {
        QuoteKind::Call | QuoteKind::Put | QuoteKind::Binary => {
            let s = quote.strike.expect("checked above");
            let (buy_kind, sell_kind) = match quote.kind {
                QuoteKind::Call => (InstrumentKind::CallBuy, InstrumentKind::CallWrite),
                QuoteKind::Put => (InstrumentKind::PutBuy, InstrumentKind::PutWrite),
                _ => (InstrumentKind::BinaryAboveBuy, InstrumentKind::BinaryAboveSell),
            };
            if let Some(ask) = quote.ask {
                if !crossed {
                    out.push((Instrument::new(buy_kind, Some(s))?, ask + fees.option_cost(ask)));
                }
            }
            if let Some(bid) = quote.bid {
                out.push((Instrument::new(sell_kind, Some(s))?, -bid + fees.option_cost(bid)));
            }
        }
        QuoteKind::Underlying => {
            if let Some(ask) = quote.ask {
                if !crossed {
                    out.push((
                        Instrument::new(InstrumentKind::UnderlyingLong, None)?,
                        ask + fees.underlying_proportional_fee * ask,
                    ));
                }
            }
            if let Some(bid) = quote.bid {
                out.push((
                    Instrument::new(InstrumentKind::UnderlyingShort, None)?,
                    -bid + fees.underlying_proportional_fee * bid,
                ));
            }
        }
        QuoteKind::Future => {
            // The quoted side sets the strike of the zero-premium contract.
            if let Some(ask) = quote.ask {
                if !crossed && ask > 0.0 {
                    out.push((
                        Instrument::new(InstrumentKind::FutureLong, Some(ask))?,
                        fees.future_buy_fee * ask,
                    ));
                }
            }
            if let Some(bid) = quote.bid {
                if bid > 0.0 {
                    out.push((
                        Instrument::new(InstrumentKind::FutureShort, Some(bid))?,
                        -fees.future_sell_rebate * bid,
                    ));
                }
            }
        }
    }
    Ok(out)
}

/// Instruments, costs, and the payoff matrix over a price grid.
///
/// Immutable after construction; all accessors are cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    grid: PriceGrid,
    instruments: Vec<Instrument>,
    costs: Vec<f64>,
    discount_factor: f64,
    payoff_matrix: Array2<f64>,
    forms: Vec<ExpectationForm>,
}

impl Market {
    pub fn new(grid: PriceGrid, instruments: Vec<Instrument>, costs: Vec<f64>) -> Result<Self> {
        Self::with_discount(grid, instruments, costs, 1.0)
    }

    /// As [`Market::new`], with all payoffs multiplied by a fixed discount
    /// factor (costs are quoted today and are not discounted).
    pub fn with_discount(
        grid: PriceGrid,
        instruments: Vec<Instrument>,
        costs: Vec<f64>,
        discount_factor: f64,
    ) -> Result<Self> {
        if instruments.len() != costs.len() {
            return Err(Error::InvalidArgument(format!(
                "{} instruments but {} costs",
                instruments.len(),
                costs.len()
            )));
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("costs must be finite".into()));
        }
        if !(discount_factor.is_finite() && discount_factor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "discount factor must be finite and > 0, got {discount_factor}"
            )));
        }
        let m = grid.len();
        let n = instruments.len();
        let mut payoff_matrix = Array2::zeros((m, n));
        let mut forms = Vec::with_capacity(n);
        for (j, instr) in instruments.iter().enumerate() {
            let col = instr.payoff_column(&grid)?;
            for (i, v) in col.into_iter().enumerate() {
                payoff_matrix[(i, j)] = discount_factor * v;
            }
            forms.push(instr.expectation_form(&grid)?.scaled(discount_factor));
        }
        Ok(Self { grid, instruments, costs, discount_factor, payoff_matrix, forms })
    }

    pub fn grid(&self) -> &PriceGrid {
        &self.grid
    }

    pub fn instruments(&self) -> &[Instrument] {
        &self.instruments
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn discount_factor(&self) -> f64 {
        self.discount_factor
    }

    /// Number of investments.
    pub fn n(&self) -> usize {
        self.instruments.len()
    }

    /// Number of outcomes.
    pub fn m(&self) -> usize {
        self.grid.len()
    }

    /// The dense m×n payoff matrix (discounted when a factor was supplied).
    pub fn payoff_matrix(&self) -> &Array2<f64> {
        &self.payoff_matrix
    }

    pub(crate) fn forms(&self) -> &[ExpectationForm] {
        &self.forms
    }
}
