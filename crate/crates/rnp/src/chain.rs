//! Quote-chain snapshots, run configuration, and market assembly for the
//! CLI surface.
//!
//! Snapshot files come in two equivalent shapes: a CSV with columns
//! `kind,strike,bid,ask` (strike empty for the underlying), or a JSON
//! document `{underlying_price?, timestamp?, expiry?, quotes: [...]}` whose
//! quote objects mirror the CSV columns. Malformed rows are quarantined
//! into a rejects report rather than silently dropped; accepted plus
//! rejected rows always add up to the input rows.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::market::{quote_to_investments, FeeSchedule, Market, PriceGrid, Quote, QuoteKind};
use crate::polytope::RiskNeutralSet;
use crate::Result;
use crate::Tolerances;

/// A point-in-time option chain: quotes plus optional spot and metadata.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainSnapshot {
    pub underlying_price: Option<f64>,
    pub quotes: Vec<Quote>,
    pub timestamp: String,
    pub expiry: String,
}

/// One quarantined input row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based data row (CSV) or quote index (JSON).
    pub line: usize,
    pub reason: String,
    pub raw: String,
}

/// A parsed snapshot together with its rejects report.
#[derive(Debug, Clone)]
pub struct LoadedSnapshot {
    pub snapshot: ChainSnapshot,
    pub rejects: Vec<RejectedRow>,
    pub input_rows: usize,
}

impl LoadedSnapshot {
    pub fn accepted_rows(&self) -> usize {
        self.snapshot.quotes.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotFormat {
    Csv,
    Json,
}

impl SnapshotFormat {
    /// Guesses from the file extension, defaulting to CSV.
    pub fn infer(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => SnapshotFormat::Json,
            _ => SnapshotFormat::Csv,
        }
    }
}

/// Grid specification: `min, min+step, ..., max` (inclusive when it lands
/// on a step).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<PriceGrid> {
        PriceGrid::from_range(self.min, self.max, self.step)
    }
}

/// Optional overrides for the numerical thresholds in [`Tolerances`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceOverrides {
    pub feas: Option<f64>,
    pub arb: Option<f64>,
    pub opt: Option<f64>,
    pub cs: Option<f64>,
    pub simplex: Option<f64>,
    pub denom: Option<f64>,
    pub div: Option<f64>,
}

impl ToleranceOverrides {
    pub fn apply(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            feas: self.feas.unwrap_or(d.feas),
            arb: self.arb.unwrap_or(d.arb),
            opt: self.opt.unwrap_or(d.opt),
            cs: self.cs.unwrap_or(d.cs),
            simplex: self.simplex.unwrap_or(d.simplex),
            denom: self.denom.unwrap_or(d.denom),
            div: self.div.unwrap_or(d.div),
        }
    }
}

fn default_discount() -> f64 {
    1.0
}

/// Run configuration: grid, fees, discounting, and tolerance overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid: GridSpec,
    #[serde(default)]
    pub fees: FeeSchedule,
    #[serde(default = "default_discount")]
    pub discount_factor: f64,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: format!("config: {e}"),
        })
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances.apply()
    }
}

fn parse_kind(raw: &str) -> Option<QuoteKind> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "call" => Some(QuoteKind::Call),
        "put" => Some(QuoteKind::Put),
        "future" => Some(QuoteKind::Future),
        "underlying" => Some(QuoteKind::Underlying),
        "binary" => Some(QuoteKind::Binary),
        _ => None,
    }
}

/// Row-level validation shared by both formats. Returns the rejection
/// reason when the quote is unusable.
fn validate_quote(quote: &Quote) -> Option<String> {
    if quote.bid.is_none() && quote.ask.is_none() {
        return Some("neither bid nor ask quoted".into());
    }
    for (side, v) in [("bid", quote.bid), ("ask", quote.ask)] {
        if let Some(v) = v {
            if !v.is_finite() || v < 0.0 {
                return Some(format!("{side} must be finite and >= 0, got {v}"));
            }
        }
    }
    if let (Some(bid), Some(ask)) = (quote.bid, quote.ask) {
        if bid > ask {
            return Some(format!("crossed quote: bid {bid} > ask {ask}"));
        }
    }
    match quote.kind {
        QuoteKind::Underlying => {
            if quote.strike.is_some() {
                return Some("underlying quotes do not take a strike".into());
            }
        }
        _ => match quote.strike {
            None => return Some(format!("{:?} quote requires a strike", quote.kind)),
            Some(s) if !(s.is_finite() && s > 0.0) => {
                return Some(format!("strike must be finite and > 0, got {s}"))
            }
            _ => {}
        },
    }
    None
}

fn opt_field(raw: &str) -> std::result::Result<Option<f64>, String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>()
        .map(Some)
        .map_err(|_| format!("not a number: {raw:?}"))
}

fn load_csv(text: &str) -> Result<LoadedSnapshot> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    let want = ["kind", "strike", "bid", "ask"];
    let idx: Vec<Option<usize>> = want
        .iter()
        .map(|name| headers.iter().position(|h| h.eq_ignore_ascii_case(name)))
        .collect();
    if idx[0].is_none() {
        return Err(Error::Parse {
            line: 1,
            message: format!("missing `kind` column; headers are {headers:?}"),
        });
    }

    let mut quotes = Vec::new();
    let mut rejects = Vec::new();
    let mut input_rows = 0usize;
    for (row_number, record) in reader.records().enumerate() {
        let line = row_number + 1;
        input_rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                return Err(Error::Parse { line: line + 1, message: e.to_string() });
            }
        };
        let raw = record.iter().collect::<Vec<_>>().join(",");
        let field = |k: usize| idx[k].and_then(|i| record.get(i)).unwrap_or("");
        let reject = |reason: String, rejects: &mut Vec<RejectedRow>| {
            rejects.push(RejectedRow { line, reason, raw: raw.clone() });
        };

        let Some(kind) = parse_kind(field(0)) else {
            reject(format!("unknown kind {:?}", field(0)), &mut rejects);
            continue;
        };
        let strike = match opt_field(field(1)) {
            Ok(v) => v,
            Err(e) => {
                reject(format!("strike: {e}"), &mut rejects);
                continue;
            }
        };
        let bid = match opt_field(field(2)) {
            Ok(v) => v,
            Err(e) => {
                reject(format!("bid: {e}"), &mut rejects);
                continue;
            }
        };
        let ask = match opt_field(field(3)) {
            Ok(v) => v,
            Err(e) => {
                reject(format!("ask: {e}"), &mut rejects);
                continue;
            }
        };
        let quote = Quote::new(kind, strike, bid, ask);
        match validate_quote(&quote) {
            Some(reason) => reject(reason, &mut rejects),
            None => quotes.push(quote),
        }
    }
    Ok(LoadedSnapshot {
        snapshot: ChainSnapshot { quotes, ..ChainSnapshot::default() },
        rejects,
        input_rows,
    })
}

fn load_json(text: &str) -> Result<LoadedSnapshot> {
    let parsed: ChainSnapshot = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let input_rows = parsed.quotes.len();
    let mut quotes = Vec::new();
    let mut rejects = Vec::new();
    for (i, quote) in parsed.quotes.into_iter().enumerate() {
        match validate_quote(&quote) {
            Some(reason) => rejects.push(RejectedRow {
                line: i + 1,
                reason,
                raw: serde_json::to_string(&quote).unwrap_or_default(),
            }),
            None => quotes.push(quote),
        }
    }
    Ok(LoadedSnapshot {
        snapshot: ChainSnapshot { quotes, ..parsed },
        rejects,
        input_rows,
    })
}

/// Loads and validates a snapshot file. Malformed rows land in the rejects
/// report; a snapshot with no usable quotes at all is an error.
pub fn load_snapshot(path: &Path, format: SnapshotFormat) -> Result<LoadedSnapshot> {
    let text = std::fs::read_to_string(path)?;
    let loaded = match format {
        SnapshotFormat::Csv => load_csv(&text)?,
        SnapshotFormat::Json => load_json(&text)?,
    };
    if loaded.snapshot.quotes.is_empty() && loaded.snapshot.underlying_price.is_none() {
        return Err(Error::EmptyMarket);
    }
    Ok(loaded)
}

/// Expands every quote into its buy/sell investments, adds the spot as a
/// two-sided underlying quote when the snapshot carries one and no explicit
/// underlying row exists, and assembles the market and its risk-neutral set.
pub fn build_market(snapshot: &ChainSnapshot, config: &RunConfig) -> Result<(Market, RiskNeutralSet)> {
    config.fees.validate()?;
    let grid = config.grid.build()?;
    let mut instruments = Vec::new();
    let mut costs = Vec::new();
    let mut expand = |quote: &Quote| -> Result<()> {
        for (instr, cost) in quote_to_investments(quote, &config.fees)? {
            instruments.push(instr);
            costs.push(cost);
        }
        Ok(())
    };
    for quote in &snapshot.quotes {
        expand(quote)?;
    }
    if let Some(spot) = snapshot.underlying_price {
        let has_underlying = snapshot
            .quotes
            .iter()
            .any(|q| matches!(q.kind, QuoteKind::Underlying));
        if !has_underlying {
            expand(&Quote::new(QuoteKind::Underlying, None, Some(spot), Some(spot)))?;
        }
    }
    let market = Market::with_discount(grid, instruments, costs, config.discount_factor)?;
    let set = RiskNeutralSet::with_tolerances(market.clone(), config.tolerances());
    Ok((market, set))
}

/// Serializable mirror of a [`Market`] for result files and round-trips.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketDoc {
    pub grid: Vec<f64>,
    pub instruments: Vec<crate::market::Instrument>,
    pub costs: Vec<f64>,
    pub discount_factor: f64,
}

impl MarketDoc {
    pub fn from_market(market: &Market) -> Self {
        Self {
            grid: market.grid().values().to_vec(),
            instruments: market.instruments().to_vec(),
            costs: market.costs().to_vec(),
            discount_factor: market.discount_factor(),
        }
    }

    pub fn into_market(self) -> Result<Market> {
        Market::with_discount(
            PriceGrid::new(self.grid)?,
            self.instruments,
            self.costs,
            self.discount_factor,
        )
    }
}
