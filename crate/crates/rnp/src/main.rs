//! `rnp`: arbitrage checks and risk-neutral bounds from a quote snapshot.
//!
//! Every subcommand reads a snapshot (`--snapshot`) and a run configuration
//! (`--config`), writes `<out>/<subcommand>.json` embedding the
//! configuration and the snapshot digest, and for curve-valued results also
//! writes `<out>/<subcommand>.csv` with one row per evaluation point.
//! Outputs are byte-for-byte reproducible for identical inputs.
//!
//! Exit codes: 0 success, 2 arbitrage detected by `check`, 64 usage errors,
//! 1 everything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use rnp::analysis::{
    self, ccdf_bounds, cdf_bounds, cvar_upper_bound, expectation_bounds, price_bounds,
    ratio_bounds, PriceFunction,
};
use rnp::chain::{build_market, load_snapshot, LoadedSnapshot, RunConfig, SnapshotFormat};
use rnp::error::Error;
use rnp::estimate::{
    annualized_volatility, closest_lognormal_multi, default_starts, max_entropy,
};
use rnp::market::{InstrumentKind, Instrument};
use rnp::polytope::{ArbitrageCheck, Distribution, RiskNeutralSet};

#[derive(Parser)]
#[command(
    name = "rnp",
    version,
    about = "Arbitrage checks and bounds over risk-neutral probabilities implied by derivative quotes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Quote snapshot file (CSV `kind,strike,bid,ask` or JSON).
    #[arg(long, global = true)]
    snapshot: Option<PathBuf>,

    /// Run configuration file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for result files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Snapshot format; inferred from the extension when omitted.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum NewInstrumentKind {
    Call,
    Put,
    Binary,
}

#[derive(Subcommand)]
enum Command {
    /// Decide arbitrage and emit the certificate (exit 2 on arbitrage).
    Check,
    /// Bounds on the expected expiration price.
    Expectation,
    /// Bounds on Prob(p in event | p in given) for price intervals.
    Ratio {
        #[arg(long)]
        event_min: Option<f64>,
        #[arg(long)]
        event_max: Option<f64>,
        #[arg(long)]
        given_min: Option<f64>,
        #[arg(long)]
        given_max: Option<f64>,
    },
    /// CDF envelopes of the expiration price.
    Cdf {
        /// Evaluation points (grid levels, subsampled).
        #[arg(long)]
        points: Option<usize>,
        /// Also compute CCDF envelopes (their own programs, not 1 - CDF).
        #[arg(long)]
        ccdf: bool,
    },
    /// Value-at-risk bounds across probability levels.
    Var {
        /// Number of probability levels.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Upper bound on CVaR of the expiration price.
    Cvar {
        #[arg(long, default_value_t = 0.9)]
        eps: f64,
    },
    /// Arbitrage-consistent price bounds for a new instrument.
    PriceBounds {
        #[arg(long, value_enum)]
        kind: Option<NewInstrumentKind>,
        #[arg(long)]
        strike: Option<f64>,
        /// Custom payoff: one value per grid level, one per line.
        #[arg(long)]
        payoff_csv: Option<PathBuf>,
    },
    /// Hold each option out and re-price it from the rest of the market.
    Holdout,
    /// Maximum-entropy member of the risk-neutral set.
    Maxent,
    /// KL projection of a reference distribution onto the set.
    KlProject {
        /// Reference masses, one per grid level, one per line.
        #[arg(long)]
        reference: PathBuf,
    },
    /// Closest discretized log-normal by alternating projection.
    Lognormal {
        #[arg(long, default_value_t = 50)]
        max_iters: usize,
        #[arg(long)]
        tol_div: Option<f64>,
        /// Number of starting points (maxent plus random members).
        #[arg(long, default_value_t = 5)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Days to expiry; enables the annualized volatility summary.
        #[arg(long)]
        days: Option<f64>,
        #[arg(long, default_value_t = 365.0)]
        day_count: f64,
    },
    /// Dual variables of the entropy maximization problem.
    Sensitivity,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Expectation => "expectation",
            Command::Ratio { .. } => "ratio",
            Command::Cdf { .. } => "cdf",
            Command::Var { .. } => "var",
            Command::Cvar { .. } => "cvar",
            Command::PriceBounds { .. } => "price-bounds",
            Command::Holdout => "holdout",
            Command::Maxent => "maxent",
            Command::KlProject { .. } => "kl-project",
            Command::Lognormal { .. } => "lognormal",
            Command::Sensitivity => "sensitivity",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    subcommand: &'a str,
    snapshot: String,
    input_digest: String,
    input_rows: usize,
    accepted_rows: usize,
    rejects: &'a [rnp::chain::RejectedRow],
    config: &'a RunConfig,
    result: serde_json::Value,
}

fn run(cli: Cli) -> rnp::Result<u8> {
    let Some(snapshot_path) = cli.snapshot.clone() else {
        eprintln!("error: --snapshot is required\n\nUsage: rnp <COMMAND> --snapshot <FILE> --config <FILE>");
        return Ok(64);
    };
    let Some(config_path) = cli.config.clone() else {
        eprintln!("error: --config is required\n\nUsage: rnp <COMMAND> --snapshot <FILE> --config <FILE>");
        return Ok(64);
    };

    let config = RunConfig::load(&config_path)?;
    let format = match cli.format {
        Some(FormatArg::Csv) => SnapshotFormat::Csv,
        Some(FormatArg::Json) => SnapshotFormat::Json,
        None => SnapshotFormat::infer(&snapshot_path),
    };
    let digest = {
        let bytes = std::fs::read(&snapshot_path)?;
        let hash = Sha256::digest(&bytes);
        let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
        format!("sha256:{hex}")
    };
    let loaded = load_snapshot(&snapshot_path, format)?;
    let (_market, set) = build_market(&loaded.snapshot, &config)?;

    std::fs::create_dir_all(&cli.out)?;
    let (result, code) = execute(&cli.command, &set, &loaded, &config, &cli.out)?;

    let envelope = Envelope {
        subcommand: cli.command.name(),
        snapshot: snapshot_path.display().to_string(),
        input_digest: digest,
        input_rows: loaded.input_rows,
        accepted_rows: loaded.accepted_rows(),
        rejects: &loaded.rejects,
        config: &config,
        result,
    };
    let json_path = cli.out.join(format!("{}.json", cli.command.name()));
    std::fs::write(&json_path, serde_json::to_string_pretty(&envelope)? + "\n")?;
    println!("wrote {}", json_path.display());
    Ok(code)
}

/// Evenly subsamples sorted values down to at most `limit` points,
/// always keeping both endpoints.
fn subsample(values: &[f64], limit: usize) -> Vec<f64> {
    if values.len() <= limit || limit < 2 {
        return values.to_vec();
    }
    let last = values.len() - 1;
    let mut out: Vec<f64> = (0..limit)
        .map(|k| values[(k as f64 / (limit - 1) as f64 * last as f64).round() as usize])
        .collect();
    out.dedup();
    out
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> rnp::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(row).map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn distribution_csv(path: &Path, set: &RiskNeutralSet, columns: &[(&str, &Distribution)]) -> rnp::Result<()> {
    let mut header = vec!["price"];
    header.extend(columns.iter().map(|(name, _)| *name));
    let rows: Vec<Vec<String>> = set
        .grid()
        .values()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut row = vec![p.to_string()];
            row.extend(columns.iter().map(|(_, d)| d.probs()[i].to_string()));
            row
        })
        .collect();
    write_csv(path, &header, &rows)
}

fn read_column(path: &Path) -> rnp::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("not a number: {line:?}"),
        })?;
        out.push(v);
    }
    Ok(out)
}

fn execute(
    command: &Command,
    set: &RiskNeutralSet,
    loaded: &LoadedSnapshot,
    config: &RunConfig,
    out: &Path,
) -> rnp::Result<(serde_json::Value, u8)> {
    let grid = set.grid().clone();
    let price = PriceFunction::identity(&grid);
    match command {
        Command::Check => match set.check_arbitrage()? {
            ArbitrageCheck::NoArbitrage(pi) => {
                distribution_csv(&out.join("check.csv"), set, &[("risk_neutral_probability", &pi)])?;
                Ok((
                    json!({
                        "arbitrage": false,
                        "risk_neutral_probability": pi.probs(),
                    }),
                    0,
                ))
            }
            ArbitrageCheck::Arbitrage(cert) => Ok((
                json!({
                    "arbitrage": true,
                    "weights": cert.weights,
                    "guaranteed_return": cert.guaranteed_return,
                    "investments": set.market().instruments().iter().map(|i| i.label()).collect::<Vec<_>>(),
                }),
                2,
            )),
        },

        Command::Expectation => {
            let b = expectation_bounds(set, &price)?;
            distribution_csv(
                &out.join("expectation.csv"),
                set,
                &[("argmin", &b.argmin_pi), ("argmax", &b.argmax_pi)],
            )?;
            Ok((json!({"lower": b.lower, "upper": b.upper}), 0))
        }

        Command::Ratio { event_min, event_max, given_min, given_max } => {
            let (elo, ehi) = (event_min.unwrap_or(f64::NEG_INFINITY), event_max.unwrap_or(f64::INFINITY));
            let (glo, ghi) = (given_min.unwrap_or(f64::NEG_INFINITY), given_max.unwrap_or(f64::INFINITY));
            let event = PriceFunction::indicator(&grid, |p| {
                (elo..=ehi).contains(&p) && (glo..=ghi).contains(&p)
            });
            let given = PriceFunction::interval_indicator(&grid, glo, ghi);
            let b = ratio_bounds(set, &event, &given)?;
            Ok((
                json!({
                    "event": [elo, ehi],
                    "given": [glo, ghi],
                    "lower": b.lower,
                    "upper": b.upper,
                }),
                0,
            ))
        }

        Command::Cdf { points, ccdf } => {
            let xs = subsample(grid.values(), points.unwrap_or(500));
            let bounds = cdf_bounds(set, &price, &xs)?;
            let upper = if *ccdf { Some(ccdf_bounds(set, &price, &xs)?) } else { None };
            let mut header = vec!["x", "f_min", "f_max"];
            if upper.is_some() {
                header.extend(["ccdf_min", "ccdf_max"]);
            }
            let rows: Vec<Vec<String>> = bounds
                .xs
                .iter()
                .enumerate()
                .map(|(k, x)| {
                    let mut row = vec![
                        x.to_string(),
                        bounds.f_min[k].to_string(),
                        bounds.f_max[k].to_string(),
                    ];
                    if let Some(u) = &upper {
                        row.push(u.f_min[k].to_string());
                        row.push(u.f_max[k].to_string());
                    }
                    row
                })
                .collect();
            write_csv(&out.join("cdf.csv"), &header, &rows)?;
            Ok((
                json!({
                    "points": bounds.xs.len(),
                    "xs": bounds.xs,
                    "f_min": bounds.f_min,
                    "f_max": bounds.f_max,
                }),
                0,
            ))
        }

        Command::Var { points } => {
            let levels = points.unwrap_or(99).max(1);
            let epsilons: Vec<f64> =
                (1..=levels).map(|k| k as f64 / (levels + 1) as f64).collect();
            // One envelope sweep at subsampled grid levels serves every
            // probability level; the inverses are exact on that set.
            let xs = subsample(grid.values(), 500);
            let envelopes = cdf_bounds(set, &price, &xs)?;
            let mut f_min = envelopes.f_min.clone();
            let mut f_max = envelopes.f_max.clone();
            for k in 1..f_min.len() {
                f_min[k] = f_min[k].max(f_min[k - 1]);
                f_max[k] = f_max[k].max(f_max[k - 1]);
            }
            for k in 0..f_max.len() {
                f_max[k] = f_max[k].max(f_min[k]);
            }
            let invert = |env: &Vec<f64>, eps: f64| -> f64 {
                let idx = env.iter().position(|&v| v >= eps).unwrap_or(env.len() - 1);
                envelopes.xs[idx]
            };
            let rows: Vec<Vec<String>> = epsilons
                .iter()
                .map(|&eps| {
                    vec![
                        eps.to_string(),
                        invert(&f_max, eps).to_string(),
                        invert(&f_min, eps).to_string(),
                    ]
                })
                .collect();
            write_csv(&out.join("var.csv"), &["eps", "lower", "upper"], &rows)?;
            Ok((
                json!({
                    "levels": epsilons,
                    "lower": epsilons.iter().map(|&e| invert(&f_max, e)).collect::<Vec<_>>(),
                    "upper": epsilons.iter().map(|&e| invert(&f_min, e)).collect::<Vec<_>>(),
                }),
                0,
            ))
        }

        Command::Cvar { eps } => {
            let upper = cvar_upper_bound(set, &price, *eps)?;
            Ok((json!({"eps": eps, "upper_bound": upper}), 0))
        }

        Command::PriceBounds { kind, strike, payoff_csv } => {
            let payoff = match (kind, payoff_csv) {
                (Some(kind), None) => {
                    let instrument_kind = match kind {
                        NewInstrumentKind::Call => InstrumentKind::CallBuy,
                        NewInstrumentKind::Put => InstrumentKind::PutBuy,
                        NewInstrumentKind::Binary => InstrumentKind::BinaryAboveBuy,
                    };
                    let instr = Instrument::new(instrument_kind, *strike)?;
                    PriceFunction::from_values(instr.payoff_column(&grid)?)?
                }
                (None, Some(path)) => {
                    let values = read_column(path)?;
                    if values.len() != grid.len() {
                        return Err(Error::InvalidArgument(format!(
                            "payoff file has {} values but the grid has {} levels",
                            values.len(),
                            grid.len()
                        )));
                    }
                    PriceFunction::from_values(values)?
                }
                _ => {
                    return Err(Error::InvalidArgument(
                        "provide either --kind (with --strike) or --payoff-csv".into(),
                    ))
                }
            };
            let b = price_bounds(set, &payoff)?;
            Ok((json!({"lower": b.lower, "upper": b.upper}), 0))
        }

        Command::Holdout => {
            let records = analysis::holdout_validate(
                &loaded.snapshot.quotes,
                &config.fees,
                &grid,
                config.discount_factor,
                set.tolerances(),
            )?;
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| {
                    vec![
                        r.label.clone(),
                        r.bid.map(|v| v.to_string()).unwrap_or_default(),
                        r.ask.map(|v| v.to_string()).unwrap_or_default(),
                        r.lower.map(|v| v.to_string()).unwrap_or_default(),
                        r.upper.map(|v| v.to_string()).unwrap_or_default(),
                        r.bid_violation.to_string(),
                        r.ask_violation.to_string(),
                        r.infeasible.to_string(),
                    ]
                })
                .collect();
            write_csv(
                &out.join("holdout.csv"),
                &["label", "bid", "ask", "lower", "upper", "bid_violation", "ask_violation", "infeasible"],
                &rows,
            )?;
            let violations = records
                .iter()
                .filter(|r| r.bid_violation || r.ask_violation)
                .count();
            Ok((
                json!({
                    "held_out": records.len(),
                    "violations": violations,
                    "records": serde_json::to_value(&records)?,
                }),
                0,
            ))
        }

        Command::Maxent => {
            let pi = max_entropy(set)?;
            distribution_csv(&out.join("maxent.csv"), set, &[("probability", &pi)])?;
            Ok((json!({"entropy": pi.entropy()}), 0))
        }

        Command::KlProject { reference } => {
            let raw = read_column(reference)?;
            if raw.len() != grid.len() {
                return Err(Error::InvalidReference(format!(
                    "reference has {} values but the grid has {} levels",
                    raw.len(),
                    grid.len()
                )));
            }
            let total: f64 = raw.iter().sum();
            if !(total > 0.0) {
                return Err(Error::InvalidReference("reference masses must sum to > 0".into()));
            }
            let eta = Distribution::with_tolerance(raw.iter().map(|v| v / total).collect(), 1e-9)
                .map_err(|e| Error::InvalidReference(e.to_string()))?;
            let pi = rnp::estimate::kl_project(set, &eta)?;
            distribution_csv(&out.join("kl-project.csv"), set, &[("probability", &pi)])?;
            Ok((json!({"divergence": pi.kl_divergence(&eta)}), 0))
        }

        Command::Lognormal { max_iters, tol_div, starts, seed, days, day_count } => {
            let tol = tol_div.unwrap_or(set.tolerances().div);
            let extra = starts.saturating_sub(1);
            let starts = default_starts(set, extra, *seed)?;
            let trace = closest_lognormal_multi(set, &starts, *max_iters, tol)?;
            let Some(fit) = trace.final_fit() else {
                return Err(Error::NumericalFailure(
                    "alternation terminated before producing a fit".into(),
                ));
            };
            let last = trace.steps.last().expect("nonempty trace");
            distribution_csv(
                &out.join("lognormal.csv"),
                set,
                &[("projection", &last.pi), ("fitted", &last.eta)],
            )?;
            let vol = match days {
                Some(days) => Some(annualized_volatility(fit, *days, *day_count)?),
                None => None,
            };
            Ok((
                json!({
                    "mu": fit.mu,
                    "sigma": fit.sigma,
                    "divergence": trace.final_divergence(),
                    "converged": trace.converged,
                    "iterations": trace.steps.len(),
                    "starts": starts.len(),
                    "annualized_volatility": vol,
                }),
                0,
            ))
        }

        Command::Sensitivity => {
            let report = analysis::maxent_sensitivity(set)?;
            let rows: Vec<Vec<String>> = report
                .per_investment
                .iter()
                .map(|e| vec![e.label.clone(), e.cost.to_string(), e.lambda.to_string()])
                .collect();
            write_csv(&out.join("sensitivity.csv"), &["investment", "cost", "lambda"], &rows)?;
            Ok((
                json!({
                    "objective_value": report.objective_value,
                    "per_investment": serde_json::to_value(&report.per_investment)?,
                }),
                0,
            ))
        }
    }
}
