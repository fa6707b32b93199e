//! Solver contract shared by all bound and estimation operations: linear
//! objectives over Π with dual extraction, relative-entropy objectives over
//! Π, and the Charnes-Cooper transform for linear-fractional objectives.
//!
//! Every optimal witness is re-verified against Π by direct arithmetic and
//! reported values are re-evaluated at the witness, so results never rest on
//! solver status codes alone. Solves are deterministic for fixed inputs.

use serde::{Deserialize, Serialize};

use crate::conic::{install_pi_block, ConicBuilder, PiBlock, RawSolution, RawStatus};
use crate::error::Error;
use crate::polytope::{Distribution, RiskNeutralSet};
use crate::Result;

/// Optimization direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Min,
    Max,
}

/// A row coupling the auxiliary epigraph variable `t` to π:
/// `t ≤ offset + coeffs·π` under `Sense::Max`, `t ≥ ...` under `Sense::Min`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpigraphRow {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

/// `min/max objective·π (+ t)` subject to `π ∈ Π` and the epigraph rows.
///
/// Plain bound computations leave `epigraph` empty; the CVaR bound uses one
/// auxiliary variable tied to π by one row per candidate threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgramOverPi {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub epigraph: Vec<EpigraphRow>,
}

impl LinearProgramOverPi {
    pub fn new(objective: Vec<f64>, sense: Sense) -> Self {
        Self { objective, sense, epigraph: Vec::new() }
    }
}

/// `min Σ π_i log(π_i / η_i)` over Π. An absent reference means maximum
/// entropy: the solve uses a uniform η and the reported value is shifted by
/// `-log m`, i.e. exactly `Σ π_i log π_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyProgramOverPi {
    pub reference: Option<Distribution>,
}

impl EntropyProgramOverPi {
    pub fn max_entropy() -> Self {
        Self { reference: None }
    }

    pub fn kl_to(reference: Distribution) -> Self {
        Self { reference: Some(reference) }
    }
}

/// Objective for sensitivity analysis: any program this module can solve.
#[derive(Debug, Clone)]
pub enum ObjectiveOverPi {
    Linear(LinearProgramOverPi),
    Entropy(EntropyProgramOverPi),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

/// Outcome of a solve over Π.
///
/// `duals_on_costs` holds the nonnegative multipliers λ* of the market rows
/// `Pᵀπ ≤ c` for the minimization actually solved (`min objective` or
/// `min -objective` for `Sense::Max`); they satisfy the global inequality
/// `L*(c + Δc) ≥ L*(c) - λ*ᵀΔc` in that orientation. `duals_on_extra_rows`
/// carries the multipliers of constraints added via `add_constraint`.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub value: f64,
    pub pi: Option<Distribution>,
    pub duals_on_costs: Vec<f64>,
    pub duals_on_extra_rows: Vec<f64>,
}

impl SolveResult {
    fn infeasible() -> Self {
        Self {
            status: SolveStatus::Infeasible,
            value: f64::NAN,
            pi: None,
            duals_on_costs: Vec::new(),
            duals_on_extra_rows: Vec::new(),
        }
    }

    fn failure() -> Self {
        Self { status: SolveStatus::NumericalFailure, ..Self::infeasible() }
    }

    /// The optimal distribution, or the error the status maps to.
    pub fn require_optimal(&self) -> Result<&Distribution> {
        match self.status {
            SolveStatus::Optimal => Ok(self.pi.as_ref().expect("optimal results carry a witness")),
            SolveStatus::Infeasible => Err(Error::EmptySet),
            SolveStatus::NumericalFailure => {
                Err(Error::NumericalFailure("solve did not reach optimality".into()))
            }
        }
    }
}

struct Extracted {
    pi: Distribution,
    duals_market: Vec<f64>,
    duals_extra: Vec<f64>,
}

/// Pulls the witness and duals out of a raw solution, enforcing membership
/// and dual nonnegativity. Returns None when verification fails.
fn extract_witness(
    set: &RiskNeutralSet,
    block: &PiBlock,
    sol: &RawSolution,
    dual_rows: &[usize],
    dual_sign: f64,
) -> Option<Extracted> {
    let tols = set.tolerances();
    let pi = match Distribution::with_tolerance(block.pi_values(&sol.x), tols.simplex) {
        Ok(pi) => pi,
        Err(e) => {
            debug_log(&format!("witness rejected: {e}"));
            return None;
        }
    };
    let violation = set.constraint_violation(&pi);
    if violation > tols.feas {
        debug_log(&format!("witness rejected: constraint violation {violation:.3e}"));
        return None;
    }
    let mut duals = Vec::with_capacity(dual_rows.len());
    for &r in dual_rows {
        let d = dual_sign * sol.duals_nonneg[r];
        if d < -tols.cs {
            debug_log(&format!("witness rejected: dual {d:.3e} on row {r}"));
            return None;
        }
        duals.push(d.max(0.0));
    }
    let n = set.n_market();
    let duals_extra = duals.split_off(n);
    Some(Extracted { pi, duals_market: duals, duals_extra })
}

/// Diagnostics for rejected solves, visible with RNP_SOLVER_VERBOSE=1.
fn debug_log(message: &str) {
    if std::env::var("RNP_SOLVER_VERBOSE").map(|v| v == "1").unwrap_or(false) {
        eprintln!("rnp: {message}");
    }
}

/// Minimizes or maximizes a linear objective (plus optional epigraph
/// variable) over Π. Infeasibility and solver breakdown are reported in the
/// result status, not as errors.
pub fn solve_linear(set: &RiskNeutralSet, prog: &LinearProgramOverPi) -> Result<SolveResult> {
    let m = set.m();
    if prog.objective.len() != m {
        return Err(Error::InvalidArgument(format!(
            "objective has {} entries but the grid has {} levels",
            prog.objective.len(),
            m
        )));
    }
    for row in &prog.epigraph {
        if row.coeffs.len() != m {
            return Err(Error::InvalidArgument("epigraph row length must match the grid".into()));
        }
    }

    let flip = match prog.sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let mut builder = ConicBuilder::new();
    let block = install_pi_block(&mut builder, set.grid(), None, true, None);
    let mut dual_rows = Vec::new();
    for (form, cost) in set.all_forms() {
        dual_rows.push(block.investment_row(&mut builder, form, cost));
    }
    let aux = if prog.epigraph.is_empty() { None } else { Some(builder.new_var()) };
    if let Some(t) = aux {
        for row in &prog.epigraph {
            // Max: t - coeffs·π ≤ offset. Min: coeffs·π - t ≤ -offset.
            let mut entries: Vec<(usize, f64)> = row
                .coeffs
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0.0)
                .map(|(i, &c)| (block.pi + i, flip * c))
                .collect();
            entries.push((t, -flip));
            builder.less_equal(entries, -flip * row.offset);
        }
    }

    let mut objective = vec![0.0; builder.num_vars()];
    for (i, &g) in prog.objective.iter().enumerate() {
        objective[block.pi + i] = flip * g;
    }
    if let Some(t) = aux {
        objective[t] = flip;
    }

    let sol = builder.solve(&objective, set.tolerances(), false)?;
    match sol.status {
        RawStatus::Infeasible => return Ok(SolveResult::infeasible()),
        RawStatus::Failed(_) => return Ok(SolveResult::failure()),
        RawStatus::Optimal => {}
    }
    let Some(extracted) = extract_witness(set, &block, &sol, &dual_rows, 1.0) else {
        return Ok(SolveResult::failure());
    };

    // Report the objective re-evaluated at the verified witness.
    let mut value = extracted.pi.expectation(&prog.objective);
    if !prog.epigraph.is_empty() {
        let fold = |acc: f64, v: f64| match prog.sense {
            Sense::Max => acc.min(v),
            Sense::Min => acc.max(v),
        };
        let init = match prog.sense {
            Sense::Max => f64::INFINITY,
            Sense::Min => f64::NEG_INFINITY,
        };
        value += prog
            .epigraph
            .iter()
            .map(|row| row.offset + extracted.pi.expectation(&row.coeffs))
            .fold(init, fold);
    }
    Ok(SolveResult {
        status: SolveStatus::Optimal,
        value,
        pi: Some(extracted.pi),
        duals_on_costs: extracted.duals_market,
        duals_on_extra_rows: extracted.duals_extra,
    })
}

/// Minimizes `Σ π_i log(π_i / η_i)` over Π via exponential cones.
pub fn solve_entropy(set: &RiskNeutralSet, prog: &EntropyProgramOverPi) -> Result<SolveResult> {
    let m = set.m();
    let eta: Vec<f64> = match &prog.reference {
        Some(reference) => {
            if reference.len() != m {
                return Err(Error::InvalidReference(format!(
                    "reference has {} entries but the grid has {} levels",
                    reference.len(),
                    m
                )));
            }
            if let Some((i, &v)) = reference
                .probs()
                .iter()
                .enumerate()
                .find(|(_, &v)| v < 1e-300)
            {
                return Err(Error::InvalidReference(format!(
                    "reference mass {v:.3e} at index {i} is below 1e-300; KL projection \
                     is undefined against (numerically) zero-mass cells"
                )));
            }
            let total: f64 = reference.probs().iter().sum();
            reference.probs().iter().map(|&v| v / total).collect()
        }
        None => vec![1.0 / m as f64; m],
    };

    // Unconstrained set: the projection of η onto Δ is η itself.
    if set.n_market() + set.n_extra() == 0 {
        let pi = Distribution::with_tolerance(eta.clone(), set.tolerances().simplex)
            .expect("validated reference");
        let value = match prog.reference {
            Some(_) => 0.0,
            None => -(m as f64).ln(),
        };
        return Ok(SolveResult {
            status: SolveStatus::Optimal,
            value,
            pi: Some(pi),
            duals_on_costs: Vec::new(),
            duals_on_extra_rows: Vec::new(),
        });
    }

    // Substituting the likelihood ratio ρ_i = π_i/η_i keeps every
    // exponential-cone triple at unit scale regardless of how small the
    // reference masses are: t_i ≥ π_i log(π_i/η_i) becomes
    // η_i·s_i with s_i ≥ ρ_i log ρ_i, i.e. (-s_i, ρ_i, 1) ∈ K_exp.
    let mut builder = ConicBuilder::new();
    // ρ ≥ 0 comes from the exponential cones.
    let block = install_pi_block(&mut builder, set.grid(), None, false, Some(eta.clone()));
    let mut dual_rows = Vec::new();
    for (form, cost) in set.all_forms() {
        dual_rows.push(block.investment_row(&mut builder, form, cost));
    }
    let s0 = builder.new_vars(m);
    for i in 0..m {
        builder.exp_cone([
            (vec![(s0 + i, 1.0)], 0.0),
            (vec![(block.pi + i, -1.0)], 0.0),
            (Vec::new(), 1.0),
        ]);
    }
    let mut objective = vec![0.0; builder.num_vars()];
    objective[s0..s0 + m].copy_from_slice(&eta);

    let sol = builder.solve(&objective, set.tolerances(), true)?;
    match sol.status {
        RawStatus::Infeasible => return Ok(SolveResult::infeasible()),
        RawStatus::Failed(_) => return Ok(SolveResult::failure()),
        RawStatus::Optimal => {}
    }
    let Some(extracted) = extract_witness(set, &block, &sol, &dual_rows, 1.0) else {
        return Ok(SolveResult::failure());
    };

    // Divergence re-evaluated at the witness, in nats. For maximum entropy
    // report Σ π log π, which differs from KL-to-uniform by -log m.
    let value: f64 = extracted
        .pi
        .probs()
        .iter()
        .zip(&eta)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &e)| p * (p / e).ln())
        .sum();
    let value = match prog.reference {
        Some(_) => value,
        None => value - (m as f64).ln(),
    };
    Ok(SolveResult {
        status: SolveStatus::Optimal,
        value,
        pi: Some(extracted.pi),
        duals_on_costs: extracted.duals_market,
        duals_on_extra_rows: extracted.duals_extra,
    })
}

/// Bounds `f·π / g·π` over Π via the Charnes-Cooper transform: with
/// `y = π/(g·π)` and `t = 1/(g·π)` the program becomes the LP
/// `min f·y : g·y = 1, Σy = t, E_j(y) ≤ c_j·t, y ≥ 0, t ≥ 0`.
///
/// The caller must have verified that `g·π` is bounded away from zero on Π.
pub(crate) fn solve_linear_fractional(
    set: &RiskNeutralSet,
    numerator: &[f64],
    denominator: &[f64],
    sense: Sense,
) -> Result<SolveResult> {
    debug_assert_eq!(numerator.len(), set.m());
    debug_assert_eq!(denominator.len(), set.m());
    let flip = match sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let mut builder = ConicBuilder::new();
    let t = builder.new_var();
    let block = install_pi_block(&mut builder, set.grid(), Some(t), true, None);
    for (form, cost) in set.all_forms() {
        block.investment_row(&mut builder, form, cost);
    }
    builder.equality(
        denominator
            .iter()
            .enumerate()
            .filter(|(_, &g)| g != 0.0)
            .map(|(i, &g)| (block.pi + i, g))
            .collect(),
        1.0,
    );
    builder.less_equal(vec![(t, -1.0)], 0.0);
    let mut objective = vec![0.0; builder.num_vars()];
    for (i, &f) in numerator.iter().enumerate() {
        objective[block.pi + i] = flip * f;
    }

    let sol = builder.solve(&objective, set.tolerances(), false)?;
    match sol.status {
        RawStatus::Infeasible => return Ok(SolveResult::infeasible()),
        RawStatus::Failed(_) => return Ok(SolveResult::failure()),
        RawStatus::Optimal => {}
    }
    let scale = sol.x[t];
    if !(scale.is_finite() && scale > 0.0) {
        return Ok(SolveResult::failure());
    }
    let pi_raw: Vec<f64> = block.pi_values(&sol.x).iter().map(|&y| y / scale).collect();
    let Ok(pi) = Distribution::with_tolerance(pi_raw, set.tolerances().simplex) else {
        return Ok(SolveResult::failure());
    };
    if set.constraint_violation(&pi) > set.tolerances().feas {
        return Ok(SolveResult::failure());
    }
    let den = pi.expectation(denominator);
    if den.abs() < set.tolerances().denom {
        return Ok(SolveResult::failure());
    }
    Ok(SolveResult {
        status: SolveStatus::Optimal,
        value: pi.expectation(numerator) / den,
        pi: Some(pi),
        duals_on_costs: Vec::new(),
        duals_on_extra_rows: Vec::new(),
    })
}

/// Draws `count` members of Π by minimizing seeded random linear objectives.
/// Deterministic for a fixed seed.
pub fn sample_feasible(set: &RiskNeutralSet, count: usize, seed: u64) -> Result<Vec<Distribution>> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let m = set.m();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let objective: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let result = solve_linear(set, &LinearProgramOverPi::new(objective, Sense::Min))?;
        out.push(result.require_optimal()?.clone());
    }
    Ok(out)
}
