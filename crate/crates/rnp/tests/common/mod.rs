//! Shared test support: random market generators and solver-independent
//! oracles (simplex-grid enumeration and vertex enumeration). Nothing here
//! touches the conic solver; that is the point.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use rnp::market::{Instrument, InstrumentKind, Market, PriceGrid};
use rnp::polytope::{Distribution, RiskNeutralSet};

/// A generated market together with a point known to lie inside Π.
pub struct PlantedMarket {
    pub set: RiskNeutralSet,
    pub pi0: Distribution,
    pub columns: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
}

/// Random point of the simplex (normalized exponentials).
pub fn random_simplex_point(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let mut raw: Vec<f64> = (0..m).map(|_| -rng.random_range(1e-9..1.0f64).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter_mut().for_each(|x| *x /= total);
    raw
}

/// Small random market with custom payoff columns in [-1, 1], priced from a
/// random interior point plus a strictly positive spread, so Π is nonempty
/// with interior. Used by the enumeration-oracle comparisons.
pub fn random_market(rng: &mut ChaCha8Rng, m: usize, n: usize) -> PlantedMarket {
    let values: Vec<f64> = {
        let mut v = 0.5;
        (0..m)
            .map(|_| {
                v += rng.random_range(0.1..1.0);
                v
            })
            .collect()
    };
    let grid = PriceGrid::new(values).unwrap();
    let pi0_raw = random_simplex_point(rng, m);
    let mut columns = Vec::with_capacity(n);
    let mut costs = Vec::with_capacity(n);
    let mut instruments = Vec::with_capacity(n);
    for j in 0..n {
        let column: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fair: f64 = column.iter().zip(&pi0_raw).map(|(v, p)| v * p).sum();
        let cost = fair + rng.random_range(0.05..0.2);
        instruments.push(Instrument::custom(format!("col {j}"), column.clone()).unwrap());
        columns.push(column);
        costs.push(cost);
    }
    let market = Market::new(grid, instruments, costs.clone()).unwrap();
    PlantedMarket {
        set: RiskNeutralSet::new(market),
        pi0: Distribution::new(pi0_raw).unwrap(),
        columns,
        costs,
    }
}

/// Option-chain market (calls, puts, underlying; both sides) priced from a
/// planted distribution with the given half-spread.
pub fn option_market(
    grid: &PriceGrid,
    pi0: &[f64],
    strikes: &[f64],
    half_spread: f64,
) -> PlantedMarket {
    let mut instruments = Vec::new();
    let mut columns = Vec::new();
    let mut costs = Vec::new();
    let mut add_both_sides = |buy: Instrument, write: Instrument| {
        let buy_col = buy.payoff_column(grid).unwrap();
        let fair: f64 = buy_col.iter().zip(pi0).map(|(f, p)| f * p).sum();
        columns.push(buy_col);
        costs.push(fair + half_spread);
        instruments.push(buy);
        let write_col = write.payoff_column(grid).unwrap();
        columns.push(write_col);
        costs.push(-(fair - half_spread));
        instruments.push(write);
    };
    for &s in strikes {
        add_both_sides(
            Instrument::new(InstrumentKind::CallBuy, Some(s)).unwrap(),
            Instrument::new(InstrumentKind::CallWrite, Some(s)).unwrap(),
        );
        add_both_sides(
            Instrument::new(InstrumentKind::PutBuy, Some(s)).unwrap(),
            Instrument::new(InstrumentKind::PutWrite, Some(s)).unwrap(),
        );
    }
    add_both_sides(
        Instrument::new(InstrumentKind::UnderlyingLong, None).unwrap(),
        Instrument::new(InstrumentKind::UnderlyingShort, None).unwrap(),
    );
    let market = Market::new(grid.clone(), instruments, costs.clone()).unwrap();
    PlantedMarket {
        set: RiskNeutralSet::new(market),
        pi0: Distribution::new(pi0.to_vec()).unwrap(),
        columns,
        costs,
    }
}

/// Objective kinds the oracles understand.
pub enum OracleObjective<'a> {
    Linear(&'a [f64]),
    Ratio { num: &'a [f64], den: &'a [f64] },
}

impl OracleObjective<'_> {
    /// Value along the segment `π(t) = fixed + t·e_{m-2} + (M - t)·e_{m-1}`
    /// given precomputed affine pieces.
    fn endpoint_value(&self, lin: &AffinePieces, t: f64) -> f64 {
        match self {
            OracleObjective::Linear(_) => lin.obj_base + lin.obj_slope * t,
            OracleObjective::Ratio { .. } => {
                (lin.obj_base + lin.obj_slope * t) / (lin.den_base + lin.den_slope * t)
            }
        }
    }
}

struct AffinePieces {
    obj_base: f64,
    obj_slope: f64,
    den_base: f64,
    den_slope: f64,
}

/// Brute-force enumeration over the simplex: the first m-2 coordinates run
/// on a grid of resolution `h`; the final two are optimized exactly along
/// their feasible segment (linear and linear-fractional objectives are
/// monotone there, so endpoints suffice). Returns `(min, max)` over all
/// enumerated feasible points, or None when none were feasible.
pub fn enumerate_bounds(
    columns: &[Vec<f64>],
    costs: &[f64],
    m: usize,
    h: f64,
    objective: &OracleObjective,
) -> Option<(f64, f64)> {
    assert!(m >= 2, "enumeration oracle needs at least two outcomes");
    let n = columns.len();
    let mut best_min = f64::INFINITY;
    let mut best_max = f64::NEG_INFINITY;
    let steps = (1.0 / h).round() as usize;

    // outer[i] for i in 0..m-2; the recursion carries partial dot products.
    let mut outer_dots = vec![0.0; n];
    let mut partials: Vec<(f64, f64)> = Vec::new(); // (obj_dot, den_dot)

    fn descend(
        depth: usize,
        remaining_steps: usize,
        h: f64,
        m: usize,
        columns: &[Vec<f64>],
        costs: &[f64],
        objective: &OracleObjective,
        outer_dots: &mut Vec<f64>,
        obj_den_dot: (f64, f64),
        best: &mut (f64, f64),
    ) {
        if depth == m - 2 {
            let mass = remaining_steps as f64 * h;
            // Feasible t-interval for π_{m-2} = t, π_{m-1} = mass - t.
            let (mut lo, mut hi) = (0.0f64, mass);
            for (j, column) in columns.iter().enumerate() {
                let base = outer_dots[j] + mass * column[m - 1];
                let slope = column[m - 2] - column[m - 1];
                let budget = costs[j] - base;
                if slope.abs() < 1e-14 {
                    if budget < -1e-12 {
                        return;
                    }
                } else if slope > 0.0 {
                    hi = hi.min(budget / slope);
                } else {
                    lo = lo.max(budget / slope);
                }
            }
            if lo > hi + 1e-12 {
                return;
            }
            let hi = hi.min(mass).max(0.0);
            let lo = lo.max(0.0).min(mass);
            let (gv, dv): (&[f64], &[f64]) = match objective {
                OracleObjective::Linear(g) => (g, g),
                OracleObjective::Ratio { num, den } => (num, den),
            };
            let pieces = AffinePieces {
                obj_base: obj_den_dot.0 + mass * gv[m - 1],
                obj_slope: gv[m - 2] - gv[m - 1],
                den_base: obj_den_dot.1 + mass * dv[m - 1],
                den_slope: dv[m - 2] - dv[m - 1],
            };
            for t in [lo, hi] {
                let v = objective.endpoint_value(&pieces, t);
                best.0 = best.0.min(v);
                best.1 = best.1.max(v);
            }
            return;
        }
        for k in 0..=remaining_steps {
            let x = k as f64 * h;
            for (j, column) in columns.iter().enumerate() {
                outer_dots[j] += x * column[depth];
            }
            let next_dot = match objective {
                OracleObjective::Linear(g) => (obj_den_dot.0 + x * g[depth], 0.0),
                OracleObjective::Ratio { num, den } => {
                    (obj_den_dot.0 + x * num[depth], obj_den_dot.1 + x * den[depth])
                }
            };
            descend(
                depth + 1,
                remaining_steps - k,
                h,
                m,
                columns,
                costs,
                objective,
                outer_dots,
                next_dot,
                best,
            );
            for (j, column) in columns.iter().enumerate() {
                outer_dots[j] -= x * column[depth];
            }
        }
    }

    let mut best = (best_min, best_max);
    let _ = &mut partials;
    descend(
        0,
        steps,
        h,
        m,
        columns,
        costs,
        objective,
        &mut outer_dots,
        (0.0, 0.0),
        &mut best,
    );
    (best_min, best_max) = best;
    if best_min.is_finite() {
        Some((best_min, best_max))
    } else {
        None
    }
}

/// Exact oracle for linear and linear-fractional objectives over
/// Π = {π ∈ Δ : colsᵀπ ≤ c}: enumerates every basic feasible point (all
/// choices of m-1 active rows among the investment and nonnegativity rows,
/// plus the always-active simplex equality) by direct Gaussian elimination.
/// Optima of both objective kinds are attained at vertices.
pub fn vertex_bounds(
    columns: &[Vec<f64>],
    costs: &[f64],
    m: usize,
    objective: &OracleObjective,
) -> Option<(f64, f64)> {
    let n = columns.len();
    let total_rows = n + m;
    let row = |r: usize, i: usize| -> f64 {
        if r < n {
            columns[r][i]
        } else if r - n == i {
            -1.0
        } else {
            0.0
        }
    };
    let rhs = |r: usize| -> f64 { if r < n { costs[r] } else { 0.0 } };

    let mut best_min = f64::INFINITY;
    let mut best_max = f64::NEG_INFINITY;
    let mut active = vec![0usize; m - 1];
    let consider = |active: &[usize], best_min: &mut f64, best_max: &mut f64| {
        // Solve [1ᵀ; active rows] π = [1; active rhs].
        let dim = m;
        let mut a = vec![vec![0.0f64; dim + 1]; dim];
        for i in 0..dim {
            a[0][i] = 1.0;
        }
        a[0][dim] = 1.0;
        for (k, &r) in active.iter().enumerate() {
            for i in 0..dim {
                a[k + 1][i] = row(r, i);
            }
            a[k + 1][dim] = rhs(r);
        }
        // Gaussian elimination with partial pivoting.
        for col in 0..dim {
            let mut pivot = col;
            for r in col + 1..dim {
                if a[r][col].abs() > a[pivot][col].abs() {
                    pivot = r;
                }
            }
            if a[pivot][col].abs() < 1e-10 {
                return;
            }
            a.swap(col, pivot);
            for r in 0..dim {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for cc in col..=dim {
                        a[r][cc] -= f * a[col][cc];
                    }
                }
            }
        }
        let pi: Vec<f64> = (0..dim).map(|i| a[i][dim] / a[i][i]).collect();
        // Feasibility of the candidate vertex.
        if pi.iter().any(|&p| p < -1e-9) {
            return;
        }
        for j in 0..n {
            let v: f64 = columns[j].iter().zip(&pi).map(|(c, p)| c * p).sum();
            if v > costs[j] + 1e-9 * (1.0 + costs[j].abs()) {
                return;
            }
        }
        let value = match objective {
            OracleObjective::Linear(g) => g.iter().zip(&pi).map(|(g, p)| g * p).sum::<f64>(),
            OracleObjective::Ratio { num, den } => {
                let fnum: f64 = num.iter().zip(&pi).map(|(g, p)| g * p).sum();
                let fden: f64 = den.iter().zip(&pi).map(|(g, p)| g * p).sum();
                fnum / fden
            }
        };
        *best_min = best_min.min(value);
        *best_max = best_max.max(value);
    };

    // All (m-1)-subsets of the rows, m ≤ 5 keeps this tiny.
    fn subsets(
        start: usize,
        total: usize,
        slot: usize,
        active: &mut Vec<usize>,
        consider: &mut impl FnMut(&[usize]),
    ) {
        if slot == active.len() {
            consider(active);
            return;
        }
        for r in start..total {
            active[slot] = r;
            subsets(r + 1, total, slot + 1, active, consider);
        }
    }
    if m == 1 {
        return None;
    }
    subsets(0, total_rows, 0, &mut active, &mut |rows| {
        consider(rows, &mut best_min, &mut best_max)
    });
    if best_min.is_finite() {
        Some((best_min, best_max))
    } else {
        None
    }
}
