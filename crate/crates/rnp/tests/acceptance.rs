//! Acceptance suite: one test per criterion, each printing its own
//! pass/fail line (visible with `cargo test -- --nocapture`).
//!
//! Oracles live in `common` and never touch the conic solver: bound
//! comparisons run against simplex-grid enumeration and exact vertex
//! enumeration, and every certificate is re-verified by direct arithmetic.

mod common;

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{
    enumerate_bounds, option_market, random_market, vertex_bounds, OracleObjective, PlantedMarket,
};
use rnp::analysis::{
    cdf_bounds, cvar_upper_bound, expectation_bounds, holdout_validate, ratio_bounds,
    var_bounds_many, PriceFunction,
};
use rnp::estimate::{
    closest_lognormal, discretize_lognormal, fit_lognormal_moments, kl_project, max_entropy,
    LogNormalFit,
};
use rnp::market::{FeeSchedule, Instrument, Market, PriceGrid, Quote, QuoteKind};
use rnp::optimize::{solve_linear, LinearProgramOverPi, Sense, SolveStatus};
use rnp::polytope::{ArbitrageCheck, Distribution, RiskNeutralSet};
use rnp::Tolerances;

fn two_by_two() -> RiskNeutralSet {
    let grid = PriceGrid::new(vec![1.0, 2.0]).unwrap();
    let a = Instrument::custom("first", vec![1.5, 0.5]).unwrap();
    let b = Instrument::custom("second", vec![0.0, 1.5]).unwrap();
    RiskNeutralSet::new(Market::new(grid, vec![a, b], vec![1.0, 1.0]).unwrap())
}

#[test]
fn criterion_1_golden_example() {
    let start = Instant::now();
    let set = two_by_two();
    let g = PriceFunction::from_values(vec![1.0, 0.0]).unwrap();
    let bounds = expectation_bounds(&set, &g).unwrap();
    assert!((bounds.lower - 1.0 / 3.0).abs() < 1e-6, "lower = {}", bounds.lower);
    assert!((bounds.upper - 0.5).abs() < 1e-6, "upper = {}", bounds.upper);
    match set.check_arbitrage().unwrap() {
        ArbitrageCheck::NoArbitrage(pi) => assert!(set.contains(&pi)),
        ArbitrageCheck::Arbitrage(_) => panic!("golden example admits no arbitrage"),
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    eprintln!(
        "criterion 1: PASS — bounds [{:.9}, {:.9}], no arbitrage, {elapsed:?}",
        bounds.lower, bounds.upper
    );
}

#[test]
fn criterion_2_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EC2);
    let h = 1e-3;
    let tol = 2e-3;
    let mut comparisons = 0usize;
    for case in 0..50 {
        let m = 2 + case % 3;
        let n = 1 + rng.random_range(0..6usize);
        let market = random_market(&mut rng, m, n);
        let PlantedMarket { set, columns, costs, .. } = &market;

        // Expectation bounds against the enumeration oracle.
        let g: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lp = expectation_bounds(set, &PriceFunction::from_values(g.clone()).unwrap()).unwrap();
        let (omin, omax) =
            enumerate_bounds(columns, costs, m, h, &OracleObjective::Linear(&g)).unwrap();
        assert!((lp.lower - omin).abs() <= tol, "case {case}: E min {} vs {omin}", lp.lower);
        assert!((lp.upper - omax).abs() <= tol, "case {case}: E max {} vs {omax}", lp.upper);
        comparisons += 2;

        // CDF bounds at three interior thresholds.
        let grid_values = set.grid().values().to_vec();
        let lo = grid_values[0];
        let hi = *grid_values.last().unwrap();
        let price = PriceFunction::identity(set.grid());
        for _ in 0..3 {
            let x = rng.random_range(lo..hi);
            let cdf = cdf_bounds(set, &price, &[x]).unwrap();
            let indicator: Vec<f64> =
                grid_values.iter().map(|&p| if p <= x { 1.0 } else { 0.0 }).collect();
            let (omin, omax) =
                enumerate_bounds(columns, costs, m, h, &OracleObjective::Linear(&indicator))
                    .unwrap();
            assert!((cdf.f_min[0] - omin).abs() <= tol, "case {case}: cdf min at {x}");
            assert!((cdf.f_max[0] - omax).abs() <= tol, "case {case}: cdf max at {x}");
            comparisons += 2;
        }

        // Ratio bounds with a denominator bounded away from zero. The
        // objective scales are kept gentle so the grid oracle's 1e-3
        // resolution stays well inside the 2e-3 comparison tolerance.
        let f: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..0.5)).collect();
        let den: Vec<f64> = (0..m).map(|_| rng.random_range(0.75..1.25)).collect();
        let ratio = ratio_bounds(
            set,
            &PriceFunction::from_values(f.clone()).unwrap(),
            &PriceFunction::from_values(den.clone()).unwrap(),
        )
        .unwrap();
        let (omin, omax) =
            enumerate_bounds(columns, costs, m, h, &OracleObjective::Ratio { num: &f, den: &den })
                .unwrap();
        assert!((ratio.lower - omin).abs() <= tol, "case {case}: ratio min {} vs {omin}", ratio.lower);
        assert!((ratio.upper - omax).abs() <= tol, "case {case}: ratio max {} vs {omax}", ratio.upper);
        comparisons += 2;

        // Vertex enumeration is exact; hold the LP to a tighter bar there.
        let (vmin, vmax) =
            vertex_bounds(columns, costs, m, &OracleObjective::Linear(&g)).unwrap();
        assert!((lp.lower - vmin).abs() <= 1e-6, "case {case}: vertex min");
        assert!((lp.upper - vmax).abs() <= 1e-6, "case {case}: vertex max");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    eprintln!("criterion 2: PASS — {comparisons} oracle comparisons within 2e-3, {elapsed:?}");
}

#[test]
fn criterion_3_certificate_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EC3);
    let tol_arb = Tolerances::default().arb;
    let mut no_arb_cases = 0usize;
    let mut arb_cases = 0usize;
    for case in 0..50 {
        let m = 2 + case % 3;
        let n = 1 + rng.random_range(0..5usize);
        let market = random_market(&mut rng, m, n);
        let perturb = case % 2 == 1;
        if !perturb {
            // Priced from an interior point: must report a feasible π.
            match market.set.check_arbitrage().unwrap() {
                ArbitrageCheck::NoArbitrage(pi) => {
                    assert!(
                        market.set.constraint_violation(&pi) <= 1e-8,
                        "case {case}: certificate leaves the set"
                    );
                }
                ArbitrageCheck::Arbitrage(_) => panic!("case {case}: misclassified as arbitrage"),
            }
            no_arb_cases += 1;
            continue;
        }
        // Underprice a replicable payoff: sell an existing column strictly
        // below its exact minimum expected value over Π (vertex oracle), so
        // the extended set is empty by construction.
        let target = market.columns[rng.random_range(0..market.columns.len())].clone();
        let (true_min, _) =
            vertex_bounds(&market.columns, &market.costs, m, &OracleObjective::Linear(&target))
                .unwrap();
        let mut columns = market.columns.clone();
        let mut costs = market.costs.clone();
        columns.push(target.clone());
        costs.push(true_min - 0.05);
        let instruments: Vec<Instrument> = columns
            .iter()
            .enumerate()
            .map(|(j, c)| Instrument::custom(format!("col {j}"), c.clone()).unwrap())
            .collect();
        let grid = market.set.grid().clone();
        let set = RiskNeutralSet::new(Market::new(grid, instruments, costs).unwrap());
        match set.check_arbitrage().unwrap() {
            ArbitrageCheck::Arbitrage(cert) => {
                // Direct arithmetic re-verification, independent of the solver.
                let worst = cert.worst_case_return(&set);
                assert!(worst > tol_arb, "case {case}: certificate return {worst}");
                assert!(cert.weights.iter().all(|&w| w >= 0.0));
                assert!((cert.guaranteed_return - worst).abs() <= 1e-9 * (1.0 + worst.abs()));
            }
            ArbitrageCheck::NoArbitrage(_) => {
                panic!("case {case}: misclassified as arbitrage-free")
            }
        }
        arb_cases += 1;
    }
    eprintln!(
        "criterion 3: PASS — {no_arb_cases} feasible + {arb_cases} arbitrage markets, \
         zero misclassifications, all certificates re-verified"
    );
}

#[test]
fn criterion_4_cdf_var_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EC4);
    let epsilons = [0.05, 0.25, 0.5, 0.75, 0.95];
    for case in 0..20 {
        let m = 3 + case % 4;
        let n = 2 + rng.random_range(0..6usize);
        let market = random_market(&mut rng, m, n);
        let set = &market.set;
        let g = PriceFunction::identity(set.grid());
        let xs = set.grid().values().to_vec();
        let cdf = cdf_bounds(set, &g, &xs).unwrap();
        for k in 0..xs.len() {
            assert!(cdf.f_min[k] >= -1e-6 && cdf.f_max[k] <= 1.0 + 1e-6);
            assert!(cdf.f_min[k] <= cdf.f_max[k] + 1e-6, "case {case}: envelope order");
            if k > 0 {
                assert!(cdf.f_min[k] >= cdf.f_min[k - 1] - 1e-6, "case {case}: f_min monotone");
                assert!(cdf.f_max[k] >= cdf.f_max[k - 1] - 1e-6, "case {case}: f_max monotone");
            }
        }
        let var = var_bounds_many(set, &g, &epsilons).unwrap();
        for (i, bounds) in var.iter().enumerate() {
            assert!(bounds.lower <= bounds.upper + 1e-6, "case {case}: VaR sandwich");
            if i > 0 {
                assert!(bounds.lower >= var[i - 1].lower - 1e-6);
                assert!(bounds.upper >= var[i - 1].upper - 1e-6);
            }
            let cvar = cvar_upper_bound(set, &g, epsilons[i]).unwrap();
            assert!(
                cvar >= bounds.lower - 1e-6,
                "case {case}: CVaR {cvar} below VaR lower bound {}",
                bounds.lower
            );
        }
    }
    eprintln!("criterion 4: PASS — envelopes ordered and monotone, VaR sandwich and CVaR floor hold");
}

#[test]
fn criterion_5_holdout_consistency() {
    let mut held_out_total = 0usize;
    for (mu, sigma, m) in [(100.0f64, 0.25f64, 140usize), (55.0, 0.4, 120), (240.0, 0.15, 160)] {
        let log_mu = mu.ln();
        let lo = mu * (-3.5 * sigma).exp();
        let hi = mu * (3.5 * sigma).exp();
        let step = (hi - lo) / (m as f64 - 1.0);
        let grid = PriceGrid::from_range(lo, hi, step).unwrap();
        let fit = LogNormalFit::new(log_mu, sigma, grid.clone()).unwrap();
        let pi0 = discretize_lognormal(&fit);

        let strikes: Vec<f64> = (0..18)
            .map(|k| lo + (hi - lo) * (0.08 + 0.84 * k as f64 / 17.0))
            .collect();
        let half_spread = 0.004 * mu;
        let mut quotes =
            vec![Quote::new(QuoteKind::Underlying, None, Some(mu - half_spread), Some(mu + half_spread))];
        let mut fairs = Vec::new();
        for &s in &strikes {
            for kind in [QuoteKind::Call, QuoteKind::Put] {
                let buy = match kind {
                    QuoteKind::Call => rnp::market::InstrumentKind::CallBuy,
                    _ => rnp::market::InstrumentKind::PutBuy,
                };
                let fair: f64 = Instrument::new(buy, Some(s))
                    .unwrap()
                    .payoff_column(&grid)
                    .unwrap()
                    .iter()
                    .zip(pi0.probs())
                    .map(|(f, p)| f * p)
                    .sum();
                // Deep out-of-the-money bids clamp at zero.
                quotes.push(Quote::new(
                    kind,
                    Some(s),
                    Some((fair - half_spread).max(0.0)),
                    Some(fair + half_spread),
                ));
                fairs.push(fair);
            }
        }
        let records =
            holdout_validate(&quotes, &FeeSchedule::zero(), &grid, 1.0, &Tolerances::default())
                .unwrap();
        assert_eq!(records.len(), fairs.len());
        for (record, fair) in records.iter().zip(&fairs) {
            assert!(!record.infeasible, "{}: infeasible after removal", record.label);
            let (lower, upper) = (record.lower.unwrap(), record.upper.unwrap());
            let slack = 1e-7 * (1.0 + fair.abs());
            assert!(
                *fair >= lower - slack && *fair <= upper + slack,
                "{}: fair value {fair} outside [{lower}, {upper}]",
                record.label
            );
            assert!(!record.bid_violation && !record.ask_violation, "{}", record.label);
        }
        held_out_total += records.len();
    }
    assert!(held_out_total >= 100, "only {held_out_total} hold-outs");
    eprintln!(
        "criterion 5: PASS — {held_out_total} hold-outs, every fair value inside its bounds, \
         zero violation flags"
    );
}

#[test]
fn criterion_6_estimation() {
    // KL projection of a feasible reference is the identity.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EC6);
    for _ in 0..3 {
        let market = random_market(&mut rng, 4, 4);
        let projected = kl_project(&market.set, &market.pi0).unwrap();
        let divergence = projected.kl_divergence(&market.pi0);
        assert!(divergence < 1e-8, "divergence {divergence}");
    }

    // Maximum entropy agrees with a uniform-reference KL projection.
    let market = random_market(&mut rng, 5, 6);
    let maxent = max_entropy(&market.set).unwrap();
    let via_uniform = kl_project(&market.set, &Distribution::uniform(5)).unwrap();
    for (a, b) in maxent.probs().iter().zip(via_uniform.probs()) {
        assert!((a - b).abs() < 1e-6, "maxent {a} vs uniform projection {b}");
    }

    // Planted log-normal recovery on a zero-spread market of m = 2000.
    let start = Instant::now();
    let (mu, sigma) = (100.0f64.ln(), 0.2);
    let m = 2000usize;
    let lo = 100.0 * (-4.0 * sigma as f64).exp();
    let hi = 100.0 * (4.0 * sigma as f64).exp();
    let step = (hi - lo) / (m as f64 - 1.0);
    let grid = PriceGrid::from_range(lo, hi, step).unwrap();
    assert_eq!(grid.len(), m);
    let planted = discretize_lognormal(&LogNormalFit::new(mu, sigma, grid.clone()).unwrap());
    let strikes: Vec<f64> = (0..40).map(|k| lo + (hi - lo) * (0.05 + 0.9 * k as f64 / 39.0)).collect();
    let market = option_market(&grid, planted.probs(), &strikes, 0.0);
    let start_point = max_entropy(&market.set).unwrap();
    let trace = closest_lognormal(&market.set, &start_point, 50, 1e-6).unwrap();
    let fit = trace.final_fit().expect("alternation produced a fit");
    let elapsed = start.elapsed();
    assert!(
        (fit.mu - mu).abs() < 1e-3,
        "recovered mu {} vs planted {mu}",
        fit.mu
    );
    assert!(
        (fit.sigma - sigma).abs() < 1e-3,
        "recovered sigma {} vs planted {sigma}",
        fit.sigma
    );
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    eprintln!(
        "criterion 6: PASS — projections idempotent, maxent = uniform projection, \
         recovered ({:.4}, {:.4}) vs planted ({:.4}, {sigma}), {elapsed:?}",
        fit.mu, fit.sigma, mu
    );
}

#[test]
fn criterion_7_sensitivities() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EC7);
    let mut fd_checked = 0usize;
    let mut fd_skipped = 0usize;
    for case in 0..20 {
        let m = 3 + case % 3;
        let n = 2 + rng.random_range(0..4usize);
        let market = random_market(&mut rng, m, n);
        let set = &market.set;
        let objective: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let prog = LinearProgramOverPi::new(objective.clone(), Sense::Min);
        let base = solve_linear(set, &prog).unwrap();
        assert_eq!(base.status, SolveStatus::Optimal);
        let lambda = &base.duals_on_costs;
        assert!(lambda.iter().all(|&l| l >= 0.0));

        // Complementary slackness via direct arithmetic.
        let pi = base.pi.as_ref().unwrap();
        for ((column, cost), l) in market.columns.iter().zip(&market.costs).zip(lambda) {
            let slack = cost - pi.expectation(column);
            assert!(l * slack < 1e-6, "case {case}: λ·slack = {}", l * slack);
        }

        let solve_with_costs = |costs: &[f64]| -> Option<f64> {
            let instruments: Vec<Instrument> = market
                .columns
                .iter()
                .enumerate()
                .map(|(j, c)| Instrument::custom(format!("col {j}"), c.clone()).unwrap())
                .collect();
            let shifted = RiskNeutralSet::new(
                Market::new(set.grid().clone(), instruments, costs.to_vec()).unwrap(),
            );
            let r = solve_linear(&shifted, &prog).ok()?;
            (r.status == SolveStatus::Optimal).then_some(r.value)
        };

        // Global inequality over 100 random cost perturbations.
        for _ in 0..100 {
            let delta: Vec<f64> = (0..n).map(|_| rng.random_range(-0.04..0.04)).collect();
            let costs: Vec<f64> = market.costs.iter().zip(&delta).map(|(c, d)| c + d).collect();
            let perturbed = solve_with_costs(&costs).expect("perturbation keeps π0 feasible");
            let drop: f64 = lambda.iter().zip(&delta).map(|(l, d)| l * d).sum();
            assert!(
                perturbed >= base.value - drop - 1e-6,
                "case {case}: global inequality violated ({perturbed} < {} - {drop})",
                base.value
            );
        }

        // Central differences where the value function is smooth; a large
        // second difference marks a kink (the gradient does not exist
        // there) and skips the coordinate.
        for j in 0..n {
            let h = 1e-5 * (1.0 + market.costs[j].abs());
            let mut up = market.costs.clone();
            up[j] += h;
            let mut down = market.costs.clone();
            down[j] -= h;
            let (Some(fu), Some(fd)) = (solve_with_costs(&up), solve_with_costs(&down)) else {
                fd_skipped += 1;
                continue;
            };
            if (fu + fd - 2.0 * base.value).abs() > 1e-7 * (1.0 + base.value.abs()) {
                fd_skipped += 1;
                continue;
            }
            let gradient = (fu - fd) / (2.0 * h);
            assert!(
                (gradient + lambda[j]).abs() < 1e-3,
                "case {case}, cost {j}: finite difference {gradient} vs -λ {}",
                -lambda[j]
            );
            fd_checked += 1;
        }
    }
    assert!(
        fd_checked * 2 >= fd_checked + fd_skipped,
        "too many kinks: {fd_checked} checked vs {fd_skipped} skipped"
    );
    eprintln!(
        "criterion 7: PASS — duals nonnegative, slackness < 1e-6, 2000 global-inequality \
         checks, {fd_checked} finite-difference matches ({fd_skipped} kinks skipped)"
    );
}

#[test]
fn criterion_8_scale() {
    // SPX-sized synthetic market: m = 5001 outcomes, n = 390 investments.
    let grid = PriceGrid::from_range(1500.0, 4000.0, 0.5).unwrap();
    let fit = LogNormalFit::new(2746.0f64.ln(), 0.05, grid.clone()).unwrap();
    let pi0 = discretize_lognormal(&fit);
    let strikes: Vec<f64> = (0..97).map(|k| 2250.0 + 10.0 * k as f64).collect();
    let market = option_market(&grid, pi0.probs(), &strikes, 0.35);
    let set = &market.set;
    assert_eq!(set.grid().len(), 5001);
    assert_eq!(set.n_market(), 390);

    let price = PriceFunction::identity(set.grid());
    let single = Instant::now();
    let bounds = expectation_bounds(set, &price).unwrap();
    let single_elapsed = single.elapsed();
    assert!(
        single_elapsed.as_secs_f64() < 10.0,
        "single expectation bound took {single_elapsed:?}"
    );
    assert!(bounds.lower <= bounds.upper);
    assert!(bounds.lower > 2600.0 && bounds.upper < 2900.0, "bounds {bounds:?}");

    let sweep = Instant::now();
    let step = 5000 / 199;
    let xs: Vec<f64> = (0..200).map(|k| grid.values()[(k * step).min(5000)]).collect();
    let envelopes = cdf_bounds(set, &price, &xs).unwrap();
    let sweep_elapsed = sweep.elapsed();
    assert_eq!(envelopes.xs.len(), 200);
    assert!(
        sweep_elapsed.as_secs_f64() < 300.0,
        "200-point CDF sweep took {sweep_elapsed:?}"
    );
    eprintln!(
        "criterion 8: PASS — m=5001/n=390: expectation bounds [{:.4}, {:.4}] in \
         {single_elapsed:?}, 200-point CDF sweep in {sweep_elapsed:?}",
        bounds.lower, bounds.upper
    );
}

#[test]
fn criterion_9_conditional_reproduction() {
    // Only runs when the published market data files are present; the
    // numbers are not reproducible from synthetic data.
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let spx = root.join("spx_2019-06-03.csv");
    let btc = root.join("btc_2020-02-20.csv");
    if !spx.exists() || !btc.exists() {
        eprintln!(
            "criterion 9: WAIVED — published data files not present ({} / {})",
            spx.display(),
            btc.display()
        );
        return;
    }

    use rnp::chain::{build_market, load_snapshot, GridSpec, RunConfig, SnapshotFormat};
    let spx_config = RunConfig {
        grid: GridSpec { min: 1500.0, max: 4000.0, step: 0.5 },
        fees: FeeSchedule {
            option_fixed_fee: 0.65,
            underlying_proportional_fee: 0.003,
            ..FeeSchedule::zero()
        },
        discount_factor: 1.0,
        tolerances: Default::default(),
    };
    let loaded = load_snapshot(&spx, SnapshotFormat::Csv).unwrap();
    let (_, set) = build_market(&loaded.snapshot, &spx_config).unwrap();
    let price = PriceFunction::identity(set.grid());
    let bounds = expectation_bounds(&set, &price).unwrap();
    assert!((bounds.lower - 2745.77).abs() <= 0.25, "SPX lower {}", bounds.lower);
    assert!((bounds.upper - 2747.03).abs() <= 0.25, "SPX upper {}", bounds.upper);
    let start = max_entropy(&set).unwrap();
    let trace = closest_lognormal(&set, &start, 50, 1e-6).unwrap();
    let fit = trace.final_fit().unwrap();
    assert!((fit.mu - 7.917).abs() <= 0.01 && (fit.sigma - 0.05).abs() <= 0.01);

    let btc_config = RunConfig {
        grid: GridSpec { min: 5.0, max: 30000.0, step: 5.0 },
        fees: FeeSchedule {
            option_proportional_fee: 0.0004,
            future_buy_fee: 0.00075,
            future_sell_rebate: 0.00025,
            ..FeeSchedule::zero()
        },
        discount_factor: 1.0,
        tolerances: Default::default(),
    };
    let loaded = load_snapshot(&btc, SnapshotFormat::Csv).unwrap();
    let (_, set) = build_market(&loaded.snapshot, &btc_config).unwrap();
    let price = PriceFunction::identity(set.grid());
    let bounds = expectation_bounds(&set, &price).unwrap();
    assert!((bounds.lower - 9847.70).abs() <= 0.25, "BTC lower {}", bounds.lower);
    assert!((bounds.upper - 9852.57).abs() <= 0.25, "BTC upper {}", bounds.upper);
    let start = max_entropy(&set).unwrap();
    let trace = closest_lognormal(&set, &start, 50, 1e-6).unwrap();
    let fit = trace.final_fit().unwrap();
    assert!((fit.mu - 9.174).abs() <= 0.01 && (fit.sigma - 0.204).abs() <= 0.01);
    eprintln!("criterion 9: PASS — SPX and Bitcoin reproduction within tolerance");
}

/// Supplementary: the planted distribution always prices inside the bounds
/// and maxent beats random members on entropy.
#[test]
fn maxent_dominates_sampled_members() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EC8);
    let market = random_market(&mut rng, 4, 5);
    let maxent = max_entropy(&market.set).unwrap();
    let samples = rnp::optimize::sample_feasible(&market.set, 100, 99).unwrap();
    for s in &samples {
        assert!(maxent.entropy() >= s.entropy() - 1e-7);
    }
    let payoff = PriceFunction::from_values(market.columns[0].clone()).unwrap();
    let bounds = expectation_bounds(&market.set, &payoff).unwrap();
    let fair = market.pi0.expectation(market.columns[0].as_slice());
    assert!(fair >= bounds.lower - 1e-9 && fair <= bounds.upper + 1e-9);

    // Fit degradation guard: fits of two-point mixtures stay finite.
    let fit = fit_lognormal_moments(&market.pi0, market.set.grid()).unwrap();
    assert!(fit.sigma > 0.0);
}
