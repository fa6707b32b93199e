// Which row is violated, and by how much, in the m=2000 entropy witness?
use rnp::estimate::{discretize_lognormal, LogNormalFit};
use rnp::market::{Instrument, InstrumentKind, Market, PriceGrid};
use rnp::optimize::{solve_entropy, EntropyProgramOverPi, SolveStatus};
use rnp::polytope::RiskNeutralSet;
use rnp::Tolerances;

fn main() {
    let (mu, sigma) = (100.0f64.ln(), 0.2f64);
    let m = 2000usize;
    let lo = 100.0 * (-4.0 * sigma).exp();
    let hi = 100.0 * (4.0 * sigma).exp();
    let step = (hi - lo) / (m as f64 - 1.0);
    let grid = PriceGrid::from_range(lo, hi, step).unwrap();
    let planted = discretize_lognormal(&LogNormalFit::new(mu, sigma, grid.clone()).unwrap());
    let strikes: Vec<f64> =
        (0..40).map(|k| lo + (hi - lo) * (0.05 + 0.9 * k as f64 / 39.0)).collect();
    let mut instruments = Vec::new();
    let mut costs = Vec::new();
    let mut add = |i: Instrument, w: Instrument| {
        let col = i.payoff_column(&grid).unwrap();
        let fair: f64 = col.iter().zip(planted.probs()).map(|(f, p)| f * p).sum();
        instruments.push(i);
        costs.push(fair);
        instruments.push(w);
        costs.push(-fair);
    };
    for &s in &strikes {
        add(
            Instrument::new(InstrumentKind::CallBuy, Some(s)).unwrap(),
            Instrument::new(InstrumentKind::CallWrite, Some(s)).unwrap(),
        );
        add(
            Instrument::new(InstrumentKind::PutBuy, Some(s)).unwrap(),
            Instrument::new(InstrumentKind::PutWrite, Some(s)).unwrap(),
        );
    }
    add(
        Instrument::new(InstrumentKind::UnderlyingLong, None).unwrap(),
        Instrument::new(InstrumentKind::UnderlyingShort, None).unwrap(),
    );
    // relaxed tolerances so the solve returns its witness for inspection
    let mut tols = Tolerances::default();
    tols.feas = 1.0;
    tols.simplex = 1e-2;
    let set = RiskNeutralSet::with_tolerances(
        Market::new(grid.clone(), instruments.clone(), costs.clone()).unwrap(),
        tols,
    );
    let r = solve_entropy(&set, &EntropyProgramOverPi::max_entropy()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    let pi = r.pi.unwrap();
    println!("sum error {:.3e}", pi.probs().iter().sum::<f64>() - 1.0);
    let p = set.market().payoff_matrix();
    let mut worst = (0.0f64, usize::MAX);
    for (j, &c) in set.market().costs().iter().enumerate() {
        let v: f64 = p.column(j).iter().zip(pi.probs()).map(|(f, q)| f * q).sum();
        let scale = c.abs().max(1.0);
        let viol = (v - c) / scale;
        if viol > worst.0 {
            worst = (viol, j);
        }
    }
    println!(
        "worst violation {:.3e} at row {} ({})",
        worst.0,
        worst.1,
        instruments[worst.1].label()
    );
    // pre-floor reference masses at the edges for context
    println!(
        "planted edge masses: {:.3e} {:.3e} ... {:.3e}",
        planted.probs()[0],
        planted.probs()[1],
        planted.probs()[m - 1]
    );
}
