//! Exhaustive search over household dispatches on a 100 Wh grid.
//!
//! Every per-slot choice of battery exchange and sale is enumerated; the
//! purchase follows from the balance. A table over (state of charge,
//! throughput used) keeps the search polynomial while still visiting every
//! feasible grid allocation.

use std::collections::HashMap;

use rand::Rng;

pub const STEP: i64 = 100;

#[derive(Clone, Debug)]
pub struct GridInstance {
    /// Gap per slot, Wh, multiple of `STEP`.
    pub gap: Vec<i64>,
    /// Sale revenue per slot, EUR/kWh.
    pub sell: Vec<f64>,
    pub sell_allowed: Vec<bool>,
    pub buy: Vec<f64>,
    pub capacity: i64,
    pub soc: i64,
    pub end_soc: i64,
    pub grid_limit: i64,
    pub battery_limit: i64,
    pub budget: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPlan {
    pub sell: Vec<i64>,
    pub buy: Vec<i64>,
    pub battery: Vec<i64>,
    pub objective: f64,
}

fn steps(lo: i64, hi: i64) -> impl Iterator<Item = i64> {
    (lo / STEP..=hi / STEP).map(|k| k * STEP)
}

type Layer = (f64, Vec<(i64, i64, i64)>);

/// Minimum-cost grid allocation, or `None` if no grid point is feasible.
pub fn best_on_grid(inst: &GridInstance) -> Option<GridPlan> {
    let n = inst.gap.len();
    // state -> (cost, per-slot choices)
    let mut layer: HashMap<(i64, i64), Layer> = HashMap::new();
    layer.insert((inst.soc, 0), (0.0, Vec::new()));
    for t in 0..n {
        let mut next: HashMap<(i64, i64), Layer> = HashMap::new();
        let mut keys: Vec<_> = layer.keys().copied().collect();
        keys.sort();
        for key in keys {
            let (cost, path) = &layer[&key];
            let (soc, used) = key;
            for x3 in steps(-inst.battery_limit, inst.battery_limit) {
                let e = soc - x3;
                let u = used + x3.abs();
                if e < 0 || e > inst.capacity || u > inst.budget {
                    continue;
                }
                let sell_floor = if inst.sell_allowed[t] { -inst.grid_limit } else { 0 };
                for x1 in steps(sell_floor, 0) {
                    let x2 = inst.gap[t] - x3 - x1;
                    if x2 < 0 || x2 > inst.grid_limit {
                        continue;
                    }
                    let c = cost + (inst.sell[t] * x1 as f64 + inst.buy[t] * x2 as f64) / 1000.0;
                    let better = next.get(&(e, u)).is_none_or(|(old, _)| c < *old - 1e-12);
                    if better {
                        let mut p = path.clone();
                        p.push((x1, x2, x3));
                        next.insert((e, u), (c, p));
                    }
                }
            }
        }
        layer = next;
    }
    let mut finals: Vec<_> = layer.into_iter().filter(|((e, _), _)| *e == inst.end_soc).collect();
    finals.sort_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)));
    let (_, (objective, path)) = finals.into_iter().next()?;
    Some(GridPlan {
        sell: path.iter().map(|p| p.0).collect(),
        buy: path.iter().map(|p| p.1).collect(),
        battery: path.iter().map(|p| p.2).collect(),
        objective,
    })
}

/// Random instance whose data sit on the 100 Wh grid.
///
/// The throughput budget is chosen with the same parity as the required net
/// battery movement, so the continuous optimum has a grid representative.
pub fn random_instance<R: Rng>(rng: &mut R, slots: usize) -> GridInstance {
    let capacity = STEP * rng.random_range(0..=10);
    let soc = STEP * rng.random_range(0..=capacity / STEP);
    let end_soc = STEP * rng.random_range(0..=capacity / STEP);
    let grid_limit = STEP * rng.random_range(2..=4);
    let battery_limit = if capacity == 0 { 0 } else { STEP * rng.random_range(2..=4) };
    let net = (soc - end_soc).abs();
    let mut budget = net + 2 * STEP * rng.random_range(0..=5);
    if capacity == 0 {
        budget = 0;
    }
    let mut gap = Vec::with_capacity(slots);
    let mut sell_allowed = Vec::with_capacity(slots);
    for _ in 0..slots {
        let d = STEP * rng.random_range(-(grid_limit / STEP)..=grid_limit / STEP);
        gap.push(d);
        sell_allowed.push(d < 0 || rng.random_bool(0.2));
    }
    let sell = (0..slots).map(|_| rng.random_range(50..=150) as f64 / 1000.0).collect();
    let buy = (0..slots).map(|_| rng.random_range(100..=300) as f64 / 1000.0).collect();
    GridInstance {
        gap,
        sell,
        sell_allowed,
        buy,
        capacity,
        soc,
        end_soc,
        grid_limit,
        battery_limit,
        budget,
    }
}
