//! Shared checks for household plans.

use lvmarket::hems::{
    solve_allocation_lp, DispatchPlan, HemsError, HouseholdState, SlotCost, WindowLimits,
};
use lvmarket::units::Phase;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lp_oracle::{best_on_grid, random_instance, GridInstance, GridPlan};

pub const TOL: f64 = 1e-6;

pub fn state_for(inst: &GridInstance) -> HouseholdState {
    if inst.capacity == 0 {
        HouseholdState::without_battery(1, true, inst.grid_limit as f64, Phase::A)
    } else {
        let mut st = HouseholdState::with_battery(
            1,
            true,
            inst.capacity as f64,
            inst.end_soc as f64,
            inst.grid_limit as f64,
            inst.battery_limit as f64,
            Phase::A,
        );
        st.soc = inst.soc as f64;
        st
    }
}

pub fn costs_for(inst: &GridInstance) -> Vec<SlotCost> {
    (0..inst.gap.len())
        .map(|t| SlotCost {
            sell: inst.sell[t],
            sell_allowed: inst.sell_allowed[t],
            buy: inst.buy[t],
            battery: 0.0,
        })
        .collect()
}

pub fn solve(inst: &GridInstance) -> Result<DispatchPlan, HemsError> {
    let gap: Vec<f64> = inst.gap.iter().map(|&d| d as f64).collect();
    let limits =
        WindowLimits { end_soc: inst.end_soc as f64, throughput_budget: inst.budget as f64 };
    solve_allocation_lp(&state_for(inst), 0, &gap, &costs_for(inst), limits)
}

/// Checks balance, bounds, SOC trajectory, end charge and throughput.
pub fn check_plan(
    plan: &DispatchPlan,
    gap: &[f64],
    st: &HouseholdState,
    end_soc: f64,
    budget: f64,
    sell_allowed: &[bool],
) -> Result<(), String> {
    let fail = |ok: bool, what: String| if ok { Ok(()) } else { Err(what) };
    let mut e = st.soc;
    let mut through = 0.0;
    for t in 0..gap.len() {
        let (x1, x2, x3) = (plan.sell[t], plan.buy[t], plan.battery[t]);
        fail((x1 + x2 + x3 - gap[t]).abs() <= TOL, format!("balance at {t}"))?;
        fail(x1 <= TOL && x1 >= -st.grid_limit - TOL, format!("sell bound at {t}"))?;
        fail(sell_allowed[t] || x1.abs() <= TOL, format!("sale without excess at {t}"))?;
        fail(x2 >= -TOL && x2 <= st.grid_limit + TOL, format!("buy bound at {t}"))?;
        fail(x3.abs() <= st.battery_limit + TOL, format!("battery bound at {t}"))?;
        e -= x3;
        through += x3.abs();
        fail(e >= -TOL && e <= st.capacity + TOL, format!("soc out of range at {t}: {e}"))?;
    }
    fail((e - end_soc).abs() <= TOL, format!("end soc {e} != {end_soc}"))?;
    fail(through <= budget + TOL, format!("throughput {through} > {budget}"))
}

/// Checks the LP against the grid search on `count` random 4-slot
/// instances; returns how many were feasible.
pub fn oracle_agreement(seed: u64, count: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut solved = 0;
    for _ in 0..count {
        let inst = random_instance(&mut rng, 4);
        let oracle = best_on_grid(&inst);
        match (solve(&inst), oracle) {
            (Ok(plan), Some(GridPlan { objective, .. })) => {
                let scale = objective.abs().max(1e-3);
                if (plan.objective - objective).abs() > TOL * scale {
                    return Err(format!("lp {} vs grid {objective} on {inst:?}", plan.objective));
                }
                let gap: Vec<f64> = inst.gap.iter().map(|&d| d as f64).collect();
                check_plan(
                    &plan,
                    &gap,
                    &state_for(&inst),
                    inst.end_soc as f64,
                    inst.budget as f64,
                    &inst.sell_allowed,
                )
                .map_err(|e| format!("{e} on {inst:?}"))?;
                solved += 1;
            }
            (Err(_), None) => {}
            (lp, grid) => {
                return Err(format!("feasibility disagrees: {lp:?} vs {grid:?} on {inst:?}"))
            }
        }
    }
    Ok(solved)
}
