//! Household energy management.
//!
//! Each hour a household solves a linear program over the rest of the day to
//! decide how much to sell, buy and exchange with its battery, first with its
//! market limit prices to build offers for the next hour, then with the
//! utility tariff and the cleared market volumes to fix the final flows.
//!
//! Per slot `t` of the window the variables are
//! `x1` (sale, <= 0), `x2` (purchase, >= 0) and `x3` (battery, positive when
//! discharging) with `x1 + x2 + x3 = d_t`. The battery state of charge after
//! slot `t` is `e_h0 - sum(x3)` and must stay in `[0, E]`, return to the
//! day's initial charge at the end of the window, and the daily battery
//! throughput `sum |x3|` is capped at two times the depth-of-discharge
//! fraction of the capacity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::Order;
use crate::lp::{LpError, Problem};
use crate::units::{HouseId, Phase, Price, Wh, SLOTS_PER_HOUR};

/// Default depth-of-discharge fraction for one daily cycle.
pub const DEFAULT_DEPTH_OF_DISCHARGE: f64 = 0.8;

/// Smallest LP value treated as nonzero when turning plans into offers.
const OFFER_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Balance,
    StateOfCharge,
    Throughput,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HemsError {
    #[error("household {house}: no feasible dispatch, {constraint:?} constraint at slot {slot}")]
    Infeasible { house: HouseId, slot: usize, constraint: Constraint },
    #[error("household {house}: dispatch infeasible after market clearing at slot {slot} ({constraint:?})")]
    InfeasibleAfterClearing { house: HouseId, slot: usize, constraint: Constraint },
    #[error("household {house}: empty planning window starting at slot {start}")]
    EmptyWindow { house: HouseId, start: usize },
    #[error("household {house}: inconsistent input: {reason}")]
    InvalidInput { house: HouseId, reason: String },
    #[error("household {house}: solver failure: {source}")]
    Solver { house: HouseId, source: LpError },
}

/// Battery and grid-connection state of one household at the start of an hour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HouseholdState {
    pub id: HouseId,
    pub has_pv: bool,
    pub has_battery: bool,
    /// Battery capacity `E` in Wh.
    pub capacity: f64,
    /// Energy stored at the start of the current hour, Wh.
    pub soc: f64,
    /// Energy stored at the start of the day, to be restored at the end, Wh.
    pub initial_soc: f64,
    /// Maximum exchange with the grid per slot, Wh.
    pub grid_limit: f64,
    /// Maximum battery charge or discharge per slot, Wh.
    pub battery_limit: f64,
    /// Battery throughput already committed today, Wh.
    pub throughput_used: f64,
    pub depth_of_discharge: f64,
    pub phase: Phase,
}

impl HouseholdState {
    /// Household without storage.
    pub fn without_battery(id: HouseId, has_pv: bool, grid_limit: f64, phase: Phase) -> Self {
        HouseholdState {
            id,
            has_pv,
            has_battery: false,
            capacity: 0.0,
            soc: 0.0,
            initial_soc: 0.0,
            grid_limit,
            battery_limit: 0.0,
            throughput_used: 0.0,
            depth_of_discharge: DEFAULT_DEPTH_OF_DISCHARGE,
            phase,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_battery(
        id: HouseId,
        has_pv: bool,
        capacity: f64,
        initial_soc: f64,
        grid_limit: f64,
        battery_limit: f64,
        phase: Phase,
    ) -> Self {
        HouseholdState {
            id,
            has_pv,
            has_battery: true,
            capacity,
            soc: initial_soc,
            initial_soc,
            grid_limit,
            battery_limit,
            throughput_used: 0.0,
            depth_of_discharge: DEFAULT_DEPTH_OF_DISCHARGE,
            phase,
        }
    }

    fn storage(&self) -> bool {
        self.has_battery && self.capacity > 0.0 && self.battery_limit > 0.0
    }

    /// Daily throughput cap `2 * DoD * E`.
    pub fn throughput_cap(&self) -> f64 {
        2.0 * self.depth_of_discharge * self.capacity
    }

    pub fn throughput_remaining(&self) -> f64 {
        (self.throughput_cap() - self.throughput_used).max(0.0)
    }

    fn validate(&self) -> Result<(), HemsError> {
        let bad = |reason: &str| {
            Err(HemsError::InvalidInput { house: self.id, reason: reason.to_string() })
        };
        if !(self.grid_limit > 0.0) {
            return bad("grid limit must be positive");
        }
        if self.capacity < 0.0 || self.battery_limit < 0.0 {
            return bad("battery capacity and power must be nonnegative");
        }
        let tol = 1e-6;
        if self.soc < -tol || self.soc > self.capacity + tol {
            return bad("state of charge outside [0, E]");
        }
        if self.initial_soc < -tol || self.initial_soc > self.capacity + tol {
            return bad("initial state of charge outside [0, E]");
        }
        Ok(())
    }

    /// Applies the first `slots` battery setpoints of `plan`.
    pub fn commit(&mut self, plan: &DispatchPlan, slots: usize) {
        for &s in plan.battery.iter().take(slots) {
            self.soc -= s;
            self.throughput_used += s.abs();
        }
        self.soc = self.soc.clamp(0.0, self.capacity);
    }

    /// Resets the battery to the start-of-day state.
    pub fn start_day(&mut self) {
        self.soc = self.initial_soc;
        self.throughput_used = 0.0;
    }
}

/// Perfect forecast of a household's load and PV generation, Wh per slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub load: Vec<f64>,
    pub generation: Vec<f64>,
}

impl Forecast {
    pub fn new(load: Vec<f64>, generation: Vec<f64>) -> Forecast {
        assert_eq!(load.len(), generation.len(), "load and generation lengths differ");
        Forecast { load, generation }
    }

    pub fn len(&self) -> usize {
        self.load.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load.is_empty()
    }

    /// Net demand `load - generation` at `slot`.
    pub fn gap(&self, slot: usize) -> f64 {
        self.load[slot] - self.generation[slot]
    }

    /// Whether the house has renewable excess at `slot`.
    pub fn has_excess(&self, slot: usize) -> bool {
        self.generation[slot] > self.load[slot]
    }
}

/// Objective coefficients for one slot, in EUR per kWh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotCost {
    /// Coefficient of the (nonpositive) sale variable; revenue per kWh sold.
    pub sell: f64,
    /// Whether selling is allowed at all in this slot.
    pub sell_allowed: bool,
    pub buy: f64,
    pub battery: f64,
}

/// End-of-window requirements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowLimits {
    /// Required state of charge after the last slot of the window, Wh.
    pub end_soc: f64,
    /// Battery throughput still available, Wh.
    pub throughput_budget: f64,
}

impl WindowLimits {
    pub fn for_state(state: &HouseholdState) -> WindowLimits {
        WindowLimits { end_soc: state.initial_soc, throughput_budget: state.throughput_remaining() }
    }
}

/// Solution of one household LP over a window of slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchPlan {
    /// Day slot of the first window entry.
    pub start_slot: usize,
    /// Sale per slot (`x1`, nonpositive): market ask or feed-in sale.
    pub sell: Vec<f64>,
    /// Purchase per slot (`x2`, nonnegative): market bid or utility purchase.
    pub buy: Vec<f64>,
    /// Battery exchange per slot (`x3`, positive discharges).
    pub battery: Vec<f64>,
    /// Objective value in EUR.
    pub objective: f64,
}

impl DispatchPlan {
    pub fn len(&self) -> usize {
        self.sell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sell.is_empty()
    }

    /// State of charge after each slot given the charge at the window start.
    pub fn soc_trajectory(&self, start_soc: f64) -> Vec<f64> {
        self.battery
            .iter()
            .scan(start_soc, |e, s| {
                *e -= s;
                Some(*e)
            })
            .collect()
    }

    /// Net market or grid exchange `x1 + x2` per slot.
    pub fn net_exchange(&self) -> Vec<f64> {
        self.sell.iter().zip(&self.buy).map(|(a, b)| a + b).collect()
    }
}

/// Solves the allocation LP for one household over a window.
///
/// `gap[k]` is the demand to cover at window slot `k`; `start_slot` only
/// labels the window for error messages and the returned plan.
pub fn solve_allocation_lp(
    state: &HouseholdState,
    start_slot: usize,
    gap: &[f64],
    costs: &[SlotCost],
    limits: WindowLimits,
) -> Result<DispatchPlan, HemsError> {
    state.validate()?;
    let n = gap.len();
    if n == 0 {
        return Err(HemsError::EmptyWindow { house: state.id, start: start_slot });
    }
    assert_eq!(costs.len(), n, "one cost entry per window slot");
    let storage = state.storage();
    let cu = state.grid_limit;
    let cs = if storage { state.battery_limit } else { 0.0 };

    // quick per-slot balance check so the error names the offending slot
    for (k, (&d, c)) in gap.iter().zip(costs).enumerate() {
        let upper = cu + cs;
        let lower = -cs - if c.sell_allowed { cu } else { 0.0 };
        let tol = 1e-9 * (1.0 + d.abs());
        if d > upper + tol || d < lower - tol {
            return Err(HemsError::Infeasible {
                house: state.id,
                slot: start_slot + k,
                constraint: Constraint::Balance,
            });
        }
    }

    let mut lp = Problem::new();
    let mut sell = Vec::with_capacity(n);
    let mut buy = Vec::with_capacity(n);
    let mut discharge = Vec::with_capacity(n);
    let mut charge = Vec::with_capacity(n);
    for c in costs {
        let floor = if c.sell_allowed { -cu } else { 0.0 };
        sell.push(lp.add_column(c.sell, floor, 0.0));
        buy.push(lp.add_column(c.buy, 0.0, cu));
        if storage {
            discharge.push(lp.add_column(c.battery, 0.0, cs));
            charge.push(lp.add_column(-c.battery, 0.0, cs));
        }
    }
    for k in 0..n {
        let mut row = vec![(sell[k], 1.0), (buy[k], 1.0)];
        if storage {
            row.push((discharge[k], 1.0));
            row.push((charge[k], -1.0));
        }
        lp.add_row(gap[k], gap[k], &row);
    }
    if storage {
        let e0 = state.soc.clamp(0.0, state.capacity);
        let mut cumulative: Vec<(usize, f64)> = Vec::with_capacity(2 * n);
        for k in 0..n {
            cumulative.push((discharge[k], 1.0));
            cumulative.push((charge[k], -1.0));
            if k + 1 < n {
                lp.add_row(e0 - state.capacity, e0, &cumulative);
            } else {
                let end = e0 - limits.end_soc;
                lp.add_row(end, end, &cumulative);
            }
        }
        let all: Vec<(usize, f64)> =
            discharge.iter().chain(&charge).map(|&c| (c, 1.0)).collect();
        lp.add_row(f64::NEG_INFINITY, limits.throughput_budget.max(0.0), &all);
    } else if (state.soc - limits.end_soc).abs() > 1e-6 {
        return Err(HemsError::Infeasible {
            house: state.id,
            slot: start_slot + n - 1,
            constraint: Constraint::StateOfCharge,
        });
    }

    let solution = lp.solve().map_err(|e| match e {
        LpError::Infeasible { rows } => {
            let row = rows[0];
            let (slot, constraint) = if row < n {
                (row, Constraint::Balance)
            } else if row < 2 * n {
                (row - n, Constraint::StateOfCharge)
            } else {
                (n - 1, Constraint::Throughput)
            };
            HemsError::Infeasible { house: state.id, slot: start_slot + slot, constraint }
        }
        other => HemsError::Solver { house: state.id, source: other },
    })?;

    let x = &solution.x;
    let battery = if storage {
        (0..n).map(|k| x[discharge[k]] - x[charge[k]]).collect()
    } else {
        vec![0.0; n]
    };
    Ok(DispatchPlan {
        start_slot,
        sell: sell.iter().map(|&c| x[c]).collect(),
        buy: buy.iter().map(|&c| x[c]).collect(),
        battery,
        objective: solution.objective / 1000.0,
    })
}

/// Offers for the next market hour together with the plan behind them.
#[derive(Clone, Debug, PartialEq)]
pub struct OfferPlan {
    pub orders: Vec<Order>,
    pub plan: DispatchPlan,
}

fn check_day_inputs(
    state: &HouseholdState,
    forecast: &Forecast,
    series: &[&[Price]],
    hour: usize,
) -> Result<usize, HemsError> {
    let start = hour * SLOTS_PER_HOUR;
    if start >= forecast.len() {
        return Err(HemsError::EmptyWindow { house: state.id, start });
    }
    if series.iter().any(|s| s.len() != forecast.len()) {
        return Err(HemsError::InvalidInput {
            house: state.id,
            reason: "price series and forecast lengths differ".into(),
        });
    }
    if !state.has_pv && forecast.generation.iter().any(|&g| g != 0.0) {
        return Err(HemsError::InvalidInput {
            house: state.id,
            reason: "generation forecast for a house without PV".into(),
        });
    }
    Ok(start)
}

/// Plans the market offers of one household for `hour`.
///
/// Solves the window from the hour's first slot to the end of the day with
/// the household's limit prices as coefficients and turns the net exchange
/// of the hour's slots into bids (positive) and asks (negative). Volumes are
/// rounded towards zero to whole Wh.
pub fn plan_offers(
    state: &HouseholdState,
    forecast: &Forecast,
    ask_limits: &[Price],
    bid_limits: &[Price],
    hour: usize,
) -> Result<OfferPlan, HemsError> {
    let start = check_day_inputs(state, forecast, &[ask_limits, bid_limits], hour)?;
    let end = forecast.len();
    let gap: Vec<f64> = (start..end).map(|t| forecast.gap(t)).collect();
    let costs: Vec<SlotCost> = (start..end)
        .map(|t| SlotCost {
            sell: ask_limits[t].eur_per_kwh(),
            sell_allowed: forecast.has_excess(t),
            buy: bid_limits[t].eur_per_kwh(),
            battery: 0.0,
        })
        .collect();
    let plan = solve_allocation_lp(state, start, &gap, &costs, WindowLimits::for_state(state))?;

    let mut orders = Vec::new();
    for (k, v) in plan.net_exchange().into_iter().take(SLOTS_PER_HOUR).enumerate() {
        let slot = start + k;
        let volume = (v.abs() + OFFER_EPS).floor() as u64;
        if volume == 0 {
            continue;
        }
        if v > 0.0 {
            orders.push(Order::bid(state.id, bid_limits[slot], volume, slot as u32));
        } else {
            orders.push(Order::ask(state.id, ask_limits[slot], volume, slot as u32));
        }
    }
    Ok(OfferPlan { orders, plan })
}

/// Expected market prices for the slots after the current hour.
///
/// Used by [`finalize_flows`] only to choose among plans that cost the same
/// at the utility tariff, so a battery that can wait for a cheaper trade
/// does not fill up from the utility first.
#[derive(Clone, Copy, Debug)]
pub struct Outlook<'a> {
    pub bid: &'a [Price],
    pub ask: &'a [Price],
}

/// Weight of the outlook prices. Small enough that a one-unit tariff
/// difference always dominates any outlook difference.
const OUTLOOK_WEIGHT: f64 = 1e-3;

/// Recomputes the final battery and utility flows after the market cleared.
///
/// `cleared[k]` is the signed traded volume for slot `hour * 6 + k`
/// (positive bought). The gap becomes `load - generation - traded`, sales go
/// to the feed-in tariff where the house has excess and purchases to the
/// utility.
pub fn finalize_flows(
    state: &HouseholdState,
    forecast: &Forecast,
    cleared: &[Wh],
    utility_prices: &[Price],
    feed_in: Price,
    outlook: Option<Outlook<'_>>,
    hour: usize,
) -> Result<DispatchPlan, HemsError> {
    let mut inputs = vec![utility_prices];
    if let Some(o) = &outlook {
        inputs.extend([o.bid, o.ask]);
    }
    let start = check_day_inputs(state, forecast, &inputs, hour)?;
    if cleared.len() > SLOTS_PER_HOUR {
        return Err(HemsError::InvalidInput {
            house: state.id,
            reason: format!("{} cleared volumes for one hour", cleared.len()),
        });
    }
    let end = forecast.len();
    let gap: Vec<f64> = (start..end)
        .map(|t| forecast.gap(t) - cleared.get(t - start).copied().unwrap_or(0) as f64)
        .collect();
    let costs: Vec<SlotCost> = (start..end)
        .map(|t| {
            let mut c = SlotCost {
                sell: feed_in.eur_per_kwh(),
                sell_allowed: forecast.has_excess(t),
                buy: utility_prices[t].eur_per_kwh(),
                battery: 0.0,
            };
            if let Some(o) = outlook {
                // the current hour is already settled at the tariffs
                let (sell, buy) = if t < start + SLOTS_PER_HOUR {
                    (feed_in, utility_prices[t])
                } else {
                    (o.ask[t], o.bid[t])
                };
                c.sell += OUTLOOK_WEIGHT * sell.eur_per_kwh();
                c.buy += OUTLOOK_WEIGHT * buy.eur_per_kwh();
            }
            c
        })
        .collect();
    solve_allocation_lp(state, start, &gap, &costs, WindowLimits::for_state(state)).map_err(
        |e| match e {
            HemsError::Infeasible { house, slot, constraint } => {
                HemsError::InfeasibleAfterClearing { house, slot, constraint }
            }
            other => other,
        },
    )
}
