//! Daily simulation loop, variant comparison and result files.

mod compare;
mod output;

pub use compare::{compare_variants, enhancement, Enhancements};
pub use output::write_outputs;

use std::collections::BTreeMap;

use log::{debug, info};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::auction::{run_slot_market, AuctionError, ClearingResult, Order};
use crate::grid::{run_power_flow, GridError, MetricsReport, NetworkModel};
use crate::hems::{
    finalize_flows, plan_offers, DispatchPlan, Forecast, HemsError, HouseholdState, Outlook,
};
use crate::ledger::{settle, Ledger, LedgerError, Payload, Tolerance};
use crate::scenario::{
    draw_limit_prices, generate_loads, generate_pv, meter_stream, price_stream, read_curves_csv,
    Archetype, Curves, LimitPrices, Population, RenewableForecast, ScenarioConfig, ScenarioError,
    Tariff,
};
use crate::units::{
    slot_energy_to_power, HouseId, MicroEuro, Price, Wh, HOURS_PER_DAY, SLOTS_PER_DAY,
    SLOTS_PER_HOUR,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("day {day}, hour {hour}: {source}")]
    Hems { day: u32, hour: usize, source: HemsError },
    #[error("day {day}, slot {slot}: {source}")]
    Auction { day: u32, slot: usize, source: AuctionError },
    #[error("day {day}, slot {slot}: power flow failed: {source}")]
    PowerFlow { day: u32, slot: usize, source: GridError },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Baseline,
    Market,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Market => "market",
        }
    }
}

/// Scenario data shared by both variants for one day.
#[derive(Clone, Debug)]
pub struct DayInputs {
    pub loads: Vec<Vec<i64>>,
    pub pv: Vec<Vec<i64>>,
    pub renewable: RenewableForecast,
    pub limits: Vec<LimitPrices>,
}

/// Final per-slot flows of one house, Wh.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct HouseFlows {
    pub house: HouseId,
    pub load: Vec<i64>,
    pub pv: Vec<i64>,
    /// Battery exchange, positive discharging.
    pub battery: Vec<f64>,
    /// Cleared market volume, positive bought.
    pub market: Vec<Wh>,
    pub utility: Vec<f64>,
    /// Feed-in sale, nonpositive.
    pub feed_in: Vec<f64>,
    /// State of charge at the end of each slot.
    pub soc: Vec<f64>,
}

impl HouseFlows {
    /// Net exchange with the grid, positive drawing.
    pub fn net(&self, t: usize) -> f64 {
        self.feed_in[t] + self.utility[t] + self.market[t] as f64
    }
}

/// Money and tokens of one house over a day.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Bill {
    pub utility_cost: MicroEuro,
    pub feed_in_revenue: MicroEuro,
    pub market_cost: MicroEuro,
    pub market_revenue: MicroEuro,
    pub ecoins: u64,
}

impl Bill {
    pub fn net(&self) -> MicroEuro {
        self.utility_cost + self.market_cost - self.feed_in_revenue - self.market_revenue
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MarketStats {
    pub volume_wh: Wh,
    pub slots_with_trades: usize,
    pub bids: usize,
    pub asks: usize,
    pub exclusions: usize,
    pub surplus: MicroEuro,
    pub ecoins: u64,
    pub failed_settlements: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DayResult {
    pub day: u32,
    pub variant: Variant,
    pub metrics: MetricsReport,
    pub market: MarketStats,
    #[serde(skip)]
    pub flows: Vec<HouseFlows>,
    pub bills: BTreeMap<HouseId, Bill>,
    #[serde(skip)]
    pub clearings: Vec<ClearingResult>,
}

pub struct Simulation {
    pub config: ScenarioConfig,
    pub network: NetworkModel,
    pub population: Population,
    pub tariff: Tariff,
    load_curves: Option<Curves>,
    pv_curves: Option<Curves>,
}

impl Simulation {
    pub fn new(config: ScenarioConfig, network: NetworkModel) -> Result<Simulation, SimError> {
        config.validate()?;
        let mut population =
            Population::generate(&config.population, &config.pv, config.battery_wh(), config.seed);
        population.assign_phases(|id| network.attachment(id).map(|a| a.1))?;
        let tariff = Tariff::from_config(&config.tariff)?;
        let read = |p: &Option<std::path::PathBuf>| p.as_deref().map(read_curves_csv).transpose();
        let load_curves = read(&config.input.load_csv)?;
        let pv_curves = read(&config.input.pv_csv)?;
        for c in load_curves.iter().chain(&pv_curves) {
            if c.days() < config.days as usize {
                return Err(ScenarioError::Invalid(format!(
                    "curve file holds {} days but {} are simulated",
                    c.days(),
                    config.days
                ))
                .into());
            }
        }
        Ok(Simulation { config, network, population, tariff, load_curves, pv_curves })
    }

    pub fn day_inputs(&self, day: u32) -> Result<DayInputs, SimError> {
        let cfg = &self.config;
        let ids = self.population.ids();
        let loads = match &self.load_curves {
            Some(c) => c.day(day as usize, &ids)?,
            None => generate_loads(&cfg.load, &self.population, cfg.seed, day),
        };
        let (pv, renewable) = match &self.pv_curves {
            Some(c) => {
                let mut pv = c.day(day as usize, &ids)?;
                for (h, curve) in self.population.houses.iter().zip(&mut pv) {
                    if !h.archetype.has_pv() {
                        curve.iter_mut().for_each(|v| *v = 0);
                    }
                }
                let f = RenewableForecast::from_generation(&pv, SLOTS_PER_DAY);
                (pv, f)
            }
            None => generate_pv(&cfg.pv, &self.population, cfg.seed, day),
        };
        let limits = self
            .population
            .houses
            .iter()
            .map(|h| {
                let mut rng = price_stream(cfg.seed, day, h.id);
                draw_limit_prices(&self.tariff, &renewable, &mut rng)
            })
            .collect();
        Ok(DayInputs { loads, pv, renewable, limits })
    }

    fn household(&self, k: usize) -> HouseholdState {
        let h = &self.population.houses[k];
        let b = &self.config.battery;
        let mut st = if h.archetype.has_battery() {
            let e = self.population.battery_wh;
            HouseholdState::with_battery(
                h.id,
                h.archetype.has_pv(),
                e,
                e * b.initial_soc_fraction,
                b.grid_limit_wh,
                b.battery_limit_wh,
                h.phase,
            )
        } else {
            HouseholdState::without_battery(h.id, false, b.grid_limit_wh, h.phase)
        };
        st.depth_of_discharge = b.depth_of_discharge;
        st
    }

    fn trades(&self, k: usize) -> bool {
        self.config.all_houses_trade || self.population.houses[k].archetype != Archetype::NoDer
    }

    /// Simulates one day of one variant, appending clearings and
    /// settlements to `ledger`.
    pub fn run_day(
        &self,
        day: u32,
        variant: Variant,
        inputs: &DayInputs,
        ledger: &mut Ledger,
    ) -> Result<DayResult, SimError> {
        let n = self.population.houses.len();
        let mut states: Vec<HouseholdState> = (0..n).map(|k| self.household(k)).collect();
        let forecasts: Vec<Forecast> = (0..n)
            .map(|k| {
                Forecast::new(
                    inputs.loads[k].iter().map(|&v| v as f64).collect(),
                    inputs.pv[k].iter().map(|&v| v as f64).collect(),
                )
            })
            .collect();
        let mut flows: Vec<HouseFlows> = (0..n)
            .map(|k| HouseFlows {
                house: self.population.houses[k].id,
                load: inputs.loads[k].clone(),
                pv: inputs.pv[k].clone(),
                market: vec![0; SLOTS_PER_DAY],
                ..HouseFlows::default()
            })
            .collect();
        let mut stats = MarketStats::default();
        let mut clearings = Vec::new();

        for hour in 0..HOURS_PER_DAY {
            let mut orders: Vec<Order> = Vec::new();
            let market_open = variant == Variant::Market && !(day == 0 && hour == 0);
            if market_open {
                for k in (0..n).filter(|&k| self.trades(k)) {
                    let l = &inputs.limits[k];
                    let offers = plan_offers(&states[k], &forecasts[k], &l.ask, &l.bid, hour)
                        .map_err(|source| SimError::Hems { day, hour, source })?;
                    orders.extend(offers.orders);
                }
            }
            let mut cleared = vec![[0 as Wh; SLOTS_PER_HOUR]; n];
            if market_open {
                for s in 0..SLOTS_PER_HOUR {
                    let slot = hour * SLOTS_PER_HOUR + s;
                    let book: Vec<Order> =
                        orders.iter().filter(|o| o.slot as usize == slot).copied().collect();
                    let result = run_slot_market(&book, slot as u32)
                        .map_err(|source| SimError::Auction { day, slot, source })?;
                    ledger.append(&Payload::Clearing {
                        day,
                        slot: slot as u32,
                        clearing: (&result).into(),
                    });
                    for o in &book {
                        match o.side {
                            crate::auction::Side::Buy => stats.bids += 1,
                            crate::auction::Side::Sell => stats.asks += 1,
                        }
                    }
                    stats.exclusions += result.excluded.len();
                    stats.surplus += result.surplus;
                    if !result.is_empty() {
                        stats.slots_with_trades += 1;
                        stats.volume_wh += result.volume();
                    }
                    for (k, h) in self.population.houses.iter().enumerate() {
                        if let Some(&v) = result.trades.get(&h.id) {
                            cleared[k][s] = v;
                            flows[k].market[slot] = v;
                        }
                    }
                    clearings.push(result);
                }
            }
            for k in 0..n {
                let l = &inputs.limits[k];
                let outlook = (variant == Variant::Market && self.trades(k))
                    .then(|| Outlook { bid: &l.bid, ask: &l.ask });
                let plan = finalize_flows(
                    &states[k],
                    &forecasts[k],
                    &cleared[k],
                    &self.tariff.utility,
                    self.tariff.feed_in,
                    outlook,
                    hour,
                )
                .map_err(|source| SimError::Hems { day, hour, source })?;
                record(&mut flows[k], &states[k], &plan);
                states[k].commit(&plan, SLOTS_PER_HOUR);
            }
            debug!("day {day} {} hour {hour}: {} orders", variant.name(), orders.len());
        }

        let mut series = Vec::with_capacity(SLOTS_PER_DAY);
        for slot in 0..SLOTS_PER_DAY {
            let demand: BTreeMap<HouseId, f64> =
                flows.iter().map(|f| (f.house, slot_energy_to_power(f.net(slot)))).collect();
            let pf = run_power_flow(&self.network, &demand)
                .map_err(|source| SimError::PowerFlow { day, slot, source })?;
            series.push(pf);
        }
        let metrics = MetricsReport::from_slots(&series, &self.network)?;

        let mut bills = self.bills(&flows, &clearings);
        if variant == Variant::Market {
            self.settle_day(day, &flows, &clearings, ledger, &mut bills, &mut stats)?;
        }
        info!(
            "day {} {}: E_in {:.0} Wh, E_out {:.0} Wh, traded {} Wh",
            day + 1,
            variant.name(),
            metrics.e_in,
            metrics.e_out,
            stats.volume_wh
        );
        Ok(DayResult { day, variant, metrics, market: stats, flows, bills, clearings })
    }

    fn bills(&self, flows: &[HouseFlows], clearings: &[ClearingResult]) -> BTreeMap<HouseId, Bill> {
        let mut bills: BTreeMap<HouseId, Bill> = BTreeMap::new();
        for f in flows {
            let b = bills.entry(f.house).or_default();
            for t in 0..SLOTS_PER_DAY {
                b.utility_cost += self.tariff.utility[t].cost(f.utility[t].round() as Wh);
                b.feed_in_revenue += self.tariff.feed_in.cost(-f.feed_in[t].round() as Wh);
            }
        }
        for c in clearings {
            for (&house, &v) in &c.trades {
                let b = bills.entry(house).or_default();
                if v > 0 {
                    b.market_cost += c.buyer_price.unwrap_or(Price::ZERO).cost(v);
                } else {
                    b.market_revenue += c.seller_price.unwrap_or(Price::ZERO).cost(-v);
                }
            }
        }
        bills
    }

    fn settle_day(
        &self,
        day: u32,
        flows: &[HouseFlows],
        clearings: &[ClearingResult],
        ledger: &mut Ledger,
        bills: &mut BTreeMap<HouseId, Bill>,
        stats: &mut MarketStats,
    ) -> Result<(), SimError> {
        let s = &self.config.settlement;
        let tolerance = Tolerance { relative: s.tolerance, min_wh: s.min_tolerance_wh };
        let mut noise = meter_stream(self.config.seed, day);
        let index: BTreeMap<HouseId, usize> =
            flows.iter().enumerate().map(|(k, f)| (f.house, k)).collect();
        for c in clearings.iter().filter(|c| !c.is_empty()) {
            let slot = c.slot as usize;
            let mut metered = BTreeMap::new();
            for &house in c.trades.keys() {
                let f = &flows[index[&house]];
                // the part of the grid exchange not served by the utility or the feed-in
                let delivered = (f.net(slot) - f.utility[slot] - f.feed_in[slot]).round() as Wh;
                let err = if s.meter_noise_pct > 0 {
                    let pct = noise.random_range(-s.meter_noise_pct..=s.meter_noise_pct);
                    delivered * pct / 100
                } else {
                    0
                };
                metered.insert(house, delivered + err);
            }
            let records = settle(c.slot, &c.trades, &metered, tolerance)?;
            for r in &records {
                bills.entry(r.house).or_default().ecoins += r.ecoins_awarded;
                stats.ecoins += r.ecoins_awarded;
                stats.failed_settlements += usize::from(!r.verified);
            }
            ledger.append(&Payload::Settlement { day, slot: c.slot, records });
        }
        Ok(())
    }

    /// Runs the requested variants over every configured day.
    pub fn run(&self, variants: &[Variant]) -> Result<SimulationReport, SimError> {
        let mut ledger = Ledger::new();
        let mut days = Vec::new();
        for day in 0..self.config.days {
            let inputs = self.day_inputs(day)?;
            let mut results = Vec::new();
            for &v in variants {
                results.push(self.run_day(day, v, &inputs, &mut ledger)?);
            }
            days.push(DayReport::new(day, results));
        }
        Ok(SimulationReport::new(&self.config, days, ledger))
    }
}

fn record(f: &mut HouseFlows, state: &HouseholdState, plan: &DispatchPlan) {
    let soc = plan.soc_trajectory(state.soc);
    for k in 0..SLOTS_PER_HOUR.min(plan.len()) {
        f.feed_in.push(plan.sell[k]);
        f.utility.push(plan.buy[k]);
        f.battery.push(plan.battery[k]);
        f.soc.push(soc[k].clamp(0.0, state.capacity));
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DayReport {
    pub day: u32,
    pub baseline: Option<DayResult>,
    pub market: Option<DayResult>,
    pub enhancement: Option<Enhancements>,
}

impl DayReport {
    fn new(day: u32, results: Vec<DayResult>) -> DayReport {
        let mut baseline = None;
        let mut market = None;
        for r in results {
            match r.variant {
                Variant::Baseline => baseline = Some(r),
                Variant::Market => market = Some(r),
            }
        }
        let enhancement = match (&baseline, &market) {
            (Some(b), Some(m)) => Some(compare_variants(&b.metrics, &m.metrics)),
            _ => None,
        };
        DayReport { day, baseline, market, enhancement }
    }
}

/// Sums over all simulated days of one variant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Totals {
    pub e_in: f64,
    pub e_out: f64,
    pub tr_loss: f64,
    pub line_loss_phase: f64,
    pub line_loss_neutral: f64,
    pub traded_wh: Wh,
}

impl Totals {
    fn of<'a>(days: impl Iterator<Item = &'a DayResult>) -> Totals {
        let mut t = Totals::default();
        for d in days {
            t.e_in += d.metrics.e_in;
            t.e_out += d.metrics.e_out;
            t.tr_loss += d.metrics.tr_loss;
            t.line_loss_phase += d.metrics.line_loss.phase_total();
            t.line_loss_neutral += d.metrics.line_loss.neutral;
            t.traded_wh += d.market.volume_wh;
        }
        t
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub days_simulated: u32,
    pub battery_kwh: f64,
    pub days: Vec<DayReport>,
    pub baseline_totals: Option<Totals>,
    pub market_totals: Option<Totals>,
    /// Enhancements of the multi-day totals, percent.
    pub total_enhancement: Option<TotalEnhancement>,
    pub ledger_entries: usize,
    pub ledger_head: String,
    #[serde(skip)]
    pub ledger: Ledger,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TotalEnhancement {
    pub e_in: Option<f64>,
    pub e_out: Option<f64>,
    pub tr_loss: Option<f64>,
    pub line_loss_phase: Option<f64>,
    pub line_loss_neutral: Option<f64>,
}

impl SimulationReport {
    fn new(config: &ScenarioConfig, days: Vec<DayReport>, ledger: Ledger) -> SimulationReport {
        let has = |f: fn(&DayReport) -> bool| !days.is_empty() && days.iter().all(f);
        let baseline_totals =
            has(|d| d.baseline.is_some()).then(|| Totals::of(days.iter().filter_map(|d| d.baseline.as_ref())));
        let market_totals =
            has(|d| d.market.is_some()).then(|| Totals::of(days.iter().filter_map(|d| d.market.as_ref())));
        let total_enhancement = baseline_totals.zip(market_totals).map(|(b, m)| TotalEnhancement {
            e_in: enhancement(b.e_in, m.e_in),
            e_out: enhancement(b.e_out, m.e_out),
            tr_loss: enhancement(b.tr_loss, m.tr_loss),
            line_loss_phase: enhancement(b.line_loss_phase, m.line_loss_phase),
            line_loss_neutral: enhancement(b.line_loss_neutral, m.line_loss_neutral),
        });
        SimulationReport {
            seed: config.seed,
            days_simulated: config.days,
            battery_kwh: config.battery_kwh,
            baseline_totals,
            market_totals,
            total_enhancement,
            ledger_entries: ledger.len(),
            ledger_head: hex::encode(ledger.head()),
            days,
            ledger,
        }
    }
}
