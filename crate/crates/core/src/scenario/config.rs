use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ScenarioError;

/// Scenario file contents. Every field has a default, so an empty file
/// describes the standard 33-house winter week.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub days: u32,
    /// Battery capacity for every house with storage, kWh.
    pub battery_kwh: f64,
    /// Whether houses without PV or battery take part in the market.
    pub all_houses_trade: bool,
    pub population: MixConfig,
    pub tariff: TariffConfig,
    pub battery: BatteryConfig,
    pub load: LoadConfig,
    pub pv: PvConfig,
    pub settlement: SettlementConfig,
    pub input: InputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 42,
            days: 6,
            battery_kwh: 6.0,
            all_houses_trade: true,
            population: MixConfig::default(),
            tariff: TariffConfig::default(),
            battery: BatteryConfig::default(),
            load: LoadConfig::default(),
            pv: PvConfig::default(),
            settlement: SettlementConfig::default(),
            input: InputConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixConfig {
    pub no_der: usize,
    pub battery_only: usize,
    pub pv_battery: usize,
}

impl Default for MixConfig {
    fn default() -> Self {
        MixConfig { no_der: 8, battery_only: 8, pv_battery: 17 }
    }
}

impl MixConfig {
    pub fn total(&self) -> usize {
        self.no_der + self.battery_only + self.pv_battery
    }
}

/// Price tier used for hours outside both tariff windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapTier {
    Low,
    High,
}

/// Prices in EUR/kWh; hours are `[start, end)` in local time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TariffConfig {
    pub low_price: f64,
    pub high_price: f64,
    pub low_hours: [usize; 2],
    pub high_hours: [usize; 2],
    pub gap_tier: GapTier,
    pub feed_in: f64,
    pub max_rebate: f64,
    /// Largest fractional improvement over the alternative price a house asks for.
    pub max_improvement: f64,
}

impl Default for TariffConfig {
    fn default() -> Self {
        TariffConfig {
            low_price: 0.15,
            high_price: 0.30,
            low_hours: [0, 16],
            high_hours: [17, 23],
            gap_tier: GapTier::Low,
            feed_in: 0.10,
            max_rebate: 0.02,
            max_improvement: 0.30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    /// Start-of-day charge as a fraction of capacity.
    pub initial_soc_fraction: f64,
    /// Battery charge or discharge limit per slot, Wh.
    pub battery_limit_wh: f64,
    /// Grid connection limit per slot, Wh.
    pub grid_limit_wh: f64,
    pub depth_of_discharge: f64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            initial_soc_fraction: 0.5,
            battery_limit_wh: 500.0,
            grid_limit_wh: 1500.0,
            depth_of_discharge: 0.8,
        }
    }
}

/// Winter load shape. Levels are Wh per slot, ranges are `[min, max]`
/// drawn once per house.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadConfig {
    pub base_wh: [i64; 2],
    pub morning_wh: [i64; 2],
    pub midday_wh: [i64; 2],
    pub evening_wh: [i64; 2],
    /// Per-slot multiplicative noise, percent.
    pub slot_jitter_pct: i64,
    /// Day-to-day scaling of the whole curve, percent.
    pub day_scale_pct: i64,
    /// Day-to-day shift of the peak windows, slots.
    pub day_shift_slots: i64,
}

impl Default for LoadConfig {
    fn default() -> Self {
        LoadConfig {
            base_wh: [45, 80],
            morning_wh: [100, 220],
            midday_wh: [20, 70],
            evening_wh: [150, 300],
            slot_jitter_pct: 20,
            day_scale_pct: 15,
            day_shift_slots: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvConfig {
    /// First and last slot of daylight production.
    pub daylight_slots: [usize; 2],
    /// Peak production per slot, Wh, drawn once per PV house.
    pub peak_wh: [i64; 2],
    /// Cloud noise shared by all houses, percent.
    pub cloud_pct: i64,
    /// Redraw clouds each day instead of repeating day one.
    pub vary_by_day: bool,
}

impl Default for PvConfig {
    fn default() -> Self {
        PvConfig { daylight_slots: [51, 102], peak_wh: [400, 550], cloud_pct: 15, vary_by_day: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SettlementConfig {
    /// Relative tolerance between metered and contracted volume.
    pub tolerance: f64,
    pub min_tolerance_wh: i64,
    /// Standard enforcement error injected into metered trades, percent.
    pub meter_noise_pct: i64,
}

impl Default for SettlementConfig {
    fn default() -> Self {
        SettlementConfig { tolerance: 0.05, min_tolerance_wh: 10, meter_noise_pct: 0 }
    }
}

/// Optional CSV files replacing the generators.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub load_csv: Option<PathBuf>,
    pub pv_csv: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<ScenarioConfig, ScenarioError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a scenario file; relative CSV paths resolve against its directory.
    pub fn load(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        let mut cfg = ScenarioConfig::from_toml(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.input.load_csv, &mut cfg.input.pv_csv].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn battery_wh(&self) -> f64 {
        self.battery_kwh * 1000.0
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        if self.days == 0 {
            return bad("days must be at least 1");
        }
        if !(self.battery_kwh >= 0.0) {
            return bad("battery_kwh must be nonnegative");
        }
        if self.population.total() == 0 {
            return bad("population is empty");
        }
        let t = &self.tariff;
        for h in t.low_hours.iter().chain(&t.high_hours) {
            if *h > 24 {
                return bad("tariff hours must lie in 0..=24");
            }
        }
        if t.low_hours[0] > t.low_hours[1] || t.high_hours[0] > t.high_hours[1] {
            return bad("tariff windows must have start <= end");
        }
        if !(t.feed_in >= 0.0 && t.low_price > 0.0 && t.high_price > 0.0) {
            return bad("prices must be positive");
        }
        if !(t.max_rebate >= 0.0) {
            return bad("max_rebate must be nonnegative");
        }
        if !(0.0..=1.0).contains(&t.max_improvement) {
            return bad("max_improvement must lie in [0, 1]");
        }
        let b = &self.battery;
        if !(0.0..=1.0).contains(&b.initial_soc_fraction) {
            return bad("initial_soc_fraction must lie in [0, 1]");
        }
        if !(b.grid_limit_wh > 0.0) || !(b.battery_limit_wh >= 0.0) {
            return bad("grid limit must be positive and battery limit nonnegative");
        }
        if !(0.0..=1.0).contains(&b.depth_of_discharge) {
            return bad("depth_of_discharge must lie in [0, 1]");
        }
        let l = &self.load;
        for r in [l.base_wh, l.morning_wh, l.midday_wh, l.evening_wh, self.pv.peak_wh] {
            if r[0] < 0 || r[0] > r[1] {
                return bad("ranges must be nonnegative with min <= max");
            }
        }
        if !(0..100).contains(&l.slot_jitter_pct) || !(0..100).contains(&l.day_scale_pct) {
            return bad("load jitter percentages must lie in [0, 100)");
        }
        if l.day_shift_slots < 0 || l.day_shift_slots > 12 {
            return bad("day_shift_slots must lie in [0, 12]");
        }
        let [rise, set] = self.pv.daylight_slots;
        if rise >= set || set > crate::units::SLOTS_PER_DAY {
            return bad("daylight_slots must satisfy start < end <= 144");
        }
        if !(0..100).contains(&self.pv.cloud_pct) {
            return bad("cloud_pct must lie in [0, 100)");
        }
        let s = &self.settlement;
        if !(s.tolerance >= 0.0) || s.min_tolerance_wh < 0 || !(0..=100).contains(&s.meter_noise_pct) {
            return bad("settlement tolerances must be nonnegative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ScenarioConfig::from_toml("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn overrides_and_validation() {
        let cfg = ScenarioConfig::from_toml("battery_kwh = 9\n[tariff]\ngap_tier = \"high\"\n").unwrap();
        assert_eq!(cfg.battery_wh(), 9000.0);
        assert_eq!(cfg.tariff.gap_tier, GapTier::High);
        assert!(matches!(ScenarioConfig::from_toml("days = 0"), Err(ScenarioError::Invalid(_))));
        assert!(matches!(ScenarioConfig::from_toml("dayz = 3"), Err(ScenarioError::Parse(_))));
    }
}
