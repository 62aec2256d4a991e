//! Experimental setting: tariffs, household population and synthetic curves.

mod config;
mod curves;
mod population;
mod tariff;

pub use config::{
    BatteryConfig, GapTier, InputConfig, LoadConfig, MixConfig, PvConfig, ScenarioConfig,
    SettlementConfig, TariffConfig,
};
pub use curves::{generate_loads, generate_pv, load_template, pv_shape, read_curves_csv, Curves};
pub use population::{Archetype, HouseSpec, Population};
pub use tariff::{
    draw_limit_prices, limit_prices, reservation_floor, LimitPrices, RenewableForecast, Tariff,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("bad curve file {path}: {reason}")]
    Csv { path: String, reason: String },
}

/// Purposes of the independent random streams derived from one seed.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub(crate) enum Stream {
    Population = 1,
    HouseLoad = 2,
    DayLoad = 3,
    Pv = 4,
    Prices = 5,
    Meter = 6,
}

/// Random stream for `(seed, purpose, day, house)`.
pub(crate) fn stream(seed: u64, purpose: Stream, day: u32, house: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | ((day as u64) << 32) | house as u64);
    rng
}

/// Meter-noise stream, exposed for the simulator.
pub fn meter_stream(seed: u64, day: u32) -> ChaCha8Rng {
    stream(seed, Stream::Meter, day, 0)
}

/// Limit-price stream of one house for one day.
pub fn price_stream(seed: u64, day: u32, house: u32) -> ChaCha8Rng {
    stream(seed, Stream::Prices, day, house)
}
