//! Shared units and time-grid constants.
//!
//! Energies that cross the market or the ledger are integer watt-hours,
//! prices are integer tenths of a euro-cent per kWh and money amounts are
//! integer micro-euros. With those choices `price * volume` is exact:
//! one tenth of a cent per kWh times one Wh is one micro-euro.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of 10-minute timeslots in a day.
pub const SLOTS_PER_DAY: usize = 144;
/// Number of timeslots per market hour.
pub const SLOTS_PER_HOUR: usize = 6;
/// Number of market hours in a day.
pub const HOURS_PER_DAY: usize = 24;
/// Length of one timeslot in hours.
pub const SLOT_HOURS: f64 = 1.0 / 6.0;

/// Household identifier.
pub type HouseId = u32;

/// Integer watt-hours.
pub type Wh = i64;

/// Integer micro-euros.
pub type MicroEuro = i64;

/// Price in tenths of a euro-cent per kWh (equivalently milli-euro per kWh).
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Price(pub i64);

impl Price {
    pub const ZERO: Price = Price(0);

    /// Converts from euro per kWh, rounding to the nearest tenth of a cent.
    pub fn from_eur_per_kwh(eur: f64) -> Price {
        Price((eur * 1000.0).round() as i64)
    }

    pub fn eur_per_kwh(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// Cost of `wh` watt-hours at this price.
    pub fn cost(self, wh: Wh) -> MicroEuro {
        self.0 * wh
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} EUR/kWh", self.eur_per_kwh())
    }
}

/// Phase conductor a household is attached to.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Phase {
        Phase::ALL[i % 3]
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::A => "a",
            Phase::B => "b",
            Phase::C => "c",
        };
        f.write_str(s)
    }
}

/// Converts micro-euros to euros.
pub fn micro_to_eur(amount: MicroEuro) -> f64 {
    amount as f64 / 1e6
}

/// Average power in W corresponding to `wh` delivered over one timeslot.
pub fn slot_energy_to_power(wh: f64) -> f64 {
    wh / SLOT_HOURS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn price_round_trip() {
        assert_eq!(Price::from_eur_per_kwh(0.15), Price(150));
        assert_eq!(Price::from_eur_per_kwh(0.1304), Price(130));
        assert!((Price(130).eur_per_kwh() - 0.13).abs() < 1e-12);
    }

    #[test]
    fn cost_is_micro_euro() {
        // 1 kWh at 0.15 EUR/kWh is 0.15 EUR
        assert_eq!(Price(150).cost(1000), 150_000);
        assert!((micro_to_eur(150_000) - 0.15).abs() < 1e-12);
    }
}
