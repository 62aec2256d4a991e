use rand::Rng;
use serde::Serialize;

use super::config::{GapTier, TariffConfig};
use super::ScenarioError;
use crate::units::{Price, HOURS_PER_DAY, SLOTS_PER_HOUR};

/// Utility prices for one day, feed-in tariff and maximum rebate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tariff {
    /// `p^u` per slot.
    pub utility: Vec<Price>,
    pub feed_in: Price,
    /// `r^m`.
    pub max_rebate: Price,
    /// Upper bound of the improvement draw, thousandths.
    pub max_improvement_permille: i64,
}

impl Tariff {
    pub fn new(
        utility: Vec<Price>,
        feed_in: Price,
        max_rebate: Price,
        max_improvement_permille: i64,
    ) -> Result<Tariff, ScenarioError> {
        let min = utility.iter().min().copied().unwrap_or(Price::ZERO);
        if utility.is_empty() || feed_in >= min {
            return Err(ScenarioError::Invalid(format!(
                "feed-in tariff {feed_in} must be below every utility price (min {min})"
            )));
        }
        if max_rebate < Price::ZERO || !(0..=1000).contains(&max_improvement_permille) {
            return Err(ScenarioError::Invalid("rebate and improvement must be nonnegative".into()));
        }
        Ok(Tariff { utility, feed_in, max_rebate, max_improvement_permille })
    }

    /// Two-tier time-of-use tariff from the scenario file.
    pub fn from_config(cfg: &TariffConfig) -> Result<Tariff, ScenarioError> {
        let low = Price::from_eur_per_kwh(cfg.low_price);
        let high = Price::from_eur_per_kwh(cfg.high_price);
        let gap = match cfg.gap_tier {
            GapTier::Low => low,
            GapTier::High => high,
        };
        let inside = |w: [usize; 2], h: usize| w[0] <= h && h < w[1];
        let mut utility = Vec::with_capacity(HOURS_PER_DAY * SLOTS_PER_HOUR);
        for h in 0..HOURS_PER_DAY {
            // the high window wins where both are configured
            let p = if inside(cfg.high_hours, h) {
                high
            } else if inside(cfg.low_hours, h) {
                low
            } else {
                gap
            };
            utility.extend(std::iter::repeat_n(p, SLOTS_PER_HOUR));
        }
        Tariff::new(
            utility,
            Price::from_eur_per_kwh(cfg.feed_in),
            Price::from_eur_per_kwh(cfg.max_rebate),
            (cfg.max_improvement * 1000.0).round() as i64,
        )
    }
}

/// Day-ahead average renewable production normalised to a peak of 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RenewableForecast {
    pub normalized: Vec<f64>,
}

impl RenewableForecast {
    /// Fleet average of `generation` (one curve per house) divided by its maximum.
    pub fn from_generation(generation: &[Vec<i64>], slots: usize) -> RenewableForecast {
        let mut total = vec![0i64; slots];
        for curve in generation {
            for (t, g) in curve.iter().enumerate().take(slots) {
                total[t] += g;
            }
        }
        RenewableForecast::from_raw(&total)
    }

    pub fn from_raw(raw: &[i64]) -> RenewableForecast {
        let max = raw.iter().copied().max().unwrap_or(0);
        let normalized = if max > 0 {
            raw.iter().map(|&g| g.max(0) as f64 / max as f64).collect()
        } else {
            vec![0.0; raw.len()]
        };
        RenewableForecast { normalized }
    }
}

/// Minimum reservation price `p^u_t - g^n_t r^m`, never below zero.
pub fn reservation_floor(tariff: &Tariff, forecast: &RenewableForecast, t: usize) -> Price {
    let g = forecast.normalized[t].clamp(0.0, 1.0);
    let p = tariff.utility[t].0 as f64 - g * tariff.max_rebate.0 as f64;
    Price((p.round() as i64).max(0))
}

/// Bid and ask limits of one house for one day.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitPrices {
    /// Improvement `u` in thousandths.
    pub improvement_permille: i64,
    pub bid: Vec<Price>,
    pub ask: Vec<Price>,
}

fn scale_permille(p: Price, permille: i64) -> Price {
    Price((p.0 * permille + 500).div_euclid(1000))
}

/// Limits for improvement `u = permille / 1000`: buyers discount the utility
/// price but never below the reservation floor, sellers mark up the FIT.
pub fn limit_prices(tariff: &Tariff, forecast: &RenewableForecast, permille: i64) -> LimitPrices {
    let ask = scale_permille(tariff.feed_in, 1000 + permille);
    let slots = tariff.utility.len();
    LimitPrices {
        improvement_permille: permille,
        bid: (0..slots)
            .map(|t| {
                scale_permille(tariff.utility[t], 1000 - permille)
                    .max(reservation_floor(tariff, forecast, t))
            })
            .collect(),
        ask: vec![ask; slots],
    }
}

/// Draws the improvement uniformly on the configured grid of thousandths.
pub fn draw_limit_prices<R: Rng>(
    tariff: &Tariff,
    forecast: &RenewableForecast,
    rng: &mut R,
) -> LimitPrices {
    let permille = rng.random_range(0..=tariff.max_improvement_permille);
    limit_prices(tariff, forecast, permille)
}
