use std::path::Path;

use rand::Rng;

use super::config::{LoadConfig, PvConfig};
use super::population::Population;
use super::tariff::RenewableForecast;
use super::{stream, ScenarioError, Stream};
use crate::units::{HouseId, SLOTS_PER_DAY};

// peak windows as [first slot, end slot)
const MORNING: [i64; 2] = [39, 54];
const MIDDAY: [i64; 2] = [72, 84];
const EVENING: [i64; 2] = [105, 135];

struct LoadLevels {
    base: i64,
    morning: i64,
    midday: i64,
    evening: i64,
}

fn draw(rng: &mut impl Rng, r: [i64; 2]) -> i64 {
    rng.random_range(r[0]..=r[1])
}

fn levels(cfg: &LoadConfig, seed: u64, house: HouseId) -> LoadLevels {
    let mut rng = stream(seed, Stream::HouseLoad, 0, house);
    LoadLevels {
        base: draw(&mut rng, cfg.base_wh),
        morning: draw(&mut rng, cfg.morning_wh),
        midday: draw(&mut rng, cfg.midday_wh),
        evening: draw(&mut rng, cfg.evening_wh),
    }
}

/// Window contribution with half-level ramp slots at both ends.
fn window(t: i64, w: [i64; 2], shift: i64, level: i64) -> i64 {
    let (a, b) = (w[0] + shift, w[1] + shift);
    if t < a - 1 || t > b {
        0
    } else if t == a - 1 || t == b {
        level / 2
    } else {
        level
    }
}

fn shaped(l: &LoadLevels, morning_shift: i64, evening_shift: i64) -> Vec<i64> {
    (0..SLOTS_PER_DAY as i64)
        .map(|t| {
            l.base
                + window(t, MORNING, morning_shift, l.morning)
                + window(t, MIDDAY, 0, l.midday)
                + window(t, EVENING, evening_shift, l.evening)
        })
        .collect()
}

/// A house's load curve before any day-to-day variation, Wh per slot.
pub fn load_template(cfg: &LoadConfig, seed: u64, house: HouseId) -> Vec<i64> {
    shaped(&levels(cfg, seed, house), 0, 0)
}

/// Winter load curves for `day`, one per house in population order.
pub fn generate_loads(
    cfg: &LoadConfig,
    population: &Population,
    seed: u64,
    day: u32,
) -> Vec<Vec<i64>> {
    population
        .houses
        .iter()
        .map(|h| {
            let l = levels(cfg, seed, h.id);
            let mut rng = stream(seed, Stream::DayLoad, day, h.id);
            let ds = cfg.day_shift_slots;
            let m = rng.random_range(-ds..=ds);
            let e = rng.random_range(-ds..=ds);
            let scale = 100 + rng.random_range(-cfg.day_scale_pct..=cfg.day_scale_pct);
            let j = cfg.slot_jitter_pct;
            shaped(&l, m, e)
                .into_iter()
                .map(|v| {
                    let noise = 100 + rng.random_range(-j..=j);
                    (v * scale * noise + 5000) / 10000
                })
                .collect()
        })
        .collect()
}

/// Clear-sky production shape `(4x(1-x))^2` over daylight, as an exact ratio.
fn shape_ratio(daylight: [usize; 2], t: usize) -> (i128, i128) {
    let [rise, set] = daylight;
    if t <= rise || t >= set {
        return (0, 1);
    }
    let n = (set - rise) as i128;
    let k = (t - rise) as i128;
    (16 * k * k * (n - k) * (n - k), n * n * n * n)
}

/// Clear-sky production at slot `t` relative to the peak.
pub fn pv_shape(daylight: [usize; 2], t: usize) -> f64 {
    let (num, den) = shape_ratio(daylight, t);
    num as f64 / den as f64
}

/// PV curves for `day` and the normalised fleet forecast.
pub fn generate_pv(
    cfg: &PvConfig,
    population: &Population,
    seed: u64,
    day: u32,
) -> (Vec<Vec<i64>>, RenewableForecast) {
    let cloud_day = if cfg.vary_by_day { day } else { 0 };
    let mut rng = stream(seed, Stream::Pv, cloud_day, 0);
    let clear: Vec<i64> =
        (0..SLOTS_PER_DAY).map(|_| 100 - rng.random_range(0..=cfg.cloud_pct)).collect();
    let curves: Vec<Vec<i64>> = population
        .houses
        .iter()
        .map(|h| {
            (0..SLOTS_PER_DAY)
                .map(|t| {
                    let (num, den) = shape_ratio(cfg.daylight_slots, t);
                    let scaled = h.pv_peak_wh as i128 * clear[t] as i128 * num;
                    let den = 100 * den;
                    ((scaled + den / 2) / den) as i64
                })
                .collect()
        })
        .collect();
    let forecast = RenewableForecast::from_generation(&curves, SLOTS_PER_DAY);
    (curves, forecast)
}

/// Curves imported from CSV: one row per slot, one column per house.
#[derive(Clone, Debug, PartialEq)]
pub struct Curves {
    pub ids: Vec<HouseId>,
    /// One full series per column, Wh.
    pub columns: Vec<Vec<i64>>,
}

impl Curves {
    pub fn days(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len() / SLOTS_PER_DAY)
    }

    /// Day `day` for the given houses, in that order.
    pub fn day(&self, day: usize, houses: &[HouseId]) -> Result<Vec<Vec<i64>>, ScenarioError> {
        if day >= self.days() {
            return Err(ScenarioError::Invalid(format!(
                "curve file holds {} days, day {} requested",
                self.days(),
                day + 1
            )));
        }
        houses
            .iter()
            .map(|id| {
                let k = self.ids.iter().position(|x| x == id).ok_or_else(|| {
                    ScenarioError::Invalid(format!("curve file has no column for house {id}"))
                })?;
                Ok(self.columns[k][day * SLOTS_PER_DAY..(day + 1) * SLOTS_PER_DAY].to_vec())
            })
            .collect()
    }
}

/// Reads a curve file. The header names house ids; an optional leading
/// `slot` column is ignored. Values are Wh, rounded to integers.
pub fn read_curves_csv(path: &Path) -> Result<Curves, ScenarioError> {
    let name = path.display().to_string();
    let err = |reason: String| ScenarioError::Csv { path: name.clone(), reason };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    let skip = usize::from(headers.get(0).is_some_and(|h| h.eq_ignore_ascii_case("slot")));
    let ids = headers
        .iter()
        .skip(skip)
        .map(|h| h.parse::<HouseId>().map_err(|_| err(format!("bad house id {h:?} in header"))))
        .collect::<Result<Vec<_>, _>>()?;
    if ids.is_empty() {
        return Err(err("no house columns".into()));
    }
    let mut columns = vec![Vec::new(); ids.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(e.to_string()))?;
        if record.len() != ids.len() + skip {
            return Err(err(format!("row {} has {} fields", row + 2, record.len())));
        }
        for (col, field) in record.iter().skip(skip).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| err(format!("row {} column {}: not a number", row + 2, col + 1)))?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(err(format!("row {} column {}: negative value", row + 2, col + 1)));
            }
            columns[col].push(v.round() as i64);
        }
    }
    let rows = columns[0].len();
    if rows == 0 || rows % SLOTS_PER_DAY != 0 {
        return Err(err(format!("{rows} rows is not a whole number of {SLOTS_PER_DAY}-slot days")));
    }
    Ok(Curves { ids, columns })
}
