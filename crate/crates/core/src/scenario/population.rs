use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{MixConfig, PvConfig};
use super::{stream, ScenarioError, Stream};
use crate::units::{HouseId, Phase};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    NoDer,
    BatteryOnly,
    PvBattery,
}

impl Archetype {
    pub fn has_pv(self) -> bool {
        self == Archetype::PvBattery
    }

    pub fn has_battery(self) -> bool {
        self != Archetype::NoDer
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HouseSpec {
    pub id: HouseId,
    pub archetype: Archetype,
    pub phase: Phase,
    /// Peak PV production per slot, Wh; zero without PV.
    pub pv_peak_wh: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Population {
    pub houses: Vec<HouseSpec>,
    /// Capacity of every battery, Wh.
    pub battery_wh: f64,
}

impl Population {
    /// Houses `0..n` with archetypes placed by a seeded shuffle. Phases
    /// follow the default feeder layout until [`Population::assign_phases`]
    /// is called.
    pub fn generate(mix: &MixConfig, pv: &PvConfig, battery_wh: f64, seed: u64) -> Population {
        let mut kinds = Vec::with_capacity(mix.total());
        kinds.extend(std::iter::repeat_n(Archetype::NoDer, mix.no_der));
        kinds.extend(std::iter::repeat_n(Archetype::BatteryOnly, mix.battery_only));
        kinds.extend(std::iter::repeat_n(Archetype::PvBattery, mix.pv_battery));
        let mut rng = stream(seed, Stream::Population, 0, 0);
        kinds.shuffle(&mut rng);
        let houses = kinds
            .into_iter()
            .enumerate()
            .map(|(i, archetype)| {
                let pv_peak_wh = if archetype.has_pv() {
                    rng.random_range(pv.peak_wh[0]..=pv.peak_wh[1])
                } else {
                    0
                };
                HouseSpec { id: i as HouseId, archetype, phase: Phase::from_index(i / 2), pv_peak_wh }
            })
            .collect();
        Population { houses, battery_wh }
    }

    pub fn ids(&self) -> Vec<HouseId> {
        self.houses.iter().map(|h| h.id).collect()
    }

    pub fn count(&self, archetype: Archetype) -> usize {
        self.houses.iter().filter(|h| h.archetype == archetype).count()
    }

    /// Takes phases from an external attachment map; every house must be present.
    pub fn assign_phases(
        &mut self,
        phase_of: impl Fn(HouseId) -> Option<Phase>,
    ) -> Result<(), ScenarioError> {
        for h in &mut self.houses {
            h.phase = phase_of(h.id).ok_or_else(|| {
                ScenarioError::Invalid(format!("house {} is not attached to the network", h.id))
            })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_mix_counts() {
        let p = Population::generate(&MixConfig::default(), &PvConfig::default(), 6000.0, 7);
        assert_eq!(p.houses.len(), 33);
        assert_eq!(p.count(Archetype::NoDer), 8);
        assert_eq!(p.count(Archetype::BatteryOnly), 8);
        assert_eq!(p.count(Archetype::PvBattery), 17);
        assert!(p.houses.iter().all(|h| (h.pv_peak_wh > 0) == h.archetype.has_pv()));
    }

    #[test]
    fn shuffle_depends_on_seed_only() {
        let a = Population::generate(&MixConfig::default(), &PvConfig::default(), 6000.0, 7);
        let b = Population::generate(&MixConfig::default(), &PvConfig::default(), 6000.0, 7);
        let c = Population::generate(&MixConfig::default(), &PvConfig::default(), 6000.0, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
