use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GridError;
use crate::units::{HouseId, Phase};

/// Nominal secondary line-to-line voltage, V.
pub const NOMINAL_LINE_VOLTAGE: f64 = 410.0;

/// Conductor index of the neutral in per-conductor arrays `[a, b, c, n]`.
pub const NEUTRAL: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transformer {
    #[serde(default = "default_kva")]
    pub rated_kva: f64,
    #[serde(default = "default_line_voltage")]
    pub line_voltage: f64,
    /// Leakage loss coefficient `C_L`.
    #[serde(default = "default_leakage")]
    pub leakage_coefficient: f64,
    /// Copper loss coefficient `C_C`.
    #[serde(default = "default_copper")]
    pub copper_coefficient: f64,
}

fn default_kva() -> f64 {
    160.0
}
fn default_line_voltage() -> f64 {
    NOMINAL_LINE_VOLTAGE
}
fn default_leakage() -> f64 {
    0.002
}
fn default_copper() -> f64 {
    0.010
}

impl Default for Transformer {
    fn default() -> Self {
        Transformer {
            rated_kva: default_kva(),
            line_voltage: default_line_voltage(),
            leakage_coefficient: default_leakage(),
            copper_coefficient: default_copper(),
        }
    }
}

impl Transformer {
    /// Nominal line-to-neutral voltage `V_U`.
    pub fn phase_voltage(&self) -> f64 {
        self.line_voltage / 3f64.sqrt()
    }

    pub fn loss_coefficient(&self) -> f64 {
        self.leakage_coefficient + self.copper_coefficient
    }

    pub fn base_power(&self) -> f64 {
        self.rated_kva * 1000.0
    }
}

/// Per-kilometre resistances used for sections given by length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineDefaults {
    /// 240 mm² aluminium phase conductor.
    #[serde(default = "default_phase_r")]
    pub phase_ohm_per_km: f64,
    /// 95 mm² aluminium neutral.
    #[serde(default = "default_neutral_r")]
    pub neutral_ohm_per_km: f64,
}

fn default_phase_r() -> f64 {
    0.125
}
fn default_neutral_r() -> f64 {
    0.32
}

impl Default for LineDefaults {
    fn default() -> Self {
        LineDefaults { phase_ohm_per_km: default_phase_r(), neutral_ohm_per_km: default_neutral_r() }
    }
}

/// A line section between a parent bus and a child bus.
#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub from: usize,
    pub to: usize,
    /// Resistance of conductors a, b, c and neutral, Ω.
    pub resistance: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionEntry {
    pub from: usize,
    pub to: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resistance: Option<[f64; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HouseEntry {
    pub id: HouseId,
    pub bus: usize,
    pub phase: Phase,
}

/// On-disk network description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default)]
    pub transformer: Transformer,
    #[serde(default)]
    pub lines: LineDefaults,
    pub sections: Vec<SectionEntry>,
    pub houses: Vec<HouseEntry>,
}

/// Validated radial network. Bus 0 is the transformer secondary.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    pub transformer: Transformer,
    /// Sections ordered so every parent appears before its children.
    sections: Vec<Section>,
    houses: BTreeMap<HouseId, (usize, Phase)>,
    num_buses: usize,
}

impl NetworkModel {
    pub fn new(
        transformer: Transformer,
        sections: Vec<Section>,
        houses: BTreeMap<HouseId, (usize, Phase)>,
    ) -> Result<NetworkModel, GridError> {
        let topo = |m: String| Err(GridError::Topology(m));
        if !(transformer.line_voltage > 0.0) || !(transformer.rated_kva > 0.0) {
            return topo("transformer voltage and rating must be positive".into());
        }
        if transformer.leakage_coefficient < 0.0 || transformer.copper_coefficient < 0.0 {
            return topo("transformer loss coefficients must be nonnegative".into());
        }
        let num_buses = sections.iter().map(|s| s.from.max(s.to)).max().map_or(1, |m| m + 1);
        let mut incoming: Vec<Option<usize>> = vec![None; num_buses];
        for (k, s) in sections.iter().enumerate() {
            if s.to == 0 {
                return topo(format!("section {k} feeds the source bus"));
            }
            if s.from == s.to {
                return topo(format!("section {k} is a loop on bus {}", s.to));
            }
            if let Some(r) = s.resistance.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
                return topo(format!("section {k} has non-positive resistance {r}"));
            }
            if incoming[s.to].replace(k).is_some() {
                return topo(format!("bus {} has more than one parent", s.to));
            }
        }
        // breadth-first order from the source; anything unreached is disconnected or cyclic
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); num_buses];
        for (k, s) in sections.iter().enumerate() {
            children[s.from].push(k);
        }
        let mut order = Vec::with_capacity(sections.len());
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(bus) = queue.pop_front() {
            for &k in &children[bus] {
                order.push(sections[k].clone());
                queue.push_back(sections[k].to);
            }
        }
        if order.len() != sections.len() {
            return topo("network is not a single tree rooted at bus 0".into());
        }
        for bus in 1..num_buses {
            if incoming[bus].is_none() {
                return topo(format!("bus {bus} is not connected"));
            }
        }
        for (&id, &(bus, _)) in &houses {
            if bus >= num_buses {
                return topo(format!("house {id} attached to unknown bus {bus}"));
            }
        }
        Ok(NetworkModel { transformer, sections: order, houses, num_buses })
    }

    pub fn from_file(file: NetworkFile) -> Result<NetworkModel, GridError> {
        let per_m = |ohm_km: f64| ohm_km / 1000.0;
        let mut sections = Vec::with_capacity(file.sections.len());
        for (k, s) in file.sections.iter().enumerate() {
            let resistance = match (s.resistance, s.length_m) {
                (Some(r), None) => r,
                (None, Some(len)) => {
                    let rp = per_m(file.lines.phase_ohm_per_km) * len;
                    [rp, rp, rp, per_m(file.lines.neutral_ohm_per_km) * len]
                }
                _ => {
                    return Err(GridError::Topology(format!(
                        "section {k} needs exactly one of length_m or resistance"
                    )))
                }
            };
            sections.push(Section { from: s.from, to: s.to, resistance });
        }
        let mut houses = BTreeMap::new();
        for h in &file.houses {
            if houses.insert(h.id, (h.bus, h.phase)).is_some() {
                return Err(GridError::Topology(format!("house {} listed twice", h.id)));
            }
        }
        NetworkModel::new(file.transformer, sections, houses)
    }

    pub fn from_toml(text: &str) -> Result<NetworkModel, GridError> {
        NetworkModel::from_file(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<NetworkModel, GridError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| GridError::Io { path: path.display().to_string(), source })?;
        NetworkModel::from_toml(&text)
    }

    /// Two feeders leaving the transformer with one house per bus.
    ///
    /// Houses alternate between feeders; along each feeder they rotate
    /// through phases a, b, c. The first section of a feeder is 60 m, the
    /// following ones 35 m.
    pub fn default_feeders(house_ids: &[HouseId]) -> NetworkFile {
        let mut sections = Vec::new();
        let mut houses = Vec::new();
        let mut tail = [0usize; 2];
        let mut count = [0usize; 2];
        for (i, &id) in house_ids.iter().enumerate() {
            let f = i % 2;
            let bus = i + 1;
            let length = if count[f] == 0 { 60.0 } else { 35.0 };
            sections.push(SectionEntry {
                from: tail[f],
                to: bus,
                length_m: Some(length),
                resistance: None,
            });
            houses.push(HouseEntry { id, bus, phase: Phase::from_index(count[f]) });
            tail[f] = bus;
            count[f] += 1;
        }
        NetworkFile {
            transformer: Transformer::default(),
            lines: LineDefaults::default(),
            sections,
            houses,
        }
    }

    pub fn num_buses(&self) -> usize {
        self.num_buses
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn houses(&self) -> &BTreeMap<HouseId, (usize, Phase)> {
        &self.houses
    }

    pub fn attachment(&self, house: HouseId) -> Option<(usize, Phase)> {
        self.houses.get(&house).copied()
    }

    /// Buses with at least one house, ascending.
    pub fn house_buses(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.houses.values().map(|h| h.0).collect();
        b.sort_unstable();
        b.dedup();
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(from: usize, to: usize) -> Section {
        Section { from, to, resistance: [0.01, 0.01, 0.01, 0.02] }
    }

    #[test]
    fn sections_are_reordered_parent_first() {
        let net = NetworkModel::new(
            Transformer::default(),
            vec![line(1, 2), line(0, 1), line(1, 3)],
            BTreeMap::new(),
        )
        .unwrap();
        let tos: Vec<usize> = net.sections().iter().map(|s| s.to).collect();
        assert_eq!(tos, vec![1, 2, 3]);
    }

    #[test]
    fn rejects_two_parents_and_islands() {
        let two = NetworkModel::new(
            Transformer::default(),
            vec![line(0, 1), line(0, 2), line(1, 2)],
            BTreeMap::new(),
        );
        assert!(matches!(two, Err(GridError::Topology(_))));
        let island = NetworkModel::new(
            Transformer::default(),
            vec![line(0, 1), line(3, 2), line(2, 3)],
            BTreeMap::new(),
        );
        assert!(matches!(island, Err(GridError::Topology(_))));
    }

    #[test]
    fn rejects_zero_resistance() {
        let mut s = line(0, 1);
        s.resistance[NEUTRAL] = 0.0;
        assert!(NetworkModel::new(Transformer::default(), vec![s], BTreeMap::new()).is_err());
    }

    #[test]
    fn length_uses_per_km_defaults() {
        let text = r#"
            [[sections]]
            from = 0
            to = 1
            length_m = 100.0

            [[houses]]
            id = 4
            bus = 1
            phase = "b"
        "#;
        let net = NetworkModel::from_toml(text).unwrap();
        let r = net.sections()[0].resistance;
        assert!((r[0] - 0.0125).abs() < 1e-15);
        assert!((r[NEUTRAL] - 0.032).abs() < 1e-15);
        assert_eq!(net.attachment(4), Some((1, Phase::B)));
        assert!((net.transformer.phase_voltage() - 236.7136).abs() < 1e-4);
    }

    #[test]
    fn default_feeders_split_and_rotate() {
        let ids: Vec<HouseId> = (0..7).collect();
        let net = NetworkModel::from_file(NetworkModel::default_feeders(&ids)).unwrap();
        assert_eq!(net.num_buses(), 8);
        let roots = net.sections().iter().filter(|s| s.from == 0).count();
        assert_eq!(roots, 2);
        // feeder 0 holds houses 0, 2, 4, 6
        let phases: Vec<Phase> = [0, 2, 4, 6].iter().map(|&h| net.attachment(h).unwrap().1).collect();
        assert_eq!(phases, vec![Phase::A, Phase::B, Phase::C, Phase::A]);
    }
}
