//! Closed-form references for the feeder model.

use std::collections::BTreeMap;

use lvmarket::grid::{NetworkModel, PhasorSet, Section, Transformer};
use lvmarket::units::{HouseId, Phase};
use num_complex::Complex64;

/// Load voltage of a single constant-power load behind a loop resistance:
/// `V^2 - Vs*V + R*P = 0`, high-voltage root.
pub fn two_bus_voltage(source: f64, loop_r: f64, p: f64) -> f64 {
    (source + (source * source - 4.0 * loop_r * p).sqrt()) / 2.0
}

/// One section from the source to a bus with one house on phase a.
pub fn two_bus_network(source: f64, r_phase: f64, r_neutral: f64) -> NetworkModel {
    let transformer = Transformer { line_voltage: source * 3f64.sqrt(), ..Transformer::default() };
    let sections = vec![Section {
        from: 0,
        to: 1,
        resistance: [r_phase, r_phase, r_phase, r_neutral],
    }];
    NetworkModel::new(transformer, sections, BTreeMap::from([(1, (1, Phase::A))])).unwrap()
}

/// Chain of `buses` buses with three houses per bus, one per phase. House
/// ids are `3 * (bus - 1) + phase`.
pub fn three_phase_chain(buses: usize, r: [f64; 4]) -> NetworkModel {
    let sections = (1..=buses).map(|b| Section { from: b - 1, to: b, resistance: r }).collect();
    let mut houses = BTreeMap::new();
    for b in 1..=buses {
        for ph in Phase::ALL {
            houses.insert((3 * (b - 1) + ph.index()) as HouseId, (b, ph));
        }
    }
    NetworkModel::new(Transformer::default(), sections, houses).unwrap()
}

/// Fortescue analysis matrix applied by explicit multiplication.
pub fn fortescue_by_matrix(v: [Complex64; 3]) -> [Complex64; 3] {
    let a = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
    let a2 = Complex64::new(-0.5, -(3f64.sqrt()) / 2.0);
    let one = Complex64::new(1.0, 0.0);
    let m = [[one, one, one], [one, a, a2], [one, a2, a]];
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for (row, o) in m.iter().zip(out.iter_mut()) {
        for (c, x) in row.iter().zip(v.iter()) {
            *o += c * x;
        }
        *o /= 3.0;
    }
    out
}

/// Sum of `R |I|^2` over all sections and conductors, W.
pub fn resistive_power(pf: &PhasorSet, network: &NetworkModel) -> f64 {
    network
        .sections()
        .iter()
        .zip(&pf.currents)
        .map(|(s, i)| (0..4).map(|c| s.resistance[c] * i[c].norm_sqr()).sum::<f64>())
        .sum()
}
