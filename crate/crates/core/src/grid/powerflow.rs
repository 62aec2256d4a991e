use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::network::{NetworkModel, NEUTRAL};
use super::GridError;
use crate::units::HouseId;

pub const MAX_ITERATIONS: usize = 100;

/// Relative power mismatch accepted at convergence, as a fraction of the
/// transformer rating.
const MISMATCH_TOL: f64 = 1e-8;

/// The sweep keeps going towards this residual while it still improves, so
/// that the energy balance closes well below the accepted mismatch.
const MISMATCH_TARGET: f64 = 1e-12;

/// Solved state of the network for one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasorSet {
    /// Conductor-to-ground voltages `[a, b, c, n]` per bus.
    pub voltages: Vec<[Complex64; 4]>,
    /// Currents `[a, b, c, n]` per section, flowing away from the source,
    /// in the order of `NetworkModel::sections`.
    pub currents: Vec<[Complex64; 4]>,
    /// Phase currents drawn from the transformer secondary.
    pub source_current: [Complex64; 3],
    pub iterations: usize,
    /// Largest bus power mismatch at exit, VA.
    pub mismatch: f64,
}

impl PhasorSet {
    /// Line-to-neutral voltages at `bus`.
    pub fn line_to_neutral(&self, bus: usize) -> [Complex64; 3] {
        let v = &self.voltages[bus];
        [v[0] - v[NEUTRAL], v[1] - v[NEUTRAL], v[2] - v[NEUTRAL]]
    }

    /// Active power per phase on the transformer secondary, W.
    pub fn secondary_power(&self) -> [f64; 3] {
        let v = &self.voltages[0];
        std::array::from_fn(|ph| (v[ph] * self.source_current[ph].conj()).re)
    }
}

/// Balanced source voltages with magnitude `v` and phase a at 0°.
pub(crate) fn source_voltages(v: f64) -> [Complex64; 4] {
    [
        Complex64::from_polar(v, 0.0),
        Complex64::from_polar(v, -2.0 * PI / 3.0),
        Complex64::from_polar(v, 2.0 * PI / 3.0),
        Complex64::new(0.0, 0.0),
    ]
}

/// Backward/forward sweep for one slot.
///
/// `demand` maps houses to their net active power in W, positive when
/// drawing from the grid. Loads are constant power, connected between
/// their phase and the neutral; the neutral is grounded at the source only.
pub fn run_power_flow(
    network: &NetworkModel,
    demand: &BTreeMap<HouseId, f64>,
) -> Result<PhasorSet, GridError> {
    let n = network.num_buses();
    let mut load = vec![[0.0f64; 3]; n];
    for (&id, &p) in demand {
        let (bus, phase) = network.attachment(id).ok_or(GridError::UnknownHouse(id))?;
        load[bus][phase.index()] += p;
    }
    let zero = Complex64::new(0.0, 0.0);
    let src = source_voltages(network.transformer.phase_voltage());
    let mut v = vec![src; n];
    let sections = network.sections();
    let mut currents = vec![[zero; 4]; sections.len()];
    let mut acc = vec![[zero; 4]; n];
    let mut injected = vec![[zero; 3]; n];
    let tol = MISMATCH_TOL * network.transformer.base_power();
    let target = MISMATCH_TARGET * network.transformer.base_power();
    let mut mismatch = f64::INFINITY;

    for iteration in 1..=MAX_ITERATIONS {
        for bus in 0..n {
            let mut a = [zero; 4];
            for ph in 0..3 {
                let p = load[bus][ph];
                let i = if p == 0.0 {
                    zero
                } else {
                    (Complex64::new(p, 0.0) / (v[bus][ph] - v[bus][NEUTRAL])).conj()
                };
                injected[bus][ph] = i;
                a[ph] = i;
                a[NEUTRAL] -= i;
            }
            acc[bus] = a;
        }
        for (k, s) in sections.iter().enumerate().rev() {
            currents[k] = acc[s.to];
            for c in 0..4 {
                acc[s.from][c] += currents[k][c];
            }
        }
        for (k, s) in sections.iter().enumerate() {
            for c in 0..4 {
                v[s.to][c] = v[s.from][c] - s.resistance[c] * currents[k][c];
            }
        }
        let previous = mismatch;
        mismatch = 0.0f64;
        for bus in 0..n {
            for ph in 0..3 {
                let s = (v[bus][ph] - v[bus][NEUTRAL]) * injected[bus][ph].conj();
                mismatch = mismatch.max((s - Complex64::new(load[bus][ph], 0.0)).norm());
            }
        }
        let settled = mismatch >= previous || iteration == MAX_ITERATIONS;
        if mismatch <= target || (mismatch <= tol && settled) {
            return Ok(PhasorSet {
                voltages: v,
                currents,
                source_current: [acc[0][0], acc[0][1], acc[0][2]],
                iterations: iteration,
                mismatch,
            });
        }
    }
    Err(GridError::NonConvergence { iterations: MAX_ITERATIONS, mismatch })
}
