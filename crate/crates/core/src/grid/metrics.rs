use num_complex::Complex64;
use serde::Serialize;

use super::network::{NetworkModel, NEUTRAL};
use super::powerflow::PhasorSet;
use super::GridError;
use crate::units::SLOT_HOURS;

/// Power through the transformer in one slot, W.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransformerFlow {
    /// From medium voltage into the feeder, measured on the primary.
    pub p_in: f64,
    /// From the feeder back to medium voltage, measured on the secondary.
    pub p_out: f64,
}

impl TransformerFlow {
    /// Splits the per-phase secondary power into inflow and outflow. The
    /// primary side of each phase carries the secondary power plus the
    /// linear transformer loss.
    pub fn from_phasors(pf: &PhasorSet, loss_coefficient: f64) -> TransformerFlow {
        let mut p_in = 0.0;
        let mut p_out = 0.0;
        for ps in pf.secondary_power() {
            let pp = ps + loss_coefficient * ps.abs();
            p_in += pp.max(0.0);
            p_out += (-ps).max(0.0);
        }
        TransformerFlow { p_in, p_out }
    }

    pub fn p_abs(&self) -> f64 {
        self.p_in + self.p_out
    }
}

/// Transformer losses over a series of slots, Wh.
pub fn transformer_losses(
    p_abs: &[f64],
    leakage: f64,
    copper: f64,
) -> Result<f64, GridError> {
    let mut total = 0.0;
    for (slot, &p) in p_abs.iter().enumerate() {
        if p < 0.0 || p.is_nan() {
            return Err(GridError::NegativePower { slot, value: p });
        }
        total += p * (leakage + copper) * SLOT_HOURS;
    }
    Ok(total)
}

/// Line losses, Wh.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LineLosses {
    /// Per phase conductor a, b, c.
    pub phase: [f64; 3],
    pub neutral: f64,
}

impl LineLosses {
    pub fn phase_total(&self) -> f64 {
        self.phase.iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.phase_total() + self.neutral
    }
}

pub fn line_losses(series: &[PhasorSet], network: &NetworkModel) -> LineLosses {
    let mut out = LineLosses::default();
    for pf in series {
        for (s, i) in network.sections().iter().zip(&pf.currents) {
            for c in 0..3 {
                out.phase[c] += s.resistance[c] * i[c].norm_sqr() * SLOT_HOURS;
            }
            out.neutral += s.resistance[NEUTRAL] * i[NEUTRAL].norm_sqr() * SLOT_HOURS;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeakMetrics {
    pub p_max: f64,
    /// Peak-to-average ratio; `None` when the series carries no power.
    pub par: Option<f64>,
}

pub fn peak_metrics(p_abs: &[f64]) -> PeakMetrics {
    let p_max = p_abs.iter().copied().fold(0.0, f64::max);
    let sum: f64 = p_abs.iter().sum();
    let par = (sum > 0.0).then(|| p_abs.len() as f64 * p_max / sum);
    PeakMetrics { p_max, par }
}

/// Zero, positive and negative sequence components.
pub fn symmetrical_components(
    va: Complex64,
    vb: Complex64,
    vc: Complex64,
) -> (Complex64, Complex64, Complex64) {
    let a = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let a2 = a * a;
    let v0 = (va + vb + vc) / 3.0;
    let v1 = (va + a * vb + a2 * vc) / 3.0;
    let v2 = (va + a2 * vb + a * vc) / 3.0;
    (v0, v1, v2)
}

/// Voltage deviation and unbalance over all house buses and slots, in %.
///
/// Deviations are magnitudes `|V_delta|` so that drops and rises count
/// alike.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct VoltageMetrics {
    pub delta_max: [f64; 3],
    pub delta_mean: [f64; 3],
    pub vuf_max: f64,
    pub vuf_mean: f64,
}

pub fn voltage_metrics(
    series: &[PhasorSet],
    network: &NetworkModel,
) -> Result<VoltageMetrics, GridError> {
    let vu = network.transformer.phase_voltage();
    let buses = network.house_buses();
    let mut m = VoltageMetrics::default();
    let mut count = 0usize;
    for (slot, pf) in series.iter().enumerate() {
        for &bus in &buses {
            let l2n = pf.line_to_neutral(bus);
            for ph in 0..3 {
                let d = (100.0 * (l2n[ph].norm() - vu) / vu).abs();
                m.delta_max[ph] = m.delta_max[ph].max(d);
                m.delta_mean[ph] += d;
            }
            let (_, v1, v2) = symmetrical_components(l2n[0], l2n[1], l2n[2]);
            if v1.norm() == 0.0 {
                return Err(GridError::UndefinedVuf { bus, slot });
            }
            let vuf = 100.0 * v2.norm() / v1.norm();
            m.vuf_max = m.vuf_max.max(vuf);
            m.vuf_mean += vuf;
            count += 1;
        }
    }
    if count > 0 {
        for d in &mut m.delta_mean {
            *d /= count as f64;
        }
        m.vuf_mean /= count as f64;
    }
    Ok(m)
}

/// Supply-quality metrics for one simulated day.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    #[serde(skip)]
    pub p_in: Vec<f64>,
    #[serde(skip)]
    pub p_out: Vec<f64>,
    #[serde(skip)]
    pub p_abs: Vec<f64>,
    /// Energy into the feeder, Wh.
    pub e_in: f64,
    /// Energy back to medium voltage, Wh.
    pub e_out: f64,
    pub tr_loss: f64,
    pub line_loss: LineLosses,
    pub peak: PeakMetrics,
    pub voltage: VoltageMetrics,
}

impl MetricsReport {
    pub fn from_slots(series: &[PhasorSet], network: &NetworkModel) -> Result<Self, GridError> {
        let t = &network.transformer;
        let flows: Vec<TransformerFlow> = series
            .iter()
            .map(|pf| TransformerFlow::from_phasors(pf, t.loss_coefficient()))
            .collect();
        let p_in: Vec<f64> = flows.iter().map(|f| f.p_in).collect();
        let p_out: Vec<f64> = flows.iter().map(|f| f.p_out).collect();
        let p_abs: Vec<f64> = flows.iter().map(|f| f.p_abs()).collect();
        Ok(MetricsReport {
            e_in: p_in.iter().sum::<f64>() * SLOT_HOURS,
            e_out: p_out.iter().sum::<f64>() * SLOT_HOURS,
            tr_loss: transformer_losses(&p_abs, t.leakage_coefficient, t.copper_coefficient)?,
            line_loss: line_losses(series, network),
            peak: peak_metrics(&p_abs),
            voltage: voltage_metrics(series, network)?,
            p_in,
            p_out,
            p_abs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transformer_loss_examples() {
        assert_eq!(transformer_losses(&[0.0; 144], 0.002, 0.01).unwrap(), 0.0);
        assert!((transformer_losses(&[6000.0], 0.002, 0.010).unwrap() - 12.0).abs() < 1e-9);
        let day = vec![10_000.0; 144];
        assert!((transformer_losses(&day, 0.002, 0.010).unwrap() - 2880.0).abs() < 1e-9);
        assert!(matches!(
            transformer_losses(&[1.0, -1.0], 0.002, 0.01),
            Err(GridError::NegativePower { slot: 1, .. })
        ));
    }

    #[test]
    fn peak_examples() {
        let p = peak_metrics(&[1.0, 2.0, 3.0]);
        assert_eq!(p.p_max, 3.0);
        assert!((p.par.unwrap() - 1.5).abs() < 1e-15);
        assert!((peak_metrics(&[4.0; 144]).par.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(peak_metrics(&[0.0; 5]).par, None);
        let doubled = peak_metrics(&[2.0, 4.0, 6.0]);
        assert!((doubled.par.unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn sequence_of_balanced_sets() {
        let p = |deg: f64| Complex64::from_polar(1.0, deg.to_radians());
        let (v0, v1, v2) = symmetrical_components(p(0.0), p(-120.0), p(120.0));
        assert!((v1 - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(v2.norm() < 1e-15 && v0.norm() < 1e-15);
        let (_, v1, v2) = symmetrical_components(p(0.0), p(120.0), p(-120.0));
        assert!((v2 - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(v1.norm() < 1e-15);
    }

    #[test]
    fn deviation_of_high_voltage() {
        let vu = 410.0 / 3f64.sqrt();
        let d = 100.0 * (248.57 - vu) / vu;
        assert!((d - 5.01).abs() < 0.005);
    }
}
