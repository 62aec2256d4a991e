use serde::Serialize;

use crate::grid::MetricsReport;

/// `100 (baseline - market) / baseline`; positive when the market improves
/// the metric, `None` when the baseline is zero.
pub fn enhancement(baseline: f64, market: f64) -> Option<f64> {
    (baseline != 0.0).then(|| 100.0 * (baseline - market) / baseline)
}

/// Percentage enhancement of every supply-quality metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Enhancements {
    pub e_in: Option<f64>,
    pub e_out: Option<f64>,
    pub tr_loss: Option<f64>,
    pub line_loss_phase: Option<f64>,
    pub line_loss_neutral: Option<f64>,
    pub p_max: Option<f64>,
    pub par: Option<f64>,
    pub vuf_max: Option<f64>,
    pub vuf_mean: Option<f64>,
    pub v_delta_max: [Option<f64>; 3],
    pub v_delta_mean: [Option<f64>; 3],
}

pub fn compare_variants(baseline: &MetricsReport, market: &MetricsReport) -> Enhancements {
    let (b, m) = (baseline, market);
    let par = match (b.peak.par, m.peak.par) {
        (Some(x), Some(y)) => enhancement(x, y),
        _ => None,
    };
    let (bv, mv) = (&b.voltage, &m.voltage);
    Enhancements {
        e_in: enhancement(b.e_in, m.e_in),
        e_out: enhancement(b.e_out, m.e_out),
        tr_loss: enhancement(b.tr_loss, m.tr_loss),
        line_loss_phase: enhancement(b.line_loss.phase_total(), m.line_loss.phase_total()),
        line_loss_neutral: enhancement(b.line_loss.neutral, m.line_loss.neutral),
        p_max: enhancement(b.peak.p_max, m.peak.p_max),
        par,
        vuf_max: enhancement(bv.vuf_max, mv.vuf_max),
        vuf_mean: enhancement(bv.vuf_mean, mv.vuf_mean),
        v_delta_max: std::array::from_fn(|p| enhancement(bv.delta_max[p], mv.delta_max[p])),
        v_delta_mean: std::array::from_fn(|p| enhancement(bv.delta_mean[p], mv.delta_mean[p])),
    }
}
