//! Four-wire radial feeder, unbalanced power flow and supply-quality metrics.

mod metrics;
mod network;
mod powerflow;

pub use metrics::{
    line_losses, peak_metrics, symmetrical_components, transformer_losses, voltage_metrics,
    LineLosses, MetricsReport, PeakMetrics, TransformerFlow, VoltageMetrics,
};
pub use network::{
    LineDefaults, NetworkFile, NetworkModel, Section, Transformer, NEUTRAL, NOMINAL_LINE_VOLTAGE,
};
pub use powerflow::{run_power_flow, PhasorSet, MAX_ITERATIONS};

use thiserror::Error;

use crate::units::HouseId;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid network: {0}")]
    Topology(String),
    #[error("injection for house {0} which is not attached to the network")]
    UnknownHouse(HouseId),
    #[error("power flow did not converge after {iterations} iterations (worst mismatch {mismatch:.3e} VA)")]
    NonConvergence { iterations: usize, mismatch: f64 },
    #[error("negative absolute power {value} W at slot {slot}")]
    NegativePower { slot: usize, value: f64 },
    #[error("voltage unbalance undefined at bus {bus}, slot {slot}: zero positive sequence")]
    UndefinedVuf { bus: usize, slot: usize },
    #[error("cannot read network file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse network file: {0}")]
    Parse(#[from] toml::de::Error),
}
