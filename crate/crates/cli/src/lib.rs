//! Command-line driver: parses flags, runs the simulation and writes results.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use log::error;
use lvmarket::grid::NetworkModel;
use lvmarket::scenario::ScenarioConfig;
use lvmarket::sim::{write_outputs, Simulation, Variant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantChoice {
    Baseline,
    Market,
    Both,
}

impl VariantChoice {
    fn variants(self) -> Vec<Variant> {
        match self {
            VariantChoice::Baseline => vec![Variant::Baseline],
            VariantChoice::Market => vec![Variant::Market],
            VariantChoice::Both => vec![Variant::Baseline, Variant::Market],
        }
    }
}

/// Neighbourhood energy market simulation on a low-voltage feeder.
#[derive(Debug, Parser)]
#[command(name = "lvmarket", version)]
pub struct Args {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Network description file (TOML); built-in two-feeder network when omitted.
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Number of days to simulate.
    #[arg(long)]
    pub days: Option<u32>,
    /// Battery capacity of every house with storage, kWh.
    #[arg(long)]
    pub battery: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantChoice::Both)]
    pub variant: VariantChoice,
}

fn setup(args: &Args) -> Result<Simulation, String> {
    let mut cfg = match &args.config {
        Some(p) => ScenarioConfig::load(p).map_err(|e| e.to_string())?,
        None => ScenarioConfig::default(),
    };
    if let Some(d) = args.days {
        cfg.days = d;
    }
    if let Some(b) = args.battery {
        cfg.battery_kwh = b;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    let network = match &args.network {
        Some(p) => NetworkModel::load(p),
        None => {
            let ids: Vec<u32> = (0..cfg.population.total() as u32).collect();
            NetworkModel::from_file(NetworkModel::default_feeders(&ids))
        }
    }
    .map_err(|e| e.to_string())?;
    Simulation::new(cfg, network).map_err(|e| e.to_string())
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let sim = match setup(&args) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            eprintln!("run with --help for usage");
            return EXIT_USAGE;
        }
    };
    let report = match sim.run(&args.variant.variants()) {
        Ok(r) => r,
        Err(e) => {
            error!("simulation failed: {e}");
            eprintln!("error: simulation failed: {e}");
            return EXIT_FAILURE;
        }
    };
    if let Err(e) = write_outputs(&report, &sim.tariff, &args.out) {
        eprintln!("error: {e}");
        return EXIT_FAILURE;
    }
    // a closed stdout (e.g. piped into `head`) is not a failure
    let mut out = std::io::stdout().lock();
    if let Some(t) = &report.total_enhancement {
        let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:+.2}%"));
        let _ = writeln!(
            out,
            "{} days, {} kWh batteries: E_out {}, E_in {}, Tr_loss {}, phase L_loss {}, neutral L_loss {}",
            report.days_simulated,
            report.battery_kwh,
            show(t.e_out),
            show(t.e_in),
            show(t.tr_loss),
            show(t.line_loss_phase),
            show(t.line_loss_neutral),
        );
    }
    let _ = writeln!(out, "results written to {}", args.out.display());
    EXIT_OK
}
