use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{DayResult, SimError, SimulationReport};
use crate::scenario::Tariff;
use crate::units::SLOTS_PER_DAY;

fn create(path: &Path) -> Result<BufWriter<File>, SimError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| SimError::Output { path: path.display().to_string(), source })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> SimError + '_ {
    move |source| SimError::Output { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> SimError + '_ {
    move |e| SimError::Output { path: path.display().to_string(), source: e.into() }
}

fn wh(v: f64) -> i64 {
    v.round() as i64
}

fn results(report: &SimulationReport) -> impl Iterator<Item = &DayResult> {
    report.days.iter().flat_map(|d| d.baseline.iter().chain(d.market.iter()))
}

/// Writes CSV time series, per-day reports, the summary and the ledger
/// export into `dir`, creating it if needed.
pub fn write_outputs(report: &SimulationReport, tariff: &Tariff, dir: &Path) -> Result<(), SimError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;

    let path = dir.join("transformer.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["variant", "day", "slot", "p_in_w", "p_out_w", "p_abs_w"]).map_err(csv_err(&path))?;
    for r in results(report) {
        for t in 0..r.metrics.p_in.len() {
            let m = &r.metrics;
            w.serialize((r.variant.name(), r.day + 1, t, wh(m.p_in[t]), wh(m.p_out[t]), wh(m.p_abs[t])))
                .map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join("houses.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record([
        "variant", "day", "slot", "house", "load_wh", "pv_wh", "battery_wh", "market_wh",
        "utility_wh", "feed_in_wh", "net_wh", "soc_wh",
    ])
    .map_err(csv_err(&path))?;
    for r in results(report) {
        for t in 0..SLOTS_PER_DAY {
            for f in &r.flows {
                w.serialize((
                    r.variant.name(),
                    r.day + 1,
                    t,
                    f.house,
                    f.load[t],
                    f.pv[t],
                    wh(f.battery[t]),
                    f.market[t],
                    wh(f.utility[t]),
                    wh(f.feed_in[t]),
                    wh(f.net(t)),
                    wh(f.soc[t]),
                ))
                .map_err(csv_err(&path))?;
            }
        }
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join("market.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record([
        "day", "slot", "utility_price", "feed_in_price", "buyer_price", "seller_price",
        "volume_wh", "traders", "excluded",
    ])
    .map_err(csv_err(&path))?;
    for d in &report.days {
        let Some(m) = &d.market else { continue };
        for c in &m.clearings {
            let t = c.slot as usize;
            w.serialize((
                d.day + 1,
                t,
                tariff.utility[t].0,
                tariff.feed_in.0,
                c.buyer_price.map(|p| p.0),
                c.seller_price.map(|p| p.0),
                c.volume(),
                c.trades.len(),
                c.excluded.len(),
            ))
            .map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join("bills.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record([
        "variant", "day", "house", "utility_cost_ueur", "feed_in_revenue_ueur",
        "market_cost_ueur", "market_revenue_ueur", "net_ueur", "ecoins",
    ])
    .map_err(csv_err(&path))?;
    for r in results(report) {
        for (house, b) in &r.bills {
            w.serialize((
                r.variant.name(),
                r.day + 1,
                house,
                b.utility_cost,
                b.feed_in_revenue,
                b.market_cost,
                b.market_revenue,
                b.net(),
                b.ecoins,
            ))
            .map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(io_err(&path))?;

    for d in &report.days {
        let path = dir.join(format!("day_{}.json", d.day + 1));
        let mut f = create(&path)?;
        serde_json::to_writer_pretty(&mut f, d).map_err(|e| io_err(&path)(e.into()))?;
        f.write_all(b"\n").map_err(io_err(&path))?;
    }

    let path = dir.join("summary.json");
    let mut f = create(&path)?;
    serde_json::to_writer_pretty(&mut f, report).map_err(|e| io_err(&path)(e.into()))?;
    f.write_all(b"\n").map_err(io_err(&path))?;

    let path = dir.join("ledger.jsonl");
    let mut f = create(&path)?;
    report.ledger.export(&mut f)?;
    f.flush().map_err(io_err(&path))?;
    Ok(())
}
