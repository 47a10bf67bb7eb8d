//! Load the bundled dataset, detrend demand, and prune near-duplicate
//! plants: the preprocessing every run starts with.
//!
//!     cargo run --example load_and_prune

use std::path::Path;

use gridfolio::ingest;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/demo"));
    let raw = ingest::load_dataset(
        &dir.join("plants.csv"),
        &dir.join("series.csv"),
        &dir.join("demand.csv"),
    )?;
    println!(
        "{} plants x {} hours, {} .. {}",
        raw.plants.len(),
        raw.timestamps.len(),
        raw.timestamps.first().unwrap(),
        raw.timestamps.last().unwrap()
    );

    let demand = ingest::detrend_demand(&raw.demand_mw, 3)?;
    let raw_peak = raw.demand_mw.iter().cloned().fold(f64::MIN, f64::max);
    println!(
        "demand: raw peak {:.1} MW, detrended peak {:.1} MW, mean {:.1} MW",
        raw_peak,
        demand.peak_mw,
        demand.mean_mw()
    );

    let n_before = raw.plants.len();
    let plants = ingest::prune_correlated(raw.plants, 0.99)?;
    println!(
        "prune at |r| >= 0.99: kept {} of {} plants",
        plants.len(),
        n_before
    );
    for p in &plants {
        let cf = p.output.iter().sum::<f64>() / p.output.len() as f64;
        println!(
            "  {:4} {:5} cf {:.3} invest {:>6.0}/kW om {:>4.0}/kW/yr",
            p.id,
            p.technology.name(),
            cf,
            p.invest_cost_per_kw,
            p.om_cost_per_kw_year
        );
    }
    Ok(())
}
