//! The lowest-variance portfolio under each model family: build one
//! scenario, solve only the low-risk endpoint, and print the mix.
//!
//!     cargo run --example min_variance_mix

use std::path::Path;

use gridfolio::models::{self, ModelData, ScenarioConfig, ScenarioKind};
use gridfolio::{ingest, solver};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/demo"));
    let raw = ingest::load_dataset(
        &dir.join("plants.csv"),
        &dir.join("series.csv"),
        &dir.join("demand.csv"),
    )?;
    let demand_series = ingest::detrend_demand(&raw.demand_mw, 3)?;
    let plants = ingest::prune_correlated(raw.plants, 0.99)?;
    let demand = ingest::build_demandgen(&demand_series, demand_series.peak_mw)?;
    let data = ModelData {
        plants: &plants,
        demand: Some(&demand),
        plan: None,
    };

    for kind in [ScenarioKind::TradObs, ScenarioKind::CostObs] {
        let scenario = ScenarioConfig::new(kind);
        let built = models::build(&scenario, &data)?;
        let sol = solver::min_variance(&built.program)?;
        let sd = built.balance_sd(&sol.x);
        println!("{}: balance SD {:.3} MW at the low-risk end", kind.name(), sd);
        for (id, cap) in built.plant_ids.iter().zip(&sol.x) {
            println!("  {id:4} {cap:>8.2} MW");
        }
        let installed: f64 = sol.x[..built.n_plants].iter().sum();
        println!("  total {installed:>8.2} MW installed\n");
    }
    Ok(())
}
