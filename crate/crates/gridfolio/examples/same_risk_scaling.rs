//! Put every frontier mix on the same risk footing: scale each one up
//! until the mean of its worst 5% balance hours reaches zero, then
//! compare what serving demand actually costs.
//!
//!     cargo run --example same_risk_scaling

use std::path::Path;

use gridfolio::models::{self, ModelData, ScenarioConfig, ScenarioKind};
use gridfolio::{analysis, ingest};

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

    let mut scenario = ScenarioConfig::new(ScenarioKind::CostObs);
    scenario.n_frontier_points = 9;
    let frontier = models::frontier_sweep(
        &scenario,
        &ModelData {
            plants: &plants,
            demand: Some(&demand),
            plan: None,
        },
    )?;

    println!(
        "mean demand {:.1} MW; each mix rescaled until CVaR at {:.0}% hits {}",
        demand.mean_demand_mw(),
        scenario.beta * 100.0,
        scenario.omega
    );
    println!(
        "{:>3} {:>10} {:>8} {:>12} {:>14} {:>12}",
        "pt", "cost/MWh", "scale", "MW after", "cost/dem MWh", "excess %"
    );
    for p in frontier.optimal_points() {
        let r = analysis::normalize_to_risk(&p.capacities, &plants, &demand, &scenario)?;
        println!(
            "{:>3} {:>10.2} {:>8.3} {:>12.1} {:>14.2} {:>12.1}",
            p.index,
            p.cost_per_mwh,
            r.scale_factor,
            r.installed_after,
            r.cost_per_demand_mwh,
            r.mean_excess_fraction * 100.0
        );
    }
    println!(
        "\nper-MWh generation cost favors concentrated high-CF mixes, but once\n\
         every mix must carry the same tail risk, the overbuild factor works\n\
         against volatile portfolios and the ranking tightens."
    );
    Ok(())
}
