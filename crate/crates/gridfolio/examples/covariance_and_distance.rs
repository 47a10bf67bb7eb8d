//! Hourly covariance structure of the universe, with the demand series
//! as the last row/column, plus pairwise correlations and great-circle
//! distances.
//!
//!     cargo run --example covariance_and_distance

use std::path::Path;

use gridfolio::{ingest, stats};

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

    let cov = stats::covariance_matrix(&plants, Some(&demand), true)?;
    println!("covariance (per-unit output, demand appended last):");
    print!("{:>8}", "");
    for l in &cov.labels {
        print!("{l:>10}");
    }
    println!();
    for (i, l) in cov.labels.iter().enumerate() {
        print!("{l:>8}");
        for j in 0..cov.dim() {
            print!("{:>10.5}", cov.matrix[(i, j)]);
        }
        println!();
    }

    println!("\npairwise correlation and distance:");
    for row in stats::correlation_table(&plants)? {
        println!(
            "  {:4} {:4} r {:>6.3}  {:7.1} km",
            row.id_a, row.id_b, row.pearson, row.km
        );
    }

    // An equal-capacity portfolio's balance variance straight from the
    // matrix: x = (1, 1, ..., 1, P_L) with the demand weight fixed at its
    // capacity.
    let mut x = vec![1.0; plants.len()];
    x.push(demand.capacity_mw);
    println!(
        "\nbalance variance of 1 MW each against demand: {:.4} MW^2",
        cov.portfolio_variance(&x)
    );
    Ok(())
}
