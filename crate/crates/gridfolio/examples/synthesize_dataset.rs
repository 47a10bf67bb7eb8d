//! Generate a synthetic plant universe and write it in the on-disk
//! dataset layout (`plants.csv`, `series.csv`, `demand.csv`).
//!
//!     cargo run --example synthesize_dataset -- <out_dir> [hours] [seed]

use std::env;
use std::path::PathBuf;

use chrono::NaiveDate;
use gridfolio::synth;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = env::args().skip(1);
    let out: PathBuf = args.next().unwrap_or_else(|| "demo_dataset".into()).into();
    let hours: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1440);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);

    let plants = synth::universe(3, 1, hours, seed);
    let demand = synth::demand_mw(hours, seed + 1, 60.0);
    let start = NaiveDate::from_ymd_opt(2018, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    synth::write_dataset_csvs(&out, &plants, &demand, start)?;

    println!("wrote {} hours for {} plants to {}", hours, plants.len(), out.display());
    for p in &plants {
        let cf = p.output.iter().sum::<f64>() / p.output.len() as f64;
        println!(
            "  {:4}  {:5}  cf {:.3}  ({:.1}, {:.1})",
            p.id,
            p.technology.name(),
            cf,
            p.latitude,
            p.longitude
        );
    }
    Ok(())
}
