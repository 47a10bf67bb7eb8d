//! Drive the full run pipeline programmatically: every scenario in the
//! bundled config against the bundled dataset, then merge two runs with
//! different seeds into one comparison CSV.
//!
//!     cargo run --example scenario_run

use std::path::Path;

use gridfolio::cli::{self, Overrides};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/demo/config.toml"
    ));
    let out_a = std::env::temp_dir().join("gridfolio_run_a");
    let out_b = std::env::temp_dir().join("gridfolio_run_b");

    let manifest = cli::run(config, &out_a, &Overrides::default())?;
    println!("run A (seed {}):", manifest.seed);
    for s in &manifest.scenarios {
        println!(
            "  {:10} {:14} {:>4} files, {:>5} ms{}",
            s.name,
            s.kind,
            s.outputs.len(),
            s.sweep_wall_ms,
            if s.ok { "" } else { " FAILED" }
        );
    }

    cli::run(
        config,
        &out_b,
        &Overrides {
            seed: Some(99),
            points: Some(9),
            ..Overrides::default()
        },
    )?;

    let merged = std::env::temp_dir().join("gridfolio_compare.csv");
    cli::compare(&[out_a.clone(), out_b.clone()], &merged)?;
    let text = std::fs::read_to_string(&merged)?;
    println!(
        "\nmerged {} frontier rows from two runs into {}",
        text.lines().count() - 1,
        merged.display()
    );
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
