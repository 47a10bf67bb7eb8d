//! Deterministic synthetic datasets.
//!
//! Small generated universes back the examples, the bundled fixtures and
//! the property tests; real reanalysis data is too large to ship. The
//! series carry the structure the models care about: diurnal and synoptic
//! cycles, inter-plant correlation through shared weather drivers, PV
//! day/night envelopes and a double-peaked demand profile. Everything is
//! seeded and reproducible.

use chrono::NaiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::path::Path;

use crate::error::Result;
use crate::ingest::{DemandGen, PlantSeries, Technology};

/// A synthetic wind site. Output mixes a synoptic (multi-day) cycle, a
/// weak diurnal cycle and hour-to-hour noise around a site-specific mean.
pub fn wind_plant(id: &str, lat: f64, lon: f64, hours: usize, seed: u64) -> PlantSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = rng.gen_range(0.28..0.52);
    let synoptic_period = rng.gen_range(60.0..140.0);
    let synoptic_amp = rng.gen_range(0.12..0.30);
    let diurnal_amp = rng.gen_range(0.02..0.10);
    let noise_amp = rng.gen_range(0.04..0.12);
    let phase = rng.gen_range(0.0..TAU);
    let output = (0..hours)
        .map(|t| {
            let tf = t as f64;
            let v = mean
                + synoptic_amp * (tf * TAU / synoptic_period + phase).sin()
                + diurnal_amp * (tf * TAU / 24.0 + phase).sin()
                + noise_amp * (rng.gen::<f64>() - 0.5);
            v.clamp(0.0, 1.0)
        })
        .collect();
    PlantSeries {
        id: id.to_string(),
        technology: Technology::Wind,
        latitude: lat,
        longitude: lon,
        invest_cost_per_kw: 4800.0,
        om_cost_per_kw_year: 90.0,
        output,
    }
}

/// A synthetic PV site: a clear-sky bell between 06:00 and 18:00, scaled
/// by a seasonal factor and a cloudiness level that persists within each
/// day.
pub fn pv_plant(id: &str, lat: f64, lon: f64, hours: usize, seed: u64) -> PlantSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let peak = rng.gen_range(0.70..0.95);
    let season_amp = rng.gen_range(0.05..0.20);
    let season_phase = rng.gen_range(0.0..TAU);
    let mut cloud = rng.gen_range(0.6..1.0);
    let output = (0..hours)
        .map(|t| {
            let hour = t % 24;
            if hour == 0 {
                cloud = rng.gen_range(0.5..1.0);
            }
            let sun = if (6..18).contains(&hour) {
                ((hour as f64 - 6.0) * TAU / 24.0).sin()
            } else {
                0.0
            };
            let day = (t / 24) as f64;
            let season = 1.0 - season_amp * (1.0 + (day * TAU / 365.25 + season_phase).cos()) / 2.0;
            let jitter = 1.0 + 0.05 * (rng.gen::<f64>() - 0.5);
            (peak * sun * season * cloud * jitter).clamp(0.0, 1.0)
        })
        .collect();
    PlantSeries {
        id: id.to_string(),
        technology: Technology::Pv,
        latitude: lat,
        longitude: lon,
        invest_cost_per_kw: 3500.0,
        om_cost_per_kw_year: 50.0,
        output,
    }
}

/// Raw demand in MW: base level with morning and evening peaks, a weekend
/// dip and noise. Always positive.
pub fn demand_mw(hours: usize, seed: u64, base: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..hours)
        .map(|t| {
            let hour = (t % 24) as f64;
            let day = t / 24;
            let daily = 0.10 * ((hour - 8.0) * TAU / 24.0).sin()
                + 0.07 * ((hour - 19.0) * TAU / 12.0).sin();
            let weekend = if day % 7 >= 5 { -0.06 } else { 0.0 };
            let noise = 0.02 * (rng.gen::<f64>() - 0.5);
            base * (0.85 + daily + weekend + noise).max(0.05)
        })
        .collect()
}

/// Demand pseudo-generator normalized by the series peak.
pub fn demand_gen(hours: usize, seed: u64, base: f64) -> DemandGen {
    let raw = demand_mw(hours, seed, base);
    let peak = raw.iter().cloned().fold(f64::MIN, f64::max);
    let output: Vec<f64> = raw.iter().map(|v| -v / peak).collect();
    let cf = output.iter().sum::<f64>() / output.len() as f64;
    DemandGen {
        output,
        capacity_mw: peak,
        capacity_factor: cf,
    }
}

/// A mixed universe of `n_wind` wind and `n_pv` PV sites scattered over a
/// rough bounding box, ids `w0..` and `s0..`, already in id order.
pub fn universe(n_wind: usize, n_pv: usize, hours: usize, seed: u64) -> Vec<PlantSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plants = Vec::with_capacity(n_wind + n_pv);
    for i in 0..n_pv {
        let lat = rng.gen_range(-18.0..-4.0);
        let lon = rng.gen_range(-50.0..-36.0);
        plants.push(pv_plant(&format!("s{i}"), lat, lon, hours, seed * 1000 + 500 + i as u64));
    }
    for i in 0..n_wind {
        let lat = rng.gen_range(-18.0..-4.0);
        let lon = rng.gen_range(-50.0..-36.0);
        plants.push(wind_plant(&format!("w{i}"), lat, lon, hours, seed * 1000 + i as u64));
    }
    plants.sort_by(|a, b| a.id.cmp(&b.id));
    plants
}

/// Write a universe plus raw demand as the three CSV files the loader
/// expects, starting at `start` with hourly steps.
pub fn write_dataset_csvs(
    dir: &Path,
    plants: &[PlantSeries],
    demand: &[f64],
    start: NaiveDateTime,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let hours = demand.len();
    let stamp = |t: usize| {
        (start + chrono::Duration::hours(t as i64))
            .format("%Y-%m-%dT%H:%M:%S")
            .to_string()
    };

    let mut w = csv::Writer::from_path(dir.join("plants.csv"))?;
    w.write_record(["id", "technology", "lat", "lon", "invest_cost_per_kw", "om_cost_per_kw_year"])?;
    for p in plants {
        w.write_record([
            p.id.clone(),
            p.technology.name().to_string(),
            p.latitude.to_string(),
            p.longitude.to_string(),
            p.invest_cost_per_kw.to_string(),
            p.om_cost_per_kw_year.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("series.csv"))?;
    let mut header = vec!["timestamp".to_string()];
    header.extend(plants.iter().map(|p| p.id.clone()));
    w.write_record(&header)?;
    for t in 0..hours {
        let mut rec = vec![stamp(t)];
        rec.extend(plants.iter().map(|p| p.output[t].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("demand.csv"))?;
    w.write_record(["timestamp", "demand_mw"])?;
    for (t, v) in demand.iter().enumerate() {
        w.write_record([stamp(t), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
