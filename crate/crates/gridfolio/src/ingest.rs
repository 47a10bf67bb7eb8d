//! Data ingestion: CSV loading, validation, demand detrending,
//! correlation pruning, and the demand pseudo-generator.
//!
//! Input layout:
//!
//! * a plant metadata CSV with header
//!   `id,technology,lat,lon,invest_cost_per_kw,om_cost_per_kw_year`,
//! * a companion wide CSV `timestamp,<id1>,<id2>,...` of per-unit plant
//!   outputs in `[0, 1]`,
//! * a demand CSV `timestamp,demand_mw` in raw megawatts.
//!
//! Timestamps are naive ISO-8601 (`2019-01-01T00:00:00`), strictly hourly
//! and gap-free; both series files must cover the same range. Plants are
//! sorted by id on load so every downstream ordering (solver variables,
//! tie-breaks, output rows) is independent of file order.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Generating technology, which selects financing parameters and cost
/// multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technology {
    Wind,
    Pv,
}

impl Technology {
    pub fn name(self) -> &'static str {
        match self {
            Technology::Wind => "wind",
            Technology::Pv => "pv",
        }
    }
}

impl std::str::FromStr for Technology {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wind" => Ok(Technology::Wind),
            "pv" | "solar" => Ok(Technology::Pv),
            other => Err(Error::Validation(format!("unknown technology '{other}'"))),
        }
    }
}

/// One candidate plant: metadata plus its hourly per-unit output.
#[derive(Debug, Clone)]
pub struct PlantSeries {
    pub id: String,
    pub technology: Technology,
    pub latitude: f64,
    pub longitude: f64,
    /// Overnight investment cost, currency per kW.
    pub invest_cost_per_kw: f64,
    /// Fixed O&M cost, currency per kW per year.
    pub om_cost_per_kw_year: f64,
    /// Per-unit output in `[0, 1]`, one value per hour.
    pub output: Vec<f64>,
}

/// Detrended demand profile.
///
/// `values` are per-unit in `(0, 1]` with maximum exactly 1; `peak_mw`
/// anchors them back to megawatts.
#[derive(Debug, Clone)]
pub struct DemandSeries {
    pub values: Vec<f64>,
    pub peak_mw: f64,
}

impl DemandSeries {
    /// Demand in megawatts at each step (detrended values re-anchored).
    pub fn mw(&self) -> Vec<f64> {
        self.values.iter().map(|v| v * self.peak_mw).collect()
    }

    /// Mean demand in megawatts.
    pub fn mean_mw(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64 * self.peak_mw
    }
}

/// Demand recast as a generator with negated output.
///
/// `output` is `-values`, so it lives in `[-1, 0)`; `capacity_mw` is the
/// peak load and `capacity_factor` the (negative) mean output. Adding
/// this pseudo-generator to a covariance matrix is what couples portfolio
/// risk to the load profile.
#[derive(Debug, Clone)]
pub struct DemandGen {
    pub output: Vec<f64>,
    pub capacity_mw: f64,
    pub capacity_factor: f64,
}

impl DemandGen {
    /// Demand in megawatts at each step (positive).
    pub fn demand_mw(&self) -> Vec<f64> {
        self.output.iter().map(|v| -v * self.capacity_mw).collect()
    }

    /// Mean demand in megawatts (positive).
    pub fn mean_demand_mw(&self) -> f64 {
        -self.capacity_factor * self.capacity_mw
    }

    /// Same mean level with the profile flattened to a constant.
    ///
    /// Covariances against a flat profile vanish, so models built on the
    /// flattened pseudo-generator reduce to their no-demand form while
    /// keeping the demand level for capacity and balance terms.
    pub fn flattened(&self) -> DemandGen {
        DemandGen {
            output: vec![self.capacity_factor; self.output.len()],
            capacity_mw: self.capacity_mw,
            capacity_factor: self.capacity_factor,
        }
    }
}

/// Calendar coordinates of one hourly step, used for stratified sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalendarEntry {
    pub year: i32,
    pub month: u32,
    pub hour: u32,
}

/// Per-step calendar of an aligned dataset.
#[derive(Debug, Clone)]
pub struct Calendar {
    pub entries: Vec<CalendarEntry>,
}

impl Calendar {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_timestamps(ts: &[NaiveDateTime]) -> Calendar {
        Calendar {
            entries: ts
                .iter()
                .map(|t| CalendarEntry {
                    year: t.year(),
                    month: t.month(),
                    hour: t.time().hour(),
                })
                .collect(),
        }
    }
}

/// Aligned raw dataset as loaded from disk, before detrending or pruning.
#[derive(Debug, Clone)]
pub struct RawDataset {
    /// Plants sorted by id.
    pub plants: Vec<PlantSeries>,
    /// Raw demand in megawatts, aligned with the plant series.
    pub demand_mw: Vec<f64>,
    pub timestamps: Vec<NaiveDateTime>,
    pub calendar: Calendar,
}

fn parse_timestamp(s: &str, file: &str, line: usize) -> Result<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%dT%H:%M:%S").map_err(|_| {
        Error::Validation(format!("{file}: bad timestamp '{s}' on data row {line}"))
    })
}

fn check_hourly(ts: &[NaiveDateTime], file: &str) -> Result<()> {
    for w in ts.windows(2) {
        let expected = w[0] + Duration::hours(1);
        match w[1].cmp(&expected) {
            Ordering::Equal => {}
            Ordering::Greater => {
                return Err(Error::Gap(format!("{file}: missing hour {expected}")))
            }
            Ordering::Less => {
                return Err(Error::Validation(format!(
                    "{file}: timestamps not strictly increasing at {}",
                    w[1]
                )))
            }
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct PlantMetaRow {
    id: String,
    technology: String,
    lat: f64,
    lon: f64,
    invest_cost_per_kw: f64,
    om_cost_per_kw_year: f64,
}

/// Load and align the three input files.
///
/// Validates metadata ranges, per-unit outputs, hourly gap-free
/// timestamps and the exact match between metadata ids and series
/// columns. Returns plants sorted by id together with raw demand and the
/// shared calendar.
pub fn load_dataset(
    plants_path: &Path,
    series_path: &Path,
    demand_path: &Path,
) -> Result<RawDataset> {
    let plants_file = plants_path.display().to_string();
    let series_file = series_path.display().to_string();
    let demand_file = demand_path.display().to_string();

    // Plant metadata.
    let mut meta: Vec<PlantMetaRow> = Vec::new();
    let mut rdr = csv::Reader::from_path(plants_path)?;
    for row in rdr.deserialize() {
        let row: PlantMetaRow = row?;
        meta.push(row);
    }
    if meta.is_empty() {
        return Err(Error::Dataset(format!("{plants_file}: no plants")));
    }
    let mut plants: Vec<PlantSeries> = Vec::with_capacity(meta.len());
    for row in meta {
        if !(-90.0..=90.0).contains(&row.lat) || !(-180.0..=180.0).contains(&row.lon) {
            return Err(Error::Validation(format!(
                "{plants_file}: plant {} has coordinates ({}, {}) out of range",
                row.id, row.lat, row.lon
            )));
        }
        if !row.invest_cost_per_kw.is_finite()
            || !row.om_cost_per_kw_year.is_finite()
            || row.invest_cost_per_kw < 0.0
            || row.om_cost_per_kw_year < 0.0
        {
            return Err(Error::Validation(format!(
                "{plants_file}: plant {} has negative or non-finite costs",
                row.id
            )));
        }
        plants.push(PlantSeries {
            technology: row.technology.parse()?,
            id: row.id,
            latitude: row.lat,
            longitude: row.lon,
            invest_cost_per_kw: row.invest_cost_per_kw,
            om_cost_per_kw_year: row.om_cost_per_kw_year,
            output: Vec::new(),
        });
    }
    plants.sort_by(|a, b| a.id.cmp(&b.id));
    for w in plants.windows(2) {
        if w[0].id == w[1].id {
            return Err(Error::Dataset(format!(
                "{plants_file}: duplicate plant id '{}'",
                w[0].id
            )));
        }
    }

    // Wide output series.
    let mut rdr = csv::Reader::from_path(series_path)?;
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.get(0) != Some("timestamp") {
        return Err(Error::Dataset(format!(
            "{series_file}: first column must be 'timestamp'"
        )));
    }
    let col_ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut sorted_cols = col_ids.clone();
    sorted_cols.sort();
    let plant_ids: Vec<String> = plants.iter().map(|p| p.id.clone()).collect();
    if sorted_cols != plant_ids {
        return Err(Error::Dataset(format!(
            "{series_file}: columns {sorted_cols:?} do not match plant ids {plant_ids:?}"
        )));
    }
    // Column position of each plant, in sorted-plant order.
    let col_of: Vec<usize> = plant_ids
        .iter()
        .map(|id| col_ids.iter().position(|c| c == id).unwrap() + 1)
        .collect();

    let mut timestamps: Vec<NaiveDateTime> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::Dataset(format!(
                "{series_file}: row {} has {} fields, expected {}",
                line + 1,
                rec.len(),
                headers.len()
            )));
        }
        timestamps.push(parse_timestamp(&rec[0], &series_file, line + 1)?);
        for (p, &c) in plants.iter_mut().zip(&col_of) {
            let v: f64 = rec[c].trim().parse().map_err(|_| {
                Error::Validation(format!(
                    "{series_file}: bad value '{}' for {} on data row {}",
                    &rec[c],
                    p.id,
                    line + 1
                ))
            })?;
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "{series_file}: output {v} for {} on data row {} outside [0, 1]",
                    p.id,
                    line + 1
                )));
            }
            p.output.push(v);
        }
    }
    if timestamps.is_empty() {
        return Err(Error::Dataset(format!("{series_file}: no data rows")));
    }
    check_hourly(&timestamps, &series_file)?;

    // Demand.
    let mut rdr = csv::Reader::from_path(demand_path)?;
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("timestamp") || headers.get(1) != Some("demand_mw") {
        return Err(Error::Dataset(format!(
            "{demand_file}: header must be 'timestamp,demand_mw'"
        )));
    }
    let mut demand_ts: Vec<NaiveDateTime> = Vec::new();
    let mut demand_mw: Vec<f64> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        demand_ts.push(parse_timestamp(&rec[0], &demand_file, line + 1)?);
        let v: f64 = rec[1].trim().parse().map_err(|_| {
            Error::Validation(format!(
                "{demand_file}: bad demand '{}' on data row {}",
                &rec[1],
                line + 1
            ))
        })?;
        if !v.is_finite() {
            return Err(Error::Validation(format!(
                "{demand_file}: non-finite demand on data row {}",
                line + 1
            )));
        }
        demand_mw.push(v);
    }
    check_hourly(&demand_ts, &demand_file)?;
    if demand_ts != timestamps {
        return Err(Error::Dataset(format!(
            "{demand_file}: timestamps do not align with {series_file}"
        )));
    }

    let calendar = Calendar::from_timestamps(&timestamps);
    Ok(RawDataset {
        plants,
        demand_mw,
        timestamps,
        calendar,
    })
}

/// Remove long-term growth from raw demand by dividing each value by the
/// rolling maximum over `window_days` days on each side.
///
/// The window around step `t` spans `[t - 24 w, t + 24 w]` inclusive,
/// clipped at the series edges. The result is per-unit in `(0, 1]` with
/// maximum exactly 1 (every global-maximum position maps to 1), and is
/// invariant under scaling the raw series by any positive constant.
pub fn detrend_demand(raw_mw: &[f64], window_days: usize) -> Result<DemandSeries> {
    if raw_mw.is_empty() {
        return Err(Error::Validation("detrend of empty demand".into()));
    }
    for (t, &v) in raw_mw.iter().enumerate() {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Validation(format!(
                "non-positive demand {v} at step {t}"
            )));
        }
    }
    let w = window_days * 24;
    let n = raw_mw.len();
    // Sliding-window maximum with a monotonic deque over the window
    // [t - w, t + w]; indices leave the front once they fall behind.
    let mut values = vec![0.0; n];
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut next = 0usize; // first index not yet pushed
    for t in 0..n {
        let hi = (t + w).min(n - 1);
        while next <= hi {
            while let Some(&back) = deque.back() {
                if raw_mw[back] <= raw_mw[next] {
                    deque.pop_back();
                } else {
                    break;
                }
            }
            deque.push_back(next);
            next += 1;
        }
        let lo = t.saturating_sub(w);
        while let Some(&front) = deque.front() {
            if front < lo {
                deque.pop_front();
            } else {
                break;
            }
        }
        values[t] = raw_mw[t] / raw_mw[*deque.front().unwrap()];
    }
    let peak_mw = raw_mw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(DemandSeries { values, peak_mw })
}

/// Drop redundant plants until no surviving pair has Pearson correlation
/// above `threshold`.
///
/// Pairs are processed in descending correlation order (ties broken by id
/// pair); within a pair the plant with the lower mean output is dropped,
/// with equal means resolved by keeping the lexicographically smaller id.
/// Removing a plant never changes the correlations of the survivors, so
/// one correlation pass suffices. Constant series have no defined
/// correlation and are never pruned on that account.
pub fn prune_correlated(
    mut plants: Vec<PlantSeries>,
    threshold: f64,
) -> Result<Vec<PlantSeries>> {
    if plants.is_empty() {
        return Err(Error::Dataset("pruning an empty plant set".into()));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Validation(format!(
            "prune threshold {threshold} outside [0, 1]"
        )));
    }
    let n = plants.len();
    let means: Vec<f64> = plants
        .iter()
        .map(|p| stats::capacity_factor(&p.output))
        .collect::<Result<_>>()?;
    let mut corr = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let r = match stats::pearson(&plants[i].output, &plants[j].output) {
                Ok(r) => r,
                Err(Error::DegenerateSeries(_)) => 0.0,
                Err(e) => return Err(e),
            };
            corr[i][j] = r;
            corr[j][i] = r;
        }
    }

    let mut alive = vec![true; n];
    loop {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !alive[j] {
                    continue;
                }
                if corr[i][j] > threshold
                    && best.map(|(bi, bj)| corr[i][j] > corr[bi][bj]).unwrap_or(true)
                {
                    best = Some((i, j));
                }
            }
        }
        let Some((i, j)) = best else { break };
        let drop = match means[i].partial_cmp(&means[j]) {
            Some(Ordering::Less) => i,
            Some(Ordering::Greater) => j,
            // Equal means: keep the lexicographically smaller id. The
            // plant list is id-sorted, so that is the lower index.
            _ => j,
        };
        alive[drop] = false;
    }

    let mut keep = alive.iter();
    plants.retain(|_| *keep.next().unwrap());
    Ok(plants)
}

/// Recast a detrended demand profile as a generator with negated output.
pub fn build_demandgen(demand: &DemandSeries, peak_mw: f64) -> Result<DemandGen> {
    if !(peak_mw.is_finite()) || peak_mw <= 0.0 {
        return Err(Error::Validation(format!("non-positive peak load {peak_mw}")));
    }
    let output: Vec<f64> = demand.values.iter().map(|v| -v).collect();
    let capacity_factor = output.iter().sum::<f64>() / output.len() as f64;
    Ok(DemandGen {
        output,
        capacity_mw: peak_mw,
        capacity_factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::io::Write;

    fn plant(id: &str, output: Vec<f64>) -> PlantSeries {
        PlantSeries {
            id: id.into(),
            technology: Technology::Wind,
            latitude: 0.0,
            longitude: 0.0,
            invest_cost_per_kw: 4800.0,
            om_cost_per_kw_year: 90.0,
            output,
        }
    }

    /// Brute-force rolling maximum, the oracle for the deque fast path.
    fn detrend_oracle(raw: &[f64], window_days: usize) -> Vec<f64> {
        let w = window_days * 24;
        (0..raw.len())
            .map(|t| {
                let lo = t.saturating_sub(w);
                let hi = (t + w).min(raw.len() - 1);
                let max = raw[lo..=hi].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                raw[t] / max
            })
            .collect()
    }

    #[test]
    fn detrend_linear_ramp_matches_closed_form() {
        // Ramp over 14 days: the window maximum sits at the right edge,
        // so interior values are t / (t + 72) for window_days = 3.
        let n = 14 * 24;
        let raw: Vec<f64> = (1..=n).map(|t| t as f64).collect();
        let d = detrend_demand(&raw, 3).unwrap();
        let w = 72;
        for t in 0..n - w {
            let expect = (t + 1) as f64 / (t + 1 + w) as f64;
            assert_relative_eq!(d.values[t], expect, max_relative = 1e-14);
        }
        // Positions within the clipped right edge divide by the final value.
        assert_eq!(d.values[n - 1], 1.0);
        assert_eq!(d.peak_mw, n as f64);
    }

    #[test]
    fn detrend_spike_maps_to_one_and_neighbors_to_half() {
        let mut raw = vec![50.0; 24 * 50];
        let spike = 600;
        raw[spike] = 100.0;
        let d = detrend_demand(&raw, 3).unwrap();
        assert_eq!(d.values[spike], 1.0);
        let w = 72;
        for t in 0..raw.len() {
            let expect = if t.abs_diff(spike) <= w { 0.5 } else { 1.0 };
            if t == spike {
                continue;
            }
            assert_eq!(d.values[t], expect, "at {t}");
        }
    }

    #[test]
    fn detrend_matches_bruteforce_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..5 {
            let n = rng.gen_range(10..2000);
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..100.0)).collect();
            let days = rng.gen_range(0..4);
            let got = detrend_demand(&raw, days).unwrap();
            let want = detrend_oracle(&raw, days);
            for (g, w) in got.values.iter().zip(&want) {
                assert_relative_eq!(g, w, max_relative = 1e-15);
            }
        }
    }

    #[test]
    fn detrend_output_is_per_unit_with_unit_max() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(9);
        let raw: Vec<f64> = (0..1000).map(|_| rng.gen_range(10.0..200.0)).collect();
        let d = detrend_demand(&raw, 3).unwrap();
        let max = d.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max, 1.0);
        assert!(d.values.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    proptest! {
        #[test]
        fn detrend_is_scale_invariant(c in 1e-3f64..1e3) {
            let raw: Vec<f64> = (0..300).map(|t| 40.0 + 10.0 * ((t as f64) * 0.37).sin().abs() + t as f64 * 0.01).collect();
            let base = detrend_demand(&raw, 1).unwrap();
            let scaled_raw: Vec<f64> = raw.iter().map(|v| c * v).collect();
            let scaled = detrend_demand(&scaled_raw, 1).unwrap();
            for (a, b) in base.values.iter().zip(&scaled.values) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn detrend_rejects_non_positive_values() {
        assert!(matches!(
            detrend_demand(&[10.0, 0.0, 5.0], 1),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            detrend_demand(&[10.0, -3.0], 1),
            Err(Error::Validation(_))
        ));
    }

    /// Exhaustive pair-scan pruning used as the oracle: recompute every
    /// surviving correlation from scratch after each removal.
    fn prune_oracle(plants: &[PlantSeries], threshold: f64) -> Vec<String> {
        let mut alive: Vec<&PlantSeries> = plants.iter().collect();
        loop {
            let mut best: Option<(usize, usize, f64)> = None;
            for i in 0..alive.len() {
                for j in (i + 1)..alive.len() {
                    let r = match stats::pearson(&alive[i].output, &alive[j].output) {
                        Ok(r) => r,
                        Err(_) => 0.0,
                    };
                    if r > threshold && best.map(|(_, _, br)| r > br).unwrap_or(true) {
                        best = Some((i, j, r));
                    }
                }
            }
            let Some((i, j, _)) = best else { break };
            let mi = stats::capacity_factor(&alive[i].output).unwrap();
            let mj = stats::capacity_factor(&alive[j].output).unwrap();
            let drop = if mi < mj { i } else { j };
            alive.remove(drop);
        }
        alive.iter().map(|p| p.id.clone()).collect()
    }

    fn correlated_triplet() -> Vec<PlantSeries> {
        // Construct a,b,c with r(a,b) = r(b,c) ~ 0.995 and r(a,c) lower,
        // and mean(b) < mean(a) so the first removal takes b.
        let n = 600;
        let base: Vec<f64> = (0..n).map(|t| 0.4 + 0.3 * ((t as f64) * 0.11).sin()).collect();
        let wob1: Vec<f64> = (0..n).map(|t| ((t as f64) * 0.83).sin()).collect();
        let wob2: Vec<f64> = (0..n).map(|t| ((t as f64) * 1.91).cos()).collect();
        let a: Vec<f64> = base.iter().zip(&wob1).map(|(b, w)| b + 0.06 + 0.035 * w).collect();
        let b: Vec<f64> = base.clone();
        let c: Vec<f64> = base.iter().zip(&wob2).map(|(b, w)| b + 0.06 + 0.035 * w).collect();
        vec![plant("a", a), plant("b", b), plant("c", c)]
    }

    #[test]
    fn prune_keeps_two_of_three_in_chain() {
        let plants = correlated_triplet();
        let rab = stats::pearson(&plants[0].output, &plants[1].output).unwrap();
        let rbc = stats::pearson(&plants[1].output, &plants[2].output).unwrap();
        let rac = stats::pearson(&plants[0].output, &plants[2].output).unwrap();
        assert!(rab > 0.99 && rbc > 0.99, "rab {rab} rbc {rbc}");
        assert!(rac < 0.99, "rac {rac}");
        let survivors = prune_correlated(plants.clone(), 0.99).unwrap();
        let ids: Vec<&str> = survivors.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "c"]);
        assert_eq!(prune_oracle(&plants, 0.99), vec!["a", "c"]);
    }

    #[test]
    fn prune_matches_oracle_on_random_sets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(17);
        for case in 0..10 {
            let n_base = rng.gen_range(2..5);
            let bases: Vec<Vec<f64>> = (0..n_base)
                .map(|_| (0..300).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let plants: Vec<PlantSeries> = (0..8)
                .map(|i| {
                    let b = &bases[rng.gen_range(0..n_base)];
                    let noise = rng.gen_range(0.0..0.2);
                    let series: Vec<f64> = b
                        .iter()
                        .map(|v| (v + noise * rng.gen_range(-0.5..0.5)).clamp(0.0, 1.0))
                        .collect();
                    plant(&format!("p{i}"), series)
                })
                .collect();
            let got: Vec<String> = prune_correlated(plants.clone(), 0.95)
                .unwrap()
                .iter()
                .map(|p| p.id.clone())
                .collect();
            assert_eq!(got, prune_oracle(&plants, 0.95), "case {case}");
        }
    }

    #[test]
    fn prune_is_idempotent_and_below_threshold() {
        let plants = correlated_triplet();
        let once = prune_correlated(plants, 0.99).unwrap();
        let twice = prune_correlated(once.clone(), 0.99).unwrap();
        assert_eq!(
            once.iter().map(|p| &p.id).collect::<Vec<_>>(),
            twice.iter().map(|p| &p.id).collect::<Vec<_>>()
        );
        for i in 0..once.len() {
            for j in (i + 1)..once.len() {
                let r = stats::pearson(&once[i].output, &once[j].output).unwrap();
                assert!(r <= 0.99 + 1e-12);
            }
        }
    }

    #[test]
    fn prune_threshold_one_keeps_all_but_duplicates() {
        // r > 1.0 never happens, so nothing is pruned at threshold 1.
        let plants = correlated_triplet();
        let kept = prune_correlated(plants, 1.0).unwrap();
        assert_eq!(kept.len(), 3);
    }

    #[test]
    fn demandgen_negates_and_flattens() {
        let demand = DemandSeries {
            values: vec![0.5, 1.0, 0.75, 0.8],
            peak_mw: 200.0,
        };
        let gen = build_demandgen(&demand, demand.peak_mw).unwrap();
        assert_eq!(gen.output, vec![-0.5, -1.0, -0.75, -0.8]);
        assert_relative_eq!(gen.capacity_factor, -0.7625, max_relative = 1e-15);
        assert_relative_eq!(gen.mean_demand_mw(), 152.5, max_relative = 1e-15);
        let flat = gen.flattened();
        assert!(flat.output.iter().all(|&v| v == gen.capacity_factor));
        assert_eq!(flat.capacity_mw, 200.0);
        assert_relative_eq!(flat.mean_demand_mw(), gen.mean_demand_mw(), max_relative = 1e-15);
    }

    #[test]
    fn flat_demand_has_unit_magnitude_capacity_factor() {
        let raw = vec![75.0; 240];
        let d = detrend_demand(&raw, 3).unwrap();
        let gen = build_demandgen(&d, d.peak_mw).unwrap();
        assert_eq!(gen.capacity_factor, -1.0);
        assert_eq!(gen.capacity_mw, 75.0);
    }

    fn write_fixture(dir: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf, std::path::PathBuf) {
        let plants = dir.join("plants.csv");
        let series = dir.join("series.csv");
        let demand = dir.join("demand.csv");
        let mut f = std::fs::File::create(&plants).unwrap();
        writeln!(f, "id,technology,lat,lon,invest_cost_per_kw,om_cost_per_kw_year").unwrap();
        writeln!(f, "w1,wind,-9.5,-35.7,4800,90").unwrap();
        writeln!(f, "s1,pv,-9.4,-40.5,3500,50").unwrap();
        let mut f = std::fs::File::create(&series).unwrap();
        writeln!(f, "timestamp,s1,w1").unwrap();
        for h in 0..48 {
            let ts = format!("2019-01-{:02}T{:02}:00:00", 1 + h / 24, h % 24);
            writeln!(f, "{ts},{},{}", 0.01 * h as f64, 0.5).unwrap();
        }
        let mut f = std::fs::File::create(&demand).unwrap();
        writeln!(f, "timestamp,demand_mw").unwrap();
        for h in 0..48 {
            let ts = format!("2019-01-{:02}T{:02}:00:00", 1 + h / 24, h % 24);
            writeln!(f, "{ts},{}", 80.0 + h as f64).unwrap();
        }
        (plants, series, demand)
    }

    #[test]
    fn load_dataset_happy_path_sorts_by_id() {
        let dir = tempfile::tempdir().unwrap();
        let (p, s, d) = write_fixture(dir.path());
        let ds = load_dataset(&p, &s, &d).unwrap();
        assert_eq!(ds.plants.len(), 2);
        assert_eq!(ds.plants[0].id, "s1");
        assert_eq!(ds.plants[1].id, "w1");
        assert_eq!(ds.plants[0].technology, Technology::Pv);
        // Column order in the file differs from metadata order; values
        // must still land with the right plant.
        assert_eq!(ds.plants[0].output[5], 0.05);
        assert_eq!(ds.plants[1].output[5], 0.5);
        assert_eq!(ds.demand_mw.len(), 48);
        assert_eq!(ds.calendar.len(), 48);
        assert_eq!(ds.calendar.entries[25].hour, 1);
        assert_eq!(ds.calendar.entries[25].month, 1);
        assert_eq!(ds.calendar.entries[25].year, 2019);
    }

    #[test]
    fn load_dataset_reports_missing_hour() {
        let dir = tempfile::tempdir().unwrap();
        let (p, s, d) = write_fixture(dir.path());
        let text = std::fs::read_to_string(&s).unwrap();
        let filtered: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with("2019-01-01T07"))
            .collect();
        std::fs::write(&s, filtered.join("\n")).unwrap();
        match load_dataset(&p, &s, &d) {
            Err(Error::Gap(msg)) => assert!(msg.contains("2019-01-01 07:00:00"), "{msg}"),
            other => panic!("expected gap error, got {other:?}"),
        }
    }

    #[test]
    fn load_dataset_rejects_out_of_range_output() {
        let dir = tempfile::tempdir().unwrap();
        let (p, s, d) = write_fixture(dir.path());
        let text = std::fs::read_to_string(&s).unwrap();
        let patched = text.replace("T05:00:00,0.05", "T05:00:00,1.05");
        std::fs::write(&s, patched).unwrap();
        assert!(matches!(load_dataset(&p, &s, &d), Err(Error::Validation(_))));
    }

    #[test]
    fn load_dataset_rejects_column_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (p, s, d) = write_fixture(dir.path());
        let text = std::fs::read_to_string(&s).unwrap();
        std::fs::write(&s, text.replace("timestamp,s1,w1", "timestamp,s1,w2")).unwrap();
        assert!(matches!(load_dataset(&p, &s, &d), Err(Error::Dataset(_))));
    }
}
