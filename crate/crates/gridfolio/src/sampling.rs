//! Stratified Latin-hypercube style subsampling of hourly series.
//!
//! CVaR constraint rows need one row per sampled hour, so sample counts
//! in the low thousands are used instead of whole series. To keep the
//! subsample representative across years, seasons and times of day, steps
//! are stratified by calendar coordinates and drawn without replacement,
//! spread as evenly as possible across strata.
//!
//! All randomness comes from one explicit 64-bit seed through a
//! counter-based generator. The persisted plan, not the generator, is the
//! reproducibility contract: a saved plan replays exactly regardless of
//! future changes to the drawing procedure.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::Calendar;

/// How calendar coordinates are folded into strata.
///
/// Months are grouped into `month_bins` equal groups, hours of day into
/// `hour_bins` equal blocks; `by_year` gives every calendar year its own
/// level. Empty strata (combinations that never occur) simply drop out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrataSpec {
    pub by_year: bool,
    pub month_bins: u32,
    pub hour_bins: u32,
}

impl Default for StrataSpec {
    /// Year x month x four six-hour blocks.
    fn default() -> Self {
        StrataSpec {
            by_year: true,
            month_bins: 12,
            hour_bins: 4,
        }
    }
}

impl StrataSpec {
    fn validate(&self) -> Result<()> {
        if self.month_bins == 0 || self.month_bins > 12 || 12 % self.month_bins != 0 {
            return Err(Error::Validation(format!(
                "month_bins {} must divide 12",
                self.month_bins
            )));
        }
        if self.hour_bins == 0 || self.hour_bins > 24 || 24 % self.hour_bins != 0 {
            return Err(Error::Validation(format!(
                "hour_bins {} must divide 24",
                self.hour_bins
            )));
        }
        Ok(())
    }
}

/// A reproducible subsample: sorted step positions plus the seed and
/// strata layout that produced them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePlan {
    /// Distinct positions into the source series, ascending.
    pub indices: Vec<usize>,
    pub seed: u64,
    /// `(year_levels, month_bins, hour_bins)` actually used.
    pub strata_spec: (u32, u32, u32),
}

impl SamplePlan {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Gather the sampled values out of a full series.
    pub fn gather(&self, series: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| series[i]).collect()
    }
}

/// Draw `m` distinct steps from the calendar, stratified per `spec`.
///
/// The target count is split as evenly as possible across non-empty
/// strata (small strata are capped at their population and the spillover
/// redistributed); leftover units after the even split go to strata
/// picked by a seeded shuffle. Within a stratum, steps are drawn without
/// replacement. `m = T` returns every step.
pub fn lhs_sample(calendar: &Calendar, m: usize, seed: u64, spec: &StrataSpec) -> Result<SamplePlan> {
    spec.validate()?;
    let t = calendar.len();
    if m == 0 || m > t {
        return Err(Error::Validation(format!(
            "sample size {m} outside 1..={t}"
        )));
    }

    // Stratum key -> member positions, in deterministic key order.
    let mut strata: BTreeMap<(i32, u32, u32), Vec<usize>> = BTreeMap::new();
    let mut year_levels: BTreeMap<i32, ()> = BTreeMap::new();
    for (pos, e) in calendar.entries.iter().enumerate() {
        let year = if spec.by_year { e.year } else { 0 };
        let month_bin = (e.month - 1) / (12 / spec.month_bins);
        let hour_bin = e.hour / (24 / spec.hour_bins);
        strata.entry((year, month_bin, hour_bin)).or_default().push(pos);
        year_levels.entry(year).or_insert(());
    }
    let keys: Vec<(i32, u32, u32)> = strata.keys().cloned().collect();
    let pops: Vec<usize> = keys.iter().map(|k| strata[k].len()).collect();
    let k = keys.len();

    // Even allocation with caps: process strata in ascending population
    // so a small stratum's unused share flows to the larger ones.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&i| (pops[i], i));
    let mut counts = vec![0usize; k];
    let mut remaining_m = m;
    let mut remaining_k = k;
    for &i in &order {
        let fair = remaining_m / remaining_k;
        counts[i] = fair.min(pops[i]);
        remaining_m -= counts[i];
        remaining_k -= 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Leftover units (division remainders) go to strata with spare
    // capacity, in seeded-shuffle order, one per stratum per cycle.
    while remaining_m > 0 {
        let mut spare: Vec<usize> = (0..k).filter(|&i| counts[i] < pops[i]).collect();
        debug_assert!(!spare.is_empty());
        shuffle(&mut spare, &mut rng);
        for &i in &spare {
            if remaining_m == 0 {
                break;
            }
            counts[i] += 1;
            remaining_m -= 1;
        }
    }

    // Partial Fisher-Yates within each stratum.
    let mut indices: Vec<usize> = Vec::with_capacity(m);
    for (key, count) in keys.iter().zip(&counts) {
        let mut members = strata[key].clone();
        for d in 0..*count {
            let pick = rng.gen_range(d..members.len());
            members.swap(d, pick);
            indices.push(members[d]);
        }
    }
    indices.sort_unstable();
    debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));

    Ok(SamplePlan {
        indices,
        seed,
        strata_spec: (year_levels.len() as u32, spec.month_bins, spec.hour_bins),
    })
}

/// Explicit Fisher-Yates so the shuffle algorithm is pinned here rather
/// than inherited from a dependency.
fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Persist a plan as a `position` CSV with a header comment recording the
/// seed and strata layout. Identical plans serialize byte-identically.
pub fn save_plan(plan: &SamplePlan, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "# seed={} strata=years:{},month_bins:{},hour_bins:{}",
        plan.seed, plan.strata_spec.0, plan.strata_spec.1, plan.strata_spec.2
    )?;
    writeln!(f, "position")?;
    for i in &plan.indices {
        writeln!(f, "{i}")?;
    }
    f.flush()?;
    Ok(())
}

/// Load a plan written by [`save_plan`].
pub fn load_plan(path: &Path) -> Result<SamplePlan> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut seed = 0u64;
    let mut strata = (0u32, 0u32, 0u32);
    let mut indices = Vec::new();
    for (ln, line) in f.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line == "position" {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            for token in comment.split_whitespace() {
                if let Some(v) = token.strip_prefix("seed=") {
                    seed = v.parse().map_err(|_| {
                        Error::Validation(format!("bad seed in plan header: {token}"))
                    })?;
                } else if let Some(v) = token.strip_prefix("strata=") {
                    let mut parts = v.split(',');
                    let mut next = |name: &str| -> Result<u32> {
                        parts
                            .next()
                            .and_then(|p| p.strip_prefix(&format!("{name}:")))
                            .and_then(|p| p.parse().ok())
                            .ok_or_else(|| {
                                Error::Validation(format!("bad strata in plan header: {v}"))
                            })
                    };
                    strata = (next("years")?, next("month_bins")?, next("hour_bins")?);
                }
            }
            continue;
        }
        let idx: usize = line.parse().map_err(|_| {
            Error::Validation(format!("bad position '{line}' on plan line {}", ln + 1))
        })?;
        indices.push(idx);
    }
    if indices.is_empty() {
        return Err(Error::Validation("empty sample plan".into()));
    }
    Ok(SamplePlan {
        indices,
        seed,
        strata_spec: strata,
    })
}
