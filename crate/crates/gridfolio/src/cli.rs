//! Run configuration and the scenario pipeline behind the command line.
//!
//! A run is described by a TOML file with `[data]`, `[finance]`, `[risk]`,
//! `[sweep]` and one `[scenario.<name>]` table per scenario. [`run`]
//! executes every scenario against the shared dataset and writes, per
//! scenario, `frontier.csv`, `weights.csv`, `analysis.csv` and (for CVaR
//! kinds) `plan.csv`, plus run-level `correlations.csv`, `summary.json`
//! and `manifest.json`. [`compare`] merges the frontiers of several
//! completed runs into one normalized CSV.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{self, DiversityReport};
use crate::error::{Error, Result};
use crate::ingest::{self, DemandGen, PlantSeries};
use crate::models::{
    self, Finance, Frontier, ModelData, ScenarioConfig, ScenarioKind,
};
use crate::sampling::{self, SamplePlan, StrataSpec};
use crate::stats;

/// Parsed run configuration file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    #[serde(default)]
    pub finance: Finance,
    #[serde(default)]
    pub risk: RiskSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub scenario: BTreeMap<String, ScenarioSection>,
}

/// `[data]`: input files and preprocessing knobs. Relative paths resolve
/// against the config file's directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub plants: PathBuf,
    pub series: PathBuf,
    pub demand: PathBuf,
    #[serde(default = "default_prune_threshold")]
    pub prune_threshold: f64,
    #[serde(default = "default_detrend_window_days")]
    pub detrend_window_days: usize,
}

fn default_prune_threshold() -> f64 {
    0.99
}

fn default_detrend_window_days() -> usize {
    3
}

/// `[risk]`: tail parameters shared by every CVaR scenario plus the seed
/// all sampling randomness flows from.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskSection {
    pub beta: f64,
    pub omega: f64,
    pub m_samples: usize,
    pub seed: u64,
}

impl Default for RiskSection {
    fn default() -> Self {
        RiskSection {
            beta: 0.05,
            omega: 0.0,
            m_samples: 3000,
            seed: 42,
        }
    }
}

/// `[sweep]`: frontier resolution.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub n_points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { n_points: 51 }
    }
}

/// One `[scenario.<name>]` table.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub points: Option<usize>,
    pub threads: Option<usize>,
}

/// What one run produced: inputs (with digests), the pruned plant
/// universe, and a record per scenario including wall-clock solve time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    /// Input-file digests (sha256 of raw bytes) keyed by role.
    pub inputs: BTreeMap<String, String>,
    /// Plant ids surviving the correlation prune, in model order.
    pub universe: Vec<String>,
    pub scenarios: Vec<ScenarioRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub name: String,
    pub kind: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Paths relative to the run directory; all exist when `ok`.
    pub outputs: Vec<String>,
    /// Wall-clock time of the frontier sweep in milliseconds.
    pub sweep_wall_ms: u64,
}

impl RunManifest {
    /// Names of scenarios that failed to solve.
    pub fn failures(&self) -> Vec<&str> {
        self.scenarios
            .iter()
            .filter(|s| !s.ok)
            .map(|s| s.name.as_str())
            .collect()
    }
}

/// Per-scenario entry of `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub kind: String,
    pub n_points: usize,
    /// Balance-SD endpoints of the sweep in MW.
    pub sigma_range: [f64; 2],
    /// Lowest cost per MWh over the frontier's optimal points.
    pub min_cost: f64,
    /// Lowest achieved balance SD in MW over the optimal points.
    pub min_sd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_cv_index: Option<usize>,
    /// Diversity indices at the minimum-cost point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diversity: Option<DiversityReport>,
}

/// Execute every scenario in `config_path`, writing results under
/// `out_dir`.
///
/// Configuration and data problems error out before anything runs (the
/// frontend maps them to exit 2). Solve failures do not abort the run:
/// the scenario is recorded as failed in the manifest, other scenarios
/// still execute, and the caller decides how to exit.
pub fn run(config_path: &Path, out_dir: &Path, overrides: &Overrides) -> Result<RunManifest> {
    let text = fs::read_to_string(config_path).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", config_path.display()))
    })?;
    let cfg: RunConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", config_path.display())))?;
    if cfg.scenario.is_empty() {
        return Err(Error::Config(
            "config lists no [scenario.<name>] sections".into(),
        ));
    }

    // Build and validate every scenario before touching data files.
    let n_points = overrides.points.unwrap_or(cfg.sweep.n_points);
    let seed = overrides.seed.unwrap_or(cfg.risk.seed);
    let mut scenarios: Vec<(String, ScenarioConfig)> = Vec::new();
    for (name, section) in &cfg.scenario {
        let mut sc = ScenarioConfig::new(section.kind);
        sc.n_frontier_points = n_points;
        sc.beta = cfg.risk.beta;
        sc.omega = cfg.risk.omega;
        sc.m_samples = cfg.risk.m_samples;
        sc.finance = cfg.finance;
        sc.validate()
            .map_err(|e| Error::Config(format!("[scenario.{name}]: {e}")))?;
        scenarios.push((name.clone(), sc));
    }

    let base = config_path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &Path| -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let plants_path = resolve(&cfg.data.plants);
    let series_path = resolve(&cfg.data.series);
    let demand_path = resolve(&cfg.data.demand);

    let mut inputs = BTreeMap::new();
    inputs.insert("config".to_string(), digest_file(config_path)?);
    inputs.insert("plants".to_string(), digest_file(&plants_path)?);
    inputs.insert("series".to_string(), digest_file(&series_path)?);
    inputs.insert("demand".to_string(), digest_file(&demand_path)?);

    let raw = ingest::load_dataset(&plants_path, &series_path, &demand_path)?;
    let demand_series = ingest::detrend_demand(&raw.demand_mw, cfg.data.detrend_window_days)?;
    let plants = ingest::prune_correlated(raw.plants, cfg.data.prune_threshold)?;
    let demand = ingest::build_demandgen(&demand_series, demand_series.peak_mw)?;

    let plan = if scenarios.iter().any(|(_, s)| s.kind.is_cvar()) {
        Some(sampling::lhs_sample(
            &raw.calendar,
            cfg.risk.m_samples,
            seed,
            &StrataSpec::default(),
        )?)
    } else {
        None
    };

    fs::create_dir_all(out_dir)?;
    stats::write_correlation_csv(&out_dir.join("correlations.csv"), &plants)?;

    let execute = || -> Result<Vec<(ScenarioRecord, Option<ScenarioSummary>)>> {
        scenarios
            .iter()
            .map(|(name, sc)| run_scenario(name, sc, &plants, &demand, plan.as_ref(), out_dir))
            .collect()
    };
    let outcomes = match overrides.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot build a {n}-thread pool: {e}")))?
            .install(execute),
        None => execute(),
    }?;

    let mut summary: BTreeMap<String, ScenarioSummary> = BTreeMap::new();
    let mut records = Vec::new();
    for (record, entry) in outcomes {
        if let Some(entry) = entry {
            summary.insert(record.name.clone(), entry);
        }
        records.push(record);
    }
    write_json_pretty(&out_dir.join("summary.json"), &summary)?;

    let manifest = RunManifest {
        seed,
        inputs,
        universe: plants.iter().map(|p| p.id.clone()).collect(),
        scenarios: records,
    };
    write_json_pretty(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn run_scenario(
    name: &str,
    scenario: &ScenarioConfig,
    plants: &[PlantSeries],
    demand: &DemandGen,
    plan: Option<&SamplePlan>,
    out_dir: &Path,
) -> Result<(ScenarioRecord, Option<ScenarioSummary>)> {
    let data = ModelData {
        plants,
        demand: Some(demand),
        plan,
    };
    let started = Instant::now();
    let swept = models::frontier_sweep(scenario, &data);
    let sweep_wall_ms = started.elapsed().as_millis() as u64;

    let frontier = match swept {
        Ok(f) => f,
        Err(e) => {
            return Ok((
                ScenarioRecord {
                    name: name.to_string(),
                    kind: scenario.kind.name().to_string(),
                    ok: false,
                    error: Some(e.to_string()),
                    outputs: Vec::new(),
                    sweep_wall_ms,
                },
                None,
            ))
        }
    };

    let dir = out_dir.join(name);
    fs::create_dir_all(&dir)?;
    let mut outputs = Vec::new();
    models::write_frontier_csv(&dir.join("frontier.csv"), &frontier)?;
    outputs.push(format!("{name}/frontier.csv"));
    models::write_weights_csv(&dir.join("weights.csv"), &frontier)?;
    outputs.push(format!("{name}/weights.csv"));
    analysis::write_analysis_csv(
        &dir.join("analysis.csv"),
        &frontier,
        plants,
        Some(demand),
        scenario,
    )?;
    outputs.push(format!("{name}/analysis.csv"));
    if scenario.kind.is_cvar() {
        let plan = plan.expect("cvar sweep succeeded without a plan");
        sampling::save_plan(plan, &dir.join("plan.csv"))?;
        outputs.push(format!("{name}/plan.csv"));
    }

    Ok((
        ScenarioRecord {
            name: name.to_string(),
            kind: scenario.kind.name().to_string(),
            ok: true,
            error: None,
            outputs,
            sweep_wall_ms,
        },
        Some(summarize(scenario, &frontier, plants)),
    ))
}

fn summarize(
    scenario: &ScenarioConfig,
    frontier: &Frontier,
    plants: &[PlantSeries],
) -> ScenarioSummary {
    let min_cost_point = frontier
        .optimal_points()
        .filter(|p| p.cost_per_mwh.is_finite())
        .min_by(|a, b| a.cost_per_mwh.partial_cmp(&b.cost_per_mwh).expect("finite"));
    ScenarioSummary {
        kind: scenario.kind.name().to_string(),
        n_points: frontier.points.len(),
        sigma_range: [frontier.sigma_lo, frontier.sigma_hi],
        min_cost: min_cost_point.map(|p| p.cost_per_mwh).unwrap_or(f64::NAN),
        min_sd: frontier
            .optimal_points()
            .map(|p| p.achieved_sd)
            .fold(f64::NAN, f64::min),
        min_cv_index: analysis::min_cv_index(frontier),
        diversity: min_cost_point
            .and_then(|p| analysis::diversity(&p.generation_shares, plants).ok()),
    }
}

fn digest_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| {
        Error::Config(format!("cannot read input {}: {e}", path.display()))
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Validation(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Merge the frontier CSVs of several completed runs into one file with
/// the normalized columns
/// `run,scenario,kind,point_index,sigma_cap,sd_per_capacity,cost_per_mwh,cf,status`.
///
/// All runs must cover the same pruned plant universe; field values are
/// copied verbatim from the per-run CSVs, so merging is byte-stable.
pub fn compare(run_dirs: &[PathBuf], out_path: &Path) -> Result<()> {
    if run_dirs.len() < 2 {
        return Err(Error::Config(
            "compare needs at least two run directories".into(),
        ));
    }
    let mut manifests: Vec<(String, RunManifest)> = Vec::new();
    for dir in run_dirs {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| {
            Error::Config(format!("{} is not a run directory: {e}", dir.display()))
        })?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        manifests.push((dir.display().to_string(), manifest));
    }
    let universe = &manifests[0].1.universe;
    for (label, m) in &manifests[1..] {
        if &m.universe != universe {
            return Err(Error::Config(format!(
                "run {} covers a different plant universe than {}",
                label, manifests[0].0
            )));
        }
    }

    let mut w = csv::Writer::from_path(out_path)?;
    w.write_record([
        "run",
        "scenario",
        "kind",
        "point_index",
        "sigma_cap",
        "sd_per_capacity",
        "cost_per_mwh",
        "cf",
        "status",
    ])?;
    for (label, manifest) in &manifests {
        let dir = Path::new(label);
        for record in manifest.scenarios.iter().filter(|s| s.ok) {
            let path = dir.join(&record.name).join("frontier.csv");
            let mut rdr = csv::Reader::from_path(&path)?;
            for (i, row) in rdr.records().enumerate() {
                let row = row?;
                w.write_record([
                    label.as_str(),
                    record.name.as_str(),
                    record.kind.as_str(),
                    &i.to_string(),
                    &row[0],
                    &row[1],
                    &row[3],
                    &row[2],
                    &row[6],
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
