//! Scenario models and the efficient-frontier sweep.
//!
//! Seven scenario kinds share one canonical program shape (see
//! [`crate::solver`]):
//!
//! * `Trad_*` maximizes mean output with the total installed capacity
//!   fixed and portfolio variance capped.
//! * `Cost_*` minimizes annualized cost with mean generation pinned to
//!   the demand level and the same variance cap.
//! * `CVaR_*` minimizes cost with capacity sized by a tail-risk floor on
//!   the energy balance instead of a generation equality.
//!
//! `_Obs` variants couple the portfolio to the observed demand profile by
//! treating demand as a fixed-capacity generator with negative output, so
//! its covariance row folds into the quadratic form; `_Flat` variants use
//! a flat profile at the same mean level, which zeroes those terms.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DemandGen, PlantSeries, Technology};
use crate::sampling::SamplePlan;
use crate::solver::{self, ConvexProgram, LinearRow, QuadConstraint, SolveStatus};
use crate::stats;

/// The scenario families. Names follow the run-config spelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioKind {
    #[serde(rename = "Trad_Flat")]
    TradFlat,
    #[serde(rename = "Trad_Obs")]
    TradObs,
    #[serde(rename = "Cost_Flat")]
    CostFlat,
    #[serde(rename = "Cost_Obs")]
    CostObs,
    #[serde(rename = "Cost_Flat_lcpv")]
    CostFlatLcpv,
    #[serde(rename = "CVaR_Flat")]
    CvarFlat,
    #[serde(rename = "CVaR_Obs")]
    CvarObs,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::TradFlat,
        ScenarioKind::TradObs,
        ScenarioKind::CostFlat,
        ScenarioKind::CostObs,
        ScenarioKind::CostFlatLcpv,
        ScenarioKind::CvarFlat,
        ScenarioKind::CvarObs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::TradFlat => "Trad_Flat",
            ScenarioKind::TradObs => "Trad_Obs",
            ScenarioKind::CostFlat => "Cost_Flat",
            ScenarioKind::CostObs => "Cost_Obs",
            ScenarioKind::CostFlatLcpv => "Cost_Flat_lcpv",
            ScenarioKind::CvarFlat => "CVaR_Flat",
            ScenarioKind::CvarObs => "CVaR_Obs",
        }
    }

    /// Kinds whose quadratic form carries demand covariance terms.
    pub fn observes_demand(self) -> bool {
        matches!(self, ScenarioKind::TradObs | ScenarioKind::CostObs | ScenarioKind::CvarObs)
    }

    pub fn is_trad(self) -> bool {
        matches!(self, ScenarioKind::TradFlat | ScenarioKind::TradObs)
    }

    pub fn is_cvar(self) -> bool {
        matches!(self, ScenarioKind::CvarFlat | ScenarioKind::CvarObs)
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown scenario kind \"{s}\"")))
    }
}

/// Financing assumptions for annualizing capacity costs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Finance {
    /// Discount rate per year.
    pub discount_rate: f64,
    pub wind_lifetime_years: u32,
    pub pv_lifetime_years: u32,
}

impl Default for Finance {
    fn default() -> Self {
        Finance {
            discount_rate: 0.08,
            wind_lifetime_years: 25,
            pv_lifetime_years: 25,
        }
    }
}

impl Finance {
    pub fn lifetime(&self, tech: Technology) -> u32 {
        match tech {
            Technology::Wind => self.wind_lifetime_years,
            Technology::Pv => self.pv_lifetime_years,
        }
    }
}

/// Capital recovery factor: the annuity equivalent of one unit of
/// upfront cost at rate `r` over `n` years; `1/n` at zero rate.
pub fn crf(rate: f64, years: u32) -> f64 {
    assert!(years >= 1, "lifetime must be at least one year");
    assert!(rate >= 0.0, "negative discount rate");
    if rate == 0.0 {
        1.0 / years as f64
    } else {
        let growth = (1.0 + rate).powi(years as i32);
        rate * growth / (growth - 1.0)
    }
}

/// Annualized capacity cost in currency per kW and year, with the PV
/// multiplier applied to both investment and O&M.
pub fn annualized_cost_per_kw(
    plant: &PlantSeries,
    finance: &Finance,
    pv_cost_multiplier: f64,
) -> f64 {
    let mult = match plant.technology {
        Technology::Pv => pv_cost_multiplier,
        Technology::Wind => 1.0,
    };
    plant.invest_cost_per_kw * mult * crf(finance.discount_rate, finance.lifetime(plant.technology))
        + plant.om_cost_per_kw_year * mult
}

/// Levelized cost of electricity in currency per MWh.
///
/// With costs per kW and 8760 hours per year, one kW at capacity factor
/// `cf` produces `8.76 cf` MWh per year, hence the denominator.
pub fn lcoe(plant: &PlantSeries, finance: &Finance, pv_cost_multiplier: f64) -> Result<f64> {
    let cf = stats::capacity_factor(&plant.output)?;
    if cf <= 0.0 {
        return Err(Error::DegeneratePlant(format!(
            "plant {} never produces, no finite LCOE",
            plant.id
        )));
    }
    Ok(annualized_cost_per_kw(plant, finance, pv_cost_multiplier) / (8.76 * cf))
}

/// One scenario's knobs. `omega` is the balance floor in MW; `beta` the
/// tail fraction; `m_samples` the number of sampled hours backing the
/// tail constraint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub n_frontier_points: usize,
    pub beta: f64,
    pub omega: f64,
    pub m_samples: usize,
    pub finance: Finance,
    pub pv_cost_multiplier: f64,
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind) -> Self {
        ScenarioConfig {
            kind,
            n_frontier_points: 51,
            beta: 0.05,
            omega: 0.0,
            m_samples: 3000,
            finance: Finance::default(),
            pv_cost_multiplier: if kind == ScenarioKind::CostFlatLcpv {
                0.5
            } else {
                1.0
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if self.n_frontier_points < 2 {
            return Err(Error::Config("n_frontier_points must be at least 2".into()));
        }
        if self.m_samples < 1 {
            return Err(Error::Config("m_samples must be at least 1".into()));
        }
        if !(self.pv_cost_multiplier > 0.0) {
            return Err(Error::Config("pv_cost_multiplier must be positive".into()));
        }
        Ok(())
    }
}

/// Input bundle for assembly: pruned plants, optional demand, and the
/// sample plan CVaR kinds draw their hours from.
#[derive(Clone, Copy)]
pub struct ModelData<'a> {
    pub plants: &'a [PlantSeries],
    pub demand: Option<&'a DemandGen>,
    pub plan: Option<&'a SamplePlan>,
}

/// Lower-tail mean with exact fractional tail mass: sort ascending and
/// average the worst `q * T` observations, weighting the boundary sample
/// by the fractional remainder. This is the closed form the optimizer's
/// (alpha, Z) representation must reproduce, kept deliberately naive.
pub fn cvar_oracle(balance: &[f64], q: f64) -> f64 {
    assert!(!balance.is_empty(), "tail mean of an empty series");
    assert!(q > 0.0 && q <= 1.0, "tail fraction {q} outside (0, 1]");
    let mut v = balance.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite balance value"));
    let mass = q * v.len() as f64;
    let full = mass.floor() as usize;
    let frac = mass - full as f64;
    let mut acc: f64 = v[..full].iter().sum();
    if frac > 0.0 {
        acc += frac * v[full];
    }
    acc / mass
}

/// Lower-tail quantile as an order statistic: the `ceil(q T)`-th smallest
/// value.
pub fn var_oracle(balance: &[f64], q: f64) -> f64 {
    assert!(!balance.is_empty(), "quantile of an empty series");
    assert!(q > 0.0 && q <= 1.0, "tail fraction {q} outside (0, 1]");
    let mut v = balance.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite balance value"));
    let k = (q * v.len() as f64).ceil() as usize;
    v[k.max(1) - 1]
}

/// Assembly output: the program plus the reporting context the sweep
/// needs (the constant variance term the quadratic form omits, per-plant
/// means and costs).
pub struct Assembled {
    pub program: ConvexProgram,
    /// Constant part of the balance variance, `P_L^2 sigma_LL`; the
    /// program's quadratic form carries only capacity-dependent terms, so
    /// reported SDs add this back.
    pub var_const: f64,
    pub plant_ids: Vec<String>,
    pub mu: Vec<f64>,
    pub lcoe: Vec<f64>,
    pub n_plants: usize,
}

impl Assembled {
    /// Full balance standard deviation at capacities `x` (MW).
    pub fn balance_sd(&self, x: &[f64]) -> f64 {
        let q = self.program.quad_value(x).unwrap_or(0.0);
        (q + self.var_const).max(0.0).sqrt()
    }
}

/// Build the scenario's convex program. `sigma_cap` is the balance SD
/// bound in MW; `None` leaves the variance unconstrained.
pub fn assemble(
    scenario: &ScenarioConfig,
    data: &ModelData,
    sigma_cap: Option<f64>,
) -> Result<ConvexProgram> {
    let mut built = build(scenario, data)?;
    if let Some(sd) = sigma_cap {
        built.program = built.program.with_quad_bound(quad_bound(sd, built.var_const));
    }
    Ok(built.program)
}

/// Internal bound on the capacity-dependent part of the variance for an
/// imposed balance SD, with a whisker of slack so the low-variance
/// endpoint keeps a nonempty interior.
fn quad_bound(sigma_cap: f64, var_const: f64) -> f64 {
    let var = sigma_cap * sigma_cap;
    // Slack scales with the full variance magnitude, not the shifted
    // bound: with demand cross-terms the constant part dominates and a
    // sigma-relative whisker would vanish in the subtraction.
    var + 1e-7 * (var + var_const.abs()) + 1e-12 * (1.0 + var) - var_const
}

pub fn build(scenario: &ScenarioConfig, data: &ModelData) -> Result<Assembled> {
    scenario.validate()?;
    let plants = data.plants;
    if plants.is_empty() {
        return Err(Error::Validation("cannot assemble a zero-plant model".into()));
    }
    let n = plants.len();
    let kind = scenario.kind;

    let mu: Vec<f64> = plants
        .iter()
        .map(|p| stats::capacity_factor(&p.output))
        .collect::<Result<_>>()?;
    let lcoes: Vec<f64> = plants
        .iter()
        .map(|p| lcoe(p, &scenario.finance, scenario.pv_cost_multiplier))
        .collect::<Result<_>>()?;

    // The demand pseudo-generator the quadratic form and balance rows
    // see: the observed profile for _Obs kinds, a flat profile at the
    // same mean for CVaR_Flat, nothing otherwise.
    let flat;
    let quad_demand: Option<&DemandGen> = if kind.observes_demand() {
        Some(data.demand.ok_or_else(|| {
            Error::Config(format!("{} needs a demand series", kind.name()))
        })?)
    } else if kind == ScenarioKind::CvarFlat {
        let dg = data
            .demand
            .ok_or_else(|| Error::Config("CVaR_Flat needs a demand series for its level".into()))?;
        flat = dg.flattened();
        Some(&flat)
    } else {
        None
    };

    let cov = stats::covariance_matrix(plants, quad_demand, true)?;
    cov.check()?;
    let p_load = quad_demand.map(|d| d.capacity_mw).unwrap_or(0.0);
    let var_const = quad_demand
        .map(|_| p_load * p_load * cov.matrix[(n, n)])
        .unwrap_or(0.0);

    let head_len = if kind.is_cvar() { n + 1 } else { n };
    let mut qmat = DMatrix::zeros(head_len, head_len);
    for i in 0..n {
        for j in 0..n {
            qmat[(i, j)] = cov.matrix[(i, j)];
        }
    }
    let mut qlin = DVector::zeros(head_len);
    if quad_demand.is_some() {
        for i in 0..n {
            qlin[i] = 2.0 * p_load * cov.matrix[(i, n)];
        }
    }
    let quad = QuadConstraint {
        matrix: qmat,
        linear: qlin,
        bound: f64::INFINITY,
    };

    let mut names: Vec<String> = plants.iter().map(|p| p.id.clone()).collect();
    let mut objective: Vec<f64>;
    let mut eq_rows = Vec::new();
    let mut ineq_rows = Vec::new();
    let mut lower_bounds: Vec<Option<f64>> = vec![Some(0.0); n];

    match kind {
        ScenarioKind::TradFlat | ScenarioKind::TradObs => {
            // Maximize mean output at fixed total capacity: the peak load
            // when demand exists, otherwise one normalized unit.
            let total = data.demand.map(|d| d.capacity_mw).unwrap_or(1.0);
            objective = mu.iter().map(|m| -m).collect();
            eq_rows.push(LinearRow::new((0..n).map(|i| (i, 1.0)).collect(), total));
        }
        ScenarioKind::CostFlat | ScenarioKind::CostObs | ScenarioKind::CostFlatLcpv => {
            // Minimize annualized cost at fixed mean generation: the mean
            // demand when a series exists, otherwise one normalized unit.
            let k = data.demand.map(|d| d.mean_demand_mw()).unwrap_or(1.0);
            if kind == ScenarioKind::CostObs && data.demand.is_none() {
                return Err(Error::Config("Cost_Obs needs a demand series".into()));
            }
            objective = (0..n).map(|i| lcoes[i] * mu[i]).collect();
            eq_rows.push(LinearRow::new((0..n).map(|i| (i, mu[i])).collect(), k));
        }
        ScenarioKind::CvarFlat | ScenarioKind::CvarObs => {
            let plan = data.plan.ok_or_else(|| {
                Error::Config(format!("{} needs a sample plan", kind.name()))
            })?;
            let dg = quad_demand.expect("checked above");
            let m = plan.len();
            if m == 0 {
                return Err(Error::Config("empty sample plan".into()));
            }
            objective = (0..n).map(|i| lcoes[i] * mu[i]).collect();
            objective.push(0.0); // alpha
            objective.extend(std::iter::repeat(0.0).take(m));
            names.push("alpha".into());
            names.extend((0..m).map(|j| format!("z{j}")));
            lower_bounds.push(None); // alpha free
            lower_bounds.extend(std::iter::repeat(Some(0.0)).take(m));

            // Tail-mean floor: alpha - sum Z / (beta M) >= omega.
            let mut tail_row = vec![(n, 1.0)];
            let w = 1.0 / (scenario.beta * m as f64);
            for j in 0..m {
                tail_row.push((n + 1 + j, -w));
            }
            ineq_rows.push(LinearRow::new(tail_row, scenario.omega));

            // One shortfall row per sampled hour t:
            // sum_i Y_ti P_i + Z_t - alpha >= L_t.
            for (j, &t) in plan.indices.iter().enumerate() {
                let mut row: Vec<(usize, f64)> =
                    (0..n).map(|i| (i, plants[i].output[t])).collect();
                row.push((n, -1.0));
                row.push((n + 1 + j, 1.0));
                let load = -dg.output[t] * dg.capacity_mw;
                ineq_rows.push(LinearRow::new(row, load));
            }
        }
    }

    let program = ConvexProgram {
        names,
        head_len,
        objective,
        eq_rows,
        ineq_rows,
        lower_bounds,
        quad: Some(quad),
    };
    program.validate()?;
    Ok(Assembled {
        program,
        var_const,
        plant_ids: plants.iter().map(|p| p.id.clone()).collect(),
        mu,
        lcoe: lcoes,
        n_plants: n,
    })
}

/// One solved portfolio on a frontier. `sigma_cap` and `achieved_sd` are
/// balance SDs in MW; `sd_per_capacity` is the same SD divided by the
/// installed capacity, the normalization used for reporting and CV.
#[derive(Debug, Clone, Serialize)]
pub struct FrontierPoint {
    pub index: usize,
    pub sigma_cap: f64,
    pub capacities: Vec<f64>,
    /// Recovered tail offset for CVaR kinds (approximates the VaR).
    pub alpha: Option<f64>,
    pub achieved_sd: f64,
    pub sd_per_capacity: f64,
    pub installed_mw: f64,
    pub mean_output_mw: f64,
    pub cf: f64,
    pub cost_per_mwh: f64,
    /// Model-sense objective: mean output (MW) for Trad kinds, the cost
    /// rate `sum P_i C_i mu_i` for the others.
    pub objective: f64,
    /// Plant generation over total portfolio generation; the weights used
    /// by the diversity indices and the weights CSV.
    pub generation_shares: Vec<f64>,
    pub status: SolveStatus,
}

/// A solved sweep, points ascending in `sigma_cap`.
#[derive(Debug, Clone)]
pub struct Frontier {
    pub kind: ScenarioKind,
    pub plant_ids: Vec<String>,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub points: Vec<FrontierPoint>,
}

impl Frontier {
    pub fn optimal_points(&self) -> impl Iterator<Item = &FrontierPoint> {
        self.points
            .iter()
            .filter(|p| p.status == SolveStatus::Optimal)
    }
}

/// Sweep the variance bound over `n_frontier_points` equally spaced
/// balance-SD values between the minimum-variance portfolio and the
/// unconstrained optimum, one solve per value. Individual point failures
/// are recorded in the point's status; only an infeasible or degenerate
/// endpoint aborts the sweep.
pub fn frontier_sweep(scenario: &ScenarioConfig, data: &ModelData) -> Result<Frontier> {
    let built = build(scenario, data)?;

    let lo_sol = solver::min_variance(&built.program)?;
    if lo_sol.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!(
            "{}: minimum-variance endpoint {} (primal residual {:.2e}); \
             the scenario is infeasible as configured",
            scenario.kind.name(),
            lo_sol.status.name(),
            lo_sol.kkt.primal
        )));
    }
    let sigma_lo = built.balance_sd(&lo_sol.x);

    let hi_sol = solver::unconstrained_sd_endpoint(&built.program)?;
    if hi_sol.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!(
            "{}: unconstrained endpoint {}; objective unbounded or stalled",
            scenario.kind.name(),
            hi_sol.status.name()
        )));
    }
    let sigma_hi = built.balance_sd(&hi_sol.x).max(sigma_lo);

    let npts = scenario.n_frontier_points;
    let sigmas: Vec<f64> = (0..npts)
        .map(|i| sigma_lo + (sigma_hi - sigma_lo) * i as f64 / (npts - 1) as f64)
        .collect();

    let points: Vec<FrontierPoint> = sigmas
        .par_iter()
        .enumerate()
        .map(|(index, &sd)| {
            // The low endpoint's feasible set is a single point, which the
            // interior path handles poorly; its solution is already in hand.
            if index == 0 {
                return make_point(scenario, &built, index, sd, &lo_sol.x, lo_sol.status);
            }
            let prog = built.program.with_quad_bound(quad_bound(sd, built.var_const));
            match solver::solve(&prog) {
                Ok(sol) => make_point(scenario, &built, index, sd, &sol.x, sol.status),
                Err(_) => make_point(scenario, &built, index, sd, &[], SolveStatus::MaxIter),
            }
        })
        .collect();

    Ok(Frontier {
        kind: scenario.kind,
        plant_ids: built.plant_ids.clone(),
        sigma_lo,
        sigma_hi,
        points,
    })
}

fn make_point(
    scenario: &ScenarioConfig,
    built: &Assembled,
    index: usize,
    sigma_cap: f64,
    x: &[f64],
    status: SolveStatus,
) -> FrontierPoint {
    let n = built.n_plants;
    let capacities: Vec<f64> = if x.len() >= n {
        x[..n].iter().map(|v| v.max(0.0)).collect()
    } else {
        vec![0.0; n]
    };
    let alpha = if scenario.kind.is_cvar() && x.len() > n {
        Some(x[n])
    } else {
        None
    };
    let installed: f64 = capacities.iter().sum();
    let mean_output: f64 = capacities
        .iter()
        .zip(&built.mu)
        .map(|(p, m)| p * m)
        .sum();
    let cost_rate: f64 = capacities
        .iter()
        .zip(&built.lcoe)
        .zip(&built.mu)
        .map(|((p, c), m)| p * c * m)
        .sum();
    let achieved_sd = if x.len() >= built.program.head_len {
        built.balance_sd(x)
    } else {
        f64::NAN
    };
    let cf = if installed > 0.0 {
        mean_output / installed
    } else {
        0.0
    };
    let generation_shares: Vec<f64> = if mean_output > 0.0 {
        capacities
            .iter()
            .zip(&built.mu)
            .map(|(p, m)| p * m / mean_output)
            .collect()
    } else {
        vec![0.0; n]
    };
    FrontierPoint {
        index,
        sigma_cap,
        alpha,
        achieved_sd,
        sd_per_capacity: if installed > 0.0 {
            achieved_sd / installed
        } else {
            f64::NAN
        },
        installed_mw: installed,
        mean_output_mw: mean_output,
        cf,
        cost_per_mwh: if mean_output > 0.0 {
            cost_rate / mean_output
        } else {
            f64::NAN
        },
        objective: if scenario.kind.is_trad() {
            mean_output
        } else {
            cost_rate
        },
        generation_shares,
        capacities,
        status,
    }
}

/// Frontier CSV:
/// `sigma_cap,achieved_sd_per_cap,cf,cost_per_mwh,installed_mw,mean_output_mw,status`.
pub fn write_frontier_csv(path: &std::path::Path, frontier: &Frontier) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "sigma_cap",
        "achieved_sd_per_cap",
        "cf",
        "cost_per_mwh",
        "installed_mw",
        "mean_output_mw",
        "status",
    ])?;
    for p in &frontier.points {
        w.write_record([
            p.sigma_cap.to_string(),
            p.sd_per_capacity.to_string(),
            p.cf.to_string(),
            p.cost_per_mwh.to_string(),
            p.installed_mw.to_string(),
            p.mean_output_mw.to_string(),
            p.status.name().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-point capacity CSV: `point_index,plant_id,capacity_mw,share`,
/// where share is the plant's fraction of portfolio generation.
pub fn write_weights_csv(path: &std::path::Path, frontier: &Frontier) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["point_index", "plant_id", "capacity_mw", "share"])?;
    for p in &frontier.points {
        for (i, id) in frontier.plant_ids.iter().enumerate() {
            w.write_record([
                p.index.to_string(),
                id.clone(),
                p.capacities[i].to_string(),
                p.generation_shares[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Calendar;
    use crate::sampling::{lhs_sample, StrataSpec};
    use crate::synth;
    use approx::assert_relative_eq;
    use chrono::NaiveDate;

    fn hourly_calendar(hours: usize) -> Calendar {
        let start = NaiveDate::from_ymd_opt(2019, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let ts: Vec<_> = (0..hours)
            .map(|t| start + chrono::Duration::hours(t as i64))
            .collect();
        Calendar::from_timestamps(&ts)
    }

    fn flat_plant(id: &str, level: f64, hours: usize) -> PlantSeries {
        PlantSeries {
            id: id.to_string(),
            technology: Technology::Wind,
            latitude: -10.0,
            longitude: -40.0,
            invest_cost_per_kw: 4800.0,
            om_cost_per_kw_year: 90.0,
            output: vec![level; hours],
        }
    }

    #[test]
    fn crf_matches_annuity_table() {
        assert_relative_eq!(crf(0.08, 25), 0.0936788, epsilon = 5e-7);
        assert_relative_eq!(crf(0.0, 25), 0.04, epsilon = 1e-12);
        // One year at any rate repays everything plus interest.
        assert_relative_eq!(crf(0.10, 1), 1.10, epsilon = 1e-12);
    }

    #[test]
    fn lcoe_reference_values() {
        let mut p = flat_plant("w", 0.45, 100);
        let fin = Finance::default();
        let v = lcoe(&p, &fin, 1.0).unwrap();
        assert!((v - 136.9).abs() < 0.1, "wind LCOE {v}");

        p.invest_cost_per_kw = 3500.0;
        p.om_cost_per_kw_year = 50.0;
        p.output = vec![0.2; 100];
        let zero = Finance {
            discount_rate: 0.0,
            ..Finance::default()
        };
        let v = lcoe(&p, &zero, 1.0).unwrap();
        assert_relative_eq!(v, 190.0 / 1.752, epsilon = 1e-9);
    }

    #[test]
    fn pv_multiplier_halves_pv_lcoe_exactly_and_leaves_wind_alone() {
        let fin = Finance::default();
        let mut pv = flat_plant("s", 0.25, 100);
        pv.technology = Technology::Pv;
        let full = lcoe(&pv, &fin, 1.0).unwrap();
        let half = lcoe(&pv, &fin, 0.5).unwrap();
        assert_eq!(half, 0.5 * full);

        let wind = flat_plant("w", 0.4, 100);
        assert_eq!(
            lcoe(&wind, &fin, 0.5).unwrap(),
            lcoe(&wind, &fin, 1.0).unwrap()
        );
    }

    #[test]
    fn lcoe_monotone_in_inputs() {
        let fin = Finance::default();
        let base = flat_plant("w", 0.4, 50);
        let v0 = lcoe(&base, &fin, 1.0).unwrap();
        let mut dearer = base.clone();
        dearer.invest_cost_per_kw += 500.0;
        assert!(lcoe(&dearer, &fin, 1.0).unwrap() > v0);
        let mut pricier_om = base.clone();
        pricier_om.om_cost_per_kw_year += 20.0;
        assert!(lcoe(&pricier_om, &fin, 1.0).unwrap() > v0);
        let windier = flat_plant("w", 0.5, 50);
        assert!(lcoe(&windier, &fin, 1.0).unwrap() < v0);
        let dead = flat_plant("w", 0.0, 50);
        assert!(lcoe(&dead, &fin, 1.0).is_err());
    }

    #[test]
    fn tail_mean_oracle_cases() {
        assert_relative_eq!(cvar_oracle(&[3.0; 17], 0.05), 3.0);
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_relative_eq!(cvar_oracle(&v, 0.05), 1.0);
        assert_relative_eq!(cvar_oracle(&v, 1.0), 10.5);
        // Fractional mass: q T = 2.5 over [1..5] -> (1 + 2 + 0.5 * 3) / 2.5.
        assert_relative_eq!(cvar_oracle(&[5.0, 1.0, 4.0, 2.0, 3.0], 0.5), 1.8);
        assert_relative_eq!(var_oracle(&v, 0.05), 1.0);
        assert_relative_eq!(var_oracle(&v, 0.10), 2.0);
    }

    #[test]
    fn structural_counts_per_kind() {
        let plants = synth::universe(2, 0, 240, 3);
        let cfg = ScenarioConfig::new(ScenarioKind::TradFlat);
        let data = ModelData {
            plants: &plants,
            demand: None,
            plan: None,
        };
        let prog = assemble(&cfg, &data, Some(0.2)).unwrap();
        assert_eq!(prog.n_vars(), 2);
        assert_eq!(prog.eq_rows.len(), 1);
        assert_eq!(prog.ineq_rows.len(), 0);
        assert!(prog.quad.as_ref().unwrap().bound.is_finite());

        let dg = synth::demand_gen(240, 5, 50.0);
        let cal = hourly_calendar(240);
        let plan = lhs_sample(&cal, 10, 1, &StrataSpec::default()).unwrap();
        let mut cfg = ScenarioConfig::new(ScenarioKind::CvarFlat);
        cfg.m_samples = 10;
        let data = ModelData {
            plants: &plants,
            demand: Some(&dg),
            plan: Some(&plan),
        };
        let prog = assemble(&cfg, &data, None).unwrap();
        assert_eq!(prog.n_vars(), 2 + 1 + 10);
        assert_eq!(prog.head_len, 3);
        assert_eq!(prog.eq_rows.len(), 0);
        assert_eq!(prog.ineq_rows.len(), 11, "one tail row plus one per sample");
        assert_eq!(prog.lower_bounds[2], None, "alpha is free");
    }

    #[test]
    fn assemble_rejects_missing_inputs() {
        let plants = synth::universe(2, 0, 120, 4);
        let no_demand = ModelData {
            plants: &plants,
            demand: None,
            plan: None,
        };
        for kind in [
            ScenarioKind::TradObs,
            ScenarioKind::CostObs,
            ScenarioKind::CvarFlat,
            ScenarioKind::CvarObs,
        ] {
            let cfg = ScenarioConfig::new(kind);
            assert!(
                matches!(assemble(&cfg, &no_demand, None), Err(Error::Config(_))),
                "{} should need more data",
                kind.name()
            );
        }
        let dg = synth::demand_gen(120, 9, 40.0);
        let cfg = ScenarioConfig::new(ScenarioKind::CvarObs);
        let no_plan = ModelData {
            plants: &plants,
            demand: Some(&dg),
            plan: None,
        };
        assert!(matches!(assemble(&cfg, &no_plan, None), Err(Error::Config(_))));
    }

    #[test]
    fn config_validation_bounds() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::CostFlat);
        cfg.beta = 1.5;
        assert!(cfg.validate().is_err());
        cfg.beta = 0.05;
        cfg.n_frontier_points = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn kind_names_roundtrip() {
        for kind in ScenarioKind::ALL {
            assert_eq!(kind.name().parse::<ScenarioKind>().unwrap(), kind);
        }
        assert!("Cvar_Fancy".parse::<ScenarioKind>().is_err());
    }

    #[test]
    fn cost_frontier_shape_and_monotonicity() {
        let plants = synth::universe(3, 0, 720, 21);
        let mut cfg = ScenarioConfig::new(ScenarioKind::CostFlat);
        cfg.n_frontier_points = 9;
        let data = ModelData {
            plants: &plants,
            demand: None,
            plan: None,
        };
        let frontier = frontier_sweep(&cfg, &data).unwrap();
        assert_eq!(frontier.points.len(), 9);
        let mut last_sigma = f64::NEG_INFINITY;
        let mut last_cost = f64::INFINITY;
        for p in &frontier.points {
            assert!(p.sigma_cap >= last_sigma);
            last_sigma = p.sigma_cap;
            assert_eq!(p.status, SolveStatus::Optimal, "point {}", p.index);
            assert!(p.capacities.iter().all(|&c| c >= 0.0));
            assert!(
                p.achieved_sd <= p.sigma_cap * (1.0 + 1e-6) + 1e-9,
                "point {}: sd {} cap {}",
                p.index,
                p.achieved_sd,
                p.sigma_cap
            );
            assert_relative_eq!(p.mean_output_mw, 1.0, epsilon = 1e-6);
            assert!(
                p.objective <= last_cost + 1e-6 * (1.0 + last_cost.abs()),
                "cost rose at point {}",
                p.index
            );
            last_cost = p.objective;
        }
    }

    #[test]
    fn trad_frontier_mean_nondecreasing() {
        let plants = synth::universe(3, 0, 720, 22);
        let mut cfg = ScenarioConfig::new(ScenarioKind::TradFlat);
        cfg.n_frontier_points = 7;
        let data = ModelData {
            plants: &plants,
            demand: None,
            plan: None,
        };
        let frontier = frontier_sweep(&cfg, &data).unwrap();
        let mut last = f64::NEG_INFINITY;
        for p in &frontier.points {
            assert_eq!(p.status, SolveStatus::Optimal);
            assert_relative_eq!(p.installed_mw, 1.0, epsilon = 1e-6);
            assert!(
                p.objective >= last - 1e-6 * (1.0 + last.abs()),
                "mean fell at point {}",
                p.index
            );
            last = p.objective;
        }
    }

    #[test]
    fn single_plant_frontier_degenerates() {
        let plants = synth::universe(1, 0, 480, 8);
        let mut cfg = ScenarioConfig::new(ScenarioKind::CostFlat);
        cfg.n_frontier_points = 5;
        let data = ModelData {
            plants: &plants,
            demand: None,
            plan: None,
        };
        let frontier = frontier_sweep(&cfg, &data).unwrap();
        assert_eq!(frontier.points.len(), 5);
        assert_relative_eq!(frontier.sigma_lo, frontier.sigma_hi);
        for p in &frontier.points {
            assert_relative_eq!(p.sigma_cap, frontier.sigma_lo);
            assert_relative_eq!(
                p.capacities[0],
                frontier.points[0].capacities[0],
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn two_point_frontier_is_exactly_the_endpoints() {
        let plants = synth::universe(3, 0, 480, 31);
        let mut cfg = ScenarioConfig::new(ScenarioKind::CostFlat);
        cfg.n_frontier_points = 2;
        let data = ModelData {
            plants: &plants,
            demand: None,
            plan: None,
        };
        let frontier = frontier_sweep(&cfg, &data).unwrap();
        assert_eq!(frontier.points.len(), 2);
        assert_relative_eq!(frontier.points[0].sigma_cap, frontier.sigma_lo);
        assert_relative_eq!(frontier.points[1].sigma_cap, frontier.sigma_hi);
        assert!(
            frontier.points[0].achieved_sd <= frontier.sigma_lo * (1.0 + 1e-6) + 1e-12
        );
        // The high end should recover the unconstrained cost optimum: all
        // generation from the cheapest effective plant.
        let built = build(&cfg, &data).unwrap();
        let hi = crate::solver::unconstrained_sd_endpoint(&built.program).unwrap();
        assert_relative_eq!(
            frontier.points[1].objective,
            hi.objective,
            epsilon = 1e-5
        );
    }

    #[test]
    fn cost_obs_with_flat_demand_equals_cost_flat() {
        let plants = synth::universe(2, 1, 720, 41);
        let dg = synth::demand_gen(720, 42, 80.0);
        let flat = dg.flattened();
        let mut cfg_obs = ScenarioConfig::new(ScenarioKind::CostObs);
        cfg_obs.n_frontier_points = 7;
        let mut cfg_flat = ScenarioConfig::new(ScenarioKind::CostFlat);
        cfg_flat.n_frontier_points = 7;

        let obs = frontier_sweep(
            &cfg_obs,
            &ModelData {
                plants: &plants,
                demand: Some(&flat),
                plan: None,
            },
        )
        .unwrap();
        let plain = frontier_sweep(
            &cfg_flat,
            &ModelData {
                plants: &plants,
                demand: Some(&dg),
                plan: None,
            },
        )
        .unwrap();

        for (a, b) in obs.points.iter().zip(&plain.points) {
            assert_eq!(a.status, SolveStatus::Optimal);
            assert_eq!(b.status, SolveStatus::Optimal);
            for (wa, wb) in a.generation_shares.iter().zip(&b.generation_shares) {
                assert!(
                    (wa - wb).abs() < 1e-5,
                    "point {}: share {} vs {}",
                    a.index,
                    wa,
                    wb
                );
            }
        }
    }

    #[test]
    fn cvar_points_respect_the_tail_floor_and_alpha_tracks_var() {
        let hours = 1440;
        let plants = synth::universe(3, 0, hours, 51);
        let dg = synth::demand_gen(hours, 52, 60.0);
        let cal = hourly_calendar(hours);
        let plan = lhs_sample(&cal, 240, 7, &StrataSpec::default()).unwrap();
        let mut cfg = ScenarioConfig::new(ScenarioKind::CvarFlat);
        cfg.n_frontier_points = 5;
        cfg.m_samples = 240;
        let data = ModelData {
            plants: &plants,
            demand: Some(&dg),
            plan: Some(&plan),
        };
        let frontier = frontier_sweep(&cfg, &data).unwrap();
        let flat = dg.flattened();
        let mean_l = flat.mean_demand_mw();
        let mut checked = 0;
        for p in frontier.optimal_points() {
            // Rebuild the sampled balance this point was constrained on.
            let balance: Vec<f64> = plan
                .indices
                .iter()
                .map(|&t| {
                    let g: f64 = p
                        .capacities
                        .iter()
                        .zip(&plants)
                        .map(|(cap, pl)| cap * pl.output[t])
                        .sum();
                    g + flat.output[t] * flat.capacity_mw
                })
                .collect();
            let tail = cvar_oracle(&balance, cfg.beta);
            assert!(
                tail >= cfg.omega - 1e-6 * mean_l,
                "point {}: tail mean {tail}",
                p.index
            );
            // alpha within one order statistic of the empirical VaR.
            let mut sorted = balance.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let k = (cfg.beta * sorted.len() as f64).ceil() as usize;
            let alpha = p.alpha.expect("cvar point carries alpha");
            let lo = sorted[k.saturating_sub(2)];
            let hi = sorted[(k).min(sorted.len() - 1)];
            assert!(
                alpha >= lo - 1e-6 * mean_l && alpha <= hi + 1e-6 * mean_l,
                "point {}: alpha {alpha} outside [{lo}, {hi}]",
                p.index
            );
            checked += 1;
        }
        assert!(checked >= 3, "only {checked} optimal points");
    }

    #[test]
    fn equal_cost_endpoint_is_the_best_cf_plant() {
        let mut plants = synth::universe(3, 0, 480, 61);
        for p in &mut plants {
            p.invest_cost_per_kw = 4000.0;
            p.om_cost_per_kw_year = 80.0;
        }
        let cfg = ScenarioConfig::new(ScenarioKind::CostFlat);
        let data = ModelData {
            plants: &plants,
            demand: None,
            plan: None,
        };
        let built = build(&cfg, &data).unwrap();
        let hi = crate::solver::unconstrained_sd_endpoint(&built.program).unwrap();
        // With equal annualized costs the cost objective reduces to
        // installed capacity, so everything lands on the highest CF.
        let best = (0..3)
            .max_by(|&a, &b| built.mu[a].partial_cmp(&built.mu[b]).unwrap())
            .unwrap();
        for i in 0..3 {
            if i == best {
                assert!(hi.x[i] > 0.0);
            } else {
                assert_relative_eq!(hi.x[i], 0.0);
            }
        }
    }

    #[test]
    fn frontier_csv_layout() {
        let plants = synth::universe(2, 0, 240, 71);
        let mut cfg = ScenarioConfig::new(ScenarioKind::CostFlat);
        cfg.n_frontier_points = 3;
        let data = ModelData {
            plants: &plants,
            demand: None,
            plan: None,
        };
        let frontier = frontier_sweep(&cfg, &data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let fpath = dir.path().join("frontier.csv");
        let wpath = dir.path().join("weights.csv");
        write_frontier_csv(&fpath, &frontier).unwrap();
        write_weights_csv(&wpath, &frontier).unwrap();
        let text = std::fs::read_to_string(&fpath).unwrap();
        assert!(text.starts_with(
            "sigma_cap,achieved_sd_per_cap,cf,cost_per_mwh,installed_mw,mean_output_mw,status"
        ));
        assert_eq!(text.lines().count(), 4);
        let wtext = std::fs::read_to_string(&wpath).unwrap();
        assert!(wtext.starts_with("point_index,plant_id,capacity_mw,share"));
        assert_eq!(wtext.lines().count(), 1 + 3 * 2);
    }
}
