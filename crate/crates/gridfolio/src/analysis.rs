//! Portfolio post-processing.
//!
//! Everything here evaluates solved portfolios rather than solving
//! anything new: Sharpe/CV ratios, diversification indices, same-risk
//! capacity scaling against the full time series, balance-distribution
//! summaries, and the capacity-vs-generation frontier comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DemandGen, PlantSeries};
use crate::models::{
    cvar_oracle, lcoe, var_oracle, Frontier, FrontierPoint, ScenarioConfig,
};
use crate::stats;

/// Shares below this are solver noise and are excluded from the
/// share-quadratic diversity sums, where they contribute O(1e-12).
const SHARE_FLOOR: f64 = 1e-6;

/// Coefficient of variation: per-capacity balance SD over capacity
/// factor. Both terms are per unit of installed capacity, so the ratio is
/// scale-free and frontiers with different normalizations compare
/// directly; it also equals the balance SD per unit of mean generation.
pub fn cv_ratio(point: &FrontierPoint) -> Result<f64> {
    if !(point.cf > 0.0) {
        return Err(Error::DegeneratePortfolio(format!(
            "point {} has capacity factor {}, CV undefined",
            point.index, point.cf
        )));
    }
    Ok(point.sd_per_capacity / point.cf)
}

/// Inverse of [`cv_ratio`]: capacity factor per unit of SD. Infinite for
/// a variance-free portfolio.
pub fn sharpe_ratio(point: &FrontierPoint) -> f64 {
    point.cf / point.sd_per_capacity
}

/// Index of the min-CV portfolio among a frontier's optimal points.
pub fn min_cv_index(frontier: &Frontier) -> Option<usize> {
    frontier
        .optimal_points()
        .filter_map(|p| cv_ratio(p).ok().map(|cv| (p.index, cv)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("non-finite CV"))
        .map(|(i, _)| i)
}

/// Diversification indices of one portfolio, all weighted by generation
/// shares: mean geographic distance between plants, mean Euclidean
/// distance between output profiles, and the Herfindahl-Hirschman
/// concentration index with its inverse (the effective plant count).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub gd_km: f64,
    pub ed: f64,
    pub hhi: f64,
    pub inv_hhi: f64,
}

/// Compute the diversity indices for generation shares aligned with
/// `plants`. Both double sums run over all active pairs as written,
/// including `i = j` (those terms are zero since self-distances vanish).
pub fn diversity(shares: &[f64], plants: &[PlantSeries]) -> Result<DiversityReport> {
    if shares.len() != plants.len() {
        return Err(Error::Validation(format!(
            "{} shares for {} plants",
            shares.len(),
            plants.len()
        )));
    }
    let active: Vec<usize> = (0..shares.len())
        .filter(|&i| shares[i] >= SHARE_FLOOR)
        .collect();
    if active.is_empty() {
        return Err(Error::DegeneratePortfolio(
            "no plant holds a positive generation share".into(),
        ));
    }

    let hhi: f64 = active.iter().map(|&i| shares[i] * shares[i]).sum();
    let mut gd = 0.0;
    let mut ed = 0.0;
    for &i in &active {
        for &j in &active {
            let w = shares[i] * shares[j];
            gd += w * stats::geo_distance(
                plants[i].latitude,
                plants[i].longitude,
                plants[j].latitude,
                plants[j].longitude,
            );
            ed += w * profile_distance(&plants[i].output, &plants[j].output);
        }
    }
    Ok(DiversityReport {
        gd_km: gd,
        ed,
        hhi,
        inv_hhi: 1.0 / hhi,
    })
}

/// Euclidean distance between two per-unit output profiles.
fn profile_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Result of scaling a portfolio to its risk-adequate size: the capacity
/// multiplier, the resulting installed capacity, cost per MWh of demand
/// served, and the tail statistics of the scaled balance.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RiskReport {
    pub scale_factor: f64,
    pub installed_after: f64,
    pub cost_per_demand_mwh: f64,
    pub var_q: f64,
    pub cvar_q: f64,
    /// Mean balance surplus as a fraction of mean demand.
    pub mean_excess_fraction: f64,
}

/// Scale all capacities by a common factor until the lower-tail mean of
/// the full-series balance hits the floor `scenario.omega`, keeping plant
/// proportions unchanged.
///
/// The balance is pointwise increasing in the scale, so bisection
/// applies. The search starts on `[0, 2 mean(L) / mean(G)]` and doubles
/// the upper bound until it brackets; portfolios whose tail hours never
/// produce (so no finite scale reaches the floor) error out once the
/// bound passes 1e6.
pub fn normalize_to_risk(
    capacities: &[f64],
    plants: &[PlantSeries],
    demand: &DemandGen,
    scenario: &ScenarioConfig,
) -> Result<RiskReport> {
    let q = scenario.beta;
    let omega = scenario.omega;
    let gen = unit_generation(capacities, plants, demand.output.len())?;
    let load = demand.demand_mw();
    let mean_l = demand.mean_demand_mw();
    if !(mean_l > 0.0) {
        return Err(Error::Validation("mean demand is not positive".into()));
    }
    let mean_g = gen.iter().sum::<f64>() / gen.len() as f64;
    if !(mean_g > 0.0) {
        return Err(Error::DegeneratePortfolio(
            "portfolio mean output is zero, no scale can serve demand".into(),
        ));
    }

    let tail = |s: f64| -> f64 {
        let balance: Vec<f64> = gen.iter().zip(&load).map(|(g, l)| s * g - l).collect();
        cvar_oracle(&balance, q)
    };
    let tol = 2.5e-5 * mean_l;

    let scale = if tail(0.0) >= omega {
        0.0
    } else {
        let mut hi = 2.0 * mean_l / mean_g;
        const S_MAX: f64 = 1e6;
        while tail(hi) < omega {
            hi *= 2.0;
            if hi > S_MAX {
                return Err(Error::InfeasibleRisk(format!(
                    "no capacity scale below {S_MAX:.0e} lifts the {:.1}% tail \
                     mean to {omega}; the portfolio's worst hours never produce",
                    100.0 * q
                )));
            }
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let f = tail(mid) - omega;
            if f.abs() <= tol {
                hi = mid;
                break;
            }
            if f < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // Settle on the feasible side of whatever bracket remains.
        hi
    };

    let balance: Vec<f64> = gen
        .iter()
        .zip(&load)
        .map(|(g, l)| scale * g - l)
        .collect();
    let cost_rate: f64 = capacities
        .iter()
        .zip(plants)
        .map(|(&cap, p)| {
            let mu = stats::capacity_factor(&p.output)?;
            Ok(scale * cap * mu * lcoe(p, &scenario.finance, scenario.pv_cost_multiplier)?)
        })
        .sum::<Result<f64>>()?;
    Ok(RiskReport {
        scale_factor: scale,
        installed_after: scale * capacities.iter().sum::<f64>(),
        cost_per_demand_mwh: cost_rate / mean_l,
        var_q: var_oracle(&balance, q),
        cvar_q: cvar_oracle(&balance, q),
        mean_excess_fraction: balance.iter().sum::<f64>() / balance.len() as f64 / mean_l,
    })
}

/// Distribution summary of the energy balance relative to mean demand,
/// all values in percent.
#[derive(Debug, Clone, Serialize)]
pub struct BalanceStats {
    pub mean_excess_pct: f64,
    pub sd_pct: f64,
    pub min_pct: f64,
    pub max_pct: f64,
    /// Lower-tail quantile at the requested fraction (the VaR marker).
    pub var_q_pct: f64,
    /// Requested (fraction, value) quantile pairs.
    pub quantiles: Vec<(f64, f64)>,
}

/// Summarize `(G_t - L_t) / mean(L)` for a portfolio at its given size.
/// Quantiles use the same order-statistic convention as [`var_oracle`].
pub fn balance_stats(
    capacities: &[f64],
    plants: &[PlantSeries],
    demand: &DemandGen,
    q: f64,
    quantiles: &[f64],
) -> Result<BalanceStats> {
    let gen = unit_generation(capacities, plants, demand.output.len())?;
    let load = demand.demand_mw();
    let mean_l = demand.mean_demand_mw();
    if !(mean_l > 0.0) {
        return Err(Error::Validation("mean demand is not positive".into()));
    }
    let pct: Vec<f64> = gen
        .iter()
        .zip(&load)
        .map(|(g, l)| (g - l) / mean_l * 100.0)
        .collect();
    let n = pct.len() as f64;
    let mean = pct.iter().sum::<f64>() / n;
    let var = pct.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut sorted = pct.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite balance"));
    Ok(BalanceStats {
        mean_excess_pct: mean,
        sd_pct: var.sqrt(),
        min_pct: sorted[0],
        max_pct: sorted[sorted.len() - 1],
        var_q_pct: var_oracle(&pct, q),
        quantiles: quantiles
            .iter()
            .map(|&f| (f, var_oracle(&pct, f)))
            .collect(),
    })
}

fn unit_generation(
    capacities: &[f64],
    plants: &[PlantSeries],
    expect_len: usize,
) -> Result<Vec<f64>> {
    if capacities.len() != plants.len() {
        return Err(Error::Validation(format!(
            "{} capacities for {} plants",
            capacities.len(),
            plants.len()
        )));
    }
    for p in plants {
        if p.output.len() != expect_len {
            return Err(Error::Validation(format!(
                "plant {} has {} steps, demand has {}",
                p.id,
                p.output.len(),
                expect_len
            )));
        }
    }
    let mut gen = vec![0.0; expect_len];
    for (cap, p) in capacities.iter().zip(plants) {
        for (g, y) in gen.iter_mut().zip(&p.output) {
            *g += cap * y;
        }
    }
    Ok(gen)
}

/// Outcome of comparing a capacity-normalized frontier against a
/// generation-normalized one on the shared scale-free SD axis (the CV).
#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    /// Index of the min-CV point on the capacity frontier.
    pub min_cv_index: usize,
    pub min_cv: f64,
    /// Minimum converted SD over the generation frontier's points.
    pub min_converted_sd: f64,
    /// Whether the min-CV portfolio attains that minimum within tolerance.
    pub min_cv_shared: bool,
    /// Capacity-frontier points on the low-SD branch (SD strictly below
    /// the min-CV point's): dominated after conversion, carrying higher
    /// converted SD with no better capacity factor.
    pub dominated: Vec<usize>,
}

/// Compare a capacity-fixed frontier with a generation-fixed one.
///
/// Converting any portfolio's SD to the generation normalization divides
/// it by mean output, which equals CV up to the fixed normalization
/// level. Hence the min-CV point of the capacity frontier should attain
/// the generation frontier's minimal converted SD, and every
/// capacity-frontier point on the low-SD branch (SD below the min-CV
/// point's, hence lower CF and higher CV) is dominated there.
pub fn domination_report(
    capacity_frontier: &Frontier,
    generation_frontier: &Frontier,
    tol_rel: f64,
) -> Result<DominationReport> {
    if capacity_frontier.plant_ids != generation_frontier.plant_ids {
        return Err(Error::Config(
            "frontiers were solved on different plant universes".into(),
        ));
    }
    let cvs: Vec<(usize, f64, f64)> = capacity_frontier
        .optimal_points()
        .filter_map(|p| cv_ratio(p).ok().map(|cv| (p.index, cv, p.cf)))
        .collect();
    let (min_cv_index, min_cv, cf_at_min) = cvs
        .iter()
        .copied()
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("non-finite CV"))
        .ok_or_else(|| {
            Error::DegeneratePortfolio("capacity frontier has no usable points".into())
        })?;
    let min_converted_sd = generation_frontier
        .optimal_points()
        .filter_map(|p| cv_ratio(p).ok())
        .min_by(|a, b| a.partial_cmp(b).expect("non-finite CV"))
        .ok_or_else(|| {
            Error::DegeneratePortfolio("generation frontier has no usable points".into())
        })?;

    // The low-SD branch: every optimal point strictly below the min-CV
    // point's SD. Those are dominated after conversion, which the CV and
    // CF guards double-check (both hold up to solver noise by
    // construction: cv is the argmin and mean output is monotone in the
    // SD cap). The branch test uses a fixed solver-noise margin so grid
    // spacing, not `tol_rel`, decides membership.
    const SD_MARGIN: f64 = 1e-7;
    let sd_cv = capacity_frontier.points[min_cv_index].achieved_sd;
    let dominated: Vec<usize> = cvs
        .iter()
        .filter(|&&(i, cv, cf)| {
            capacity_frontier.points[i].achieved_sd < sd_cv * (1.0 - SD_MARGIN)
                && cv >= min_cv
                && cf <= cf_at_min * (1.0 + tol_rel)
        })
        .map(|&(i, _, _)| i)
        .collect();

    Ok(DominationReport {
        min_cv_index,
        min_cv,
        min_converted_sd,
        min_cv_shared: (min_cv - min_converted_sd).abs()
            <= tol_rel * min_cv.abs().max(min_converted_sd.abs()),
        dominated,
    })
}

/// Per-point analysis CSV:
/// `point_index,cv,sharpe,gd_km,ed,hhi,inv_hhi,scale_factor,cost_per_demand_mwh,var_q_mw,cvar_q_mw,mean_excess_pct`.
///
/// Ratio and diversity columns come from the frontier itself; the risk
/// columns re-evaluate each portfolio against the full series and are NaN
/// when no demand series exists or the portfolio cannot reach the floor.
pub fn write_analysis_csv(
    path: &std::path::Path,
    frontier: &Frontier,
    plants: &[PlantSeries],
    demand: Option<&DemandGen>,
    scenario: &ScenarioConfig,
) -> Result<()> {
    let rows: Vec<[f64; 11]> = frontier
        .points
        .par_iter()
        .map(|p| {
            let cv = cv_ratio(p).unwrap_or(f64::NAN);
            let div = diversity(&p.generation_shares, plants).unwrap_or(DiversityReport {
                gd_km: f64::NAN,
                ed: f64::NAN,
                hhi: f64::NAN,
                inv_hhi: f64::NAN,
            });
            let risk = demand
                .and_then(|d| normalize_to_risk(&p.capacities, plants, d, scenario).ok());
            let (scale, cost, var_q, cvar_q, excess) = match risk {
                Some(r) => (
                    r.scale_factor,
                    r.cost_per_demand_mwh,
                    r.var_q,
                    r.cvar_q,
                    100.0 * r.mean_excess_fraction,
                ),
                None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN),
            };
            [
                cv,
                sharpe_ratio(p),
                div.gd_km,
                div.ed,
                div.hhi,
                div.inv_hhi,
                scale,
                cost,
                var_q,
                cvar_q,
                excess,
            ]
        })
        .collect();

    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "point_index",
        "cv",
        "sharpe",
        "gd_km",
        "ed",
        "hhi",
        "inv_hhi",
        "scale_factor",
        "cost_per_demand_mwh",
        "var_q_mw",
        "cvar_q_mw",
        "mean_excess_pct",
    ])?;
    for (p, row) in frontier.points.iter().zip(&rows) {
        let mut record = vec![p.index.to_string()];
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
