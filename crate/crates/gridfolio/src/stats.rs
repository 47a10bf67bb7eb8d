//! Series statistics: capacity factors, covariance and correlation,
//! great-circle distances.
//!
//! Covariances default to the population convention (divide by `T`); the
//! sample convention is available behind a flag so results can be checked
//! against tools that divide by `T - 1`. Hourly series are long enough
//! that the two are interchangeable in practice, but the choice is pinned
//! so runs are reproducible.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::ingest::{DemandGen, PlantSeries};

/// Mean earth radius in kilometres, used by [`geo_distance`].
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Label given to the demand pseudo-generator row/column in covariance
/// matrices.
pub const DEMAND_LABEL: &str = "demand";

/// Mean of a per-unit output series.
///
/// For a plant series this is the capacity factor. Errors on an empty
/// series.
pub fn capacity_factor(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Validation("capacity factor of empty series".into()));
    }
    Ok(series.iter().sum::<f64>() / series.len() as f64)
}

fn mean(series: &[f64]) -> f64 {
    series.iter().sum::<f64>() / series.len() as f64
}

/// Covariance of two equally long series.
///
/// `population` selects the 1/T convention, otherwise 1/(T-1) is used.
pub fn covariance(a: &[f64], b: &[f64], population: bool) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Validation(format!(
            "covariance needs equal non-empty series, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, mb) = (mean(a), mean(b));
    let cross: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let denom = if population { a.len() } else { a.len() - 1 };
    if denom == 0 {
        return Err(Error::Validation("sample covariance of a single point".into()));
    }
    Ok(cross / denom as f64)
}

/// Pearson correlation coefficient of two equally long series.
///
/// Errors with [`Error::DegenerateSeries`] when either series has zero
/// variance: the coefficient is undefined there and silently returning 0
/// or 1 has burned us before.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let cov = covariance(a, b, true)?;
    let va = covariance(a, a, true)?;
    let vb = covariance(b, b, true)?;
    if va <= 0.0 || vb <= 0.0 {
        return Err(Error::DegenerateSeries(
            "pearson correlation of a constant series".into(),
        ));
    }
    Ok(cov / (va * vb).sqrt())
}

/// Labelled covariance matrix over plant per-unit outputs, optionally
/// extended with the demand pseudo-generator as the last row/column.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    /// Plant ids in matrix order; the demand entry, when present, is last
    /// and labelled [`DEMAND_LABEL`].
    pub labels: Vec<String>,
    pub matrix: DMatrix<f64>,
}

impl CovMatrix {
    /// Number of rows/columns.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Whether the last row/column is the demand pseudo-generator.
    pub fn has_demand(&self) -> bool {
        self.labels.last().map(|l| l == DEMAND_LABEL).unwrap_or(false)
    }

    /// Symmetry and positive semi-definiteness checks.
    ///
    /// Symmetry is required to 1e-12 absolute; the matrix counts as PSD
    /// when the smallest eigenvalue is at least `-1e-8` times the largest.
    pub fn check(&self) -> Result<()> {
        let m = &self.matrix;
        if m.nrows() != m.ncols() || m.nrows() != self.labels.len() {
            return Err(Error::Validation("covariance matrix shape mismatch".into()));
        }
        for i in 0..m.nrows() {
            if m[(i, i)] < 0.0 {
                return Err(Error::Validation(format!(
                    "negative variance for {}",
                    self.labels[i]
                )));
            }
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Validation(format!(
                        "covariance asymmetry at ({}, {})",
                        self.labels[i], self.labels[j]
                    )));
                }
            }
        }
        let eig = SymmetricEigen::new(m.clone());
        let max_eig = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-8 * max_eig.max(1e-30) {
            return Err(Error::Validation(format!(
                "covariance matrix not PSD: min eigenvalue {min_eig:.3e}, max {max_eig:.3e}"
            )));
        }
        Ok(())
    }

    /// Portfolio variance `x' C x` for a capacity vector in label order.
    pub fn portfolio_variance(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        assert_eq!(x.len(), n, "weight vector length mismatch");
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += x[i] * x[j] * self.matrix[(i, j)];
            }
        }
        acc
    }
}

/// Covariance matrix of plant outputs, with the demand pseudo-generator
/// appended as the last row/column when given.
///
/// All series must share one length. The result is validated with
/// [`CovMatrix::check`] before being returned.
pub fn covariance_matrix(
    plants: &[PlantSeries],
    demand: Option<&DemandGen>,
    population: bool,
) -> Result<CovMatrix> {
    if plants.is_empty() {
        return Err(Error::Validation("covariance matrix of zero plants".into()));
    }
    let t = plants[0].output.len();
    let mut series: Vec<&[f64]> = Vec::with_capacity(plants.len() + 1);
    let mut labels = Vec::with_capacity(plants.len() + 1);
    for p in plants {
        if p.output.len() != t {
            return Err(Error::Dataset(format!(
                "plant {} has {} steps, expected {}",
                p.id,
                p.output.len(),
                t
            )));
        }
        series.push(&p.output);
        labels.push(p.id.clone());
    }
    if let Some(d) = demand {
        if d.output.len() != t {
            return Err(Error::Dataset(format!(
                "demand has {} steps, expected {}",
                d.output.len(),
                t
            )));
        }
        series.push(&d.output);
        labels.push(DEMAND_LABEL.to_string());
    }

    let n = series.len();
    let means: Vec<f64> = series.iter().map(|s| mean(s)).collect();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = 0.0;
            for k in 0..t {
                acc += (series[i][k] - means[i]) * (series[j][k] - means[j]);
            }
            let denom = if population { t } else { t - 1 };
            if denom == 0 {
                return Err(Error::Validation("sample covariance of a single point".into()));
            }
            let c = acc / denom as f64;
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    let cov = CovMatrix { labels, matrix: m };
    cov.check()?;
    Ok(cov)
}

/// Great-circle distance between two points in kilometres (haversine).
pub fn geo_distance(lat_a: f64, lon_a: f64, lat_b: f64, lon_b: f64) -> f64 {
    let (la, lb) = (lat_a.to_radians(), lat_b.to_radians());
    let dlat = (lat_b - lat_a).to_radians();
    let dlon = (lon_b - lon_a).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + la.cos() * lb.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// One row of the pairwise correlation/distance table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CorrelationRow {
    pub id_a: String,
    pub id_b: String,
    pub pearson: f64,
    pub km: f64,
}

/// Pairwise Pearson correlation and great-circle distance for every
/// unordered plant pair, in id order.
pub fn correlation_table(plants: &[PlantSeries]) -> Result<Vec<CorrelationRow>> {
    let mut rows = Vec::new();
    for i in 0..plants.len() {
        for j in (i + 1)..plants.len() {
            let (a, b) = (&plants[i], &plants[j]);
            rows.push(CorrelationRow {
                id_a: a.id.clone(),
                id_b: b.id.clone(),
                pearson: pearson(&a.output, &b.output)?,
                km: geo_distance(a.latitude, a.longitude, b.latitude, b.longitude),
            });
        }
    }
    Ok(rows)
}

/// Write the pairwise correlation table as `id_a,id_b,pearson,km`.
pub fn write_correlation_csv(path: &std::path::Path, plants: &[PlantSeries]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in correlation_table(plants)? {
        w.serialize(&row)?;
    }
    w.flush()?;
    Ok(())
}
