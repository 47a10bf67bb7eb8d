//! Deterministic convex solver for the portfolio programs.
//!
//! The model layer produces programs of one fixed shape: a linear
//! objective (minimization), linear equality and `>=` inequality rows,
//! per-variable lower bounds, and at most one convex quadratic constraint
//! `x'Qx + l'x <= bound` carrying the portfolio variance. The solver runs
//! a primal-dual interior-point method with a log barrier on every
//! inequality including the quadratic row, preceded by an elastic
//! phase-1 feasibility solve so that infeasible programs surface as a
//! status instead of a divergence.
//!
//! Variables split into a dense "head" (capacities, the CVaR offset) and
//! a sliced "tail" (one auxiliary per sampled hour in CVaR programs).
//! Tail variables may appear in any rows, but rows that touch at most one
//! tail variable keep the Newton system in arrow form, which is what
//! makes thousands of CVaR rows cheap. Everything is deterministic: no
//! randomness, fixed iteration order, ties at non-unique vertices broken
//! by the lowest variable index (variables are assembled in plant-id
//! order).

mod ipm;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use ipm::{IpmOptions, IpmProblem, RawStatus};

/// One sparse linear row `sum coeffs . x (op) rhs`; the operator is fixed
/// by which list the row lives in (`=` for equalities, `>=` otherwise).
#[derive(Debug, Clone)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        LinearRow { coeffs, rhs }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, v)| v * x[i]).sum()
    }
}

/// Convex quadratic constraint `x'Qx + l'x <= bound` over the head
/// variables. `Q` must be symmetric PSD. A non-finite bound keeps the
/// quadratic form available (for variance reporting and `min_variance`)
/// without constraining the solve.
#[derive(Debug, Clone)]
pub struct QuadConstraint {
    pub matrix: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub bound: f64,
}

/// Terminal state of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::MaxIter => "max_iter",
        }
    }
}

/// Scaled KKT residuals at the returned point.
#[derive(Debug, Clone, Copy)]
pub struct KktResiduals {
    /// Worst constraint violation, relative to each row's right-hand side.
    pub primal: f64,
    /// Stationarity residual, relative to the objective gradient scale.
    pub dual: f64,
    /// Duality gap estimate `s . lambda / (1 + |objective|)`.
    pub complementarity: f64,
}

/// Solver output.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    /// Objective in the sense of the call: the linear objective for
    /// [`solve`] and [`unconstrained_sd_endpoint`], the quadratic form
    /// value for [`min_variance`].
    pub objective: f64,
    pub status: SolveStatus,
    pub kkt: KktResiduals,
    pub iterations: usize,
}

impl Solution {
    /// Portfolio variance `x'Qx + l'x` under the program's quadratic form.
    pub fn quad_value(&self, p: &ConvexProgram) -> Option<f64> {
        p.quad_value(&self.x)
    }
}

/// A convex program in the solver's canonical (minimization) form.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    /// Variable names, for diagnostics and the LP dump.
    pub names: Vec<String>,
    /// Variables `[0, head_len)` may carry quadratic terms and appear in
    /// dense rows; the rest form the sliced tail (see module docs).
    pub head_len: usize,
    /// Linear objective coefficients, minimized.
    pub objective: Vec<f64>,
    pub eq_rows: Vec<LinearRow>,
    /// Rows `a . x >= rhs`.
    pub ineq_rows: Vec<LinearRow>,
    /// Per-variable lower bound, `None` for free variables.
    pub lower_bounds: Vec<Option<f64>>,
    pub quad: Option<QuadConstraint>,
}

impl ConvexProgram {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    /// Same program with the quadratic bound replaced, for sweeps.
    pub fn with_quad_bound(&self, bound: f64) -> ConvexProgram {
        let mut p = self.clone();
        if let Some(q) = p.quad.as_mut() {
            q.bound = bound;
        }
        p
    }

    /// Value of the quadratic form `x'Qx + l'x` at `x`.
    pub fn quad_value(&self, x: &[f64]) -> Option<f64> {
        let q = self.quad.as_ref()?;
        let h = self.head_len;
        let mut acc = 0.0;
        for i in 0..h {
            acc += q.linear[i] * x[i];
            for j in 0..h {
                acc += x[i] * q.matrix[(i, j)] * x[j];
            }
        }
        Some(acc)
    }

    /// Structural validation: index ranges, shape of the quadratic form,
    /// symmetry and positive semi-definiteness of `Q`.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.names.len() != n || self.lower_bounds.len() != n {
            return Err(Error::Validation(
                "program names/bounds length mismatch".into(),
            ));
        }
        if self.head_len > n {
            return Err(Error::Validation("head_len exceeds variable count".into()));
        }
        for row in self.eq_rows.iter().chain(&self.ineq_rows) {
            for &(i, v) in &row.coeffs {
                if i >= n {
                    return Err(Error::Validation(format!(
                        "row references variable {i} of {n}"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::Validation("non-finite row coefficient".into()));
                }
            }
        }
        if let Some(q) = &self.quad {
            let h = self.head_len;
            if q.matrix.nrows() != h || q.matrix.ncols() != h || q.linear.len() != h {
                return Err(Error::Validation(format!(
                    "quadratic form is {}x{}, head is {h}",
                    q.matrix.nrows(),
                    q.matrix.ncols()
                )));
            }
            for i in 0..h {
                for j in 0..i {
                    if (q.matrix[(i, j)] - q.matrix[(j, i)]).abs() > 1e-12 {
                        return Err(Error::Validation("quadratic form not symmetric".into()));
                    }
                }
            }
            if h > 0 {
                let eig = SymmetricEigen::new(q.matrix.clone());
                let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
                let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
                if min < -1e-8 * max.max(1e-30) {
                    return Err(Error::Validation(format!(
                        "quadratic form not PSD (eigenvalues {min:.3e}..{max:.3e})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Plain-text LP-style dump for eyeballing or feeding to an external
    /// solver.
    pub fn dump_lp(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let name = |i: usize| self.names[i].replace(' ', "_");
        out.push_str("Minimize\n obj:");
        for (i, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                write!(out, " {c:+} {}", name(i)).unwrap();
            }
        }
        out.push_str("\nSubject To\n");
        for (k, row) in self.eq_rows.iter().enumerate() {
            write!(out, " eq{k}:").unwrap();
            for &(i, v) in &row.coeffs {
                write!(out, " {v:+} {}", name(i)).unwrap();
            }
            writeln!(out, " = {}", row.rhs).unwrap();
        }
        for (k, row) in self.ineq_rows.iter().enumerate() {
            write!(out, " r{k}:").unwrap();
            for &(i, v) in &row.coeffs {
                write!(out, " {v:+} {}", name(i)).unwrap();
            }
            writeln!(out, " >= {}", row.rhs).unwrap();
        }
        if let Some(q) = &self.quad {
            if q.bound.is_finite() {
                out.push_str(" qc: [");
                for i in 0..self.head_len {
                    for j in i..self.head_len {
                        let v = if i == j {
                            q.matrix[(i, i)]
                        } else {
                            2.0 * q.matrix[(i, j)]
                        };
                        if v != 0.0 {
                            if i == j {
                                write!(out, " {v:+} {} ^2", name(i)).unwrap();
                            } else {
                                write!(out, " {v:+} {} * {}", name(i), name(j)).unwrap();
                            }
                        }
                    }
                }
                out.push_str(" ]");
                for i in 0..self.head_len {
                    if q.linear[i] != 0.0 {
                        write!(out, " {:+} {}", q.linear[i], name(i)).unwrap();
                    }
                }
                writeln!(out, " <= {}", q.bound).unwrap();
            }
        }
        out.push_str("Bounds\n");
        for (i, lb) in self.lower_bounds.iter().enumerate() {
            match lb {
                Some(lo) => writeln!(out, " {} >= {lo}", name(i)).unwrap(),
                None => writeln!(out, " {} free", name(i)).unwrap(),
            }
        }
        out.push_str("End\n");
        out
    }

    fn rhs_scale(&self) -> f64 {
        let mut s = 0.0f64;
        for row in self.eq_rows.iter().chain(&self.ineq_rows) {
            s = s.max(row.rhs.abs());
        }
        for lb in self.lower_bounds.iter().flatten() {
            s = s.max(lb.abs());
        }
        if let Some(q) = &self.quad {
            if q.bound.is_finite() {
                s = s.max(q.bound.abs());
            }
        }
        s
    }
}

/// Minimize the linear objective subject to all constraints, including
/// the quadratic bound when finite.
pub fn solve(p: &ConvexProgram) -> Result<Solution> {
    p.validate()?;
    let quad_active = p.quad.as_ref().map(|q| q.bound.is_finite()).unwrap_or(false);
    let prob = lower(p, false, quad_active);
    Ok(drive(p, prob))
}

/// Minimize the quadratic form `x'Qx + l'x` subject to the program's
/// linear constraints, ignoring both the linear objective and the
/// quadratic bound. Used for the low-risk end of a frontier; the reported
/// objective is the form's value.
pub fn min_variance(p: &ConvexProgram) -> Result<Solution> {
    p.validate()?;
    if p.quad.is_none() {
        return Err(Error::Validation(
            "min_variance needs a program with a quadratic form".into(),
        ));
    }
    let prob = lower(p, true, false);
    Ok(drive(p, prob))
}

/// Minimize the linear objective with the quadratic constraint dropped,
/// for the high-risk end of a frontier.
///
/// Programs that are a single equality over nonnegative variables (the
/// no-demand portfolio models) are solved exactly at a vertex, with ties
/// resolved toward the lowest variable index; anything else goes through
/// the interior-point path.
pub fn unconstrained_sd_endpoint(p: &ConvexProgram) -> Result<Solution> {
    p.validate()?;
    if let Some(sol) = vertex_solve(p) {
        return Ok(sol);
    }
    let prob = lower(p, false, false);
    Ok(drive(p, prob))
}

/// Closed-form vertex solve for `min c.x : a.x = b, x >= 0`.
fn vertex_solve(p: &ConvexProgram) -> Option<Solution> {
    if !p.ineq_rows.is_empty() || p.eq_rows.len() != 1 {
        return None;
    }
    if p.lower_bounds.iter().any(|lb| *lb != Some(0.0)) {
        return None;
    }
    let row = &p.eq_rows[0];
    let n = p.n_vars();
    let b = row.rhs;
    if b == 0.0 {
        return Some(optimal_point(vec![0.0; n], 0.0));
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for &(i, a) in &row.coeffs {
        if a == 0.0 {
            continue;
        }
        let xi = b / a;
        if xi < 0.0 {
            continue;
        }
        let obj = p.objective[i] * xi;
        let better = match best {
            None => true,
            Some((bi, _, bobj)) => obj < bobj || (obj == bobj && i < bi),
        };
        if better {
            best = Some((i, xi, obj));
        }
    }
    let (i, xi, obj) = best?;
    let mut x = vec![0.0; n];
    x[i] = xi;
    Some(optimal_point(x, obj))
}

fn optimal_point(x: Vec<f64>, objective: f64) -> Solution {
    Solution {
        x,
        objective,
        status: SolveStatus::Optimal,
        kkt: KktResiduals {
            primal: 0.0,
            dual: 0.0,
            complementarity: 0.0,
        },
        iterations: 0,
    }
}

/// Translate the public program into the engine's form. `quad_objective`
/// switches the objective to the quadratic form; `quad_active` keeps the
/// quadratic row as a constraint.
fn lower(p: &ConvexProgram, quad_objective: bool, quad_active: bool) -> IpmProblem {
    let n = p.n_vars();
    let mut c = DVector::zeros(n);
    let mut h = None;
    if quad_objective {
        let q = p.quad.as_ref().unwrap();
        for i in 0..p.head_len {
            c[i] = q.linear[i];
        }
        h = Some(2.0 * &q.matrix);
    } else {
        for i in 0..n {
            c[i] = p.objective[i];
        }
    }
    let eq = p
        .eq_rows
        .iter()
        .map(|r| (r.coeffs.clone(), r.rhs))
        .collect();
    let lin = p
        .ineq_rows
        .iter()
        .map(|r| (r.coeffs.clone(), r.rhs))
        .collect();
    let bounds = p
        .lower_bounds
        .iter()
        .enumerate()
        .filter_map(|(i, lb)| lb.map(|lo| (i, lo)))
        .collect();
    let quad = if quad_active {
        p.quad
            .as_ref()
            .map(|q| (q.matrix.clone(), q.linear.clone(), q.bound))
    } else {
        None
    };
    IpmProblem {
        n,
        head: p.head_len,
        c,
        h,
        eq,
        lin,
        bounds,
        quad,
    }
}

/// Phase-1 then main solve, with status packaging.
fn drive(p: &ConvexProgram, prob: IpmProblem) -> Solution {
    let feas_tol = 1e-6 * (1.0 + p.rhs_scale());

    let start = match ipm::phase1(&prob, &IpmOptions::default()) {
        ipm::Phase1::Feasible(x0) => Some(x0),
        ipm::Phase1::Infeasible(excess) => {
            return Solution {
                x: vec![0.0; prob.n],
                objective: f64::NAN,
                status: SolveStatus::Infeasible,
                kkt: KktResiduals {
                    primal: excess,
                    dual: f64::NAN,
                    complementarity: f64::NAN,
                },
                iterations: 0,
            }
        }
        ipm::Phase1::Unknown => None,
    };

    // Walk the escalation ladder: most solves converge under the first
    // profile, and the occasional stalled point gets retried with
    // stronger curvature handling or forced short steps. Keep the best
    // outcome seen in case nothing reaches full tolerance.
    let mut out: Option<(ipm::IpmOutcome, f64)> = None;
    let mut iterations = 0usize;
    for opts in IpmOptions::profiles() {
        let attempt = ipm::run(&prob, start.clone(), &opts);
        iterations += attempt.iterations;
        let merit = attempt.primal_res.max(attempt.dual_res).max(attempt.comp);
        let done = matches!(
            attempt.status,
            RawStatus::Converged | RawStatus::Acceptable | RawStatus::Diverged
        );
        if out.as_ref().map(|(_, m)| merit < *m).unwrap_or(true) {
            out = Some((attempt, merit));
        }
        if done {
            break;
        }
    }
    let (mut out, merit) = out.expect("at least one profile ran");
    out.iterations = iterations;

    let objective = if prob.h.is_some() {
        // Quadratic-form objective: report x'Qx + l'x.
        prob.objective(&out.x)
    } else {
        prob.c.dot(&out.x)
    };
    let status = match out.status {
        RawStatus::Converged | RawStatus::Acceptable => SolveStatus::Optimal,
        RawStatus::Diverged => SolveStatus::Unbounded,
        RawStatus::IterLimit => {
            if merit <= IpmOptions::default().tol_accept && out.primal_res <= feas_tol {
                SolveStatus::Optimal
            } else {
                SolveStatus::MaxIter
            }
        }
    };
    Solution {
        x: out.x.iter().cloned().collect(),
        objective,
        status,
        kkt: KktResiduals {
            primal: out.primal_res,
            dual: out.dual_res,
            complementarity: out.comp,
        },
        iterations: out.iterations,
    }
}

#[cfg(test)]
mod tests;
