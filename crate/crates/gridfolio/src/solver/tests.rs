use super::*;
use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

/// `min c.x : sum x = total, x >= 0` with an optional variance cap.
fn simplex_program(c: Vec<f64>, total: f64, quad: Option<QuadConstraint>) -> ConvexProgram {
    let n = c.len();
    ConvexProgram {
        names: names(n),
        head_len: n,
        objective: c,
        eq_rows: vec![LinearRow::new((0..n).map(|i| (i, 1.0)).collect(), total)],
        ineq_rows: Vec::new(),
        lower_bounds: vec![Some(0.0); n],
        quad,
    }
}

fn cov2(s1: f64, s2: f64, rho: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2],
    )
}

#[test]
fn min_variance_two_assets_closed_form() {
    // Variances 1 and 4, uncorrelated: w = (0.8, 0.2), variance 0.8.
    let quad = QuadConstraint {
        matrix: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]),
        linear: DVector::zeros(2),
        bound: f64::INFINITY,
    };
    let p = simplex_program(vec![0.0, 0.0], 1.0, Some(quad));
    let sol = min_variance(&p).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_relative_eq!(sol.x[0], 0.8, epsilon = 1e-6);
    assert_relative_eq!(sol.x[1], 0.2, epsilon = 1e-6);
    assert_relative_eq!(sol.objective, 0.8, epsilon = 1e-6);
}

#[test]
fn min_variance_perfectly_hedged_pair() {
    let quad = QuadConstraint {
        matrix: cov2(0.3, 0.3, -1.0),
        linear: DVector::zeros(2),
        bound: f64::INFINITY,
    };
    let p = simplex_program(vec![0.0, 0.0], 1.0, Some(quad));
    let sol = min_variance(&p).unwrap();
    assert_relative_eq!(sol.x[0], 0.5, epsilon = 1e-5);
    assert!(sol.objective.abs() < 1e-9, "variance {}", sol.objective);
}

#[test]
fn min_variance_with_linear_term() {
    // min x^2 - 2x over x >= 0: optimum at x = 1, value -1.
    let quad = QuadConstraint {
        matrix: DMatrix::from_element(1, 1, 1.0),
        linear: DVector::from_element(1, -2.0),
        bound: f64::INFINITY,
    };
    let p = ConvexProgram {
        names: names(1),
        head_len: 1,
        objective: vec![0.0],
        eq_rows: Vec::new(),
        ineq_rows: Vec::new(),
        lower_bounds: vec![Some(0.0)],
        quad: Some(quad),
    };
    let sol = min_variance(&p).unwrap();
    assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-6);
    assert_relative_eq!(sol.objective, -1.0, epsilon = 1e-6);
}

#[test]
fn vertex_endpoint_picks_best_column() {
    // max 0.3 x0 + 0.45 x1 + 0.2 x2 on the simplex: all weight on x1.
    let p = simplex_program(vec![-0.3, -0.45, -0.2], 2.0, None);
    let sol = unconstrained_sd_endpoint(&p).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_eq!(sol.x, vec![0.0, 2.0, 0.0]);
    assert_relative_eq!(sol.objective, -0.9);
}

#[test]
fn vertex_endpoint_breaks_ties_toward_lowest_index() {
    let p = simplex_program(vec![-0.4, -0.4, -0.1], 1.0, None);
    let sol = unconstrained_sd_endpoint(&p).unwrap();
    assert_eq!(sol.x, vec![1.0, 0.0, 0.0]);
}

#[test]
fn vertex_endpoint_scales_by_row_coefficient() {
    // min 2 x0 + 3 x1 : 0.5 x0 + 0.25 x1 = 1 -> x0 = 2 costs 4,
    // x1 = 4 costs 12.
    let mut p = simplex_program(vec![2.0, 3.0], 1.0, None);
    p.eq_rows[0] = LinearRow::new(vec![(0, 0.5), (1, 0.25)], 1.0);
    let sol = unconstrained_sd_endpoint(&p).unwrap();
    assert_eq!(sol.x, vec![2.0, 0.0]);
    assert_relative_eq!(sol.objective, 4.0);
}

#[test]
fn endpoint_falls_back_to_ipm_with_extra_rows() {
    // Same objective but a floor on x2 rules out the pure vertex.
    let mut p = simplex_program(vec![-0.3, -0.45, -0.2], 1.0, None);
    p.ineq_rows.push(LinearRow::new(vec![(2, 1.0)], 0.25));
    let sol = unconstrained_sd_endpoint(&p).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_relative_eq!(sol.x[1], 0.75, epsilon = 1e-6);
    assert_relative_eq!(sol.x[2], 0.25, epsilon = 1e-6);
    assert_relative_eq!(sol.objective, -0.45 * 0.75 - 0.2 * 0.25, epsilon = 1e-6);
}

/// Dense grid over the 3-simplex used as an independent optimum check.
fn grid_best_mean(
    mu: &[f64; 3],
    q: &DMatrix<f64>,
    total: f64,
    sd_cap: f64,
    step: f64,
) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let steps = (total / step).round() as usize;
    for a in 0..=steps {
        for b in 0..=(steps - a) {
            let x = [
                a as f64 * step,
                b as f64 * step,
                total - (a + b) as f64 * step,
            ];
            let mut var = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    var += x[i] * q[(i, j)] * x[j];
                }
            }
            if var.sqrt() <= sd_cap {
                let m = x[0] * mu[0] + x[1] * mu[1] + x[2] * mu[2];
                best = best.max(m);
            }
        }
    }
    best
}

#[test]
fn quad_constrained_lp_beats_grid_search() {
    let mu = [0.30, 0.24, 0.35];
    let sd = [0.25, 0.16, 0.30];
    let rho = [[1.0, 0.3, 0.6], [0.3, 1.0, -0.2], [0.6, -0.2, 1.0]];
    let mut q = DMatrix::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            q[(i, j)] = rho[i][j] * sd[i] * sd[j];
        }
    }
    let quad = QuadConstraint {
        matrix: q.clone(),
        linear: DVector::zeros(3),
        bound: 0.20 * 0.20,
    };
    let p = simplex_program(vec![-mu[0], -mu[1], -mu[2]], 1.0, Some(quad));
    let sol = solve(&p).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let achieved = -sol.objective;
    let x = &sol.x;
    let var = p.quad_value(x).unwrap();
    assert!(var <= 0.04 * (1.0 + 1e-8), "variance bound violated: {var}");
    assert_relative_eq!(x.iter().sum::<f64>(), 1.0, epsilon = 1e-8);
    let grid = grid_best_mean(&mu, &q, 1.0, 0.20, 0.002);
    assert!(
        achieved >= grid - 1e-5,
        "solver {achieved} below grid optimum {grid}"
    );
}

#[test]
fn infeasible_variance_cap_is_detected() {
    // Two unit-variance uncorrelated assets: minimum variance on the
    // simplex is 0.5, so a cap of 0.01 is infeasible.
    let quad = QuadConstraint {
        matrix: DMatrix::identity(2, 2),
        linear: DVector::zeros(2),
        bound: 0.01,
    };
    let p = simplex_program(vec![-0.3, -0.2], 1.0, Some(quad));
    let sol = solve(&p).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn contradictory_rows_are_infeasible() {
    let mut p = simplex_program(vec![1.0, 1.0], 1.0, None);
    p.ineq_rows.push(LinearRow::new(vec![(0, 1.0)], 2.0));
    let sol = solve(&p).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn unbounded_descent_is_detected() {
    let p = ConvexProgram {
        names: names(1),
        head_len: 1,
        objective: vec![-1.0],
        eq_rows: Vec::new(),
        ineq_rows: Vec::new(),
        lower_bounds: vec![Some(0.0)],
        quad: None,
    };
    let sol = solve(&p).unwrap();
    assert_eq!(sol.status, SolveStatus::Unbounded);
}

/// Fractional-tail mean of the `q` worst values, the closed form the
/// shortfall LP must reproduce.
fn tail_mean_oracle(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mass = q * v.len() as f64;
    let full = mass.floor() as usize;
    let frac = mass - full as f64;
    let mut acc: f64 = v[..full].iter().sum();
    if frac > 0.0 {
        acc += frac * v[full];
    }
    acc / mass
}

/// Shortfall LP in the engine's tail-sliced shape:
/// min t : t + alpha - sum Z/(q T) >= 0, Z_t - alpha >= -v_t, Z >= 0.
/// The optimum is minus the tail mean, the averaging row is dense over
/// the tail, and alpha/t are free head variables.
fn shortfall_program(values: &[f64], q: f64) -> ConvexProgram {
    let t_cnt = values.len();
    let n = 2 + t_cnt;
    let mut objective = vec![0.0; n];
    objective[0] = 1.0;
    let mut rows = Vec::with_capacity(t_cnt + 1);
    let mut avg = vec![(0, 1.0), (1, 1.0)];
    let w = 1.0 / (q * t_cnt as f64);
    for t in 0..t_cnt {
        avg.push((2 + t, -w));
    }
    rows.push(LinearRow::new(avg, 0.0));
    for (t, &v) in values.iter().enumerate() {
        rows.push(LinearRow::new(vec![(1, -1.0), (2 + t, 1.0)], -v));
    }
    let mut lower = vec![None, None];
    lower.extend(std::iter::repeat(Some(0.0)).take(t_cnt));
    ConvexProgram {
        names: (0..n).map(|i| format!("v{i}")).collect(),
        head_len: 2,
        objective,
        eq_rows: Vec::new(),
        ineq_rows: rows,
        lower_bounds: lower,
        quad: None,
    }
}

#[test]
fn shortfall_lp_matches_sorting_oracle() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let values: Vec<f64> = (0..40).map(|_| rng.gen_range(-3.0..3.0)).collect();
    for &q in &[0.1, 0.07, 0.25] {
        let p = shortfall_program(&values, q);
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "q = {q}");
        let oracle = tail_mean_oracle(&values, q);
        assert_relative_eq!(-sol.objective, oracle, epsilon = 1e-8);
    }
}

#[test]
fn solves_are_bitwise_deterministic() {
    let quad = QuadConstraint {
        matrix: cov2(0.4, 0.7, 0.25),
        linear: DVector::zeros(2),
        bound: 0.3,
    };
    let p = simplex_program(vec![-0.3, -0.45], 1.0, Some(quad));
    let a = solve(&p).unwrap();
    let b = solve(&p).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.x), bits(&b.x));
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
}

#[test]
fn tightening_the_cap_never_improves_the_objective() {
    let quad = QuadConstraint {
        matrix: cov2(0.25, 0.35, -0.1),
        linear: DVector::zeros(2),
        bound: f64::INFINITY,
    };
    let base = simplex_program(vec![-0.3, -0.45], 1.0, Some(quad));
    let mut last = f64::NEG_INFINITY;
    for bound in [0.12, 0.10, 0.08, 0.06, 0.04] {
        let sol = solve(&base.with_quad_bound(bound)).unwrap();
        if sol.status == SolveStatus::Optimal {
            let mean = -sol.objective;
            assert!(
                mean <= last + 1e-7 || last == f64::NEG_INFINITY,
                "mean rose from {last} to {mean} as the cap tightened"
            );
            last = mean;
        }
    }
    assert!(last.is_finite());
}

#[test]
fn validate_rejects_bad_programs() {
    let mut p = simplex_program(vec![1.0, 1.0], 1.0, None);
    p.eq_rows.push(LinearRow::new(vec![(5, 1.0)], 0.0));
    assert!(p.validate().is_err());

    let asym = QuadConstraint {
        matrix: DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]),
        linear: DVector::zeros(2),
        bound: 1.0,
    };
    let p = simplex_program(vec![1.0, 1.0], 1.0, Some(asym));
    assert!(p.validate().is_err());

    let indef = QuadConstraint {
        matrix: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
        linear: DVector::zeros(2),
        bound: 1.0,
    };
    let p = simplex_program(vec![1.0, 1.0], 1.0, Some(indef));
    assert!(p.validate().is_err());
}

#[test]
fn lp_dump_mentions_every_section() {
    let quad = QuadConstraint {
        matrix: cov2(0.2, 0.3, 0.1),
        linear: DVector::zeros(2),
        bound: 0.05,
    };
    let p = simplex_program(vec![-0.3, -0.2], 1.0, Some(quad));
    let dump = p.dump_lp();
    for needle in ["Minimize", "Subject To", "qc:", "Bounds", "x0", "x1", "End"] {
        assert!(dump.contains(needle), "missing {needle} in:\n{dump}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Two-asset minimum variance against the closed form
    /// w1 = (s2^2 - rho s1 s2) / (s1^2 - 2 rho s1 s2 + s2^2), clamped to
    /// the simplex.
    #[test]
    fn min_variance_matches_two_asset_closed_form(
        s1 in 0.1f64..2.0,
        s2 in 0.1f64..2.0,
        rho in -0.9f64..0.9,
    ) {
        let quad = QuadConstraint {
            matrix: cov2(s1, s2, rho),
            linear: DVector::zeros(2),
            bound: f64::INFINITY,
        };
        let p = simplex_program(vec![0.0, 0.0], 1.0, Some(quad));
        let sol = min_variance(&p).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        let cov = rho * s1 * s2;
        let denom = s1 * s1 - 2.0 * cov + s2 * s2;
        let w1 = ((s2 * s2 - cov) / denom).clamp(0.0, 1.0);
        prop_assert!((sol.x[0] - w1).abs() < 1e-5,
            "got {} want {w1}", sol.x[0]);
    }

    /// Scaling the objective must not move the minimizer.
    #[test]
    fn objective_scaling_leaves_minimizer_alone(scale in 0.5f64..20.0) {
        let quad = QuadConstraint {
            matrix: cov2(0.3, 0.5, 0.2),
            linear: DVector::zeros(2),
            bound: 0.12,
        };
        let base = simplex_program(vec![-0.3, -0.45], 1.0, Some(quad.clone()));
        let scaled = simplex_program(
            vec![-0.3 * scale, -0.45 * scale], 1.0, Some(quad));
        let a = solve(&base).unwrap();
        let b = solve(&scaled).unwrap();
        prop_assert!((a.x[0] - b.x[0]).abs() < 1e-6);
        prop_assert!((a.x[1] - b.x[1]).abs() < 1e-6);
    }
}
