//! Interior-point engine.
//!
//! Mehrotra predictor-corrector on the barrier KKT system. All
//! inequalities are handled as `g_k(x) <= 0` with slacks: bounds give
//! `lo - x_i`, linear rows `a.x >= r` give `r - a.x`, the quadratic row
//! gives `x'Qx + l'x - bound`. Eliminating the slack and multiplier of
//! each row reduces the Newton system to
//!
//!   (H_L + sum_k f_k grad_k grad_k') dx + A_eq' dy = rhs,   A_eq dx = -r_eq
//!
//! with `f_k = lambda_k / s_k` and `H_L` the Hessian of the Lagrangian.
//! The reduced matrix is arrow-shaped as long as each row touches at most
//! one tail variable: a dense head block, a diagonal over the tail, and a
//! head-tail coupling strip. Rows with several tail entries (the CVaR
//! averaging row) are folded in afterwards by a low-rank update, and the
//! handful of equality rows by a final Schur complement. One iteration is
//! O(m * head^2) regardless of how many sampled hours the program carries.

use nalgebra::{Cholesky, DMatrix, DVector};

/// Engine-level problem: minimize `c.x + 1/2 x'Hx` subject to
/// `eq: a.x = b`, `lin: a.x >= r`, `bounds: x_i >= lo`, and optionally
/// `x'Qx + l'x <= r` over the head variables.
pub(crate) struct IpmProblem {
    pub n: usize,
    pub head: usize,
    pub c: DVector<f64>,
    pub h: Option<DMatrix<f64>>,
    pub eq: Vec<(Vec<(usize, f64)>, f64)>,
    pub lin: Vec<(Vec<(usize, f64)>, f64)>,
    pub bounds: Vec<(usize, f64)>,
    pub quad: Option<(DMatrix<f64>, DVector<f64>, f64)>,
}

impl IpmProblem {
    fn m(&self) -> usize {
        self.bounds.len() + self.lin.len() + usize::from(self.quad.is_some())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let mut v = self.c.dot(x);
        if let Some(h) = &self.h {
            let xh = x.rows(0, self.head);
            v += 0.5 * (h * xh).dot(&xh);
        }
        v
    }

    /// Constraint values `g_k(x)`, ordered bounds, linear rows, quad row.
    fn eval_g(&self, x: &DVector<f64>, g: &mut DVector<f64>) {
        let mb = self.bounds.len();
        for (k, &(i, lo)) in self.bounds.iter().enumerate() {
            g[k] = lo - x[i];
        }
        for (k, (coeffs, rhs)) in self.lin.iter().enumerate() {
            let mut acc = *rhs;
            for &(i, v) in coeffs {
                acc -= v * x[i];
            }
            g[mb + k] = acc;
        }
        if let Some((q, l, r)) = &self.quad {
            let xh = x.rows(0, self.head);
            g[self.m() - 1] = (q * xh).dot(&xh) + l.dot(&xh) - r;
        }
    }

    /// Gradient of the quadratic row at `x` (head coordinates).
    fn quad_grad(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.quad.as_ref().map(|(q, l, _)| {
            let xh = x.rows(0, self.head);
            2.0 * (q * xh) + l
        })
    }

    /// Relative scale of each row's right-hand side, same ordering as
    /// `eval_g`, used for the primal residual.
    fn rhs_scales(&self) -> DVector<f64> {
        let m = self.m();
        let mut s = DVector::zeros(m);
        let mb = self.bounds.len();
        for (k, &(_, lo)) in self.bounds.iter().enumerate() {
            s[k] = lo.abs();
        }
        for (k, (_, rhs)) in self.lin.iter().enumerate() {
            s[mb + k] = rhs.abs();
        }
        if let Some((_, _, r)) = &self.quad {
            s[m - 1] = r.abs();
        }
        s
    }

    fn default_start(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.n);
        for &(i, lo) in &self.bounds {
            x[i] = lo + 1.0;
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RawStatus {
    Converged,
    Acceptable,
    IterLimit,
    Diverged,
}

pub(crate) struct IpmOutcome {
    pub x: DVector<f64>,
    pub status: RawStatus,
    pub iterations: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    pub comp: f64,
}

pub(crate) struct IpmOptions {
    pub max_iter: usize,
    pub tol_target: f64,
    pub tol_accept: f64,
    /// Apply the quadratic row's second-order correction at the full
    /// predicted step instead of scaled by the affine step length.
    pub soc_full: bool,
    /// Engage stall damping whenever progress is absent, not only when
    /// the merit sits well above the best seen.
    pub damp_on_stall: bool,
    /// Hard per-iteration step cap.
    pub alpha_cap: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            max_iter: 200,
            tol_target: 1e-9,
            tol_accept: 1e-6,
            soc_full: false,
            damp_on_stall: false,
            alpha_cap: 1.0,
        }
    }
}

impl IpmOptions {
    /// Escalation ladder for solves that stall under the default step
    /// rule: first strengthen the curvature handling, then force short
    /// steps outright. Different frontier points cycle under different
    /// rules, so the driver walks the ladder until one converges.
    pub fn profiles() -> [IpmOptions; 3] {
        [
            IpmOptions::default(),
            IpmOptions {
                soc_full: true,
                damp_on_stall: true,
                ..IpmOptions::default()
            },
            IpmOptions {
                soc_full: true,
                damp_on_stall: true,
                alpha_cap: 0.4,
                ..IpmOptions::default()
            },
        ]
    }
}

pub(crate) enum Phase1 {
    Feasible(DVector<f64>),
    Infeasible(f64),
    Unknown,
}

/// Elastic feasibility solve: minimize `e` with every equality and
/// inequality relaxed by `e` (bounds stay hard, `e >= -1`). A negative
/// optimum certifies strict interior feasibility; the minimizer seeds the
/// main solve.
pub(crate) fn phase1(p: &IpmProblem, opts: &IpmOptions) -> Phase1 {
    let e_idx = p.head; // elastic variable joins the head block
    let map = |i: usize| if i < p.head { i } else { i + 1 };
    let n1 = p.n + 1;

    let mut c = DVector::zeros(n1);
    c[e_idx] = 1.0;

    let mut lin = Vec::with_capacity(2 * p.eq.len() + p.lin.len());
    for (coeffs, b) in &p.eq {
        // a.x = b splits into a.x + e >= b and -a.x + e >= -b.
        let mut up: Vec<(usize, f64)> = coeffs.iter().map(|&(i, v)| (map(i), v)).collect();
        up.push((e_idx, 1.0));
        lin.push((up, *b));
        let mut dn: Vec<(usize, f64)> = coeffs.iter().map(|&(i, v)| (map(i), -v)).collect();
        dn.push((e_idx, 1.0));
        lin.push((dn, -*b));
    }
    for (coeffs, r) in &p.lin {
        let mut row: Vec<(usize, f64)> = coeffs.iter().map(|&(i, v)| (map(i), v)).collect();
        row.push((e_idx, 1.0));
        lin.push((row, *r));
    }

    let mut bounds: Vec<(usize, f64)> = p.bounds.iter().map(|&(i, lo)| (map(i), lo)).collect();
    bounds.push((e_idx, -1.0));

    let quad = p.quad.as_ref().map(|(q, l, r)| {
        let h1 = p.head + 1;
        let mut q1 = DMatrix::zeros(h1, h1);
        q1.view_mut((0, 0), (p.head, p.head)).copy_from(q);
        let mut l1 = DVector::zeros(h1);
        l1.rows_mut(0, p.head).copy_from(l);
        l1[e_idx] = -1.0;
        (q1, l1, *r)
    });

    let p1 = IpmProblem {
        n: n1,
        head: p.head + 1,
        c,
        h: None,
        eq: Vec::new(),
        lin,
        bounds,
        quad,
    };

    // Start from the default point with e large enough to clear every
    // elastic row.
    let mut x0 = DVector::zeros(n1);
    for i in 0..p.n {
        x0[map(i)] = p.default_start()[i];
    }
    let mut g = DVector::zeros(p1.m());
    p1.eval_g(&x0, &mut g);
    let worst = g.iter().cloned().fold(0.0f64, f64::max);
    x0[e_idx] = worst + 1.0;

    let out = run(&p1, Some(x0), opts);
    let excess = out.x[e_idx];
    let rhs_scale = p.rhs_scales().amax();
    let feas_tol = 1e-6 * (1.0 + rhs_scale);
    match out.status {
        RawStatus::Converged | RawStatus::Acceptable => {
            if excess <= feas_tol {
                let mut x = DVector::zeros(p.n);
                for i in 0..p.n {
                    x[i] = out.x[map(i)];
                }
                Phase1::Feasible(x)
            } else {
                Phase1::Infeasible(excess)
            }
        }
        // A stalled or diverged phase-1 proves nothing; let the main
        // solve try from scratch.
        _ => Phase1::Unknown,
    }
}

/// Linear row split into head and tail coordinates, with the tail count
/// deciding arrow vs low-rank treatment.
struct RowSplit {
    head: Vec<(usize, f64)>,
    tail: Vec<(usize, f64)>,
}

struct Factor {
    chol: Cholesky<f64, nalgebra::Dyn>,
    w: DMatrix<f64>,
    delta: DVector<f64>,
    head: usize,
    tail: usize,
    /// Low-rank correction for dense rows. Each row `a = u + w` (head and
    /// tail parts) contributes `f u u'` to the head block directly and the
    /// remainder `f (a a' - u u') = [u w] C [u w]'` with `C = f [[0,1],[1,1]]`
    /// here, via the Woodbury identity. Keeping the head mass in the head
    /// block keeps the arrow core well conditioned even for variables that
    /// appear only in dense rows.
    dense_cols: Vec<DVector<f64>>,
    dense_vecs: Vec<DVector<f64>>,
    cap_lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    /// Equality Schur complement pieces.
    eq_cols: Vec<DVector<f64>>,
    eq_lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl Factor {
    /// Solve the arrow core `K0 v = r`.
    fn solve_k0(&self, r: &DVector<f64>) -> DVector<f64> {
        let rh = r.rows(0, self.head).clone_owned();
        let mut out = DVector::zeros(self.head + self.tail);
        if self.tail == 0 {
            out.rows_mut(0, self.head).copy_from(&self.chol.solve(&rh));
            return out;
        }
        let rt = r.rows(self.head, self.tail);
        let mut scaled = DVector::zeros(self.tail);
        for j in 0..self.tail {
            scaled[j] = rt[j] / self.delta[j];
        }
        let reduced = rh - &self.w * &scaled;
        let u = self.chol.solve(&reduced);
        for j in 0..self.tail {
            let mut acc = rt[j];
            for i in 0..self.head {
                acc -= self.w[(i, j)] * u[i];
            }
            out[self.head + j] = acc / self.delta[j];
        }
        out.rows_mut(0, self.head).copy_from(&u);
        out
    }

    /// Solve `K v = r` including the dense-row low-rank updates.
    fn solve_k(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut v = self.solve_k0(r);
        if let Some(lu) = &self.cap_lu {
            let d = self.dense_vecs.len();
            let mut t = DVector::zeros(d);
            for (q, a) in self.dense_vecs.iter().enumerate() {
                t[q] = a.dot(&v);
            }
            let y = lu.solve(&t).expect("capacitance solve");
            for (q, col) in self.dense_cols.iter().enumerate() {
                v -= y[q] * col;
            }
        }
        v
    }

    /// Full Newton solve with the equality Schur complement:
    /// `K dx + A' dy = rhs1`, `A dx = -r_eq`.
    fn newton(
        &self,
        rhs1: &DVector<f64>,
        r_eq: &DVector<f64>,
        eq: &[(Vec<(usize, f64)>, f64)],
    ) -> (DVector<f64>, DVector<f64>) {
        let v0 = self.solve_k(rhs1);
        if eq.is_empty() {
            return (v0, DVector::zeros(0));
        }
        let p = eq.len();
        let mut rhs_y = DVector::zeros(p);
        for (e, (coeffs, _)) in eq.iter().enumerate() {
            let mut acc = r_eq[e];
            for &(i, v) in coeffs {
                acc += v * v0[i];
            }
            rhs_y[e] = acc;
        }
        let dy = self
            .eq_lu
            .as_ref()
            .expect("equality factor")
            .solve(&rhs_y)
            .expect("equality Schur solve");
        let mut dx = v0;
        for (e, col) in self.eq_cols.iter().enumerate() {
            dx -= dy[e] * col;
        }
        (dx, dy)
    }
}

struct Workspace {
    splits: Vec<RowSplit>,
    dense_rows: Vec<usize>,
    rhs_scales: DVector<f64>,
}

fn split_rows(p: &IpmProblem) -> Workspace {
    let splits: Vec<RowSplit> = p
        .lin
        .iter()
        .map(|(coeffs, _)| {
            let mut head = Vec::new();
            let mut tail = Vec::new();
            for &(i, v) in coeffs {
                if i < p.head {
                    head.push((i, v));
                } else {
                    tail.push((i, v));
                }
            }
            RowSplit { head, tail }
        })
        .collect();
    let dense_rows = splits
        .iter()
        .enumerate()
        .filter(|(_, s)| s.tail.len() >= 2)
        .map(|(k, _)| k)
        .collect();
    Workspace {
        splits,
        dense_rows,
        rhs_scales: p.rhs_scales(),
    }
}

/// Largest step in `[0, 1]` keeping `v + a dv` strictly positive up to
/// the boundary fraction applied by the caller.
fn step_len(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut a = 1.0f64;
    for k in 0..v.len() {
        if dv[k] < 0.0 {
            a = a.min(-v[k] / dv[k]);
        }
    }
    a
}

pub(crate) fn run(p: &IpmProblem, x0: Option<DVector<f64>>, opts: &IpmOptions) -> IpmOutcome {
    let n = p.n;
    let head = p.head;
    let tail = n - head;
    let m = p.m();
    let mb = p.bounds.len();
    let ws = split_rows(p);
    let quad_idx = if p.quad.is_some() { Some(m - 1) } else { None };

    let warm = x0.is_some();
    let mut x = x0.unwrap_or_else(|| p.default_start());
    let x_scale = 1.0 + x.amax();
    let mut g = DVector::zeros(m);
    p.eval_g(&x, &mut g);
    let slack_floor = if warm { 1e-4 } else { 1.0 };
    let mut s = DVector::from_fn(m, |k, _| (-g[k]).max(slack_floor));
    let mut lam = DVector::from_element(m, 1.0);
    let mut y = DVector::zeros(p.eq.len());

    let c_inf = p.c.amax();

    let mut best_merit = f64::INFINITY;
    let mut best_iter = 0usize;
    // Best iterate seen, returned if later iterations go backwards (the
    // endgame at tiny mu can corrupt an already-converged point).
    let mut best: Option<(DVector<f64>, f64, f64, f64)> = None;
    let mut status = RawStatus::IterLimit;
    let mut iterations = 0usize;
    let (mut pres, mut dres, mut comp) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);

    for iter in 0..opts.max_iter {
        iterations = iter;
        p.eval_g(&x, &mut g);
        let qgrad = p.quad_grad(&x);

        // Dual residual r_d = c + Hx + sum lam_k grad_k + A_eq' y.
        let mut rd = p.c.clone();
        let mut hx_inf = 0.0f64;
        if let Some(hm) = &p.h {
            let hx = hm * x.rows(0, head);
            hx_inf = hx.amax();
            for i in 0..head {
                rd[i] += hx[i];
            }
        }
        for (k, &(i, _)) in p.bounds.iter().enumerate() {
            rd[i] -= lam[k];
        }
        for (k, (coeffs, _)) in p.lin.iter().enumerate() {
            let lk = lam[mb + k];
            for &(i, v) in coeffs {
                rd[i] -= lk * v;
            }
        }
        if let (Some(qi), Some(qg)) = (quad_idx, &qgrad) {
            let lq = lam[qi];
            for i in 0..head {
                rd[i] += lq * qg[i];
            }
        }
        for (e, (coeffs, _)) in p.eq.iter().enumerate() {
            for &(i, v) in coeffs {
                rd[i] += y[e] * v;
            }
        }

        let mut r_eq = DVector::zeros(p.eq.len());
        for (e, (coeffs, b)) in p.eq.iter().enumerate() {
            let mut acc = -b;
            for &(i, v) in coeffs {
                acc += v * x[i];
            }
            r_eq[e] = acc;
        }

        // Scaled residual measures.
        pres = 0.0;
        for k in 0..m {
            pres = pres.max(g[k].max(0.0) / (1.0 + ws.rhs_scales[k]));
        }
        for (e, (_, b)) in p.eq.iter().enumerate() {
            pres = pres.max(r_eq[e].abs() / (1.0 + b.abs()));
        }
        dres = rd.amax() / (1.0 + c_inf + hx_inf);
        let obj = p.objective(&x);
        let gap = s.dot(&lam);
        comp = gap / (1.0 + obj.abs());
        let merit = pres.max(dres).max(comp);

        if std::env::var_os("IPM_TRACE").is_some() {
            eprintln!(
                "iter {iter:3} pres {pres:.3e} dres {dres:.3e} comp {comp:.3e} obj {obj:.9}"
            );
        }

        if merit < best_merit {
            best = Some((x.clone(), pres, dres, comp));
            if merit < 0.9 * best_merit {
                best_iter = iter;
            }
            best_merit = merit;
        } else if iter > best_iter + 30 {
            break; // stalled
        }
        if merit <= opts.tol_target {
            status = RawStatus::Converged;
            break;
        }
        if x.amax() > 1e13 * x_scale {
            status = RawStatus::Diverged;
            break;
        }

        // Assemble the arrow pieces of K = H_L + sum f_k grad_k grad_k'.
        let mut b_blk = DMatrix::zeros(head, head);
        let mut delta = DVector::zeros(tail);
        let mut w_blk = DMatrix::zeros(head, tail);
        let f_of = |k: usize| (lam[k] / s[k]).clamp(1e-14, 1e16);

        for (k, &(i, _)) in p.bounds.iter().enumerate() {
            let f = f_of(k);
            if i < head {
                b_blk[(i, i)] += f;
            } else {
                delta[i - head] += f;
            }
        }
        for (k, sp) in ws.splits.iter().enumerate() {
            let f = f_of(mb + k);
            for &(i1, v1) in &sp.head {
                for &(i2, v2) in &sp.head {
                    b_blk[(i1, i2)] += f * v1 * v2;
                }
            }
            match sp.tail.as_slice() {
                [] => {}
                &[(j, u)] => {
                    let jt = j - head;
                    delta[jt] += f * u * u;
                    for &(i, v) in &sp.head {
                        w_blk[(i, jt)] += f * v * u;
                    }
                }
                _ => {} // tail coupling folded in by the low-rank update
            }
        }
        if let (Some(qi), Some(qg), Some((qm, _, _))) = (quad_idx, &qgrad, &p.quad) {
            let f = f_of(qi);
            let lq = lam[qi].max(0.0);
            for i in 0..head {
                for j in 0..head {
                    b_blk[(i, j)] += f * qg[i] * qg[j] + 2.0 * lq * qm[(i, j)];
                }
            }
        }
        if let Some(hm) = &p.h {
            b_blk += hm;
        }

        // Head/tail split of each dense row, shared by the Woodbury
        // fold-in and the refinement matvec.
        let dense_fuw: Vec<(f64, DVector<f64>, DVector<f64>)> = ws
            .dense_rows
            .iter()
            .map(|&k| {
                let f = f_of(mb + k);
                let mut u = DVector::zeros(n);
                let mut w = DVector::zeros(n);
                for &(i, v) in &p.lin[k].0 {
                    if i < head {
                        u[i] += v;
                    } else {
                        w[i] += v;
                    }
                }
                (f, u, w)
            })
            .collect();

        let trace = b_blk.trace() + delta.sum();
        let base_ridge = 1e-10 * trace / n as f64 + 1e-12;

        // Factor with escalating ridge if the head Schur block loses
        // definiteness.
        let mut factor = None;
        let mut ridge = base_ridge;
        for _ in 0..5 {
            let mut br = b_blk.clone();
            for i in 0..head {
                br[(i, i)] += ridge;
            }
            let mut dr = delta.clone();
            for j in 0..tail {
                dr[j] += ridge;
            }
            let mut s_mat = br;
            for j in 0..tail {
                let wj = w_blk.column(j);
                let scale = 1.0 / dr[j];
                for a in 0..head {
                    let wa = wj[a];
                    if wa == 0.0 {
                        continue;
                    }
                    for b in 0..head {
                        s_mat[(a, b)] -= scale * wa * wj[b];
                    }
                }
            }
            if let Some(chol) = Cholesky::new(s_mat) {
                factor = Some(Factor {
                    chol,
                    w: w_blk.clone(),
                    delta: dr,
                    head,
                    tail,
                    dense_cols: Vec::new(),
                    dense_vecs: Vec::new(),
                    cap_lu: None,
                    eq_cols: Vec::new(),
                    eq_lu: None,
                });
                break;
            }
            ridge *= 100.0;
        }
        let Some(mut factor) = factor else {
            break; // hopelessly ill-conditioned; report current point
        };

        // Woodbury fold-in of the tail coupling of rows with several tail
        // entries (see `Factor::dense_cols`).
        if !dense_fuw.is_empty() {
            let d = dense_fuw.len();
            let mut vecs = Vec::with_capacity(2 * d);
            let mut cols = Vec::with_capacity(2 * d);
            let mut cap = DMatrix::zeros(2 * d, 2 * d);
            for (q, (f, u, w)) in dense_fuw.iter().enumerate() {
                cap[(2 * q, 2 * q)] = -1.0 / f;
                cap[(2 * q, 2 * q + 1)] = 1.0 / f;
                cap[(2 * q + 1, 2 * q)] = 1.0 / f;
                cols.push(factor.solve_k0(u));
                cols.push(factor.solve_k0(w));
                vecs.push(u.clone());
                vecs.push(w.clone());
            }
            for a in 0..2 * d {
                for b in 0..2 * d {
                    cap[(a, b)] += vecs[a].dot(&cols[b]);
                }
            }
            let Some(lu) = Some(cap.lu()).filter(|lu| lu.is_invertible()) else {
                break;
            };
            factor.dense_cols = cols;
            factor.dense_vecs = vecs;
            factor.cap_lu = Some(lu);
        }

        // Equality Schur complement.
        if !p.eq.is_empty() {
            let pe = p.eq.len();
            let mut cols = Vec::with_capacity(pe);
            for (coeffs, _) in &p.eq {
                let mut a = DVector::zeros(n);
                for &(i, v) in coeffs {
                    a[i] += v;
                }
                cols.push(factor.solve_k(&a));
            }
            let mut gmat = DMatrix::zeros(pe, pe);
            for (e, (coeffs, _)) in p.eq.iter().enumerate() {
                for q in 0..pe {
                    let mut acc = 0.0;
                    for &(i, v) in coeffs {
                        acc += v * cols[q][i];
                    }
                    gmat[(e, q)] = acc;
                }
            }
            let Some(lu) = Some(gmat.lu()).filter(|lu| lu.is_invertible()) else {
                break;
            };
            factor.eq_cols = cols;
            factor.eq_lu = Some(lu);
        }

        // Unridged matvec `K v` for iterative refinement of Newton solves.
        let apply_k = |v: &DVector<f64>| -> DVector<f64> {
            let vh = v.rows(0, head).clone_owned();
            let mut out = DVector::zeros(n);
            let mut oh = &b_blk * &vh;
            if tail > 0 {
                let vt = v.rows(head, tail).clone_owned();
                oh += &w_blk * &vt;
                let mut ot = w_blk.tr_mul(&vh);
                for j in 0..tail {
                    ot[j] += delta[j] * vt[j];
                }
                out.rows_mut(head, tail).copy_from(&ot);
            }
            out.rows_mut(0, head).copy_from(&oh);
            for (f, u, w) in &dense_fuw {
                let uv = u.dot(v);
                let wv = w.dot(v);
                out += (f * wv) * u + (f * (uv + wv)) * w;
            }
            out
        };

        // r_g = g + s, shared by predictor and corrector.
        let mut rg = DVector::zeros(m);
        for k in 0..m {
            rg[k] = g[k] + s[k];
        }

        let newton_step = |rc: &DVector<f64>, rg: &DVector<f64>| {
            let mut rhs1 = -rd.clone();
            let apply = |rhs1: &mut DVector<f64>, k: usize, w: f64| {
                // rhs1 -= w * grad_k
                if k < mb {
                    let (i, _) = p.bounds[k];
                    rhs1[i] += w;
                } else if Some(k) == quad_idx {
                    let qg = qgrad.as_ref().unwrap();
                    for i in 0..head {
                        rhs1[i] -= w * qg[i];
                    }
                } else {
                    for &(i, v) in &p.lin[k - mb].0 {
                        rhs1[i] += w * v;
                    }
                }
            };
            for k in 0..m {
                let wk = f_of(k) * rg[k] - rc[k] / s[k];
                apply(&mut rhs1, k, wk);
            }
            let (dx0, dy0) = factor.newton(&rhs1, &r_eq, &p.eq);
            // One refinement round against the unridged system; the
            // factorization alone leaves a residual floor once the
            // barrier weights spread over many orders of magnitude.
            // Iterating further is unsafe: when the ridge carries the
            // factorization, repeated corrections blow up along the
            // near-null directions, so accept the round only if it
            // actually shrank the residual.
            let residual = |dx: &DVector<f64>, dy: &DVector<f64>| {
                let mut kx = apply_k(dx);
                for (e, (coeffs, _)) in p.eq.iter().enumerate() {
                    for &(i, v) in coeffs {
                        kx[i] += v * dy[e];
                    }
                }
                let r1 = &rhs1 - kx;
                let mut r2 = DVector::zeros(p.eq.len());
                for (e, (coeffs, _)) in p.eq.iter().enumerate() {
                    let mut acc = r_eq[e];
                    for &(i, v) in coeffs {
                        acc += v * dx[i];
                    }
                    r2[e] = acc;
                }
                (r1, r2)
            };
            let (r1, r2) = residual(&dx0, &dy0);
            let (cx, cy) = factor.newton(&r1, &r2, &p.eq);
            let dx1 = &dx0 + cx;
            let dy1 = &dy0 + cy;
            let (r1b, r2b) = residual(&dx1, &dy1);
            let worse = r1b.amax().max(r2b.amax()) >= r1.amax().max(r2.amax());
            let (dx, dy) = if worse { (dx0, dy0) } else { (dx1, dy1) };
            let mut dlam = DVector::zeros(m);
            let mut ds = DVector::zeros(m);
            for k in 0..m {
                let gdot = if k < mb {
                    let (i, _) = p.bounds[k];
                    -dx[i]
                } else if Some(k) == quad_idx {
                    let qg = qgrad.as_ref().unwrap();
                    let mut acc = 0.0;
                    for i in 0..head {
                        acc += qg[i] * dx[i];
                    }
                    acc
                } else {
                    let mut acc = 0.0;
                    for &(i, v) in &p.lin[k - mb].0 {
                        acc -= v * dx[i];
                    }
                    acc
                };
                dlam[k] = f_of(k) * (gdot + rg[k]) - rc[k] / s[k];
                ds[k] = (-rc[k] - s[k] * dlam[k]) / lam[k];
            }
            (dx, dy, dlam, ds)
        };

        // Predictor.
        let rc_aff = DVector::from_fn(m, |k, _| s[k] * lam[k]);
        let (dx_a, _, dlam_a, ds_a) = newton_step(&rc_aff, &rg);
        if dx_a.iter().any(|v| !v.is_finite()) {
            break;
        }
        let a_aff = step_len(&s, &ds_a).min(step_len(&lam, &dlam_a)).min(1.0);
        let mu = gap / m as f64;
        let mut mu_aff = 0.0;
        for k in 0..m {
            mu_aff += (s[k] + a_aff * ds_a[k]) * (lam[k] + a_aff * dlam_a[k]);
        }
        mu_aff /= m as f64;
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);

        // Corrector. The quadratic row also gets a second-order term:
        // its slack update is linearized, so feed the curvature the
        // predictor step would incur back into the residual, the same way
        // ds*dlam corrects the complementarity products. By default it is
        // evaluated at the affine step length, like mu_aff: the full-step
        // curvature wildly overestimates early on when only a sliver is
        // taken. The full form is stronger against constraint bouncing
        // and is used by the escalation profiles.
        let mut rg_c = rg.clone();
        if let (Some(qi), Some((qm, _, _))) = (quad_idx, &p.quad) {
            let scale = if opts.soc_full { 1.0 } else { a_aff * a_aff };
            let dh = dx_a.rows(0, head).clone_owned();
            rg_c[qi] += scale * dh.dot(&(qm * &dh));
        }
        let rc = DVector::from_fn(m, |k, _| s[k] * lam[k] + ds_a[k] * dlam_a[k] - sigma * mu);
        let (dx, dy, dlam, ds) = newton_step(&rc, &rg_c);
        if dx.iter().any(|v| !v.is_finite()) {
            break;
        }
        let tau = if comp < 1e-6 { 0.9995 } else { 0.995 };
        let mut alpha = (tau * step_len(&s, &ds).min(step_len(&lam, &dlam))).min(opts.alpha_cap);
        // Full steps can still cycle on the quadratic row: the iterate
        // bounces between the two sides of the constraint, touching the
        // best merit every few iterations without ever beating it. Once
        // progress has been absent for a while (and, by default, the
        // merit sits well above the best seen), shrink the step until the
        // linearization holds again; the cap resets as soon as the merit
        // genuinely improves.
        let stalled = iter - best_iter;
        if stalled > 8 && (opts.damp_on_stall || merit > 1.5 * best_merit) {
            alpha = alpha.min(0.5f64.powi((stalled as i32 - 7) / 2).max(2f64.powi(-8)));
        }

        x += alpha * &dx;
        y += alpha * &dy;
        for k in 0..m {
            s[k] = (s[k] + alpha * ds[k]).max(1e-300);
            lam[k] = (lam[k] + alpha * dlam[k]).max(1e-300);
        }
    }

    if status == RawStatus::IterLimit {
        if let Some((bx, bp, bd, bc)) = best {
            x = bx;
            pres = bp;
            dres = bd;
            comp = bc;
        }
        if pres.max(dres).max(comp) <= opts.tol_accept {
            status = RawStatus::Acceptable;
        }
    }
    IpmOutcome {
        x,
        status,
        iterations,
        primal_res: pres,
        dual_res: dres,
        comp,
    }
}
