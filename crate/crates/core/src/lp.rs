//! Dense linear programming.
//!
//! [`solve_lp`] is a bounded-variable primal simplex working on the condensed
//! (Tucker) tableau: every row `a_r . x` is given its own bounded logical
//! variable, so the basis always holds `m` variables drawn from the `n`
//! structural and `m` logical ones, and the tableau expressing basic in terms
//! of nonbasic variables is only `m x n`. The relation is homogeneous
//! (`x_B = T x_N`), which keeps refactorization and row bookkeeping simple.
//!
//! Phase one maximizes minus the sum of bound violations of the basic
//! variables; phase two maximizes the objective. Entering columns are chosen
//! by largest reduced cost with a Harris ratio test; after a run of degenerate
//! pivots the solver falls back to Bland's rule until progress resumes, which
//! guarantees termination. The tableau is rebuilt from the original rows
//! periodically and before any final verdict.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize objective . x` subject to `rows` and `var_lb <= x <= var_ub`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub var_lb: Vec<f64>,
    pub var_ub: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The pivot budget ran out or the basis became numerically singular.
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Present iff `status == Optimal`.
    pub x: Option<Vec<f64>>,
    /// Present iff `status == Optimal`.
    pub objective_value: Option<f64>,
    /// Reduced cost of every structural variable at the optimal basis (zero
    /// for basic variables). For a nonbasic variable this is the rate of
    /// change of the optimal value when the variable is moved off its bound.
    pub reduced_costs: Option<Vec<f64>>,
    pub pivots: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, pivots: usize) -> Self {
        Self {
            status,
            x: None,
            objective_value: None,
            reduced_costs: None,
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

impl LinearProgram {
    /// A program with the given objective, `x >= 0` and no rows.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            num_vars: n,
            objective,
            rows: Vec::new(),
            var_lb: vec![0.0; n],
            var_ub: vec![f64::INFINITY; n],
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    /// Adds a row given as sparse `(column, coefficient)` pairs.
    pub fn add_sparse_row(&mut self, entries: &[(usize, f64)], relation: Relation, rhs: f64) {
        let mut coeffs = vec![0.0; self.num_vars];
        for &(j, v) in entries {
            coeffs[j] += v;
        }
        self.add_row(coeffs, relation, rhs);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars;
        if self.objective.len() != n || self.var_lb.len() != n || self.var_ub.len() != n {
            return Err(Error::Config(
                "objective and bound vectors must have num_vars entries".into(),
            ));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(Error::Config(format!("row {r} has {} coefficients", row.coeffs.len())));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("row {r} has non-finite entries")));
            }
        }
        for j in 0..n {
            let (lo, hi) = (self.var_lb[j], self.var_ub[j]);
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY || lo > hi {
                return Err(Error::Config(format!("variable {j} has bounds [{lo}, {hi}]")));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite objective coefficient".into()));
        }
        Ok(())
    }

    pub fn solve(&self) -> LpSolution {
        solve_lp(self)
    }

    /// Largest violation of the rows and bounds at `x`, each row violation
    /// measured relative to `1 + |rhs|`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.rows {
            let act: f64 = row.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let viol = match row.relation {
                Relation::Le => act - row.rhs,
                Relation::Ge => row.rhs - act,
                Relation::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol / (1.0 + row.rhs.abs()));
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.var_lb[j] - v).max(v - self.var_ub[j]);
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Pivot budget; `None` derives one from the problem size.
    pub max_pivots: Option<usize>,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_threshold: usize,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// Relative row tolerance of the final feasibility certificate.
    pub row_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_pivots: None,
            stall_threshold: 40,
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            row_tol: 1e-7,
        }
    }
}

const CLEANUP_TOL_FACTOR: f64 = 1e-4;

/// Solves `lp` with default options.
pub fn solve_lp(lp: &LinearProgram) -> LpSolution {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SimplexOptions) -> LpSolution {
    if lp.validate().is_err() {
        return LpSolution::failed(LpStatus::NumericalFailure, 0);
    }
    let mut simplex = Simplex::new(lp, opts);
    let n = lp.num_vars;
    let mut x = Vec::new();
    // A second pass with a much tighter bound tolerance repairs solutions
    // whose accepted Harris violations break the final certificate.
    for pass in 0..2 {
        if pass == 1 {
            simplex.feas_tol = opts.feasibility_tol * CLEANUP_TOL_FACTOR;
        }
        let status = simplex.run();
        if status != LpStatus::Optimal {
            return LpSolution::failed(status, simplex.pivots);
        }
        x = simplex.x[..n].to_vec();
        let bound_ok = x.iter().enumerate().all(|(j, &v)| {
            v >= lp.var_lb[j] - opts.feasibility_tol * (1.0 + lp.var_lb[j].abs())
                && v <= lp.var_ub[j] + opts.feasibility_tol * (1.0 + lp.var_ub[j].abs())
        });
        for (j, v) in x.iter_mut().enumerate() {
            *v = v.clamp(lp.var_lb[j], lp.var_ub[j]);
        }
        let viol = lp.max_violation(&x);
        if bound_ok && viol <= opts.row_tol {
            break;
        }
        log::debug!("simplex pass {pass}: rows violated by {viol:e}, bounds ok: {bound_ok}");
        if pass == 1 {
            return LpSolution::failed(LpStatus::NumericalFailure, simplex.pivots);
        }
    }
    let objective_value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let d = simplex.phase_two_costs();
    let mut reduced = vec![0.0; n];
    for (k, &v) in simplex.nonbasic.iter().enumerate() {
        if v < n {
            reduced[v] = d[k];
        }
    }
    LpSolution {
        status: LpStatus::Optimal,
        x: Some(x),
        objective_value: Some(objective_value),
        reduced_costs: Some(reduced),
        pivots: simplex.pivots,
    }
}

struct Simplex<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    /// Row-scaled constraint matrix, `m x n`.
    a: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    /// `m x n` tableau: `x[basic[r]] = sum_k t[r][k] x[nonbasic[k]]`.
    t: Vec<f64>,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    x: Vec<f64>,
    opts: &'a SimplexOptions,
    feas_tol: f64,
    pivots: usize,
    since_refactor: usize,
    refactor_every: usize,
}

enum Leaving {
    /// The entering variable reaches its opposite bound.
    Flip,
    Row(usize),
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram, opts: &'a SimplexOptions) -> Self {
        let (m, n) = (lp.rows.len(), lp.num_vars);
        let mut a = vec![0.0; m * n];
        let mut lb = lp.var_lb.clone();
        let mut ub = lp.var_ub.clone();
        lb.reserve(m);
        ub.reserve(m);
        for (r, row) in lp.rows.iter().enumerate() {
            let scale = row.coeffs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let s = if scale > 0.0 { 1.0 / scale } else { 1.0 };
            for (dst, &v) in a[r * n..(r + 1) * n].iter_mut().zip(&row.coeffs) {
                *dst = v * s;
            }
            let rhs = row.rhs * s;
            let (lo, hi) = match row.relation {
                Relation::Le => (f64::NEG_INFINITY, rhs),
                Relation::Ge => (rhs, f64::INFINITY),
                Relation::Eq => (rhs, rhs),
            };
            lb.push(lo);
            ub.push(hi);
        }
        let mut x = vec![0.0; n + m];
        for j in 0..n {
            x[j] = if lb[j].is_finite() {
                lb[j]
            } else if ub[j].is_finite() {
                ub[j]
            } else {
                0.0
            };
        }
        let t = a.clone();
        let mut s = Self {
            m,
            n,
            cost: &lp.objective,
            a,
            lb,
            ub,
            t,
            basic: (n..n + m).collect(),
            nonbasic: (0..n).collect(),
            x,
            opts,
            feas_tol: opts.feasibility_tol,
            pivots: 0,
            since_refactor: 0,
            refactor_every: 100,
        };
        s.recompute_basic_values();
        s
    }

    fn budget(&self) -> usize {
        self.opts
            .max_pivots
            .unwrap_or(50 * (self.m + self.n) + 10_000)
    }

    #[inline]
    fn tol(&self, bound: f64) -> f64 {
        self.feas_tol * (1.0 + bound.abs())
    }

    fn recompute_basic_values(&mut self) {
        let n = self.n;
        for r in 0..self.m {
            let row = &self.t[r * n..(r + 1) * n];
            let mut v = 0.0;
            for (k, &coef) in row.iter().enumerate() {
                if coef != 0.0 {
                    v += coef * self.x[self.nonbasic[k]];
                }
            }
            self.x[self.basic[r]] = v;
        }
    }

    /// Phase-one direction: +1 for basic variables below their lower bound,
    /// -1 above the upper bound, 0 otherwise.
    fn infeasibility_signs(&self) -> Option<Vec<f64>> {
        let mut any = false;
        let signs = self
            .basic
            .iter()
            .map(|&v| {
                let xv = self.x[v];
                if xv < self.lb[v] - self.tol(self.lb[v]) {
                    any = true;
                    1.0
                } else if xv > self.ub[v] + self.tol(self.ub[v]) {
                    any = true;
                    -1.0
                } else {
                    0.0
                }
            })
            .collect();
        any.then_some(signs)
    }

    fn phase_one_costs(&self, signs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut d = vec![0.0; n];
        for (r, &s) in signs.iter().enumerate() {
            if s != 0.0 {
                for (dk, &t) in d.iter_mut().zip(&self.t[r * n..(r + 1) * n]) {
                    *dk += s * t;
                }
            }
        }
        d
    }

    fn phase_two_costs(&self) -> Vec<f64> {
        let n = self.n;
        let mut d: Vec<f64> = self
            .nonbasic
            .iter()
            .map(|&v| if v < n { self.cost[v] } else { 0.0 })
            .collect();
        for (r, &v) in self.basic.iter().enumerate() {
            if v < n && self.cost[v] != 0.0 {
                let c = self.cost[v];
                for (dk, &t) in d.iter_mut().zip(&self.t[r * n..(r + 1) * n]) {
                    *dk += c * t;
                }
            }
        }
        d
    }

    /// Entering column and direction (+1 increase, -1 decrease).
    fn choose_entering(&self, d: &[f64], bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        for (k, &dk) in d.iter().enumerate() {
            let v = self.nonbasic[k];
            let xv = self.x[v];
            let dir = if dk > tol && xv < self.ub[v] {
                1.0
            } else if dk < -tol && xv > self.lb[v] {
                -1.0
            } else {
                continue;
            };
            let score = dk.abs();
            let better = match best {
                None => true,
                Some((bk, _, bs)) => {
                    if bland {
                        v < self.nonbasic[bk]
                    } else {
                        score > bs
                    }
                }
            };
            if better {
                best = Some((k, dir, score));
            }
        }
        best.map(|(k, dir, _)| (k, dir))
    }

    /// Step length and leaving choice for entering column `c` moving in
    /// direction `dir`. `None` means the step is unbounded.
    fn ratio_test(&self, c: usize, dir: f64, bland: bool) -> Option<(f64, Leaving)> {
        let n = self.n;
        let ev = self.nonbasic[c];
        let own = self.ub[ev] - self.lb[ev];
        let piv_tol = self.opts.pivot_tol;

        // Per-row step limit: (exact ratio, relaxed ratio).
        let limit = |r: usize, alpha: f64| -> Option<(f64, f64)> {
            let bv = self.basic[r];
            let xv = self.x[bv];
            let (lo, hi) = (self.lb[bv], self.ub[bv]);
            if alpha > 0.0 {
                if xv < lo - self.tol(lo) {
                    Some(((lo - xv) / alpha, (lo - xv + self.tol(lo)) / alpha))
                } else if xv > hi + self.tol(hi) || hi == f64::INFINITY {
                    None
                } else {
                    Some((((hi - xv) / alpha).max(0.0), (hi - xv + self.tol(hi)) / alpha))
                }
            } else if xv > hi + self.tol(hi) {
                Some(((hi - xv) / alpha, (hi - xv - self.tol(hi)) / alpha))
            } else if xv < lo - self.tol(lo) || lo == f64::NEG_INFINITY {
                None
            } else {
                Some((((lo - xv) / alpha).max(0.0), (lo - xv - self.tol(lo)) / alpha))
            }
        };

        if bland {
            let mut best: Option<(f64, usize)> = None;
            for r in 0..self.m {
                let alpha = self.t[r * n + c] * dir;
                if alpha.abs() <= piv_tol {
                    continue;
                }
                if let Some((ratio, _)) = limit(r, alpha) {
                    let better = match best {
                        None => true,
                        Some((br, brow)) => {
                            ratio < br - 1e-15 || (ratio <= br + 1e-15 && self.basic[r] < self.basic[brow])
                        }
                    };
                    if better {
                        best = Some((ratio, r));
                    }
                }
            }
            return match best {
                Some((ratio, r)) if ratio < own => Some((ratio, Leaving::Row(r))),
                _ if own.is_finite() => Some((own, Leaving::Flip)),
                _ => None,
            };
        }

        // Harris two-pass ratio test.
        let mut relaxed = f64::INFINITY;
        for r in 0..self.m {
            let alpha = self.t[r * n + c] * dir;
            if alpha.abs() <= piv_tol {
                continue;
            }
            if let Some((_, rel)) = limit(r, alpha) {
                relaxed = relaxed.min(rel);
            }
        }
        if own <= relaxed && own.is_finite() {
            return Some((own, Leaving::Flip));
        }
        if relaxed == f64::INFINITY {
            return None;
        }
        let mut best: Option<(f64, usize, f64)> = None;
        for r in 0..self.m {
            let alpha = self.t[r * n + c] * dir;
            if alpha.abs() <= piv_tol {
                continue;
            }
            if let Some((ratio, _)) = limit(r, alpha) {
                if ratio <= relaxed {
                    let better = match best {
                        None => true,
                        Some((_, _, ba)) => alpha.abs() > ba,
                    };
                    if better {
                        best = Some((ratio, r, alpha.abs()));
                    }
                }
            }
        }
        best.map(|(ratio, r, _)| (ratio.max(0.0), Leaving::Row(r)))
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let n = self.n;
        let piv = self.t[r * n + c];
        {
            let row = &mut self.t[r * n..(r + 1) * n];
            for v in row.iter_mut() {
                *v = -*v / piv;
            }
            row[c] = 1.0 / piv;
        }
        let pivot_row: Vec<f64> = self.t[r * n..(r + 1) * n].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + c];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * n..(i + 1) * n];
            for (dst, &pr) in row.iter_mut().zip(&pivot_row) {
                *dst += f * pr;
            }
            row[c] = f * pivot_row[c];
        }
        std::mem::swap(&mut self.basic[r], &mut self.nonbasic[c]);
        self.pivots += 1;
        self.since_refactor += 1;
    }

    /// Rebuilds the tableau from the scaled rows for the current basis.
    fn refactor(&mut self) -> bool {
        let (m, n) = (self.m, self.n);
        // Basic structurals, nonbasic logicals and nonbasic structurals.
        let basic_struct: Vec<(usize, usize)> = self
            .basic
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v < n)
            .map(|(r, &v)| (r, v))
            .collect();
        let nb_logical: Vec<(usize, usize)> = self
            .nonbasic
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v >= n)
            .map(|(k, &v)| (k, v - n))
            .collect();
        let nb_struct: Vec<(usize, usize)> = self
            .nonbasic
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v < n)
            .map(|(k, &v)| (k, v))
            .collect();
        let s = basic_struct.len();
        if s != nb_logical.len() {
            return false;
        }
        let a = &self.a;
        let at = |row: usize, col: usize| a[row * n + col];

        // M = A[R, S]; inverse and Y = M^-1 A[R, N'].
        let mut mat = vec![0.0; s * s];
        for (bi, &(_, row)) in nb_logical.iter().enumerate() {
            for (aj, &(_, var)) in basic_struct.iter().enumerate() {
                mat[bi * s + aj] = at(row, var);
            }
        }
        let lu = match DenseLu::factor(mat, s) {
            Some(lu) => lu,
            None => return false,
        };
        // minv[a][b]: column b of M^-1 is the solution of M y = e_b.
        let mut minv = vec![0.0; s * s];
        let mut rhs = vec![0.0; s];
        for b in 0..s {
            rhs.iter_mut().for_each(|v| *v = 0.0);
            rhs[b] = 1.0;
            lu.solve_in_place(&mut rhs);
            for a_ in 0..s {
                minv[a_ * s + b] = rhs[a_];
            }
        }
        let nn = nb_struct.len();
        let mut y = vec![0.0; s * nn];
        for (kk, &(_, var)) in nb_struct.iter().enumerate() {
            for (bi, &(_, row)) in nb_logical.iter().enumerate() {
                rhs[bi] = at(row, var);
            }
            lu.solve_in_place(&mut rhs);
            for a_ in 0..s {
                y[a_ * nn + kk] = rhs[a_];
            }
        }

        let mut t = vec![0.0; m * n];
        for (a_, &(r, _)) in basic_struct.iter().enumerate() {
            let dst = &mut t[r * n..(r + 1) * n];
            for (b, &(k, _)) in nb_logical.iter().enumerate() {
                dst[k] = minv[a_ * s + b];
            }
            for (kk, &(k, _)) in nb_struct.iter().enumerate() {
                dst[k] = -y[a_ * nn + kk];
            }
        }
        let mut u = vec![0.0; s];
        for (r, &v) in self.basic.iter().enumerate() {
            if v < n {
                continue;
            }
            let row = v - n;
            for (aj, &(_, var)) in basic_struct.iter().enumerate() {
                u[aj] = at(row, var);
            }
            let dst = &mut t[r * n..(r + 1) * n];
            for (b, &(k, _)) in nb_logical.iter().enumerate() {
                let mut acc = 0.0;
                for (a_, &ua) in u.iter().enumerate() {
                    if ua != 0.0 {
                        acc += ua * minv[a_ * s + b];
                    }
                }
                dst[k] = acc;
            }
            for (kk, &(k, var)) in nb_struct.iter().enumerate() {
                let mut acc = at(row, var);
                for (a_, &ua) in u.iter().enumerate() {
                    if ua != 0.0 {
                        acc -= ua * y[a_ * nn + kk];
                    }
                }
                dst[k] = acc;
            }
        }
        self.t = t;
        self.since_refactor = 0;
        // Rebuild cost is about s pivots; keep it amortized.
        self.refactor_every = 100.max(s);
        self.recompute_basic_values();
        true
    }

    fn run(&mut self) -> LpStatus {
        let budget = self.budget();
        let mut degenerate_run = 0usize;
        loop {
            if self.pivots > budget {
                return LpStatus::NumericalFailure;
            }
            if self.since_refactor >= self.refactor_every && !self.refactor() {
                return LpStatus::NumericalFailure;
            }
            let infeasible = self.infeasibility_signs();
            let d = match &infeasible {
                Some(signs) => self.phase_one_costs(signs),
                None => self.phase_two_costs(),
            };
            let bland = degenerate_run >= self.opts.stall_threshold;
            let Some((c, dir)) = self.choose_entering(&d, bland) else {
                if self.since_refactor > 0 {
                    if !self.refactor() {
                        return LpStatus::NumericalFailure;
                    }
                    continue;
                }
                return if infeasible.is_some() {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };
            let Some((step, leaving)) = self.ratio_test(c, dir, bland) else {
                if self.since_refactor > 0 {
                    if !self.refactor() {
                        return LpStatus::NumericalFailure;
                    }
                    continue;
                }
                return if infeasible.is_some() {
                    LpStatus::NumericalFailure
                } else {
                    LpStatus::Unbounded
                };
            };

            if step * d[c].abs() <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            let n = self.n;
            let ev = self.nonbasic[c];
            if step > 0.0 {
                self.x[ev] += dir * step;
                for r in 0..self.m {
                    let coef = self.t[r * n + c];
                    if coef != 0.0 {
                        self.x[self.basic[r]] += coef * dir * step;
                    }
                }
            }
            match leaving {
                Leaving::Flip => {
                    self.x[ev] = if dir > 0.0 { self.ub[ev] } else { self.lb[ev] };
                    self.pivots += 1;
                }
                Leaving::Row(r) => {
                    let lv = self.basic[r];
                    let alpha = self.t[r * n + c] * dir;
                    // The leaving variable rests on the bound it was moving to.
                    let target = if alpha > 0.0 {
                        if self.x[lv] < self.lb[lv] + self.tol(self.lb[lv]) || self.ub[lv] == f64::INFINITY {
                            self.lb[lv]
                        } else {
                            self.ub[lv]
                        }
                    } else if self.x[lv] > self.ub[lv] - self.tol(self.ub[lv]) || self.lb[lv] == f64::NEG_INFINITY {
                        self.ub[lv]
                    } else {
                        self.lb[lv]
                    };
                    self.pivot(r, c);
                    let shift = target - self.x[lv];
                    self.x[lv] = target;
                    if shift != 0.0 {
                        // The leaving variable is now nonbasic at column c.
                        for row in 0..self.m {
                            let coef = self.t[row * n + c];
                            if coef != 0.0 {
                                self.x[self.basic[row]] += coef * shift;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// LU factorization with partial pivoting of a small dense square matrix.
struct DenseLu {
    lu: Vec<f64>,
    perm: Vec<usize>,
    n: usize,
}

impl DenseLu {
    fn factor(mut a: Vec<f64>, n: usize) -> Option<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = 1e-13 * scale.max(1e-300);
        for k in 0..n {
            let (p, max) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if max <= tiny {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let piv = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / piv;
                if f == 0.0 {
                    continue;
                }
                a[i * n + k] = f;
                for j in k + 1..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
        Some(Self { lu: a, perm, n })
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = y[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * y[j];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..n {
                acc -= self.lu[i * n + j] * y[j];
            }
            y[i] = acc / self.lu[i * n + i];
        }
        b.copy_from_slice(&y);
    }
}
