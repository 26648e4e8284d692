//! LP overestimator of the revenue over a price box.
//!
//! With `tau[b] = 1 / f[b](p)` for every block `b = (i, n, l)` (priced `i`),
//! revenue is `sum_b w[b] tau[b] p_i`, bilinear in `(tau, p)`. Writing
//! `W[b][j]` for the product `tau[b] p_j` gives an LP relaxation with
//!
//! * `A p >= b`,
//! * supporting hyperplanes `f(p^k) tau + grad f(p^k) . (W - p^k tau) <= 1` at
//!   pool anchors `p^k` (valid because `f` is convex and `f(p) tau = 1`),
//! * `A W >= b tau` and `LB_tau (A p - b) <= A W - b tau <= UB_tau (A p - b)`,
//!   where the price box itself serves as `A` when the instance has no rows,
//! * the McCormick envelope of `W = tau p` over `[LB_tau, UB_tau] x box`.
//!
//! Any feasible `p` lifts to the feasible point `(p, 1/f(p), p/f(p))`, so the
//! LP value bounds the revenue from above on the box.
//!
//! For fixed `p` the LP splits into one small LP per block, so its value is
//! `max_p sum_b phi_b(p)` with concave piecewise-linear `phi_b`. Besides the
//! monolithic LP, [`node_upper_bound_with`] can maximize that function with a
//! cutting-plane method in price space, which keeps every LP tiny.

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::model::{dot, MixedLogitInstance, PriceVector};

/// Anchors with `ln f` above this are skipped (their `1/f` underflows).
const MAX_ANCHOR_LOG_F: f64 = 600.0;
/// Relative widening applied to computed tau bounds.
const TAU_SAFETY: f64 = 1e-12;
/// Largest priced count for vertex enumeration in [`tau_lower_bound`].
pub const MAX_VERTEX_DIMS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeBox {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl NodeBox {
    pub fn new(lb: Vec<f64>, ub: Vec<f64>) -> Result<Self> {
        if lb.len() != ub.len() {
            return Err(Error::Config("box bounds differ in length".into()));
        }
        if lb.iter().zip(&ub).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::Config("box needs finite lb <= ub".into()));
        }
        Ok(Self { lb, ub })
    }

    pub fn root(inst: &MixedLogitInstance) -> Self {
        Self {
            lb: inst.price_lb().to_vec(),
            ub: inst.price_ub().to_vec(),
        }
    }

    pub fn dims(&self) -> usize {
        self.lb.len()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.ub[j] - self.lb[j]
    }

    pub fn center(&self) -> PriceVector {
        PriceVector(self.lb.iter().zip(&self.ub).map(|(l, u)| 0.5 * (l + u)).collect())
    }

    /// Half the Euclidean diagonal.
    pub fn radius(&self) -> f64 {
        0.5 * (0..self.dims()).map(|j| self.width(j).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.iter()
            .zip(self.lb.iter().zip(&self.ub))
            .all(|(&x, (&l, &u))| x >= l - tol && x <= u + tol)
    }

    pub fn clip(&self, p: &mut [f64]) {
        for (x, (&l, &u)) in p.iter_mut().zip(self.lb.iter().zip(&self.ub)) {
            *x = x.clamp(l, u);
        }
    }

    pub fn is_within(&self, outer: &NodeBox) -> bool {
        (0..self.dims()).all(|j| self.lb[j] >= outer.lb[j] && self.ub[j] <= outer.ub[j])
    }

    pub fn volume(&self) -> f64 {
        (0..self.dims()).map(|j| self.width(j)).product()
    }

    pub fn region(&self) -> crate::local_search::Region<'_> {
        crate::local_search::Region {
            lb: &self.lb,
            ub: &self.ub,
        }
    }
}

/// Hyperplane anchors, newest last.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPool {
    points: Vec<PriceVector>,
    capacity: usize,
}

pub const DEFAULT_POOL_CAPACITY: usize = 20;
const POOL_DEDUP_TOL: f64 = 1e-9;

impl Default for PointPool {
    fn default() -> Self {
        Self::new(DEFAULT_POOL_CAPACITY)
    }
}

impl PointPool {
    pub fn new(capacity: usize) -> Self {
        Self {
            points: Vec::new(),
            capacity: capacity.max(1),
        }
    }

    /// Adds `p` unless a point within l-infinity distance 1e-9 is present;
    /// evicts the oldest point beyond capacity. Returns whether `p` was added.
    pub fn push(&mut self, p: PriceVector) -> bool {
        let dup = self.points.iter().any(|q| {
            q.iter()
                .zip(p.iter())
                .all(|(a, b)| (a - b).abs() <= POOL_DEDUP_TOL)
        });
        if dup {
            return false;
        }
        self.points.push(p);
        if self.points.len() > self.capacity {
            self.points.remove(0);
        }
        true
    }

    pub fn points(&self) -> &[PriceVector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

/// Bounds on `tau[b] = 1 / f[b]` for blocks `b = (slot * N + n) * L + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauBounds {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl TauBounds {
    pub fn block(inst: &MixedLogitInstance, slot: usize, n: usize, l: usize) -> usize {
        (slot * inst.customers() + n) * inst.classes() + l
    }
}

fn priced_slot(inst: &MixedLogitInstance, i: usize) -> Result<usize> {
    if i >= inst.num_alternatives() {
        return Err(Error::Index {
            what: "alternative",
            index: i,
            limit: inst.num_alternatives(),
        });
    }
    inst.price_slot(i)
        .ok_or_else(|| Error::Config(format!("alternative {i} has no decision price")))
}

fn check_block(inst: &MixedLogitInstance, bx: &NodeBox, i: usize, n: usize, l: usize) -> Result<usize> {
    let slot = priced_slot(inst, i)?;
    if n >= inst.customers() {
        return Err(Error::Index {
            what: "customer",
            index: n,
            limit: inst.customers(),
        });
    }
    if l >= inst.classes() {
        return Err(Error::Index {
            what: "class",
            index: l,
            limit: inst.classes(),
        });
    }
    if bx.dims() != inst.num_priced() {
        return Err(Error::PriceLength {
            got: bx.dims(),
            expected: inst.num_priced(),
        });
    }
    Ok(slot)
}

/// `ln f[i][n][l](p)` and its gradient.
fn log_f_and_grad(inst: &MixedLogitInstance, p: &[f64], i: usize, n: usize, l: usize, grad: &mut [f64]) -> f64 {
    let mut k = inst.kernel();
    inst.eval_class(p, n, l, &mut k);
    inst.log_f_gradient_from_kernel(&k, i, n, l, grad);
    k.log_sum_exp() - k.utilities[i]
}

/// Lower bound on `min ln f` over the box, from projected gradient descent
/// followed by the linearization bound `ln f(x) + min_box g . (y - x)`, which
/// holds for convex `ln f` whatever the quality of `x`.
fn min_log_f(inst: &MixedLogitInstance, bx: &NodeBox, i: usize, n: usize, l: usize) -> f64 {
    const MAX_ITERS: usize = 500;
    const GRAD_TOL: f64 = 1e-8;
    let np = bx.dims();
    let mut x = bx.center().0;
    let mut g = vec![0.0; np];
    let mut h = log_f_and_grad(inst, &x, i, n, l, &mut g);
    let span = (0..np).map(|j| bx.width(j)).fold(0.0, f64::max);
    let mut step = {
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax > 0.0 {
            span / gmax
        } else {
            1.0
        }
    };
    let mut trial = vec![0.0; np];
    let mut g_trial = vec![0.0; np];
    for _ in 0..MAX_ITERS {
        let pg: f64 = (0..np)
            .map(|j| (x[j] - (x[j] - g[j]).clamp(bx.lb[j], bx.ub[j])).powi(2))
            .sum::<f64>()
            .sqrt();
        if pg <= GRAD_TOL {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            for j in 0..np {
                trial[j] = (x[j] - step * g[j]).clamp(bx.lb[j], bx.ub[j]);
            }
            let decrease: f64 = (0..np).map(|j| g[j] * (x[j] - trial[j])).sum();
            let ht = log_f_and_grad(inst, &trial, i, n, l, &mut g_trial);
            if ht <= h - 1e-4 * decrease {
                accepted = decrease > 0.0 || ht < h;
                std::mem::swap(&mut x, &mut trial);
                std::mem::swap(&mut g, &mut g_trial);
                h = ht;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let slack: f64 = (0..np)
        .map(|j| (g[j] * (bx.lb[j] - x[j])).min(g[j] * (bx.ub[j] - x[j])))
        .sum();
    h + slack.min(0.0)
}

/// `UB_tau = 1 / min_box f`, certified by a linearization bound.
pub fn tau_upper_bound(inst: &MixedLogitInstance, bx: &NodeBox, i: usize, n: usize, l: usize) -> Result<f64> {
    check_block(inst, bx, i, n, l)?;
    Ok(upper_from_min_log(min_log_f(inst, bx, i, n, l)))
}

fn upper_from_min_log(min_log: f64) -> f64 {
    ((-min_log.max(0.0)).exp() * (1.0 + TAU_SAFETY)).min(1.0)
}

/// `LB_tau = 1 / max_box f`; the maximum of the convex `f` is attained at a
/// vertex, so all `2^dims` vertices are enumerated.
pub fn tau_lower_bound(inst: &MixedLogitInstance, bx: &NodeBox, i: usize, n: usize, l: usize) -> Result<f64> {
    check_block(inst, bx, i, n, l)?;
    let np = bx.dims();
    if np > MAX_VERTEX_DIMS {
        return Err(Error::Config(format!(
            "{np} priced alternatives exceed the vertex enumeration limit of {MAX_VERTEX_DIMS}; \
             use tau_lower_bound_interval"
        )));
    }
    let mut k = inst.kernel();
    let mut v = vec![0.0; np];
    let mut max_log = f64::NEG_INFINITY;
    for mask in 0u64..(1u64 << np) {
        for j in 0..np {
            v[j] = if mask >> j & 1 == 1 { bx.ub[j] } else { bx.lb[j] };
        }
        inst.eval_class(&v, n, l, &mut k);
        max_log = max_log.max(k.log_sum_exp() - k.utilities[i]);
    }
    Ok((-max_log).exp() * (1.0 - TAU_SAFETY))
}

/// Cheaper `LB_tau` bounding every term `exp(V_j - V_i)` of `f` separately.
pub fn tau_lower_bound_interval(
    inst: &MixedLogitInstance,
    bx: &NodeBox,
    i: usize,
    n: usize,
    l: usize,
) -> Result<f64> {
    check_block(inst, bx, i, n, l)?;
    let range = |j: usize| -> (f64, f64) {
        let q = inst.exo_utility(j, n, l);
        match inst.price_slot(j) {
            Some(s) => {
                let b = inst.price_coef(j, n, l);
                let (a, c) = (b * bx.lb[s] + q, b * bx.ub[s] + q);
                (a.min(c), a.max(c))
            }
            None => (q, q),
        }
    };
    let vi_min = range(i).0;
    let exps: Vec<f64> = (0..inst.num_alternatives())
        .filter(|&j| j != i)
        .map(|j| range(j).1 - vi_min)
        .collect();
    let shift = exps.iter().copied().fold(0.0f64, f64::max);
    let log_max = shift + ((-shift).exp() + exps.iter().map(|e| (e - shift).exp()).sum::<f64>()).ln();
    Ok((-log_max).exp() * (1.0 - TAU_SAFETY))
}

/// Tau bounds for every block over `bx`; falls back to the interval bound
/// when vertex enumeration is too large.
pub fn tau_bounds(inst: &MixedLogitInstance, bx: &NodeBox) -> Result<TauBounds> {
    let nb = inst.num_priced() * inst.customers() * inst.classes();
    let (mut lb, mut ub) = (vec![0.0; nb], vec![0.0; nb]);
    for (slot, &i) in inst.priced_alternatives().iter().enumerate() {
        for n in 0..inst.customers() {
            for l in 0..inst.classes() {
                let b = TauBounds::block(inst, slot, n, l);
                ub[b] = tau_upper_bound(inst, bx, i, n, l)?;
                lb[b] = if bx.dims() <= MAX_VERTEX_DIMS {
                    tau_lower_bound(inst, bx, i, n, l)?
                } else {
                    tau_lower_bound_interval(inst, bx, i, n, l)?
                };
                lb[b] = lb[b].min(ub[b]);
            }
        }
    }
    Ok(TauBounds { lb, ub })
}

/// Supporting hyperplane of `f[b]` at an anchor, kept divided by `f(p^k)`:
/// `tau + grad ln f(p^k) . (W - p^k tau) <= 1 / f(p^k)`.
#[derive(Debug, Clone)]
struct Anchor {
    point: Vec<f64>,
    inv_f: f64,
    log_grad: Vec<f64>,
}

fn anchors_for_block(inst: &MixedLogitInstance, pool: &PointPool, i: usize, n: usize, l: usize) -> Vec<Anchor> {
    let np = inst.num_priced();
    let mut k = inst.kernel();
    pool.points()
        .iter()
        .filter_map(|p| {
            inst.eval_class(p, n, l, &mut k);
            let log_f = k.log_sum_exp() - k.utilities[i];
            let mut log_grad = vec![0.0; np];
            inst.log_f_gradient_from_kernel(&k, i, n, l, &mut log_grad);
            (log_f.is_finite() && log_f <= MAX_ANCHOR_LOG_F).then(|| Anchor {
                point: p.0.clone(),
                inv_f: (-log_f).exp(),
                log_grad,
            })
        })
        .collect()
}

/// Rows of the `A p >= b` system used by the lifted families.
fn lifting_rows(inst: &MixedLogitInstance, bx: &NodeBox) -> Vec<(Vec<f64>, f64)> {
    match inst.constraints() {
        Some(c) if !c.is_empty() => c.a.iter().cloned().zip(c.b.iter().copied()).collect(),
        _ => {
            let np = bx.dims();
            let mut rows = Vec::with_capacity(2 * np);
            for j in 0..np {
                let mut e = vec![0.0; np];
                e[j] = 1.0;
                rows.push((e.clone(), bx.lb[j]));
                e[j] = -1.0;
                rows.push((e, -bx.ub[j]));
            }
            rows
        }
    }
}

/// Column indices of one block inside some LP.
struct BlockCols<'a> {
    p: &'a [usize],
    tau: usize,
    w: &'a [usize],
}

/// Adds `entries rel rhs` scaled to unit max coefficient, so the solver's
/// row tolerance is relative to the row's own magnitude.
fn add_normalized(lp: &mut LinearProgram, entries: &[(usize, f64)], rel: Relation, rhs: f64) {
    let scale = entries.iter().fold(0.0f64, |m, &(_, v)| m.max(v.abs()));
    if scale > 0.0 && scale.is_finite() {
        let scaled: Vec<(usize, f64)> = entries.iter().map(|&(j, v)| (j, v / scale)).collect();
        lp.add_sparse_row(&scaled, rel, rhs / scale);
    } else {
        lp.add_sparse_row(entries, rel, rhs);
    }
}

/// Emits every row of one block into `lp`.
fn emit_block_rows(
    lp: &mut LinearProgram,
    cols: &BlockCols<'_>,
    anchors: &[Anchor],
    lift: &[(Vec<f64>, f64)],
    bx: &NodeBox,
    tau_lb: f64,
    tau_ub: f64,
) {
    let np = bx.dims();
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(2 * np + 1);
    for a in anchors {
        entries.clear();
        entries.push((cols.tau, 1.0 - dot(&a.log_grad, &a.point)));
        entries.extend((0..np).map(|j| (cols.w[j], a.log_grad[j])));
        add_normalized(lp, &entries, Relation::Le, a.inv_f);
    }
    for (row, rhs) in lift {
        entries.clear();
        entries.extend((0..np).map(|j| (cols.w[j], row[j])));
        entries.push((cols.tau, -rhs));
        add_normalized(lp, &entries, Relation::Ge, 0.0);
        // (A W - b tau) - LB (A p - b) >= 0 and (A W - b tau) - UB (A p - b) <= 0.
        for (bound, rel) in [(tau_lb, Relation::Ge), (tau_ub, Relation::Le)] {
            let mut e = entries.clone();
            e.extend((0..np).map(|j| (cols.p[j], -bound * row[j])));
            add_normalized(lp, &e, rel, -bound * rhs);
        }
    }
    for j in 0..np {
        let (lo, hi) = (bx.lb[j], bx.ub[j]);
        let (w, p, t) = (cols.w[j], cols.p[j], cols.tau);
        add_normalized(lp, &[(w, 1.0), (p, -tau_lb), (t, -lo)], Relation::Ge, -tau_lb * lo);
        add_normalized(lp, &[(w, 1.0), (p, -tau_ub), (t, -hi)], Relation::Ge, -tau_ub * hi);
        add_normalized(lp, &[(w, 1.0), (p, -tau_ub), (t, -lo)], Relation::Le, -tau_ub * lo);
        add_normalized(lp, &[(w, 1.0), (p, -tau_lb), (t, -hi)], Relation::Le, -tau_lb * hi);
    }
}

/// Variable layout of [`build_relaxation`]: prices, then one `tau` per block,
/// then `W[b][j]` block-major.
#[derive(Debug, Clone, Copy)]
pub struct RelaxationLayout {
    pub priced: usize,
    pub blocks: usize,
}

impl RelaxationLayout {
    pub fn of(inst: &MixedLogitInstance) -> Self {
        Self {
            priced: inst.num_priced(),
            blocks: inst.num_priced() * inst.customers() * inst.classes(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.priced + self.blocks + self.blocks * self.priced
    }

    pub fn p(&self, j: usize) -> usize {
        j
    }

    pub fn tau(&self, b: usize) -> usize {
        self.priced + b
    }

    pub fn w(&self, b: usize, j: usize) -> usize {
        self.priced + self.blocks + b * self.priced + j
    }
}

fn check_relaxation_inputs(inst: &MixedLogitInstance, bx: &NodeBox, pool: &PointPool) -> Result<()> {
    if bx.dims() != inst.num_priced() {
        return Err(Error::PriceLength {
            got: bx.dims(),
            expected: inst.num_priced(),
        });
    }
    if pool.is_empty() {
        return Err(Error::Config("the point pool must not be empty".into()));
    }
    if let Some(p) = pool.points().iter().find(|p| p.len() != inst.num_priced()) {
        return Err(Error::PriceLength {
            got: p.len(),
            expected: inst.num_priced(),
        });
    }
    Ok(())
}

/// The full relaxation LP over `bx`.
pub fn build_relaxation(
    inst: &MixedLogitInstance,
    bx: &NodeBox,
    pool: &PointPool,
    tb: &TauBounds,
) -> Result<LinearProgram> {
    check_relaxation_inputs(inst, bx, pool)?;
    let layout = RelaxationLayout::of(inst);
    if tb.lb.len() != layout.blocks || tb.ub.len() != layout.blocks {
        return Err(Error::Config("tau bounds do not match the block count".into()));
    }
    let np = layout.priced;
    let mut objective = vec![0.0; layout.num_vars()];
    let mut lp_bounds = (vec![0.0; layout.num_vars()], vec![0.0; layout.num_vars()]);
    let lift = lifting_rows(inst, bx);
    let p_cols: Vec<usize> = (0..np).map(|j| layout.p(j)).collect();
    for j in 0..np {
        lp_bounds.0[j] = bx.lb[j];
        lp_bounds.1[j] = bx.ub[j];
    }
    let mut lp = LinearProgram::new(vec![]);
    lp.num_vars = layout.num_vars();
    if let Some(c) = inst.constraints() {
        for (row, &b) in c.a.iter().zip(&c.b) {
            let mut coeffs = vec![0.0; layout.num_vars()];
            coeffs[..np].copy_from_slice(row);
            lp.add_row(coeffs, Relation::Ge, b);
        }
    }
    for (slot, &i) in inst.priced_alternatives().iter().enumerate() {
        for n in 0..inst.customers() {
            for l in 0..inst.classes() {
                let b = TauBounds::block(inst, slot, n, l);
                let w_cols: Vec<usize> = (0..np).map(|j| layout.w(b, j)).collect();
                objective[layout.w(b, slot)] = inst.class_weight(l, n);
                let (tl, tu) = (tb.lb[b], tb.ub[b]);
                lp_bounds.0[layout.tau(b)] = tl;
                lp_bounds.1[layout.tau(b)] = tu;
                for j in 0..np {
                    lp_bounds.0[layout.w(b, j)] = tl * bx.lb[j];
                    lp_bounds.1[layout.w(b, j)] = tu * bx.ub[j];
                }
                let anchors = anchors_for_block(inst, pool, i, n, l);
                let cols = BlockCols {
                    p: &p_cols,
                    tau: layout.tau(b),
                    w: &w_cols,
                };
                emit_block_rows(&mut lp, &cols, &anchors, &lift, bx, tl, tu);
            }
        }
    }
    lp.objective = objective;
    lp.var_lb = lp_bounds.0;
    lp.var_ub = lp_bounds.1;
    Ok(lp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    /// Monolithic LP when small, cutting planes otherwise.
    Auto,
    Direct,
    Decomposed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationOptions {
    pub method: BoundMethod,
    /// The decomposed solve may stop once its bound drops to this value.
    pub cutoff: Option<f64>,
    /// Relative gap at which the cutting-plane loop stops.
    pub tolerance: f64,
    pub max_cuts: usize,
    /// `Auto` uses the monolithic LP when `vars * rows` is at most this.
    pub direct_size_limit: usize,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        Self {
            method: BoundMethod::Auto,
            cutoff: None,
            tolerance: 1e-7,
            max_cuts: 400,
            direct_size_limit: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeBoundStatus {
    /// `upper_bound` is the relaxation value (decomposed: within tolerance or
    /// already below the cutoff).
    Solved,
    /// `box` meets no feasible price; `upper_bound` is `-inf`.
    Empty,
    /// The relaxation LP claimed infeasibility although the box is not empty;
    /// `upper_bound` is `+inf`.
    Suspect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeBound {
    pub upper_bound: f64,
    /// Price part of the relaxation optimum, clipped into the box.
    pub candidate: Option<PriceVector>,
    pub status: NodeBoundStatus,
    pub lp_solves: usize,
}

/// Relaxation bound over `bx` with default options; returns the bound and a
/// candidate price vector.
pub fn node_upper_bound(inst: &MixedLogitInstance, bx: &NodeBox, pool: &PointPool) -> Result<(f64, PriceVector)> {
    let nb = node_upper_bound_with(inst, bx, pool, &RelaxationOptions::default())?;
    let candidate = nb.candidate.unwrap_or_else(|| bx.center());
    Ok((nb.upper_bound, candidate))
}

pub fn node_upper_bound_with(
    inst: &MixedLogitInstance,
    bx: &NodeBox,
    pool: &PointPool,
    opts: &RelaxationOptions,
) -> Result<NodeBound> {
    check_relaxation_inputs(inst, bx, pool)?;
    if inst.has_constraints() && !box_meets_rows(inst, bx)? {
        return Ok(NodeBound {
            upper_bound: f64::NEG_INFINITY,
            candidate: None,
            status: NodeBoundStatus::Empty,
            lp_solves: 1,
        });
    }
    let tb = tau_bounds(inst, bx)?;
    let method = match opts.method {
        BoundMethod::Auto => {
            let layout = RelaxationLayout::of(inst);
            let rows_per_block = pool.len() + 3 * lifting_rows(inst, bx).len() + 4 * layout.priced;
            let rows = layout.blocks * rows_per_block;
            if layout.num_vars().saturating_mul(rows) <= opts.direct_size_limit {
                BoundMethod::Direct
            } else {
                BoundMethod::Decomposed
            }
        }
        m => m,
    };
    match method {
        BoundMethod::Direct => solve_direct(inst, bx, pool, &tb),
        _ => solve_decomposed(inst, bx, pool, &tb, opts),
    }
}

fn box_meets_rows(inst: &MixedLogitInstance, bx: &NodeBox) -> Result<bool> {
    match crate::local_search::feasible_vertex(inst, bx.region(), vec![0.0; bx.dims()]) {
        Ok(_) => Ok(true),
        Err(Error::InfeasibleInstance) => Ok(false),
        Err(e) => Err(e),
    }
}

fn solve_direct(inst: &MixedLogitInstance, bx: &NodeBox, pool: &PointPool, tb: &TauBounds) -> Result<NodeBound> {
    let lp = build_relaxation(inst, bx, pool, tb)?;
    let sol = lp.solve();
    match sol.status {
        LpStatus::Optimal => {
            let mut p = sol.x.expect("optimal solution")[..bx.dims()].to_vec();
            bx.clip(&mut p);
            Ok(NodeBound {
                upper_bound: sol.objective_value.expect("optimal value"),
                candidate: Some(PriceVector(p)),
                status: NodeBoundStatus::Solved,
                lp_solves: 1,
            })
        }
        LpStatus::Infeasible => Ok(NodeBound {
            upper_bound: f64::INFINITY,
            candidate: None,
            status: NodeBoundStatus::Suspect,
            lp_solves: 1,
        }),
        LpStatus::Unbounded => Err(Error::NumericalFailure("relaxation LP reported unbounded".into())),
        LpStatus::NumericalFailure => Err(Error::NumericalFailure("relaxation LP".into())),
    }
}

/// One block of the decomposed relaxation.
struct Block {
    slot: usize,
    weight: f64,
    tau_lb: f64,
    tau_ub: f64,
    anchors: Vec<Anchor>,
}

/// Evaluates `sum_b phi_b(p)` and a supergradient.
fn evaluate_blocks(
    blocks: &[Block],
    lift: &[(Vec<f64>, f64)],
    bx: &NodeBox,
    p: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let np = bx.dims();
    let p_cols: Vec<usize> = (0..np).collect();
    let w_cols: Vec<usize> = (np + 1..2 * np + 1).collect();
    let mut total = 0.0;
    let mut grad = vec![0.0; np];
    for blk in blocks {
        let mut lp = LinearProgram::new(vec![0.0; 2 * np + 1]);
        lp.objective[w_cols[blk.slot]] = blk.weight;
        for j in 0..np {
            lp.var_lb[j] = p[j];
            lp.var_ub[j] = p[j];
            lp.var_lb[w_cols[j]] = blk.tau_lb * bx.lb[j];
            lp.var_ub[w_cols[j]] = blk.tau_ub * bx.ub[j];
        }
        lp.var_lb[np] = blk.tau_lb;
        lp.var_ub[np] = blk.tau_ub;
        let cols = BlockCols {
            p: &p_cols,
            tau: np,
            w: &w_cols,
        };
        emit_block_rows(&mut lp, &cols, &blk.anchors, lift, bx, blk.tau_lb, blk.tau_ub);
        let sol = lp.solve();
        if sol.status != LpStatus::Optimal {
            return Err(Error::NumericalFailure(format!("block LP reported {:?}", sol.status)));
        }
        total += sol.objective_value.expect("optimal value");
        let rc = sol.reduced_costs.expect("reduced costs");
        for j in 0..np {
            grad[j] += rc[j];
        }
    }
    Ok((total, grad))
}

/// Kelley's cutting planes on `max_{p in box, A p >= b} sum_b phi_b(p)`.
///
/// Every master value bounds the relaxation from above, so stopping early
/// still returns a valid bound.
fn solve_decomposed(
    inst: &MixedLogitInstance,
    bx: &NodeBox,
    pool: &PointPool,
    tb: &TauBounds,
    opts: &RelaxationOptions,
) -> Result<NodeBound> {
    let np = bx.dims();
    let lift = lifting_rows(inst, bx);
    let mut blocks = Vec::new();
    let mut theta_cap = 0.0;
    for (slot, &i) in inst.priced_alternatives().iter().enumerate() {
        for n in 0..inst.customers() {
            for l in 0..inst.classes() {
                let w = inst.class_weight(l, n);
                if w == 0.0 {
                    continue;
                }
                let b = TauBounds::block(inst, slot, n, l);
                theta_cap += w * tb.ub[b] * bx.ub[slot];
                blocks.push(Block {
                    slot,
                    weight: w,
                    tau_lb: tb.lb[b],
                    tau_ub: tb.ub[b],
                    anchors: anchors_for_block(inst, pool, i, n, l),
                });
            }
        }
    }

    let mut master = LinearProgram::new(vec![0.0; np + 1]);
    master.objective[np] = 1.0;
    for j in 0..np {
        master.var_lb[j] = bx.lb[j];
        master.var_ub[j] = bx.ub[j];
    }
    master.var_lb[np] = f64::NEG_INFINITY;
    master.var_ub[np] = theta_cap;
    if let Some(c) = inst.constraints() {
        for (row, &b) in c.a.iter().zip(&c.b) {
            let mut coeffs = row.clone();
            coeffs.push(0.0);
            master.add_row(coeffs, Relation::Ge, b);
        }
    }

    let add_cut = |master: &mut LinearProgram, p: &[f64], value: f64, grad: &[f64]| {
        let mut coeffs: Vec<f64> = grad.iter().map(|g| -g).collect();
        coeffs.push(1.0);
        let margin = 1e-9 * (1.0 + value.abs());
        master.add_row(coeffs, Relation::Le, value - dot(grad, p) + margin);
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut solves = 0usize;
    let mut seen: Vec<Vec<f64>> = Vec::new();
    let mut seed_points: Vec<Vec<f64>> = vec![bx.center().0];
    seed_points.extend(
        pool.points()
            .iter()
            .filter(|p| bx.contains(p, 0.0) && inst.is_feasible(p, 0.0))
            .map(|p| p.0.clone()),
    );
    for p in seed_points {
        if !inst.is_feasible(&p, 0.0) {
            continue;
        }
        let (v, g) = evaluate_blocks(&blocks, &lift, bx, &p)?;
        solves += blocks.len();
        add_cut(&mut master, &p, v, &g);
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, p.clone()));
        }
        seen.push(p);
    }

    let mut upper = f64::INFINITY;
    for _ in 0..opts.max_cuts {
        let sol = master.solve();
        solves += 1;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                return Ok(NodeBound {
                    upper_bound: f64::NEG_INFINITY,
                    candidate: None,
                    status: NodeBoundStatus::Empty,
                    lp_solves: solves,
                })
            }
            _ => return Err(Error::NumericalFailure(format!("cutting-plane master reported {:?}", sol.status))),
        }
        let x = sol.x.expect("optimal solution");
        upper = upper.min(x[np]);
        let mut p = x[..np].to_vec();
        bx.clip(&mut p);
        let lower = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0);
        if upper - lower <= opts.tolerance * upper.abs().max(1.0) {
            break;
        }
        if opts.cutoff.is_some_and(|c| upper <= c) {
            break;
        }
        if seen.iter().any(|q| q.iter().zip(&p).all(|(a, b)| a == b)) {
            // Repeated master point: its cut is already present, so the
            // master value equals the block value up to the cut margin.
            break;
        }
        let (v, g) = evaluate_blocks(&blocks, &lift, bx, &p)?;
        solves += blocks.len();
        add_cut(&mut master, &p, v, &g);
        if v > lower {
            best = Some((v, p.clone()));
        }
        seen.push(p);
    }
    Ok(NodeBound {
        upper_bound: upper,
        candidate: best.map(|(_, p)| PriceVector(p)),
        status: NodeBoundStatus::Solved,
        lp_solves: solves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{intel_instance, INTEL_REFERENCE_PRICES};

    #[test]
    fn intel_variable_count() {
        let inst = intel_instance();
        let bx = NodeBox::root(&inst);
        let mut pool = PointPool::default();
        pool.push(PriceVector(INTEL_REFERENCE_PRICES.to_vec()));
        let tb = tau_bounds(&inst, &bx).unwrap();
        let lp = build_relaxation(&inst, &bx, &pool, &tb).unwrap();
        assert_eq!(lp.num_vars, 87);
    }

    #[test]
    fn pool_dedups_and_evicts() {
        let mut pool = PointPool::new(2);
        assert!(pool.push(PriceVector(vec![1.0])));
        assert!(!pool.push(PriceVector(vec![1.0 + 1e-10])));
        assert!(pool.push(PriceVector(vec![2.0])));
        assert!(pool.push(PriceVector(vec![3.0])));
        assert_eq!(pool.points(), &[PriceVector(vec![2.0]), PriceVector(vec![3.0])]);
    }

    #[test]
    fn point_box_pins_tau() {
        let inst = intel_instance();
        let p = INTEL_REFERENCE_PRICES.to_vec();
        let bx = NodeBox::new(p.clone(), p.clone()).unwrap();
        for i in 0..3 {
            let f = inst.ratio_denominator(&p, i, 0, 2).unwrap();
            let lo = tau_lower_bound(&inst, &bx, i, 0, 2).unwrap();
            let hi = tau_upper_bound(&inst, &bx, i, 0, 2).unwrap();
            assert!((lo * f - 1.0).abs() < 1e-11 && (hi * f - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn unpriced_block_is_rejected() {
        let inst = intel_instance();
        let bx = NodeBox::root(&inst);
        assert!(tau_upper_bound(&inst, &bx, 3, 0, 0).is_err());
        assert!(tau_lower_bound(&inst, &bx, 0, 1, 0).is_err());
    }
}
