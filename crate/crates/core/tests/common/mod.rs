//! Oracles shared by the integration tests.

#![allow(dead_code)]

use mixprice_core::instances::{intel_instance, parking_instance, random_instance, random_small_instance};
use mixprice_core::local_search::random_feasible_point;
use mixprice_core::relaxation::{RelaxationLayout, TauBounds};
use mixprice_core::{LinearConstraints, MixedLogitInstance, NodeBox, PointPool, TracePoint};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Exhaustive grid search for two-product instances whose unpriced
/// alternatives have price-free utilities.
///
/// Revenue separates into per-axis exponential tables, so a grid point costs
/// a handful of flops per `(n, l)` block.
pub struct GridOracle {
    step: f64,
    lb: [f64; 2],
    len: [usize; 2],
    /// `[block][axis][k]`: `(exp(V), p exp(V))` of the priced alternatives.
    tables: Vec<[Vec<(f64, f64)>; 2]>,
    /// `[block]`: weight and summed exponentials of the unpriced alternatives.
    blocks: Vec<(f64, f64)>,
}

impl GridOracle {
    pub fn new(inst: &MixedLogitInstance, step: f64) -> Self {
        assert_eq!(inst.num_priced(), 2);
        let (lb, ub) = (inst.price_lb(), inst.price_ub());
        let len = [0, 1].map(|j| ((ub[j] - lb[j]) / step).round() as usize + 1);
        let priced = inst.priced_alternatives();
        let mut tables = Vec::new();
        let mut blocks = Vec::new();
        for n in 0..inst.customers() {
            for l in 0..inst.classes() {
                let mut fixed = 0.0;
                for i in 0..inst.num_alternatives() {
                    if !priced.contains(&i) {
                        fixed += inst.exo_utility(i, n, l).exp();
                    }
                }
                blocks.push((inst.class_weight(l, n), fixed));
                tables.push([0, 1].map(|j| {
                    let i = priced[j];
                    (0..len[j])
                        .map(|k| {
                            let p = (lb[j] + k as f64 * step).min(ub[j]);
                            let e = (inst.price_coef(i, n, l) * p + inst.exo_utility(i, n, l)).exp();
                            (e, p * e)
                        })
                        .collect()
                }));
            }
        }
        Self {
            step,
            lb: [lb[0], lb[1]],
            len,
            tables,
            blocks,
        }
    }

    pub fn point(&self, a: usize, b: usize) -> [f64; 2] {
        [self.lb[0] + a as f64 * self.step, self.lb[1] + b as f64 * self.step]
    }

    fn revenue(&self, a: usize, b: usize) -> f64 {
        let mut r = 0.0;
        for (t, &(w, fixed)) in self.tables.iter().zip(&self.blocks) {
            let (e0, r0) = t[0][a];
            let (e1, r1) = t[1][b];
            r += w * (r0 + r1) / (fixed + e0 + e1);
        }
        r
    }

    fn range(&self, j: usize, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
        let first = ((lo - self.lb[j]) / self.step - 1e-9).ceil().max(0.0) as usize;
        let last = (((hi - self.lb[j]) / self.step + 1e-9).floor() as usize).min(self.len[j] - 1);
        first..=last
    }

    /// Best grid point inside `bx` and its revenue.
    pub fn best_in(&self, bx: &NodeBox) -> Option<([f64; 2], f64)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for a in self.range(0, bx.lb[0], bx.ub[0]) {
            for b in self.range(1, bx.lb[1], bx.ub[1]) {
                let v = self.revenue(a, b);
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some(((a, b), v));
                }
            }
        }
        best.map(|((a, b), v)| (self.point(a, b), v))
    }
}

/// Checks the bound-sequence invariants of a solve trace.
pub fn check_trace(trace: &[TracePoint]) -> Result<(), String> {
    for (k, w) in trace.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        if b.wall_time < a.wall_time {
            return Err(format!("line {}: time decreased", k + 1));
        }
        if b.global_upper_bound > a.global_upper_bound {
            return Err(format!("line {}: upper bound increased {} -> {}", k + 1, a.global_upper_bound, b.global_upper_bound));
        }
        if b.incumbent_value < a.incumbent_value {
            return Err(format!("line {}: incumbent decreased", k + 1));
        }
        if b.max_box_radius > a.max_box_radius {
            return Err(format!("line {}: open box radius grew {} -> {}", k + 1, a.max_box_radius, b.max_box_radius));
        }
    }
    if let Some(t) = trace.iter().find(|t| t.incumbent_value > t.global_upper_bound) {
        return Err(format!("incumbent {} above bound {}", t.incumbent_value, t.global_upper_bound));
    }
    Ok(())
}

/// Leaves must lie in the root, have pairwise disjoint interiors and fill its
/// volume.
pub fn check_partition(root: &NodeBox, leaves: &[&NodeBox]) -> Result<(), String> {
    let mut volume = 0.0;
    for (k, a) in leaves.iter().enumerate() {
        if !a.is_within(root) {
            return Err(format!("leaf {k} leaves the root box"));
        }
        volume += a.volume();
        for (m, b) in leaves.iter().enumerate().skip(k + 1) {
            let overlap = (0..a.dims()).all(|j| a.lb[j].max(b.lb[j]) < a.ub[j].min(b.ub[j]));
            if overlap {
                return Err(format!("leaves {k} and {m} overlap"));
            }
        }
    }
    let total = root.volume();
    if (volume - total).abs() > 1e-9 * total {
        return Err(format!("leaves cover volume {volume} of {total}"));
    }
    Ok(())
}

/// Small two-product instance with side constraints `p1 + p2 >= 3` and
/// `p2 - p1 >= -4`.
pub fn constrained_instance(seed: u64) -> MixedLogitInstance {
    let mut data = random_small_instance(seed).into_data();
    data.constraints = Some(LinearConstraints {
        a: vec![vec![1.0, 1.0], vec![-1.0, 1.0]],
        b: vec![3.0, -4.0],
    });
    MixedLogitInstance::new(data).unwrap()
}

pub fn families() -> Vec<(&'static str, MixedLogitInstance)> {
    vec![
        ("intel", intel_instance()),
        ("random", random_instance(4, 3, 7).unwrap()),
        ("small", random_small_instance(2)),
        ("constrained", constrained_instance(5)),
        ("parking", parking_instance(1, 2, 3).unwrap()),
    ]
}

pub fn random_subbox(inst: &MixedLogitInstance, rng: &mut ChaCha8Rng, rel_width: f64) -> NodeBox {
    let (mut lb, mut ub) = (Vec::new(), Vec::new());
    for (&lo, &hi) in inst.price_lb().iter().zip(inst.price_ub()) {
        let w = rel_width * (hi - lo);
        let a = rng.random_range(lo..=hi - w);
        lb.push(a);
        ub.push(a + w);
    }
    NodeBox::new(lb, ub).unwrap()
}

pub fn sample_pool(inst: &MixedLogitInstance, bx: &NodeBox, k: usize, rng: &mut ChaCha8Rng) -> Option<PointPool> {
    let mut pool = PointPool::new(k);
    for _ in 0..k {
        pool.push(random_feasible_point(inst, bx.region(), rng).ok()?);
    }
    Some(pool)
}

/// `(p, 1/f(p), p/f(p))` in the layout of `build_relaxation`.
pub fn lift(inst: &MixedLogitInstance, p: &[f64]) -> Vec<f64> {
    let layout = RelaxationLayout::of(inst);
    let mut x = vec![0.0; layout.num_vars()];
    x[..p.len()].copy_from_slice(p);
    for (slot, &i) in inst.priced_alternatives().iter().enumerate() {
        for n in 0..inst.customers() {
            for l in 0..inst.classes() {
                let b = TauBounds::block(inst, slot, n, l);
                let tau = 1.0 / inst.ratio_denominator(p, i, n, l).unwrap();
                x[layout.tau(b)] = tau;
                for (j, &pj) in p.iter().enumerate() {
                    x[layout.w(b, j)] = tau * pj;
                }
            }
        }
    }
    x
}

pub fn interior_point(inst: &MixedLogitInstance, rng: &mut ChaCha8Rng) -> Vec<f64> {
    inst.price_lb()
        .iter()
        .zip(inst.price_ub())
        .map(|(&lo, &hi)| {
            let m = 0.01 * (hi - lo);
            rng.random_range(lo + m..hi - m)
        })
        .collect()
}

fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-300)
}

/// Largest relative error of the analytic revenue and `f` gradients against
/// central differences with `h = 1e-6 (1 + |p|)`.
///
/// Errors are scaled by the larger of the gradient's infinity norm and the
/// function value per unit price: near-flat directions of a function of
/// size one are below what a difference quotient can resolve.
pub fn gradient_errors(inst: &MixedLogitInstance, p: &[f64]) -> (f64, f64) {
    let unit = 1.0 + p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let g = inst.revenue_gradient(p).unwrap();
    let r0 = inst.expected_revenue(p).unwrap();
    let g_scale = g.iter().fold(r0.abs() / unit, |m, v| m.max(v.abs()));
    let mut rev_err = 0.0f64;
    let mut f_err = 0.0f64;
    for j in 0..p.len() {
        let h = 1e-6 * (1.0 + p[j].abs());
        let (mut up, mut dn) = (p.to_vec(), p.to_vec());
        up[j] += h;
        dn[j] -= h;
        let fd = (inst.expected_revenue(&up).unwrap() - inst.expected_revenue(&dn).unwrap()) / (2.0 * h);
        rev_err = rev_err.max(rel_err(g[j], fd, g_scale));
    }
    for &i in inst.priced_alternatives() {
        for n in 0..inst.customers() {
            for l in 0..inst.classes() {
                let fg = inst.f_gradient(p, i, n, l).unwrap();
                let f0 = inst.ratio_denominator(p, i, n, l).unwrap();
                let fg_scale = fg.iter().fold(f0 / unit, |m, v| m.max(v.abs()));
                for j in 0..p.len() {
                    let h = 1e-6 * (1.0 + p[j].abs());
                    let (mut up, mut dn) = (p.to_vec(), p.to_vec());
                    up[j] += h;
                    dn[j] -= h;
                    let fd = (inst.ratio_denominator(&up, i, n, l).unwrap()
                        - inst.ratio_denominator(&dn, i, n, l).unwrap())
                        / (2.0 * h);
                    f_err = f_err.max(rel_err(fg[j], fd, fg_scale));
                }
            }
        }
    }
    (rev_err, f_err)
}
