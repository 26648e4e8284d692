//! Pricing instances and demand-side evaluation.
//!
//! A [`MixedLogitInstance`] holds a discrete mixed multinomial logit demand
//! model: `I` alternatives, `N` customers and `L` taste classes. Customer `n`
//! belongs to class `l` with probability `w[l][n]`; inside a class the choice
//! is a plain MNL over the systematic utilities
//!
//! ```text
//! V[i][n][l] = beta[i][n][l] * p_i + q[i][n][l]
//! ```
//!
//! where `p_i` is the decision price of alternative `i` (alternatives without a
//! decision price carry their whole utility in `q`). Every exponential sum is
//! evaluated in max-shifted form, so nothing overflows while utility spreads
//! stay below ~700.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus, Relation};

/// Tolerance on per-customer class weight sums accepted at load time.
///
/// Published weight tables are often rounded (the Intel table sums to
/// 0.9998); anything further off than this is treated as a data error.
pub const WEIGHT_SUM_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub name: String,
    /// Whether the price of this alternative is a decision variable.
    pub priced: bool,
}

impl Alternative {
    pub fn priced(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            priced: true,
        }
    }

    pub fn fixed(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            priced: false,
        }
    }
}

/// Side constraints `A p >= b` over the priced alternatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraints {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl LinearConstraints {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// Smallest slack `a_r . p - b_r` over all rows (`+inf` without rows).
    pub fn min_slack(&self, p: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, b)| dot(row, p) - b)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Raw instance data, laid out as dense row-major tensors.
///
/// `price_coef` and `exo_utility` are indexed `[i][n][l]`, `class_weight` is
/// indexed `[l][n]`. Bounds and constraint columns run over the priced
/// alternatives in the order they appear in `alternatives`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceData {
    pub alternatives: Vec<Alternative>,
    pub customers: usize,
    pub classes: usize,
    pub price_coef: Vec<f64>,
    pub exo_utility: Vec<f64>,
    pub class_weight: Vec<f64>,
    pub price_lb: Vec<f64>,
    pub price_ub: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<LinearConstraints>,
}

/// A candidate assignment of prices to the priced alternatives.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceVector(pub Vec<f64>);

impl PriceVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for PriceVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for PriceVector {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

impl Deref for PriceVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for PriceVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// A validated, immutable discrete mixed logit pricing instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedLogitInstance {
    data: InstanceData,
    priced: Vec<usize>,
    price_slot: Vec<Option<usize>>,
}

/// Per (customer, class) evaluation of the logit kernel.
#[derive(Debug, Clone)]
pub(crate) struct ClassKernel {
    pub utilities: Vec<f64>,
    /// `max_j V_j`
    pub shift: f64,
    /// `sum_j exp(V_j - shift)`
    pub scaled_sum: f64,
}

impl ClassKernel {
    fn new(num_alts: usize) -> Self {
        Self {
            utilities: vec![0.0; num_alts],
            shift: 0.0,
            scaled_sum: 1.0,
        }
    }

    #[inline]
    pub fn log_sum_exp(&self) -> f64 {
        self.shift + self.scaled_sum.ln()
    }

    #[inline]
    pub fn probability(&self, i: usize) -> f64 {
        (self.utilities[i] - self.shift).exp() / self.scaled_sum
    }

    /// `f_i = sum_j exp(V_j - V_i)`
    #[inline]
    pub fn ratio_denominator(&self, i: usize) -> f64 {
        (self.log_sum_exp() - self.utilities[i]).exp()
    }
}

impl MixedLogitInstance {
    /// Validates `data` and builds an instance.
    pub fn new(data: InstanceData) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidInstance(msg));
        let num_alts = data.alternatives.len();
        if num_alts == 0 {
            return invalid("at least one alternative is required".into());
        }
        if data.customers == 0 || data.classes == 0 {
            return invalid("customers and classes must be positive".into());
        }
        for (k, a) in data.alternatives.iter().enumerate() {
            if data.alternatives[..k].iter().any(|b| b.name == a.name) {
                return invalid(format!("duplicate alternative name {:?}", a.name));
            }
        }
        let priced: Vec<usize> = (0..num_alts)
            .filter(|&i| data.alternatives[i].priced)
            .collect();
        if priced.is_empty() {
            return invalid("at least one alternative must be priced".into());
        }
        let mut price_slot = vec![None; num_alts];
        for (k, &i) in priced.iter().enumerate() {
            price_slot[i] = Some(k);
        }

        let (n, l) = (data.customers, data.classes);
        let tensor = num_alts * n * l;
        if data.price_coef.len() != tensor {
            return invalid(format!(
                "price_coef has {} entries, expected {tensor} (I*N*L)",
                data.price_coef.len()
            ));
        }
        if data.exo_utility.len() != tensor {
            return invalid(format!(
                "exo_utility has {} entries, expected {tensor} (I*N*L)",
                data.exo_utility.len()
            ));
        }
        if data.class_weight.len() != n * l {
            return invalid(format!(
                "class_weight has {} entries, expected {} (L*N)",
                data.class_weight.len(),
                n * l
            ));
        }
        if let Some(bad) = data
            .price_coef
            .iter()
            .chain(&data.exo_utility)
            .chain(&data.class_weight)
            .find(|v| !v.is_finite())
        {
            return invalid(format!("non-finite coefficient {bad}"));
        }
        for &i in &priced {
            for c in 0..n * l {
                let beta = data.price_coef[i * n * l + c];
                if beta >= 0.0 {
                    return invalid(format!(
                        "price coefficient of priced alternative {:?} must be negative, got {beta}",
                        data.alternatives[i].name
                    ));
                }
            }
        }
        for cust in 0..n {
            let mut sum = 0.0;
            for class in 0..l {
                let w = data.class_weight[class * n + cust];
                if w < 0.0 {
                    return invalid(format!("negative class weight {w} for customer {cust}"));
                }
                sum += w;
            }
            let dev = (sum - 1.0).abs();
            if dev > WEIGHT_SUM_TOL {
                return invalid(format!(
                    "class weights of customer {cust} sum to {sum}, expected 1"
                ));
            }
            if dev > 1e-12 {
                log::info!("class weights of customer {cust} sum to {sum}; used as given");
            }
        }

        let np = priced.len();
        if data.price_lb.len() != np || data.price_ub.len() != np {
            return invalid(format!(
                "price bounds must have one entry per priced alternative ({np})"
            ));
        }
        for k in 0..np {
            let (lo, hi) = (data.price_lb[k], data.price_ub[k]);
            if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
                return invalid(format!("price bounds [{lo}, {hi}] for slot {k} are invalid"));
            }
        }
        if let Some(cons) = &data.constraints {
            if cons.a.len() != cons.b.len() {
                return invalid("constraint matrix and rhs have different row counts".into());
            }
            if cons.a.iter().any(|row| row.len() != np) {
                return invalid(format!("constraint rows must have {np} columns"));
            }
            if cons.a.iter().flatten().chain(&cons.b).any(|v| !v.is_finite()) {
                return invalid("non-finite constraint coefficient".into());
            }
        }

        let inst = Self {
            data,
            priced,
            price_slot,
        };
        if inst.has_constraints() && !inst.constraints_feasible()? {
            return Err(Error::InfeasibleInstance);
        }
        Ok(inst)
    }

    fn constraints_feasible(&self) -> Result<bool> {
        let np = self.num_priced();
        let mut lp = LinearProgram::new(vec![0.0; np]);
        lp.var_lb = self.data.price_lb.clone();
        lp.var_ub = self.data.price_ub.clone();
        if let Some(cons) = &self.data.constraints {
            for (row, &b) in cons.a.iter().zip(&cons.b) {
                lp.add_row(row.clone(), Relation::Ge, b);
            }
        }
        match lp.solve().status {
            LpStatus::Optimal => Ok(true),
            LpStatus::Infeasible => Ok(false),
            LpStatus::Unbounded => Ok(true),
            LpStatus::NumericalFailure => Err(Error::NumericalFailure(
                "feasibility check of the price polytope".into(),
            )),
        }
    }

    pub fn data(&self) -> &InstanceData {
        &self.data
    }

    pub fn into_data(self) -> InstanceData {
        self.data
    }

    pub fn num_alternatives(&self) -> usize {
        self.data.alternatives.len()
    }

    pub fn alternatives(&self) -> &[Alternative] {
        &self.data.alternatives
    }

    pub fn customers(&self) -> usize {
        self.data.customers
    }

    pub fn classes(&self) -> usize {
        self.data.classes
    }

    /// Number of decision prices.
    pub fn num_priced(&self) -> usize {
        self.priced.len()
    }

    /// Alternative indices of the priced alternatives, in price-slot order.
    pub fn priced_alternatives(&self) -> &[usize] {
        &self.priced
    }

    /// Price slot of alternative `i`, if it is priced.
    pub fn price_slot(&self, i: usize) -> Option<usize> {
        self.price_slot.get(i).copied().flatten()
    }

    pub fn price_lb(&self) -> &[f64] {
        &self.data.price_lb
    }

    pub fn price_ub(&self) -> &[f64] {
        &self.data.price_ub
    }

    pub fn constraints(&self) -> Option<&LinearConstraints> {
        self.data.constraints.as_ref()
    }

    pub fn has_constraints(&self) -> bool {
        self.data.constraints.as_ref().is_some_and(|c| !c.is_empty())
    }

    #[inline]
    fn tensor_index(&self, i: usize, n: usize, l: usize) -> usize {
        (i * self.data.customers + n) * self.data.classes + l
    }

    #[inline]
    pub fn price_coef(&self, i: usize, n: usize, l: usize) -> f64 {
        self.data.price_coef[self.tensor_index(i, n, l)]
    }

    #[inline]
    pub fn exo_utility(&self, i: usize, n: usize, l: usize) -> f64 {
        self.data.exo_utility[self.tensor_index(i, n, l)]
    }

    #[inline]
    pub fn class_weight(&self, l: usize, n: usize) -> f64 {
        self.data.class_weight[l * self.data.customers + n]
    }

    fn check_indices(&self, i: usize, n: usize, l: usize) -> Result<()> {
        let checks = [
            ("alternative", i, self.num_alternatives()),
            ("customer", n, self.customers()),
            ("class", l, self.classes()),
        ];
        for (what, index, limit) in checks {
            if index >= limit {
                return Err(Error::Index { what, index, limit });
            }
        }
        Ok(())
    }

    pub fn check_price_len(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_priced() {
            return Err(Error::PriceLength {
                got: p.len(),
                expected: self.num_priced(),
            });
        }
        Ok(())
    }

    /// Whether `p` lies in the price box and satisfies `A p >= b`, up to `tol`.
    pub fn is_feasible(&self, p: &[f64], tol: f64) -> bool {
        if p.len() != self.num_priced() {
            return false;
        }
        let in_box = p
            .iter()
            .zip(self.price_lb().iter().zip(self.price_ub()))
            .all(|(&x, (&lo, &hi))| x >= lo - tol && x <= hi + tol);
        in_box
            && self
                .constraints()
                .is_none_or(|c| c.min_slack(p) >= -tol * (1.0 + c.b.iter().fold(0.0f64, |m, b| m.max(b.abs()))))
    }

    /// Errors unless `p` is inside the price box (constraints are not checked).
    pub fn check_in_box(&self, p: &[f64], tol: f64) -> Result<()> {
        self.check_price_len(p)?;
        for (k, &x) in p.iter().enumerate() {
            let (lo, hi) = (self.price_lb()[k], self.price_ub()[k]);
            if !(x >= lo - tol && x <= hi + tol) {
                return Err(Error::InfeasiblePrice(format!(
                    "price {x} of {:?} outside [{lo}, {hi}]",
                    self.data.alternatives[self.priced[k]].name
                )));
            }
        }
        Ok(())
    }

    #[inline]
    fn price_of(&self, p: &[f64], i: usize) -> f64 {
        match self.price_slot[i] {
            Some(k) => p[k],
            None => 0.0,
        }
    }

    /// `V[i][n][l]` at prices `p`.
    pub fn systematic_utility(&self, p: &[f64], i: usize, n: usize, l: usize) -> Result<f64> {
        self.check_indices(i, n, l)?;
        self.check_price_len(p)?;
        Ok(self.utility_unchecked(p, i, n, l))
    }

    #[inline]
    fn utility_unchecked(&self, p: &[f64], i: usize, n: usize, l: usize) -> f64 {
        let q = self.exo_utility(i, n, l);
        match self.price_slot[i] {
            Some(k) => self.price_coef(i, n, l) * p[k] + q,
            None => q,
        }
    }

    pub(crate) fn kernel(&self) -> ClassKernel {
        ClassKernel::new(self.num_alternatives())
    }

    /// Fills `kernel` with the logit kernel of customer `n`, class `l`.
    pub(crate) fn eval_class(&self, p: &[f64], n: usize, l: usize, kernel: &mut ClassKernel) {
        let mut shift = f64::NEG_INFINITY;
        for i in 0..self.num_alternatives() {
            let v = self.utility_unchecked(p, i, n, l);
            kernel.utilities[i] = v;
            shift = shift.max(v);
        }
        kernel.shift = shift;
        kernel.scaled_sum = kernel.utilities.iter().map(|v| (v - shift).exp()).sum();
    }

    /// `f[i][n][l] = sum_j exp(V_j - V_i)`, the reciprocal of the class-level
    /// choice probability of `i`.
    pub fn ratio_denominator(&self, p: &[f64], i: usize, n: usize, l: usize) -> Result<f64> {
        self.check_indices(i, n, l)?;
        self.check_price_len(p)?;
        let mut k = self.kernel();
        self.eval_class(p, n, l, &mut k);
        Ok(k.ratio_denominator(i))
    }

    /// Gradient of [`ratio_denominator`](Self::ratio_denominator) over the
    /// priced alternatives:
    /// `df_i/dp_m = beta_m exp(V_m - V_i) - [m = i] beta_i f_i`.
    pub fn f_gradient(&self, p: &[f64], i: usize, n: usize, l: usize) -> Result<Vec<f64>> {
        self.check_indices(i, n, l)?;
        self.check_price_len(p)?;
        let mut k = self.kernel();
        self.eval_class(p, n, l, &mut k);
        let mut grad = vec![0.0; self.num_priced()];
        self.f_gradient_from_kernel(&k, i, n, l, &mut grad);
        Ok(grad)
    }

    /// Writes the gradient of `f_i` into `grad` and returns `f_i`.
    pub(crate) fn f_gradient_from_kernel(
        &self,
        k: &ClassKernel,
        i: usize,
        n: usize,
        l: usize,
        grad: &mut [f64],
    ) -> f64 {
        let f = k.ratio_denominator(i);
        let vi = k.utilities[i];
        for (slot, &m) in self.priced.iter().enumerate() {
            let beta_m = self.price_coef(m, n, l);
            let mut g = beta_m * (k.utilities[m] - vi).exp();
            if m == i {
                g -= beta_m * f;
            }
            grad[slot] = g;
        }
        f
    }

    /// Gradient of `ln f_i` over the priced alternatives:
    /// `d ln f_i / dp_m = beta_m P_m - [m = i] beta_i`, with `P` the class MNL
    /// probabilities.
    pub(crate) fn log_f_gradient_from_kernel(
        &self,
        k: &ClassKernel,
        i: usize,
        n: usize,
        l: usize,
        grad: &mut [f64],
    ) {
        for (slot, &m) in self.priced.iter().enumerate() {
            let beta_m = self.price_coef(m, n, l);
            let mut g = beta_m * k.probability(m);
            if m == i {
                g -= beta_m;
            }
            grad[slot] = g;
        }
    }

    /// Mixed logit choice probabilities `P[i][n]`.
    pub fn choice_probabilities(&self, p: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_price_len(p)?;
        let (ni, nn, nl) = (self.num_alternatives(), self.customers(), self.classes());
        let mut out = vec![vec![0.0; nn]; ni];
        let mut k = self.kernel();
        for n in 0..nn {
            for l in 0..nl {
                self.eval_class(p, n, l, &mut k);
                let w = self.class_weight(l, n);
                for (i, row) in out.iter_mut().enumerate() {
                    row[n] += w * k.probability(i);
                }
            }
        }
        Ok(out)
    }

    /// Expected revenue `sum_i sum_n p_i P[i][n]` over priced alternatives.
    pub fn expected_revenue(&self, p: &[f64]) -> Result<f64> {
        self.check_price_len(p)?;
        Ok(self.revenue_unchecked(p))
    }

    pub(crate) fn revenue_unchecked(&self, p: &[f64]) -> f64 {
        let mut k = self.kernel();
        let mut total = 0.0;
        for n in 0..self.customers() {
            for l in 0..self.classes() {
                self.eval_class(p, n, l, &mut k);
                let mut class_rev = 0.0;
                for (slot, &i) in self.priced.iter().enumerate() {
                    class_rev += p[slot] * (k.utilities[i] - k.shift).exp();
                }
                total += self.class_weight(l, n) * class_rev / k.scaled_sum;
            }
        }
        total
    }

    /// Analytic gradient of [`expected_revenue`](Self::expected_revenue).
    ///
    /// Per class, `dR/dp_m = P_m + beta_m P_m (p_m - sum_i p_i P_i)`, which is
    /// the quotient rule on `p_i / f_i` written with probabilities.
    pub fn revenue_gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_price_len(p)?;
        Ok(self.revenue_gradient_unchecked(p))
    }

    pub(crate) fn revenue_gradient_unchecked(&self, p: &[f64]) -> Vec<f64> {
        let np = self.num_priced();
        let mut grad = vec![0.0; np];
        let mut probs = vec![0.0; np];
        let mut k = self.kernel();
        for n in 0..self.customers() {
            for l in 0..self.classes() {
                self.eval_class(p, n, l, &mut k);
                let mut class_rev = 0.0;
                for (slot, &i) in self.priced.iter().enumerate() {
                    probs[slot] = k.probability(i);
                    class_rev += p[slot] * probs[slot];
                }
                let w = self.class_weight(l, n);
                for (slot, &i) in self.priced.iter().enumerate() {
                    let beta = self.price_coef(i, n, l);
                    grad[slot] += w * probs[slot] * (1.0 + beta * (p[slot] - class_rev));
                }
            }
        }
        grad
    }

    /// Market share of every alternative in percent of the total class
    /// mass, so shares sum to 100 even when published weights are rounded.
    pub fn market_shares(&self, p: &[f64]) -> Result<Vec<f64>> {
        let probs = self.choice_probabilities(p)?;
        let total: f64 = probs.iter().flatten().sum();
        Ok(probs
            .iter()
            .map(|row| 100.0 * row.iter().sum::<f64>() / total)
            .collect())
    }

    /// Value of the price of alternative `i` under `p` (0 for fixed-price
    /// alternatives).
    pub fn price_for(&self, p: &[f64], i: usize) -> f64 {
        self.price_of(p, i)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
