//! Trust-region local search for good feasible prices.
//!
//! Each step maximizes the linearized revenue `g . p` over an l1 ball around
//! the current point intersected with the feasible region, which is a small
//! LP. The outer loop shrinks the radius when a step fails to improve and
//! stops once a trial step changes the revenue by at most `theta`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::model::{MixedLogitInstance, PriceVector};

/// Feasibility slack accepted on iterates returned by the step LP.
pub const FEASIBILITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSearchConfig {
    pub theta: f64,
    pub initial_radius: f64,
    pub radius_shrink: f64,
    pub min_radius: f64,
    pub seed: u64,
    /// Hard cap on trust-region LP solves.
    pub max_steps: usize,
}

impl Default for LocalSearchConfig {
    fn default() -> Self {
        Self {
            theta: 1e-8,
            initial_radius: 1.0,
            radius_shrink: 0.1,
            min_radius: 1e-9,
            seed: 0,
            max_steps: 1_000_000,
        }
    }
}

impl LocalSearchConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.theta) || !positive(self.initial_radius) || !positive(self.min_radius) {
            return Err(Error::Config(
                "theta, initial_radius and min_radius must be positive".into(),
            ));
        }
        if !(self.radius_shrink > 0.0 && self.radius_shrink < 1.0) {
            return Err(Error::Config("radius_shrink must lie in (0, 1)".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Why [`local_search_in_box`] stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitReason {
    /// A trial step changed the revenue by at most `theta`.
    Converged,
    /// The radius fell below `min_radius`.
    RadiusFloor,
    StepBudget,
    /// A step LP failed; the best point so far is returned.
    LpFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSearchOutcome {
    pub point: PriceVector,
    pub value: f64,
    /// Revenue of the start followed by every accepted improvement.
    pub accepted_values: Vec<f64>,
    pub exit: ExitReason,
    pub steps: usize,
}

/// Axis-aligned price region; `lb <= ub` componentwise.
#[derive(Debug, Clone, Copy)]
pub struct Region<'a> {
    pub lb: &'a [f64],
    pub ub: &'a [f64],
}

impl<'a> Region<'a> {
    pub fn of_instance(inst: &'a MixedLogitInstance) -> Self {
        Self {
            lb: inst.price_lb(),
            ub: inst.price_ub(),
        }
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.iter()
            .zip(self.lb.iter().zip(self.ub))
            .all(|(&x, (&lo, &hi))| x >= lo - tol && x <= hi + tol)
    }

    fn clip(&self, p: &mut [f64]) {
        for (x, (&lo, &hi)) in p.iter_mut().zip(self.lb.iter().zip(self.ub)) {
            *x = x.clamp(lo, hi);
        }
    }
}

/// One trust-region step from `p_k` with radius `r` over the instance box.
pub fn trust_region_step(inst: &MixedLogitInstance, p_k: &PriceVector, r: f64) -> Result<PriceVector> {
    trust_region_step_in(inst, p_k, r, Region::of_instance(inst))
}

pub fn trust_region_step_in(
    inst: &MixedLogitInstance,
    p_k: &[f64],
    r: f64,
    region: Region<'_>,
) -> Result<PriceVector> {
    inst.check_price_len(p_k)?;
    let g = inst.revenue_gradient_unchecked(p_k);
    step_with_gradient(inst, &g, p_k, r, region)
}

/// Solves `max g . p` s.t. `|p - p_k|_1 <= r`, `A p >= b`, `p` in `region`.
///
/// Uses split variables `s_i >= |p_i - p_k,i|` with `sum s_i <= r`.
pub fn step_with_gradient(
    inst: &MixedLogitInstance,
    g: &[f64],
    p_k: &[f64],
    r: f64,
    region: Region<'_>,
) -> Result<PriceVector> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Config(format!("trust-region radius must be positive, got {r}")));
    }
    let np = inst.num_priced();
    if g.len() != np {
        return Err(Error::PriceLength {
            got: g.len(),
            expected: np,
        });
    }
    let mut objective = g.to_vec();
    objective.extend(std::iter::repeat_n(0.0, np));
    let mut lp = LinearProgram::new(objective);
    for j in 0..np {
        lp.var_lb[j] = region.lb[j];
        lp.var_ub[j] = region.ub[j];
        lp.add_sparse_row(&[(np + j, 1.0), (j, -1.0)], Relation::Ge, -p_k[j]);
        lp.add_sparse_row(&[(np + j, 1.0), (j, 1.0)], Relation::Ge, p_k[j]);
    }
    let mut ball = vec![0.0; 2 * np];
    ball[np..].iter_mut().for_each(|v| *v = 1.0);
    lp.add_row(ball, Relation::Le, r);
    if let Some(c) = inst.constraints() {
        for (row, &b) in c.a.iter().zip(&c.b) {
            let mut coeffs = row.clone();
            coeffs.extend(std::iter::repeat_n(0.0, np));
            lp.add_row(coeffs, Relation::Ge, b);
        }
    }
    let sol = lp.solve();
    match sol.status {
        LpStatus::Optimal => {
            let mut p: Vec<f64> = sol.x.expect("optimal solution")[..np].to_vec();
            region.clip(&mut p);
            Ok(PriceVector(p))
        }
        LpStatus::NumericalFailure => Err(Error::NumericalFailure("trust-region step LP".into())),
        // The start point is feasible, so these indicate numerical trouble.
        other => Err(Error::NumericalFailure(format!(
            "trust-region step LP reported {other:?} at a feasible point"
        ))),
    }
}

/// Draws a uniform point of `region` satisfying the instance rows.
///
/// Falls back to an LP vertex when rejection sampling keeps failing; errors
/// if `region` does not meet the rows.
pub fn random_feasible_point(
    inst: &MixedLogitInstance,
    region: Region<'_>,
    rng: &mut impl Rng,
) -> Result<PriceVector> {
    const ATTEMPTS: usize = 10_000;
    let np = inst.num_priced();
    for _ in 0..ATTEMPTS {
        let p: Vec<f64> = (0..np)
            .map(|j| {
                let (lo, hi) = (region.lb[j], region.ub[j]);
                if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    lo
                }
            })
            .collect();
        if inst.constraints().is_none_or(|c| c.min_slack(&p) >= 0.0) {
            return Ok(PriceVector(p));
        }
    }
    let objective: Vec<f64> = (0..np).map(|_| rng.random_range(-1.0..1.0)).collect();
    feasible_vertex(inst, region, objective)
}

/// A vertex of `region` cut by the instance rows maximizing `objective`.
pub fn feasible_vertex(inst: &MixedLogitInstance, region: Region<'_>, objective: Vec<f64>) -> Result<PriceVector> {
    let mut lp = LinearProgram::new(objective);
    lp.var_lb = region.lb.to_vec();
    lp.var_ub = region.ub.to_vec();
    if let Some(c) = inst.constraints() {
        for (row, &b) in c.a.iter().zip(&c.b) {
            lp.add_row(row.clone(), Relation::Ge, b);
        }
    }
    let sol = lp.solve();
    match sol.status {
        LpStatus::Optimal => {
            let mut p = sol.x.expect("optimal solution");
            region.clip(&mut p);
            Ok(PriceVector(p))
        }
        LpStatus::Infeasible => Err(Error::InfeasibleInstance),
        _ => Err(Error::NumericalFailure("feasible point LP".into())),
    }
}

/// Runs the local search over the instance box and returns the best point
/// and its revenue. Without `p0` the start is drawn from `config.seed`.
pub fn local_search(
    inst: &MixedLogitInstance,
    config: &LocalSearchConfig,
    p0: Option<&PriceVector>,
) -> Result<(PriceVector, f64)> {
    let out = local_search_in_box(inst, config, p0.map(|p| p.0.as_slice()), Region::of_instance(inst))?;
    Ok((out.point, out.value))
}

/// Local search restricted to `region`.
pub fn local_search_in_box(
    inst: &MixedLogitInstance,
    config: &LocalSearchConfig,
    p0: Option<&[f64]>,
    region: Region<'_>,
) -> Result<LocalSearchOutcome> {
    config.validate()?;
    let start = match p0 {
        Some(p) => {
            inst.check_price_len(p)?;
            if !region.contains(p, FEASIBILITY_TOL) || !inst.is_feasible(p, FEASIBILITY_TOL) {
                return Err(Error::InfeasiblePrice("local search start point".into()));
            }
            let mut p = p.to_vec();
            region.clip(&mut p);
            PriceVector(p)
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            random_feasible_point(inst, region, &mut rng)?
        }
    };

    let revenue = |p: &[f64]| inst.revenue_unchecked(p);
    let mut p = start;
    let mut fp = revenue(&p);
    let mut accepted = vec![fp];
    let mut r = config.initial_radius;
    let mut steps = 0usize;

    let step = |from: &[f64], radius: f64, steps: &mut usize| -> Option<(PriceVector, f64)> {
        *steps += 1;
        match trust_region_step_in(inst, from, radius, region) {
            Ok(q) => {
                let fq = revenue(&q);
                Some((q, fq))
            }
            Err(e) => {
                log::debug!("local search step failed: {e}");
                None
            }
        }
    };

    let exit = 'outer: loop {
        if r < config.min_radius {
            break ExitReason::RadiusFloor;
        }
        if steps >= config.max_steps {
            break ExitReason::StepBudget;
        }
        let Some((mut trial, mut f_trial)) = step(&p, r, &mut steps) else {
            break ExitReason::LpFailure;
        };
        // Follow improving steps; the radius resets after each one.
        while f_trial > fp {
            p = trial;
            fp = f_trial;
            accepted.push(fp);
            if steps >= config.max_steps {
                break 'outer ExitReason::StepBudget;
            }
            match step(&p, r, &mut steps) {
                Some((q, fq)) => {
                    trial = q;
                    f_trial = fq;
                }
                None => break 'outer ExitReason::LpFailure,
            }
            r = config.initial_radius;
        }
        r *= config.radius_shrink;
        if (f_trial - fp).abs() <= config.theta {
            break ExitReason::Converged;
        }
    };

    Ok(LocalSearchOutcome {
        point: p,
        value: fp,
        accepted_values: accepted,
        exit,
        steps,
    })
}
