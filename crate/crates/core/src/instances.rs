//! Built-in and generated instances.
//!
//! * [`intel_instance`]: three server SKUs sold to seven customer segments.
//! * [`random_instance`] and [`random_small_instance`]: seeded synthetic
//!   families with uniform utility intercepts and price slopes.
//! * [`parking_instance`]: a two-fee parking market whose price and access
//!   time sensitivities follow a correlated bivariate normal, discretized on a
//!   grid; [`continuous_ml_revenue`] evaluates the undiscretized model by
//!   Monte Carlo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::model::{Alternative, InstanceData, MixedLogitInstance, PriceVector};

/// Segment weights of the Intel case (they sum to 0.9998 as published).
pub const INTEL_WEIGHTS: [f64; 7] = [0.0753, 0.1126, 0.1285, 0.1180, 0.0859, 0.2842, 0.1953];

/// Intel utility intercepts, `[sku][segment]`.
pub const INTEL_Q: [[f64; 7]; 3] = [
    [-1.0334, 3.2480, -0.9336, 1.7094, 0.4187, -0.8904, -0.9804],
    [0.7840, 4.7161, -0.3438, 1.8777, 2.1771, -0.4310, -0.4907],
    [6.0054, 3.8771, 1.3506, 2.3611, 1.1723, 0.8889, 0.9163],
];

/// Intel price slopes, `[sku][segment]`.
pub const INTEL_BETA: [[f64; 7]; 3] = [
    [-0.00416, -0.01840, -0.00525, -0.01165, -0.01015, -0.00325, -0.00331],
    [-0.00312, -0.01354, -0.00394, -0.00874, -0.00639, -0.00244, -0.00248],
    [-0.00181, -0.00744, -0.00229, -0.00508, -0.00167, -0.00142, -0.00144],
];

/// Best known Intel prices and revenue.
pub const INTEL_REFERENCE_PRICES: [f64; 3] = [608.2695, 365.079, 1209.09];
pub const INTEL_REFERENCE_REVENUE: f64 = 362.3389;
pub const INTEL_PRICE_UB: f64 = 5000.0;

pub const NO_PURCHASE: &str = "no-purchase";

/// The Intel case: one customer (the market), seven segments, three priced
/// SKUs and a no-purchase alternative with zero utility.
pub fn intel_instance() -> MixedLogitInstance {
    let alternatives = vec![
        Alternative::priced("sku1"),
        Alternative::priced("sku2"),
        Alternative::priced("sku3"),
        Alternative::fixed(NO_PURCHASE),
    ];
    let mut price_coef = Vec::with_capacity(28);
    let mut exo_utility = Vec::with_capacity(28);
    for i in 0..3 {
        price_coef.extend_from_slice(&INTEL_BETA[i]);
        exo_utility.extend_from_slice(&INTEL_Q[i]);
    }
    price_coef.extend([0.0; 7]);
    exo_utility.extend([0.0; 7]);
    MixedLogitInstance::new(InstanceData {
        alternatives,
        customers: 1,
        classes: 7,
        price_coef,
        exo_utility,
        class_weight: INTEL_WEIGHTS.to_vec(),
        price_lb: vec![0.0; 3],
        price_ub: vec![INTEL_PRICE_UB; 3],
        constraints: None,
    })
    .expect("built-in Intel data is valid")
}

pub const RANDOM_Q_RANGE: (f64, f64) = (-5.0, 5.0);
pub const RANDOM_BETA_RANGE: (f64, f64) = (-5.0, -0.025);
pub const RANDOM_PRICE_UB: f64 = 100.0;

fn random_alternatives(priced: usize) -> Vec<Alternative> {
    let mut alts: Vec<Alternative> = (0..priced).map(|i| Alternative::priced(format!("product{}", i + 1))).collect();
    alts.push(Alternative::fixed(NO_PURCHASE));
    alts
}

fn draw_q(rng: &mut impl Rng) -> f64 {
    rng.random_range(RANDOM_Q_RANGE.0..=RANDOM_Q_RANGE.1)
}

fn draw_beta(rng: &mut impl Rng) -> f64 {
    rng.random_range(RANDOM_BETA_RANGE.0..=RANDOM_BETA_RANGE.1)
}

/// Random single-market instance with `products` priced alternatives and
/// `segments` classes. With seven segments the Intel segment weights
/// (normalized) are used, otherwise uniform weights. Box `[0, 100]`.
pub fn random_instance(seed: u64, products: usize, segments: usize) -> Result<MixedLogitInstance> {
    if products == 0 || segments == 0 {
        return Err(Error::Config("products and segments must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut price_coef, mut exo_utility) = (Vec::new(), Vec::new());
    for _ in 0..products {
        for _ in 0..segments {
            exo_utility.push(draw_q(&mut rng));
            price_coef.push(draw_beta(&mut rng));
        }
    }
    price_coef.extend(std::iter::repeat_n(0.0, segments));
    exo_utility.extend(std::iter::repeat_n(0.0, segments));
    let class_weight = if segments == INTEL_WEIGHTS.len() {
        let total: f64 = INTEL_WEIGHTS.iter().sum();
        INTEL_WEIGHTS.iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / segments as f64; segments]
    };
    MixedLogitInstance::new(InstanceData {
        alternatives: random_alternatives(products),
        customers: 1,
        classes: segments,
        price_coef,
        exo_utility,
        class_weight,
        price_lb: vec![0.0; products],
        price_ub: vec![RANDOM_PRICE_UB; products],
        constraints: None,
    })
}

pub const SMALL_PRICE_UB: f64 = 10.0;

/// Random two-product instance with 1 to 3 customers and 1 to 3 classes,
/// random normalized class weights per customer and box `[0, 10]^2`.
pub fn random_small_instance(seed: u64) -> MixedLogitInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let customers = rng.random_range(1..=3usize);
    let classes = rng.random_range(1..=3usize);
    let (mut price_coef, mut exo_utility) = (Vec::new(), Vec::new());
    for _ in 0..2 * customers * classes {
        exo_utility.push(draw_q(&mut rng));
        price_coef.push(draw_beta(&mut rng));
    }
    price_coef.extend(std::iter::repeat_n(0.0, customers * classes));
    exo_utility.extend(std::iter::repeat_n(0.0, customers * classes));
    let mut class_weight = vec![0.0; classes * customers];
    for n in 0..customers {
        let raw: Vec<f64> = (0..classes).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for (l, w) in raw.iter().enumerate() {
            class_weight[l * customers + n] = w / total;
        }
    }
    MixedLogitInstance::new(InstanceData {
        alternatives: random_alternatives(2),
        customers,
        classes,
        price_coef,
        exo_utility,
        class_weight,
        price_lb: vec![0.0; 2],
        price_ub: vec![SMALL_PRICE_UB; 2],
        constraints: None,
    })
    .expect("generated instance is valid")
}

/// Coefficients of the parking choice model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParkingParams {
    pub asc_psp: f64,
    pub asc_pup: f64,
    pub beta_td: f64,
    pub beta_origin: f64,
    pub fee_psp_low_income: f64,
    pub fee_psp_resident: f64,
    pub fee_pup_low_income: f64,
    pub fee_pup_resident: f64,
    pub beta_age_vehicle: f64,
    /// Mean of `(beta_AT, beta_FEE)`.
    pub taste_mean: [f64; 2],
    /// Covariance of `(beta_AT, beta_FEE)`.
    pub taste_cov: [[f64; 2]; 2],
    /// Grid support `[at_lo, at_hi, fee_lo, fee_hi]`.
    pub grid_box: [f64; 4],
}

impl Default for ParkingParams {
    fn default() -> Self {
        Self {
            asc_psp: 32.0,
            asc_pup: 34.0,
            beta_td: -0.612,
            beta_origin: -5.762,
            fee_psp_low_income: -10.995,
            fee_psp_resident: -11.44,
            fee_pup_low_income: -13.729,
            fee_pup_resident: -10.668,
            beta_age_vehicle: 4.037,
            taste_mean: [-0.788, -32.3],
            taste_cov: [[1.1236, -12.8], [-12.8, 201.64]],
            grid_box: [-3.6, 1.94, -68.52, 3.92],
        }
    }
}

impl ParkingParams {
    /// Lower Cholesky factor of the taste covariance, which must be symmetric
    /// positive semidefinite.
    pub fn cholesky(&self) -> Result<[[f64; 2]; 2]> {
        let c = &self.taste_cov;
        let bad = || Err(Error::Config("taste covariance must be symmetric positive semidefinite".into()));
        if c[0][1] != c[1][0] || !(c[0][0] >= 0.0) || !(c[1][1] >= 0.0) {
            return bad();
        }
        let l00 = c[0][0].sqrt();
        let l10 = if l00 > 0.0 {
            c[1][0] / l00
        } else if c[1][0] == 0.0 {
            0.0
        } else {
            return bad();
        };
        let rest = c[1][1] - l10 * l10;
        if rest < -1e-12 * c[1][1].max(1.0) {
            return bad();
        }
        Ok([[l00, 0.0], [l10, rest.max(0.0).sqrt()]])
    }

    fn is_positive_definite(&self) -> bool {
        let c = &self.taste_cov;
        c[0][1] == c[1][0] && c[0][0] > 0.0 && c[0][0] * c[1][1] - c[0][1] * c[1][0] > 0.0
    }
}

/// Alternative order of parking instances.
pub const PARKING_ALTERNATIVES: [&str; 3] = ["FSP", "PSP", "PUP"];

/// Attributes of one parking customer; times are indexed like
/// [`PARKING_ALTERNATIVES`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerProfile {
    /// Access time to each parking option, minutes.
    pub access_time: [f64; 3],
    /// Walking time from each parking option to the destination, minutes.
    pub destination_time: [f64; 3],
    pub internal_origin: bool,
    pub low_income: bool,
    pub resident: bool,
    pub new_vehicle: bool,
}

impl CustomerProfile {
    fn fee_slopes(&self, params: &ParkingParams, beta_fee: f64) -> [f64; 2] {
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        [
            beta_fee + params.fee_psp_low_income * ind(self.low_income) + params.fee_psp_resident * ind(self.resident),
            beta_fee + params.fee_pup_low_income * ind(self.low_income) + params.fee_pup_resident * ind(self.resident),
        ]
    }

    fn intercepts(&self, params: &ParkingParams, beta_at: f64) -> [f64; 3] {
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        let base = |k: usize| beta_at * self.access_time[k] + params.beta_td * self.destination_time[k];
        [
            base(0) + params.beta_origin * ind(self.internal_origin),
            params.asc_psp + base(1),
            params.asc_pup + base(2) + params.beta_age_vehicle * ind(self.new_vehicle),
        ]
    }

    /// Expected revenue of this customer at fees `p = (p_PSP, p_PUP)` for one
    /// taste draw.
    fn revenue(&self, params: &ParkingParams, taste: [f64; 2], p: &[f64]) -> f64 {
        let slopes = self.fee_slopes(params, taste[1]);
        let q = self.intercepts(params, taste[0]);
        let v = [q[0], slopes[0] * p[0] + q[1], slopes[1] * p[1] + q[2]];
        let shift = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e = v.map(|x| (x - shift).exp());
        (p[0] * e[1] + p[1] * e[2]) / (e[0] + e[1] + e[2])
    }
}

pub const PROFILE_TIME_RANGE: (f64, f64) = (1.0, 15.0);

/// Synthetic customers: times uniform on `[1, 15]` minutes, each dummy a fair
/// coin.
pub fn synthetic_profiles(seed: u64, customers: usize) -> Vec<CustomerProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = PROFILE_TIME_RANGE;
    (0..customers)
        .map(|_| {
            let access_time = [0; 3].map(|_| rng.random_range(lo..=hi));
            let destination_time = [0; 3].map(|_| rng.random_range(lo..=hi));
            CustomerProfile {
                access_time,
                destination_time,
                internal_origin: rng.random_bool(0.5),
                low_income: rng.random_bool(0.5),
                resident: rng.random_bool(0.5),
                new_vehicle: rng.random_bool(0.5),
            }
        })
        .collect()
}

/// One node of the taste grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub beta_at: f64,
    pub beta_fee: f64,
    pub weight: f64,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Probability that the taste vector falls in `[x0, x1] x [y0, y1]`.
///
/// Integrates the marginal density of the first coordinate times the
/// conditional probability of the second one with composite Simpson.
fn cell_probability(params: &ParkingParams, x: (f64, f64), y: (f64, f64)) -> f64 {
    const PANELS: usize = 2000;
    let [mx, my] = params.taste_mean;
    let c = &params.taste_cov;
    let sx = c[0][0].sqrt();
    let slope = c[0][1] / c[0][0];
    let sy_cond = (c[1][1] - c[0][1] * c[0][1] / c[0][0]).max(0.0).sqrt();
    let integrand = |t: f64| {
        let z = (t - mx) / sx;
        let density = (-0.5 * z * z).exp() / (sx * (2.0 * std::f64::consts::PI).sqrt());
        let m = my + slope * (t - mx);
        let mass = if sy_cond > 0.0 {
            std_normal_cdf((y.1 - m) / sy_cond) - std_normal_cdf((y.0 - m) / sy_cond)
        } else if (y.0..=y.1).contains(&m) {
            1.0
        } else {
            0.0
        };
        density * mass
    };
    let h = (x.1 - x.0) / PANELS as f64;
    let mut acc = integrand(x.0) + integrand(x.1);
    for k in 1..PANELS {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * integrand(x.0 + k as f64 * h);
    }
    acc * h / 3.0
}

/// `n x n` grid over the parameter box, points at cell centers, weights the
/// normal probability of each cell renormalized over the box. `n = 1` is the
/// mean with weight one.
pub fn gaussian_grid(params: &ParkingParams, n: usize) -> Result<Vec<GridPoint>> {
    if n == 0 {
        return Err(Error::Config("grid size must be at least 1".into()));
    }
    if !params.is_positive_definite() {
        return Err(Error::Config("grid discretization needs a positive definite taste covariance".into()));
    }
    if n == 1 {
        return Ok(vec![GridPoint {
            beta_at: params.taste_mean[0],
            beta_fee: params.taste_mean[1],
            weight: 1.0,
        }]);
    }
    let [x0, x1, y0, y1] = params.grid_box;
    let (dx, dy) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
    let mut points = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let xs = (x0 + a as f64 * dx, x0 + (a + 1) as f64 * dx);
            let ys = (y0 + b as f64 * dy, y0 + (b + 1) as f64 * dy);
            points.push(GridPoint {
                beta_at: 0.5 * (xs.0 + xs.1),
                beta_fee: 0.5 * (ys.0 + ys.1),
                weight: cell_probability(params, xs, ys),
            });
        }
    }
    let total: f64 = points.iter().map(|p| p.weight).sum();
    for p in &mut points {
        p.weight /= total;
    }
    Ok(points)
}

/// Discrete mixed logit parking instance over `profiles` with an
/// `n_grid x n_grid` taste grid. Priced alternatives are PSP and PUP with box
/// `[0, 2]^2`.
pub fn parking_instance_from_profiles(
    params: &ParkingParams,
    profiles: &[CustomerProfile],
    n_grid: usize,
) -> Result<MixedLogitInstance> {
    if profiles.is_empty() {
        return Err(Error::Config("at least one customer profile is required".into()));
    }
    let grid = gaussian_grid(params, n_grid)?;
    let (nn, nl) = (profiles.len(), grid.len());
    let mut price_coef = vec![0.0; 3 * nn * nl];
    let mut exo_utility = vec![0.0; 3 * nn * nl];
    let idx = |i: usize, n: usize, l: usize| (i * nn + n) * nl + l;
    for (n, prof) in profiles.iter().enumerate() {
        for (l, g) in grid.iter().enumerate() {
            let slopes = prof.fee_slopes(params, g.beta_fee);
            let q = prof.intercepts(params, g.beta_at);
            for i in 0..3 {
                exo_utility[idx(i, n, l)] = q[i];
            }
            price_coef[idx(1, n, l)] = slopes[0];
            price_coef[idx(2, n, l)] = slopes[1];
        }
    }
    let mut class_weight = vec![0.0; nl * nn];
    for (l, g) in grid.iter().enumerate() {
        for n in 0..nn {
            class_weight[l * nn + n] = g.weight;
        }
    }
    MixedLogitInstance::new(InstanceData {
        alternatives: vec![
            Alternative::fixed(PARKING_ALTERNATIVES[0]),
            Alternative::priced(PARKING_ALTERNATIVES[1]),
            Alternative::priced(PARKING_ALTERNATIVES[2]),
        ],
        customers: nn,
        classes: nl,
        price_coef,
        exo_utility,
        class_weight,
        price_lb: vec![0.0; 2],
        price_ub: vec![PARKING_PRICE_UB; 2],
        constraints: None,
    })
}

pub const PARKING_PRICE_UB: f64 = 2.0;

/// Parking instance with [`synthetic_profiles`] drawn from `seed`.
pub fn parking_instance(seed: u64, customers: usize, n_grid: usize) -> Result<MixedLogitInstance> {
    if customers == 0 {
        return Err(Error::Config("at least one customer is required".into()));
    }
    parking_instance_from_profiles(&ParkingParams::default(), &synthetic_profiles(seed, customers), n_grid)
}

/// Monte-Carlo estimate of a revenue and its standard error.
/// Rejection budget of [`continuous_ml_revenue`] per accepted draw.
const MAX_REJECTIONS_PER_SAMPLE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Revenue of the continuous mixed logit model at fees `p`, estimated from
/// `samples` seeded draws of the taste vector (shared by all customers).
///
/// Tastes follow the normal law restricted to `grid_box`, the support the
/// grid discretizes, so the discrete revenue converges to this value as the
/// grid refines. Draws outside the box are rejected.
pub fn continuous_ml_revenue(
    params: &ParkingParams,
    profiles: &[CustomerProfile],
    p: &PriceVector,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if samples == 0 {
        return Err(Error::Config("at least one sample is required".into()));
    }
    if p.len() != 2 {
        return Err(Error::PriceLength { got: p.len(), expected: 2 });
    }
    let chol = params.cholesky()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [x0, x1, y0, y1] = params.grid_box;
    let max_draws = samples.saturating_mul(MAX_REJECTIONS_PER_SAMPLE);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut draws = 0usize;
    for _ in 0..samples {
        let taste = loop {
            if draws == max_draws {
                return Err(Error::Config("taste distribution has almost no mass in the grid box".into()));
            }
            draws += 1;
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            let t = [
                params.taste_mean[0] + chol[0][0] * z0,
                params.taste_mean[1] + chol[1][0] * z0 + chol[1][1] * z1,
            ];
            if (x0..=x1).contains(&t[0]) && (y0..=y1).contains(&t[1]) {
                break t;
            }
        };
        let r: f64 = profiles.iter().map(|c| c.revenue(params, taste, p)).sum();
        sum += r;
        sum_sq += r * r;
    }
    let k = samples as f64;
    let mean = sum / k;
    let var = if samples > 1 {
        ((sum_sq - k * mean * mean) / (k - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / k).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intel_tables() {
        let inst = intel_instance();
        assert_eq!(inst.num_priced(), 3);
        assert_eq!(inst.class_weight(5, 0), 0.2842);
        assert_eq!(inst.exo_utility(2, 0, 0), 6.0054);
        assert_eq!(inst.price_coef(2, 0, 6), -0.00144);
        assert!((INTEL_WEIGHTS.iter().sum::<f64>() - 0.9998).abs() < 1e-12);
    }

    #[test]
    fn intel_reference_revenue() {
        let v = intel_instance().expected_revenue(&INTEL_REFERENCE_PRICES).unwrap();
        assert!((v - INTEL_REFERENCE_REVENUE).abs() <= 5e-3, "{v}");
    }

    #[test]
    fn random_instances_are_reproducible() {
        assert_eq!(random_instance(5, 3, 7).unwrap(), random_instance(5, 3, 7).unwrap());
        assert_ne!(random_instance(5, 3, 7).unwrap(), random_instance(6, 3, 7).unwrap());
        assert_eq!(random_small_instance(1), random_small_instance(1));
    }

    #[test]
    fn parking_fee_slope_composition() {
        let params = ParkingParams::default();
        let prof = CustomerProfile {
            access_time: [5.0; 3],
            destination_time: [5.0; 3],
            internal_origin: false,
            low_income: true,
            resident: true,
            new_vehicle: false,
        };
        let inst = parking_instance_from_profiles(&params, &[prof], 1).unwrap();
        assert!((inst.price_coef(2, 0, 0) - -56.697).abs() < 1e-12);
        assert_eq!(inst.classes(), 1);
    }

    #[test]
    fn grid_weights() {
        let params = ParkingParams::default();
        let g1 = gaussian_grid(&params, 1).unwrap();
        assert_eq!(g1.len(), 1);
        assert_eq!((g1[0].beta_at, g1[0].beta_fee, g1[0].weight), (-0.788, -32.3, 1.0));
        let g3 = gaussian_grid(&params, 3).unwrap();
        assert_eq!(g3.len(), 9);
        assert!((g3.iter().map(|p| p.weight).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(g3.iter().all(|p| p.weight >= 0.0));
    }

    #[test]
    fn symmetric_box_gives_symmetric_weights() {
        let params = ParkingParams {
            taste_mean: [0.0, 0.0],
            taste_cov: [[1.0, 0.3], [0.3, 2.0]],
            grid_box: [-2.0, 2.0, -3.0, 3.0],
            ..ParkingParams::default()
        };
        let g = gaussian_grid(&params, 4).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let w = g[a * 4 + b].weight;
                let mirror = g[(3 - a) * 4 + (3 - b)].weight;
                assert!((w - mirror).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn box_without_mass_is_rejected() {
        let params = ParkingParams {
            grid_box: [50.0, 51.0, 50.0, 51.0],
            ..ParkingParams::default()
        };
        let profiles = synthetic_profiles(3, 2);
        let p = PriceVector(vec![0.4, 0.6]);
        assert!(continuous_ml_revenue(&params, &profiles, &p, 5, 1).is_err());
    }

    #[test]
    fn degenerate_covariance_matches_single_class() {
        let params = ParkingParams {
            taste_cov: [[0.0, 0.0], [0.0, 0.0]],
            ..ParkingParams::default()
        };
        let profiles = synthetic_profiles(3, 4);
        let p = PriceVector(vec![0.4, 0.6]);
        let mc = continuous_ml_revenue(&params, &profiles, &p, 10, 1).unwrap();
        let inst = parking_instance_from_profiles(&ParkingParams::default(), &profiles, 1).unwrap();
        let exact = inst.expected_revenue(&p).unwrap();
        assert!((mc.mean - exact).abs() <= 1e-12 * exact.abs(), "{} vs {exact}", mc.mean);
        assert!(mc.std_error <= 1e-12);
        assert!(gaussian_grid(&params, 2).is_err());
    }
}
