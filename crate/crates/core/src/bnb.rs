//! Spatial branch and bound over the price box.
//!
//! Nodes are processed best-first by upper bound. Processing a node runs the
//! local search inside its box (lower bounds), evaluates and polishes the
//! price part of the relaxation optimum, and solves the relaxation (upper
//! bound). A node is fathomed once its bound is within the gap tolerance of
//! the incumbent; otherwise its box is split at the midpoint of its widest
//! side.
//!
//! With `threads > 1` the best `threads` open nodes are processed as a batch
//! in parallel and merged in pop order, so results do not depend on thread
//! scheduling.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::local_search::{local_search_in_box, random_feasible_point, LocalSearchConfig, FEASIBILITY_TOL};
use crate::model::{MixedLogitInstance, PriceVector};
use crate::relaxation::{node_upper_bound_with, NodeBoundStatus, NodeBox, PointPool, RelaxationOptions};

/// Relative slack added to the fathoming threshold against LP round-off.
const FATHOM_REL_SLACK: f64 = 1e-9;
/// Retained near-optimal solutions.
const MAX_SOLUTIONS: usize = 20;
/// Solutions closer than this fraction of the box width are merged.
const SOLUTION_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub bx: NodeBox,
    pub pool: PointPool,
    /// Bound inherited from the parent until the node is evaluated.
    pub upper_bound: f64,
    pub depth: usize,
    pub id: u64,
    retried: bool,
}

impl Node {
    pub fn new(bx: NodeBox, pool: PointPool, upper_bound: f64, depth: usize, id: u64) -> Self {
        Self {
            bx,
            pool,
            upper_bound,
            depth,
            id,
            retried: false,
        }
    }

    pub fn root(inst: &MixedLogitInstance, pool_capacity: usize) -> Self {
        Self {
            bx: NodeBox::root(inst),
            pool: PointPool::new(pool_capacity),
            upper_bound: f64::INFINITY,
            depth: 0,
            id: 0,
            retried: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// Relative gap `(ub - incumbent) / max(1, |incumbent|)` to certify.
    pub gap_tolerance: f64,
    pub time_limit: Option<f64>,
    pub node_limit: Option<usize>,
    pub seed: u64,
    /// Local-search starts per node.
    pub local_starts: usize,
    pub threads: usize,
    /// Also run the local search from the relaxation candidate.
    pub polish_candidates: bool,
    pub pool_capacity: usize,
    pub local_search: LocalSearchConfig,
    pub relaxation: RelaxationOptions,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            gap_tolerance: 1e-5,
            time_limit: None,
            node_limit: None,
            seed: 0,
            local_starts: 1,
            threads: 1,
            polish_candidates: true,
            pool_capacity: crate::relaxation::DEFAULT_POOL_CAPACITY,
            local_search: LocalSearchConfig::default(),
            relaxation: RelaxationOptions::default(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tolerance.is_finite() && self.gap_tolerance > 0.0) {
            return Err(Error::Config("gap tolerance must be positive".into()));
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config("time limit must be positive".into()));
        }
        if self.node_limit == Some(0) {
            return Err(Error::Config("node limit must be positive".into()));
        }
        if self.local_starts == 0 || self.threads == 0 || self.pool_capacity == 0 {
            return Err(Error::Config("local starts, threads and pool capacity must be positive".into()));
        }
        self.local_search.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    OptimalWithinTol,
    TimeLimit,
    NodeLimit,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::OptimalWithinTol => "optimal_within_tol",
            Self::TimeLimit => "time_limit",
            Self::NodeLimit => "node_limit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub wall_time: f64,
    pub incumbent_value: f64,
    pub global_upper_bound: f64,
    pub open_nodes: usize,
    /// Largest half-diagonal over open boxes (0 when none are open).
    pub max_box_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub incumbent: PriceVector,
    pub incumbent_value: f64,
    pub global_upper_bound: f64,
    pub gap: f64,
    pub status: SolveStatus,
    pub trace: Vec<TracePoint>,
    /// Processed nodes per tree depth.
    pub nodes_explored_per_iteration: Vec<usize>,
    pub nodes_processed: usize,
    /// Distinct solutions within the gap tolerance of the incumbent, best
    /// first.
    pub solutions: Vec<(PriceVector, f64)>,
    /// Fathomed leaves with the bound that fathomed them.
    pub fathomed: Vec<(NodeBox, f64)>,
    /// Boxes still open at termination.
    pub open: Vec<(NodeBox, f64)>,
}

impl SolveReport {
    /// Leaves of the final partition of the root box.
    pub fn leaves(&self) -> impl Iterator<Item = &NodeBox> {
        self.fathomed.iter().chain(&self.open).map(|(b, _)| b)
    }
}

/// Smallest index among the widest sides.
pub fn select_branch_dim(bx: &NodeBox) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in 0..bx.dims() {
        let w = bx.width(j);
        if best.is_none_or(|(_, bw)| w > bw) {
            best = Some((j, w));
        }
    }
    match best {
        Some((j, w)) if w > 0.0 => Ok(j),
        _ => Err(Error::Config("cannot branch on a degenerate box".into())),
    }
}

/// Splits the node box at the midpoint of its widest side; children share
/// the parent's pool and bound.
pub fn branch(node: &Node, next_id: &mut u64) -> Result<(Node, Node)> {
    let j = select_branch_dim(&node.bx)?;
    let mid = 0.5 * (node.bx.lb[j] + node.bx.ub[j]);
    let mut make = |lb: Vec<f64>, ub: Vec<f64>| {
        *next_id += 1;
        Node {
            bx: NodeBox { lb, ub },
            pool: node.pool.clone(),
            upper_bound: node.upper_bound,
            depth: node.depth + 1,
            id: *next_id,
            retried: false,
        }
    };
    let mut left_ub = node.bx.ub.clone();
    left_ub[j] = mid;
    let mut right_lb = node.bx.lb.clone();
    right_lb[j] = mid;
    let left = make(node.bx.lb.clone(), left_ub);
    let right = make(right_lb, node.bx.ub.clone());
    Ok((left, right))
}

/// Fathoming threshold for an incumbent value.
pub fn fathom_threshold(incumbent: f64, gap_tolerance: f64) -> f64 {
    incumbent + FATHOM_REL_SLACK * incumbent.abs() + gap_tolerance * incumbent.abs().max(1.0)
}

fn relative_gap(ub: f64, inc: f64) -> f64 {
    ((ub - inc) / inc.abs().max(1.0)).max(0.0)
}

struct OpenNode(Node);

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    // Max-heap on the bound; older nodes first on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .upper_bound
            .total_cmp(&other.0.upper_bound)
            .then_with(|| other.0.id.cmp(&self.0.id))
    }
}

fn node_seed(seed: u64, id: u64, k: u64) -> u64 {
    // SplitMix64 finalizer over the combined key.
    let mut z = seed
        .wrapping_add(id.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(k.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

enum Outcome {
    Bounded { node: Node, bound_status: NodeBoundStatus },
    /// Relaxation failed numerically; `node` carries a perturbed pool.
    Retry(Node),
}

struct Processed {
    outcome: Outcome,
    candidates: Vec<(PriceVector, f64)>,
}

/// Evaluates one node against an incumbent snapshot.
fn process_node(inst: &MixedLogitInstance, cfg: &SolveConfig, mut node: Node, incumbent: f64) -> Result<Processed> {
    let mut candidates: Vec<(PriceVector, f64)> = Vec::new();
    let region = node.bx.region();
    for k in 0..cfg.local_starts {
        let ls_cfg = LocalSearchConfig {
            seed: node_seed(cfg.seed, node.id, k as u64),
            ..cfg.local_search.clone()
        };
        match local_search_in_box(inst, &ls_cfg, None, region) {
            Ok(out) => candidates.push((out.point, out.value)),
            Err(Error::InfeasibleInstance) => {
                node.upper_bound = f64::NEG_INFINITY;
                return Ok(Processed {
                    outcome: Outcome::Bounded {
                        node,
                        bound_status: NodeBoundStatus::Empty,
                    },
                    candidates,
                });
            }
            Err(e) => log::debug!("node {}: local search failed: {e}", node.id),
        }
    }
    for (p, _) in &candidates {
        node.pool.push(p.clone());
    }
    let center = node.bx.center();
    if inst.is_feasible(&center, 0.0) {
        node.pool.push(center);
    }
    if node.pool.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(node_seed(cfg.seed, node.id, u64::MAX));
        node.pool.push(random_feasible_point(inst, region, &mut rng)?);
    }

    let best_local = candidates.iter().map(|c| c.1).fold(incumbent, f64::max);
    let opts = RelaxationOptions {
        cutoff: best_local
            .is_finite()
            .then(|| fathom_threshold(best_local, cfg.gap_tolerance)),
        ..cfg.relaxation.clone()
    };
    let bound = match node_upper_bound_with(inst, &node.bx, &node.pool, &opts) {
        Ok(b) => b,
        Err(Error::NumericalFailure(msg)) => {
            log::debug!("node {}: relaxation failed: {msg}", node.id);
            if !node.retried {
                let mut pool = PointPool::new(node.pool.capacity());
                let mut rng = ChaCha8Rng::seed_from_u64(node_seed(cfg.seed, node.id, u64::MAX - 1));
                for (p, _) in &candidates {
                    pool.push(p.clone());
                }
                for _ in 0..2 {
                    pool.push(random_feasible_point(inst, region, &mut rng)?);
                }
                node.pool = pool;
                node.retried = true;
                return Ok(Processed {
                    outcome: Outcome::Retry(node),
                    candidates,
                });
            }
            // Keep the inherited bound.
            return Ok(Processed {
                outcome: Outcome::Bounded {
                    node,
                    bound_status: NodeBoundStatus::Suspect,
                },
                candidates,
            });
        }
        Err(e) => return Err(e),
    };

    if let Some(c) = &bound.candidate {
        if inst.is_feasible(c, FEASIBILITY_TOL) {
            let v = inst.expected_revenue(c)?;
            candidates.push((c.clone(), v));
            if cfg.polish_candidates {
                let ls_cfg = LocalSearchConfig {
                    seed: node_seed(cfg.seed, node.id, cfg.local_starts as u64),
                    ..cfg.local_search.clone()
                };
                if let Ok(out) = local_search_in_box(inst, &ls_cfg, Some(c), region) {
                    node.pool.push(out.point.clone());
                    candidates.push((out.point, out.value));
                }
            }
        }
    }
    if bound.status != NodeBoundStatus::Suspect {
        node.upper_bound = node.upper_bound.min(bound.upper_bound);
    }
    Ok(Processed {
        outcome: Outcome::Bounded {
            node,
            bound_status: bound.status,
        },
        candidates,
    })
}

struct Incumbent {
    point: Option<PriceVector>,
    value: f64,
    /// Every candidate seen within reach of the best, for the solution list.
    pool: Vec<(PriceVector, f64)>,
    /// Per-coordinate distance below which two solutions count as one.
    resolution: Vec<f64>,
}

impl Incumbent {
    fn offer(&mut self, p: PriceVector, v: f64, gap_tol: f64) {
        if !v.is_finite() {
            return;
        }
        if v > self.value {
            self.value = v;
            self.point = Some(p.clone());
        }
        let floor = self.value - gap_tol * self.value.abs().max(1.0);
        if v >= floor {
            let close = |q: &PriceVector| {
                q.iter()
                    .zip(p.iter())
                    .zip(&self.resolution)
                    .all(|((a, b), r)| (a - b).abs() <= *r)
            };
            match self.pool.iter_mut().find(|(q, _)| close(q)) {
                Some(entry) if entry.1 < v => *entry = (p, v),
                Some(_) => {}
                None => self.pool.push((p, v)),
            }
        }
        self.pool.retain(|(_, w)| *w >= floor);
        self.pool
            .sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| cmp_points(&a.0, &b.0)));
        self.pool.truncate(MAX_SOLUTIONS);
    }
}

fn cmp_points(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Runs the branch and bound.
pub fn solve(inst: &MixedLogitInstance, config: &SolveConfig) -> Result<SolveReport> {
    config.validate()?;
    let start = Instant::now();
    let pool_ = if config.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let mut open: BinaryHeap<OpenNode> = BinaryHeap::new();
    open.push(OpenNode(Node::root(inst, config.pool_capacity)));
    let mut next_id = 0u64;
    let mut inc = Incumbent {
        point: None,
        value: f64::NEG_INFINITY,
        pool: Vec::new(),
        resolution: inst
            .price_lb()
            .iter()
            .zip(inst.price_ub())
            .map(|(lo, hi)| SOLUTION_RESOLUTION * (hi - lo).max(1.0))
            .collect(),
    };
    let mut fathomed: Vec<(NodeBox, f64)> = Vec::new();
    let mut trace = Vec::new();
    let mut per_depth: Vec<usize> = Vec::new();
    let mut processed = 0usize;
    let mut last_ub = f64::INFINITY;

    // Fathomed boxes are within tolerance of the incumbent by construction
    // and drop out of the reported bound.
    let global_ub = |open: &BinaryHeap<OpenNode>, inc: f64| {
        open.peek().map_or(f64::NEG_INFINITY, |n| n.0.upper_bound).max(inc)
    };

    let status = loop {
        let ub = global_ub(&open, inc.value);
        if inc.point.is_some() && (open.is_empty() || relative_gap(ub, inc.value) <= config.gap_tolerance) {
            break SolveStatus::OptimalWithinTol;
        }
        if open.is_empty() {
            return Err(Error::NumericalFailure("no feasible point was found".into()));
        }
        if config.node_limit.is_some_and(|lim| processed >= lim) {
            break SolveStatus::NodeLimit;
        }
        if config.time_limit.is_some_and(|t| start.elapsed().as_secs_f64() >= t) {
            break SolveStatus::TimeLimit;
        }

        let batch_len = match config.node_limit {
            Some(lim) => config.threads.min(lim - processed),
            None => config.threads,
        };
        let batch: Vec<Node> = (0..batch_len).filter_map(|_| open.pop().map(|n| n.0)).collect();
        // Batch nodes stay open until their result is merged.
        let in_flight: Vec<(f64, f64)> = batch.iter().map(|n| (n.upper_bound, n.bx.radius())).collect();
        let snapshot = inc.value;
        let results: Vec<Result<Processed>> = match &pool_ {
            Some(tp) => tp.install(|| {
                batch
                    .into_par_iter()
                    .map(|node| process_node(inst, config, node, snapshot))
                    .collect()
            }),
            None => batch
                .into_iter()
                .map(|node| process_node(inst, config, node, snapshot))
                .collect(),
        };

        for (k, res) in results.into_iter().enumerate() {
            let pending = &in_flight[k + 1..];
            let Processed { outcome, candidates } = res?;
            for (p, v) in candidates {
                inc.offer(p, v, config.gap_tolerance);
            }
            match outcome {
                Outcome::Retry(node) => {
                    open.push(OpenNode(node));
                    continue;
                }
                Outcome::Bounded { node, bound_status } => {
                    processed += 1;
                    if per_depth.len() <= node.depth {
                        per_depth.resize(node.depth + 1, 0);
                    }
                    per_depth[node.depth] += 1;
                    let threshold = fathom_threshold(inc.value, config.gap_tolerance);
                    let degenerate = select_branch_dim(&node.bx).is_err();
                    if bound_status == NodeBoundStatus::Empty || node.upper_bound <= threshold || degenerate {
                        fathomed.push((node.bx, node.upper_bound));
                    } else {
                        let (a, b) = branch(&node, &mut next_id)?;
                        open.push(OpenNode(a));
                        open.push(OpenNode(b));
                    }
                }
            }
            let ub = pending
                .iter()
                .fold(global_ub(&open, inc.value), |m, &(b, _)| m.max(b))
                .min(last_ub);
            last_ub = ub;
            let radius = open
                .iter()
                .map(|n| n.0.bx.radius())
                .chain(pending.iter().map(|&(_, r)| r))
                .fold(0.0, f64::max);
            trace.push(TracePoint {
                wall_time: start.elapsed().as_secs_f64(),
                incumbent_value: inc.value,
                global_upper_bound: ub,
                open_nodes: open.len() + pending.len(),
                max_box_radius: radius,
            });
        }
    };

    let incumbent = inc
        .point
        .clone()
        .ok_or_else(|| Error::NumericalFailure("no feasible point was found".into()))?;
    let global_upper_bound = global_ub(&open, inc.value).min(last_ub);
    let mut open_boxes: Vec<(NodeBox, f64)> = open.into_sorted_vec().into_iter().rev().map(|n| (n.0.bx, n.0.upper_bound)).collect();
    open_boxes.shrink_to_fit();
    Ok(SolveReport {
        incumbent,
        incumbent_value: inc.value,
        global_upper_bound,
        gap: relative_gap(global_upper_bound, inc.value),
        status,
        trace,
        nodes_explored_per_iteration: per_depth,
        nodes_processed: processed,
        solutions: inc.pool,
        fathomed,
        open: open_boxes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(lb: &[f64], ub: &[f64]) -> NodeBox {
        NodeBox::new(lb.to_vec(), ub.to_vec()).unwrap()
    }

    #[test]
    fn branch_dimension() {
        assert_eq!(select_branch_dim(&bx(&[0.0, 0.0], &[2.0, 1.0])).unwrap(), 0);
        assert_eq!(select_branch_dim(&bx(&[0.0, 0.0], &[1.0, 1.0])).unwrap(), 0);
        assert_eq!(select_branch_dim(&bx(&[0.0, 0.0, 2.0], &[1.0, 3.0, 2.0])).unwrap(), 1);
        assert!(select_branch_dim(&bx(&[1.0], &[1.0])).is_err());
    }

    #[test]
    fn branch_halves_widest_side() {
        let node = Node {
            bx: bx(&[0.0, 0.0], &[2.0, 1.0]),
            pool: PointPool::default(),
            upper_bound: 5.0,
            depth: 0,
            id: 0,
            retried: false,
        };
        let mut next = 0;
        let (a, b) = branch(&node, &mut next).unwrap();
        assert_eq!(a.bx, bx(&[0.0, 0.0], &[1.0, 1.0]));
        assert_eq!(b.bx, bx(&[1.0, 0.0], &[2.0, 1.0]));
        assert_eq!((a.upper_bound, b.upper_bound, a.depth), (5.0, 5.0, 1));
        assert_eq!((a.id, b.id), (1, 2));
    }

    #[test]
    fn seeds_differ_per_node() {
        assert_ne!(node_seed(1, 0, 0), node_seed(1, 1, 0));
        assert_ne!(node_seed(1, 0, 0), node_seed(1, 0, 1));
        assert_eq!(node_seed(7, 3, 2), node_seed(7, 3, 2));
    }
}
