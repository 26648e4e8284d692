//! Branch-and-bound invariants on small instances.

mod common;

use common::{check_partition, check_trace, GridOracle};
use mixprice_core::bnb::{branch, fathom_threshold, select_branch_dim, Node};
use mixprice_core::instances::random_small_instance;
use mixprice_core::relaxation::PointPool;
use mixprice_core::{solve, Alternative, InstanceData, MixedLogitInstance, NodeBox, SolveConfig, SolveStatus};

fn monopoly(customers: usize) -> MixedLogitInstance {
    MixedLogitInstance::new(InstanceData {
        alternatives: vec![Alternative::priced("only")],
        customers,
        classes: 1,
        price_coef: vec![-2.0; customers],
        exo_utility: vec![0.3; customers],
        class_weight: vec![1.0; customers],
        price_lb: vec![0.0],
        price_ub: vec![1.0],
        constraints: None,
    })
    .unwrap()
}

fn config(gap: f64) -> SolveConfig {
    SolveConfig {
        gap_tolerance: gap,
        ..SolveConfig::default()
    }
}

#[test]
fn monopoly_closes_at_the_root() {
    let report = solve(&monopoly(4), &SolveConfig::default()).unwrap();
    assert_eq!(report.status, SolveStatus::OptimalWithinTol);
    assert!((report.incumbent[0] - 1.0).abs() < 1e-12);
    assert!((report.incumbent_value - 4.0).abs() < 1e-12);
    assert_eq!(report.gap, 0.0);
    assert_eq!(report.trace.len(), 1);
    assert_eq!(report.nodes_processed, 1);
}

#[test]
fn scripted_descent_halves_the_radius_every_sweep() {
    let bx = NodeBox::new(vec![0.0, 0.0, 0.0], vec![8.0, 2.0, 4.0]).unwrap();
    let mut node = Node::new(bx, PointPool::default(), 1.0, 0, 0);
    let mut next = 0;
    let mut radii = vec![node.bx.radius()];
    for level in 0..20 {
        let j = select_branch_dim(&node.bx).unwrap();
        let width = node.bx.width(j);
        let (left, right) = branch(&node, &mut next).unwrap();
        assert_eq!(left.bx.ub[j], right.bx.lb[j]);
        assert_eq!(left.bx.width(j), width / 2.0);
        assert_eq!(right.bx.width(j), width / 2.0);
        assert!((left.bx.volume() + right.bx.volume() - node.bx.volume()).abs() <= 1e-12 * node.bx.volume());
        node = if level % 2 == 0 { left } else { right };
        radii.push(node.bx.radius());
    }
    // Sides 8, 2, 4 become equal after three splits; from then on every
    // sweep over the three axes halves the radius exactly.
    for w in radii[3..].windows(4).step_by(3) {
        assert!((w[3] - w[0] / 2.0).abs() <= 1e-12 * w[0], "{} -> {}", w[0], w[3]);
    }
    assert!(radii.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn traces_are_monotone_and_leaves_tile_the_root() {
    for seed in 0..6 {
        let inst = random_small_instance(seed);
        for node_limit in [Some(7), None] {
            let cfg = SolveConfig {
                node_limit,
                ..config(1e-4)
            };
            let report = solve(&inst, &cfg).unwrap();
            check_trace(&report.trace).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            let leaves: Vec<&NodeBox> = report.leaves().collect();
            check_partition(&NodeBox::root(&inst), &leaves).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            assert_eq!(report.nodes_processed, report.trace.len());
            assert_eq!(report.nodes_explored_per_iteration.iter().sum::<usize>(), report.nodes_processed);
            let gap = (report.global_upper_bound - report.incumbent_value) / report.incumbent_value.abs().max(1.0);
            assert!((report.gap - gap.max(0.0)).abs() <= 1e-15);
            match node_limit {
                Some(limit) if report.status == SolveStatus::NodeLimit => {
                    assert_eq!(report.nodes_processed, limit);
                    assert!(!report.open.is_empty());
                }
                _ => {
                    assert_eq!(report.status, SolveStatus::OptimalWithinTol);
                    assert!(report.gap <= 1e-4);
                }
            }
        }
    }
}

#[test]
fn fathomed_boxes_hold_nothing_better_than_the_incumbent() {
    for seed in 10..16 {
        let inst = random_small_instance(seed);
        let gap = 1e-4;
        let report = solve(&inst, &config(gap)).unwrap();
        let oracle = GridOracle::new(&inst, 1e-2);
        let limit = fathom_threshold(report.incumbent_value, gap);
        for (bx, _) in &report.fathomed {
            if let Some((p, v)) = oracle.best_in(bx) {
                assert!(v <= limit, "seed {seed}: {p:?} has {v} > {limit} in a fathomed box");
            }
        }
        let (_, best) = oracle.best_in(&NodeBox::root(&inst)).unwrap();
        assert!(report.incumbent_value >= best - 1e-3 * (1.0 + best.abs()));
    }
}

#[test]
fn single_thread_runs_are_reproducible() {
    let inst = random_small_instance(3);
    let cfg = SolveConfig {
        seed: 11,
        ..config(1e-5)
    };
    let strip = |mut r: mixprice_core::SolveReport| {
        r.trace.iter_mut().for_each(|t| t.wall_time = 0.0);
        r
    };
    let a = strip(solve(&inst, &cfg).unwrap());
    let b = strip(solve(&inst, &cfg).unwrap());
    assert_eq!(a, b);
}

#[test]
fn parallel_runs_keep_the_invariants() {
    let inst = random_small_instance(2);
    let serial = solve(&inst, &config(1e-4)).unwrap();
    let cfg = SolveConfig {
        threads: 4,
        ..config(1e-4)
    };
    let parallel = solve(&inst, &cfg).unwrap();
    check_trace(&parallel.trace).unwrap();
    let leaves: Vec<&NodeBox> = parallel.leaves().collect();
    check_partition(&NodeBox::root(&inst), &leaves).unwrap();
    assert_eq!(parallel.status, SolveStatus::OptimalWithinTol);
    let tol = 1e-4 * serial.incumbent_value.abs().max(1.0);
    assert!((parallel.incumbent_value - serial.incumbent_value).abs() <= tol);
}

#[test]
fn limits_stop_the_search() {
    let inst = mixprice_core::instances::intel_instance();
    let cfg = SolveConfig {
        time_limit: Some(0.2),
        ..SolveConfig::default()
    };
    let report = solve(&inst, &cfg).unwrap();
    assert_eq!(report.status, SolveStatus::TimeLimit);
    assert!(report.gap > 0.0);
    check_trace(&report.trace).unwrap();
    assert!(solve(&inst, &config(0.0)).is_err());
}
