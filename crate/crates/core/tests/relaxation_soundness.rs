//! The relaxation must overestimate the revenue on every box.

mod common;

use common::{families, lift, random_subbox, sample_pool};
use mixprice_core::instances::{intel_instance, random_small_instance};
use mixprice_core::local_search::random_feasible_point;
use mixprice_core::relaxation::{
    build_relaxation, node_upper_bound_with, tau_bounds, tau_lower_bound, tau_upper_bound, BoundMethod,
    NodeBoundStatus, RelaxationOptions,
};
use mixprice_core::{MixedLogitInstance, NodeBox, PointPool};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn lifted_prices_satisfy_every_row() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (name, inst) in families() {
        for round in 0..3 {
            let bx = if round == 0 {
                NodeBox::root(&inst)
            } else {
                random_subbox(&inst, &mut rng, 0.3)
            };
            let Some(pool) = sample_pool(&inst, &bx, 3, &mut rng) else {
                continue;
            };
            let tb = tau_bounds(&inst, &bx).unwrap();
            let lp = build_relaxation(&inst, &bx, &pool, &tb).unwrap();
            // Anchors are witnesses too: their hyperplanes are tight there.
            for p in pool.points() {
                let v = lp.max_violation(&lift(&inst, p));
                assert!(v <= 1e-9, "{name}: anchor {p:?} violates by {v:e}");
            }
            let samples = if name == "parking" { 2_000 } else { 10_000 };
            for _ in 0..samples * pool.len() {
                let p = random_feasible_point(&inst, bx.region(), &mut rng).unwrap();
                let v = lp.max_violation(&lift(&inst, &p));
                assert!(v <= 1e-9, "{name}: {p:?} violates by {v:e}");
            }
        }
    }
}

#[test]
fn supporting_hyperplanes_underestimate_f() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for (name, inst) in families() {
        let bx = NodeBox::root(&inst);
        let pool = sample_pool(&inst, &bx, 2, &mut rng).unwrap();
        let samples: Vec<Vec<f64>> = (0..10_000)
            .map(|_| random_feasible_point(&inst, bx.region(), &mut rng).unwrap().0)
            .collect();
        for anchor in pool.points() {
            for &i in inst.priced_alternatives() {
                for n in 0..inst.customers() {
                    for l in 0..inst.classes() {
                        let f0 = inst.ratio_denominator(anchor, i, n, l).unwrap();
                        let g = inst.f_gradient(anchor, i, n, l).unwrap();
                        for p in &samples {
                            let f = inst.ratio_denominator(p, i, n, l).unwrap();
                            let lin: f64 = f0 + g.iter().zip(p).zip(anchor.iter()).map(|((g, x), a)| g * (x - a)).sum::<f64>();
                            assert!(f >= lin - 1e-9 * (1.0 + f.abs() + f0.abs()), "{name}: f {f} < {lin} at {p:?}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn bound_dominates_revenue_at_feasible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for (name, inst) in families() {
        for round in 0..4 {
            let bx = match round {
                0 => NodeBox::root(&inst),
                1 => random_subbox(&inst, &mut rng, 0.25),
                2 => random_subbox(&inst, &mut rng, 0.01),
                _ => random_subbox(&inst, &mut rng, 1e-6),
            };
            let Some(pool) = sample_pool(&inst, &bx, 2, &mut rng) else {
                continue;
            };
            for method in [BoundMethod::Direct, BoundMethod::Decomposed] {
                if name == "parking" && method == BoundMethod::Direct {
                    continue;
                }
                let opts = RelaxationOptions {
                    method,
                    ..RelaxationOptions::default()
                };
                let nb = node_upper_bound_with(&inst, &bx, &pool, &opts).unwrap();
                assert_eq!(nb.status, NodeBoundStatus::Solved, "{name} {method:?}");
                for _ in 0..100 {
                    let p = random_feasible_point(&inst, bx.region(), &mut rng).unwrap();
                    let r = inst.expected_revenue(&p).unwrap();
                    assert!(
                        nb.upper_bound >= r - 1e-7 * (1.0 + r.abs()),
                        "{name} {method:?} round {round}: bound {} < revenue {r} at {p:?}",
                        nb.upper_bound
                    );
                }
            }
        }
    }
}

#[test]
fn bound_dominates_grid_oracle_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for seed in 0..50 {
        let inst = random_small_instance(seed);
        for rel in [1.0, 0.02] {
            let bx = if rel == 1.0 {
                NodeBox::root(&inst)
            } else {
                random_subbox(&inst, &mut rng, rel)
            };
            let pool = sample_pool(&inst, &bx, 1, &mut rng).unwrap();
            let (ub, _) = mixprice_core::node_upper_bound(&inst, &bx, &pool).unwrap();
            let steps = 100;
            let mut best = f64::NEG_INFINITY;
            for a in 0..=steps {
                for b in 0..=steps {
                    let p = [
                        bx.lb[0] + bx.width(0) * a as f64 / steps as f64,
                        bx.lb[1] + bx.width(1) * b as f64 / steps as f64,
                    ];
                    best = best.max(inst.expected_revenue(&p).unwrap());
                }
            }
            assert!(ub >= best - 1e-7 * (1.0 + best.abs()), "seed {seed}: {ub} < grid max {best}");
        }
    }
}

#[test]
fn direct_and_decomposed_bounds_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for (name, inst) in families() {
        if name == "parking" {
            continue;
        }
        for rel in [1.0, 0.3, 0.05] {
            let bx = if rel == 1.0 {
                NodeBox::root(&inst)
            } else {
                random_subbox(&inst, &mut rng, rel)
            };
            let Some(pool) = sample_pool(&inst, &bx, 3, &mut rng) else {
                continue;
            };
            let bound = |method| {
                let opts = RelaxationOptions {
                    method,
                    ..RelaxationOptions::default()
                };
                node_upper_bound_with(&inst, &bx, &pool, &opts).unwrap().upper_bound
            };
            let (d, c) = (bound(BoundMethod::Direct), bound(BoundMethod::Decomposed));
            // The cutting-plane value is an upper bound on the LP optimum.
            assert!(c >= d - 1e-7 * (1.0 + d.abs()), "{name}: decomposed {c} < direct {d}");
            assert!(c <= d + 2e-6 * (1.0 + d.abs()), "{name}: decomposed {c} vs direct {d}");
        }
    }
}

#[test]
fn bounds_tighten_with_more_anchors_and_smaller_boxes() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let direct = RelaxationOptions {
        method: BoundMethod::Direct,
        ..RelaxationOptions::default()
    };
    for (name, inst) in families() {
        if name == "parking" {
            continue;
        }
        let root = NodeBox::root(&inst);
        let mut pool = sample_pool(&inst, &root, 1, &mut rng).unwrap();
        pool = {
            let mut p = PointPool::new(10);
            p.push(pool.points()[0].clone());
            p
        };
        let mut last = node_upper_bound_with(&inst, &root, &pool, &direct).unwrap().upper_bound;
        for _ in 0..5 {
            pool.push(random_feasible_point(&inst, root.region(), &mut rng).unwrap());
            let ub = node_upper_bound_with(&inst, &root, &pool, &direct).unwrap().upper_bound;
            assert!(ub <= last + 1e-7 * (1.0 + last.abs()), "{name}: {ub} > {last} after adding an anchor");
            last = ub;
        }
        // Halving the box around an anchor can only tighten.
        let mut bx = root.clone();
        let anchor = pool.points()[0].clone();
        let mut parent = node_upper_bound_with(&inst, &bx, &pool, &direct).unwrap().upper_bound;
        for depth in 0..8 {
            let j = depth % bx.dims();
            let mid = 0.5 * (bx.lb[j] + bx.ub[j]);
            if anchor[j] <= mid {
                bx.ub[j] = mid;
            } else {
                bx.lb[j] = mid;
            }
            let child = node_upper_bound_with(&inst, &bx, &pool, &direct).unwrap();
            if child.status == NodeBoundStatus::Empty {
                break;
            }
            assert!(
                child.upper_bound <= parent + 1e-7 * (1.0 + parent.abs()),
                "{name} depth {depth}: {} > {parent}",
                child.upper_bound
            );
            parent = child.upper_bound;
        }
    }
}

/// `f_i` increases in `p_i` and decreases in every other price, so its
/// extremes over a box sit at two known vertices. The upper bound comes from
/// an iterative minimization and only needs to be close; the lower bound is
/// exact up to its safety widening.
#[test]
fn tau_bounds_match_monotone_vertex_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    for (name, inst) in families() {
        if inst.has_constraints() {
            continue;
        }
        for rel in [1.0, 0.1, 1e-3] {
            let bx = random_subbox(&inst, &mut rng, rel);
            for (slot, &i) in inst.priced_alternatives().iter().enumerate() {
                let corner = |own_high: bool| -> Vec<f64> {
                    (0..bx.dims())
                        .map(|j| if (j == slot) == own_high { bx.ub[j] } else { bx.lb[j] })
                        .collect()
                };
                for n in 0..inst.customers() {
                    for l in 0..inst.classes() {
                        let f_min = inst.ratio_denominator(&corner(false), i, n, l).unwrap();
                        let f_max = inst.ratio_denominator(&corner(true), i, n, l).unwrap();
                        let ub = tau_upper_bound(&inst, &bx, i, n, l).unwrap();
                        let lb = tau_lower_bound(&inst, &bx, i, n, l).unwrap();
                        let (want_ub, want_lb) = (1.0 / f_min, 1.0 / f_max);
                        assert!(ub >= want_ub && ub <= want_ub * (1.0 + 1e-4), "{name}: ub {ub} vs {want_ub}");
                        assert!(lb <= want_lb && lb >= want_lb * (1.0 - 1e-9), "{name}: lb {lb} vs {want_lb}");
                    }
                }
            }
        }
    }
}

#[test]
fn monopoly_bound_approaches_linear_revenue() {
    let inst = MixedLogitInstance::new(mixprice_core::InstanceData {
        alternatives: vec![mixprice_core::Alternative::priced("only")],
        customers: 3,
        classes: 1,
        price_coef: vec![-1.0; 3],
        exo_utility: vec![0.0; 3],
        class_weight: vec![1.0; 3],
        price_lb: vec![0.0],
        price_ub: vec![1.0],
        constraints: None,
    })
    .unwrap();
    let bx = NodeBox::root(&inst);
    let mut pool = PointPool::default();
    for k in 0..=10 {
        pool.push(vec![k as f64 / 10.0].into());
        let (ub, _) = mixprice_core::node_upper_bound(&inst, &bx, &pool).unwrap();
        assert!(ub >= 3.0 - 1e-9 && ub <= 3.0 + 1e-7, "{ub}");
    }
}

#[test]
fn intel_bound_covers_the_reference_optimum() {
    let inst = intel_instance();
    let bx = NodeBox::root(&inst);
    let mut pool = PointPool::default();
    pool.push(mixprice_core::instances::INTEL_REFERENCE_PRICES.to_vec().into());
    let (ub, _) = mixprice_core::node_upper_bound(&inst, &bx, &pool).unwrap();
    assert!(ub >= 362.3389, "{ub}");
}
