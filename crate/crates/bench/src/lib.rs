//! Shared fixtures for the benchmarks.

use mixprice_core::instances::intel_instance;
use mixprice_core::relaxation::{NodeBox, PointPool};
use mixprice_core::MixedLogitInstance;

/// Intel instance with a box of half-width `half_width` around the reference
/// prices and a pool holding the box center.
pub fn intel_node(half_width: f64) -> (MixedLogitInstance, NodeBox, PointPool) {
    let inst = intel_instance();
    let center = mixprice_core::instances::INTEL_REFERENCE_PRICES;
    let bx = NodeBox::new(
        center.iter().map(|c| c - half_width).collect(),
        center.iter().map(|c| c + half_width).collect(),
    )
    .expect("box is well formed");
    let mut pool = PointPool::default();
    pool.push(bx.center());
    (inst, bx, pool)
}
