pub mod bnb;
pub mod error;
pub mod instances;
pub mod io;
pub mod local_search;
pub mod lp;
pub mod model;
pub mod relaxation;

pub use error::{Error, Result};
pub use model::{Alternative, InstanceData, LinearConstraints, MixedLogitInstance, PriceVector};
pub use bnb::{solve, SolveConfig, SolveReport, SolveStatus, TracePoint};
pub use local_search::{local_search, LocalSearchConfig};
pub use relaxation::{node_upper_bound, NodeBox, PointPool};
