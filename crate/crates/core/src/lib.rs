//! Multiswap local search for clustering with outliers.
//!
//! Covers uncapacitated facility location with outliers (UFL-out) and
//! k-median/k-means with outliers: metric backends, instances, exact and
//! incremental cost evaluation, `rho`-swap local search with a local-optimality
//! certifier, a brute-force optimum for small instances, locality-gap instance
//! families, and an executable version of the pairing/grouping analysis.
//!
//! ```
//! use swapout::{evaluate, local_search, Backend, CenterId, Instance, MetricSpace, ProblemKind, SearchConfig};
//!
//! let points = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0], vec![100.0]];
//! let centers = vec![vec![0.5], vec![10.5], vec![100.0]];
//! let metric = MetricSpace::new(Backend::Euclidean { points, centers }, 1.0).unwrap();
//! let inst = Instance::new(metric, ProblemKind::KClusterOut { k: 2, epsilon: 0.0 }, 1).unwrap();
//!
//! let trace = local_search(&inst, &SearchConfig::default()).unwrap();
//! assert_eq!(trace.solution.open(), &[CenterId(0), CenterId(1)]);
//! assert_eq!(trace.final_cost(), evaluate(&inst, &[CenterId(0), CenterId(1)]).unwrap().cost());
//! ```

pub mod analysis;
pub mod canonical;
pub mod cost;
pub mod error;
pub mod exact;
pub mod gap;
pub mod instance;
pub mod metric;
pub mod search;
pub mod sweep;
pub mod tol;

pub use cost::{apply_swap, delta_of_swap, evaluate, swap_cost, Near, Solution, SolutionDoc, SwapMove};
pub use error::{Error, Result};
pub use exact::{solve_exact, subset_count, ExactResult};
pub use gap::{gen_kmed_gap, gen_ufl_gap, verify_gap, GapInstance, GapReport, KMedGapParams, UflGapParams};
pub use instance::{center_budget, load_instance, save_instance, Instance, Labels, OpeningCosts, ProblemKind};
pub use metric::{Backend, CenterId, Graph, MetricSpace, PointId, Precompute};
pub use search::{
    certify_local_optimum, certify_with_slack, enumerate_moves, iteration_bound, local_search, seed_solution,
    Certificate, MoveIter, PivotRule, SearchConfig, SearchTrace, SeedPolicy, Step, Termination,
};
