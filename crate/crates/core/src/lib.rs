//! Optimal tradeoff between PIR rate and age of information.
//!
//! A user fetches one of `M` replicated messages of `L` bits from `N` servers
//! without revealing which one, requesting the next retrieval as soon as the
//! previous one finishes. Server `n` returns `d_n` bits, each bit taking an
//! i.i.d. delay with mean `μ_n` and variance `σ²_n`. This crate picks the
//! download sizes that minimize peak or average age subject to a minimum
//! rate `L / E[D] >= r_min`.
//!
//! - [`capacity`]: capacity under asymmetric traffic, the constraint system and corner points
//! - [`peak_solver`]: exact peak-age optimum and its time-sharing realization
//! - [`avg_solver`]: average-age optimum via the Charnes-Cooper transform
//! - [`oracle`]: exhaustive grid search used to check the solvers
//! - [`sim`]: Monte Carlo renewal simulation
//! - [`cli`]: the `timely-pir` command
//!
//! ```
//! use timely_pir::{ratio, solve_peak, ExactConfig, ServerStats};
//!
//! let servers = vec![
//!     ServerStats::new(ratio(1, 1), ratio(1, 1)).unwrap(),
//!     ServerStats::new(ratio(3, 1), ratio(1, 1)).unwrap(),
//! ];
//! let config = ExactConfig::new(3, 8, servers, ratio(1, 2)).unwrap();
//! let best = solve_peak(&config).unwrap();
//! assert_eq!(best.objective, ratio(48, 1));
//! assert_eq!(best.allocation.entries(), &[ratio(12, 1), ratio(4, 1)]);
//! ```

pub mod avg_solver;
pub mod capacity;
pub mod cli;
pub mod config;
pub mod error;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod peak_solver;
pub mod polytope;
pub mod scalar;
pub mod sim;

pub use avg_solver::solve_avg;
pub use capacity::{capacity_asym, corner_points, pir_capacity, CornerPoint, TrafficRatio};
pub use error::{Error, Result};
pub use model::{
    Branch, DownloadAllocation, Metric, MixtureComponent, MixturePolicy, ServerStats, Solution,
    SystemConfig,
};
pub use oracle::{grid_search, verify, VerifyReport};
pub use peak_solver::{solve_peak, solve_peak_lp, solve_peak_n2m3};
pub use scalar::{ratio, FloatScalar, Scalar};
pub use sim::{DelayDistribution, Family, SimResult};

/// Arbitrary-precision rational used by the exact pipeline.
pub type Rational = num_rational::BigRational;

pub type ExactConfig = SystemConfig<Rational>;
pub type FloatConfig = SystemConfig<f64>;
pub type ExactAllocation = DownloadAllocation<Rational>;
pub type FloatAllocation = DownloadAllocation<f64>;
pub type ExactSolution = Solution<Rational>;
pub type FloatSolution = Solution<f64>;
