//! Generalized Fréchet means in concrete metric spaces.
//!
//! The crate has six parts:
//!
//! - [`space`]: metric spaces (Euclidean, weighted sequences, metric trees,
//!   plane with an excluded region), derived distance kinds, geodesics, and
//!   projections.
//! - [`cost`]: cost functions, empirical objectives, and the quadruple
//!   structure catalog with weak/strong residual evaluators plus product and
//!   min-over-sets combinators.
//! - [`lab`]: randomized sweeps for every inequality (quadruple, power,
//!   arithmetic form, proof-lemma battery) and the counter-example
//!   constructions.
//! - [`estimator`]: empirical Fréchet mean computation and growth-condition
//!   fitting.
//! - [`entropy`]: covering numbers, entropy integrals, the rate function
//!   `eta`, and theoretical rate predictions.
//! - [`harness`]: seeded Monte Carlo experiments with log-log rate fits,
//!   tail checks, moment estimates, and the empirical-process supremum.
//!
//! Long-running sweeps and experiments are data-parallel via rayon when the
//! default `parallel` feature is enabled; results are identical either way.
//!
//! ```
//! use frechet_core::cost::QuadrupleStructure;
//! use frechet_core::lab::sweep_structure;
//! use frechet_core::space::MetricSpaceDescriptor;
//!
//! // The squared metric on a metric tree satisfies the quadruple
//! // inequality with data distance 2d and descriptor metric d.
//! let tripod = MetricSpaceDescriptor::tripod();
//! let report =
//!     sweep_structure(&tripod, &QuadrupleStructure::Nice, None, 20_000, 7, 1e-9).unwrap();
//! assert_eq!(report.violations, 0);
//! ```

pub mod cost;
pub mod entropy;
pub mod estimator;
pub mod exec;
pub mod fit;
pub mod harness;
pub mod lab;
pub mod space;
pub mod sweep;

pub use exec::{parallelism_available, ExecMode};
pub use sweep::{ViolationReport, Witness};
