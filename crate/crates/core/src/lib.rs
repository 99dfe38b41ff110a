//! Tail bounds for self-normalized and normalized martingales, plus the
//! simulation and Monte Carlo machinery to check them empirically.
//!
//! The crate is organized around four layers:
//!
//! * [`rates`] — the scalar rate functions (`x - log(1+x)`, Bennett's
//!   `(1+x)log(1+x) - x`, their quadratic relaxations) and the closed-form
//!   optimizers every bound is assembled from.
//! * [`bounds`] — the closed-form tail bounds themselves, each returned as a
//!   [`bounds::BoundValue`] carrying both the raw formula value and a value
//!   clamped to `[0, 1]`.
//! * [`sim`] — martingale-difference trajectories, AR(1) paths with bounded
//!   noise, Student's t-statistic, and the exponential supermartingale
//!   functionals.
//! * [`verify`] — empirical tail estimation with exact binomial confidence
//!   intervals, expectation-type bound estimation with Hölder-parameter
//!   optimization, and the config-driven verification runner.
//!
//! Replication loops are data-parallel when the `parallel` feature (on by
//! default) is enabled; reports are byte-identical regardless of worker
//! count because reductions always happen in replication order.

// negated comparisons (`!(x > 0.0)`) double as NaN domain rejection
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod exec;
pub mod optim;
pub mod rates;
pub mod rng;
pub mod sim;
pub mod verify;
