//! Relationship discovery for binary prediction markets.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`market_data`] loads resolved markets and YES-price series, filters
//!    them to binary markets open for at least a week, and slices cohorts by
//!    the month named in the question text.
//! 2. [`clustering`] embeds questions and partitions each cohort into
//!    roughly `N / 10` clusters.
//! 3. [`transduction`] asks a chat model to label each cluster and to
//!    propose same/different outcome pairs, validating every response
//!    against a strict schema.
//! 4. [`evaluation`] joins predictions with realized outcomes and computes
//!    cluster-averaged and pooled accuracy.
//! 5. [`relation_graph`] turns evaluated relations into a signed graph and
//!    checks triangle sign balance.
//! 6. [`backtest`] trades the follower market after the leader resolves.
//!
//! [`pipeline`] wires these stages together over cohorts and trials, and
//! [`synth`] generates planted fixtures for tests and examples.

pub mod backtest;
pub mod clustering;
pub mod error;
pub mod evaluation;
pub mod market_data;
pub mod pipeline;
pub mod relation_graph;
pub mod synth;
pub mod transduction;

pub use error::{Error, Result};
