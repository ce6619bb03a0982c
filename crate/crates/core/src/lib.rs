//! Goal-oriented intelligent tutoring laboratory.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensornet`]: dense matrices, layers, optimizers, gradient checking and
//!   tensor checkpoints.
//! - [`graphdata`]: the cognitive graph (answers, coverage, prerequisites),
//!   per-session subgraphs and their normalized adjacency.
//! - [`embed`]: TransE pretraining of node embeddings.
//! - [`simulator`]: a monotone cognitive-diagnosis student model with the
//!   response, reward and patience rules of the tutoring environment.
//! - [`policy`]: the graph-encoded dueling DQN tutor with prerequisite-guided
//!   candidate selection and prioritized replay.
//! - [`baselines`]: KNN, Greedy and vanilla DQN comparison policies.
//! - [`harness`]: datasets, episodes, metrics, sweeps and reports.
//!
//! Data-parallel loops (batch gradients, episode evaluation) go through
//! [`exec::Execution`]; with the `parallel` feature disabled every path runs
//! sequentially.

pub mod baselines;
pub mod embed;
pub mod error;
pub mod exec;
pub mod graphdata;
pub mod harness;
pub mod policy;
pub mod simulator;
pub mod tensornet;

pub use error::{Error, Result};
pub use exec::Execution;
