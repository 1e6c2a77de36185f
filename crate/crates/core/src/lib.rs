//! Multi-agent covering options: Fiedler-vector option discovery on
//! Kronecker-product joint state graphs, plus the gridworld and learners used
//! to evaluate it.

pub mod env;
pub mod error;
pub mod graph;
pub mod harness;
pub mod kron;
pub mod learners;
pub mod linalg;
pub mod options;
pub mod policy;

pub use error::{EnvError, KronError, LearnError, OptionError, PolicyError, SpectralError};
pub use graph::FactorGraph;
