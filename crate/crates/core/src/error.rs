use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("node {0} has degree zero; the normalized Laplacian is undefined")]
    IsolatedNode(usize),
    #[error("graph has {0} nodes; at least 2 are required")]
    TooSmall(usize),
    #[error("node index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("self-loop on node {0}; only simple graphs are supported")]
    SelfLoop(usize),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("edge list parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KronError {
    #[error("joint size {size} exceeds the cap of {cap}")]
    Overflow { size: u128, cap: usize },
    #[error("all estimated joint eigenvalues coincide; no Fiedler candidate exists")]
    Degenerate,
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("invalid factor spectrum set: {0}")]
    InvalidFactors(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptionError {
    #[error("Fiedler estimation failed: {0}")]
    Degenerate(KronError),
    #[error("discovery iteration {iteration} produced no new options")]
    NonConvergent { iteration: usize },
    #[error("agent {agent} cannot reach state {state}")]
    UnreachableTarget { agent: usize, state: usize },
    #[error("option count {0} must be even (options come in symmetric pairs)")]
    OddCount(usize),
    #[error("graph/model mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

impl From<KronError> for OptionError {
    fn from(e: KronError) -> Self {
        match e {
            KronError::Spectral(s) => OptionError::Spectral(s),
            other => OptionError::Degenerate(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("map parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("free cells are not 4-connected")]
    Disconnected,
    #[error("bad partition: {0}")]
    BadPartition(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("invalid learner config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Options(#[from] OptionError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("state {from} has no path to goal {goal}")]
    UnreachableTarget { from: usize, goal: usize },
    #[error("goal {goal} out of range for {n_states} states")]
    GoalOutOfRange { goal: usize, n_states: usize },
}
