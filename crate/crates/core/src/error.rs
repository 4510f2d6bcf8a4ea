use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Malformed or out-of-range input.
    #[error("input error: {0}")]
    Input(String),

    /// Input that is well-formed but violates a hypothesis the machinery needs.
    #[error("infeasible input: {0}")]
    Infeasible(String),

    #[error("precision error: {reason} (requires at least {required_bits} bits)")]
    Precision { reason: String, required_bits: u64 },

    #[error("numeric error at step {step}: {reason}")]
    Numeric { step: u64, reason: String },

    #[error("window error: {0}")]
    Window(String),

    #[error("search failure: {reason} (best ratio {best_ratio:.6} at N = {best_n})")]
    Search {
        reason: String,
        best_n: u64,
        best_ratio: f64,
    },

    #[error("parameter search exhausted after {iterations} iterations; last violated: {violated}")]
    ParameterSearch { iterations: usize, violated: String },

    #[error("schedule infeasible at s = {s_index}: {violated}")]
    ScheduleInfeasible { s_index: usize, violated: String },

    #[error("budget exceeded: N_deep = {n_deep} exceeds the budget; largest feasible depth is {largest_feasible}")]
    Budget { n_deep: String, largest_feasible: usize },

    #[error("comparison could not be certified: {0}")]
    Indeterminate(String),

    /// Broken internal invariant (a bug or corrupted data, never bad user input).
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
