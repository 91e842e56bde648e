use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what} = {value} lies outside its domain [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("degenerate conditional: {0}")]
    DegenerateConditional(String),

    #[error("log-concavity condition violated: {0}")]
    LogConcavity(String),

    #[error("concavity violated: h'({left}) = {d_left} < h'({right}) = {d_right}")]
    ConcavityViolation {
        left: f64,
        right: f64,
        d_left: f64,
        d_right: f64,
    },

    #[error("no acceptance after {proposals} proposals")]
    PathologicalTarget { proposals: u64 },

    #[error("regeneration time {t} exceeds the cap (kernel eps = {epsilon:e}); narrow the supports")]
    RegenerationTooLong { t: u64, epsilon: f64 },

    #[error("lower envelope mass of coordinate {coord} underflowed to zero")]
    EnvelopeDegenerate { coord: usize },

    #[error("kernel inconsistency: residual mass {residual} is negative")]
    KernelInconsistency { residual: f64 },

    #[error("retry budget of the random ledger exhausted for {stream:?} at time {time}, coordinate {coord}")]
    RetryExhausted {
        stream: crate::ledger::Stream,
        time: i64,
        coord: u64,
    },

    #[error("no coalescence after {epochs} epochs (open z gaps: {z_gaps:?}, open s gaps: {s_gaps:?})")]
    NonCoalescence {
        epochs: u32,
        z_gaps: Vec<(usize, usize, usize)>,
        s_gaps: Vec<(usize, usize, usize)>,
    },

    #[error("enumeration needs about {terms:e} terms, above the limit of {limit:e}")]
    OracleTooLarge { terms: f64, limit: f64 },

    #[error("empty feasible set")]
    EmptyFeasibleSet,
}

impl Error {
    /// True for failures of the sampler itself rather than of its inputs.
    pub fn is_pathology(&self) -> bool {
        matches!(
            self,
            Error::NonCoalescence { .. }
                | Error::PathologicalTarget { .. }
                | Error::RegenerationTooLong { .. }
                | Error::EnvelopeDegenerate { .. }
                | Error::KernelInconsistency { .. }
                | Error::RetryExhausted { .. }
                | Error::ConcavityViolation { .. }
                | Error::DegenerateConditional(_)
        )
    }
}
