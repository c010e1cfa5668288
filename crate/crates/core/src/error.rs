use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A site value or configuration outside the single-site state space.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("operation not supported for {model}: {what}")]
    Unsupported { model: String, what: String },

    /// A density/fugacity consistency relation does not hold.
    #[error("condition {condition} violated{}: defect {defect:.3e}", site.map(|s| format!(" at site {s}")).unwrap_or_default())]
    Condition {
        condition: String,
        site: Option<i64>,
        defect: f64,
    },

    #[error("truncation tail bound {tail_bound:.3e} exceeds tolerance {tolerance:.3e}")]
    Truncation { tail_bound: f64, tolerance: f64 },

    #[error("enumeration needs {required} evaluations, cap is {cap}")]
    Budget { required: u128, cap: u64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("replica {replica} hit the value cap {cap} (value {value})")]
    CappedRun { replica: u64, cap: i32, value: i32 },

    #[error("{flagged} of {total} replicas touched the frozen-boundary light cone; enlarge the lattice")]
    Inconclusive { flagged: usize, total: usize },
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
