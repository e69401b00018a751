use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid element `{element}`: {reason}")]
    InvalidElement { element: String, reason: String },

    #[error("element `{element}` has no companion model (it is stamped as a constraint)")]
    NoCompanion { element: String },

    #[error("singular nodal system at t={time}s: network is not tied to ground")]
    Topology { time: f64 },

    #[error("switching fixpoint not reached at t={time}s: `{element}` keeps chattering")]
    Chattering { time: f64, element: String },

    #[error("KCL residual {residual:e} exceeds tolerance at node `{node}` (t={time}s)")]
    KclViolation {
        time: f64,
        node: String,
        residual: f64,
    },

    #[error("numerical divergence at t={time}s in `{component}`")]
    Divergence { time: f64, component: String },

    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    #[error("invariant violated at t={time}s in `{component}`: {reason}")]
    InvariantViolation {
        time: f64,
        component: String,
        reason: String,
    },

    #[error("out-of-order sample at t={time}s (previous t={previous}s)")]
    StreamOrder { time: f64, previous: f64 },

    #[error("relay wiring error: detections from lines {first} and {second}")]
    Wiring { first: usize, second: usize },

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("comparison refused: {0}")]
    Mismatch(String),

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

impl SimError {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag, used in the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            SimError::InvalidElement { .. } => "invalid_element",
            SimError::NoCompanion { .. } => "no_companion",
            SimError::Topology { .. } => "topology",
            SimError::Chattering { .. } => "chattering",
            SimError::KclViolation { .. } => "kcl_violation",
            SimError::Divergence { .. } => "divergence",
            SimError::Infeasible(_) => "infeasible",
            SimError::InvariantViolation { .. } => "invariant_violation",
            SimError::StreamOrder { .. } => "stream_order",
            SimError::Wiring { .. } => "wiring",
            SimError::Config { .. } => "config",
            SimError::Syntax { .. } => "syntax",
            SimError::Mismatch(_) => "mismatch",
            SimError::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
