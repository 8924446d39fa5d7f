use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("network has no clusters")]
    EmptyNetwork,
    #[error("clusters mix fixed and random activity models")]
    MixedActivityKinds,
    #[error("cluster {0}: beta must lie in (0, 1]")]
    BadBeta(usize),
    #[error("cluster {0}: active count exceeds cluster size")]
    BadCount(usize),
    #[error("cluster {0}: activity probability must lie in [0, 1]")]
    BadProbability(usize),
    #[error("cluster {0}: size must be at least 1")]
    BadSize(usize),
    #[error("duplicate cluster id {0}")]
    DuplicateId(u32),
    #[error("operation requires the {expected} activity model")]
    WrongActivityKind { expected: &'static str },
    #[error("no expected activity in any cluster; sampling design is undefined")]
    NoActivity,
    #[error("cluster {0}: sampling probability must be strictly below 1")]
    DegenerateQ(usize),
    #[error("cluster {index}: sampling probability {q} outside [0, 1)")]
    BadPlan { index: usize, q: f64 },
    #[error("plan has {got} entries, network has {expected} clusters")]
    PlanMismatch { expected: usize, got: usize },
    #[error("base q {base_q} drives some cluster's sampling probability to 1 or above")]
    PlanOutOfRange { base_q: f64 },
    #[error("the exponential bound requires a beta-scaled plan")]
    OriginMismatch,
    #[error(
        "bound never decays below epsilon: some cluster with inactive sensors is never sampled"
    )]
    NonDecaying,
    #[error("probe count must be at least 1")]
    BadProbeCount,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{name} must lie in {range}, got {value}")]
    OutOfRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error("sensor index {index} out of range for {n} sensors")]
    BadSensor { index: usize, n: usize },
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// `true` for errors caused by invalid user input, as opposed to
    /// failures while running.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
