use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("channel {index} ({kind}) lies outside the domain or has non-positive width")]
    ChannelOutOfDomain { kind: &'static str, index: usize },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("rk4 step dt = {dt:e} exceeds the stability bound {bound:e}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("state became non-finite; last finite time t = {last_finite_time}")]
    NonFiniteState { last_finite_time: f64 },

    #[error("worst-case disturbance requires a Riccati solution")]
    MissingRiccati,

    #[error("gamma = {gamma} is infeasible: {reason}")]
    GammaInfeasible { gamma: f64, reason: String },

    #[error("system is not stabilizable; offending eigenvalues {0:?}")]
    NotStabilizable(Vec<(f64, f64)>),

    #[error("system is not detectable; offending eigenvalues {0:?}")]
    NotDetectable(Vec<(f64, f64)>),

    #[error("no feasible gamma found below {0:e}")]
    NoFeasibleGammaFound(f64),

    #[error("resonant modes: eigenvalue sum {0:e} too close to zero")]
    ResonantModes(f64),

    #[error("closed loop is not exponentially stable (abscissa {0:e})")]
    UnstableClosedLoop(f64),

    #[error("disturbance ensemble carries zero input energy")]
    ZeroInputEnergy,

    #[error("decrement identity requires a linear closed-loop trajectory")]
    NonlinearTrajectoryRejected,

    #[error("saddle dynamics are not stable (abscissa {0:e})")]
    SaddleUnstable(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Variant name, used in command-line diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ChannelOutOfDomain { .. } => "ChannelOutOfDomain",
            Error::InvalidParams(_) => "InvalidParams",
            Error::CflViolation { .. } => "CflViolation",
            Error::NonFiniteState { .. } => "NonFiniteState",
            Error::MissingRiccati => "MissingRiccati",
            Error::GammaInfeasible { .. } => "GammaInfeasible",
            Error::NotStabilizable(_) => "NotStabilizable",
            Error::NotDetectable(_) => "NotDetectable",
            Error::NoFeasibleGammaFound(_) => "NoFeasibleGammaFound",
            Error::ResonantModes(_) => "ResonantModes",
            Error::UnstableClosedLoop(_) => "UnstableClosedLoop",
            Error::ZeroInputEnergy => "ZeroInputEnergy",
            Error::NonlinearTrajectoryRejected => "NonlinearTrajectoryRejected",
            Error::SaddleUnstable(_) => "SaddleUnstable",
            Error::Numerical(_) => "Numerical",
            Error::Io(_) => "Io",
        }
    }
}

pub(crate) fn check_len(expected: usize, actual: usize, context: &'static str) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            actual,
            context,
        })
    }
}
