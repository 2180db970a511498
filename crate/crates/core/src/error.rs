use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("topology is not radial: {0}")]
    NonRadialTopology(String),

    #[error("incidence matrix is numerically singular (condition estimate {condition:.3e})")]
    SingularIncidence { condition: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("available power must be nonnegative, got {0}")]
    NegativeAvailablePower(f64),

    #[error("stored energy {w} outside [{w_min}, {w_max}]")]
    SocOutOfRange { w: f64, w_min: f64, w_max: f64 },

    #[error("more than one device placed at node {0}")]
    DuplicateDeviceNode(usize),

    #[error("series needs at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("invalid sample series: {0}")]
    InvalidSeries(String),

    #[error("signal queried at t = {t} s outside its span [{start}, {end}]")]
    SignalOutOfRange { t: f64, start: f64, end: f64 },

    #[error("barrier domain violated at constraint {index}: s - f_i = {margin:.3e}")]
    BarrierDomainViolation { index: usize, margin: f64 },

    #[error("barrier Hessian ill-conditioned (estimate {condition:.3e})")]
    IllConditionedHessian { condition: f64 },

    #[error("step rejected at t = {t} s after {halvings} halvings (constraint {index})")]
    StepRejected { t: f64, halvings: usize, index: usize },

    #[error("measurement window holds {have} of {need} snapshots")]
    WindowNotFull { have: usize, need: usize },

    #[error("regression matrix is rank deficient (sigma_min / sigma_max = {ratio:.3e})")]
    RankDeficientExcitation { ratio: f64 },

    #[error("QP infeasible: {0}")]
    Infeasible(String),

    #[error("QP solver hit the iteration limit ({0})")]
    MaxIterations(usize),

    #[error("trajectories are not aligned: {0}")]
    MisalignedTrajectories(String),

    #[error("no device of the required kind at node {0}")]
    UnknownNode(usize),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("failed to read {path}: {source}")]
    ScenarioLoad {
        path: PathBuf,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end: 2 for scenario and
    /// input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonRadialTopology(_)
            | Error::DimensionMismatch { .. }
            | Error::NegativeAvailablePower(_)
            | Error::SocOutOfRange { .. }
            | Error::DuplicateDeviceNode(_)
            | Error::TooFewSamples(_)
            | Error::InvalidSeries(_)
            | Error::SignalOutOfRange { .. }
            | Error::UnknownNode(_)
            | Error::Scenario(_)
            | Error::ScenarioLoad { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::SingularIncidence { .. }
            | Error::BarrierDomainViolation { .. }
            | Error::IllConditionedHessian { .. }
            | Error::StepRejected { .. }
            | Error::WindowNotFull { .. }
            | Error::RankDeficientExcitation { .. }
            | Error::Infeasible(_)
            | Error::MaxIterations(_)
            | Error::MisalignedTrajectories(_) => 3,
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
