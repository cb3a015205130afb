use thiserror::Error;

use crate::fock::Mode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("occupation has {got} entries but the registry has {expected} modes")]
    OccupationLength { expected: usize, got: usize },
    #[error("occupation carries {photons} photons, budget is {budget}")]
    PhotonBudget { photons: usize, budget: usize },
    #[error("mode {0} registered twice")]
    DuplicateMode(Mode),
    #[error("mode {0} is not registered")]
    UnknownMode(Mode),
    #[error("spatial label `{0}` is not registered")]
    UnknownSpatial(String),
    #[error("states live on different mode registries")]
    RegistryMismatch,
    #[error("registries share mode {0}")]
    OverlappingModes(Mode),
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("matrix dimension {got} does not match {expected} modes")]
    MatrixShape { expected: usize, got: usize },
    #[error("sink mode {0} is already used by another element")]
    SinkReused(Mode),
    #[error("the two ports of an element must differ, got `{0}` twice")]
    SamePort(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("odd photon count in a source pass: {0}")]
    OddPassPhotons(String),
    #[error("mode {0} is neither monitored, a sink, nor an output")]
    UnassignedMode(Mode),
    #[error("mode {0} is assigned to more than one role")]
    MultiplyAssignedMode(Mode),
    #[error("pattern references unknown port `{0}`")]
    UnknownPort(String),
    #[error("pattern is inconsistent: {0}")]
    InvalidPattern(String),
    #[error("density operator trace {0} is not 1")]
    NonUnitTrace(f64),
    #[error("matrix logarithm failed to reproduce the unitary (residual {0:.3e})")]
    IllConditionedLog(f64),
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),
    #[error("empty input set")]
    EmptyInputSet,
}

pub type Result<T> = std::result::Result<T, SimError>;
