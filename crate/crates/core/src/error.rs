use thiserror::Error;

/// Errors raised by the crystallographic layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymmetryError {
    #[error("space group index {0} outside 1..=230")]
    InvalidSpaceGroup(i64),
    #[error("unknown Wyckoff letter '{letter}' for space group {sg}")]
    UnknownWyckoff { sg: u16, letter: char },
    #[error("degenerate lattice (volume {0})")]
    DegenerateLattice(f64),
    #[error("invalid lattice parameters: {0}")]
    InvalidLattice(String),
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("unknown species '{0}'")]
    UnknownSpecies(String),
    #[error("invalid structure: {0}")]
    InvalidStructure(String),
    #[error("Wyckoff table integrity: {0}")]
    TableIntegrity(String),
}

/// Errors raised by the diffusion model (features, training, sampling, checkpoints).
#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("timestep {t} outside 1..={max}")]
    TimestepOutOfRange { t: usize, max: usize },
    #[error("validation failed for records: {0:?}")]
    Validation(Vec<String>),
    #[error("sampling failed after {0} attempts: decoded lattice degenerate")]
    SamplingFailure(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors raised by the constraint generator.
#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("template error: unbound placeholder {{{0}}}")]
    Template(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("constraint generation failed after {attempts} attempts; last response: {last_response:?}")]
    Generation { attempts: usize, last_response: String },
    #[error("backend transport error: {0}")]
    Transport(String),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors raised by the evaluation protocol.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("missing reference energy for element {0}")]
    MissingElementEnergy(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Errors raised while reading, filtering or writing datasets.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: malformed record: {msg}")]
    Malformed { path: String, line: usize, msg: String },
    #[error("record {id}: {msg}")]
    Invalid { id: String, msg: String },
    #[error("record {id}: missing field {field}")]
    MissingField { id: String, field: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
