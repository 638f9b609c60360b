use thiserror::Error;

/// Error type shared by every layer of the engine.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable context mismatch: `{0}` vs `{1}`")]
    VariableMismatch(String, String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("jet generator universes differ ({0} vs {1} generators)")]
    GeneratorUniverse(usize, usize),
    #[error("unknown jet generator index {0} (universe has {1})")]
    UnknownGenerator(usize, usize),
    #[error("jet generator cap exceeded: need {need}, cap is {cap}")]
    GeneratorCap { need: usize, cap: usize },
    #[error("matrix body is nonzero at entry ({0},{1}); nilpotent exponential undefined")]
    NonzeroBody(usize, usize),
    #[error("cochain is not normalized (slot {0})")]
    NotNormalized(usize),
    #[error("representation is not unital: {0}")]
    NotUnital(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid model: {0}")]
    Model(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EngineError>;
