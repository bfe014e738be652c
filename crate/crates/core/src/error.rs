use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    /// Tree products may not put two noises on the same node.
    #[error("product would place two noises on one node")]
    NoiseProduct,

    /// Mixing the two flavours of positive-degree symbols in one monomial.
    #[error("plus-monomial factors of different kinds cannot be multiplied")]
    KindMismatch,

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("enumeration exceeds the configured cap ({cap} trees)")]
    BoundsTooLarge { cap: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, TreeError>;
