use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("embedding dimension {embed_dim} is too small for {num_classes} classes (need at least {})", num_classes - 1)]
    DimensionTooSmall { embed_dim: usize, num_classes: usize },

    /// `0 < m_min < m_max < R/sqrt(2)` does not hold.
    #[error(
        "margin constraint violated: need 0 < m_min < m_max < R/sqrt(2) = {bound:.4} (R = {radius}), got m_min = {m_min}, m_max = {m_max}"
    )]
    MarginConstraint {
        m_min: f64,
        m_max: f64,
        radius: f64,
        bound: f64,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("a background batch is required when lambda_bg > 0")]
    MissingBackground,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("could not place {wanted} class centers with pairwise distance >= {min_distance} after {attempts} attempts")]
    InfeasibleSeparation {
        wanted: usize,
        min_distance: f64,
        attempts: usize,
    },
}

impl Error {
    /// True for errors caused by bad configuration or inputs rather than by
    /// something going wrong while running.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NonFiniteLoss { .. } | Error::InfeasibleSeparation { .. }
        )
    }
}
