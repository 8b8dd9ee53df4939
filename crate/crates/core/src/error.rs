use thiserror::Error;

use crate::shift::OperatorKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} has no incident edge")]
    IsolatedVertex { vertex: usize },

    #[error("duplicate edge {src} -> {dst}")]
    DuplicateEdge { src: usize, dst: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("edge {src} -> {dst} has non-finite weight {weight}")]
    NonFiniteWeight { src: usize, dst: usize, weight: f64 },

    #[error("edge {src} -> {dst} has negative weight {weight}; normalization needs nonnegative weights")]
    NegativeWeight { src: usize, dst: usize, weight: f64 },

    #[error("vertex {vertex} has non-positive degree {degree}")]
    NonPositiveDegree { vertex: usize, degree: f64 },

    #[error("the Laplacian is only defined here for undirected graphs")]
    DirectedLaplacian,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("path length {k} exceeds the enumeration guard {max}")]
    PathLengthTooLarge { k: usize, max: usize },

    #[error("matrix is not diagonalizable (reconstruction residual {residual:e})")]
    NotDiagonalizable { residual: f64 },

    #[error("{what} of size {size} exceeds the limit {max}")]
    TooLarge { what: &'static str, size: usize, max: usize },

    #[error("operator is not strongly connected")]
    NotStronglyConnected,

    #[error("dominant eigenvalue is not simple (top magnitudes {first} and {second})")]
    DegenerateDominantEigenvalue { first: f64, second: f64 },

    #[error("first-layer output has no component along the dominant eigenvector")]
    ZeroProjection,

    #[error("layer expects a {expected:?} operator, got {found:?}")]
    WrongOperatorKind {
        expected: OperatorKind,
        found: OperatorKind,
    },

    #[error("dropout rate {0} is outside [0, 1)")]
    InvalidRate(f64),

    #[error("loss mask is empty")]
    EmptyMask,

    #[error("cached forward state does not match the model: {0}")]
    StaleState(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("cannot aggregate an empty list of runs")]
    EmptyList,

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("node {node} appears in more than one split")]
    SplitOverlap { node: usize },

    #[error("node {node} has label {label} outside [0, {num_classes})")]
    LabelOutOfRange {
        node: usize,
        label: i64,
        num_classes: usize,
    },

    #[error("{0} split is empty")]
    EmptySplit(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case name of the variant, used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::IsolatedVertex { .. } => "isolated_vertex",
            Error::DuplicateEdge { .. } => "duplicate_edge",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::NonFiniteWeight { .. } => "non_finite_weight",
            Error::NegativeWeight { .. } => "negative_weight",
            Error::NonPositiveDegree { .. } => "non_positive_degree",
            Error::DirectedLaplacian => "directed_laplacian",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::PathLengthTooLarge { .. } => "path_length_too_large",
            Error::NotDiagonalizable { .. } => "not_diagonalizable",
            Error::TooLarge { .. } => "too_large",
            Error::NotStronglyConnected => "not_strongly_connected",
            Error::DegenerateDominantEigenvalue { .. } => "degenerate_dominant_eigenvalue",
            Error::ZeroProjection => "zero_projection",
            Error::WrongOperatorKind { .. } => "wrong_operator_kind",
            Error::InvalidRate(_) => "invalid_rate",
            Error::EmptyMask => "empty_mask",
            Error::StaleState(_) => "stale_state",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::EmptyList => "empty_list",
            Error::Format { .. } => "format",
            Error::SplitOverlap { .. } => "split_overlap",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::EmptySplit(_) => "empty_split",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
