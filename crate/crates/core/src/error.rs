use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    Shape {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("tensor data length {len} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, len: usize },
    #[error("batch too small for {op}: need at least {min} rows, got {got}")]
    BatchTooSmall {
        op: &'static str,
        min: usize,
        got: usize,
    },
    #[error("finite-difference oracle produced a non-finite value at coordinate {coord}")]
    OracleFailure { coord: usize },
    #[error("parameter layout mismatch: {0}")]
    Layout(String),
    #[error("cannot average an empty trajectory")]
    EmptyTrajectory,
    #[error("forward cache does not belong to these parameters")]
    StaleCache,
    #[error("{name} = {value} outside [{lo}, {hi}]")]
    Range {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("row {row} has zero norm")]
    DegenerateRow { row: usize },
    #[error("constant activations: CKA denominator is zero")]
    DegenerateFeatures,
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("dataset too small: need at least {min} samples, got {got}")]
    TooSmall { min: usize, got: usize },
    #[error("need at least {min} evaluation points, got {got}")]
    InsufficientData { min: usize, got: usize },
    #[error("class {class} absent from dataset {dataset}")]
    MissingClass { class: usize, dataset: String },
    #[error("invalid marginal: {0}")]
    Marginal(String),
}
