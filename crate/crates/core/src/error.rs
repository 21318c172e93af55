//! Crate-wide error type and exit-code mapping for the CLI.

/// Unified error type for the laboratory.
///
/// Variants are grouped by how the CLI maps them to exit codes:
/// validation problems (bad input, bad geometry requests) exit 1,
/// numerical failures (stagnation, degenerate charts, non-finite data) exit 2.
/// Diagnostic threshold violations are not errors; the scenario runner
/// collects them and exits 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid too small: {0}")]
    GridTooSmall(String),
    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),
    #[error("unsupported case: {0}")]
    UnsupportedCase(String),
    #[error("point ({0:.6}, {1:.6}) outside grid")]
    OutsideGrid(f64, f64),
    #[error("profile domain exceeded: s = {value:.6e} outside [{lo:.6e}, {hi:.6e}]")]
    ProfileDomain { value: f64, lo: f64, hi: f64 },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("conjugate gradient did not converge within {iterations} iterations (residual {residual:.3e})")]
    CgStalled { iterations: usize, residual: f64 },
    #[error("iteration stagnated after {iterations} iterations (residual {residual:.3e}, best {best:.3e})")]
    Stagnation {
        iterations: usize,
        residual: f64,
        best: f64,
        history: Vec<f64>,
    },
    #[error("core collapsed to the trivial branch under a nontrivial seed")]
    CoreCollapsed,
    #[error("coefficient match failed: reached {achieved:.6e}, target {target:.6e}")]
    CoefficientMatch { achieved: f64, target: f64 },
    #[error("no level curve of value {level:.6e} inside the grid")]
    NoContour { level: f64 },
    #[error("level curve not regular: min |grad f| = {0:.3e} below floor")]
    NonRegularLevel(f64),
    #[error("chart degenerated: {0}")]
    DegenerateChart(String),
    #[error("tangency defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    TangencyDefect { defect: f64, tol: f64 },
    #[error("data not periodic across the seam: {0}")]
    NonPeriodicData(String),
    #[error("singular value decomposition failed: {0}")]
    SvdFailure(String),
    #[error("shift out of range: {0}")]
    ShiftOutOfRange(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed field file: {0}")]
    MalformedFile(String),
}

impl Error {
    /// CLI exit code for this error: 1 = validation, 2 = numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::GridTooSmall(_)
            | Error::IncompatibleGrids(_)
            | Error::InvalidParameter(_)
            | Error::ChartMismatch(_)
            | Error::UnsupportedCase(_)
            | Error::Validation(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::ShiftOutOfRange(_)
            | Error::MalformedFile(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
