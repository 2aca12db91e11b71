use std::path::PathBuf;

/// Errors raised by the estimation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("unknown scenario `{name}`; valid presets: {valid}")]
    UnknownScenario { name: String, valid: String },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid input: {0}")]
    Input(String),

    /// The requested step is too large for the explicit scheme.
    #[error("CFL violation: step dt = {dt:.6e} exceeds the stable bound dt <= {required:.6e}")]
    Cfl { dt: f64, required: f64 },

    #[error("non-finite value encountered at time step {step}")]
    NonFinite { step: usize },

    #[error("no admissible landing within {tol:.3e} of x = {x} at t = {t}")]
    NoLanding { x: f64, t: f64, tol: f64 },

    #[error("particle weight collapse at step {step}: ESS = {ess:.2}; increase the particle count or eps")]
    WeightCollapse { step: usize, ess: f64 },

    #[error("gauge mismatch: expected {expected}, found {found}")]
    Gauge { expected: String, found: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("io error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("malformed file {}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures of numerical checks or schemes, as opposed to bad
    /// input or IO.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Cfl { .. }
                | Error::NonFinite { .. }
                | Error::NoLanding { .. }
                | Error::WeightCollapse { .. }
                | Error::Invariant(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Csv { .. })
    }
}
