use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid data: {0}")]
    Validation(String),

    #[error("record too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no interior voltage vertex in run {run}: |v| peaks at sample {index}")]
    NoVertex { run: usize, index: usize },

    #[error("underdetermined fit: {samples} samples for degree {degree}")]
    Underdetermined { samples: usize, degree: usize },

    #[error("ill-conditioned fit: numerical rank {rank} < {needed} basis functions")]
    Conditioning { rank: usize, needed: usize },

    #[error("gamma pole at {0}")]
    GammaPole(f64),

    #[error("t = {t} outside evaluation domain {lo}..{hi}")]
    Domain { t: f64, lo: f64, hi: f64 },

    #[error(
        "singularity at vertex T = {vertex}: t = {t} lies within {guard} of T, (t-T)^-alpha diverges"
    )]
    Singularity { t: f64, vertex: f64, guard: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("memfractance degenerate: {0}")]
    Degenerate(String),

    #[error("no admissible (alpha1, alpha2) couple at step {step}; refine the alpha grid")]
    NoSolution { step: f64 },

    #[error("open sweep: voltage starts at {start} V and ends at {end} V")]
    OpenSweep { start: f64, end: f64 },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
