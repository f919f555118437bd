use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{function}: argument outside domain ({detail})")]
    Domain {
        function: &'static str,
        detail: String,
    },

    #[error("{function}: intermediate overflow ({detail})")]
    Range {
        function: &'static str,
        detail: String,
    },

    #[error("{function}: no convergence after {iterations} iterations")]
    NoConvergence {
        function: &'static str,
        iterations: usize,
    },

    #[error("invalid aperture: {field} = {value} ({constraint})")]
    InvalidAperture {
        field: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("invalid grid size {n}: {constraint}")]
    GridSize { n: usize, constraint: &'static str },

    #[error("grid mismatch: {left} vs {right} points")]
    GridMismatch { left: usize, right: usize },

    #[error("m_max = {m_max} exceeds the anti-aliasing bound grid_n/4 = {bound}")]
    TruncationTooLarge { m_max: usize, bound: usize },

    #[error(
        "imaginary residue {residue:e} exceeds {tolerance:e} (wavefunction not real-symmetric)"
    )]
    ImaginaryResidue { residue: f64, tolerance: f64 },

    #[error("spectrum has zero total probability")]
    EmptySpectrum,

    #[error("convergence classification needs {needed}: {detail}")]
    TooFewEntries {
        needed: &'static str,
        detail: String,
    },

    #[error("invalid correlation model: {0}")]
    InvalidModel(String),

    #[error("invalid argument {name}: {detail}")]
    InvalidArgument { name: &'static str, detail: String },
}

impl Error {
    /// Errors caused by caller input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidAperture { .. }
                | Error::GridSize { .. }
                | Error::GridMismatch { .. }
                | Error::TruncationTooLarge { .. }
                | Error::InvalidModel(_)
                | Error::InvalidArgument { .. }
                | Error::Domain { .. }
                | Error::TooFewEntries { .. }
        )
    }
}
