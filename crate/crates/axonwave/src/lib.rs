//! Finite-element solver for axisymmetric time-harmonic wave propagation in
//! myelinated axons.
//!
//! The computational domain is a rectangle in the `(r, z)` half-plane holding
//! an axon core, an optional myelin sheath, and the surrounding fluid. The
//! unbounded radial direction is truncated either by a perfectly matched
//! layer (complex coordinate stretching of `r`) or by a truncated
//! Dirichlet-to-Neumann operator on the coupling circle `r = R`. Continuous
//! piecewise-linear elements discretize the `1/r`-weighted sesquilinear forms
//! of the TM (`E_theta`) and TE (`H_theta`) modes.

pub mod assembly;
pub mod config;
pub mod linsolve;
pub mod mesh;
pub mod modespec;
pub mod postproc;
pub mod specialfn;
pub mod workflows;

pub(crate) mod quad;

use std::io;

pub use num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("resonance: k = {k} coincides with m*pi/Z for m = {m}")]
    Resonance { k: f64, m: usize },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("solution contains non-finite entries")]
    NonFinite,
    #[error("no chi0 <= {max:.3e} meets target {target:.3e} with the admissibility floor")]
    Infeasible { target: f64, max: f64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
