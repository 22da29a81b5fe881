//! Impedance-network simulator for RIS-assisted MIMO links.
//!
//! The transmitter, receiver, RIS elements, and environmental scattering
//! objects are all modeled as mutually coupled thin-wire dipoles terminated by
//! load impedances. The crate covers the full pipeline:
//!
//! - [`em`] — scene construction, induced-EMF mutual impedances between
//!   arbitrarily oriented wires, seeded scatterer-cluster placement, and a
//!   binary bundle format for externally computed impedance matrices.
//! - [`channel`] — elimination of the scatterer ports into reduced coupling
//!   blocks, end-to-end channel evaluation, and the achievable rate.
//! - [`optimizer`] — alternating optimization of the transmit covariance
//!   (water-filling) and the per-element RIS reactances (block coordinate
//!   descent with an exact closed-form single-element update).
//! - [`oracle`] — deliberately simple, slow reference implementations (dense
//!   explicit inverses, brute-force grids) that share no numerical kernels
//!   with the main path; used by the test suite and the `verify` command.
//! - [`scenario`] / [`harness`] — text scenario files, seeded Monte-Carlo
//!   experiment runs, spacing sweeps, and CSV/summary artifacts.
//!
//! Start with the runnable examples (`cargo run --example optimize_rate`) or
//! the `risim` binary (`risim run <scenario>`).

pub mod channel;
pub mod em;
pub mod harness;
pub mod linalg;
pub mod optimizer;
pub mod oracle;
pub mod scenario;
pub mod synth;

pub use channel::{ReducedNetwork, RisLoadState};
pub use em::{Dipole, ImpedanceSet, Scene, Terminations};
pub use optimizer::{OptimizerTrace, SolveOptions, Solution};
pub use scenario::Scenario;

use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Adaptive quadrature exhausted its refinement budget.
    #[error("quadrature did not converge after {evaluations} evaluations (error estimate {estimate:.3e})")]
    Quadrature { evaluations: usize, estimate: f64 },

    /// Numerical failure while filling one impedance entry.
    #[error("impedance assembly failed for {block}({i},{j}): {source}")]
    Assembly {
        block: &'static str,
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    /// A matrix or vector does not have the size required by its contract.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: String,
        got: String,
    },

    /// A domain type invariant is violated (wire geometry, load bounds, ...).
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    /// Two blocks that must be transposes of each other disagree.
    #[error("reciprocity violated between blocks ({a}, {b}) at ({i},{j}): relative error {rel:.3e}")]
    Reciprocity {
        a: String,
        b: String,
        i: usize,
        j: usize,
        rel: f64,
    },

    /// A linear system is singular or too ill-conditioned to trust.
    #[error("matrix {name} is singular or ill-conditioned (condition estimate {cond:.3e})")]
    IllConditioned { name: String, cond: f64 },

    /// A RIS element cannot be updated (a_k ~ 0 or chi_k ~ 0).
    #[error("RIS element {k} is degenerate: {why}")]
    DegenerateElement { k: usize, why: String },

    /// Covariance input is not Hermitian positive semidefinite.
    #[error("covariance matrix is not PSD (violation {violation:.3e})")]
    NotPsd { violation: f64 },

    /// Scenario text could not be parsed.
    #[error("scenario parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Impedance bundle stream is malformed.
    #[error("bundle format error at byte {offset}: {msg}")]
    Bundle { offset: u64, msg: String },

    /// Scatterer placement could not satisfy its constraints.
    #[error("placement failed: {constraint}")]
    Placement { constraint: String },

    /// Request outside the supported envelope (oracle size caps, RIS caps).
    #[error("{0}")]
    Unsupported(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
