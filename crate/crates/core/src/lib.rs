//! Fractional-conductivity random walks on finite connected graphs.
//!
//! The crate covers both directions of the problem:
//!
//! * forward: graph + conductivity → interaction matrix `C` → transition
//!   matrix `P` → observation data `Λ_K` (exact, or estimated from a
//!   simulated walk that is only visible on the observable vertices);
//! * inverse: `Λ_3` → transition matrix up to the hidden-block gauge
//!   ([`recovery`]), transition matrix → interaction matrix up to scale
//!   ([`gauge`]), and interaction kernel → distances, edge set and
//!   conductivity up to a positive factor ([`reconstruct`]).
//!
//! Vertices are `0..n`; the observable vertices always occupy `0..N` and the
//! hidden ones `N..n`, so every matrix splits into the usual 2×2 block form.
//!
//! With the default `parallel` feature the data-parallel kernels (BFS
//! sweeps, pair-ratio scans, transitivity checks, stream counting, batch
//! recovery) run on rayon. Without it, or with [`Execution::Sequential`],
//! the same code runs on the calling thread and produces identical results.

pub mod error;
pub mod gauge;
pub mod graph;
pub mod io;
pub mod matrix;
pub mod par;
pub mod reconstruct;
pub mod recovery;
pub mod simulate;
pub mod walk;

pub use error::{Error, Result};
pub use graph::{AdmissibilityReport, DistanceMatrix, Graph};
pub use par::Execution;
pub use recovery::CanonicalRepresentative;
pub use walk::{Conductivity, InteractionMatrix, ObservationData, TransitionMatrix};

/// Default relative rank cutoff (against the largest singular value).
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Default relative tolerance for integer and perfect-square detection.
pub const DEFAULT_INT_TOL: f64 = 1e-6;
