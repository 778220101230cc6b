//! Hessenberg reduction of diagonal-plus-low-rank matrices `A = D + U V^H`
//! in `O(n^2 k)` operations.
//!
//! Real diagonals go through a band reduction followed by subdiagonal
//! elimination on a condensed generator form. Unitary diagonals are first
//! brought to block CMV shape and then reduced by structure-preserving bulge
//! chasing, producing a Givens-Vector condensed Hessenberg matrix.

pub mod band;
pub mod bench;
pub mod block;
pub mod cmv;
pub mod companion;
pub mod dense;
pub mod error;
pub mod givens;
pub mod io;
pub mod journal;
pub mod oracle;
pub mod problem;
pub mod real;
pub mod unitary;

pub use band::{BandKind, BandMatrix};
pub use block::{BlockUnitaryTransformation, TriangularCornerFlags};
pub use dense::CMat;
pub use error::{HessError, Result};
pub use givens::{givens_compute, Givens, Tolerance};
pub use journal::{Journal, JournalEntry, RotationLog};
pub use num_complex::Complex64 as C64;
pub use problem::{DPR1Problem, Kind};
