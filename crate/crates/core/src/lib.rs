//! Operator growth and Krylov complexity for the dissipative SYK model.
//!
//! Three regimes are covered and can be cross-checked against each other:
//!
//! * exact finite-N operator algebra on Majorana strings ([`majorana`],
//!   [`lindbladian`]) driven through Arnoldi/Lanczos ([`krylov`]);
//! * the large-N melon-diagram calculus on rooted trees ([`diagrams`]);
//! * closed-form large-q results: moments and continued fractions
//!   ([`moments`]), the exactly solvable Meixner chain ([`analytic`]) and
//!   numerical evolution of arbitrary Krylov chains ([`dynamics`]).

pub mod analytic;
pub mod diagrams;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod krylov;
pub mod lindbladian;
pub mod majorana;
pub mod moments;
pub mod scalar;
pub mod series;

pub use error::{Error, ErrorKind, Result};
pub use krylov::{HessenbergMatrix, Superoperator, TridiagonalCoeffs};
pub use majorana::{MajoranaString, OperatorVector, SykHamiltonian};

pub use num_complex::Complex64;
