//! Finite-dimensional C*-correspondence diagrams and their colimits.
//!
//! The crate models finite-dimensional C*-algebras as direct sums of matrix
//! blocks, Hilbert modules and correspondences over them in a canonical
//! multimatrix form, and diagrams of correspondences indexed by finite (or
//! truncated infinite) shapes.  On top of that it provides
//!
//! - coherence validation for diagrams, transformations and modifications,
//! - generators-and-relations presentations of diagram colimits,
//! - closed-form recognition for special diagram shapes (direct sums,
//!   amalgamated free products, universal unitary matrix algebras,
//!   Cuntz–Pimsner algebras, Fell-bundle section algebras, stabilized chains),
//! - concrete evaluation of finite-dimensional colimits via a numerical
//!   Wedderburn decomposition, and
//! - verification of matrix representations of emitted presentations.
//!
//! All values are immutable after construction and all operations are pure;
//! everything may be shared freely across threads.

pub mod algebra;
pub mod colimit;
pub mod concrete_eval;
pub mod corr;
pub mod diagram;
pub mod error;
pub mod fixtures;
pub mod json;
pub mod linalg;
pub mod random;
pub mod repcheck;
pub mod report;
pub mod shapes;
pub mod transform;

pub use algebra::{AlgebraElement, MultiMatrixAlgebra, StarHom};
pub use corr::{CorrIso, Correspondence, HilbertModule};
pub use diagram::CorrFunctor;
pub use error::Error;
pub use report::ValidationReport;
pub use shapes::Shape;
pub use transform::{Modification, RepresentationData, Transformation};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Complex matrix type used throughout the crate.
pub type CMat = nalgebra::DMatrix<C64>;

/// Complex vector type used throughout the crate.
pub type CVec = nalgebra::DVector<C64>;

/// Default tolerance for all validation defects.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Default coherence truncation depth for preset infinite shapes.
pub const DEFAULT_DEPTH: usize = 3;
