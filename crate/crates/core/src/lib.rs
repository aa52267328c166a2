//! Node-specific polynomial spectral filters for graphs.
//!
//! The crate covers the whole pipeline: graph operators and homophily
//! diagnostics ([`graph`]), Laplacian eigenanalysis ([`spectra`]),
//! polynomial bases and filters ([`poly`]), a small reverse-mode autodiff
//! engine ([`tensor`]), the diverse filtering model ([`model`]), training
//! ([`trainer`]), post-hoc analysis ([`analysis`]) and file formats ([`io`]).
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); basis
//! evaluation also runs over exact rationals through [`Field`]. The aliases
//! below fix the scalar to `f64`, which is what the trainer and CLI use.

pub mod analysis;
pub mod error;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod model;
pub mod poly;
pub mod rng;
pub mod scalar;
pub mod spectra;
pub mod synthetic;
pub mod tensor;
pub mod trainer;

pub use error::{Error, ErrorKind, Result};
pub use model::{Backbone, DsfConfig, Mode, PositionalInit, Variant};
pub use poly::{BasisKind, CoefficientSet};
pub use scalar::{Field, Scalar};
pub use trainer::SplitMode;

pub type Graph = graph::Graph<f64>;
pub type Dense = linalg::Dense<f64>;
pub type SparseOperator = graph::SparseOperator<f64>;
pub type GraphOperators = graph::GraphOperators<f64>;
pub type SpectralDecomposition = spectra::SpectralDecomposition<f64>;
pub type Tape<'g> = tensor::Tape<'g, f64>;
pub type DsfParams = model::DsfParams<f64>;
pub type DsfModel = model::DsfModel<f64>;
pub type Dataset = io::Dataset<f64>;

pub type Graph32 = graph::Graph<f32>;
pub type Dense32 = linalg::Dense<f32>;

/// Exact scalar for basis evaluation and rescaling checks.
pub type ExactScalar = num_rational::BigRational;
