//! Approximate non-uniform sparsest cut.
//!
//! The pipeline solves the semidefinite relaxation with squared triangle
//! inequalities ([`sdp`]), projects the solution vectors onto every direction
//! `x_k - x_l` and keeps the best threshold cut ([`rounding`]), then certifies
//! the result against the generalized spectrum of the cost and demand
//! Laplacians ([`spectral`]) and, for small graphs, against exhaustive
//! enumeration ([`oracle`]).

pub mod error;
pub mod generate;
pub mod graph;
pub mod instance;
pub mod oracle;
pub mod pipeline;
pub mod rounding;
pub mod sdp;
pub mod spectral;

pub use error::{Error, Result};
pub use nalgebra::DMatrix;
pub use graph::{laplacian, sparsity, sweep_cut_from_values, Cut, CutResult, PairWeights, WeightedGraphPair};
pub use pipeline::{run, RunOptions, RunReport};
pub use rounding::round;
pub use sdp::{formulate, solve, SdpProblem, SolverOptions, VectorConfiguration};
pub use spectral::SpectralReport;
