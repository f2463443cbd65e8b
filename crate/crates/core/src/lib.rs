//! Crystal structures, space-group symmetry, text codecs, example
//! retrieval, prompt construction and evaluation metrics for LLM-based
//! crystal generation.
//!
//! Geometry is generic over the scalar type ([`num::Real`], `f32` or
//! `f64`); symmetry-operation translations are exact rationals.

pub mod crystal;
pub mod elements;
pub mod error;
pub mod fingerprint;
pub mod instruct;
pub mod lattice;
pub mod metrics;
pub mod num;
pub mod properties;
pub mod rng;
pub mod select;
pub mod symmetry;
pub mod text;

pub use crystal::{Composition, Crystal, Site};
pub use elements::Element;
pub use error::{Error, Result};
pub use lattice::{LatticeMatrix, LatticeParameters};
pub use properties::{GenerationCondition, PropertyName, PropertyValues};
pub use symmetry::{load_space_group, SpaceGroup, SymOp};
pub use text::CrystalFormat;

pub type Crystal32 = Crystal<f32>;
pub type Crystal64 = Crystal<f64>;
pub type Site32 = Site<f32>;
pub type Site64 = Site<f64>;
pub type Lattice32 = LatticeMatrix<f32>;
pub type Lattice64 = LatticeMatrix<f64>;
pub type LatticeParameters32 = LatticeParameters<f32>;
pub type LatticeParameters64 = LatticeParameters<f64>;
