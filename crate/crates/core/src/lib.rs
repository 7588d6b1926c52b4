//! Random iteration of complex polynomials: escape-probability fields, Julia
//! set geometry, symbolic coding of components, and the one-dimensional
//! singular functions these fields generalize.

pub mod affine;
pub mod field;
pub mod grid;
pub mod poly;
pub mod reference;
pub mod rng;
pub mod semigroup;
pub mod symbolic;
pub mod word;

pub use grid::{FieldMeta, GridError, GridSpec, RegionMask, ScalarField};
pub use poly::{
    escape_radius, filled_julia_membership, OrbitVerdict, PolyError, Polynomial, VerdictKind,
};
pub use rng::StreamRng;
pub use semigroup::{
    build_system, certify_trap, Disk, GeneratorSystem, SystemError, TrapCertificate, TrapRegion,
};
pub use word::{Word, WordError};
