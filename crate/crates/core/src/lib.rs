//! Grade-aware geometric algebra toolkit over a program hypergraph IR.
//!
//! The pipeline: [`algebra`] builds Clifford algebras and their Cayley
//! tables; [`grade`] infers output grade sets per operation; [`phg`] holds
//! the program hypergraph and runs the saturation fixpoint; [`dims`] solves
//! physical-dimension constraints over the integers; [`kernel`] derives
//! sparsity profiles and emits straight-line arithmetic kernels; [`mesh`]
//! checks simplicial boundary consistency and exact incidence; [`place`]
//! checks tile co-location feasibility and assigns grid placements;
//! [`autodiff`] evaluates programs and forward-mode directional
//! derivatives; [`program`] parses the textual program format behind the
//! `phg` command-line driver.

pub mod algebra;
pub mod autodiff;
pub mod dims;
pub mod grade;
pub mod kernel;
pub mod mesh;
pub mod phg;
pub mod place;
pub mod program;
pub mod scalar;

pub use algebra::{Algebra, AlgebraError, AlgebraRef, Blade, Multivector, ProductKind, Signature};
pub use scalar::{Mode, Scalar};
