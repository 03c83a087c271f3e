//! Dense numerical laboratory for the two-dimensional magnetic Stark Hamiltonian
//! `H(B, eps) = (Dx - B y)^2 + Dy^2 + eps x + V(x, y)` on a truncated rectangle.
//!
//! Module map:
//!
//! * [`grid`]: domain, 1D stencils, Kronecker embeddings.
//! * [`potentials`]: potential families with exact derivatives and decay certificates.
//! * [`hamiltonian`]: assembly of `H0`, `H`, `Q0`, `Q` and the commutator with `d/dx`.
//! * [`spectral`]: eigendecomposition, functional calculus, projectors, weights, localization.
//! * [`traces`]: trace and nuclear norms, resolvents, trace-norm bound experiments.
//! * [`ssf`]: spectral shift traces, truncation, resolvent expansion, epsilon scaling.
//! * [`mourre`]: commutator positivity, the `eps^2` cutoff bound, absorption probes.

// `!(a < b)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// faer matrix products take operands by reference to avoid moves.
#![allow(clippy::op_ref)]

pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod mourre;
pub mod potentials;
pub mod spectral;
pub mod ssf;
pub mod traces;

pub use error::{Error, Result};
pub use faer::c64;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/discretization.md")]
    mod discretization {}
    #[doc = include_str!("../../../book/src/potentials.md")]
    mod potentials {}
    #[doc = include_str!("../../../book/src/functional-calculus.md")]
    mod functional_calculus {}
    #[doc = include_str!("../../../book/src/trace-formula.md")]
    mod trace_formula {}
    #[doc = include_str!("../../../book/src/norms.md")]
    mod norms {}
    #[doc = include_str!("../../../book/src/commutators.md")]
    mod commutators {}
    #[doc = include_str!("../../../book/src/limitations.md")]
    mod limitations {}
}
