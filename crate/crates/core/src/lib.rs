//! Numerical laboratory for middle-dimensional shadows of symplectic balls.
//!
//! The ambient space is `R^{2n}` with coordinates ordered `(p_1, q_1, ..., p_n, q_n)`,
//! the complex structure `J(p, q) = (-q, p)` acting blockwise on conjugate pairs, and
//! the symplectic form `Omega[u, v] = (Ju) . v`. A *shadow* is the orthogonal
//! projection of a set onto a complex (J-invariant) subspace `V` of real dimension
//! `2k`. The crate computes shadows of symplectically mapped unit balls and verifies,
//! at desk scale, the linear non-squeezing inequality with its equality criterion, the
//! Wirtinger and area-energy inequalities, Hopf fiber integration over the
//! Grassmannian of complex lines, and the second-order expansion
//! `vol(P psi_t(B)) = omega_2k + C t^2 + O(t^3)` of the shadow volume under
//! Hamiltonian flows.

pub mod counterexamples;
pub mod error;
pub mod expansion;
pub mod grassmann;
pub mod hamflow;
pub mod loops;
pub mod poly;
pub mod selftest;
pub mod shadowvol;
pub mod symplinalg;

pub use error::{Error, Result};
