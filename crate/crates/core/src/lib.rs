//! Spectral kernels for the additive-noise stochastic nonlinear Schrödinger
//! equation
//!
//! ```text
//! i ∂_t u = Δu − |u|^{p−1} u + φ ξ,   u(0) = u₀,   x ∈ ℝ^d,
//! ```
//!
//! posed on a periodic box that stands in for ℝ^d. The crate is `no_std` and
//! only needs `alloc`; file formats, thread pools and the command line live in
//! `snls-lab`.
//!
//! Conventions used everywhere in this crate:
//!
//! * Fourier variable ξ with phase `e^{2πi x·ξ}`; the lattice is ξ_k = k/L.
//! * `S(t) = e^{−itΔ}` acts on the frequency side as `e^{+it|2πξ|²}`, so that
//!   `u(t) = S(t)u₀` solves `i ∂_t u = Δu`.
//! * Frequency-side values are coefficients on the orthonormal basis
//!   `L^{−d/2} e^{2πi ξ_k·x}`, which makes the L² norm identical in both
//!   representations.
//! * Complex Brownian motions have independent real and imaginary parts, each
//!   of variance t/2, so `E|β(t)|² = t`.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;


pub mod error;
pub mod estimators;
pub mod fft;
pub mod noise;
pub mod propagator;
pub mod randomization;
pub mod replica;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
