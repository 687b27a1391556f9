//! Numerical core for the space-fractional wave equation
//! `∂ₜ²u + (−Δ)ˢu = f`, `s ∈ (0, 1)`, on an interval or a square.
//!
//! The fractional operator is realized as a discrete Dirichlet-to-Neumann
//! map of a weighted elliptic problem on a truncated cylinder `Ω × (0, Y)`:
//! P1 elements in Ω tensorized with an hp space on a geometric mesh in the
//! extended variable. Time stepping (leapfrog and trapezoidal) runs on the
//! trace space only.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
#![allow(
    clippy::excessive_precision,
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::too_many_arguments,
    clippy::type_complexity
)]

extern crate alloc;

pub mod dtn;
pub mod error;
pub mod linalg;
pub mod mesh_y;
pub mod omega;
pub mod quadrature;
pub mod special;
pub mod spectral;
pub mod study;
pub mod time;

pub use error::{Error, Result};
