//! Numerical core for geometric evolution equations on small closed manifolds.
//!
//! The crate is `no_std` (with `alloc`) and contains no IO. It covers
//!
//! * [`atlas`]: the flat 2-torus and the unit circle with periodic charts,
//!   multi-chart atlases with a squared partition of unity, chart-wise fields
//!   and 2D metric geometry (Christoffel symbols, Ricci tensor);
//! * [`diffeo`]: truncated translations `x -> x + chi(x) mu`, their pullbacks
//!   on scalar and tensor fields, the time warp `t -> t + xi(t) lambda` and the
//!   commutator term produced when both are combined;
//! * [`ricci`]: the Ricci-DeTurck flow on the torus, the DeTurck vector field,
//!   the diffeomorphism flow generated by `-W` and the pulled-back Ricci flow;
//! * [`hypersurface`]: normal graphs over the unit circle and the surface
//!   diffusion, mean curvature and averaged mean curvature flows;
//! * [`timestepping`]: RK4, a frozen-coefficient IMEX scheme, step control and
//!   dense output;
//! * [`probe`]: residual and smoothness checks of the transformed equations.
#![no_std]
// whenever std is in the build graph (tests, dev-dependency feature
// unification) its inherent float methods shadow `num_traits::Float`
#![allow(unused_imports)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod atlas;
pub mod bump;
pub mod diffeo;
pub mod fft;
pub mod grid;
pub mod hypersurface;
pub mod probe;
pub mod ricci;
pub mod spectral;
pub mod timestepping;

mod error;

pub use error::{Error, Result};
