//! Elastic enhancement factor `F(η|κ)` of an open resonance system with
//! broken time-reversal symmetry, from regular (`κ = 0`) to fully chaotic
//! (`κ = ∞`) internal dynamics.
//!
//! * [`numerics`]: scaled Bessel function and adaptive quadrature.
//! * [`formfactor`]: transient binary form factor `B₂(s|κ)` and its Laplace transforms.
//! * [`enhancement`]: `F(η|κ)` exactly, through two alternative representations,
//!   a small-κ series and a large-κ approximation.
//! * [`critical`]: critical openness `η_c(κ)`, `F_min(κ)` and its inverse.
//! * [`rmtsim`]: Monte Carlo resonance S-matrix simulator used as an oracle.
//! * [`cli`]: table-producing commands behind the `elastic-enhancement` binary.

pub mod cli;
pub mod critical;
pub mod enhancement;
pub mod error;
pub mod formfactor;
pub mod numerics;
pub mod rmtsim;

pub use error::{Error, Result};
pub use formfactor::{Chaoticity, ScaledTime};
pub use numerics::{IntegralResult, QuadratureConfig};
