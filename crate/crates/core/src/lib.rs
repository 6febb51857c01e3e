//! Fourier coefficients of the U(3) Vafa–Witten partition function on P²,
//! computed exactly from q-series and independently from a Rademacher-type
//! expansion, together with numerical checks of the modular identities the
//! expansion is built on.
//!
//! | module | contents |
//! |---|---|
//! | [`qseries`] | exact rational q-series, Hurwitz class numbers, the coefficient oracle |
//! | [`multipliers`] | ψ₂, ψ₃, the η multiplier, χ_M, Kloosterman sums |
//! | [`special`] | I_{5/2}, the hyperbolic kernels g_c, f_c and the 2D kernel |
//! | [`quadrature`] | Gauss–Legendre, elliptic-region and truncated-plane rules |
//! | [`eichler`] | theta integrals in direct and Mordell form, completions |
//! | [`rademacher`] | the three Bessel series and the asymptotic formula |
//! | [`tables`] | reference tables for μ = 0, 1 at n = 5 |
//! | [`verify`] | report-producing verification suites |

pub mod eichler;
pub mod error;
pub mod multipliers;
pub mod qseries;
pub mod quadrature;
pub mod rademacher;
pub mod special;
pub mod tables;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64 as ComplexValue;
