//! Scalar special functions: `J_0`, integer-order `K_ν` (plain and
//! exponentially scaled), `Γ` / `ln Γ`, and the small-argument `K_ν`
//! expansions used by the high-SNR outage asymptotes.

mod bessel;
mod gamma;

pub use bessel::{bessel_j0, bessel_k, bessel_k_orders, bessel_k_small, ScaledBessel};
pub use gamma::{digamma_int, factorial, gamma, ln_factorial, ln_gamma, ln_gamma_complex, EULER_GAMMA};
