//! Numerical laboratory for the discrete Klein-Gordon equation on `Z^d`.
//!
//! The linear equation `u_tt - Δu + u = 0` on the cubic lattice has the
//! dispersion relation `ω(ξ) = sqrt(1 + Σ_j 2(1 - cos ξ_j))` on the torus
//! `[0,2π)^d`. Everything in this crate revolves around the fundamental
//! solution kernels
//!
//! ```text
//! I(t,x) = ∫_{[0,2π]^d} e^{i(x·ξ - t ω(ξ))} a(ξ) dξ,   a = 1 or 1/ω,
//! ```
//!
//! whose sup-norm decays like `t^{-3/4}` (d=2), `t^{-7/6}` (d=3) and
//! `t^{-3/2} log t` (d=4). The crate provides:
//!
//! - [`dispersion`]: ω, its gradient (group velocity), the phase Hessian and
//!   the auxiliary product phase used for singularity classification;
//! - [`critical`]: critical-point solving `∇ω(ξ) = v`, the full singularity
//!   decision tree (A_k, D_4^-, T_{4,4,4}), caustic scans, and brute-force
//!   nonexistence scans for two polynomial systems;
//! - [`roots`]: the three-equation polynomial system whose real roots decide
//!   the most degenerate three-dimensional case, solved by multistart Newton;
//! - [`kernel`]: spectrally accurate kernel evaluation (equispaced quadrature
//!   as a DFT), a Gauss-Legendre oracle, and a time-domain ODE oracle;
//! - [`decay`]: sup-norm and fixed-velocity decay measurement plus log-log
//!   exponent fits;
//! - [`pde`]: exact spectral linear flow and Strang-split nonlinear evolution
//!   on periodic boxes with energy and ℓ^p diagnostics;
//! - [`strichartz`]: admissible-pair arithmetic, mixed space-time norms, and
//!   empirical boundedness studies for the semigroup and the resolvent.
//!
//! All heavy loops are data-parallel through rayon when the `parallel`
//! feature (on by default) is enabled; results are identical, bit for bit,
//! with the feature disabled or with any thread count.

pub mod critical;
pub mod decay;
pub mod dispersion;
pub mod fftgrid;
pub mod gauss;
pub mod kernel;
pub mod linalg;
pub mod par;
pub mod pde;
pub mod ratio;
pub mod roots;
pub mod strichartz;

pub use dispersion::{Frequency, TrigData};
pub use kernel::{Amplitude, KernelGrid};
pub use ratio::Ratio;

/// Formats a float with 12 significant digits, the fixed on-disk format used
/// by every CSV and JSON writer so that output files diff cleanly.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{:.11e}", x)
}
