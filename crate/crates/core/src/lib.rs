//! Minimal travelling-wave speeds for scalar monostable reaction–diffusion
//! equations `u_t = u_xx + f(u, β)` whose nonlinearity has the solvable form
//! `f(u, β) = h(u)(A(β) − B(β)h′(u))`.
//!
//! Such families carry an explicit front `−U′ = √B·h(U)` with speed
//! `c_nl = A/√B`, next to the linear speed `c_l = 2√(A − B)`. The crate
//! computes both, the true minimal speed by shooting, variational upper
//! bounds, the weighted-energy certificate for pushed fronts, direct PDE
//! simulations, and β-sweeps locating where selection switches from pulled
//! to pushed.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod expr;
pub mod family;
pub mod interp;
pub mod lmn;
pub mod ode;
pub mod optim;
pub mod pde;
pub mod profile;
pub mod quadrature;
pub mod shoot;
pub mod speeds;
pub mod sweep;
pub mod variational;

pub use error::{Error, Result};
pub use expr::ExprTree;
pub use family::SolvableFamily;
