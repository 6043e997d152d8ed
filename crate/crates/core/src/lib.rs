//! Spectral analysis and modal solution of linear viscoelastic wave problems
//! with exponential-sum memory kernels.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod companion;
pub mod config;
pub mod error;
pub mod estimates;
pub mod kernel;
pub mod numeric;
pub mod operator;
pub mod oracle;
pub mod series;
pub mod spectrum;
pub mod symbol;

pub use error::{Error, Result};
pub use kernel::{KernelSpec, KernelTerm, Stability, Which};
pub use operator::{ExpPolyTerm, ForcingSpec, Mode, ModeVector, OperatorSpec};
pub use symbol::{ModeSymbol, PolySymbol};
