//! Discrete q-Hermite II oscillator toolkit.
//!
//! Numeric results are MPFR floats at the context's working precision
//! (requested bits plus guard bits). Identity checks have exact rational
//! counterparts wherever the quantities are rational in `q`.

pub mod arith;
pub mod coherent;
pub mod context;
pub mod error;
pub mod extremal;
pub mod format;
pub mod poly;
pub mod qcalculus;
pub mod qhermite;
pub mod qkernel;
pub mod qmeasure;
pub mod qoscillator;
pub mod verify;

pub use arith::{CFloat, CRational};
pub use context::PrecisionContext;
pub use error::{QError, QResult};
pub use poly::PolySeries;
