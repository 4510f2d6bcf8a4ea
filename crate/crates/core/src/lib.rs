//! Numerical machinery for quasi-periodic SL(2,R) cocycles: frequency
//! arithmetic, Gevrey data, finite-scale Lyapunov exponents, large-deviation
//! measurements and the multi-scale schedule built on top of them.

pub mod angle;
pub mod bigutil;
pub mod cocycle;
pub mod error;
pub mod freq;
pub mod gevrey;
pub mod interval;
pub mod ldt;
pub mod mat2;
pub mod reduce;
pub mod scheme;

pub use error::{Error, Result};
