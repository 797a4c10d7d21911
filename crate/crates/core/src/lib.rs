// Validation uses `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abelian;
pub mod app;
pub mod error;
pub mod finder;
pub mod io;
pub mod monodromy;
pub mod numeric;
pub mod oper;
pub mod oracle;
pub mod section;
pub mod transport;

pub use error::{Error, Result};
