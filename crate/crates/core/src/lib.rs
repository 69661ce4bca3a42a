//! Quantum Fisher information of parametrized quantum combs.

pub mod channel;
pub mod collision;
pub mod comb;
pub mod error;
pub mod io;
pub mod qfi;
pub mod tensor;
pub mod variational;

pub use error::{Error, Result};
