//! Numerical workbench for self-testing Pauli observables and for
//! device-independent entanglement certification built on those self-tests.

pub mod certification;
pub mod error;
pub mod io;
pub mod objects;
pub mod random;
pub mod robustness;
pub mod selftest_parallel;
pub mod selftest_qubit;
pub mod swap;
pub mod tensor;

pub use error::{Error, Result};
