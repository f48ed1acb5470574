use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("strategy shape: {0}")]
    Shape(String),
    #[error("invalid measurement: {0}")]
    Measurement(String),
    #[error("circuit needs {required} qubits, cap is {cap}")]
    CapExceeded { required: usize, cap: usize },
    #[error("witness: {0}")]
    Witness(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64, range: &'static str) -> Result<()> {
    if value.is_nan() || value < lo || value > hi {
        return Err(Error::OutOfRange { name, value, range });
    }
    Ok(())
}
