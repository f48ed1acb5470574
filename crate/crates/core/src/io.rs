//! JSON formats: witness files and exported network correlation tables.
//!
//! A witness file is `{"n": 1, "omega": [{"c", "d", "z", "w", "value"}, ...]}`
//! with an optional `"matrix": {"re": [[...]], "im": [[...]]}`. When the matrix
//! is present, `omega` must reconstruct it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certification::{CorrelationRecord, OmegaEntry, Witness};
use crate::tensor::{ComplexMatrix, C64};

/// Largest entrywise gap tolerated between a stored matrix and its reconstruction.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] crate::Error),
    #[error("omega does not reconstruct the matrix field (max deviation {0:e})")]
    Reconstruction(f64),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixJson {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WitnessFile {
    n: usize,
    omega: Vec<OmegaEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<MatrixJson>,
}

fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    let rows = |f: fn(&C64) -> f64| {
        (0..m.rows())
            .map(|i| (0..m.cols()).map(|j| f(&m[(i, j)])).collect())
            .collect()
    };
    MatrixJson {
        re: rows(|z| z.re),
        im: rows(|z| z.im),
    }
}

fn matrix_from_json(m: &MatrixJson) -> Result<ComplexMatrix, IoError> {
    let n = m.re.len();
    if m.im.len() != n || m.re.iter().chain(&m.im).any(|r| r.len() != n) {
        return Err(crate::Error::Witness("matrix field must hold two square arrays of equal size".into()).into());
    }
    let data =
        m.re.iter()
            .zip(&m.im)
            .flat_map(|(r, i)| r.iter().zip(i).map(|(&a, &b)| C64::new(a, b)))
            .collect();
    Ok(ComplexMatrix::from_vec(n, n, data).map_err(crate::Error::from)?)
}

pub fn witness_to_json(w: &Witness, include_matrix: bool) -> String {
    let file = WitnessFile {
        n: w.n,
        omega: w.omega.clone(),
        matrix: include_matrix.then(|| matrix_to_json(&w.matrix)),
    };
    serde_json::to_string_pretty(&file).expect("plain data serializes")
}

/// Parses a witness file. Without a matrix field the matrix is rebuilt from `omega`.
pub fn witness_from_json(text: &str) -> Result<Witness, IoError> {
    let file: WitnessFile = serde_json::from_str(text).map_err(|e| IoError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let rebuilt = Witness::from_omega(file.n, file.omega)?;
    if let Some(m) = &file.matrix {
        let stored = matrix_from_json(m)?;
        if stored.rows() != rebuilt.matrix.rows() {
            return Err(crate::Error::Witness(format!(
                "matrix is {0}x{0} but n = {1} needs {2}x{2}",
                stored.rows(),
                file.n,
                rebuilt.matrix.rows()
            ))
            .into());
        }
        let err = stored.max_abs_diff(&rebuilt.matrix);
        if err > RECONSTRUCTION_TOL {
            return Err(IoError::Reconstruction(err));
        }
        return Ok(Witness {
            matrix: stored,
            ..rebuilt
        });
    }
    Ok(rebuilt)
}

pub fn load_witness(path: &Path) -> Result<Witness, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    witness_from_json(&text)
}

pub fn correlations_to_json(records: &[CorrelationRecord]) -> String {
    serde_json::to_string_pretty(records).expect("plain data serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certification::isotropic_witness;

    #[test]
    fn round_trip_is_exact() {
        let w = isotropic_witness(1).unwrap();
        for with_matrix in [false, true] {
            let back = witness_from_json(&witness_to_json(&w, with_matrix)).unwrap();
            assert_eq!(back.omega, w.omega);
            assert_eq!(back.n, 1);
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = witness_from_json("{\n  \"n\": 1,\n  \"omega\": [\n").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 4, .. }), "{err}");
        let err = witness_from_json("{\"n\": 1, \"omega\": [], \"extra\": 3}").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 1, .. }));
    }

    #[test]
    fn corrupted_coefficient_is_rejected() {
        let mut w = isotropic_witness(1).unwrap();
        w.omega[0].value += 1e-3;
        let err = witness_from_json(&witness_to_json(&w, true)).unwrap_err();
        assert!(
            matches!(err, IoError::Reconstruction(d) if (d - 1e-3).abs() < 1e-9),
            "{err}"
        );
    }

    #[test]
    fn out_of_range_labels_are_rejected() {
        let text = r#"{"n": 1, "omega": [{"c": 0, "d": 0, "z": 3, "w": 0, "value": 1.0}]}"#;
        assert!(matches!(witness_from_json(text), Err(IoError::Invalid(_))));
    }
}
