//! Browser bindings. Every export returns a string (CSV or JSON) so the page
//! needs no glue beyond `JSON.parse`.

use pauli_selftest::certification::{
    certification_value, isotropic_witness, noisy_network, separable_minimum, SearchBudget,
};
use pauli_selftest::objects::isotropic_state;
use pauli_selftest::robustness::{
    critical_theta, curve_csv, eta_grid, expected_i_werner, noisy_qubit_selftest, robustness_curve,
    state_distance_bound, visibility_threshold,
};
use pauli_selftest::selftest_qubit::swap_isometry;
use pauli_selftest::swap::SwapOptions;
use serde_json::json;
use wasm_bindgen::prelude::*;

// Kept small so a slider drag stays interactive.
const DEMO_SAMPLES: usize = 2000;

fn curve(p: f64, eta_min: f64, eta_max: f64, steps: usize) -> Result<String, String> {
    let grid = eta_grid(eta_min, eta_max, steps).map_err(|e| e.to_string())?;
    let points = robustness_curve(p, &grid).map_err(|e| e.to_string())?;
    Ok(curve_csv(&points))
}

fn certification(p: f64, eta: f64) -> Result<String, String> {
    let run = || -> pauli_selftest::Result<String> {
        let witness = isotropic_witness(1)?;
        let ns = noisy_network(isotropic_state(2, p)?, 1, eta)?;
        let value = certification_value(&ns, &witness)?;
        let budget = SearchBudget {
            samples: DEMO_SAMPLES,
            ..SearchBudget::default()
        };
        let sep = separable_minimum(&witness, &ns, &budget)?;
        Ok(json!({
            "value": value,
            "closed_form": expected_i_werner(eta, p)?,
            "critical_theta": critical_theta(eta, p)?,
            "eta_threshold": visibility_threshold(p)?,
            "separable_minimum": sep.min_value,
            "certified": value < 0.0,
        })
        .to_string())
    };
    run().map_err(|e| e.to_string())
}

fn selftest(epsilon: f64) -> Result<String, String> {
    let run = || -> pauli_selftest::Result<String> {
        let (s, sos) = noisy_qubit_selftest(epsilon)?;
        let swap = swap_isometry(&s, &SwapOptions::default())?;
        Ok(json!({
            "bell_value": sos.bell_value,
            "sum_of_squares": sos.sum_of_squares(),
            "fidelity": swap.extracted_fidelity,
            "distance": (1.0 - swap.extracted_fidelity).max(0.0).sqrt(),
            "distance_bound": state_distance_bound(epsilon)?,
        })
        .to_string())
    };
    run().map_err(|e| e.to_string())
}

/// `eta,expected_I,theta_crit` rows for a Werner target of weight `p`.
#[wasm_bindgen]
pub fn robustness_curve_csv(p: f64, eta_min: f64, eta_max: f64, steps: usize) -> Result<String, JsError> {
    curve(p, eta_min, eta_max, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn werner_certification(p: f64, eta: f64) -> Result<String, JsError> {
    certification(p, eta).map_err(|e| JsError::new(&e))
}

/// Purified Werner strategy at Bell deficit `epsilon`, pushed through the swap isometry.
#[wasm_bindgen]
pub fn noisy_selftest(epsilon: f64) -> Result<String, JsError> {
    selftest(epsilon).map_err(|e| JsError::new(&e))
}
