//! Closed-form robustness bounds for the qubit self-test and the noise
//! analysis of Werner-state certification with noisy auxiliary pairs.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use serde::Serialize;

use crate::error::{check_range, Error, Result};
use crate::objects::{
    bell_amplitudes, ideal_qubit_strategy, MeasurementFamily, Pauli, Setting, Strategy, CHARLIE_LABELS,
};
use crate::selftest_qubit::{sos_residuals, QubitObservables, SosReport, TRIPLE_CHSH_MAX};
use crate::tensor::{ComplexMatrix, Factor, StateVector, C64, ZERO};

/// `55 + 36√2`, the constant in front of `√ε` in the swap-isometry bound.
pub const STATE_BOUND_CONSTANT: f64 = 55.0 + 36.0 * SQRT_2;

/// Number of terms in the Pauli decomposition of the two-qubit witness that
/// each pick up the worst-case steering error.
pub const WITNESS_TERMS: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseModel {
    pub eta: f64,
    pub epsilon: f64,
    pub theta: f64,
}

impl NoiseModel {
    pub fn new(eta: f64, epsilon: f64, theta: f64) -> Result<Self> {
        check_range("eta", eta, 0.0, 1.0, "[0, 1]")?;
        check_range("epsilon", epsilon, 0.0, f64::INFINITY, "[0, inf)")?;
        check_range("theta", theta, 0.0, f64::INFINITY, "[0, inf)")?;
        Ok(NoiseModel { eta, epsilon, theta })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RobustnessCurvePoint {
    pub eta: f64,
    pub expected_i: f64,
    pub theta_crit: f64,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    check_range("epsilon", epsilon, 0.0, f64::INFINITY, "[0, inf)")
}

/// `(55 + 36√2)·√ε`
pub fn state_distance_bound(epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok(STATE_BOUND_CONSTANT * epsilon.sqrt())
}

/// Bounds on `‖{Z,X}|ψ⟩‖`, `‖{Z,Y}|ψ⟩‖`, `‖{X,Y}|ψ⟩‖` for Charlie's observables.
pub fn anticommutator_bounds(epsilon: f64) -> Result<[f64; 3]> {
    check_epsilon(epsilon)?;
    let s = epsilon.sqrt();
    Ok([
        (4.0 + 4.0 * SQRT_2) * s,
        (6.0 + 6.0 * SQRT_2) * s,
        (8.0 + 8.0 * SQRT_2) * s,
    ])
}

/// Bound `2√ε` on `‖(Z^C − Ẑ^A)|ψ⟩‖`, `‖(X^C − X̂^A)|ψ⟩‖` and `‖(Y^C + Ŷ^A)|ψ⟩‖`.
pub fn sharp_deviation_bound(epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok(2.0 * epsilon.sqrt())
}

/// Measured counterparts of [`sharp_deviation_bound`].
pub fn sharp_deviations(s: &Strategy) -> Result<[f64; 3]> {
    let obs = QubitObservables::from_strategy(s)?;
    let [za, xa, ya] = obs.alice_sharp()?;
    let [zc, xc, yc] = &obs.charlie;
    let dist = |c: &ComplexMatrix, a: &ComplexMatrix, sign: f64| -> Result<f64> {
        let cv = s.apply_charlie(c, &s.state)?;
        let av = s.apply_alice(a, &s.state)?;
        let mut diff = cv.clone();
        diff.add_scaled(&av, C64::new(sign, 0.0));
        Ok(diff.norm())
    };
    Ok([dist(zc, &za, -1.0)?, dist(xc, &xa, -1.0)?, dist(yc, &ya, 1.0)?])
}

/// `12·(u² + u)` with `u = √2θ + θ²`.
pub fn worst_case_i_penalty(theta: f64) -> f64 {
    let u = SQRT_2 * theta + theta * theta;
    WITNESS_TERMS * (u * u + u)
}

/// `(1/16)·((1−3p)η² + 2η(1−η) + (1−η)²/4)`: the certification value expected for a
/// Werner target of parameter `p` when each auxiliary pair has visibility `η`.
pub fn expected_i_werner(eta: f64, p: f64) -> Result<f64> {
    check_range("eta", eta, 0.0, 1.0, "[0, 1]")?;
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    let q = 1.0 - eta;
    Ok(((1.0 - 3.0 * p) * eta * eta + 2.0 * eta * q + q * q / 4.0) / 16.0)
}

/// The visibility above which `expected_i_werner` turns negative, or `None`
/// when it stays non-negative on `[0, 1]`.
pub fn visibility_threshold(p: f64) -> Result<Option<f64>> {
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    if expected_i_werner(1.0, p)? >= 0.0 {
        return Ok(None);
    }
    // 16·I = aη² + bη + c
    let a = -0.75 - 3.0 * p;
    let (b, c) = (1.5, 0.25);
    let disc = b * b - 4.0 * a * c;
    Ok(Some((-b - disc.sqrt()) / (2.0 * a)))
}

/// Solves `u² + u = c` for the positive root without cancellation.
fn positive_root_u(c: f64) -> f64 {
    2.0 * c / (1.0 + (1.0 + 4.0 * c).sqrt())
}

/// Solves `θ² + √2θ = u` for the positive root without cancellation.
fn positive_root_theta(u: f64) -> f64 {
    u / (FRAC_1_SQRT_2 + (0.5 + u).sqrt())
}

/// Largest θ for which the noisy certification value still stays negative
/// after the worst-case penalty; 0 when nothing is detected.
pub fn critical_theta(eta: f64, p: f64) -> Result<f64> {
    let e = expected_i_werner(eta, p)?;
    if e >= 0.0 {
        return Ok(0.0);
    }
    Ok(positive_root_theta(positive_root_u(-e / WITNESS_TERMS)))
}

/// Same root as [`critical_theta`], found by bisection on the penalty.
pub fn critical_theta_bisection(eta: f64, p: f64, tol: f64) -> Result<f64> {
    let e = expected_i_werner(eta, p)?;
    if e >= 0.0 {
        return Ok(0.0);
    }
    let target = -e;
    let (mut lo, mut hi) = (0.0, 1.0);
    while worst_case_i_penalty(hi) < target {
        hi *= 2.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if worst_case_i_penalty(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `steps` evenly spaced points from `min` to `max`, both included.
pub fn eta_grid(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    check_range("eta_min", min, 0.0, 1.0, "[0, 1]")?;
    check_range("eta_max", max, 0.0, 1.0, "[0, 1]")?;
    if steps == 0 || min > max || (steps == 1 && min != max) {
        return Err(Error::Shape(format!("cannot lay {steps} points on [{min}, {max}]")));
    }
    if steps == 1 {
        return Ok(vec![min]);
    }
    let h = (max - min) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|k| if k + 1 == steps { max } else { min + h * k as f64 })
        .collect())
}

pub fn robustness_curve(p: f64, grid: &[f64]) -> Result<Vec<RobustnessCurvePoint>> {
    grid.iter()
        .map(|&eta| {
            Ok(RobustnessCurvePoint {
                eta,
                expected_i: expected_i_werner(eta, p)?,
                theta_crit: critical_theta(eta, p)?,
            })
        })
        .collect()
}

/// `%.{sig}g`-style formatting: scientific outside `[1e-4, 10^sig)`, trailing zeros trimmed.
pub fn format_significant(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= sig as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

pub const CURVE_CSV_HEADER: &str = "eta,expected_I,theta_crit";

pub fn curve_csv(points: &[RobustnessCurvePoint]) -> String {
    let mut out = String::from(CURVE_CSV_HEADER);
    out.push('\n');
    for pt in points {
        out.push_str(&format!(
            "{},{},{}\n",
            format_significant(pt.eta, 12),
            format_significant(pt.expected_i, 12),
            format_significant(pt.theta_crit, 12)
        ));
    }
    out
}

/// Visibility of the Werner state whose triple-CHSH value is `6√2 − ε`.
pub fn visibility_for_epsilon(epsilon: f64) -> Result<f64> {
    check_range("epsilon", epsilon, 0.0, TRIPLE_CHSH_MAX, "[0, 6*sqrt(2)]")?;
    Ok(1.0 - epsilon / TRIPLE_CHSH_MAX)
}

/// Ideal measurements on a purified Werner state of Bell value `6√2 − ε`.
///
/// The purifying factor `P` (dimension 4) sits on Alice's side, so the state
/// is `Σ_k √λ_k |B_k⟩_{CA} |k⟩_P` over the Bell basis with Alice's effects
/// extended by the identity on `P`.
pub fn noisy_qubit_selftest(epsilon: f64) -> Result<(Strategy, SosReport)> {
    let v = visibility_for_epsilon(epsilon)?;
    let ideal = ideal_qubit_strategy();
    let mut amps = vec![ZERO; 16];
    for k in 0..4 {
        let lambda = if k == 0 { v + (1.0 - v) / 4.0 } else { (1.0 - v) / 4.0 };
        let weight = lambda.sqrt();
        for (ca, b) in bell_amplitudes(k).iter().enumerate() {
            amps[ca * 4 + k] = C64::new(weight * b, 0.0);
        }
    }
    let state = StateVector::new(amps, vec![Factor::qubit("C"), Factor::qubit("A"), Factor::new("P", 4)])?;
    let s = Strategy::new(state, 1, ideal.charlie.clone(), ideal.alice.extend_identity(4), 1)?;
    let report = sos_residuals(&s)?;
    Ok((s, report))
}

/// Ideal strategy with Charlie's σx replaced by `cos δ σx + sin δ σz`.
pub fn misaligned_qubit_strategy(delta: f64) -> Result<Strategy> {
    let ideal = ideal_qubit_strategy();
    let tilted = &Pauli::X.matrix().scale_real(delta.cos()) + &Pauli::Z.matrix().scale_real(delta.sin());
    let obs = [Pauli::Z.matrix(), tilted, Pauli::Y.matrix()];
    let charlie = MeasurementFamily::new(
        obs.iter()
            .zip(CHARLIE_LABELS)
            .map(|(m, l)| Setting::dichotomic(l, m))
            .collect(),
    )?;
    Strategy::new(ideal.state.clone(), 1, charlie, ideal.alice.clone(), 1)
}
