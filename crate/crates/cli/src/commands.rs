use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use pauli_selftest::certification::{
    certification_value, isotropic_witness, network_correlations, noisy_network, separable_minimum, SearchBudget,
    Witness, MAX_NETWORK_SITES,
};
use pauli_selftest::io::{correlations_to_json, load_witness, witness_to_json, IoError};
use pauli_selftest::objects::{
    ideal_qubit_strategy, isotropic_state, parallel_strategy_with_frames, transpose_strategy, MAX_SITES,
};
use pauli_selftest::robustness::{
    anticommutator_bounds, critical_theta, critical_theta_bisection, curve_csv, eta_grid, expected_i_werner,
    noisy_qubit_selftest, robustness_curve, sharp_deviation_bound, sharp_deviations, state_distance_bound,
    visibility_threshold, worst_case_i_penalty,
};
use pauli_selftest::selftest_parallel::{
    bsm_correlations, parallel_bell_values, parallel_swap_isometry, reconstruction_residuals,
};
use pauli_selftest::selftest_qubit::{
    anticommutator_norms, sos_residuals, swap_isometry, verify_operator_actions, SOS_PREFACTOR, TRIPLE_CHSH_MAX,
};
use pauli_selftest::swap::SwapOptions;
use pauli_selftest::Error;
use serde_json::{json, Value};

use crate::report::RunReport;
use crate::Output;

/// Numerical slack on exact identities.
const TOL: f64 = 1e-9;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Cap(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Cap(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Cap(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::CapExceeded { .. } => Failure::Cap(format!("{e} (raise it with PAULI_SELFTEST_MAX_QUBITS)")),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Invalid(inner) => inner.into(),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn finite(name: &str, x: f64) -> Result<(), Failure> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{name} must be finite, got {x}")))
    }
}

fn config(output: &Output, extra: &[(&'static str, Value)]) -> BTreeMap<&'static str, Value> {
    let mut c = BTreeMap::from([("seed", json!(output.seed))]);
    c.extend(extra.iter().cloned());
    c
}

pub fn selftest(epsilon: f64, output: &Output) -> Result<RunReport, Failure> {
    finite("epsilon", epsilon)?;
    let (s, sos) = if epsilon == 0.0 {
        let s = ideal_qubit_strategy();
        let sos = sos_residuals(&s)?;
        (s, sos)
    } else {
        noisy_qubit_selftest(epsilon)?
    };
    let opts = SwapOptions::from_env();
    let swap = swap_isometry(&s, &opts)?;
    let actions = verify_operator_actions(&s, &opts)?;
    let anti = anticommutator_norms(&s)?;
    let anti_bounds = anticommutator_bounds(sos.epsilon.max(0.0))?;
    let sharp = sharp_deviations(&s)?;
    let sharp_bound = sharp_deviation_bound(sos.epsilon.max(0.0))?;
    let distance = (1.0 - swap.extracted_fidelity).max(0.0).sqrt();
    let distance_bound = state_distance_bound(epsilon)?;

    let mut r = RunReport::new("selftest", config(output, &[("epsilon", json!(epsilon))]));
    r.metric("bell_value", sos.bell_value);
    r.metric("bell_deficit", sos.epsilon);
    r.metric("sos_residuals", &sos.residuals);
    r.metric("sos_sum_of_squares", sos.sum_of_squares());
    r.metric("anticommutator_norms", anti);
    r.metric("anticommutator_bounds", anti_bounds);
    r.metric("sharp_deviations", sharp);
    r.metric("sharp_deviation_bound", sharp_bound);
    r.metric("extracted_fidelity", swap.extracted_fidelity);
    r.metric("isometry_distance", distance);
    r.metric("isometry_distance_bound", distance_bound);
    r.metric("junk_weights", swap.junk.weights());
    r.metric("off_diagonal_residual", swap.off_diagonal_residual);
    r.metric(
        "action_residuals",
        json!({"identity": actions.identity, "z": actions.z, "x": actions.x, "y": actions.y}),
    );
    r.metric("warnings", &swap.warnings);

    let sos_gap = (sos.sum_of_squares() - SOS_PREFACTOR * sos.epsilon).abs();
    r.verdict(
        "sos_identity",
        "sum of squared SOS residuals equals sqrt(2) times the Bell deficit",
        sos_gap <= TOL,
        format!("gap {sos_gap:.3e}"),
    );
    let anti_ok = anti.iter().zip(anti_bounds).all(|(a, b)| *a <= b + TOL);
    r.verdict(
        "anticommutator_bounds",
        "Charlie's anticommutators on the state stay within their sqrt(epsilon) bounds",
        anti_ok,
        format!("norms {anti:?}"),
    );
    let sharp_ok = sharp.iter().all(|d| *d <= sharp_bound + TOL);
    r.verdict(
        "sharp_deviation",
        "Charlie's observables match Alice's regularized combinations within 2 sqrt(epsilon)",
        sharp_ok,
        format!("deviations {sharp:?}, bound {sharp_bound:.6e}"),
    );
    r.verdict(
        "isometry_distance",
        "state after the isometry is within the robustness bound of junk times the maximally entangled pair",
        distance <= distance_bound + TOL,
        format!("{distance:.6e} vs {distance_bound:.6e}"),
    );
    if epsilon == 0.0 {
        r.verdict(
            "exact_extraction",
            "ideal strategy extracts the maximally entangled pair with fidelity 1",
            (swap.extracted_fidelity - 1.0).abs() <= TOL && swap.off_diagonal_residual <= TOL,
            format!("fidelity {:.15}", swap.extracted_fidelity),
        );
        r.verdict(
            "operator_actions",
            "isometry maps each Charlie observable to the Pauli on the extracted qubit",
            actions.max_residual() <= TOL,
            format!("max residual {:.3e}", actions.max_residual()),
        );
    }
    Ok(r)
}

pub fn parallel_selftest(
    n: usize,
    flip_sites: &[usize],
    transpose: bool,
    output: &Output,
) -> Result<RunReport, Failure> {
    if n == 0 || n > MAX_SITES {
        return Err(Failure::Usage(format!("n = {n} is outside 1..={MAX_SITES}")));
    }
    let mut frames = vec![false; n];
    for &site in flip_sites {
        if site == 0 || site > n {
            return Err(Failure::Usage(format!("flip site {site} is outside 1..={n}")));
        }
        frames[site - 1] = true;
    }
    let mut s = parallel_strategy_with_frames(n, &frames)?;
    if transpose {
        s = transpose_strategy(&s)?;
    }
    let opts = SwapOptions::from_env();
    let values = parallel_bell_values(&s, n)?;
    let swap = parallel_swap_isometry(&s, n, 0, &opts)?;

    let mut r = RunReport::new(
        "parallel-selftest",
        config(
            output,
            &[
                ("n", json!(n)),
                ("flip_sites", json!(flip_sites)),
                ("transpose", json!(transpose)),
            ],
        ),
    );
    r.metric("bell_values", &values);
    r.metric("site_fidelities", &swap.site_fidelities);
    r.metric("off_diagonal_residual", swap.off_diagonal_residual);
    let labels: Vec<String> = (0..swap.junk.components.len()).map(|q| swap.junk.label(q)).collect();
    r.metric("junk_labels", labels);
    r.metric("junk_weights", swap.junk.weights());
    r.metric("weight_outside_uniform", swap.junk.weight_outside_uniform());
    r.metric("warnings", &swap.warnings);

    let worst_value = values.iter().map(|v| (TRIPLE_CHSH_MAX - v).abs()).fold(0.0, f64::max);
    r.verdict(
        "site_bell_values",
        "every site attains the maximal triple-CHSH value",
        worst_value <= TOL,
        format!("max deficit {worst_value:.3e}"),
    );
    let worst_fid = swap.site_fidelities.iter().map(|f| (1.0 - f).abs()).fold(0.0, f64::max);
    r.verdict(
        "site_extraction",
        "each site extracts a maximally entangled pair",
        worst_fid <= TOL && swap.off_diagonal_residual <= TOL,
        format!(
            "max fidelity gap {worst_fid:.3e}, off-diagonal {:.3e}",
            swap.off_diagonal_residual
        ),
    );
    if n >= 2 {
        let bsm = bsm_correlations(&s, n, 0)?;
        let (rec, prod) = reconstruction_residuals(&s, n, 0)?;
        r.metric("bsm_max_deviation", bsm.max_deviation);
        r.metric("bsm_reconstruction_residuals", [rec, prod]);
        r.verdict(
            "bsm_table",
            "Bell-measurement correlators match the ideal table",
            bsm.max_deviation <= TOL,
            format!("max deviation {:.6}", bsm.max_deviation),
        );
        r.verdict(
            "bsm_reconstruction",
            "first Bell-measurement effect is reconstructed from pair correlators",
            rec <= TOL && prod <= TOL,
            format!("residuals {rec:.3e}, {prod:.3e}"),
        );
        // Same preconditions as `verify_alignment`, reusing what is already computed.
        let residual = swap.junk.weight_outside_uniform();
        let (aligned, detail) = if worst_value > TOL {
            (false, format!("not applicable: Bell deficit {worst_value:.3e}"))
        } else if bsm.max_deviation > TOL {
            (
                false,
                format!("not applicable: table deviates by {:.6}", bsm.max_deviation),
            )
        } else {
            (
                residual <= TOL,
                format!("weight outside all-zeros/all-ones {residual:.3e}"),
            )
        };
        r.verdict(
            "frame_alignment",
            "all sites share one complex-conjugation frame",
            aligned,
            detail,
        );
    }
    Ok(r)
}

pub struct CertifyFiles {
    pub witness_file: Option<PathBuf>,
    pub emit_witness: Option<PathBuf>,
    pub correlations_out: Option<PathBuf>,
}

pub fn certify(
    n: usize,
    p: f64,
    eta: f64,
    samples: usize,
    files: &CertifyFiles,
    output: &Output,
) -> Result<RunReport, Failure> {
    if n == 0 || n > MAX_NETWORK_SITES {
        return Err(Failure::Usage(format!("n = {n} is outside 1..={MAX_NETWORK_SITES}")));
    }
    finite("p", p)?;
    finite("eta", eta)?;
    let d = 1usize << n;
    let witness: Witness = match &files.witness_file {
        Some(path) => load_witness(path)?,
        None => isotropic_witness(n)?,
    };
    if witness.n != n {
        return Err(Failure::Usage(format!(
            "witness acts on n = {}, run has n = {n}",
            witness.n
        )));
    }
    let target = isotropic_state(d, p)?;
    let trace_value = (&witness.matrix * &target).trace().re / (d * d * d * d) as f64;
    let ns = noisy_network(target, n, eta)?;
    let value = certification_value(&ns, &witness)?;
    let budget = SearchBudget {
        samples,
        seed: output.seed,
        ..SearchBudget::default()
    };
    let sep = separable_minimum(&witness, &ns, &budget)?;

    if let Some(path) = &files.emit_witness {
        write_file(path, &witness_to_json(&witness, true))?;
    }
    if let Some(path) = &files.correlations_out {
        write_file(path, &correlations_to_json(&network_correlations(&ns)?))?;
    }

    let mut r = RunReport::new(
        "certify",
        config(
            output,
            &[
                ("n", json!(n)),
                ("p", json!(p)),
                ("eta", json!(eta)),
                ("samples", json!(samples)),
                (
                    "witness",
                    json!(files
                        .witness_file
                        .as_ref()
                        .map_or("default".to_string(), |f| f.display().to_string())),
                ),
            ],
        ),
    );
    r.metric("certification_value", value);
    r.metric("target_trace_value", trace_value);
    r.metric("witness_terms", witness.omega.len());
    r.metric("separable_minimum", sep.min_value);
    r.metric("separable_argmin", sep.describe());
    r.metric("separable_evaluations", sep.evaluations);
    if n == 1 && files.witness_file.is_none() {
        let closed = expected_i_werner(eta, p)?;
        let theta = critical_theta(eta, p)?;
        r.metric("closed_form_value", closed);
        r.metric("critical_theta", theta);
        r.metric("penalty_at_critical_theta", worst_case_i_penalty(theta));
    }

    let rec = witness.reconstruction_error()?;
    r.verdict(
        "witness_reconstruction",
        "omega coefficients rebuild the witness matrix",
        rec <= 1e-10,
        format!("max deviation {rec:.3e}"),
    );
    if eta == 1.0 {
        let gap = (value - trace_value).abs();
        r.verdict(
            "ideal_consistency",
            "with ideal auxiliaries the value equals the witness expectation over d^4",
            gap <= 1e-10,
            format!("gap {gap:.3e}"),
        );
    }
    r.verdict(
        "separable_nonnegative",
        "no separable target found with a negative value",
        sep.min_value >= -1e-7,
        format!("minimum {:.6e}", sep.min_value),
    );
    r.verdict(
        "entanglement_certified",
        "the target's value is negative",
        value < 0.0,
        format!("value {value:.12}"),
    );
    Ok(r)
}

pub fn robust_curve(
    p: f64,
    eta_min: f64,
    eta_max: f64,
    steps: usize,
    output: &Output,
) -> Result<(RunReport, String), Failure> {
    finite("p", p)?;
    let grid = eta_grid(eta_min, eta_max, steps)?;
    let points = robustness_curve(p, &grid)?;
    let threshold = visibility_threshold(p)?;

    let mut r = RunReport::new(
        "robust-curve",
        config(
            output,
            &[
                ("p", json!(p)),
                ("eta_min", json!(eta_min)),
                ("eta_max", json!(eta_max)),
                ("steps", json!(steps)),
            ],
        ),
    );
    r.metric("eta_threshold", threshold);
    r.metric(
        "theta_crit_max",
        points.iter().map(|pt| pt.theta_crit).fold(0.0, f64::max),
    );
    r.metric("points", &points);

    let undetectable_zero = points
        .iter()
        .filter(|pt| pt.expected_i >= 0.0)
        .all(|pt| pt.theta_crit == 0.0);
    r.verdict(
        "zero_when_undetected",
        "critical radius vanishes wherever the expected value is non-negative",
        undetectable_zero,
        String::new(),
    );
    let mut worst_gap: f64 = 0.0;
    let mut worst_bisect: f64 = 0.0;
    for pt in points.iter().filter(|pt| pt.theta_crit > 0.0) {
        worst_gap = worst_gap.max((pt.expected_i + worst_case_i_penalty(pt.theta_crit)).abs());
        let b = critical_theta_bisection(pt.eta, p, 1e-14)?;
        worst_bisect = worst_bisect.max((b - pt.theta_crit).abs());
    }
    r.verdict(
        "penalty_closes_gap",
        "at the critical radius the worst-case penalty exactly cancels the expected value",
        worst_gap <= 1e-12 && worst_bisect <= 1e-12,
        format!("max gap {worst_gap:.3e}, max bisection disagreement {worst_bisect:.3e}"),
    );
    let mut sorted: Vec<_> = points.iter().filter(|pt| pt.theta_crit > 0.0).collect();
    sorted.sort_by(|a, b| a.eta.total_cmp(&b.eta));
    let monotone = sorted.windows(2).all(|w| w[1].theta_crit >= w[0].theta_crit);
    r.verdict(
        "monotone_in_eta",
        "critical radius does not decrease as visibility grows",
        monotone,
        String::new(),
    );
    Ok((r, curve_csv(&points)))
}
