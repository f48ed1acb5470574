//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p pauli-selftest --test acceptance`. Lines marked
//! `expected-fail` evaluate a literal statement that cannot hold; each is
//! followed by the corrected statement, which must pass. The process exits
//! nonzero on any ordinary failure and on any expected failure that passes.

use std::time::Instant;

use pauli_selftest::certification::{
    certification_value, decompose_witness, ideal_network, isotropic_witness, separable_minimum, SearchBudget,
};
use pauli_selftest::objects::{
    direct_sum, ideal_qubit_strategy, parallel_strategy, parallel_strategy_with_frames, transpose_strategy,
    werner_state, Strategy,
};
use pauli_selftest::random::{random_density, random_hermitian, random_hermitian_unitary, seeded_rng};
use pauli_selftest::robustness::{
    anticommutator_bounds, critical_theta, critical_theta_bisection, eta_grid, noisy_qubit_selftest, robustness_curve,
    visibility_threshold,
};
use pauli_selftest::selftest_parallel::{
    bsm_correlations, coarse_grain, parallel_bell_values, parallel_swap_isometry, reconstruction_residuals,
    verify_alignment, AlignmentVerdict, PairFamily,
};
use pauli_selftest::selftest_qubit::{
    anticommutator_norms, bell_value, swap_isometry, verify_operator_actions, QubitObservables, SOS_PREFACTOR,
    TRIPLE_CHSH_MAX,
};
use pauli_selftest::swap::SwapOptions;
use pauli_selftest::tensor::ComplexMatrix;

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Required,
    /// Literal statement shown to be unattainable; must keep failing.
    ExpectedFail,
}

#[derive(Default)]
struct Tally {
    passed: usize,
    failed: usize,
    expected_failures: usize,
    unexpected_passes: usize,
}

impl Tally {
    fn check(&mut self, id: &str, kind: Kind, pass: bool, detail: String) {
        let status = match (kind, pass) {
            (Kind::Required, true) => {
                self.passed += 1;
                "PASS"
            }
            (Kind::Required, false) => {
                self.failed += 1;
                "FAIL"
            }
            (Kind::ExpectedFail, false) => {
                self.expected_failures += 1;
                "FAIL (expected-fail)"
            }
            (Kind::ExpectedFail, true) => {
                self.unexpected_passes += 1;
                "PASS (unexpected)"
            }
        };
        println!("criterion {id:<4} {status:<21} {detail}");
    }

    fn require(&mut self, id: &str, pass: bool, detail: String) {
        self.check(id, Kind::Required, pass, detail);
    }
}

fn elapsed(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn criterion_1(t: &mut Tally) {
    let start = Instant::now();
    let v = bell_value(&ideal_qubit_strategy()).unwrap();
    let secs = elapsed(start);
    let dev = (v - TRIPLE_CHSH_MAX).abs();
    t.require(
        "1",
        dev <= 1e-10 && secs < 1.0,
        format!("ideal triple CHSH = {v:.15}, |v - 6*sqrt2| = {dev:.2e} (tol 1e-10), {secs:.3} s (limit 1 s)"),
    );
}

fn criterion_2(t: &mut Tally) {
    let mut rng = seeded_rng(2);
    let (mut literal, mut corrected) = (0.0f64, 0.0f64);
    for draw in 0..100 {
        let (dc, da) = (2 + draw % 2, 2 + (draw / 2) % 2);
        let obs = QubitObservables {
            charlie: std::array::from_fn(|_| random_hermitian_unitary(&mut rng, dc)),
            alice: std::array::from_fn(|_| random_hermitian_unitary(&mut rng, da)),
        };
        let shifted = &ComplexMatrix::identity(dc * da).scale_real(TRIPLE_CHSH_MAX) - &obs.triple_chsh();
        let sos = obs.sos_sum();
        literal = literal.max(sos.max_abs_diff(&shifted.scale_real(2.0)));
        corrected = corrected.max(sos.max_abs_diff(&shifted.scale_real(SOS_PREFACTOR)));
    }
    t.check(
        "2",
        Kind::ExpectedFail,
        literal <= 1e-9,
        format!("sum of squares = 2(6*sqrt2 I - B) over 100 draws: max entry error {literal:.3e} (tol 1e-9)"),
    );
    t.require(
        "2*",
        corrected <= 1e-9,
        format!(
            "sum of squares = sqrt2(6*sqrt2 I - B) over the same draws: max entry error {corrected:.3e} (tol 1e-9)"
        ),
    );
}

fn criterion_3(t: &mut Tally) {
    let opts = SwapOptions::default();
    let s = ideal_qubit_strategy();
    let ideal = swap_isometry(&s, &opts).unwrap();
    let actions = verify_operator_actions(&s, &opts).unwrap();
    let tr = transpose_strategy(&s).unwrap();
    let flipped = swap_isometry(&tr, &opts).unwrap();
    let (wi, wt) = (ideal.junk.weights(), flipped.junk.weights());
    let pass = (ideal.extracted_fidelity - 1.0).abs() <= 1e-10
        && actions.max_residual() <= 1e-9
        && (flipped.extracted_fidelity - 1.0).abs() <= 1e-10
        && (wi[0] - 1.0).abs() <= 1e-10
        && (wt[1] - 1.0).abs() <= 1e-10;
    t.require(
        "3",
        pass,
        format!(
            "fidelity {:.12} (tol 1e-10); action residuals I {:.1e} Z {:.1e} X {:.1e} Y {:.1e} (tol 1e-9); \
             junk weights |00> {:.3} -> transposed |11> {:.3}, fidelity {:.12}",
            ideal.extracted_fidelity,
            actions.identity,
            actions.z,
            actions.x,
            actions.y,
            wi[0],
            wt[1],
            flipped.extracted_fidelity
        ),
    );
}

fn criterion_4(t: &mut Tally) {
    let opts = SwapOptions::default();
    for n in [2usize, 3] {
        let start = Instant::now();
        let s = parallel_strategy(n).unwrap();
        let values = parallel_bell_values(&s, n).unwrap();
        let r = parallel_swap_isometry(&s, n, 0, &opts).unwrap();
        let secs = elapsed(start);
        let bell_dev = values.iter().map(|v| (v - TRIPLE_CHSH_MAX).abs()).fold(0.0, f64::max);
        let fid_dev = r.site_fidelities.iter().map(|f| (f - 1.0).abs()).fold(0.0, f64::max);
        let pass = bell_dev <= 1e-10 && r.off_diagonal_residual <= 1e-9 && fid_dev <= 1e-9 && secs < 60.0;
        t.require(
            &format!("4.{n}"),
            pass,
            format!(
                "n={n}: max |Bell - 6*sqrt2| {bell_dev:.1e} (tol 1e-10), off-diagonal junk {:.1e} (tol 1e-9), \
                 max |fidelity - 1| {fid_dev:.1e} (tol 1e-9), {secs:.2} s (limit 60 s)",
                r.off_diagonal_residual
            ),
        );
    }
}

fn alignment_residual(s: &Strategy, n: usize) -> (f64, Option<f64>) {
    let dev = bsm_correlations(s, n, 0).unwrap().max_deviation;
    let res = match verify_alignment(s, n, 1e-9, &SwapOptions::default()).unwrap() {
        AlignmentVerdict::Checked { two_term_residual, .. } => Some(two_term_residual),
        AlignmentVerdict::NotApplicable { .. } => None,
    };
    (dev, res)
}

fn criterion_5(t: &mut Tally) {
    for n in [2usize, 3] {
        let ideal = parallel_strategy(n).unwrap();
        let tr = transpose_strategy(&ideal).unwrap();
        let (di, ri) = alignment_residual(&ideal, n);
        let (dt, rt) = alignment_residual(&tr, n);
        let pass = di <= 1e-10 && dt <= 1e-10 && ri.is_some_and(|r| r <= 1e-9) && rt.is_some_and(|r| r <= 1e-9);
        t.require(
            &format!("5.{n}+"),
            pass,
            format!(
                "n={n}: table deviation ideal {di:.1e} / transposed {dt:.1e} (tol 1e-10), two-term residual \
                 {:.1e} / {:.1e} (tol 1e-9)",
                ri.unwrap_or(f64::NAN),
                rt.unwrap_or(f64::NAN)
            ),
        );

        let mut frames = vec![false; n];
        frames[1] = true;
        let flipped = parallel_strategy_with_frames(n, &frames).unwrap();
        let report = bsm_correlations(&flipped, n, 0).unwrap();
        let yy = report.get(PairFamily::S, 1, 0, 3).unwrap();
        let yy_dev = (yy - (-0.25)).abs();
        let mixture = direct_sum(&ideal, &flipped, 0.5).unwrap();
        let mix_dev = bsm_correlations(&mixture, n, 0).unwrap().max_deviation;
        t.require(
            &format!("5.{n}-"),
            (yy_dev - 0.5).abs() <= 1e-10 && (report.max_deviation - 0.5).abs() <= 1e-10,
            format!(
                "n={n}, site 2 transposed: YY entry {yy:+.12} vs -0.25, deviation {yy_dev:.12} (want 0.5, tol 1e-10); \
                 equal mixture with the ideal strategy deviates by {mix_dev:.12}"
            ),
        );
    }
}

fn criterion_6(t: &mut Tally) {
    for n in [2usize, 3] {
        let s = parallel_strategy(n).unwrap();
        let count = coarse_grain(&s, n).unwrap().compatible_count();
        let (mut rec, mut prod) = (0.0f64, 0.0f64);
        for k in [0, count - 1] {
            let (a, b) = reconstruction_residuals(&s, n, k).unwrap();
            rec = rec.max(a);
            prod = prod.max(b);
        }
        t.require(
            &format!("6.{n}"),
            rec <= 1e-9 && prod <= 1e-9,
            format!("n={n}: max_l |S_l0 psi - (I+ZZ+XX-YY)/4 psi| {rec:.1e}, |(XX.ZZ+YY) psi| {prod:.1e} (tol 1e-9)"),
        );
    }
}

fn criterion_7(t: &mut Tally) {
    let mut rng = seeded_rng(7);
    let mut worst1 = 0.0f64;
    let witnesses: Vec<ComplexMatrix> = (0..5).map(|_| random_hermitian(&mut rng, 4)).collect();
    let decomposed: Vec<_> = witnesses.iter().map(|w| decompose_witness(w, 1).unwrap()).collect();
    for _ in 0..20 {
        let rho = random_density(&mut rng, 4);
        let ns = ideal_network(rho.clone(), 1).unwrap();
        for (w, wit) in witnesses.iter().zip(&decomposed) {
            let i = certification_value(&ns, wit).unwrap();
            worst1 = worst1.max((i - (w * &rho).trace().re / 16.0).abs());
        }
    }
    let mut worst2 = 0.0f64;
    let witnesses: Vec<ComplexMatrix> = (0..3).map(|_| random_hermitian(&mut rng, 16)).collect();
    let decomposed: Vec<_> = witnesses.iter().map(|w| decompose_witness(w, 2).unwrap()).collect();
    for _ in 0..5 {
        let rho = random_density(&mut rng, 16);
        let ns = ideal_network(rho.clone(), 2).unwrap();
        for (w, wit) in witnesses.iter().zip(&decomposed) {
            let i = certification_value(&ns, wit).unwrap();
            worst2 = worst2.max((i - (w * &rho).trace().re / 256.0).abs());
        }
    }
    t.require(
        "7",
        worst1 <= 1e-10 && worst2 <= 1e-9,
        format!("n=1: max |I - tr[W rho]/16| {worst1:.1e} (tol 1e-10); n=2: max |I - tr[W rho]/256| {worst2:.1e} (tol 1e-9)"),
    );
}

fn criterion_8(t: &mut Tally) {
    let wit = isotropic_witness(1).unwrap();
    let budget = SearchBudget::default();
    let ns = ideal_network(werner_state(0.0).unwrap(), 1).unwrap();
    for (label, net) in [
        ("ideal", ns.clone()),
        ("doubly transposed", ns.with_transposed(true, true)),
    ] {
        let start = Instant::now();
        let m = separable_minimum(&wit, &net, &budget).unwrap();
        let secs = elapsed(start);
        t.require(
            "8",
            m.min_value >= -1e-7 && secs < 30.0,
            format!(
                "{label} network: separable minimum {:.3e} (>= -1e-7) over {} samples + refinement, {secs:.2} s (limit 30 s)",
                m.min_value, budget.samples
            ),
        );
    }
}

fn criterion_9(t: &mut Tally) {
    let wit = isotropic_witness(1).unwrap();
    let i06 = certification_value(&ideal_network(werner_state(0.6).unwrap(), 1).unwrap(), &wit).unwrap();
    let i13 = certification_value(&ideal_network(werner_state(1.0 / 3.0).unwrap(), 1).unwrap(), &wit).unwrap();
    t.require(
        "9",
        (i06 + 0.05).abs() <= 1e-12 && i13.abs() <= 1e-12,
        format!("I(p=0.6, eta=1) = {i06:.15} (want -0.05, tol 1e-12); I(p=1/3, eta=1) = {i13:.2e} (tol 1e-12)"),
    );
}

fn criterion_10(t: &mut Tally) {
    let start = Instant::now();
    let grid = eta_grid(0.0, 1.0, 50).unwrap();
    let curve = robustness_curve(0.6, &grid).unwrap();
    let secs = elapsed(start);
    let root = visibility_threshold(0.6).unwrap().unwrap();
    let zero_below = curve
        .iter()
        .filter(|p| p.eta <= 0.7237 - 1e-3)
        .all(|p| p.theta_crit == 0.0);
    let above: Vec<f64> = curve
        .iter()
        .filter(|p| p.eta >= 0.7237 + 1e-3)
        .map(|p| p.theta_crit)
        .collect();
    let increasing = above.first().is_some_and(|v| *v > 0.0) && above.windows(2).all(|w| w[1] > w[0]);
    let at_one = critical_theta(1.0, 0.6).unwrap();
    let bisect = critical_theta_bisection(1.0, 0.6, 1e-14).unwrap();
    let rel = (at_one - 2.93e-3).abs() / 2.93e-3;
    let pass = (root - 0.7237).abs() <= 1e-3 && zero_below && increasing && rel <= 0.02 && secs < 1.0;
    t.require(
        "10",
        pass,
        format!(
            "eta* = {root:.6} (0.7237 +- 1e-3), zero below: {zero_below}, strictly increasing above: {increasing}, \
             theta_crit(1) = {at_one:.6e} ({:.2}% from 2.93e-3, limit 2%; bisection gap {:.1e}), 50 points in {secs:.4} s",
            rel * 100.0,
            (at_one - bisect).abs()
        ),
    );
}

fn criterion_11(t: &mut Tally) {
    let (mut anti_ok, mut literal, mut corrected) = (true, 0.0f64, 0.0f64);
    let mut detail = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let (s, rep) = noisy_qubit_selftest(eps).unwrap();
        let norms = anticommutator_norms(&s).unwrap();
        let bounds = anticommutator_bounds(eps).unwrap();
        anti_ok &= norms.iter().zip(&bounds).all(|(n, b)| n <= b);
        literal = literal.max((rep.sum_of_squares() - 2.0 * eps).abs());
        corrected = corrected.max((rep.sum_of_squares() - SOS_PREFACTOR * eps).abs());
        detail.push(format!(
            "eps={eps:.0e}: max norm {:.1e}, tightest bound {:.3e}",
            norms.iter().cloned().fold(0.0, f64::max),
            bounds[0]
        ));
    }
    t.require(
        "11a",
        anti_ok,
        format!(
            "anti-commutator norms within (4,6,8)(1+sqrt2)sqrt(eps): {}",
            detail.join("; ")
        ),
    );
    t.check(
        "11b",
        Kind::ExpectedFail,
        literal <= 1e-8,
        format!("sum of squared SOS residuals = 2 eps: max error {literal:.3e} (tol 1e-8)"),
    );
    t.require(
        "11b*",
        corrected <= 1e-8,
        format!("sum of squared SOS residuals = sqrt2 eps: max error {corrected:.3e} (tol 1e-8)"),
    );
}

fn criterion_12(t: &mut Tally) {
    let opts = SwapOptions::default();
    let cases: Vec<(&str, Strategy, usize)> = vec![
        ("qubit", ideal_qubit_strategy(), 1),
        ("parallel n=2", parallel_strategy(2).unwrap(), 2),
    ];
    for (label, s, n) in cases {
        let tr = transpose_strategy(&s).unwrap();
        let diff = s
            .correlation_table()
            .unwrap()
            .max_abs_diff(&tr.correlation_table().unwrap());
        let (w, wt) = if n == 1 {
            (
                swap_isometry(&s, &opts).unwrap().junk.weights(),
                swap_isometry(&tr, &opts).unwrap().junk.weights(),
            )
        } else {
            (
                parallel_swap_isometry(&s, n, 0, &opts).unwrap().junk.weights(),
                parallel_swap_isometry(&tr, n, 0, &opts).unwrap().junk.weights(),
            )
        };
        let moved = w.iter().zip(&wt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(",");
        t.require(
            "12",
            diff <= 1e-12 && moved > 0.5,
            format!(
                "{label}: correlation tables differ by {diff:.1e} (tol 1e-12); junk weights [{}] vs transposed [{}]",
                fmt(&w),
                fmt(&wt)
            ),
        );
    }
}

fn main() {
    let mut t = Tally::default();
    criterion_1(&mut t);
    criterion_2(&mut t);
    criterion_3(&mut t);
    criterion_4(&mut t);
    criterion_5(&mut t);
    criterion_6(&mut t);
    criterion_7(&mut t);
    criterion_8(&mut t);
    criterion_9(&mut t);
    criterion_10(&mut t);
    criterion_11(&mut t);
    criterion_12(&mut t);
    println!(
        "acceptance: {} passed, {} failed, {} expected failures, {} unexpected passes",
        t.passed, t.failed, t.expected_failures, t.unexpected_passes
    );
    if t.failed > 0 || t.unexpected_passes > 0 {
        std::process::exit(1);
    }
}
