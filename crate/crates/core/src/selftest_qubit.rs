//! Triple-CHSH self-test of σx, σy, σz on a single shared pair.
//!
//! Observables are taken from the first three Charlie settings (Z, X, Y) and the
//! first six Alice settings (D and E for the pairs zx, zy, xy).

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use crate::error::{Error, Result};
use crate::objects::{Pauli, Strategy};
use crate::swap::{self, JunkDecomposition, SiteOperators, SwapOptions};
use crate::tensor::{kron, regularize, ComplexMatrix, StateVector};

/// Quantum maximum of the triple CHSH expression, `6√2`.
pub const TRIPLE_CHSH_MAX: f64 = 6.0 * SQRT_2;

/// Scalar `s` in `Σ_λ P_λ² = s·(6√2·I − B)`.
///
/// Expanding the six squares with ±1-valued observables gives `12·I − √2·B`,
/// so `s = √2`.
pub const SOS_PREFACTOR: f64 = SQRT_2;

#[derive(Clone, Debug, PartialEq)]
pub struct BellOperator {
    pub matrix: ComplexMatrix,
    pub max_quantum_value: f64,
}

impl BellOperator {
    pub fn value(&self, state: &StateVector) -> Result<f64> {
        Ok(self.matrix.expectation(state.amplitudes())?.re)
    }
}

/// Charlie's `[Z, X, Y]` and Alice's `[D_zx, E_zx, D_zy, E_zy, D_xy, E_xy]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitObservables {
    pub charlie: [ComplexMatrix; 3],
    pub alice: [ComplexMatrix; 6],
}

impl QubitObservables {
    pub fn from_strategy(s: &Strategy) -> Result<Self> {
        if s.charlie.len() < 3 || s.alice.len() < 6 {
            return Err(Error::Shape(format!(
                "need 3 Charlie and 6 Alice settings, found {} and {}",
                s.charlie.len(),
                s.alice.len()
            )));
        }
        let ch: Vec<ComplexMatrix> = (0..3).map(|z| s.charlie.observable(z)).collect::<Result<_>>()?;
        let al: Vec<ComplexMatrix> = (0..6).map(|x| s.alice.observable(x)).collect::<Result<_>>()?;
        Ok(QubitObservables {
            charlie: ch.try_into().expect("three"),
            alice: al.try_into().expect("six"),
        })
    }

    /// The six `(Charlie operator, Alice operator)` pairs with
    /// `P_λ = C ⊗ I − I ⊗ A`.
    pub fn sos_pairs(&self) -> [(ComplexMatrix, ComplexMatrix); 6] {
        let [z, x, y] = &self.charlie;
        let [dzx, ezx, dzy, ezy, dxy, exy] = &self.alice;
        let plus = |d: &ComplexMatrix, e: &ComplexMatrix| (d + e).scale_real(FRAC_1_SQRT_2);
        let minus = |d: &ComplexMatrix, e: &ComplexMatrix| (d - e).scale_real(FRAC_1_SQRT_2);
        [
            (z.clone(), plus(dzx, ezx)),
            (x.clone(), minus(dzx, ezx)),
            (z.clone(), plus(dzy, ezy)),
            (y.clone(), minus(dzy, ezy).scale_real(-1.0)),
            (x.clone(), plus(dxy, exy)),
            (y.clone(), minus(dxy, exy).scale_real(-1.0)),
        ]
    }

    /// Terms `(C, A)` of the Bell operator `Σ C ⊗ A`, grouped by CHSH block.
    pub(crate) fn bell_terms(&self) -> [[(ComplexMatrix, ComplexMatrix); 2]; 3] {
        let [z, x, y] = &self.charlie;
        let [dzx, ezx, dzy, ezy, dxy, exy] = &self.alice;
        [
            [(z.clone(), dzx + ezx), (x.clone(), dzx - ezx)],
            [(z.clone(), dzy + ezy), (y.clone(), (dzy - ezy).scale_real(-1.0))],
            [(x.clone(), dxy + exy), (y.clone(), (dxy - exy).scale_real(-1.0))],
        ]
    }

    pub fn triple_chsh(&self) -> ComplexMatrix {
        let mut b = None::<ComplexMatrix>;
        for block in self.bell_terms() {
            for (c, a) in block {
                let t = kron(&c, &a);
                b = Some(match b {
                    Some(acc) => &acc + &t,
                    None => t,
                });
            }
        }
        b.expect("six terms")
    }

    /// `Σ_λ P_λ²` as a dense matrix.
    pub fn sos_sum(&self) -> ComplexMatrix {
        let dc = self.charlie[0].rows();
        let da = self.alice[0].rows();
        let (ic, ia) = (ComplexMatrix::identity(dc), ComplexMatrix::identity(da));
        let mut acc = ComplexMatrix::zeros(dc * da, dc * da);
        for (c, a) in self.sos_pairs() {
            let p = &kron(&c, &ia) - &kron(&ic, &a);
            acc += &(&p * &p);
        }
        acc
    }

    /// Regularized Alice operators `[Ẑ, X̂, Ŷ]` from `(D_zx ± E_zx)/√2` and `(D_zy − E_zy)/√2`.
    pub fn alice_sharp(&self) -> Result<[ComplexMatrix; 3]> {
        let [dzx, ezx, dzy, ezy, _, _] = &self.alice;
        Ok([
            regularize(&(dzx + ezx).scale_real(FRAC_1_SQRT_2))?,
            regularize(&(dzx - ezx).scale_real(FRAC_1_SQRT_2))?,
            regularize(&(dzy - ezy).scale_real(FRAC_1_SQRT_2))?,
        ])
    }

    pub fn site_operators(&self) -> Result<SiteOperators> {
        let [z_a, x_a, y_a] = self.alice_sharp()?;
        Ok(SiteOperators {
            z_c: self.charlie[0].clone(),
            x_c: self.charlie[1].clone(),
            y_c: self.charlie[2].clone(),
            z_a,
            x_a,
            y_a,
        })
    }
}

pub fn build_triple_chsh(s: &Strategy) -> Result<BellOperator> {
    Ok(BellOperator {
        matrix: QubitObservables::from_strategy(s)?.triple_chsh(),
        max_quantum_value: TRIPLE_CHSH_MAX,
    })
}

/// Values of the three CHSH blocks on the strategy's state.
pub fn chsh_block_values(s: &Strategy) -> Result<[f64; 3]> {
    let obs = QubitObservables::from_strategy(s)?;
    let mut out = [0.0; 3];
    for (k, block) in obs.bell_terms().iter().enumerate() {
        for (c, a) in block {
            out[k] += s.expectation(c, a)?.re;
        }
    }
    Ok(out)
}

/// `⟨ψ|B|ψ⟩` evaluated term by term without forming `B`.
pub fn bell_value(s: &Strategy) -> Result<f64> {
    Ok(chsh_block_values(s)?.iter().sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SosReport {
    /// `‖P_λ|ψ⟩‖` for the six squared terms.
    pub residuals: Vec<f64>,
    pub bell_value: f64,
    /// `6√2 − bell_value`
    pub epsilon: f64,
}

impl SosReport {
    pub fn sum_of_squares(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

pub fn sos_residuals(s: &Strategy) -> Result<SosReport> {
    let obs = QubitObservables::from_strategy(s)?;
    let mut residuals = Vec::with_capacity(6);
    for (c, a) in obs.sos_pairs() {
        let cv = s.apply_charlie(&c, &s.state)?;
        let av = s.apply_alice(&a, &s.state)?;
        residuals.push(cv.distance(&av));
    }
    let bell_value = bell_value(s)?;
    Ok(SosReport {
        residuals,
        bell_value,
        epsilon: TRIPLE_CHSH_MAX - bell_value,
    })
}

/// `‖{Z,X}|ψ⟩‖`, `‖{Z,Y}|ψ⟩‖`, `‖{X,Y}|ψ⟩‖` for Charlie's observables.
pub fn anticommutator_norms(s: &Strategy) -> Result<[f64; 3]> {
    let obs = QubitObservables::from_strategy(s)?;
    let [z, x, y] = &obs.charlie;
    let norm = |a: &ComplexMatrix, b: &ComplexMatrix| -> Result<f64> {
        Ok(s.apply_charlie(&a.anticommutator(b)?, &s.state)?.norm())
    };
    Ok([norm(z, x)?, norm(z, y)?, norm(x, y)?])
}

#[derive(Clone, Debug)]
pub struct SwapResult {
    /// `U[|ψ⟩ ⊗ |00⟩]` on the strategy's factors followed by C″, A″, C′, A′.
    pub transformed: StateVector,
    pub junk: JunkDecomposition,
    /// `⟨Φ⁺|ρ_{C′A′}|Φ⁺⟩`
    pub extracted_fidelity: f64,
    /// Squared norm on control branches `|01⟩`, `|10⟩` of C″A″.
    pub off_diagonal_residual: f64,
    pub warnings: Vec<String>,
}

pub fn swap_isometry(s: &Strategy, opts: &SwapOptions) -> Result<SwapResult> {
    let obs = QubitObservables::from_strategy(s)?;
    let mut warnings = Vec::new();
    let value = bell_value(s)?;
    if TRIPLE_CHSH_MAX - value > opts.epsilon_warning {
        warnings.push(format!(
            "Bell value {value:.12} is {:.3e} below the maximum",
            TRIPLE_CHSH_MAX - value
        ));
    }
    let out = swap::swap_and_extract(s, &[obs.site_operators()?], opts.max_qubits)?;
    Ok(SwapResult {
        transformed: out.state,
        junk: out.junk,
        extracted_fidelity: out.site_fidelities[0],
        off_diagonal_residual: out.off_diagonal_residual,
        warnings,
    })
}

/// Distances between the circuit applied to `O^C|ψ⟩` and the form predicted
/// from the junk of `U[|ψ⟩]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionReport {
    pub identity: f64,
    pub z: f64,
    pub x: f64,
    /// With the `σz^{C″}` factor on the junk.
    pub y: f64,
    /// Same comparison without that factor; equals `2‖ξ₁‖`.
    pub y_without_control: f64,
}

impl ActionReport {
    pub fn max_residual(&self) -> f64 {
        self.identity.max(self.z).max(self.x).max(self.y)
    }
}

pub fn verify_operator_actions(s: &Strategy, opts: &SwapOptions) -> Result<ActionReport> {
    let obs = QubitObservables::from_strategy(s)?;
    let ops = [obs.site_operators()?];
    let base = swap::swap_and_extract(s, &ops, opts.max_qubits)?;
    let residual = |input: &StateVector, sigma: &ComplexMatrix, controlled: bool| -> Result<f64> {
        let out = swap::run_circuit(s, &ops, input, opts.max_qubits)?;
        let target = swap::single_site_target(&base.junk, sigma, controlled);
        Ok(out
            .amplitudes()
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    };
    let id = ComplexMatrix::identity(2);
    let z_in = s.apply_charlie(&obs.charlie[0], &s.state)?;
    let x_in = s.apply_charlie(&obs.charlie[1], &s.state)?;
    let y_in = s.apply_charlie(&obs.charlie[2], &s.state)?;
    Ok(ActionReport {
        identity: residual(&s.state, &id, false)?,
        z: residual(&z_in, &Pauli::Z.matrix(), false)?,
        x: residual(&x_in, &Pauli::X.matrix(), false)?,
        y: residual(&y_in, &Pauli::Y.matrix(), true)?,
        y_without_control: residual(&y_in, &Pauli::Y.matrix(), false)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objects::{ideal_qubit_strategy, transpose_strategy, with_alice_junk, MeasurementFamily, Setting};
    use crate::random::{random_hermitian_unitary, seeded_rng};
    use crate::tensor::Factor;

    fn strategy_with_observables(charlie: &[ComplexMatrix], alice: &[ComplexMatrix]) -> Strategy {
        let base = ideal_qubit_strategy();
        let ch = MeasurementFamily::new(charlie.iter().map(|m| Setting::dichotomic("c", m)).collect()).unwrap();
        let al = MeasurementFamily::new(alice.iter().map(|m| Setting::dichotomic("a", m)).collect()).unwrap();
        Strategy::new(base.state, 1, ch, al, 1).unwrap()
    }

    #[test]
    fn ideal_bell_value_and_blocks() {
        let s = ideal_qubit_strategy();
        let b = build_triple_chsh(&s).unwrap();
        assert!(b.matrix.is_hermitian(1e-12));
        assert!((b.value(&s.state).unwrap() - TRIPLE_CHSH_MAX).abs() < 1e-12);
        for v in chsh_block_values(&s).unwrap() {
            assert!((v - 2.0 * SQRT_2).abs() < 1e-12);
        }
        let t = transpose_strategy(&s).unwrap();
        assert!((bell_value(&t).unwrap() - TRIPLE_CHSH_MAX).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let s = ideal_qubit_strategy();
        let short = Strategy::new(
            s.state.clone(),
            1,
            MeasurementFamily::new(s.charlie.settings()[..2].to_vec()).unwrap(),
            s.alice.clone(),
            1,
        )
        .unwrap();
        assert!(matches!(build_triple_chsh(&short), Err(Error::Shape(_))));
        let p2 = crate::objects::parallel_strategy(2).unwrap();
        assert!(matches!(sos_residuals(&p2), Err(Error::Shape(_))));
    }

    #[test]
    fn sos_identity_for_random_observables() {
        let mut rng = seeded_rng(11);
        for dim in [2, 3] {
            let ch: Vec<ComplexMatrix> = (0..3).map(|_| random_hermitian_unitary(&mut rng, dim)).collect();
            let al: Vec<ComplexMatrix> = (0..6).map(|_| random_hermitian_unitary(&mut rng, dim)).collect();
            let obs = QubitObservables {
                charlie: ch.try_into().unwrap(),
                alice: al.try_into().unwrap(),
            };
            let b = obs.triple_chsh();
            let shifted = &ComplexMatrix::identity(dim * dim).scale_real(TRIPLE_CHSH_MAX) - &b;
            let err = obs.sos_sum().max_abs_diff(&shifted.scale_real(SOS_PREFACTOR));
            assert!(err < 1e-12, "err {err}");
        }
    }

    #[test]
    fn ideal_residuals_vanish() {
        let r = sos_residuals(&ideal_qubit_strategy()).unwrap();
        assert!(r.residuals.iter().all(|&x| x < 1e-12));
        assert!(r.epsilon.abs() < 1e-12);
    }

    #[test]
    fn flipped_e_zx_costs_one_block() {
        let s = ideal_qubit_strategy();
        let mut al: Vec<ComplexMatrix> = (0..6).map(|x| s.alice.observable(x).unwrap()).collect();
        al[1] = al[1].scale_real(-1.0);
        let ch: Vec<ComplexMatrix> = (0..3).map(|z| s.charlie.observable(z).unwrap()).collect();
        let f = strategy_with_observables(&ch, &al);
        let r = sos_residuals(&f).unwrap();
        assert!((r.bell_value - 4.0 * SQRT_2).abs() < 1e-12);
        assert!(r.residuals[0] > 0.1 && r.residuals[1] > 0.1);
        assert!((r.sum_of_squares() - SOS_PREFACTOR * r.epsilon).abs() < 1e-10);
    }

    #[test]
    fn anticommutators() {
        assert!(anticommutator_norms(&ideal_qubit_strategy())
            .unwrap()
            .iter()
            .all(|&x| x < 1e-14));
        let z = Pauli::Z.matrix();
        let s = ideal_qubit_strategy();
        let al: Vec<ComplexMatrix> = (0..6).map(|x| s.alice.observable(x).unwrap()).collect();
        let f = strategy_with_observables(&[z.clone(), z.clone(), Pauli::Y.matrix()], &al);
        assert!((anticommutator_norms(&f).unwrap()[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn swap_extracts_phi_plus() {
        let r = swap_isometry(&ideal_qubit_strategy(), &SwapOptions::default()).unwrap();
        assert!((r.extracted_fidelity - 1.0).abs() < 1e-12);
        assert!((r.transformed.norm() - 1.0).abs() < 1e-12);
        let w = r.junk.weights();
        assert!((w[0] - 1.0).abs() < 1e-12 && w[1] < 1e-12);
        assert!(r.off_diagonal_residual < 1e-12);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn transposed_swap_moves_weight() {
        let t = transpose_strategy(&ideal_qubit_strategy()).unwrap();
        let r = swap_isometry(&t, &SwapOptions::default()).unwrap();
        assert!((r.extracted_fidelity - 1.0).abs() < 1e-12);
        let w = r.junk.weights();
        assert!(w[0] < 1e-12 && (w[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swap_tolerates_junk_register() {
        let junk = StateVector::from_real(&[0.5, 0.5, 0.5, 0.5], vec![Factor::new("J", 4)]).unwrap();
        let e = with_alice_junk(&ideal_qubit_strategy(), &junk).unwrap();
        let r = swap_isometry(&e, &SwapOptions::default()).unwrap();
        assert!((r.extracted_fidelity - 1.0).abs() < 1e-12);
        assert!((r.junk.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swap_cap_and_warning() {
        let opts = SwapOptions {
            max_qubits: 5,
            ..SwapOptions::default()
        };
        assert!(matches!(
            swap_isometry(&ideal_qubit_strategy(), &opts),
            Err(Error::CapExceeded { required: 6, cap: 5 })
        ));
        let s = ideal_qubit_strategy();
        let mut al: Vec<ComplexMatrix> = (0..6).map(|x| s.alice.observable(x).unwrap()).collect();
        al[1] = al[1].scale_real(-1.0);
        let ch: Vec<ComplexMatrix> = (0..3).map(|z| s.charlie.observable(z).unwrap()).collect();
        let r = swap_isometry(&strategy_with_observables(&ch, &al), &SwapOptions::default()).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn operator_actions_ideal_and_transposed() {
        let opts = SwapOptions::default();
        let r = verify_operator_actions(&ideal_qubit_strategy(), &opts).unwrap();
        assert!(r.max_residual() < 1e-12, "{r:?}");
        assert!(r.y_without_control < 1e-12);
        let t = transpose_strategy(&ideal_qubit_strategy()).unwrap();
        let rt = verify_operator_actions(&t, &opts).unwrap();
        assert!(rt.max_residual() < 1e-12, "{rt:?}");
        assert!((rt.y_without_control - 2.0).abs() < 1e-12);
    }
}
