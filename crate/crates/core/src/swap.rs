//! Matrix-free simulation of the swap-isometry circuit and extraction of the
//! junk state it leaves behind.
//!
//! The register is the strategy's own factors followed by four auxiliary
//! qubit blocks of `n` qubits each, in the order C″₁…C″ₙ, A″₁…A″ₙ, C′₁…C′ₙ,
//! A′₁…A′ₙ, all starting in `|0⟩`.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::objects::Strategy;
use crate::tensor::{
    apply_controlled_in_place, apply_local_in_place, ComplexMatrix, Factor, StateVector, C64, I, ZERO,
};

/// Default cap on the number of qubits of the simulated circuit register.
pub const DEFAULT_MAX_QUBITS: usize = 24;

/// Environment variable that overrides [`DEFAULT_MAX_QUBITS`].
pub const MAX_QUBITS_ENV: &str = "PAULI_SELFTEST_MAX_QUBITS";

#[derive(Clone, Debug, PartialEq)]
pub struct SwapOptions {
    /// Bell-value deficit above which a warning is attached to the result.
    pub epsilon_warning: f64,
    pub max_qubits: usize,
}

impl Default for SwapOptions {
    fn default() -> Self {
        SwapOptions {
            epsilon_warning: 1e-6,
            max_qubits: DEFAULT_MAX_QUBITS,
        }
    }
}

impl SwapOptions {
    /// Defaults, with the qubit cap read from `PAULI_SELFTEST_MAX_QUBITS` when set.
    pub fn from_env() -> Self {
        let mut o = Self::default();
        if let Some(cap) = std::env::var(MAX_QUBITS_ENV).ok().and_then(|v| v.trim().parse().ok()) {
            o.max_qubits = cap;
        }
        o
    }
}

/// Operators used for one site: Charlie's on the whole Charlie space and
/// Alice's regularized ones on the whole Alice space.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteOperators {
    pub z_c: ComplexMatrix,
    pub x_c: ComplexMatrix,
    pub y_c: ComplexMatrix,
    pub z_a: ComplexMatrix,
    pub x_a: ComplexMatrix,
    pub y_a: ComplexMatrix,
}

/// Components `|ξ_q̄⟩` on the original systems, indexed by the control
/// bitstring `q̄` read big-endian over sites.
#[derive(Clone, Debug, PartialEq)]
pub struct JunkDecomposition {
    pub sites: usize,
    pub components: Vec<StateVector>,
}

impl JunkDecomposition {
    pub fn label(&self, q: usize) -> String {
        (0..self.sites)
            .map(|k| if (q >> (self.sites - 1 - k)) & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.norm()).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.norm().powi(2)).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights().iter().sum()
    }

    /// Total weight on bitstrings other than all-zeros and all-ones.
    pub fn weight_outside_uniform(&self) -> f64 {
        let all = (1usize << self.sites) - 1;
        self.weights()
            .iter()
            .enumerate()
            .filter(|(q, _)| *q != 0 && *q != all)
            .map(|(_, w)| w)
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct CircuitOutput {
    pub state: StateVector,
    pub junk: JunkDecomposition,
    /// Squared norm of the `⟨q̄ r̄|` projections with `q̄ ≠ r̄`.
    pub off_diagonal_residual: f64,
    pub site_fidelities: Vec<f64>,
}

fn hadamard() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, -1.0])
        .expect("2x2")
        .scale_real(FRAC_1_SQRT_2)
}

/// Number of qubits needed to hold `dim` amplitudes.
pub fn qubits_for(dim: usize) -> usize {
    (usize::BITS - dim.saturating_sub(1).leading_zeros()) as usize
}

/// Runs the circuit on `input ⊗ |0…0⟩`, where `input` lives on the strategy's factors.
pub fn run_circuit(s: &Strategy, ops: &[SiteOperators], input: &StateVector, max_qubits: usize) -> Result<StateVector> {
    let n = ops.len();
    let required = qubits_for(input.dim()) + 4 * n;
    if required > max_qubits {
        return Err(Error::CapExceeded {
            required,
            cap: max_qubits,
        });
    }
    let base = input.factors().len();
    let mut aux = Vec::with_capacity(4 * n);
    for prefix in ["C''", "A''", "C'", "A'"] {
        aux.extend((1..=n).map(|i| Factor::qubit(format!("{prefix}{i}"))));
    }
    let zeros = StateVector::basis(aux, 0)?;
    let mut v = input.tensor(&zeros);
    let cs = s.charlie_positions();
    let al = s.alice_positions();
    let h = hadamard();
    for (i, op) in ops.iter().enumerate() {
        let (c2, a2, c1, a1) = (base + i, base + n + i, base + 2 * n + i, base + 3 * n + i);
        for q in [c2, a2, c1, a1] {
            apply_local_in_place(&h, &[q], &mut v)?;
        }
        apply_controlled_in_place(&op.z_c, c1, &cs, &mut v)?;
        apply_controlled_in_place(&op.z_a, a1, &al, &mut v)?;
        apply_local_in_place(&h, &[c1], &mut v)?;
        apply_local_in_place(&h, &[a1], &mut v)?;
        apply_controlled_in_place(&op.x_c, c1, &cs, &mut v)?;
        apply_controlled_in_place(&op.x_a, a1, &al, &mut v)?;
        // i·Y·X: X acts first
        let yx_c = (&op.y_c * &op.x_c).scale(I);
        let yx_a = (&op.y_a * &op.x_a).scale(I);
        apply_controlled_in_place(&yx_c, c2, &cs, &mut v)?;
        apply_controlled_in_place(&yx_a, a2, &al, &mut v)?;
        apply_local_in_place(&h, &[c2], &mut v)?;
        apply_local_in_place(&h, &[a2], &mut v)?;
    }
    Ok(v)
}

/// Projects the circuit output onto `⟨q̄|_{C″}⟨r̄|_{A″}` and `⟨Φ⁺|^{⊗n}` on the
/// C′A′ pairs. Returns the `(q̄, r̄)` blocks, row-major over `q̄`.
fn project_blocks(out: &StateVector, n: usize) -> Vec<Vec<C64>> {
    let d = 1usize << n;
    let aux_dim = 1usize << (4 * n);
    let in_dim = out.dim() / aux_dim;
    let scale = (0.5f64).powf(n as f64 / 2.0);
    let amps = out.amplitudes();
    let mut blocks = vec![vec![ZERO; in_dim]; d * d];
    for idx in 0..in_dim {
        let row = &amps[idx * aux_dim..(idx + 1) * aux_dim];
        for q in 0..d {
            for r in 0..d {
                let head = (q * d + r) * d * d;
                let mut acc = ZERO;
                for b in 0..d {
                    acc += row[head + b * d + b];
                }
                blocks[q * d + r][idx] = acc * scale;
            }
        }
    }
    blocks
}

/// Runs the circuit on the strategy's state and extracts the junk.
pub fn swap_and_extract(s: &Strategy, ops: &[SiteOperators], max_qubits: usize) -> Result<CircuitOutput> {
    let n = ops.len();
    let out = run_circuit(s, ops, &s.state, max_qubits)?;
    let factors = s.state.factors().to_vec();
    let blocks = project_blocks(&out, n);
    let d = 1usize << n;
    let mut components = Vec::with_capacity(d);
    let mut off = 0.0;
    for q in 0..d {
        for r in 0..d {
            let b = &blocks[q * d + r];
            if q == r {
                components.push(StateVector::new(b.clone(), factors.clone())?);
            } else {
                off += b.iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
        }
    }
    let base = factors.len();
    let phi = [FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2].map(|x| C64::new(x, 0.0));
    let site_fidelities = (0..n)
        .map(|i| {
            let rho = out.reduced(&[base + 2 * n + i, base + 3 * n + i])?;
            Ok(rho.expectation(&phi)?.re)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CircuitOutput {
        state: out,
        junk: JunkDecomposition { sites: n, components },
        off_diagonal_residual: off,
        site_fidelities,
    })
}

/// `Σ_q̄ s(q̄) |ξ_q̄⟩|q̄⟩_{C″}|q̄⟩_{A″} ⊗ (σ ⊗ I)|Φ⁺⟩_{C′A′}` for a single site,
/// with `sign(q̄)` the optional `σz^{C″}` control factor.
pub(crate) fn single_site_target(junk: &JunkDecomposition, sigma: &ComplexMatrix, controlled_sign: bool) -> Vec<C64> {
    let phi = [FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2].map(|x| C64::new(x, 0.0));
    let mut pair = [ZERO; 4];
    for c in 0..2 {
        for a in 0..2 {
            pair[c * 2 + a] = (0..2).map(|k| sigma[(c, k)] * phi[k * 2 + a]).sum();
        }
    }
    let in_dim = junk.components[0].dim();
    let mut out = vec![ZERO; in_dim * 16];
    for (q, comp) in junk.components.iter().enumerate() {
        let s = if controlled_sign && q == 1 { -1.0 } else { 1.0 };
        for (idx, amp) in comp.amplitudes().iter().enumerate() {
            for (p, pv) in pair.iter().enumerate() {
                out[idx * 16 + (q * 2 + q) * 4 + p] = amp * pv * s;
            }
        }
    }
    out
}
