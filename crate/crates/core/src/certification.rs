//! Four-party entanglement certification: Charlie and Daisy self-test the
//! auxiliary states that feed Alice's and Bob's Bell-state measurements, and
//! a witness of the target state is evaluated from the resulting correlations.
//!
//! Factor order of the network is `C, A₀, A, B, B₀, D`. Alice's effects act on
//! `A₀ ⊗ A` and Bob's on `B ⊗ B₀`. Outcome labels of the Pauli families are
//! big-endian bitstrings with bit 0 meaning `+`, and settings are base-3
//! strings over the sites with digits 0, 1, 2 for σz, σx, σy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objects::{
    digits, isotropic_state, max_entangled_projector, outcome_sign, pauli_projector, product_family, Effect,
    MeasurementFamily, Pauli, Setting,
};
use crate::random::{random_unit_vector, seeded_rng};
use crate::tensor::{eigh, kron, kron_all, kron_vec, partial_trace, ComplexMatrix, C64, ZERO};

/// Largest number of target qubit pairs accepted by the network constructors.
pub const MAX_NETWORK_SITES: usize = 3;

/// Tolerance for the state checks of a network.
const STATE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkStrategy {
    pub n: usize,
    /// State on `C ⊗ A₀`.
    pub aux_ca: ComplexMatrix,
    /// State on `A ⊗ B`.
    pub target_ab: ComplexMatrix,
    /// State on `B₀ ⊗ D`.
    pub aux_bd: ComplexMatrix,
    pub charlie: MeasurementFamily,
    pub alice: MeasurementFamily,
    pub bob: MeasurementFamily,
    pub daisy: MeasurementFamily,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    CharlieToAlice,
    DaisyToBob,
}

/// Sub-normalized conditional states, `states[z][c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeredEnsemble {
    pub states: Vec<Vec<ComplexMatrix>>,
}

impl SteeredEnsemble {
    pub fn get(&self, c: usize, z: usize) -> Option<&ComplexMatrix> {
        self.states.get(z).and_then(|s| s.get(c))
    }

    /// Largest deviation between the marginals `Σ_c τ_{c|z}` of different settings.
    pub fn no_signalling_defect(&self) -> f64 {
        let marginals: Vec<ComplexMatrix> = self
            .states
            .iter()
            .map(|row| {
                let mut acc = ComplexMatrix::zeros(row[0].rows(), row[0].cols());
                for t in row {
                    acc += t;
                }
                acc
            })
            .collect();
        marginals
            .iter()
            .skip(1)
            .map(|m| m.max_abs_diff(&marginals[0]))
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all members.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for t in self.states.iter().flatten() {
            lo = lo.min(eigh(t)?.0[0]);
        }
        Ok(lo)
    }
}

fn check_sites(n: usize) -> Result<usize> {
    if n == 0 || n > MAX_NETWORK_SITES {
        return Err(Error::OutOfRange {
            name: "n",
            value: n as f64,
            range: "1..=3",
        });
    }
    Ok(1usize << n)
}

fn check_state(name: &str, rho: &ComplexMatrix, dim: usize) -> Result<()> {
    if !rho.is_square() || rho.rows() != dim {
        return Err(Error::Shape(format!(
            "{name} is {}x{}, expected {dim}x{dim}",
            rho.rows(),
            rho.cols()
        )));
    }
    if !rho.is_hermitian(STATE_TOL) {
        return Err(Error::Shape(format!("{name} is not Hermitian")));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
        return Err(Error::Shape(format!("{name} has trace {tr}")));
    }
    let lo = eigh(rho)?.0[0];
    if lo < -STATE_TOL {
        return Err(Error::Shape(format!("{name} has eigenvalue {lo}")));
    }
    Ok(())
}

/// Product Pauli measurements on `n` qubits: `3^n` settings, `2^n` outcomes each.
pub fn pauli_family(n: usize) -> Result<MeasurementFamily> {
    let site = vec![Pauli::Z.matrix(), Pauli::X.matrix(), Pauli::Y.matrix()];
    MeasurementFamily::new(product_family(&vec![site; n], &["Z", "X", "Y"]))
}

/// The single setting `⋆`: outcome 0 is `|Φ_d⟩⟨Φ_d|` on two `d`-dim factors, outcome 1 its complement.
pub fn star_family(d: usize) -> Result<MeasurementFamily> {
    let phi = max_entangled_projector(d);
    let rest = &ComplexMatrix::identity(d * d) - &phi;
    MeasurementFamily::new(vec![Setting {
        label: "star".into(),
        effects: vec![
            Effect {
                label: "+".into(),
                operator: phi,
            },
            Effect {
                label: "-".into(),
                operator: rest,
            },
        ],
    }])
}

impl NetworkStrategy {
    pub fn local_dim(&self) -> usize {
        1 << self.n
    }

    /// Checks dimensions, states and measurement completeness.
    pub fn validate(&self) -> Result<()> {
        let d = check_sites(self.n)?;
        check_state("aux_ca", &self.aux_ca, d * d)?;
        check_state("target_ab", &self.target_ab, d * d)?;
        check_state("aux_bd", &self.aux_bd, d * d)?;
        for (name, fam, dim) in [
            ("charlie", &self.charlie, d),
            ("alice", &self.alice, d * d),
            ("bob", &self.bob, d * d),
            ("daisy", &self.daisy, d),
        ] {
            if fam.dim() != dim {
                return Err(Error::Shape(format!(
                    "{name} acts on dimension {}, expected {dim}",
                    fam.dim()
                )));
            }
            fam.validate(STATE_TOL)?;
        }
        Ok(())
    }

    /// The same network with Charlie's and/or Daisy's effects transposed.
    pub fn with_transposed(&self, charlie: bool, daisy: bool) -> NetworkStrategy {
        let mut out = self.clone();
        if charlie {
            out.charlie = self.charlie.transpose();
        }
        if daisy {
            out.daisy = self.daisy.transpose();
        }
        out
    }
}

/// Network with `Φ⁺^{⊗n}` auxiliaries and Pauli measurements for Charlie and Daisy.
pub fn ideal_network(target_ab: ComplexMatrix, n: usize) -> Result<NetworkStrategy> {
    noisy_network(target_ab, n, 1.0)
}

/// Network whose auxiliary states are isotropic with visibility `eta`.
pub fn noisy_network(target_ab: ComplexMatrix, n: usize, eta: f64) -> Result<NetworkStrategy> {
    let d = check_sites(n)?;
    let aux = isotropic_state(d, eta)?;
    let paulis = pauli_family(n)?;
    let star = star_family(d)?;
    let ns = NetworkStrategy {
        n,
        aux_ca: aux.clone(),
        target_ab,
        aux_bd: aux,
        charlie: paulis.clone(),
        alice: star.clone(),
        bob: star,
        daisy: paulis,
    };
    ns.validate()?;
    Ok(ns)
}

/// `τ_{c|z} = tr_C[(M_{c|z} ⊗ I) ρ_{CA₀}]`, or the mirror image on Daisy's side.
pub fn steered_state(ns: &NetworkStrategy, side: Side, setting: usize, outcome: usize) -> Result<ComplexMatrix> {
    let d = ns.local_dim();
    let id = ComplexMatrix::identity(d);
    match side {
        Side::CharlieToAlice => {
            let m = kron(ns.charlie.effect(setting, outcome)?, &id);
            Ok(partial_trace(&(&m * &ns.aux_ca), &[1], &[d, d])?)
        }
        Side::DaisyToBob => {
            let m = kron(&id, ns.daisy.effect(setting, outcome)?);
            Ok(partial_trace(&(&m * &ns.aux_bd), &[0], &[d, d])?)
        }
    }
}

pub fn steered_states(ns: &NetworkStrategy, side: Side) -> Result<SteeredEnsemble> {
    let fam = match side {
        Side::CharlieToAlice => &ns.charlie,
        Side::DaisyToBob => &ns.daisy,
    };
    let states = fam
        .settings()
        .iter()
        .enumerate()
        .map(|(z, s)| (0..s.effects.len()).map(|c| steered_state(ns, side, z, c)).collect())
        .collect::<Result<_>>()?;
    Ok(SteeredEnsemble { states })
}

/// Operator on `A` that Alice's effect `(x, a)` induces given the steered state on `A₀`.
fn alice_effective(ns: &NetworkStrategy, x: usize, a: usize, tau: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = ns.local_dim();
    let m = ns.alice.effect(x, a)?;
    let prod = m * &kron(tau, &ComplexMatrix::identity(d));
    Ok(partial_trace(&prod, &[1], &[d, d])?)
}

fn bob_effective(ns: &NetworkStrategy, y: usize, b: usize, tau: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = ns.local_dim();
    let m = ns.bob.effect(y, b)?;
    let prod = m * &kron(&ComplexMatrix::identity(d), tau);
    Ok(partial_trace(&prod, &[0], &[d, d])?)
}

/// `tr[(A ⊗ B) ρ]` without forming the Kronecker product.
fn product_expectation(a: &ComplexMatrix, b: &ComplexMatrix, rho: &ComplexMatrix) -> C64 {
    let (da, db) = (a.rows(), b.rows());
    let dim = da * db;
    let mut acc = ZERO;
    for i in 0..da {
        for j in 0..da {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..db {
                for l in 0..db {
                    acc += aij * b[(k, l)] * rho.data()[(j * db + l) * dim + i * db + k];
                }
            }
        }
    }
    acc
}

/// Born-rule value of `p(c, a, b, d | z, x, y, w)`, computed for this query alone.
#[allow(clippy::too_many_arguments)]
pub fn network_probability(
    ns: &NetworkStrategy,
    c: usize,
    z: usize,
    a: usize,
    x: usize,
    b: usize,
    y: usize,
    d: usize,
    w: usize,
) -> Result<f64> {
    let tau_a = steered_state(ns, Side::CharlieToAlice, z, c)?;
    let tau_b = steered_state(ns, Side::DaisyToBob, w, d)?;
    let ea = alice_effective(ns, x, a, &tau_a)?;
    let eb = bob_effective(ns, y, b, &tau_b)?;
    Ok(product_expectation(&ea, &eb, &ns.target_ab).re)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSettings {
    pub z: usize,
    pub x: usize,
    pub y: usize,
    pub w: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkOutcomes {
    pub c: usize,
    pub a: usize,
    pub b: usize,
    pub d: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub settings: NetworkSettings,
    pub outcomes: NetworkOutcomes,
    pub p: f64,
}

/// Every `p(c, a, b, d | z, x, y, w)`, settings-major.
pub fn network_correlations(ns: &NetworkStrategy) -> Result<Vec<CorrelationRecord>> {
    let alice_side = steered_states(ns, Side::CharlieToAlice)?;
    let bob_side = steered_states(ns, Side::DaisyToBob)?;
    let mut out = Vec::new();
    for (z, taus_a) in alice_side.states.iter().enumerate() {
        for x in 0..ns.alice.len() {
            for y in 0..ns.bob.len() {
                for (w, taus_b) in bob_side.states.iter().enumerate() {
                    for (c, ta) in taus_a.iter().enumerate() {
                        for a in 0..ns.alice.setting(x)?.effects.len() {
                            let ea = alice_effective(ns, x, a, ta)?;
                            for b in 0..ns.bob.setting(y)?.effects.len() {
                                for (d, tb) in taus_b.iter().enumerate() {
                                    let eb = bob_effective(ns, y, b, tb)?;
                                    out.push(CorrelationRecord {
                                        settings: NetworkSettings { z, x, y, w },
                                        outcomes: NetworkOutcomes { c, a, b, d },
                                        p: product_expectation(&ea, &eb, &ns.target_ab).re,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One coefficient `ω_{cd}^{zw}`. Settings and outcomes are indexed as in the
/// Pauli families: base-3 setting strings and big-endian outcome bitstrings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaEntry {
    pub c: usize,
    pub d: usize,
    pub z: usize,
    pub w: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub n: usize,
    pub matrix: ComplexMatrix,
    pub omega: Vec<OmegaEntry>,
}

/// `⊗_l ½(I + s(c_l) σ_{z_l})` for setting string `z` and outcome string `c`.
pub fn product_projector(n: usize, z: usize, c: usize) -> Result<ComplexMatrix> {
    let zs = digits(z, 3, n);
    let cs = digits(c, 2, n);
    let parts = zs
        .iter()
        .zip(&cs)
        .map(|(&zl, &cl)| pauli_projector(outcome_sign(cl), zl + 1))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&ComplexMatrix> = parts.iter().collect();
    Ok(kron_all(&refs))
}

fn projector_table(n: usize) -> Result<Vec<Vec<ComplexMatrix>>> {
    (0..3usize.pow(n as u32))
        .map(|z| (0..1usize << n).map(|c| product_projector(n, z, c)).collect())
        .collect()
}

impl Witness {
    /// `Σ ω π_{c|z} ⊗ π_{d|w}`
    pub fn reconstruct(n: usize, omega: &[OmegaEntry]) -> Result<ComplexMatrix> {
        check_sites(n)?;
        let table = projector_table(n)?;
        let d = 1usize << n;
        let mut out = ComplexMatrix::zeros(d * d, d * d);
        for e in omega {
            let (pa, pb) = match (
                table.get(e.z).and_then(|r| r.get(e.c)),
                table.get(e.w).and_then(|r| r.get(e.d)),
            ) {
                (Some(pa), Some(pb)) => (pa, pb),
                _ => {
                    return Err(Error::Witness(format!(
                        "entry (c={}, d={}, z={}, w={}) out of range for n = {n}",
                        e.c, e.d, e.z, e.w
                    )))
                }
            };
            out += &kron(pa, pb).scale_real(e.value);
        }
        Ok(out)
    }

    /// Witness whose matrix is the reconstruction of `omega`.
    pub fn from_omega(n: usize, omega: Vec<OmegaEntry>) -> Result<Witness> {
        let matrix = Self::reconstruct(n, &omega)?;
        Ok(Witness { n, matrix, omega })
    }

    pub fn reconstruction_error(&self) -> Result<f64> {
        Ok(Self::reconstruct(self.n, &self.omega)?.max_abs_diff(&self.matrix))
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if !self.matrix.is_hermitian(tol) {
            return Err(Error::Witness("matrix is not Hermitian".into()));
        }
        let err = self.reconstruction_error()?;
        if err > tol {
            return Err(Error::Witness(format!("omega reconstructs the matrix only to {err:e}")));
        }
        Ok(())
    }

    /// Entry with the given labels, zero when absent.
    pub fn coefficient(&self, c: usize, d: usize, z: usize, w: usize) -> f64 {
        self.omega
            .iter()
            .filter(|e| (e.c, e.d, e.z, e.w) == (c, d, z, w))
            .map(|e| e.value)
            .sum()
    }
}

fn pauli_letter(k: usize) -> ComplexMatrix {
    match k {
        0 => ComplexMatrix::identity(2),
        1 => Pauli::Z.matrix(),
        2 => Pauli::X.matrix(),
        _ => Pauli::Y.matrix(),
    }
}

/// Expands `w` in Pauli strings and rewrites each `σ` as `π₊ − π₋`, sending the
/// identity through the σz setting. Coefficients below `1e-14·max(1, ‖w‖)` are dropped.
pub fn decompose_witness(w: &ComplexMatrix, n: usize) -> Result<Witness> {
    let d = check_sites(n)?;
    if !w.is_square() || w.rows() != d * d {
        return Err(Error::Witness(format!(
            "matrix is {}x{}, expected {0}x{0}",
            w.rows(),
            d * d
        )));
    }
    if !w.is_hermitian(crate::tensor::HERMITIAN_TOL) {
        return Err(Error::Witness(format!(
            "matrix is not Hermitian (defect {:e})",
            w.hermiticity_defect()
        )));
    }
    let strings = 4usize.pow(n as u32);
    let side: Vec<ComplexMatrix> = (0..strings)
        .map(|u| {
            let parts: Vec<ComplexMatrix> = digits(u, 4, n).into_iter().map(pauli_letter).collect();
            let refs: Vec<&ComplexMatrix> = parts.iter().collect();
            kron_all(&refs)
        })
        .collect();
    // setting string and per-outcome sign for each Pauli string
    let routing: Vec<(usize, Vec<f64>)> = (0..strings)
        .map(|u| {
            let letters = digits(u, 4, n);
            let z = letters.iter().fold(0, |acc, &k| acc * 3 + k.saturating_sub(1));
            let signs = (0..d)
                .map(|c| {
                    let bits = digits(c, 2, n);
                    letters
                        .iter()
                        .zip(&bits)
                        .filter(|(&k, _)| k != 0)
                        .map(|(_, &b)| outcome_sign(b) as f64)
                        .product()
                })
                .collect();
            (z, signs)
        })
        .collect();
    let settings = 3usize.pow(n as u32);
    let width = settings * d;
    let mut dense = vec![0.0; width * width];
    let norm = 1.0 / (d * d) as f64;
    let wd = w.data();
    let dim = d * d;
    for (u, su) in side.iter().enumerate() {
        for (v, sv) in side.iter().enumerate() {
            // tr[W (σu ⊗ σv)], both strings monomial
            let mut t = ZERO;
            for i in 0..dim {
                let (ia, ib) = (i / d, i % d);
                for ja in 0..d {
                    let a = su[(ja, ia)];
                    if a == ZERO {
                        continue;
                    }
                    for jb in 0..d {
                        let b = sv[(jb, ib)];
                        if b == ZERO {
                            continue;
                        }
                        t += wd[i * dim + ja * d + jb] * a * b;
                    }
                }
            }
            let t = t.re * norm;
            if t == 0.0 {
                continue;
            }
            let (zu, fu) = &routing[u];
            let (zv, fv) = &routing[v];
            for (c, sc) in fu.iter().enumerate() {
                for (dd, sd) in fv.iter().enumerate() {
                    dense[(zu * d + c) * width + zv * d + dd] += t * sc * sd;
                }
            }
        }
    }
    let cutoff = 1e-14 * w.max_abs().max(1.0);
    let mut omega = Vec::new();
    for z in 0..settings {
        for c in 0..d {
            for ww in 0..settings {
                for dd in 0..d {
                    let value = dense[(z * d + c) * width + ww * d + dd];
                    if value.abs() > cutoff {
                        omega.push(OmegaEntry {
                            c,
                            d: dd,
                            z,
                            w: ww,
                            value,
                        });
                    }
                }
            }
        }
    }
    Ok(Witness {
        n,
        matrix: w.clone(),
        omega,
    })
}

/// `2(I − d|Φ_d⟩⟨Φ_d|)` for `d = 2^n`, negative on the isotropic states with
/// fidelity above `1/d`. At `n = 1` this is `I − XX + YY − ZZ`.
pub fn isotropic_witness(n: usize) -> Result<Witness> {
    let d = check_sites(n)?;
    let phi = max_entangled_projector(d).scale_real(d as f64);
    let w = (&ComplexMatrix::identity(d * d) - &phi).scale_real(2.0);
    decompose_witness(&w, n)
}

/// `ZZ + YY + XX + I`, the singlet-fidelity witness (negative on `Ψ⁻`).
pub fn singlet_witness() -> Result<Witness> {
    let mut w = ComplexMatrix::identity(4);
    for p in [Pauli::Z, Pauli::Y, Pauli::X] {
        w += &kron(&p.matrix(), &p.matrix());
    }
    decompose_witness(&w, 1)
}

/// `Σ ω Ã_{c|z} ⊗ B̃_{d|w}` for Alice and Bob both answering `+` to `⋆`.
/// The certification value of any target is `tr[W_eff ρ]`.
pub fn effective_witness(ns: &NetworkStrategy, wit: &Witness) -> Result<ComplexMatrix> {
    if wit.n != ns.n {
        return Err(Error::Witness(format!(
            "witness is for n = {}, network has n = {}",
            wit.n, ns.n
        )));
    }
    let alice_side = steered_states(ns, Side::CharlieToAlice)?;
    let bob_side = steered_states(ns, Side::DaisyToBob)?;
    let lookup = |e: &OmegaEntry| -> Result<(&ComplexMatrix, &ComplexMatrix)> {
        match (alice_side.get(e.c, e.z), bob_side.get(e.d, e.w)) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::Witness(format!(
                "entry (c={}, d={}, z={}, w={}) has no matching measurement",
                e.c, e.d, e.z, e.w
            ))),
        }
    };
    // group by Alice's label so each Kronecker product is formed once
    let mut groups: Vec<((usize, usize), ComplexMatrix)> = Vec::new();
    for e in &wit.omega {
        let (_, tb) = lookup(e)?;
        let eb = bob_effective(ns, 0, 0, tb)?.scale_real(e.value);
        match groups.iter_mut().find(|(k, _)| *k == (e.z, e.c)) {
            Some((_, acc)) => *acc += &eb,
            None => groups.push(((e.z, e.c), eb)),
        }
    }
    let d = ns.local_dim();
    let mut out = ComplexMatrix::zeros(d * d, d * d);
    for ((z, c), bsum) in &groups {
        let ta = alice_side.get(*c, *z).expect("looked up above");
        out += &kron(&alice_effective(ns, 0, 0, ta)?, bsum);
    }
    Ok(out)
}

/// `I = Σ ω p(c, +, +, d | z, ⋆, ⋆, w)`
pub fn certification_value(ns: &NetworkStrategy, wit: &Witness) -> Result<f64> {
    let weff = effective_witness(ns, wit)?;
    let d = ns.local_dim();
    let mut acc = ZERO;
    for i in 0..d * d {
        for j in 0..d * d {
            acc += weff[(i, j)] * ns.target_ab[(j, i)];
        }
    }
    Ok(acc.re)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchBudget {
    /// Random product states drawn before refinement.
    pub samples: usize,
    /// Best candidates handed to coordinate descent.
    pub restarts: usize,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            samples: 10_000,
            restarts: 8,
            max_sweeps: 400,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparableMinimum {
    pub min_value: f64,
    pub alice: Vec<C64>,
    pub bob: Vec<C64>,
    /// Number of product states evaluated, refinement included.
    pub evaluations: usize,
}

impl SeparableMinimum {
    pub fn describe(&self) -> String {
        let fmt = |v: &[C64]| {
            v.iter()
                .map(|z| format!("{:.6}{:+.6}i", z.re, z.im))
                .collect::<Vec<_>>()
                .join(", ")
        };
        format!("|a> = ({}), |b> = ({})", fmt(&self.alice), fmt(&self.bob))
    }
}

/// Unit vector from `d−1` hyperspherical angles followed by `d−1` relative phases.
fn vector_from_angles(angles: &[f64], d: usize) -> Vec<C64> {
    let (mags, phases) = angles.split_at(d - 1);
    let mut out = Vec::with_capacity(d);
    let mut prefix = 1.0;
    for k in 0..d {
        let r = if k + 1 < d { prefix * mags[k].cos() } else { prefix };
        if k + 1 < d {
            prefix *= mags[k].sin();
        }
        out.push(if k == 0 {
            C64::new(r, 0.0)
        } else {
            C64::from_polar(r, phases[k - 1])
        });
    }
    out
}

fn angles_from_vector(v: &[C64]) -> Vec<f64> {
    let d = v.len();
    let mut mags = Vec::with_capacity(d - 1);
    for k in 0..d - 1 {
        let tail = v[k + 1..].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        mags.push(tail.atan2(v[k].norm()));
    }
    let phase0 = v[0].arg();
    mags.extend(v[1..].iter().map(|z| z.arg() - phase0));
    mags
}

fn product_value(weff: &ComplexMatrix, a: &[C64], b: &[C64]) -> f64 {
    weff.expectation(&kron_vec(a, b))
        .expect("dimensions fixed by the network")
        .re
}

/// Minimum of the certification value over pure product targets.
///
/// Random product states (plus a Bloch-sphere grid for single qubits) seed a
/// coordinate descent over the angle parameterization of both sides.
pub fn separable_minimum(wit: &Witness, ns: &NetworkStrategy, budget: &SearchBudget) -> Result<SeparableMinimum> {
    let weff = effective_witness(ns, wit)?;
    let d = ns.local_dim();
    let mut rng = seeded_rng(budget.seed);
    let mut candidates: Vec<(f64, Vec<C64>, Vec<C64>)> = Vec::new();
    let mut evaluations = 0usize;
    let consider = |a: Vec<C64>, b: Vec<C64>, cands: &mut Vec<(f64, Vec<C64>, Vec<C64>)>| {
        let f = product_value(&weff, &a, &b);
        cands.push((f, a, b));
    };
    if d == 2 {
        let grid: Vec<Vec<C64>> = (0..=6)
            .flat_map(|i| {
                let theta = std::f64::consts::PI * i as f64 / 6.0;
                (0..8).map(move |j| {
                    let phi = std::f64::consts::PI * j as f64 / 4.0;
                    vec![
                        C64::new((theta / 2.0).cos(), 0.0),
                        C64::from_polar((theta / 2.0).sin(), phi),
                    ]
                })
            })
            .collect();
        for a in &grid {
            for b in &grid {
                consider(a.clone(), b.clone(), &mut candidates);
            }
        }
    }
    for _ in 0..budget.samples {
        let a = random_unit_vector(&mut rng, d);
        let b = random_unit_vector(&mut rng, d);
        consider(a, b, &mut candidates);
    }
    evaluations += candidates.len();
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0));
    candidates.truncate(budget.restarts.max(1));

    let np = 2 * (d - 1);
    let eval = |p: &[f64]| {
        product_value(
            &weff,
            &vector_from_angles(&p[..np], d),
            &vector_from_angles(&p[np..], d),
        )
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (f0, a, b) in &candidates {
        let mut p = angles_from_vector(a);
        p.extend(angles_from_vector(b));
        let mut f = *f0;
        let mut step = 0.25;
        for _ in 0..budget.max_sweeps {
            let mut improved = false;
            for k in 0..p.len() {
                for s in [step, -step] {
                    let old = p[k];
                    p[k] = old + s;
                    let g = eval(&p);
                    evaluations += 1;
                    if g < f {
                        f = g;
                        improved = true;
                        break;
                    }
                    p[k] = old;
                }
            }
            if !improved {
                step *= 0.5;
                if step < 1e-10 {
                    break;
                }
            }
        }
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, p));
        }
    }
    let (min_value, p) = best.expect("at least one candidate");
    Ok(SeparableMinimum {
        min_value,
        alice: vector_from_angles(&p[..np], d),
        bob: vector_from_angles(&p[np..], d),
        evaluations,
    })
}

/// Random product target, used by tests and the command line to probe witnesses.
pub fn random_product_target<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let a = random_unit_vector(rng, d);
    let b = random_unit_vector(rng, d);
    ComplexMatrix::projector(&kron_vec(&a, &b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objects::werner_state;
    use crate::random::{random_density, random_hermitian};

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn ideal_network_shapes() {
        let ns = ideal_network(werner_state(1.0).unwrap(), 1).unwrap();
        assert_eq!(ns.charlie.len(), 3);
        assert_eq!(ns.alice.len(), 1);
        // setting index 1 is σx
        let plus_x = ns.charlie.effect(1, 0).unwrap();
        assert!(plus_x.max_abs_diff(&pauli_projector(1, 2).unwrap()) < 1e-15);
        let (vals, _) = eigh(ns.alice.effect(0, 0).unwrap()).unwrap();
        let rank = vals.iter().filter(|v| **v > 0.5).count();
        assert_eq!(rank, 1);
    }

    #[test]
    fn example_probability() {
        let ns = ideal_network(werner_state(1.0).unwrap(), 1).unwrap();
        close(
            network_probability(&ns, 0, 0, 0, 0, 0, 0, 0, 0).unwrap(),
            1.0 / 32.0,
            1e-14,
        );
    }

    #[test]
    fn probabilities_normalize() {
        let mut rng = seeded_rng(3);
        let ns = ideal_network(random_density(&mut rng, 4), 1).unwrap();
        for z in 0..3 {
            for w in 0..3 {
                let mut total = 0.0;
                for c in 0..2 {
                    for a in 0..2 {
                        for b in 0..2 {
                            for d in 0..2 {
                                total += network_probability(&ns, c, z, a, 0, b, 0, d, w).unwrap();
                            }
                        }
                    }
                }
                close(total, 1.0, 1e-12);
            }
        }
    }

    #[test]
    fn steered_examples() {
        let ns = ideal_network(werner_state(0.3).unwrap(), 1).unwrap();
        let ens = steered_states(&ns, Side::CharlieToAlice).unwrap();
        let want = ComplexMatrix::diag_real(&[0.5, 0.0]);
        assert!(ens.get(0, 0).unwrap().max_abs_diff(&want) < 1e-15);
        let want = pauli_projector(1, 3).unwrap().scale_real(0.5);
        assert!(ens.get(1, 2).unwrap().max_abs_diff(&want) < 1e-15);
        assert!(ens.no_signalling_defect() < 1e-15);
        assert!(ens.min_eigenvalue().unwrap() > -1e-15);
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        let sum = ens.get(0, 1).unwrap() + ens.get(1, 1).unwrap();
        assert!(sum.max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn identity_decomposes_into_four_entries() {
        let wit = decompose_witness(&ComplexMatrix::identity(4), 1).unwrap();
        assert_eq!(wit.omega.len(), 4);
        for e in &wit.omega {
            assert_eq!((e.z, e.w), (0, 0));
            close(e.value, 1.0, 1e-15);
        }
    }

    #[test]
    fn isotropic_witness_entries() {
        let wit = isotropic_witness(1).unwrap();
        assert_eq!(wit.omega.len(), 10);
        assert!(wit.reconstruction_error().unwrap() <= 1e-12);
        let singlet_form = singlet_witness().unwrap();
        assert_eq!(singlet_form.omega.len(), 10);
        assert!(singlet_form.reconstruction_error().unwrap() <= 1e-12);
        // related by σy on one side
        let y = kron(&ComplexMatrix::identity(2), &Pauli::Y.matrix());
        let conj = &(&y * &singlet_form.matrix) * &y;
        assert!(conj.max_abs_diff(&wit.matrix) < 1e-14);
    }

    #[test]
    fn swap_reconstructs() {
        let mut swap = ComplexMatrix::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            swap[(i, j)] = C64::new(1.0, 0.0);
        }
        let wit = decompose_witness(&swap, 1).unwrap();
        assert!(wit.reconstruction_error().unwrap() < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = ComplexMatrix::identity(4);
        m[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(decompose_witness(&m, 1), Err(Error::Witness(_))));
    }

    #[test]
    fn werner_values() {
        let wit = isotropic_witness(1).unwrap();
        for (p, want) in [(1.0, -0.125), (0.6, -0.05), (0.0, 0.0625)] {
            let ns = ideal_network(werner_state(p).unwrap(), 1).unwrap();
            close(certification_value(&ns, &wit).unwrap(), want, 1e-14);
        }
    }

    #[test]
    fn consistency_two_sites() {
        let mut rng = seeded_rng(9);
        let rho = random_density(&mut rng, 16);
        let w = random_hermitian(&mut rng, 16);
        let wit = decompose_witness(&w, 2).unwrap();
        assert!(wit.reconstruction_error().unwrap() < 1e-12);
        let ns = ideal_network(rho.clone(), 2).unwrap();
        let want = (&w * &rho).trace().re / 256.0;
        close(certification_value(&ns, &wit).unwrap(), want, 1e-12);
    }

    #[test]
    fn arity_mismatch() {
        let ns = ideal_network(ComplexMatrix::identity(16).scale_real(1.0 / 16.0), 2).unwrap();
        let wit = isotropic_witness(1).unwrap();
        assert!(matches!(certification_value(&ns, &wit), Err(Error::Witness(_))));
    }

    #[test]
    fn transposed_network_sees_transposed_witness() {
        let mut rng = seeded_rng(5);
        let w = random_hermitian(&mut rng, 4);
        let wit = decompose_witness(&w, 1).unwrap();
        let ns = ideal_network(random_density(&mut rng, 4), 1)
            .unwrap()
            .with_transposed(true, true);
        let weff = effective_witness(&ns, &wit).unwrap();
        assert!(weff.max_abs_diff(&w.transpose().scale_real(1.0 / 16.0)) < 1e-14);
    }

    #[test]
    fn angle_round_trip() {
        let mut rng = seeded_rng(1);
        for d in [2, 4] {
            let v = random_unit_vector(&mut rng, d);
            let back = vector_from_angles(&angles_from_vector(&v), d);
            let overlap: C64 = v.iter().zip(&back).map(|(a, b)| a.conj() * b).sum();
            close(overlap.norm(), 1.0, 1e-12);
        }
    }

    #[test]
    fn separable_minimum_of_identity_is_constant() {
        let wit = decompose_witness(&ComplexMatrix::identity(4), 1).unwrap();
        let ns = ideal_network(werner_state(0.0).unwrap(), 1).unwrap();
        let budget = SearchBudget {
            samples: 200,
            ..Default::default()
        };
        let m = separable_minimum(&wit, &ns, &budget).unwrap();
        close(m.min_value, 1.0 / 16.0, 1e-12);
    }

    #[test]
    fn separable_minimum_is_nonnegative_and_deterministic() {
        let wit = isotropic_witness(1).unwrap();
        let ns = ideal_network(werner_state(0.0).unwrap(), 1).unwrap();
        let budget = SearchBudget {
            samples: 500,
            ..Default::default()
        };
        let m1 = separable_minimum(&wit, &ns, &budget).unwrap();
        let m2 = separable_minimum(&wit, &ns, &budget).unwrap();
        assert_eq!(m1, m2);
        assert!(m1.min_value >= -1e-7);
        assert!(
            m1.min_value < 1e-6,
            "minimum {} should be attained near 0",
            m1.min_value
        );
    }
}
