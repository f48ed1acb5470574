//! Pauli observables, Bell states, measurement families and the reference
//! strategies used by the self-tests.
//!
//! Setting indices in the API are zero-based. Charlie's qubit settings 0, 1, 2
//! measure σz, σx, σy. Alice's six settings are D and E for the pairs (z,x),
//! (z,y), (x,y), in that order, with `D = (σi+σj)/√2` and `E = (σi−σj)/√2`.
//! A dichotomic setting has outcome 0 for eigenvalue +1 and outcome 1 for −1.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{check_range, Error, Result};
use crate::tensor::{apply_local, eigh, kron, kron_all, ComplexMatrix, Factor, StateVector, C64, I, ONE, ZERO};

/// Tolerance used by completeness and PSD checks of measurement families.
pub const MEASUREMENT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> ComplexMatrix {
        match self {
            Pauli::X => ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]),
            Pauli::Y => ComplexMatrix::from_rows(&[&[ZERO, -I], &[I, ZERO]]),
            Pauli::Z => ComplexMatrix::from_rows(&[&[ONE, ZERO], &[ZERO, -ONE]]),
        }
    }

    /// Charlie's measurement setting `z ∈ {1,2,3}` maps to σz, σx, σy.
    pub fn for_setting(z: usize) -> Option<Pauli> {
        match z {
            1 => Some(Pauli::Z),
            2 => Some(Pauli::X),
            3 => Some(Pauli::Y),
            _ => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Pauli::X => "x",
            Pauli::Y => "y",
            Pauli::Z => "z",
        }
    }
}

/// A Hermitian operator with spectrum in {±1}.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub matrix: ComplexMatrix,
    pub label: String,
}

impl Observable {
    pub fn new(matrix: ComplexMatrix, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if !matrix.is_hermitian(1e-12) {
            return Err(Error::Measurement(format!("{label} is not Hermitian")));
        }
        let sq = &matrix * &matrix;
        if sq.max_abs_diff(&ComplexMatrix::identity(matrix.rows())) > 1e-10 {
            return Err(Error::Measurement(format!("{label} does not square to the identity")));
        }
        Ok(Observable { matrix, label })
    }
}

pub fn pauli(which: Pauli) -> Observable {
    Observable {
        matrix: which.matrix(),
        label: format!("sigma_{}", which.symbol()),
    }
}

/// `½(I + c σ)` for the Pauli measured by setting `z ∈ {1,2,3}` and sign `c = ±1`.
pub fn pauli_projector(c: i8, z: usize) -> Result<ComplexMatrix> {
    let p = Pauli::for_setting(z).ok_or(Error::OutOfRange {
        name: "z",
        value: z as f64,
        range: "{1, 2, 3}",
    })?;
    if c != 1 && c != -1 {
        return Err(Error::OutOfRange {
            name: "c",
            value: c as f64,
            range: "{-1, +1}",
        });
    }
    Ok(spectral_projector(&p.matrix(), c))
}

/// `½(I + c·O)` for a ±1 observable `O`.
pub fn spectral_projector(o: &ComplexMatrix, c: i8) -> ComplexMatrix {
    let id = ComplexMatrix::identity(o.rows());
    (&id + &o.scale_real(c as f64)).scale_real(0.5)
}

/// Sign attached to outcome bit `b`: 0 ↦ +1, 1 ↦ −1.
pub fn outcome_sign(b: usize) -> i8 {
    if b == 0 {
        1
    } else {
        -1
    }
}

/// The Bell basis Φ⁺, Φ⁻, Ψ⁺, Ψ⁻ as amplitudes on two qubits.
pub fn bell_amplitudes(k: usize) -> [f64; 4] {
    let h = FRAC_1_SQRT_2;
    match k {
        0 => [h, 0.0, 0.0, h],
        1 => [h, 0.0, 0.0, -h],
        2 => [0.0, h, h, 0.0],
        _ => [0.0, h, -h, 0.0],
    }
}

pub fn bell_state(k: usize) -> Result<StateVector> {
    if k > 3 {
        return Err(Error::OutOfRange {
            name: "k",
            value: k as f64,
            range: "0..=3",
        });
    }
    Ok(StateVector::from_real(
        &bell_amplitudes(k),
        vec![Factor::qubit("q0"), Factor::qubit("q1")],
    )?)
}

pub fn bell_projector(k: usize) -> ComplexMatrix {
    let a: Vec<C64> = bell_amplitudes(k).iter().map(|&x| C64::new(x, 0.0)).collect();
    ComplexMatrix::projector(&a)
}

/// `Σ_i |ii⟩/√d` on two factors of dimension `d`.
pub fn max_entangled(d: usize) -> StateVector {
    let mut amps = vec![ZERO; d * d];
    let s = 1.0 / (d as f64).sqrt();
    for i in 0..d {
        amps[i * d + i] = C64::new(s, 0.0);
    }
    StateVector::new(amps, vec![Factor::new("L", d), Factor::new("R", d)]).expect("consistent dims")
}

pub fn max_entangled_projector(d: usize) -> ComplexMatrix {
    max_entangled(d).density()
}

/// `p |Φ_d⟩⟨Φ_d| + (1−p) I/d²` on `C^d ⊗ C^d`.
pub fn isotropic_state(d: usize, p: f64) -> Result<ComplexMatrix> {
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    let dd = d * d;
    let noise = ComplexMatrix::identity(dd).scale_real((1.0 - p) / dd as f64);
    Ok(&max_entangled_projector(d).scale_real(p) + &noise)
}

/// Two-qubit Werner state `p |Φ⁺⟩⟨Φ⁺| + (1−p) I/4`.
pub fn werner_state(p: f64) -> Result<ComplexMatrix> {
    isotropic_state(2, p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Effect {
    pub label: String,
    pub operator: ComplexMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Setting {
    pub label: String,
    pub effects: Vec<Effect>,
}

impl Setting {
    /// Two-outcome setting `{½(I+O), ½(I−O)}` with outcome labels `+` and `-`.
    pub fn dichotomic(label: impl Into<String>, observable: &ComplexMatrix) -> Setting {
        Setting {
            label: label.into(),
            effects: vec![
                Effect {
                    label: "+".into(),
                    operator: spectral_projector(observable, 1),
                },
                Effect {
                    label: "-".into(),
                    operator: spectral_projector(observable, -1),
                },
            ],
        }
    }

    /// Single-outcome setting whose only effect is the identity.
    pub fn trivial(label: impl Into<String>, dim: usize) -> Setting {
        Setting {
            label: label.into(),
            effects: vec![Effect {
                label: "1".into(),
                operator: ComplexMatrix::identity(dim),
            }],
        }
    }
}

/// Labelled settings, each a list of effects on the same space.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementFamily {
    settings: Vec<Setting>,
    dim: usize,
}

impl MeasurementFamily {
    pub fn new(settings: Vec<Setting>) -> Result<Self> {
        let dim = settings
            .first()
            .and_then(|s| s.effects.first())
            .map(|e| e.operator.rows())
            .ok_or_else(|| Error::Measurement("empty measurement family".into()))?;
        for s in &settings {
            if s.effects.is_empty() {
                return Err(Error::Measurement(format!("setting {} has no effects", s.label)));
            }
            for e in &s.effects {
                if e.operator.rows() != dim || !e.operator.is_square() {
                    return Err(Error::Measurement(format!(
                        "effect {} of setting {} is not {dim}x{dim}",
                        e.label, s.label
                    )));
                }
            }
        }
        Ok(MeasurementFamily { settings, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.settings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.settings.is_empty()
    }

    pub fn settings(&self) -> &[Setting] {
        &self.settings
    }

    pub fn setting(&self, x: usize) -> Result<&Setting> {
        self.settings
            .get(x)
            .ok_or_else(|| Error::Measurement(format!("no setting {x}")))
    }

    pub fn effect(&self, x: usize, a: usize) -> Result<&ComplexMatrix> {
        self.setting(x)?
            .effects
            .get(a)
            .map(|e| &e.operator)
            .ok_or_else(|| Error::Measurement(format!("no outcome {a} for setting {x}")))
    }

    /// `E₀ − E₁` for a two-outcome setting.
    pub fn observable(&self, x: usize) -> Result<ComplexMatrix> {
        let s = self.setting(x)?;
        if s.effects.len() != 2 {
            return Err(Error::Shape(format!(
                "setting {} has {} outcomes, expected 2",
                s.label,
                s.effects.len()
            )));
        }
        Ok(&s.effects[0].operator - &s.effects[1].operator)
    }

    /// Checks that each setting sums to the identity and that every effect is PSD.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let id = ComplexMatrix::identity(self.dim);
        for s in &self.settings {
            let mut sum = ComplexMatrix::zeros(self.dim, self.dim);
            for e in &s.effects {
                if !e.operator.is_hermitian(tol) {
                    return Err(Error::Measurement(format!(
                        "effect {}|{} is not Hermitian",
                        e.label, s.label
                    )));
                }
                let (vals, _) = eigh(&e.operator)?;
                if vals[0] < -tol {
                    return Err(Error::Measurement(format!(
                        "effect {}|{} has eigenvalue {:.3e}",
                        e.label, s.label, vals[0]
                    )));
                }
                sum += &e.operator;
            }
            let dev = sum.max_abs_diff(&id);
            if dev > tol {
                return Err(Error::Measurement(format!(
                    "effects of {} sum to I only within {dev:.3e}",
                    s.label
                )));
            }
        }
        Ok(())
    }

    pub fn map_effects(&self, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> MeasurementFamily {
        let settings: Vec<Setting> = self
            .settings
            .iter()
            .map(|s| Setting {
                label: s.label.clone(),
                effects: s
                    .effects
                    .iter()
                    .map(|e| Effect {
                        label: e.label.clone(),
                        operator: f(&e.operator),
                    })
                    .collect(),
            })
            .collect();
        let dim = settings[0].effects[0].operator.rows();
        MeasurementFamily { settings, dim }
    }

    pub fn transpose(&self) -> MeasurementFamily {
        self.map_effects(|m| m.transpose())
    }

    /// Every effect `E` becomes `E ⊗ I_d`.
    pub fn extend_identity(&self, d: usize) -> MeasurementFamily {
        let id = ComplexMatrix::identity(d);
        self.map_effects(|m| kron(m, &id))
    }
}

/// A shared pure state with Charlie's measurements on the leading
/// `charlie_factors` factors and Alice's on the rest.
#[derive(Clone, Debug, PartialEq)]
pub struct Strategy {
    pub state: StateVector,
    pub charlie_factors: usize,
    pub charlie: MeasurementFamily,
    pub alice: MeasurementFamily,
    /// Number of parallel copies the measurement labels refer to.
    pub sites: usize,
}

impl Strategy {
    pub fn new(
        state: StateVector,
        charlie_factors: usize,
        charlie: MeasurementFamily,
        alice: MeasurementFamily,
        sites: usize,
    ) -> Result<Self> {
        let dims = state.factor_dims();
        if charlie_factors == 0 || charlie_factors >= dims.len() {
            return Err(Error::Shape(format!(
                "{charlie_factors} Charlie factors out of {}",
                dims.len()
            )));
        }
        let dc: usize = dims[..charlie_factors].iter().product();
        let da: usize = dims[charlie_factors..].iter().product();
        if charlie.dim() != dc || alice.dim() != da {
            return Err(Error::Shape(format!(
                "operators act on {}x{} but the state splits as {dc}x{da}",
                charlie.dim(),
                alice.dim()
            )));
        }
        Ok(Strategy {
            state,
            charlie_factors,
            charlie,
            alice,
            sites,
        })
    }

    pub fn charlie_positions(&self) -> Vec<usize> {
        (0..self.charlie_factors).collect()
    }

    pub fn alice_positions(&self) -> Vec<usize> {
        (self.charlie_factors..self.state.factors().len()).collect()
    }

    pub fn charlie_dim(&self) -> usize {
        self.charlie.dim()
    }

    pub fn alice_dim(&self) -> usize {
        self.alice.dim()
    }

    pub fn apply_charlie(&self, op: &ComplexMatrix, v: &StateVector) -> Result<StateVector> {
        Ok(apply_local(op, &self.charlie_positions(), v)?)
    }

    pub fn apply_alice(&self, op: &ComplexMatrix, v: &StateVector) -> Result<StateVector> {
        Ok(apply_local(op, &self.alice_positions(), v)?)
    }

    /// `⟨ψ| C ⊗ A |ψ⟩`
    pub fn expectation(&self, charlie_op: &ComplexMatrix, alice_op: &ComplexMatrix) -> Result<C64> {
        let a = self.apply_alice(alice_op, &self.state)?;
        let ca = self.apply_charlie(charlie_op, &a)?;
        Ok(self.state.inner(&ca))
    }

    /// Born-rule probability `p(c a | z x)`.
    pub fn probability(&self, z: usize, c: usize, x: usize, a: usize) -> Result<f64> {
        let cv = self.apply_charlie(self.charlie.effect(z, c)?, &self.state)?;
        let av = self.apply_alice(self.alice.effect(x, a)?, &self.state)?;
        Ok(cv.inner(&av).re)
    }

    /// Every `p(c a | z x)`, computed from `M_c|ψ⟩` and `M_a|ψ⟩` inner products.
    pub fn correlation_table(&self) -> Result<CorrelationTable> {
        let charlie_vecs: Vec<Vec<StateVector>> = self
            .charlie
            .settings()
            .iter()
            .map(|s| {
                s.effects
                    .iter()
                    .map(|e| self.apply_charlie(&e.operator, &self.state))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let alice_vecs: Vec<Vec<StateVector>> = self
            .alice
            .settings()
            .iter()
            .map(|s| {
                s.effects
                    .iter()
                    .map(|e| self.apply_alice(&e.operator, &self.state))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let mut entries = Vec::new();
        for (z, cs) in charlie_vecs.iter().enumerate() {
            for (x, as_) in alice_vecs.iter().enumerate() {
                for (c, cv) in cs.iter().enumerate() {
                    for (a, av) in as_.iter().enumerate() {
                        entries.push(((z, c, x, a), cv.inner(av).re));
                    }
                }
            }
        }
        Ok(CorrelationTable { entries })
    }
}

/// Flat list of `((z, c, x, a), p)` in setting-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTable {
    pub entries: Vec<((usize, usize, usize, usize), f64)>,
}

impl CorrelationTable {
    /// Largest entrywise difference; infinite if the tables have different shapes.
    pub fn max_abs_diff(&self, other: &CorrelationTable) -> f64 {
        if self.entries.len() != other.entries.len() {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|((ka, pa), (kb, pb))| if ka == kb { (pa - pb).abs() } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }
}

/// Charlie's three and Alice's six single-site observables.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteObservables {
    pub charlie: [ComplexMatrix; 3],
    pub alice: [ComplexMatrix; 6],
}

impl SiteObservables {
    pub fn ideal() -> Self {
        let (z, x, y) = (Pauli::Z.matrix(), Pauli::X.matrix(), Pauli::Y.matrix());
        let d = |a: &ComplexMatrix, b: &ComplexMatrix| (a + b).scale_real(FRAC_1_SQRT_2);
        let e = |a: &ComplexMatrix, b: &ComplexMatrix| (a - b).scale_real(FRAC_1_SQRT_2);
        SiteObservables {
            alice: [d(&z, &x), e(&z, &x), d(&z, &y), e(&z, &y), d(&x, &y), e(&x, &y)],
            charlie: [z, x, y],
        }
    }

    /// Every observable transposed, which flips σy to −σy in the ideal set.
    pub fn transposed(&self) -> Self {
        SiteObservables {
            charlie: self.charlie.clone().map(|m| m.transpose()),
            alice: self.alice.clone().map(|m| m.transpose()),
        }
    }
}

pub const ALICE_LABELS: [&str; 6] = ["D_zx", "E_zx", "D_zy", "E_zy", "D_xy", "E_xy"];
pub const CHARLIE_LABELS: [&str; 3] = ["Z", "X", "Y"];

pub fn ideal_qubit_strategy() -> Strategy {
    let obs = SiteObservables::ideal();
    let charlie = MeasurementFamily::new(
        obs.charlie
            .iter()
            .zip(CHARLIE_LABELS)
            .map(|(m, l)| Setting::dichotomic(l, m))
            .collect(),
    )
    .expect("qubit settings");
    let alice = MeasurementFamily::new(
        obs.alice
            .iter()
            .zip(ALICE_LABELS)
            .map(|(m, l)| Setting::dichotomic(l, m))
            .collect(),
    )
    .expect("qubit settings");
    let state =
        StateVector::from_real(&bell_amplitudes(0), vec![Factor::qubit("C"), Factor::qubit("A")]).expect("two qubits");
    Strategy::new(state, 1, charlie, alice, 1).expect("consistent shape")
}

/// Digits of `index` in base `radix`, most significant first.
pub fn digits(mut index: usize, radix: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for k in (0..len).rev() {
        out[k] = index % radix;
        index /= radix;
    }
    out
}

pub fn from_digits(ds: &[usize], radix: usize) -> usize {
    ds.iter().fold(0, |acc, &d| acc * radix + d)
}

/// Largest number of parallel copies the constructors accept.
pub const MAX_SITES: usize = 4;

fn phi_plus_copies(n: usize) -> StateVector {
    let d = 1usize << n;
    let mut factors: Vec<Factor> = (1..=n).map(|i| Factor::qubit(format!("C{i}"))).collect();
    factors.extend((1..=n).map(|i| Factor::qubit(format!("A{i}"))));
    let mut amps = vec![ZERO; d * d];
    let s = (0.5f64).powf(n as f64 / 2.0);
    for k in 0..d {
        amps[k * d + k] = C64::new(s, 0.0);
    }
    StateVector::new(amps, factors).expect("consistent dims")
}

fn sign_label(bits: &[usize]) -> String {
    bits.iter().map(|&b| if b == 0 { '+' } else { '-' }).collect()
}

pub(crate) fn product_family(sites: &[Vec<ComplexMatrix>], names: &[&str]) -> Vec<Setting> {
    let n = sites.len();
    let k = names.len();
    let mut out = Vec::new();
    for s in 0..k.pow(n as u32) {
        let choice = digits(s, k, n);
        let label = choice.iter().map(|&c| names[c]).collect::<Vec<_>>().join(",");
        let mut effects = Vec::new();
        for o in 0..(1usize << n) {
            let bits = digits(o, 2, n);
            let parts: Vec<ComplexMatrix> = (0..n)
                .map(|l| spectral_projector(&sites[l][choice[l]], outcome_sign(bits[l])))
                .collect();
            let refs: Vec<&ComplexMatrix> = parts.iter().collect();
            effects.push(Effect {
                label: sign_label(&bits),
                operator: kron_all(&refs),
            });
        }
        out.push(Setting { label, effects });
    }
    out
}

/// Bell-basis measurement on `pairs` consecutive qubit pairs starting after
/// `offset` qubits, identity on the remaining qubits of an `n`-qubit register.
fn bsm_setting(label: &str, n: usize, offset: usize, pairs: usize) -> Setting {
    if pairs == 0 {
        return Setting::trivial(label, 1 << n);
    }
    let before = ComplexMatrix::identity(1 << offset);
    let after = ComplexMatrix::identity(1 << (n - offset - 2 * pairs));
    let mut effects = Vec::new();
    for o in 0..4usize.pow(pairs as u32) {
        let ks = digits(o, 4, pairs);
        let projs: Vec<ComplexMatrix> = ks.iter().map(|&k| bell_projector(k)).collect();
        let mut parts: Vec<&ComplexMatrix> = vec![&before];
        parts.extend(projs.iter());
        parts.push(&after);
        effects.push(Effect {
            label: ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(""),
            operator: kron_all(&parts),
        });
    }
    Setting {
        label: label.into(),
        effects,
    }
}

/// Index of Alice's first Bell-state-measurement setting (◊) for `n` sites.
pub fn diamond_setting(n: usize) -> usize {
    6usize.pow(n as u32)
}

/// Index of Alice's shifted Bell-state-measurement setting (◆).
pub fn shifted_diamond_setting(n: usize) -> usize {
    diamond_setting(n) + 1
}

/// `Φ⁺` on each of `sites.len()` copies, product measurements built from the
/// per-site observables, and Alice's two Bell-state-measurement settings.
///
/// Charlie's setting `z⃗` has index `Σ z_l 3^{n-1-l}`, Alice's `x⃗` likewise in
/// base 6, and outcome bitstrings are big-endian. Alice's settings `6^n` and
/// `6^n + 1` measure the Bell basis on pairs `(A1A2)(A3A4)…` and
/// `(A2A3)(A4A5)…`; each is a single identity outcome when it has no pair.
pub fn product_strategy(sites: &[SiteObservables]) -> Result<Strategy> {
    let n = sites.len();
    if n == 0 || n > MAX_SITES {
        return Err(Error::OutOfRange {
            name: "n",
            value: n as f64,
            range: "1..=4",
        });
    }
    let ch: Vec<Vec<ComplexMatrix>> = sites.iter().map(|s| s.charlie.to_vec()).collect();
    let al: Vec<Vec<ComplexMatrix>> = sites.iter().map(|s| s.alice.to_vec()).collect();
    let charlie = MeasurementFamily::new(product_family(&ch, &["1", "2", "3"]))?;
    let mut alice_settings = product_family(&al, &["1", "2", "3", "4", "5", "6"]);
    alice_settings.push(bsm_setting("diamond", n, 0, n / 2));
    alice_settings.push(bsm_setting("shifted_diamond", n, 1, (n - 1) / 2));
    let alice = MeasurementFamily::new(alice_settings)?;
    Strategy::new(phi_plus_copies(n), n, charlie, alice, n)
}

pub fn parallel_strategy(n: usize) -> Result<Strategy> {
    parallel_strategy_with_frames(n, &vec![false; n])
}

/// Parallel strategy whose observables at site `l` are transposed (σy ↦ −σy)
/// when `flipped[l]` is set.
pub fn parallel_strategy_with_frames(n: usize, flipped: &[bool]) -> Result<Strategy> {
    if flipped.len() != n {
        return Err(Error::Shape(format!("{} frame flags for {n} sites", flipped.len())));
    }
    let ideal = SiteObservables::ideal();
    let sites: Vec<SiteObservables> = flipped
        .iter()
        .map(|&f| if f { ideal.transposed() } else { ideal.clone() })
        .collect();
    product_strategy(&sites)
}

/// Replaces every measurement operator by its transpose; the state must be real.
pub fn transpose_strategy(s: &Strategy) -> Result<Strategy> {
    if !s.state.is_real(1e-14) {
        return Err(Error::Shape("transposition needs a real state".into()));
    }
    Ok(Strategy {
        state: s.state.clone(),
        charlie_factors: s.charlie_factors,
        charlie: s.charlie.transpose(),
        alice: s.alice.transpose(),
        sites: s.sites,
    })
}

fn block_diag_family(a: &MeasurementFamily, b: &MeasurementFamily) -> Result<MeasurementFamily> {
    if a.len() != b.len() {
        return Err(Error::Shape(
            "direct sum of families with different setting counts".into(),
        ));
    }
    let p0 = ComplexMatrix::diag_real(&[1.0, 0.0]);
    let p1 = ComplexMatrix::diag_real(&[0.0, 1.0]);
    let mut settings = Vec::new();
    for (sa, sb) in a.settings().iter().zip(b.settings()) {
        if sa.effects.len() != sb.effects.len() {
            return Err(Error::Shape(format!(
                "setting {} has different outcome counts",
                sa.label
            )));
        }
        settings.push(Setting {
            label: sa.label.clone(),
            effects: sa
                .effects
                .iter()
                .zip(&sb.effects)
                .map(|(ea, eb)| Effect {
                    label: ea.label.clone(),
                    operator: &kron(&p0, &ea.operator) + &kron(&p1, &eb.operator),
                })
                .collect(),
        });
    }
    MeasurementFamily::new(settings)
}

/// Direct sum `√w |00⟩ψ₁ + √(1−w) |11⟩ψ₂` with a flag qubit leading each
/// party, and measurements `|0⟩⟨0| ⊗ M₁ + |1⟩⟨1| ⊗ M₂`.
pub fn direct_sum(s1: &Strategy, s2: &Strategy, weight: f64) -> Result<Strategy> {
    check_range("weight", weight, 0.0, 1.0, "[0, 1]")?;
    if s1.state.factor_dims() != s2.state.factor_dims() || s1.charlie_factors != s2.charlie_factors {
        return Err(Error::Shape("direct sum needs identically shaped strategies".into()));
    }
    let dc = s1.charlie_dim();
    let da = s1.alice_dim();
    let mut amps = vec![ZERO; 4 * dc * da];
    let (w1, w2) = (weight.sqrt(), (1.0 - weight).sqrt());
    for c in 0..dc {
        for a in 0..da {
            // index of (fc, c, fa, a) with fc = fa
            amps[(c * 2) * da + a] = s1.state.amplitudes()[c * da + a] * w1;
            amps[((dc + c) * 2 + 1) * da + a] = s2.state.amplitudes()[c * da + a] * w2;
        }
    }
    let k = s1.charlie_factors;
    let mut factors = vec![Factor::qubit("Cflag")];
    factors.extend(s1.state.factors()[..k].iter().cloned());
    factors.push(Factor::qubit("Aflag"));
    factors.extend(s1.state.factors()[k..].iter().cloned());
    let state = StateVector::new(amps, factors)?;
    Strategy::new(
        state,
        k + 1,
        block_diag_family(&s1.charlie, &s2.charlie)?,
        block_diag_family(&s1.alice, &s2.alice)?,
        s1.sites,
    )
}

/// Appends an extra register `junk` on Alice's side, untouched by her measurements.
pub fn with_alice_junk(s: &Strategy, junk: &StateVector) -> Result<Strategy> {
    let state = s.state.tensor(junk);
    Strategy::new(
        state,
        s.charlie_factors,
        s.charlie.clone(),
        s.alice.extend_identity(junk.dim()),
        s.sites,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::kron;

    #[test]
    fn projector_examples() {
        assert_eq!(pauli_projector(1, 1).unwrap(), ComplexMatrix::diag_real(&[1.0, 0.0]));
        let expect = ComplexMatrix::from_rows(&[&[ONE, I], &[-I, ONE]]).scale_real(0.5);
        assert!(pauli_projector(-1, 3).unwrap().max_abs_diff(&expect) < 1e-15);
        let x = &pauli_projector(1, 2).unwrap() - &pauli_projector(-1, 2).unwrap();
        assert_eq!(x, Pauli::X.matrix());
        assert!(pauli_projector(0, 1).is_err());
        assert!(pauli_projector(1, 4).is_err());
    }

    #[test]
    fn pauli_anticommutation_is_exact() {
        let ps = [Pauli::X, Pauli::Y, Pauli::Z];
        for (i, a) in ps.iter().enumerate() {
            for (j, b) in ps.iter().enumerate() {
                let ac = a.matrix().anticommutator(&b.matrix()).unwrap();
                let expect = if i == j {
                    ComplexMatrix::identity(2).scale_real(2.0)
                } else {
                    ComplexMatrix::zeros(2, 2)
                };
                assert!(ac.max_abs_diff(&expect) <= 1e-15);
            }
        }
    }

    #[test]
    fn bell_basis_orthonormal_and_signs() {
        let h = FRAC_1_SQRT_2;
        assert_eq!(bell_state(0).unwrap().amplitudes()[3], C64::new(h, 0.0));
        for j in 0..4 {
            for k in 0..4 {
                let ip = bell_state(j).unwrap().inner(&bell_state(k).unwrap());
                assert!((ip - if j == k { ONE } else { ZERO }).norm() < 1e-15);
            }
        }
        assert!(bell_state(4).is_err());
        let phi = bell_state(0).unwrap();
        for (p, sign) in [(Pauli::X, 1.0), (Pauli::Y, -1.0), (Pauli::Z, 1.0)] {
            let v = kron(&p.matrix(), &p.matrix()).expectation(phi.amplitudes()).unwrap();
            assert!((v.re - sign).abs() < 1e-15);
        }
    }

    #[test]
    fn max_entangled_four_is_two_bell_pairs() {
        // factors L1 L2 R1 R2 regrouped from (L1 R1)(L2 R2)
        let pairs = bell_state(0).unwrap().tensor(&bell_state(0).unwrap());
        let regrouped = pairs.permute(&[0, 2, 1, 3]).unwrap();
        let m4 = max_entangled(4);
        for (a, b) in regrouped.amplitudes().iter().zip(m4.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
        let rho = m4.reduced(&[0]).unwrap();
        assert!(rho.max_abs_diff(&ComplexMatrix::identity(4).scale_real(0.25)) < 1e-15);
    }

    #[test]
    fn werner_endpoints_and_range() {
        assert!(
            werner_state(0.0)
                .unwrap()
                .max_abs_diff(&ComplexMatrix::identity(4).scale_real(0.25))
                < 1e-15
        );
        assert!(werner_state(1.0).unwrap().max_abs_diff(&bell_projector(0)) < 1e-15);
        assert!(werner_state(1.2).is_err());
        assert!(werner_state(-0.1).is_err());
        let (vals, _) = eigh(&werner_state(0.3).unwrap()).unwrap();
        assert!(vals[0] > 0.0);
    }

    #[test]
    fn ideal_strategy_observables() {
        let s = ideal_qubit_strategy();
        assert_eq!(s.charlie.observable(0).unwrap(), Pauli::Z.matrix());
        let d = (&Pauli::Z.matrix() + &Pauli::X.matrix()).scale_real(FRAC_1_SQRT_2);
        assert!(s.alice.observable(0).unwrap().max_abs_diff(&d) < 1e-15);
        for fam in [&s.charlie, &s.alice] {
            for x in 0..fam.len() {
                let o = fam.observable(x).unwrap();
                assert!((&o * &o).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-14);
            }
            fam.validate(MEASUREMENT_TOL).unwrap();
        }
        assert_eq!((s.charlie.len(), s.alice.len()), (3, 6));
    }

    #[test]
    fn parallel_one_matches_qubit_strategy() {
        let p = parallel_strategy(1).unwrap();
        let q = ideal_qubit_strategy();
        assert_eq!(p.alice.len(), 8);
        for x in 0..6 {
            assert!(
                p.alice
                    .observable(x)
                    .unwrap()
                    .max_abs_diff(&q.alice.observable(x).unwrap())
                    < 1e-15
            );
        }
        for z in 0..3 {
            assert!(
                p.charlie
                    .observable(z)
                    .unwrap()
                    .max_abs_diff(&q.charlie.observable(z).unwrap())
                    < 1e-15
            );
        }
        assert_eq!(p.alice.setting(6).unwrap().effects.len(), 1);
        assert_eq!(p.alice.setting(7).unwrap().effects.len(), 1);
    }

    #[test]
    fn parallel_two_bell_measurement() {
        let p = parallel_strategy(2).unwrap();
        let diamond = p.alice.setting(diamond_setting(2)).unwrap();
        assert_eq!(diamond.effects.len(), 4);
        for (a, e) in diamond.effects.iter().enumerate() {
            assert!(e.operator.max_abs_diff(&bell_projector(a)) < 1e-15);
        }
        let mut sum = ComplexMatrix::zeros(4, 4);
        for e in &diamond.effects {
            sum += &e.operator;
        }
        assert!(sum.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-15);
        assert_eq!(p.alice.setting(shifted_diamond_setting(2)).unwrap().effects.len(), 1);
        p.alice.validate(MEASUREMENT_TOL).unwrap();
        p.charlie.validate(MEASUREMENT_TOL).unwrap();
    }

    #[test]
    fn parallel_three_shifted_pair() {
        let p = parallel_strategy(3).unwrap();
        let shifted = p.alice.setting(shifted_diamond_setting(3)).unwrap();
        assert_eq!(shifted.effects.len(), 4);
        let expect = kron(&ComplexMatrix::identity(2), &bell_projector(3));
        assert!(shifted.effects[3].operator.max_abs_diff(&expect) < 1e-15);
        assert!(parallel_strategy(5).is_err());
        assert!(parallel_strategy(0).is_err());
    }

    #[test]
    fn transpose_flips_only_y() {
        let t = transpose_strategy(&ideal_qubit_strategy()).unwrap();
        assert_eq!(t.charlie.observable(2).unwrap(), Pauli::Y.matrix().scale_real(-1.0));
        assert_eq!(t.charlie.observable(0).unwrap(), Pauli::Z.matrix());
        assert_eq!(t.charlie.observable(1).unwrap(), Pauli::X.matrix());
    }

    #[test]
    fn transposed_correlations_match() {
        let s = ideal_qubit_strategy();
        let t = transpose_strategy(&s).unwrap();
        let d = s
            .correlation_table()
            .unwrap()
            .max_abs_diff(&t.correlation_table().unwrap());
        assert!(d <= 1e-12);
    }

    #[test]
    fn direct_sum_shapes_and_validity() {
        let a = parallel_strategy(2).unwrap();
        let b = parallel_strategy_with_frames(2, &[false, true]).unwrap();
        let m = direct_sum(&a, &b, 0.5).unwrap();
        assert!(m.state.is_normalized(1e-12));
        assert_eq!(m.charlie_dim(), 8);
        m.charlie.validate(MEASUREMENT_TOL).unwrap();
        m.alice.validate(MEASUREMENT_TOL).unwrap();
        // correlations are the average of the two blocks
        let pa = a.probability(0, 0, 0, 0).unwrap();
        let pb = b.probability(0, 0, 0, 0).unwrap();
        assert!((m.probability(0, 0, 0, 0).unwrap() - 0.5 * (pa + pb)).abs() < 1e-14);
    }

    #[test]
    fn junk_register_leaves_correlations() {
        let s = ideal_qubit_strategy();
        let junk = StateVector::from_real(&[0.6, 0.8], vec![Factor::qubit("J")]).unwrap();
        let e = with_alice_junk(&s, &junk).unwrap();
        assert_eq!(e.alice_dim(), 4);
        let d = s
            .correlation_table()
            .unwrap()
            .max_abs_diff(&e.correlation_table().unwrap());
        assert!(d < 1e-14);
    }

    #[test]
    fn strategy_shape_errors() {
        let s = ideal_qubit_strategy();
        assert!(Strategy::new(s.state.clone(), 2, s.charlie.clone(), s.alice.clone(), 1).is_err());
        let big = s.alice.extend_identity(2);
        assert!(Strategy::new(s.state.clone(), 1, s.charlie.clone(), big, 1).is_err());
    }
}
