//! Parallel self-test of `n` Pauli pairs from coarse-grained observables, and
//! the Bell-state-measurement check that aligns the σy frames of all sites.

use crate::error::{Error, Result};
use crate::objects::{diamond_setting, digits, outcome_sign, shifted_diamond_setting, Strategy};
use crate::selftest_qubit::{QubitObservables, TRIPLE_CHSH_MAX};
use crate::swap::{self, JunkDecomposition, SiteOperators, SwapOptions};
use crate::tensor::ComplexMatrix;

/// Averaged and sharp single-site observables of an `n`-site strategy.
///
/// `charlie_avg[i]` holds `[Z_i, X_i, Y_i]` and `alice_avg[i]` the six
/// D/E operators of site `i`, each the mean over all compatible settings.
#[derive(Clone, Debug)]
pub struct CoarseObservables {
    pub sites: usize,
    pub charlie_avg: Vec<[ComplexMatrix; 3]>,
    pub alice_avg: Vec<[ComplexMatrix; 6]>,
    // [setting][site]
    charlie_sharp: Vec<Vec<ComplexMatrix>>,
    alice_sharp: Vec<Vec<ComplexMatrix>>,
}

/// Settings whose digit at `site` equals `value`, in increasing order.
pub fn compatible_settings(n: usize, site: usize, value: usize, radix: usize) -> Vec<usize> {
    (0..radix.pow(n as u32))
        .filter(|&s| digits(s, radix, n)[site] == value)
        .collect()
}

/// `Σ_c (±1)_{c_i} M_{c|s}` for every site `i` of one setting.
fn site_observables(effects: &[&ComplexMatrix], n: usize) -> Vec<ComplexMatrix> {
    let dim = effects[0].rows();
    (0..n)
        .map(|i| {
            let mut acc = ComplexMatrix::zeros(dim, dim);
            for (o, e) in effects.iter().enumerate() {
                let sign = outcome_sign(digits(o, 2, n)[i]) as f64;
                acc += &e.scale_real(sign);
            }
            acc
        })
        .collect()
}

fn check_shape(s: &Strategy, n: usize) -> Result<()> {
    let three = 3usize.pow(n as u32);
    let six = 6usize.pow(n as u32);
    let outcomes = 1usize << n;
    if s.sites != n || s.charlie.len() != three || s.alice.len() < six {
        return Err(Error::Shape(format!(
            "expected an {n}-site strategy with {three} Charlie and at least {six} Alice settings"
        )));
    }
    let bad = s
        .charlie
        .settings()
        .iter()
        .chain(&s.alice.settings()[..six])
        .find(|st| st.effects.len() != outcomes);
    if let Some(st) = bad {
        return Err(Error::Shape(format!(
            "setting {} does not have {outcomes} outcomes",
            st.label
        )));
    }
    Ok(())
}

fn average(ops: impl Iterator<Item = ComplexMatrix>) -> ComplexMatrix {
    let mut count = 0;
    let mut acc: Option<ComplexMatrix> = None;
    for o in ops {
        count += 1;
        acc = Some(match acc {
            Some(a) => &a + &o,
            None => o,
        });
    }
    acc.expect("at least one compatible setting")
        .scale_real(1.0 / count as f64)
}

pub fn coarse_grain(s: &Strategy, n: usize) -> Result<CoarseObservables> {
    check_shape(s, n)?;
    let sharp = |fam: &crate::objects::MeasurementFamily, count: usize| -> Vec<Vec<ComplexMatrix>> {
        (0..count)
            .map(|z| {
                let effs: Vec<&ComplexMatrix> = fam.settings()[z].effects.iter().map(|e| &e.operator).collect();
                site_observables(&effs, n)
            })
            .collect()
    };
    let charlie_sharp = sharp(&s.charlie, 3usize.pow(n as u32));
    let alice_sharp = sharp(&s.alice, 6usize.pow(n as u32));
    let charlie_avg = (0..n)
        .map(|i| {
            [0, 1, 2].map(|label| {
                average(
                    compatible_settings(n, i, label, 3)
                        .into_iter()
                        .map(|z| charlie_sharp[z][i].clone()),
                )
            })
        })
        .collect();
    let alice_avg = (0..n)
        .map(|i| {
            [0, 1, 2, 3, 4, 5].map(|label| {
                average(
                    compatible_settings(n, i, label, 6)
                        .into_iter()
                        .map(|x| alice_sharp[x][i].clone()),
                )
            })
        })
        .collect();
    Ok(CoarseObservables {
        sites: n,
        charlie_avg,
        alice_avg,
        charlie_sharp,
        alice_sharp,
    })
}

impl CoarseObservables {
    /// `O_{i|z⃗}` for the `k`-th (zero-based) setting with `z_i = label`.
    pub fn charlie_sharp(&self, site: usize, label: usize, k: usize) -> &ComplexMatrix {
        let z = compatible_settings(self.sites, site, label, 3)[k];
        &self.charlie_sharp[z][site]
    }

    pub fn alice_sharp(&self, site: usize, label: usize, l: usize) -> &ComplexMatrix {
        let x = compatible_settings(self.sites, site, label, 6)[l];
        &self.alice_sharp[x][site]
    }

    pub fn compatible_count(&self) -> usize {
        3usize.pow(self.sites as u32 - 1)
    }

    /// Site-`i` qubit observables built from the averaged operators.
    pub fn site_qubit_observables(&self, site: usize) -> QubitObservables {
        QubitObservables {
            charlie: self.charlie_avg[site].clone(),
            alice: self.alice_avg[site].clone(),
        }
    }

    /// Regularized `[Ẑ, X̂, Ŷ]` on Alice's side for site `i`.
    pub fn alice_hat(&self, site: usize) -> Result<[ComplexMatrix; 3]> {
        self.site_qubit_observables(site).alice_sharp()
    }

    /// Circuit operators for site `i`, using Charlie's `k`-th sharp observables.
    pub fn site_operators(&self, site: usize, k: usize) -> Result<SiteOperators> {
        let [z_a, x_a, y_a] = self.alice_hat(site)?;
        Ok(SiteOperators {
            z_c: self.charlie_sharp(site, 0, k).clone(),
            x_c: self.charlie_sharp(site, 1, k).clone(),
            y_c: self.charlie_sharp(site, 2, k).clone(),
            z_a,
            x_a,
            y_a,
        })
    }
}

/// `⟨ψ|B_i|ψ⟩` for every site, with the Bell operator built from averaged observables.
pub fn parallel_bell_values(s: &Strategy, n: usize) -> Result<Vec<f64>> {
    let co = coarse_grain(s, n)?;
    parallel_bell_values_from(s, &co)
}

pub fn parallel_bell_values_from(s: &Strategy, co: &CoarseObservables) -> Result<Vec<f64>> {
    (0..co.sites)
        .map(|i| {
            let obs = co.site_qubit_observables(i);
            let mut v = 0.0;
            for (c, a) in obs.bell_terms().iter().flatten() {
                v += s.expectation(c, a)?.re;
            }
            Ok(v)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ParallelSwapResult {
    pub junk: JunkDecomposition,
    pub site_fidelities: Vec<f64>,
    /// Squared norm on control branches `|q̄⟩_{C″}|r̄⟩_{A″}` with `q̄ ≠ r̄`.
    pub off_diagonal_residual: f64,
    pub warnings: Vec<String>,
}

/// Parallel swap circuit with Charlie's `k`-th sharp observables on each site.
pub fn parallel_swap_isometry(s: &Strategy, n: usize, k: usize, opts: &SwapOptions) -> Result<ParallelSwapResult> {
    let co = coarse_grain(s, n)?;
    if k >= co.compatible_count() {
        return Err(Error::Shape(format!(
            "k = {k} but only {} compatible settings",
            co.compatible_count()
        )));
    }
    let mut warnings = Vec::new();
    for (i, v) in parallel_bell_values_from(s, &co)?.iter().enumerate() {
        if TRIPLE_CHSH_MAX - v > opts.epsilon_warning {
            warnings.push(format!("site {} Bell value {v:.12} is below the maximum", i + 1));
        }
    }
    let ops: Vec<SiteOperators> = (0..n).map(|i| co.site_operators(i, k)).collect::<Result<_>>()?;
    let out = swap::swap_and_extract(s, &ops, opts.max_qubits)?;
    Ok(ParallelSwapResult {
        junk: out.junk,
        site_fidelities: out.site_fidelities,
        off_diagonal_residual: out.off_diagonal_residual,
        warnings,
    })
}

/// Expected `⟨ψ| C ⊗ R |ψ⟩` for outcome `a` and correlator `[I, ZZ, XX, YY]`.
pub const BSM_TABLE: [[f64; 4]; 4] = [
    [0.25, 0.25, 0.25, -0.25],
    [0.25, 0.25, -0.25, 0.25],
    [0.25, -0.25, 0.25, 0.25],
    [0.25, -0.25, -0.25, -0.25],
];

pub const CORRELATOR_LABELS: [&str; 4] = ["I", "ZZ", "XX", "YY"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairFamily {
    /// Pairs `(A_{2l−1}, A_{2l})` from setting ◊.
    S,
    /// Pairs `(A_{2l}, A_{2l+1})` from setting ◆.
    T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BsmEntry {
    pub family: PairFamily,
    /// One-based pair index `l`.
    pub pair: usize,
    pub outcome: usize,
    pub correlator: usize,
    pub value: f64,
    pub expected: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BsmCorrelationReport {
    pub entries: Vec<BsmEntry>,
    pub max_deviation: f64,
}

impl BsmCorrelationReport {
    pub fn get(&self, family: PairFamily, pair: usize, outcome: usize, correlator: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.family == family && e.pair == pair && e.outcome == outcome && e.correlator == correlator)
            .map(|e| e.value)
    }
}

/// Coarse-grained Bell-measurement effects `[S_{l,0}, …, S_{l,3}]` of pair `l`
/// (zero-based) within an Alice setting that measures `pairs` pairs.
fn pair_effects(s: &Strategy, setting: usize, pairs: usize, l: usize) -> Result<[ComplexMatrix; 4]> {
    let st = s.alice.setting(setting)?;
    if st.effects.len() != 4usize.pow(pairs as u32) {
        return Err(Error::Shape(format!(
            "setting {} is not a {pairs}-pair Bell measurement",
            st.label
        )));
    }
    let dim = s.alice_dim();
    let mut out = [0, 1, 2, 3].map(|_| ComplexMatrix::zeros(dim, dim));
    for (o, e) in st.effects.iter().enumerate() {
        out[digits(o, 4, pairs)[l]] += &e.operator;
    }
    Ok(out)
}

/// Charlie's `[I, O_i O_j]` correlators for sites `i`, `j` with sharp index `k`.
fn pair_correlators(co: &CoarseObservables, i: usize, j: usize, k: usize) -> [ComplexMatrix; 4] {
    let dim = co.charlie_sharp(0, 0, 0).rows();
    let prod = |label| co.charlie_sharp(i, label, k) * co.charlie_sharp(j, label, k);
    [ComplexMatrix::identity(dim), prod(0), prod(1), prod(2)]
}

pub fn bsm_correlations(s: &Strategy, n: usize, k: usize) -> Result<BsmCorrelationReport> {
    if n < 2 {
        return Err(Error::Shape("Bell-state-measurement check needs n ≥ 2".into()));
    }
    let co = coarse_grain(s, n)?;
    if s.alice.len() < shifted_diamond_setting(n) + 1 {
        return Err(Error::Shape(
            "strategy lacks the Bell-state-measurement settings".into(),
        ));
    }
    let mut entries = Vec::new();
    let families = [
        (PairFamily::S, diamond_setting(n), n / 2, 0usize),
        (PairFamily::T, shifted_diamond_setting(n), (n - 1) / 2, 1usize),
    ];
    for (family, setting, pairs, shift) in families {
        for l in 0..pairs {
            let effects = pair_effects(s, setting, pairs, l)?;
            let (i, j) = (2 * l + shift, 2 * l + shift + 1);
            let corr = pair_correlators(&co, i, j, k);
            for (a, eff) in effects.iter().enumerate() {
                for (r, c) in corr.iter().enumerate() {
                    entries.push(BsmEntry {
                        family,
                        pair: l + 1,
                        outcome: a,
                        correlator: r,
                        value: s.expectation(c, eff)?.re,
                        expected: BSM_TABLE[a][r],
                    });
                }
            }
        }
    }
    let max_deviation = entries.iter().map(|e| (e.value - e.expected).abs()).fold(0.0, f64::max);
    Ok(BsmCorrelationReport { entries, max_deviation })
}

#[derive(Clone, Debug, PartialEq)]
pub enum AlignmentVerdict {
    /// Preconditions failed, so no alignment statement is made.
    NotApplicable {
        reason: String,
    },
    Checked {
        aligned: bool,
        two_term_residual: f64,
    },
}

/// Checks that junk weight sits only on the all-zeros and all-ones branches,
/// provided every parallel Bell value and the Bell-measurement table are within `tol`.
pub fn verify_alignment(s: &Strategy, n: usize, tol: f64, opts: &SwapOptions) -> Result<AlignmentVerdict> {
    let values = parallel_bell_values(s, n)?;
    if let Some((i, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| (TRIPLE_CHSH_MAX - **v).abs() > tol)
    {
        return Ok(AlignmentVerdict::NotApplicable {
            reason: format!("site {} Bell value {v:.12} is not maximal", i + 1),
        });
    }
    let bsm = bsm_correlations(s, n, 0)?;
    if bsm.max_deviation > tol {
        return Ok(AlignmentVerdict::NotApplicable {
            reason: format!("Bell-measurement table deviates by {:.6}", bsm.max_deviation),
        });
    }
    let swap = parallel_swap_isometry(s, n, 0, opts)?;
    let residual = swap.junk.weight_outside_uniform();
    Ok(AlignmentVerdict::Checked {
        aligned: residual <= tol,
        two_term_residual: residual,
    })
}

/// Largest `‖(O_i^{(k)} ∓ Ô_{i+n})|ψ⟩‖` over sites, labels and every `k`;
/// the Y comparison uses `Y_i|ψ⟩ = −Ŷ_{i+n}|ψ⟩`.
pub fn sharp_consistency_residual(s: &Strategy, co: &CoarseObservables) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..co.sites {
        let hats = co.alice_hat(i)?;
        for (label, hat) in hats.iter().enumerate() {
            let sign = if label == 2 { -1.0 } else { 1.0 };
            let av = s.apply_alice(&hat.scale_real(sign), &s.state)?;
            for k in 0..co.compatible_count() {
                let cv = s.apply_charlie(co.charlie_sharp(i, label, k), &s.state)?;
                worst = worst.max(cv.distance(&av));
            }
        }
    }
    Ok(worst)
}

/// Largest `‖[O_i^{(k)}, O'_j^{(k′)}]|ψ⟩‖` over distinct sites and all labels.
pub fn cross_site_commutation_residual(s: &Strategy, co: &CoarseObservables, k: usize, k2: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..co.sites {
        for j in 0..co.sites {
            if i == j {
                continue;
            }
            for a in 0..3 {
                for b in 0..3 {
                    let (p, q) = (co.charlie_sharp(i, a, k), co.charlie_sharp(j, b, k2));
                    let comm = &(p * q) - &(q * p);
                    worst = worst.max(s.apply_charlie(&comm, &s.state)?.norm());
                }
            }
        }
    }
    Ok(worst)
}

/// `(max_l ‖S_{l,0}|ψ⟩ − ¼(I+ZZ+XX−YY)|ψ⟩‖, max_l ‖(XX·ZZ + YY)|ψ⟩‖)` over
/// both pair families.
pub fn reconstruction_residuals(s: &Strategy, n: usize, k: usize) -> Result<(f64, f64)> {
    let co = coarse_grain(s, n)?;
    let mut rec: f64 = 0.0;
    let mut prod: f64 = 0.0;
    let families = [
        (diamond_setting(n), n / 2, 0usize),
        (shifted_diamond_setting(n), (n - 1) / 2, 1),
    ];
    for (setting, pairs, shift) in families {
        for l in 0..pairs {
            let s0 = &pair_effects(s, setting, pairs, l)?[0];
            let [id, zz, xx, yy] = pair_correlators(&co, 2 * l + shift, 2 * l + shift + 1, k);
            let combo = (&(&(&id + &zz) + &xx) - &yy).scale_real(0.25);
            let lhs = s.apply_alice(s0, &s.state)?;
            let rhs = s.apply_charlie(&combo, &s.state)?;
            rec = rec.max(lhs.distance(&rhs));
            let p = &(&xx * &zz) + &yy;
            prod = prod.max(s.apply_charlie(&p, &s.state)?.norm());
        }
    }
    Ok((rec, prod))
}
