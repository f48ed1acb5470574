//! Seeded sampling of states, unitaries and observables.

use nalgebra as na;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::tensor::{ComplexMatrix, C64};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Uniformly distributed unit vector in `C^dim`.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..dim).map(|_| gaussian_complex(rng)).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

fn ginibre<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> na::DMatrix<C64> {
    na::DMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng))
}

/// Haar-random unitary (QR of a Ginibre matrix with the phases of R divided out).
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let qr = na::linalg::QR::new(ginibre(rng, dim));
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    ComplexMatrix::from_na(&q)
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_na(&ginibre(rng, dim));
    (&g + &g.dagger()).scale_real(0.5)
}

/// `U diag(±1) U†` with random signs and Haar `U`.
pub fn random_hermitian_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let u = haar_unitary(rng, dim);
    let signs: Vec<f64> = (0..dim)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    &(&u * &ComplexMatrix::diag_real(&signs)) * &u.dagger()
}

/// Density matrix `G G† / tr(G G†)` from a Ginibre matrix.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_na(&ginibre(rng, dim));
    let rho = &g * &g.dagger();
    let t = rho.trace().re;
    rho.scale_real(1.0 / t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = seeded_rng(7);
        for dim in 1..6 {
            assert!(haar_unitary(&mut rng, dim).is_unitary(1e-12));
        }
    }

    #[test]
    fn hermitian_unitary_squares_to_identity() {
        let mut rng = seeded_rng(8);
        let m = random_hermitian_unitary(&mut rng, 4);
        assert!(m.is_hermitian(1e-12));
        assert!((&m * &m).max_abs_diff(&ComplexMatrix::identity(4)) < 1e-12);
    }

    #[test]
    fn density_has_unit_trace() {
        let mut rng = seeded_rng(9);
        let r = random_density(&mut rng, 4);
        assert!((r.trace().re - 1.0).abs() < 1e-12);
        assert!(r.is_hermitian(1e-12));
    }

    #[test]
    fn same_seed_same_draw() {
        let a = random_unit_vector(&mut seeded_rng(3), 5);
        let b = random_unit_vector(&mut seeded_rng(3), 5);
        assert_eq!(a, b);
    }
}
