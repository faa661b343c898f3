#![allow(dead_code)]

use ghz_core::qmath::{ComplexMatrix, DensityMatrix, Ket};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian_complex<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Ginibre-distributed mixed state of rank `rank`.
pub fn random_state<R: Rng>(rng: &mut R, n: usize, rank: usize) -> DensityMatrix {
    let dim = 1 << n;
    let entries: Vec<Complex64> = (0..dim * dim)
        .map(|k| {
            if k % dim < rank {
                gaussian_complex(rng)
            } else {
                Complex64::from(0.0)
            }
        })
        .collect();
    let g = ComplexMatrix::from_fn(dim, |i, j| entries[i * dim + j]);
    let w = &g * &g.adjoint();
    let tr = w.trace().re;
    DensityMatrix::new(w.scale(Complex64::from(1.0 / tr)).hermitian_part()).unwrap()
}

pub fn random_ket<R: Rng>(rng: &mut R, dim: usize) -> Ket {
    let amps: Vec<Complex64> = (0..dim).map(|_| gaussian_complex(rng)).collect();
    let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ket::new(amps.into_iter().map(|z| z / norm).collect())
}

/// Fifty test states over one to four qubits: pure, low-rank and full-rank.
pub fn state_grid() -> Vec<DensityMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    (0..50)
        .map(|k| {
            let n = 1 + k % 4;
            let rank = match k % 3 {
                0 => 1,
                1 => 2.min(1 << n),
                _ => 1 << n,
            };
            random_state(&mut rng, n, rank)
        })
        .collect()
}
