//! Seeded samplers for matrices and unitaries.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numkernel::{c, CMatrix};

pub type Rng64 = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives the `index`-th child seed of `master` (splitmix64 finalizer).
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian(rng: &mut Rng64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn gaussian_matrix(rng: &mut Rng64, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase correction).
pub fn haar_unitary(rng: &mut Rng64, n: usize) -> CMatrix {
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    let qr = gaussian_matrix(rng, n, n).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random Hermitian matrix `(X + X†)/2`.
pub fn hermitian(rng: &mut Rng64, n: usize) -> CMatrix {
    let x = gaussian_matrix(rng, n, n);
    (&x + x.adjoint()) * c(0.5, 0.0)
}

/// Uniform index in `0..n` (n > 0).
pub fn index(rng: &mut Rng64, n: usize) -> usize {
    rng.random_range(0..n)
}

pub fn coin(rng: &mut Rng64, p: f64) -> bool {
    rng.random_bool(p)
}
