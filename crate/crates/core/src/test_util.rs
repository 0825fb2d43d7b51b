//! Small deterministic random generators shared by unit tests.

use num_complex::Complex64 as C64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{CMat, CVec};

pub struct Rng64(ChaCha8Rng);

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Rng64(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn cnormal(&mut self) -> C64 {
        C64::new(self.normal(), self.normal()) * std::f64::consts::FRAC_1_SQRT_2
    }
}

pub fn rand_matrix(m: usize, n: usize, rng: &mut Rng64) -> CMat {
    CMat::from_fn(m, n, |_, _| rng.cnormal())
}

pub fn rand_hermitian(n: usize, rng: &mut Rng64) -> CMat {
    let a = rand_matrix(n, n, rng);
    (&a + a.adjoint()).scale(0.5)
}

pub fn rand_cvec(n: usize, rng: &mut Rng64) -> CVec {
    CVec::from_fn(n, |_, _| rng.cnormal())
}

pub fn rand_unit_cvec(n: usize, rng: &mut Rng64) -> CVec {
    let mut v = rand_cvec(n, rng);
    let nrm = v.norm();
    v.unscale_mut(nrm);
    v
}
