#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rescale::linalg::{random_spd, standard_normal_vector};
use rescale::{Matrix, SpdMatrix, Vector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random `H`, `g`, `g_+` with `s^T y >= 0.01 |s| |y|`, `s = -H g`.
pub fn bfgs_inputs(n: usize, seed: u64) -> (SpdMatrix, Vector, Vector) {
    let mut r = rng(seed);
    let h = random_spd(n, 1.0, &mut r);
    let g = standard_normal_vector(n, &mut r);
    let s = -h.mul_vec(&g);
    loop {
        let mut y = standard_normal_vector(n, &mut r);
        if s.dot(&y) < 0.0 {
            y = -y;
        }
        if s.dot(&y) >= 0.01 * s.norm() * y.norm() {
            let g_plus = &g + y;
            return (h, g, g_plus);
        }
    }
}

pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn det(m: &Matrix) -> f64 {
    m.clone().lu().determinant()
}

pub fn random_symmetric(n: usize, r: &mut ChaCha8Rng) -> Matrix {
    let g = rescale::linalg::standard_normal_matrix(n, n, r);
    (&g + g.transpose()) * 0.5
}
