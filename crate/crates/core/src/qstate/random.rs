//! Reproducible random states and unitaries for sweeps and tests.

use super::{Ket, QStateError};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

/// One standard normal draw via Box-Muller.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(standard_normal(rng), standard_normal(rng))
}

/// Haar-random pure state: a normalized vector of independent complex
/// normals.
pub fn haar_ket<R: Rng>(dims: &[usize], rng: &mut R) -> Result<Ket, QStateError> {
    let total: usize = dims.iter().product();
    let amps: Vec<Complex64> = (0..total).map(|_| complex_normal(rng)).collect();
    Ket::new(dims.to_vec(), amps)?.normalized()
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the column
/// phases fixed by the sign of the R diagonal.
pub fn haar_unitary<R: Rng>(dim: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| complex_normal(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}
