use num_complex::Complex64;

use crate::basis::SpectralBasis;

/// Solution of the linear equation (`beta = 0`, no potential):
/// `C_n(t) = C_n(0) exp(-i E_n t)`.
pub fn lse_closed_form(c0: &[Complex64], basis: &SpectralBasis, t: f64) -> Vec<Complex64> {
    c0.iter()
        .zip(basis.energies())
        .map(|(c, e)| c * Complex64::from_polar(1.0, -e * t))
        .collect()
}
