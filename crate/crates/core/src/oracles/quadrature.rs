use crate::basis::sine_mode;
use crate::error::{Error, Result};

/// Composite Simpson's rule for `f` on `[0, 1]` with `m` equally spaced
/// points (`m` odd, at least 3).
pub fn simpson<F: Fn(f64) -> f64>(f: F, m: usize) -> Result<f64> {
    if m < 3 || m % 2 == 0 {
        return Err(Error::Domain(format!("Simpson's rule needs an odd point count >= 3, got {m}")));
    }
    let dx = 1.0 / (m - 1) as f64;
    let mut acc = f(0.0) + f(1.0);
    for i in 1..m - 1 {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * dx);
    }
    Ok(acc * dx / 3.0)
}

/// Simpson approximation of `int_0^1 prod phi_{n_i}(x) dx` for three or four
/// one-based mode indices.
pub fn quadrature_overlap(indices: &[i64], m: usize) -> Result<f64> {
    if !(3..=4).contains(&indices.len()) {
        return Err(Error::Domain(format!("expected 3 or 4 indices, got {}", indices.len())));
    }
    if let Some(n) = indices.iter().find(|&&n| n < 1) {
        return Err(Error::Domain(format!("mode index must be >= 1, got {n}")));
    }
    let modes: Vec<usize> = indices.iter().map(|&n| n as usize).collect();
    simpson(|x| modes.iter().map(|&n| sine_mode(n, x)).product(), m)
}

/// `int_0^1 phi_m phi_n dx`.
pub fn quadrature_inner(m: i64, n: i64, points: usize) -> Result<f64> {
    if m < 1 || n < 1 {
        return Err(Error::Domain(format!("mode indices must be >= 1, got ({m}, {n})")));
    }
    simpson(|x| sine_mode(m as usize, x) * sine_mode(n as usize, x), points)
}
