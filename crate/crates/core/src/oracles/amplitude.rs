//! Direct integration of the amplitude equations
//! `i dC_k/dt = E_k C_k + sum_j U_kj C_j + beta sum_lmn D_klmn C_l (conj(C_n) dC_m/dt + C_m conj(dC_n/dt))`.
//! The implicit relation is split into real and imaginary parts and solved
//! with nalgebra's LU, independently of the product-matrix solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::basis::SpectralBasis;
use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `dC/dt` for normalized amplitudes `c`.
pub fn amplitude_derivative(
    c: &[Complex64],
    t: f64,
    basis: &SpectralBasis,
    pot: Option<&PotentialSpec>,
    beta: f64,
) -> Result<Vec<Complex64>> {
    let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(format!("amplitudes must be normalized, sum |C|^2 = {norm}")));
    }
    raw_derivative(c, t, basis, pot, beta)
}

fn raw_derivative(
    c: &[Complex64],
    t: f64,
    basis: &SpectralBasis,
    pot: Option<&PotentialSpec>,
    beta: f64,
) -> Result<Vec<Complex64>> {
    let n = basis.n_modes();
    if c.len() != n {
        return Err(Error::Domain(format!("expected {n} amplitudes, got {}", c.len())));
    }
    if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::StateCorruption { t });
    }

    let mut r: Vec<Complex64> = (0..n).map(|k| basis.energy(k) * c[k]).collect();
    if let Some(pot) = pot {
        let mut v = vec![0.0; n];
        pot.coefficients_into(t, &mut v);
        for (k, rk) in r.iter_mut().enumerate() {
            for (j, cj) in c.iter().enumerate() {
                let u: f64 = (0..n).map(|m| v[m] * basis.d3(k, m, j)).sum();
                *rk += u * cj;
            }
        }
    }

    // G_kmn = sum_l D_klmn C_l; A_km = sum_n G_kmn conj(C_n); B_kn = sum_m G_kmn C_m.
    let mut a = vec![ZERO; n * n];
    let mut b = vec![ZERO; n * n];
    for k in 0..n {
        for m in 0..n {
            for nn in 0..n {
                let g: Complex64 = (0..n).map(|l| basis.d4(k, l, m, nn) * c[l]).sum();
                a[k * n + m] += g * c[nn].conj();
                b[k * n + nn] += g * c[m];
            }
        }
    }

    // (i I - beta A) y - beta B conj(y) = r, with y = u + i v.
    let mut sys = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let mut rhs = DVector::<f64>::zeros(2 * n);
    for k in 0..n {
        rhs[k] = r[k].re;
        rhs[n + k] = r[k].im;
        for j in 0..n {
            let mut mk = -beta * a[k * n + j];
            if k == j {
                mk += Complex64::new(0.0, 1.0);
            }
            let bk = beta * b[k * n + j];
            sys[(k, j)] = mk.re - bk.re;
            sys[(k, n + j)] = -mk.im - bk.im;
            sys[(n + k, j)] = mk.im - bk.im;
            sys[(n + k, n + j)] = mk.re + bk.re;
        }
    }

    let lu = sys.lu();
    let pivot = (0..2 * n).map(|i| lu.u()[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    let threshold = 1e-14 * (1.0 + beta.abs());
    let y = match lu.solve(&rhs) {
        Some(y) if pivot > threshold => y,
        _ => return Err(Error::SolverBreakdown { t, pivot, threshold }),
    };
    Ok((0..n).map(|k| Complex64::new(y[k], y[n + k])).collect())
}

/// Amplitudes recorded at a sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSample {
    pub t: f64,
    pub amplitudes: Vec<Complex64>,
}

impl AmplitudeSample {
    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `C_m conj(C_n)`, row-major.
    pub fn products(&self) -> Vec<Complex64> {
        let c = &self.amplitudes;
        c.iter().flat_map(|cm| c.iter().map(move |cn| cm * cn.conj())).collect()
    }
}

/// Classical RK4 on the amplitudes from `t = 0` to `steps * h`, sampling every
/// `stride` steps (and at the end).
pub fn amplitude_evolve(
    c0: &[Complex64],
    basis: &SpectralBasis,
    pot: Option<&PotentialSpec>,
    beta: f64,
    h: f64,
    steps: usize,
    stride: usize,
) -> Result<Vec<AmplitudeSample>> {
    if !(h > 0.0) || stride == 0 {
        return Err(Error::Domain("step must be positive and stride >= 1".into()));
    }
    amplitude_derivative(c0, 0.0, basis, pot, beta)?;

    let axpy = |x: &[Complex64], k: &[Complex64], s: f64| -> Vec<Complex64> {
        x.iter().zip(k).map(|(a, b)| a + b * s).collect()
    };
    let mut c = c0.to_vec();
    let mut out = vec![AmplitudeSample { t: 0.0, amplitudes: c.clone() }];
    for step in 0..steps {
        let t = step as f64 * h;
        let k1 = raw_derivative(&c, t, basis, pot, beta)?;
        let k2 = raw_derivative(&axpy(&c, &k1, 0.5 * h), t + 0.5 * h, basis, pot, beta)?;
        let k3 = raw_derivative(&axpy(&c, &k2, 0.5 * h), t + 0.5 * h, basis, pot, beta)?;
        let k4 = raw_derivative(&axpy(&c, &k3, h), t + h, basis, pot, beta)?;
        for i in 0..c.len() {
            c[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
        }
        if (step + 1) % stride == 0 || step + 1 == steps {
            out.push(AmplitudeSample {
                t: (step + 1) as f64 * h,
                amplitudes: c.clone(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::lse_closed_form;

    fn seeded(n: usize) -> Vec<Complex64> {
        let raw: Vec<Complex64> = (0..n)
            .map(|a| Complex64::from_polar(1.0 / (1.0 + a as f64), 0.7 * a as f64 + 0.3))
            .collect();
        let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        raw.iter().map(|z| z / norm).collect()
    }

    #[test]
    fn eigenstate_rotates_in_phase() {
        let basis = SpectralBasis::new(4, 0.5).unwrap();
        let mut c = vec![ZERO; 4];
        c[1] = Complex64::new(1.0, 0.0);
        let d = amplitude_derivative(&c, 0.0, &basis, None, 1.0).unwrap();
        for (k, dk) in d.iter().enumerate() {
            let want = if k == 1 { Complex64::new(0.0, -basis.energy(1)) } else { ZERO };
            assert!((dk - want).norm() < 1e-12);
        }
    }

    #[test]
    fn linear_limit() {
        let basis = SpectralBasis::new(5, 0.5).unwrap();
        let c = seeded(5);
        let d = amplitude_derivative(&c, 0.0, &basis, None, 0.0).unwrap();
        for k in 0..5 {
            let want = Complex64::new(0.0, -basis.energy(k)) * c[k];
            assert!((d[k] - want).norm() < 1e-12);
        }
        let traj = amplitude_evolve(&c, &basis, None, 0.0, 1e-4, 10_000, 10_000).unwrap();
        let exact = lse_closed_form(&c, &basis, 1.0);
        for (a, b) in traj.last().unwrap().amplitudes.iter().zip(&exact) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn nonlinear_term_conserves_norm_rate() {
        let basis = SpectralBasis::new(6, 0.5).unwrap();
        let c = seeded(6);
        let pot = PotentialSpec::constant(vec![0.3, -0.2, 0.5, 0.1, 0.0, -0.4]);
        let d = amplitude_derivative(&c, 0.0, &basis, Some(&pot), 1.0).unwrap();
        let rate: f64 = c.iter().zip(&d).map(|(ci, di)| 2.0 * (ci.conj() * di).re).sum();
        assert!(rate.abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized_amplitudes() {
        let basis = SpectralBasis::new(2, 0.5).unwrap();
        let c = [Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.0)];
        assert!(matches!(
            amplitude_derivative(&c, 0.0, &basis, None, 1.0),
            Err(Error::Domain(_))
        ));
    }
}
