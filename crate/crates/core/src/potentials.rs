//! Time-dependent perturbations of the well, given by their sine-mode
//! coefficients `V_n(t) = gamma_n t^mu w(omega t + phi0) exp(-lambda t)`.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::SpectralBasis;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    Sine,
    Cosine,
}

impl Waveform {
    #[inline]
    fn eval(self, phase: f64) -> f64 {
        match self {
            Waveform::Sine => phase.sin(),
            Waveform::Cosine => phase.cos(),
        }
    }
}

/// One member of the power-law / oscillating / decaying potential family.
/// All modes share the temporal envelope; only the amplitudes differ.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub gammas: Vec<f64>,
    pub mu: f64,
    pub omega: f64,
    pub phi0: f64,
    pub lambda: f64,
    pub waveform: Waveform,
}

impl PotentialSpec {
    pub fn new(
        gammas: Vec<f64>,
        mu: f64,
        omega: f64,
        phi0: f64,
        lambda: f64,
        waveform: Waveform,
    ) -> Result<Self> {
        let spec = Self {
            gammas,
            mu,
            omega,
            phi0,
            lambda,
            waveform,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `V_n(t) = gamma_n` for all `t`.
    pub fn constant(gammas: Vec<f64>) -> Self {
        Self {
            gammas,
            mu: 0.0,
            omega: 0.0,
            phi0: FRAC_PI_2,
            lambda: 0.0,
            waveform: Waveform::Sine,
        }
    }

    pub fn zero(n_modes: usize) -> Self {
        Self::constant(vec![0.0; n_modes])
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [("potential.mu", self.mu), ("potential.omega", self.omega), ("potential.lambda", self.lambda)];
        for (path, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(path, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !self.phi0.is_finite() {
            return Err(Error::config("potential.phi0", "must be finite"));
        }
        if let Some(g) = self.gammas.iter().find(|g| !g.is_finite()) {
            return Err(Error::config("potential.gammas", format!("non-finite amplitude {g}")));
        }
        Ok(())
    }

    /// Checks that the amplitudes cover exactly the modes of `basis`.
    pub fn check_against(&self, basis: &SpectralBasis) -> Result<()> {
        if self.gammas.len() != basis.n_modes() {
            return Err(Error::config(
                "potential.gammas",
                format!("expected {} amplitudes, got {}", basis.n_modes(), self.gammas.len()),
            ));
        }
        Ok(())
    }

    pub fn n_modes(&self) -> usize {
        self.gammas.len()
    }

    /// Shared temporal factor `t^mu w(omega t + phi0) exp(-lambda t)`.
    #[inline]
    pub fn envelope(&self, t: f64) -> f64 {
        let power = if self.mu == 0.0 { 1.0 } else { t.powf(self.mu) };
        let decay = if self.lambda == 0.0 { 1.0 } else { (-self.lambda * t).exp() };
        power * self.waveform.eval(self.omega * t + self.phi0) * decay
    }

    /// `V_n(t)` for the one-based mode `n`.
    pub fn coefficient(&self, n: usize, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time must be >= 0, got {t}")));
        }
        if n == 0 || n > self.gammas.len() {
            return Err(Error::Domain(format!("mode {n} outside 1..={}", self.gammas.len())));
        }
        Ok(self.gammas[n - 1] * self.envelope(t))
    }

    /// All coefficients at time `t`, slot-indexed.
    pub fn coefficients_into(&self, t: f64, out: &mut [f64]) {
        let env = self.envelope(t);
        for (o, g) in out.iter_mut().zip(&self.gammas) {
            *o = g * env;
        }
    }
}

/// Cosine drive at the Bohr frequency `|E_k - E_j|` with equal amplitude on
/// every mode.
pub fn resonant_drive(basis: &SpectralBasis, j: usize, k: usize, gamma: f64) -> Result<PotentialSpec> {
    let n = basis.n_modes();
    for (name, v) in [("j", j), ("k", k)] {
        if v == 0 || v > n {
            return Err(Error::config(format!("potential.resonant_modes.{name}"), format!("mode {v} outside 1..={n}")));
        }
    }
    if j == k {
        return Err(Error::config("potential.resonant_modes", format!("degenerate drive: j = k = {j}")));
    }
    let omega = (basis.energy(k - 1) - basis.energy(j - 1)).abs();
    PotentialSpec::new(vec![gamma; n], 0.0, omega, 0.0, 0.0, Waveform::Cosine)
}

/// Seeded amplitudes drawn uniformly from `[-scale, scale]`.
pub fn random_gammas(n_modes: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_modes).map(|_| scale * rng.random_range(-1.0..=1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_potential_example() {
        let spec = PotentialSpec::new(vec![1.0], 0.0, 0.0, FRAC_PI_2, 0.0, Waveform::Sine).unwrap();
        for t in [0.0, 0.3, 7.0, 1e3] {
            assert_eq!(spec.coefficient(1, t).unwrap(), 1.0);
        }
        assert_eq!(PotentialSpec::constant(vec![0.25, -2.0]).coefficient(2, 4.0).unwrap(), -2.0);
    }

    #[test]
    fn zero_amplitude_gives_zero() {
        let spec = PotentialSpec::new(vec![0.0; 3], 1.5, 3.0, 0.2, 0.1, Waveform::Sine).unwrap();
        for t in [0.0, 0.5, 2.0] {
            for n in 1..=3 {
                assert_eq!(spec.coefficient(n, t).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn resonant_cosine_starts_at_amplitude() {
        let spec = PotentialSpec::new(vec![1.0], 0.0, 2.5 * PI * PI, 0.0, 0.0, Waveform::Cosine).unwrap();
        assert_eq!(spec.coefficient(1, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn zero_to_the_zero_is_one() {
        let spec = PotentialSpec::new(vec![2.0], 0.0, 0.0, 0.0, 0.0, Waveform::Cosine).unwrap();
        assert_eq!(spec.coefficient(1, 0.0).unwrap(), 2.0);
        let linear = PotentialSpec::new(vec![2.0], 1.0, 0.0, 0.0, 0.0, Waveform::Cosine).unwrap();
        assert_eq!(linear.coefficient(1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn coefficient_domain_errors() {
        let spec = PotentialSpec::constant(vec![1.0, 1.0]);
        assert!(matches!(spec.coefficient(1, -0.1), Err(Error::Domain(_))));
        assert!(spec.coefficient(0, 1.0).is_err());
        assert!(spec.coefficient(3, 1.0).is_err());
    }

    #[test]
    fn validation_rejects_negative_parameters() {
        assert!(PotentialSpec::new(vec![1.0], -1.0, 0.0, 0.0, 0.0, Waveform::Sine).is_err());
        assert!(PotentialSpec::new(vec![1.0], 0.0, -1.0, 0.0, 0.0, Waveform::Sine).is_err());
        assert!(PotentialSpec::new(vec![1.0], 0.0, 0.0, 0.0, -0.5, Waveform::Sine).is_err());
        assert!(PotentialSpec::new(vec![f64::NAN], 0.0, 0.0, 0.0, 0.0, Waveform::Sine).is_err());
    }

    #[test]
    fn resonant_drive_examples() {
        let basis = SpectralBasis::new(10, 0.5).unwrap();
        let d23 = resonant_drive(&basis, 2, 3, 1.0).unwrap();
        assert!((d23.omega - 2.5 * PI * PI).abs() < 1e-12);
        assert!((d23.omega - 24.674).abs() < 1e-3);
        assert_eq!(d23.waveform, Waveform::Cosine);
        assert_eq!((d23.mu, d23.lambda, d23.phi0), (0.0, 0.0, 0.0));
        assert_eq!(d23.gammas, vec![1.0; 10]);

        let d12 = resonant_drive(&basis, 1, 2, 1.0).unwrap();
        assert!((d12.omega - 1.5 * PI * PI).abs() < 1e-12);

        assert!(resonant_drive(&basis, 2, 2, 1.0).is_err());
        assert!(resonant_drive(&basis, 2, 11, 1.0).is_err());
    }

    #[test]
    fn random_gammas_are_seeded_and_bounded() {
        let a = random_gammas(20, 0.3, 9);
        assert_eq!(a, random_gammas(20, 0.3, 9));
        assert_ne!(a, random_gammas(20, 0.3, 10));
        assert!(a.iter().all(|g| g.abs() <= 0.3));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn decaying_envelope_is_bounded(
                gamma in -3.0f64..3.0,
                mu in 0.0f64..3.0,
                omega in 0.0f64..50.0,
                phi0 in -4.0f64..4.0,
                lambda in 0.05f64..2.0,
                t in 0.0f64..200.0,
            ) {
                let spec = PotentialSpec::new(vec![gamma], mu, omega, phi0, lambda, Waveform::Sine).unwrap();
                let v = spec.coefficient(1, t).unwrap();
                let bound = gamma.abs() * t.powf(mu) * (-lambda * t).exp();
                prop_assert!(v.abs() <= bound * (1.0 + 1e-12) + 1e-300);
            }

            #[test]
            fn evaluation_is_deterministic(t in 0.0f64..100.0, mu in 0.0f64..2.0) {
                let spec = PotentialSpec::new(vec![0.7, -0.2], mu, 3.1, 0.4, 0.2, Waveform::Cosine).unwrap();
                let a = spec.coefficient(2, t).unwrap();
                let b = spec.coefficient(2, t).unwrap();
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn decaying_tail_vanishes() {
        let spec = PotentialSpec::new(vec![1.0, -0.5], 1.0, 4.0, 0.3, 0.5, Waveform::Sine).unwrap();
        let sup_after = |t0: f64| {
            (0..2000)
                .map(|i| t0 + i as f64 * 0.05)
                .map(|t| spec.coefficient(1, t).unwrap().abs())
                .fold(0.0, f64::max)
        };
        assert!(sup_after(40.0) < 1e-6);
        assert!(sup_after(80.0) < sup_after(40.0));
    }
}
