//! Catalogue of initial states. Moduli follow the chosen shape; every
//! amplitude gets an independent uniformly random phase from the seed.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::CoefficientMatrix;
use crate::error::{Error, Result};

/// Number of top modes left empty by the shape generators that do not name
/// their support explicitly.
pub const DEFAULT_PAD: usize = 5;

/// Mode indices are one-based.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialKind {
    /// Equal populations on modes `1..=count`.
    UniformFirst { count: usize },
    /// Populations proportional to `1/n`.
    Decreasing,
    TwoMode { modes: [usize; 2] },
    ThreeMode { modes: [usize; 3] },
    /// Gaussian profile in the mode index.
    Pulse { center: usize, width: f64 },
    /// Populations drawn uniformly from `(0, 1)`.
    Random,
    Eigenstate { mode: usize },
}

/// `P0 = C C^dagger` with the default padding.
pub fn initial_state(kind: &InitialKind, n_modes: usize, seed: u64) -> Result<CoefficientMatrix> {
    initial_state_padded(kind, n_modes, seed, DEFAULT_PAD)
}

pub fn initial_state_padded(kind: &InitialKind, n_modes: usize, seed: u64, pad: usize) -> Result<CoefficientMatrix> {
    Ok(CoefficientMatrix::from_amplitudes(&initial_amplitudes(kind, n_modes, seed, pad)?))
}

/// Normalized amplitudes `C_n(0)`; `pad` empty top modes are kept for the
/// decreasing, pulse and random shapes.
pub fn initial_amplitudes(kind: &InitialKind, n_modes: usize, seed: u64, pad: usize) -> Result<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let in_range = |path: &str, m: usize, hi: usize| -> Result<()> {
        if m == 0 || m > hi {
            Err(Error::config(format!("initial.{path}"), format!("mode {m} outside 1..={hi}")))
        } else {
            Ok(())
        }
    };
    let support = || -> Result<usize> {
        n_modes
            .checked_sub(pad)
            .filter(|&s| s >= 1)
            .ok_or_else(|| Error::config("initial.pad", format!("padding {pad} leaves no modes out of {n_modes}")))
    };

    let mut weights = vec![0.0; n_modes];
    match kind {
        InitialKind::UniformFirst { count } => {
            in_range("count", *count, n_modes)?;
            weights[..*count].fill(1.0);
        }
        InitialKind::Decreasing => {
            for (a, w) in weights[..support()?].iter_mut().enumerate() {
                *w = 1.0 / (a + 1) as f64;
            }
        }
        InitialKind::TwoMode { modes } => set_modes(&mut weights, modes, "modes", &in_range)?,
        InitialKind::ThreeMode { modes } => set_modes(&mut weights, modes, "modes", &in_range)?,
        InitialKind::Pulse { center, width } => {
            let s = support()?;
            in_range("center", *center, s)?;
            if !(*width > 0.0) {
                return Err(Error::config("initial.width", "must be positive"));
            }
            for (a, w) in weights[..s].iter_mut().enumerate() {
                let d = (a + 1) as f64 - *center as f64;
                *w = (-d * d / (2.0 * width * width)).exp();
            }
        }
        InitialKind::Random => {
            for w in weights[..support()?].iter_mut() {
                // (0, 1]: every mode of the support stays occupied.
                *w = 1.0 - rng.random::<f64>();
            }
        }
        InitialKind::Eigenstate { mode } => {
            in_range("mode", *mode, n_modes)?;
            weights[mode - 1] = 1.0;
        }
    }

    let total: f64 = weights.iter().sum();
    Ok(weights
        .iter()
        .map(|w| Complex64::from_polar((w / total).sqrt(), rng.random::<f64>() * TAU))
        .collect())
}

fn set_modes<F>(weights: &mut [f64], modes: &[usize], path: &str, in_range: &F) -> Result<()>
where
    F: Fn(&str, usize, usize) -> Result<()>,
{
    for (i, &m) in modes.iter().enumerate() {
        in_range(path, m, weights.len())?;
        if modes[..i].contains(&m) {
            return Err(Error::config(format!("initial.{path}"), format!("mode {m} listed twice")));
        }
        weights[m - 1] = 1.0;
    }
    Ok(())
}
