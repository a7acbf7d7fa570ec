//! Eigensystem of the unit infinite square well and the closed-form overlap
//! tensors of its sine eigenfunctions.
//!
//! Mode numbers in the free functions are the physical, one-based labels
//! `n = 1, 2, ...`. Table accessors on [`SpectralBasis`] take zero-based slots
//! (slot `a` holds mode `a + 1`).

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Largest mode count [`SpectralBasis::new`] accepts unless told otherwise.
pub const DEFAULT_MAX_MODES: usize = 64;

/// `E_n = alpha (n pi)^2`.
pub fn eigenvalue(n: i64, alpha: f64) -> Result<f64> {
    check_mode(n)?;
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let k = n as f64 * PI;
    Ok(alpha * k * k)
}

/// `phi_n(x) = sqrt(2) sin(n pi x)` on `[0, 1]`.
pub fn eigenfunction_value(n: i64, x: f64) -> Result<f64> {
    check_mode(n)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x must lie in [0, 1], got {x}")));
    }
    Ok(sine_mode(n as usize, x))
}

/// Unchecked `sqrt(2) sin(n pi x)`.
#[inline]
pub(crate) fn sine_mode(n: usize, x: f64) -> f64 {
    SQRT_2 * (n as f64 * PI * x).sin()
}

/// Closed form of `int_0^1 phi_k phi_l phi_m phi_n dx`.
pub fn overlap4(k: i64, l: i64, m: i64, n: i64) -> Result<f64> {
    for i in [k, l, m, n] {
        check_mode(i)?;
    }
    Ok(overlap4_unchecked(k, l, m, n))
}

fn overlap4_unchecked(k: i64, l: i64, m: i64, n: i64) -> f64 {
    // The eighth term, delta(k + l + m + n), can never fire for positive modes.
    0.5 * (kron(k + l - m - n) + kron(k - l + m - n) + kron(k - l - m + n)
        - kron(k + l + m - n)
        - kron(k + l - m + n)
        - kron(k - l + m + n)
        - kron(k - l - m - n))
}

/// Closed form of `int_0^1 phi_l phi_m phi_n dx`.
pub fn overlap3(l: i64, m: i64, n: i64) -> Result<f64> {
    for i in [l, m, n] {
        check_mode(i)?;
    }
    Ok(overlap3_unchecked(l, m, n))
}

fn overlap3_unchecked(l: i64, m: i64, n: i64) -> f64 {
    SQRT_2 / PI
        * (-odd_reciprocal(l + m + n) + odd_reciprocal(l + m - n) + odd_reciprocal(l - m + n)
            - odd_reciprocal(l - m - n))
}

#[inline]
fn kron(s: i64) -> f64 {
    if s == 0 {
        1.0
    } else {
        0.0
    }
}

/// `1/k` for odd `k` of either sign, zero for even `k` (including 0).
#[inline]
fn odd_reciprocal(k: i64) -> f64 {
    if k % 2 != 0 {
        1.0 / k as f64
    } else {
        0.0
    }
}

fn check_mode(n: i64) -> Result<()> {
    if n < 1 {
        return Err(Error::Domain(format!("mode index must be >= 1, got {n}")));
    }
    Ok(())
}

/// Truncated sine basis with its energies and materialized overlap tensors.
///
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    n_modes: usize,
    alpha: f64,
    energies: Vec<f64>,
    tensor4: Vec<f64>,
    tensor3: Vec<f64>,
    cosines: CosineFactors,
}

impl SpectralBasis {
    pub fn new(n_modes: usize, alpha: f64) -> Result<Self> {
        Self::with_cap(n_modes, alpha, DEFAULT_MAX_MODES)
    }

    pub fn with_cap(n_modes: usize, alpha: f64, max_modes: usize) -> Result<Self> {
        if n_modes == 0 || n_modes > max_modes {
            return Err(Error::config(
                "basis.n_modes",
                format!("must lie in 1..={max_modes}, got {n_modes}"),
            ));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::config("basis.alpha", format!("must be positive, got {alpha}")));
        }
        let n = n_modes;
        let energies = (1..=n as i64).map(|k| eigenvalue(k, alpha)).collect::<Result<Vec<_>>>()?;

        let mut tensor4 = vec![0.0; n * n * n * n];
        for (idx, slot) in tensor4.iter_mut().enumerate() {
            let (a, b, c, d) = (idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n);
            *slot = overlap4_unchecked(a as i64 + 1, b as i64 + 1, c as i64 + 1, d as i64 + 1);
        }
        let mut tensor3 = vec![0.0; n * n * n];
        for (idx, slot) in tensor3.iter_mut().enumerate() {
            let (a, b, c) = (idx / (n * n), (idx / n) % n, idx % n);
            *slot = overlap3_unchecked(a as i64 + 1, b as i64 + 1, c as i64 + 1);
        }

        Ok(Self {
            n_modes,
            alpha,
            energies,
            tensor4,
            tensor3,
            cosines: CosineFactors::new(n),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Energy of zero-based slot `a`.
    #[inline]
    pub fn energy(&self, a: usize) -> f64 {
        self.energies[a]
    }

    /// Four-index overlap for zero-based slots.
    #[inline]
    pub fn d4(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.n_modes;
        self.tensor4[((a * n + b) * n + c) * n + d]
    }

    /// Three-index overlap for zero-based slots.
    #[inline]
    pub fn d3(&self, a: usize, b: usize, c: usize) -> f64 {
        let n = self.n_modes;
        self.tensor3[(a * n + b) * n + c]
    }

    /// Row-major `(k, l, m, n)` table, `N^4` entries.
    pub fn tensor4(&self) -> &[f64] {
        &self.tensor4
    }

    /// Row-major `(l, m, n)` table, `N^3` entries.
    pub fn tensor3(&self) -> &[f64] {
        &self.tensor3
    }

    pub fn cosine_factors(&self) -> &CosineFactors {
        &self.cosines
    }
}

/// Expansion of mode products in the cosine family `c_q(x) = cos(q pi x)`.
///
/// `phi_k phi_l = c_{|k-l|} - c_{k+l}`, so every product of two retained modes
/// lives in the span of `c_0 ... c_{2N}`. Since `int c_q c_p = w_q delta_qp`
/// with `w_0 = 1`, `w_q = 1/2`, the four-index tensor factors as
///
/// `D_klmn = sum_q w_q a_q(k,l) a_q(m,n)`
///
/// where `a_q(k,l)` is the coefficient of `c_q` in `phi_k phi_l`. The matrix
/// `a_q` has at most two nonzeros per row and is stored as a coordinate list.
#[derive(Debug, Clone)]
pub struct CosineFactors {
    terms: Vec<Vec<(usize, usize, f64)>>,
}

impl CosineFactors {
    fn new(n: usize) -> Self {
        let mut terms = vec![Vec::new(); 2 * n + 1];
        for a in 0..n {
            for b in 0..n {
                let (k, l) = (a + 1, b + 1);
                terms[k.abs_diff(l)].push((a, b, 1.0));
                terms[k + l].push((a, b, -1.0));
            }
        }
        Self { terms }
    }

    /// Highest cosine frequency, `2N`.
    pub fn max_frequency(&self) -> usize {
        self.terms.len() - 1
    }

    /// Nonzero `(slot_k, slot_l, coefficient)` entries of `a_q`.
    pub fn terms(&self, q: usize) -> &[(usize, usize, f64)] {
        &self.terms[q]
    }

    /// `int_0^1 cos^2(q pi x) dx`.
    pub fn weight(&self, q: usize) -> f64 {
        if q == 0 {
            1.0
        } else {
            0.5
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigenvalue_examples() {
        assert_relative_eq!(eigenvalue(1, 0.5).unwrap(), 0.5 * PI * PI, epsilon = 1e-15);
        assert_relative_eq!(eigenvalue(1, 0.5).unwrap(), 4.934802200544679, epsilon = 1e-12);
        let gap = eigenvalue(3, 0.5).unwrap() - eigenvalue(2, 0.5).unwrap();
        assert_relative_eq!(gap, 2.5 * PI * PI, epsilon = 1e-12);
        assert_relative_eq!(gap, 24.674011002723397, epsilon = 1e-11);
        assert_eq!(eigenvalue(1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn eigenvalue_rejects_bad_mode() {
        assert!(matches!(eigenvalue(0, 0.5), Err(Error::Domain(_))));
        assert!(matches!(eigenvalue(-2, 0.5), Err(Error::Domain(_))));
        assert!(eigenvalue(1, -1.0).is_err());
    }

    #[test]
    fn eigenfunction_examples() {
        assert_relative_eq!(eigenfunction_value(1, 0.5).unwrap(), SQRT_2, epsilon = 1e-15);
        assert!(eigenfunction_value(2, 0.5).unwrap().abs() < 1e-15);
        assert_relative_eq!(eigenfunction_value(3, 1.0 / 6.0).unwrap(), SQRT_2, epsilon = 1e-14);
        assert!(eigenfunction_value(1, 1.5).is_err());
        assert!(eigenfunction_value(1, -0.1).is_err());
        assert!(eigenfunction_value(0, 0.5).is_err());
    }

    #[test]
    fn overlap4_examples() {
        assert_eq!(overlap4(1, 1, 1, 1).unwrap(), 1.5);
        assert_eq!(overlap4(1, 2, 3, 4).unwrap(), 0.5);
        assert_eq!(overlap4(1, 1, 1, 2).unwrap(), 0.0);
        assert_eq!(overlap4(1, 2, 2, 1).unwrap(), 1.0);
        assert!(overlap4(0, 1, 1, 1).is_err());
    }

    #[test]
    fn overlap3_examples() {
        let expected = 8.0 * SQRT_2 / (3.0 * PI);
        assert_relative_eq!(overlap3(1, 1, 1).unwrap(), expected, epsilon = 1e-15);
        assert_relative_eq!(overlap3(1, 1, 1).unwrap(), 1.2004217548761416, epsilon = 1e-12);
        assert_eq!(overlap3(1, 1, 2).unwrap(), 0.0);
        assert_eq!(overlap3(1, 2, 3).unwrap(), 0.0);
        assert!(overlap3(1, 0, 1).is_err());
    }

    #[test]
    fn tensor4_values_are_from_the_half_integer_set() {
        let basis = SpectralBasis::new(8, 0.5).unwrap();
        for &v in basis.tensor4() {
            assert!([-1.0, -0.5, 0.0, 0.5, 1.0, 1.5].contains(&v), "unexpected value {v}");
        }
    }

    #[test]
    fn build_basis_sizes() {
        let basis = SpectralBasis::new(10, 0.5).unwrap();
        assert_eq!(basis.tensor4().len(), 10_000);
        assert_eq!(basis.tensor3().len(), 1_000);

        let single = SpectralBasis::new(1, 0.5).unwrap();
        assert_eq!(single.tensor4(), &[1.5]);
        assert_relative_eq!(single.tensor3()[0], 8.0 * SQRT_2 / (3.0 * PI), epsilon = 1e-15);

        let big = SpectralBasis::new(20, 0.5).unwrap();
        assert_relative_eq!(big.energies()[19], 200.0 * PI * PI, epsilon = 1e-10);
    }

    #[test]
    fn build_basis_enforces_cap() {
        assert!(matches!(SpectralBasis::new(0, 0.5), Err(Error::Config { .. })));
        assert!(matches!(SpectralBasis::new(65, 0.5), Err(Error::Config { .. })));
        assert!(SpectralBasis::with_cap(5, 0.5, 4).is_err());
        assert!(SpectralBasis::new(4, 0.0).is_err());
    }

    #[test]
    fn energies_scale_as_squares() {
        let basis = SpectralBasis::new(12, 0.7).unwrap();
        let e1 = basis.energy(0);
        for (a, w) in basis.energies().windows(2).enumerate() {
            assert!(w[1] > w[0]);
            let n = (a + 2) as f64;
            assert_relative_eq!(w[1] / e1, n * n, max_relative = 1e-14);
        }
    }

    #[test]
    fn cosine_factors_reproduce_tensor4() {
        let n = 7;
        let basis = SpectralBasis::new(n, 0.5).unwrap();
        let cf = basis.cosine_factors();
        let mut dense = vec![0.0; cf.max_frequency() + 1];
        let coeff = |q: usize, a: usize, b: usize| {
            cf.terms(q).iter().filter(|t| t.0 == a && t.1 == b).map(|t| t.2).sum::<f64>()
        };
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        for (q, slot) in dense.iter_mut().enumerate() {
                            *slot = cf.weight(q) * coeff(q, a, b) * coeff(q, c, d);
                        }
                        let sum: f64 = dense.iter().sum();
                        assert_eq!(sum, basis.d4(a, b, c, d), "({a},{b},{c},{d})");
                    }
                }
            }
        }
    }

    #[test]
    fn overlap3_parity_selection() {
        for l in 1..=9 {
            for m in 1..=9 {
                for n in 1..=9 {
                    if (l + m + n) % 2 == 0 {
                        assert_eq!(overlap3(l, m, n).unwrap(), 0.0);
                    }
                }
            }
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn overlap4_is_permutation_invariant(k in 1i64..30, l in 1i64..30, m in 1i64..30, n in 1i64..30) {
                let v = overlap4(k, l, m, n).unwrap();
                let idx = [k, l, m, n];
                for p in permutations4() {
                    let w = overlap4(idx[p[0]], idx[p[1]], idx[p[2]], idx[p[3]]).unwrap();
                    prop_assert_eq!(v, w);
                }
            }

            #[test]
            fn overlap3_is_permutation_invariant(l in 1i64..40, m in 1i64..40, n in 1i64..40) {
                let v = overlap3(l, m, n).unwrap();
                for (a, b, c) in [(l, n, m), (m, l, n), (m, n, l), (n, l, m), (n, m, l)] {
                    prop_assert!((v - overlap3(a, b, c).unwrap()).abs() < 1e-15);
                }
            }
        }

        fn permutations4() -> Vec<[usize; 4]> {
            let mut out = Vec::new();
            for a in 0..4 {
                for b in 0..4 {
                    for c in 0..4 {
                        for d in 0..4 {
                            let p = [a, b, c, d];
                            let mut seen = [false; 4];
                            p.iter().for_each(|&i| seen[i] = true);
                            if seen.iter().all(|&s| s) {
                                out.push(p);
                            }
                        }
                    }
                }
            }
            out
        }
    }
}
