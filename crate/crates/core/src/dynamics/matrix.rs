use std::ops::{Index, IndexMut};

use num_complex::Complex64;

/// Hermitian table `P_mn = C_m conj(C_n)`, stored row-major.
///
/// Indices are zero-based slots: entry `(a, b)` holds the product for modes
/// `a + 1` and `b + 1`. The flat position of `(a, b)` is `a * N + b`, the
/// ordering used by every dumped state and by the `N^2` linear system.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CoefficientMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    /// Outer product `C C^dagger`.
    pub fn from_amplitudes(c: &[Complex64]) -> Self {
        let n = c.len();
        let mut data = Vec::with_capacity(n * n);
        for cm in c {
            data.extend(c.iter().map(|cn| cm * cn.conj()));
        }
        Self { n, data }
    }

    /// The projector onto slot `a`.
    pub fn eigenstate(n: usize, a: usize) -> Self {
        let mut p = Self::zeros(n);
        p[(a, a)] = Complex64::new(1.0, 0.0);
        p
    }

    pub fn from_vec(n: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), n * n, "data length must be n^2");
        Self { n, data }
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|a| self.data[a * self.n + a]).sum()
    }

    /// Real part of the trace, `sum_n P_nn`.
    pub fn norm(&self) -> f64 {
        self.trace().re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.n).map(|a| self.data[a * self.n + a].re).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_offdiag(&self) -> f64 {
        let n = self.n;
        let mut best = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    best = best.max(self.data[a * n + b].norm());
                }
            }
        }
        best
    }

    /// `max |P_ba - conj(P_ab)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.n;
        let mut best = 0.0f64;
        for a in 0..n {
            for b in a..n {
                best = best.max((self.data[b * n + a] - self.data[a * n + b].conj()).norm());
            }
        }
        best
    }

    /// Replaces the table by `(P + P^dagger) / 2`.
    pub fn symmetrize(&mut self) {
        let n = self.n;
        for a in 0..n {
            self.data[a * n + a].im = 0.0;
            for b in a + 1..n {
                let avg = 0.5 * (self.data[a * n + b] + self.data[b * n + a].conj());
                self.data[a * n + b] = avg;
                self.data[b * n + a] = avg.conj();
            }
        }
    }

    /// `max |(P P - tr(P) P)_ab|`; zero for any exact outer product.
    pub fn rank1_defect(&self) -> f64 {
        let n = self.n;
        let tr = self.trace();
        let mut best = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..n {
                    acc += self.data[a * n + l] * self.data[l * n + b];
                }
                best = best.max((acc - tr * self.data[a * n + b]).norm());
            }
        }
        best
    }

    /// Largest entrywise distance to `other`.
    pub fn max_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += y * s;
        }
    }

    /// Writes `base + s * dir` into `self`.
    pub(crate) fn set_combination(&mut self, base: &Self, dir: &Self, s: f64) {
        for ((x, b), d) in self.data.iter_mut().zip(&base.data).zip(&dir.data) {
            *x = b + d * s;
        }
    }
}

impl Index<(usize, usize)> for CoefficientMatrix {
    type Output = Complex64;

    fn index(&self, (a, b): (usize, usize)) -> &Complex64 {
        &self.data[a * self.n + b]
    }
}

impl IndexMut<(usize, usize)> for CoefficientMatrix {
    fn index_mut(&mut self, (a, b): (usize, usize)) -> &mut Complex64 {
        &mut self.data[a * self.n + b]
    }
}
