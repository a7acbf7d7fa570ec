//! The implicit equations of motion for the product matrix.
//!
//! Writing `X = dP/dt`, the equation for row `(j, k)` reads
//!
//! ```text
//! i X_jk + beta * sum_{l,m,n} (D_klmn P_jl - D_jlmn P_lk) X_mn
//!     = (E_j - E_k) P_jk + sum_{m,n} V_m (D_jmn P_nk - D_kmn P_jn)
//! ```
//!
//! In matrix form this is `i X + beta [P, W(X)] = [H(t), P]` with
//! `W(X)_kl = sum_mn D_klmn X_mn` and `H(t) = diag(E) + U(t)`,
//! `U_jn = sum_m V_m(t) D_jmn`. Rows and columns of the `N^2 x N^2` system are
//! flattened as `(j - 1) N + k` (zero-based: `j * N + k`).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lu::{Breakdown, DenseLu};
use super::matrix::CoefficientMatrix;
use crate::basis::SpectralBasis;
use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// How the `N^2` linear system is solved at each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    /// Assemble the full `N^2 x N^2` matrix and factor it with partial pivoting.
    DenseLu,
    /// Exploit `beta [P, W(X)]` having rank at most `2N` (the cosine
    /// expansion of mode products) and solve the same system through a
    /// `2N x 2N` capacitance matrix.
    #[default]
    Factored,
}

/// Diagnostics of one stage solve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveReport {
    /// `max |A X - b|` after any refinement.
    pub residual: f64,
    /// Hermiticity defect of the raw solution, before symmetrization.
    pub hermiticity_defect: f64,
    pub refined: bool,
}

impl SolveReport {
    pub(crate) fn merge(&mut self, other: &SolveReport) {
        self.residual = self.residual.max(other.residual);
        self.hermiticity_defect = self.hermiticity_defect.max(other.hermiticity_defect);
        self.refined |= other.refined;
    }
}

/// The assembled system `A x = b` in the documented flattening.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub order: usize,
    pub matrix: Vec<Complex64>,
    pub rhs: Vec<Complex64>,
}

/// Evaluates `dP/dt` for a fixed basis, potential and nonlinearity.
///
/// Holds scratch storage, so one instance drives one trajectory at a time.
pub struct Dynamics<'a> {
    basis: &'a SpectralBasis,
    potential: Option<&'a PotentialSpec>,
    beta: f64,
    method: SolveMethod,
    residual_tol: f64,
    /// For each flat pair `(m, n)`: the nonzero `(k, l, D_klmn)`.
    pairs: Vec<Vec<(usize, usize, f64)>>,
    scratch: Scratch,
}

#[derive(Default)]
struct Scratch {
    vcoef: Vec<f64>,
    hamiltonian: Vec<f64>,
    system: Vec<Complex64>,
    dense_lu: Option<DenseLu>,
    factor_cols: Vec<Complex64>,
    capacitance: Vec<Complex64>,
    capacitance_lu: Option<DenseLu>,
}

impl<'a> Dynamics<'a> {
    pub fn new(basis: &'a SpectralBasis, potential: Option<&'a PotentialSpec>, beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::config("model.beta", "must be finite"));
        }
        if let Some(pot) = potential {
            pot.validate()?;
            pot.check_against(basis)?;
        }
        let n = basis.n_modes();
        let mut pairs = vec![Vec::new(); n * n];
        for m in 0..n {
            for nn in 0..n {
                let list = &mut pairs[m * n + nn];
                for k in 0..n {
                    for l in 0..n {
                        let d = basis.d4(k, l, m, nn);
                        if d != 0.0 {
                            list.push((k, l, d));
                        }
                    }
                }
            }
        }
        Ok(Self {
            basis,
            potential,
            beta,
            method: SolveMethod::default(),
            residual_tol: 1e-12,
            pairs,
            scratch: Scratch::default(),
        })
    }

    pub fn with_method(mut self, method: SolveMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_residual_tol(mut self, tol: f64) -> Self {
        self.residual_tol = tol;
        self
    }

    pub fn basis(&self) -> &SpectralBasis {
        self.basis
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn method(&self) -> SolveMethod {
        self.method
    }

    /// Builds the dense system for state `p` at time `t`.
    pub fn assemble_system(&mut self, p: &CoefficientMatrix, t: f64) -> Result<LinearSystem> {
        self.check_state(p, t)?;
        let n = self.basis.n_modes();
        let rhs = self.rhs(p, t);
        let mut matrix = vec![ZERO; n * n * n * n];
        self.fill_system(p, &mut matrix);
        Ok(LinearSystem {
            order: n * n,
            matrix,
            rhs,
        })
    }

    /// `b = [H(t), P]`.
    pub fn rhs(&mut self, p: &CoefficientMatrix, t: f64) -> Vec<Complex64> {
        let n = self.basis.n_modes();
        let e = self.basis.energies();
        let mut b = vec![ZERO; n * n];
        match self.potential {
            None => {
                for j in 0..n {
                    for k in 0..n {
                        b[j * n + k] = p[(j, k)] * (e[j] - e[k]);
                    }
                }
            }
            Some(pot) => {
                self.scratch.vcoef.resize(n, 0.0);
                pot.coefficients_into(t, &mut self.scratch.vcoef);
                let h = &mut self.scratch.hamiltonian;
                h.clear();
                h.resize(n * n, 0.0);
                for j in 0..n {
                    for nn in 0..n {
                        let mut acc = 0.0;
                        for (m, v) in self.scratch.vcoef.iter().enumerate() {
                            acc += v * self.basis.d3(j, m, nn);
                        }
                        h[j * n + nn] = acc;
                    }
                    h[j * n + j] += e[j];
                }
                let ps = p.as_slice();
                for j in 0..n {
                    for k in 0..n {
                        let mut acc = ZERO;
                        for l in 0..n {
                            acc += ps[l * n + k] * h[j * n + l] - ps[j * n + l] * h[l * n + k];
                        }
                        b[j * n + k] = acc;
                    }
                }
            }
        }
        b
    }

    fn fill_system(&self, p: &CoefficientMatrix, a: &mut [Complex64]) {
        let n = self.basis.n_modes();
        let nn2 = n * n;
        a.fill(ZERO);
        let ps = p.as_slice();
        let beta = self.beta;
        for (col, list) in self.pairs.iter().enumerate() {
            a[col * nn2 + col] += I;
            if beta == 0.0 {
                continue;
            }
            // Column (m, n) is beta (P G - G P) with G_kl = D_klmn.
            for &(r, c, d) in list {
                let s = beta * d;
                for j in 0..n {
                    // (P G)_{j c} += P_{j r} G_{r c}
                    a[(j * n + c) * nn2 + col] += ps[j * n + r] * s;
                    // (G P)_{r k} += G_{r c} P_{c k}
                    a[(r * n + j) * nn2 + col] -= ps[c * n + j] * s;
                }
            }
        }
    }

    /// `i X + beta [P, W(X)]`, evaluated directly from the four-index tensor.
    pub fn apply_operator(&self, p: &CoefficientMatrix, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.basis.n_modes();
        let mut out: Vec<Complex64> = x.iter().map(|v| v * I).collect();
        if self.beta == 0.0 {
            return out;
        }
        let mut w = vec![ZERO; n * n];
        for (kl, list) in self.pairs.iter().enumerate() {
            // D is symmetric under (k,l) <-> (m,n), so the list for (k,l) enumerates (m,n).
            w[kl] = list.iter().map(|&(m, nn, d)| x[m * n + nn] * d).sum();
        }
        let ps = p.as_slice();
        for j in 0..n {
            for k in 0..n {
                let mut acc = ZERO;
                for l in 0..n {
                    acc += ps[j * n + l] * w[l * n + k] - w[j * n + l] * ps[l * n + k];
                }
                out[j * n + k] += acc * self.beta;
            }
        }
        out
    }

    /// `dP/dt` at `(p, t)`; the returned table is Hermitian-symmetrized.
    pub fn derivative(&mut self, p: &CoefficientMatrix, t: f64) -> Result<(CoefficientMatrix, SolveReport)> {
        self.check_state(p, t)?;
        let n = self.basis.n_modes();
        let b = self.rhs(p, t);
        let breakdown = |e: Breakdown| Error::SolverBreakdown {
            t,
            pivot: e.pivot,
            threshold: e.threshold,
        };

        match self.method {
            SolveMethod::DenseLu => {
                let mut system = std::mem::take(&mut self.scratch.system);
                system.resize(n * n * n * n, ZERO);
                self.fill_system(p, &mut system);
                match &mut self.scratch.dense_lu {
                    Some(lu) if lu.order() == n * n => lu.refactor(&system).map_err(breakdown)?,
                    slot => *slot = Some(DenseLu::factor(&system, n * n).map_err(breakdown)?),
                }
                self.scratch.system = system;
            }
            SolveMethod::Factored => self.factor_capacitance(p).map_err(breakdown)?,
        }

        let mut x = b.clone();
        self.solve_prepared(&mut x);
        let mut report = SolveReport::default();
        let mut residual = self.residual_vec(p, &x, &b);
        report.residual = inf_norm(&residual);
        if report.residual > self.residual_tol {
            self.solve_prepared(&mut residual);
            for (xi, d) in x.iter_mut().zip(&residual) {
                *xi -= d;
            }
            report.refined = true;
            report.residual = inf_norm(&self.residual_vec(p, &x, &b));
        }
        if !(report.residual <= self.residual_tol) {
            return Err(Error::Accuracy {
                t,
                residual: report.residual,
                tolerance: self.residual_tol,
            });
        }

        let mut dp = CoefficientMatrix::from_vec(n, x);
        report.hermiticity_defect = dp.hermiticity_defect();
        dp.symmetrize();
        Ok((dp, report))
    }

    fn residual_vec(&self, p: &CoefficientMatrix, x: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let mut r = self.apply_operator(p, x);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri -= bi;
        }
        r
    }

    /// Solves with whatever factorization the last `derivative` call prepared.
    fn solve_prepared(&self, rhs: &mut [Complex64]) {
        match self.method {
            SolveMethod::DenseLu => {
                self.scratch.dense_lu.as_ref().expect("dense factorization prepared").solve_in_place(rhs)
            }
            SolveMethod::Factored => self.solve_capacitance(rhs),
        }
    }

    /// Builds `U_q = w_q [P, A_q]` and the capacitance matrix
    /// `S = I - i beta G^T U` for `q = 1..=2N`; `A_0 = I` commutes with `P`.
    fn factor_capacitance(&mut self, p: &CoefficientMatrix) -> Result<(), Breakdown> {
        let n = self.basis.n_modes();
        let cf = self.basis.cosine_factors();
        let r = cf.max_frequency();
        let nn2 = n * n;
        let ps = p.as_slice();

        let cols = &mut self.scratch.factor_cols;
        cols.clear();
        cols.resize(r * nn2, ZERO);
        for q in 1..=r {
            let w = cf.weight(q);
            let u = &mut cols[(q - 1) * nn2..q * nn2];
            for &(a, b, s) in cf.terms(q) {
                let s = s * w;
                for j in 0..n {
                    // (P A_q)_{j b} += P_{j a} s ;  (A_q P)_{a k} += s P_{b k}
                    u[j * n + b] += ps[j * n + a] * s;
                    u[a * n + j] -= ps[b * n + j] * s;
                }
            }
        }

        let cap = &mut self.scratch.capacitance;
        cap.clear();
        cap.resize(r * r, ZERO);
        for q in 1..=r {
            for qq in 1..=r {
                let u = &cols[(qq - 1) * nn2..qq * nn2];
                let dot: Complex64 = cf.terms(q).iter().map(|&(a, b, s)| u[a * n + b] * s).sum();
                cap[(q - 1) * r + (qq - 1)] = -I * self.beta * dot;
            }
            cap[(q - 1) * r + (q - 1)] += 1.0;
        }
        match &mut self.scratch.capacitance_lu {
            Some(lu) if lu.order() == r => lu.refactor(cap),
            slot => {
                *slot = Some(DenseLu::factor(cap, r)?);
                Ok(())
            }
        }
    }

    /// `X = -i b + beta U S^{-1} G^T b`.
    fn solve_capacitance(&self, rhs: &mut [Complex64]) {
        let n = self.basis.n_modes();
        let cf = self.basis.cosine_factors();
        let r = cf.max_frequency();
        let nn2 = n * n;
        let mut z: Vec<Complex64> = (1..=r)
            .map(|q| cf.terms(q).iter().map(|&(a, b, s)| rhs[a * n + b] * s).sum())
            .collect();
        self.scratch.capacitance_lu.as_ref().expect("capacitance prepared").solve_in_place(&mut z);
        for v in rhs.iter_mut() {
            *v *= -I;
        }
        let cols = &self.scratch.factor_cols;
        for (q, zq) in z.iter().enumerate() {
            let coef = zq * self.beta;
            for (v, u) in rhs.iter_mut().zip(&cols[q * nn2..(q + 1) * nn2]) {
                *v += u * coef;
            }
        }
    }

    fn check_state(&self, p: &CoefficientMatrix, t: f64) -> Result<()> {
        if p.n_modes() != self.basis.n_modes() {
            return Err(Error::Domain(format!(
                "state has {} modes, basis has {}",
                p.n_modes(),
                self.basis.n_modes()
            )));
        }
        if !p.is_finite() {
            return Err(Error::StateCorruption { t });
        }
        Ok(())
    }
}

fn inf_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::lu::residual_inf;
    use crate::potentials::resonant_drive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_state(n: usize, seed: u64) -> CoefficientMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..2.0 * PI)))
            .collect();
        let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        c.iter_mut().for_each(|z| *z /= norm);
        CoefficientMatrix::from_amplitudes(&c)
    }

    #[test]
    fn linear_limit_system_is_diagonal() {
        let basis = SpectralBasis::new(4, 0.5).unwrap();
        let p = random_state(4, 1);
        let mut dynamics = Dynamics::new(&basis, None, 0.0).unwrap();
        let sys = dynamics.assemble_system(&p, 0.0).unwrap();
        for r in 0..16 {
            for c in 0..16 {
                let expected = if r == c { I } else { ZERO };
                assert_eq!(sys.matrix[r * 16 + c], expected);
            }
            let (j, k) = (r / 4, r % 4);
            let want = p[(j, k)] * (basis.energy(j) - basis.energy(k));
            assert!((sys.rhs[r] - want).norm() < 1e-13);
        }
        let (dp, _) = dynamics.derivative(&p, 0.0).unwrap();
        for j in 0..4 {
            assert!(dp[(j, j)].norm() < 1e-13);
            for k in 0..4 {
                let want = -I * (basis.energy(j) - basis.energy(k)) * p[(j, k)];
                assert!((dp[(j, k)] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn eigenstate_has_zero_rhs_and_derivative() {
        let basis = SpectralBasis::new(6, 0.5).unwrap();
        let p = CoefficientMatrix::eigenstate(6, 2);
        for method in [SolveMethod::DenseLu, SolveMethod::Factored] {
            let mut dynamics = Dynamics::new(&basis, None, 1.0).unwrap().with_method(method);
            let sys = dynamics.assemble_system(&p, 0.7).unwrap();
            assert!(sys.rhs.iter().all(|z| *z == ZERO));
            let (dp, report) = dynamics.derivative(&p, 0.7).unwrap();
            assert_eq!(dp.max_abs(), 0.0);
            assert_eq!(report.residual, 0.0);
        }
    }

    /// Hand assembly of the 4x4 system for N = 2 from the closed-form tensor
    /// values, independent of the production assembly loop.
    #[test]
    fn two_mode_system_matches_hand_assembly() {
        let basis = SpectralBasis::new(2, 0.5).unwrap();
        let half = Complex64::new(0.5, 0.0);
        let p = CoefficientMatrix::from_vec(2, vec![half; 4]);
        let mut dynamics = Dynamics::new(&basis, None, 1.0).unwrap();
        let sys = dynamics.assemble_system(&p, 0.0).unwrap();

        assert!((sys.rhs[1] - Complex64::new(-0.75 * PI * PI, 0.0)).norm() < 1e-13);
        assert!((sys.rhs[2] - Complex64::new(0.75 * PI * PI, 0.0)).norm() < 1e-13);

        let d = |k: i64, l: i64, m: i64, n: i64| crate::basis::overlap4(k, l, m, n).unwrap();
        for j in 1..=2i64 {
            for k in 1..=2i64 {
                for m in 1..=2i64 {
                    for n in 1..=2i64 {
                        let mut want = if (j, k) == (m, n) { I } else { ZERO };
                        for l in 1..=2i64 {
                            // Every P entry is 1/2 in this state.
                            want += half * (d(k, l, m, n) - d(j, l, m, n));
                        }
                        let row = ((j - 1) * 2 + (k - 1)) as usize;
                        let col = ((m - 1) * 2 + (n - 1)) as usize;
                        assert!((sys.matrix[row * 4 + col] - want).norm() < 1e-15, "({j}{k}),({m}{n})");
                    }
                }
            }
        }
    }

    #[test]
    fn matrix_free_operator_matches_assembled_matrix() {
        let basis = SpectralBasis::new(5, 0.5).unwrap();
        let p = random_state(5, 7);
        let mut dynamics = Dynamics::new(&basis, None, 0.8).unwrap();
        let sys = dynamics.assemble_system(&p, 0.0).unwrap();
        let x: Vec<Complex64> = random_state(5, 8).as_slice().to_vec();
        let ax = dynamics.apply_operator(&p, &x);
        let zero = vec![ZERO; 25];
        let mut diff = ax.clone();
        for (r, row) in sys.matrix.chunks_exact(25).enumerate() {
            let dense: Complex64 = row.iter().zip(&x).map(|(a, xi)| a * xi).sum();
            diff[r] -= dense;
        }
        assert!(residual_inf(&vec![ZERO; 625], &zero, &diff) < 1e-13);
    }

    #[test]
    fn dense_and_factored_routes_agree() {
        let basis = SpectralBasis::new(7, 0.5).unwrap();
        let pot = resonant_drive(&basis, 2, 3, 1.0).unwrap();
        for (seed, beta) in [(1u64, 1.0), (2, -0.7), (3, 0.01), (4, 5.0)] {
            let p = random_state(7, seed);
            let mut dense = Dynamics::new(&basis, Some(&pot), beta).unwrap().with_method(SolveMethod::DenseLu);
            let mut fact = Dynamics::new(&basis, Some(&pot), beta).unwrap().with_method(SolveMethod::Factored);
            let (a, ra) = dense.derivative(&p, 0.3).unwrap();
            let (b, rb) = fact.derivative(&p, 0.3).unwrap();
            assert!(a.max_distance(&b) < 1e-10 * (1.0 + a.max_abs()), "beta {beta}");
            assert!(ra.residual <= 1e-12 && rb.residual <= 1e-12);
        }
    }

    #[test]
    fn derivative_is_traceless_and_nearly_hermitian() {
        let basis = SpectralBasis::new(10, 0.5).unwrap();
        for seed in 0..5 {
            let p = random_state(10, seed);
            let mut dynamics = Dynamics::new(&basis, None, 1.0).unwrap();
            let (dp, report) = dynamics.derivative(&p, 0.0).unwrap();
            assert!(dp.trace().norm() < 1e-10, "trace {}", dp.trace());
            assert!(report.hermiticity_defect < 1e-9);
        }
    }

    #[test]
    fn corrupted_state_is_rejected() {
        let basis = SpectralBasis::new(3, 0.5).unwrap();
        let mut p = CoefficientMatrix::eigenstate(3, 0);
        p[(1, 2)] = Complex64::new(f64::INFINITY, 0.0);
        let mut dynamics = Dynamics::new(&basis, None, 1.0).unwrap();
        assert!(matches!(dynamics.derivative(&p, 2.0), Err(Error::StateCorruption { t }) if t == 2.0));
        assert!(matches!(dynamics.assemble_system(&p, 2.0), Err(Error::StateCorruption { .. })));
    }

    #[test]
    fn potential_rhs_matches_index_sum() {
        let basis = SpectralBasis::new(4, 0.5).unwrap();
        let pot = PotentialSpec::new(vec![0.3, -0.2, 0.5, 0.1], 1.0, 2.0, 0.4, 0.3, crate::potentials::Waveform::Sine)
            .unwrap();
        let p = random_state(4, 11);
        let t = 0.9;
        let mut dynamics = Dynamics::new(&basis, Some(&pot), 1.0).unwrap();
        let b = dynamics.rhs(&p, t);
        for j in 0..4 {
            for k in 0..4 {
                let mut want = p[(j, k)] * (basis.energy(j) - basis.energy(k));
                for m in 0..4 {
                    let v = pot.coefficient(m + 1, t).unwrap();
                    for n in 0..4 {
                        want += v * (p[(n, k)] * basis.d3(j, m, n) - p[(j, n)] * basis.d3(k, m, n));
                    }
                }
                assert!((b[j * 4 + k] - want).norm() < 1e-13);
            }
        }
    }
}
