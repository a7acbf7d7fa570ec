use log::warn;
use serde::Serialize;

use super::matrix::CoefficientMatrix;
use super::system::{Dynamics, SolveMethod, SolveReport};
use crate::basis::SpectralBasis;
use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub h: f64,
    pub t_max: f64,
    pub beta: f64,
    pub sample_stride: usize,
    pub conv_eps: f64,
    pub conv_window: f64,
    pub norm_tol: f64,
    pub solve_residual_tol: f64,
    pub rng_seed: u64,
    pub method: SolveMethod,
    /// Return as soon as a verdict has been sustained for `conv_window`.
    pub stop_on_verdict: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            h: 1e-4,
            t_max: 200.0,
            beta: 1.0,
            sample_stride: 100,
            conv_eps: 1e-10,
            conv_window: 1.0,
            norm_tol: 1e-6,
            solve_residual_tol: 1e-12,
            rng_seed: 0,
            method: SolveMethod::default(),
            stop_on_verdict: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("solver.h", self.h),
            ("solver.t_max", self.t_max),
            ("solver.conv_eps", self.conv_eps),
            ("solver.norm_tol", self.norm_tol),
            ("solver.solve_residual_tol", self.solve_residual_tol),
        ];
        for (path, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(path, format!("must be positive and finite, got {v}")));
            }
        }
        if self.t_max < self.h {
            return Err(Error::config("solver.t_max", format!("must be >= h = {}", self.h)));
        }
        if !(self.conv_window >= 0.0) || !self.conv_window.is_finite() {
            return Err(Error::config("solver.conv_window", "must be finite and >= 0"));
        }
        if self.sample_stride == 0 {
            return Err(Error::config("solver.sample_stride", "must be >= 1"));
        }
        if !self.beta.is_finite() {
            return Err(Error::config("model.beta", "must be finite"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_max / self.h - 1e-9).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub populations: Vec<f64>,
    pub norm: f64,
    pub max_offdiag: f64,
    pub rank1_defect: f64,
}

impl Sample {
    pub fn of(t: f64, p: &CoefficientMatrix) -> Self {
        Self {
            t,
            populations: p.populations(),
            norm: p.norm(),
            max_offdiag: p.max_offdiag(),
            rank1_defect: p.rank1_defect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Collapsed onto the one-based mode `k`.
    ConvergedToEigenstate(usize),
    StationarySuperposition,
    NoConvergence,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::ConvergedToEigenstate(k) => write!(f, "ConvergedToEigenstate({k})"),
            Verdict::StationarySuperposition => f.write_str("StationarySuperposition"),
            Verdict::NoConvergence => f.write_str("NoConvergence"),
        }
    }
}

/// Aggregate diagnostics over a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub steps: usize,
    pub max_norm_drift: f64,
    pub max_hermiticity_defect: f64,
    pub max_residual: f64,
    pub max_rank1_defect: f64,
    pub refinements: usize,
    /// Per slot: largest population seen at any step and when.
    pub peak_populations: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub verdict: Verdict,
    /// Start of the streak that produced the verdict.
    pub convergence_time: Option<f64>,
    pub final_state: CoefficientMatrix,
    pub stats: RunStats,
}

impl Trajectory {
    pub fn last_sample(&self) -> &Sample {
        self.samples.last().expect("trajectories record at least the initial sample")
    }
}

/// Result of one classical RK4 step.
pub struct Step {
    pub state: CoefficientMatrix,
    pub report: SolveReport,
}

impl Dynamics<'_> {
    /// One RK4 step from `(p, t)`. `k1` is the derivative at `(p, t)` when the
    /// caller already has it.
    pub fn rk4_step(&mut self, p: &CoefficientMatrix, t: f64, h: f64, k1: Option<&CoefficientMatrix>) -> Result<Step> {
        let mut report = SolveReport::default();
        let owned;
        let k1 = match k1 {
            Some(k) => k,
            None => {
                let (k, r) = self.derivative(p, t)?;
                report.merge(&r);
                owned = k;
                &owned
            }
        };
        let mut stage = CoefficientMatrix::zeros(p.n_modes());
        stage.set_combination(p, k1, 0.5 * h);
        let (k2, r2) = self.derivative(&stage, t + 0.5 * h)?;
        stage.set_combination(p, &k2, 0.5 * h);
        let (k3, r3) = self.derivative(&stage, t + 0.5 * h)?;
        stage.set_combination(p, &k3, h);
        let (k4, r4) = self.derivative(&stage, t + h)?;
        for r in [r2, r3, r4] {
            report.merge(&r);
        }

        let mut next = p.clone();
        next.add_scaled(k1, h / 6.0);
        next.add_scaled(&k2, h / 3.0);
        next.add_scaled(&k3, h / 3.0);
        next.add_scaled(&k4, h / 6.0);
        next.symmetrize();
        Ok(Step { state: next, report })
    }
}

/// Integrates from `p0` at `t = 0`; see [`evolve_with`].
pub fn evolve(
    p0: &CoefficientMatrix,
    basis: &SpectralBasis,
    potential: Option<&PotentialSpec>,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    evolve_with(p0, basis, potential, cfg, |_, _| {})
}

/// Integrates from `p0` at `t = 0` to `cfg.t_max`, calling `observer` with
/// every accepted state (including the initial one).
///
/// The eigenstate verdict requires `|P_kk - 1| < conv_eps` and every other
/// entry below `conv_eps`; the superposition verdict requires
/// `max |dP/dt| < conv_eps` without the eigenstate condition. Either must
/// hold continuously for `conv_window` time units.
pub fn evolve_with<F>(
    p0: &CoefficientMatrix,
    basis: &SpectralBasis,
    potential: Option<&PotentialSpec>,
    cfg: &SolverConfig,
    mut observer: F,
) -> Result<Trajectory>
where
    F: FnMut(f64, &CoefficientMatrix),
{
    cfg.validate()?;
    let n = basis.n_modes();
    if p0.n_modes() != n {
        return Err(Error::Domain(format!("initial state has {} modes, basis has {n}", p0.n_modes())));
    }
    if p0.hermiticity_defect() > 1e-12 || (p0.norm() - 1.0).abs() > 1e-12 || p0.trace().im.abs() > 1e-12 {
        return Err(Error::Domain("initial state must be Hermitian with unit trace".into()));
    }

    let mut stats = RunStats {
        peak_populations: p0.populations().into_iter().map(|v| (v, 0.0)).collect(),
        ..RunStats::default()
    };
    if cfg.beta < 0.0 {
        let msg = "beta < 0 drives the state upward in energy; the truncated basis may not \
                   represent the result"
            .to_string();
        warn!("{msg}");
        stats.warnings.push(msg);
    }

    let mut dynamics = Dynamics::new(basis, potential, cfg.beta)?
        .with_method(cfg.method)
        .with_residual_tol(cfg.solve_residual_tol);

    let mut p = p0.clone();
    let mut samples = vec![Sample::of(0.0, &p)];
    observer(0.0, &p);
    let mut tracker = VerdictTracker::new(cfg);
    let total = cfg.steps();
    let mut step = 0usize;
    let mut t = 0.0;

    let abort = |source: Error, last: &Sample| Error::Aborted {
        source: Box::new(source),
        last_good: Box::new(last.clone()),
    };

    loop {
        let (k1, r1) = match dynamics.derivative(&p, t) {
            Ok(v) => v,
            Err(e) => return Err(abort(e, &Sample::of(t, &p))),
        };
        stats.max_residual = stats.max_residual.max(r1.residual);
        stats.max_hermiticity_defect = stats.max_hermiticity_defect.max(r1.hermiticity_defect);
        stats.refinements += r1.refined as usize;

        tracker.observe(t, &p, k1.max_abs());
        if (cfg.stop_on_verdict && tracker.verdict().is_some()) || step >= total {
            break;
        }

        let next = match dynamics.rk4_step(&p, t, cfg.h, Some(&k1)) {
            Ok(s) => s,
            Err(e) => return Err(abort(e, &Sample::of(t, &p))),
        };
        stats.max_residual = stats.max_residual.max(next.report.residual);
        stats.max_hermiticity_defect = stats.max_hermiticity_defect.max(next.report.hermiticity_defect);
        stats.refinements += next.report.refined as usize;

        step += 1;
        let t_next = step as f64 * cfg.h;
        let drift = (next.state.norm() - 1.0).abs();
        if !next.state.is_finite() {
            return Err(abort(Error::StateCorruption { t: t_next }, &Sample::of(t, &p)));
        }
        if drift > cfg.norm_tol {
            let err = Error::NormDrift {
                t: t_next,
                drift,
                tolerance: cfg.norm_tol,
            };
            return Err(abort(err, &Sample::of(t, &p)));
        }
        stats.max_norm_drift = stats.max_norm_drift.max(drift);
        p = next.state;
        t = t_next;

        for (a, peak) in stats.peak_populations.iter_mut().enumerate() {
            let v = p[(a, a)].re;
            if v > peak.0 {
                *peak = (v, t);
            }
        }
        observer(t, &p);
        if step % cfg.sample_stride == 0 {
            let s = Sample::of(t, &p);
            stats.max_rank1_defect = stats.max_rank1_defect.max(s.rank1_defect);
            samples.push(s);
        }
    }

    if samples.last().map(|s| s.t) != Some(t) {
        let s = Sample::of(t, &p);
        stats.max_rank1_defect = stats.max_rank1_defect.max(s.rank1_defect);
        samples.push(s);
    }
    stats.steps = step;
    let (verdict, convergence_time) = match tracker.verdict() {
        Some((v, since)) => (v, Some(since)),
        None => (Verdict::NoConvergence, None),
    };
    Ok(Trajectory {
        samples,
        verdict,
        convergence_time,
        final_state: p,
        stats,
    })
}

/// Tracks how long each verdict condition has held without interruption.
struct VerdictTracker {
    eps: f64,
    window: f64,
    eigen_since: Option<(usize, f64)>,
    stationary_since: Option<f64>,
    latest: Option<(Verdict, f64)>,
}

impl VerdictTracker {
    fn new(cfg: &SolverConfig) -> Self {
        Self {
            eps: cfg.conv_eps,
            window: cfg.conv_window,
            eigen_since: None,
            stationary_since: None,
            latest: None,
        }
    }

    fn observe(&mut self, t: f64, p: &CoefficientMatrix, max_rate: f64) {
        let eigen = dominant_eigenstate(p, self.eps);
        self.eigen_since = match (eigen, self.eigen_since) {
            (Some(k), Some((prev, since))) if prev == k => Some((k, since)),
            (Some(k), _) => Some((k, t)),
            (None, _) => None,
        };
        let stationary = eigen.is_none() && max_rate < self.eps;
        self.stationary_since = match (stationary, self.stationary_since) {
            (true, Some(since)) => Some(since),
            (true, None) => Some(t),
            (false, _) => None,
        };

        self.latest = if let Some((k, since)) = self.eigen_since.filter(|&(_, s)| t - s >= self.window - 1e-12) {
            Some((Verdict::ConvergedToEigenstate(k + 1), since))
        } else {
            self.stationary_since
                .filter(|&s| t - s >= self.window - 1e-12)
                .map(|s| (Verdict::StationarySuperposition, s))
        };
    }

    fn verdict(&self) -> Option<(Verdict, f64)> {
        self.latest
    }
}

/// Slot `k` if `P` is within `eps` of the projector onto `k`.
pub fn dominant_eigenstate(p: &CoefficientMatrix, eps: f64) -> Option<usize> {
    let n = p.n_modes();
    let k = (0..n).max_by(|&a, &b| p[(a, a)].re.total_cmp(&p[(b, b)].re))?;
    if (p[(k, k)] - 1.0).norm() >= eps {
        return None;
    }
    for a in 0..n {
        for b in 0..n {
            if (a, b) != (k, k) && p[(a, b)].norm() >= eps {
                return None;
            }
        }
    }
    Some(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn two_mode(n: usize) -> CoefficientMatrix {
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        c[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        c[1] = Complex64::from_polar(FRAC_1_SQRT_2, 1.1);
        CoefficientMatrix::from_amplitudes(&c)
    }

    #[test]
    fn eigenstate_is_a_fixed_point_of_rk4() {
        let basis = SpectralBasis::new(8, 0.5).unwrap();
        let p = CoefficientMatrix::eigenstate(8, 3);
        let mut dynamics = Dynamics::new(&basis, None, 1.0).unwrap();
        let step = dynamics.rk4_step(&p, 0.0, 1e-4, None).unwrap();
        assert_eq!(step.state, p);
    }

    #[test]
    fn linear_limit_single_step_matches_phase_rotation() {
        let basis = SpectralBasis::new(4, 0.5).unwrap();
        let p = two_mode(4);
        let h = 1e-4;
        let mut dynamics = Dynamics::new(&basis, None, 0.0).unwrap();
        let next = dynamics.rk4_step(&p, 0.0, h, None).unwrap().state;
        let phase = Complex64::from_polar(1.0, -(basis.energy(0) - basis.energy(1)) * h);
        let exact = p[(0, 1)] * phase;
        // Local RK4 error is O((h dE)^5 / 120) ~ 1e-14 here.
        assert!((next[(0, 1)] - exact).norm() < 1e-12);
        assert!((next[(0, 1)].norm() - p[(0, 1)].norm()).abs() < 1e-13);
    }

    #[test]
    fn trace_drift_per_step_is_tiny() {
        let basis = SpectralBasis::new(10, 0.5).unwrap();
        let mut c: Vec<Complex64> = (0..10).map(|a| Complex64::from_polar(1.0 / (a + 1) as f64, a as f64)).collect();
        let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        c.iter_mut().for_each(|z| *z /= norm);
        let mut p = CoefficientMatrix::from_amplitudes(&c);
        let mut dynamics = Dynamics::new(&basis, None, 1.0).unwrap();
        for i in 0..20 {
            let before = p.norm();
            p = dynamics.rk4_step(&p, i as f64 * 1e-4, 1e-4, None).unwrap().state;
            assert!((p.norm() - before).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenstate_initial_condition_converges_immediately() {
        let basis = SpectralBasis::new(10, 0.5).unwrap();
        let cfg = SolverConfig {
            t_max: 5.0,
            ..SolverConfig::default()
        };
        let traj = evolve(&CoefficientMatrix::eigenstate(10, 2), &basis, None, &cfg).unwrap();
        assert_eq!(traj.verdict, Verdict::ConvergedToEigenstate(3));
        assert_eq!(traj.convergence_time, Some(0.0));
        let last = traj.last_sample();
        assert!((last.populations[2] - 1.0).abs() < cfg.conv_eps);
        // The dwell window is one time unit.
        assert!((last.t - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sample_times_increase_and_include_the_end() {
        let basis = SpectralBasis::new(3, 0.5).unwrap();
        let cfg = SolverConfig {
            t_max: 0.0105,
            h: 1e-3,
            beta: 0.0,
            sample_stride: 4,
            ..SolverConfig::default()
        };
        let traj = evolve(&two_mode(3), &basis, None, &cfg).unwrap();
        assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(traj.stats.steps, 11);
        assert!((traj.last_sample().t - 0.011).abs() < 1e-12);
        assert_eq!(traj.verdict, Verdict::NoConvergence);
    }

    #[test]
    fn negative_beta_emits_warning() {
        let basis = SpectralBasis::new(3, 0.5).unwrap();
        let cfg = SolverConfig {
            t_max: 1e-3,
            beta: -0.5,
            ..SolverConfig::default()
        };
        let traj = evolve(&two_mode(3), &basis, None, &cfg).unwrap();
        assert_eq!(traj.stats.warnings.len(), 1);
    }

    #[test]
    fn divergence_aborts_with_last_good_sample() {
        let basis = SpectralBasis::new(4, 0.5).unwrap();
        // A step far beyond RK4 stability for E_4 blows the coherences up.
        let cfg = SolverConfig {
            h: 0.2,
            t_max: 2000.0,
            beta: 0.0,
            ..SolverConfig::default()
        };
        let c = vec![Complex64::new(0.5, 0.0); 4];
        let err = evolve(&CoefficientMatrix::from_amplitudes(&c), &basis, None, &cfg).unwrap_err();
        assert!(err.is_numerical());
        match err {
            Error::Aborted { source, last_good } => {
                assert!(matches!(*source, Error::StateCorruption { .. }), "{source}");
                assert!(last_good.t > 0.0);
                assert!((last_good.norm - 1.0).abs() <= cfg.norm_tol);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn norm_drift_beyond_tolerance_aborts() {
        let basis = SpectralBasis::new(6, 0.5).unwrap();
        let cfg = SolverConfig {
            t_max: 0.1,
            norm_tol: 1e-300,
            ..SolverConfig::default()
        };
        let c: Vec<Complex64> = (0..6).map(|a| Complex64::from_polar(0.5f64.powi(a), a as f64)).collect();
        let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let c: Vec<Complex64> = c.iter().map(|z| z / norm).collect();
        let mut p = CoefficientMatrix::from_amplitudes(&c);
        p.symmetrize();
        let shift = (1.0 - p.norm()) / 6.0;
        (0..6).for_each(|a| p[(a, a)].re += shift);
        match evolve(&p, &basis, None, &cfg) {
            Err(Error::Aborted { source, .. }) => assert!(matches!(*source, Error::NormDrift { .. })),
            other => panic!("expected norm drift abort, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_normalized_initial_state() {
        let basis = SpectralBasis::new(2, 0.5).unwrap();
        let mut p = CoefficientMatrix::eigenstate(2, 0);
        p[(1, 1)] = Complex64::new(0.5, 0.0);
        assert!(evolve(&p, &basis, None, &SolverConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = [
            SolverConfig { h: 0.0, ..SolverConfig::default() },
            SolverConfig { t_max: 1e-5, ..SolverConfig::default() },
            SolverConfig { conv_eps: 0.0, ..SolverConfig::default() },
            SolverConfig { sample_stride: 0, ..SolverConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
        }
        assert!(SolverConfig::default().validate().is_ok());
    }

    #[test]
    fn dominant_eigenstate_detection() {
        let mut p = CoefficientMatrix::eigenstate(3, 1);
        assert_eq!(dominant_eigenstate(&p, 1e-10), Some(1));
        p[(0, 2)] = Complex64::new(2e-10, 0.0);
        assert_eq!(dominant_eigenstate(&p, 1e-10), None);
        assert_eq!(dominant_eigenstate(&two_mode(3), 1e-3), None);
    }
}
