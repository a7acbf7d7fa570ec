//! Built-in check suites: each check reports a measured value against a
//! tolerance.

use crate::basis::{eigenvalue, SpectralBasis};
use crate::dynamics::{
    evolve, evolve_with, initial_amplitudes, initial_state, CoefficientMatrix, Dynamics, InitialKind, SolveMethod,
    SolverConfig, Verdict,
};
use crate::error::Result;
use crate::oracles::{
    amplitude_evolve, grid_evolve, lse_closed_form, nonlinear_stable_dt, quadrature_inner, quadrature_overlap,
    GridState,
};
use crate::potentials::{random_gammas, resonant_drive, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Tensors,
    Invariants,
    Oracles,
    PaperNumbers,
}

impl Suite {
    pub fn label(self) -> &'static str {
        match self {
            Suite::Tensors => "tensors",
            Suite::Invariants => "invariants",
            Suite::Oracles => "oracles",
            Suite::PaperNumbers => "paper-numbers",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub suite: &'static str,
    pub check: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    /// How `measured` compares to `tolerance`.
    pub relation: Relation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Below,
    Above,
}

impl CheckRow {
    fn new(suite: Suite, check: impl Into<String>, measured: f64, relation: Relation, tolerance: f64) -> Self {
        let passed = match relation {
            Relation::Below => measured < tolerance,
            Relation::Above => measured > tolerance,
        };
        Self {
            suite: suite.label(),
            check: check.into(),
            passed,
            measured,
            tolerance,
            relation,
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.16e},{}{:.16e}",
            self.suite,
            self.check,
            if self.passed { "pass" } else { "fail" },
            self.measured,
            match self.relation {
                Relation::Below => "<",
                Relation::Above => ">",
            },
            self.tolerance
        )
    }
}

pub const CSV_HEADER: &str = "suite,check,status,measured,tolerance";

pub fn run_suite(suite: Suite) -> Result<Vec<CheckRow>> {
    match suite {
        Suite::Tensors => tensors(),
        Suite::Invariants => invariants(),
        Suite::Oracles => oracles(),
        Suite::PaperNumbers => paper_numbers(),
    }
}

/// Mode indices up to this bound are compared exhaustively.
const TENSOR_INDEX_MAX: usize = 8;
const QUADRATURE_POINTS: usize = 4001;

fn tensors() -> Result<Vec<CheckRow>> {
    let s = Suite::Tensors;
    let n = TENSOR_INDEX_MAX;
    let basis = SpectralBasis::new(n, 0.5)?;
    let mut rows = Vec::new();

    let mut energy_err = 0.0f64;
    for a in 0..n {
        let e = eigenvalue(a as i64 + 1, 0.5)?;
        energy_err = energy_err.max((basis.energy(a) - e).abs() / e);
    }
    rows.push(CheckRow::new(s, "energies E_n = alpha (n pi)^2 (relative)", energy_err, Relation::Below, 1e-15));

    let mut sym4 = 0.0f64;
    let mut sym3 = 0.0f64;
    let mut quad4 = 0.0f64;
    let mut quad3 = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let d3 = basis.d3(a, b, c);
                for (x, y, z) in [(a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                    sym3 = sym3.max((basis.d3(x, y, z) - d3).abs());
                }
                let q = quadrature_overlap(&[a as i64 + 1, b as i64 + 1, c as i64 + 1], QUADRATURE_POINTS)?;
                quad3 = quad3.max((q - d3).abs());
                for d in 0..n {
                    let d4 = basis.d4(a, b, c, d);
                    for (w, x, y, z) in [(b, a, c, d), (a, b, d, c), (c, d, a, b), (d, c, b, a), (a, c, b, d)] {
                        sym4 = sym4.max((basis.d4(w, x, y, z) - d4).abs());
                    }
                    let idx = [a as i64 + 1, b as i64 + 1, c as i64 + 1, d as i64 + 1];
                    quad4 = quad4.max((quadrature_overlap(&idx, QUADRATURE_POINTS)? - d4).abs());
                }
            }
        }
    }
    rows.push(CheckRow::new(s, "D4 permutation symmetry", sym4, Relation::Below, 1e-15));
    rows.push(CheckRow::new(s, "D3 permutation symmetry", sym3, Relation::Below, 1e-15));
    rows.push(CheckRow::new(s, "D4 closed form vs quadrature (4096 cases)", quad4, Relation::Below, 1e-10));
    rows.push(CheckRow::new(s, "D3 closed form vs quadrature (512 cases)", quad3, Relation::Below, 1e-10));

    let mut ortho = 0.0f64;
    for a in 1..=n as i64 {
        for b in 1..=n as i64 {
            let want = if a == b { 1.0 } else { 0.0 };
            ortho = ortho.max((quadrature_inner(a, b, QUADRATURE_POINTS)? - want).abs());
        }
    }
    rows.push(CheckRow::new(s, "orthonormality by quadrature", ortho, Relation::Below, 1e-10));
    Ok(rows)
}

fn invariants() -> Result<Vec<CheckRow>> {
    let s = Suite::Invariants;
    let basis = SpectralBasis::new(10, 0.5)?;
    let mut rows = Vec::new();

    for k in 1..=3 {
        let p0 = CoefficientMatrix::eigenstate(10, k - 1);
        let cfg = SolverConfig {
            t_max: 1.0,
            stop_on_verdict: false,
            ..SolverConfig::default()
        };
        let mut drift = 0.0f64;
        evolve_with(&p0, &basis, None, &cfg, |_, p| drift = drift.max(p.max_distance(&p0)))?;
        rows.push(CheckRow::new(s, format!("eigenstate {k} fixed point to t = 1"), drift, Relation::Below, 1e-10));
    }

    let pot = PotentialSpec::constant(random_gammas(10, 1.0, 7));
    let p0 = initial_state(&InitialKind::Random, 10, 7)?;
    let cfg = SolverConfig {
        t_max: 0.5,
        ..SolverConfig::default()
    };
    let tr = evolve(&p0, &basis, Some(&pot), &cfg)?;
    rows.push(CheckRow::new(s, "trace drift (random state, constant potential)", tr.stats.max_norm_drift, Relation::Below, 1e-10));
    rows.push(CheckRow::new(s, "stage Hermiticity defect", tr.stats.max_hermiticity_defect, Relation::Below, 1e-12));
    rows.push(CheckRow::new(s, "stage solve residual", tr.stats.max_residual, Relation::Below, 1e-12));

    let linear = SolverConfig {
        beta: 0.0,
        t_max: 1.0,
        stop_on_verdict: false,
        ..SolverConfig::default()
    };
    let p0 = initial_state(&InitialKind::Decreasing, 10, 3)?;
    let pops0 = p0.populations();
    let mut change = 0.0f64;
    evolve_with(&p0, &basis, None, &linear, |_, p| {
        for (v, v0) in p.populations().iter().zip(&pops0) {
            change = change.max((v - v0).abs());
        }
    })?;
    rows.push(CheckRow::new(s, "beta = 0 populations constant", change, Relation::Below, 1e-10));

    let p = initial_state(&InitialKind::Random, 10, 11)?;
    let (dense, _) = Dynamics::new(&basis, Some(&pot), 1.0)?
        .with_method(SolveMethod::DenseLu)
        .derivative(&p, 0.3)?;
    let (factored, _) = Dynamics::new(&basis, Some(&pot), 1.0)?
        .with_method(SolveMethod::Factored)
        .derivative(&p, 0.3)?;
    rows.push(CheckRow::new(s, "dense LU vs factored solve", dense.max_distance(&factored), Relation::Below, 1e-10));

    let (d, _) = Dynamics::new(&basis, Some(&pot), 1.0)?.derivative(&p, 0.3)?;
    rows.push(CheckRow::new(s, "d(trace)/dt", d.trace().norm(), Relation::Below, 1e-12));
    Ok(rows)
}

fn oracles() -> Result<Vec<CheckRow>> {
    let s = Suite::Oracles;
    let mut rows = Vec::new();

    // Linear limit against the closed form.
    let basis = SpectralBasis::new(10, 0.5)?;
    let c0 = initial_amplitudes(&InitialKind::TwoMode { modes: [1, 2] }, 10, 5, 0)?;
    let cfg = SolverConfig {
        beta: 0.0,
        t_max: 1.0,
        stop_on_verdict: false,
        ..SolverConfig::default()
    };
    let tr = evolve(&CoefficientMatrix::from_amplitudes(&c0), &basis, None, &cfg)?;
    let exact = CoefficientMatrix::from_amplitudes(&lse_closed_form(&c0, &basis, 1.0));
    rows.push(CheckRow::new(
        s,
        "P_12(1) vs closed form at beta = 0",
        (tr.final_state[(0, 1)] - exact[(0, 1)]).norm(),
        Relation::Below,
        1e-8,
    ));

    rows.push(CheckRow::new(s, "spectral vs amplitude populations (N = 6, t <= 1)", amplitude_gap()?, Relation::Below, 1e-6));
    rows.push(CheckRow::new(s, "spectral vs grid populations (N = 6, M = 201, t <= 0.5)", grid_gap(6, 201)?, Relation::Below, 1e-3));
    Ok(rows)
}

/// Largest population gap between the product-matrix run and direct
/// amplitude integration: `N = 6`, `beta = 1`, random state, `t <= 1`.
pub fn amplitude_gap() -> Result<f64> {
    let basis = SpectralBasis::new(6, 0.5)?;
    let c0 = initial_amplitudes(&InitialKind::Random, 6, 3, 0)?;
    let cfg = SolverConfig {
        t_max: 1.0,
        sample_stride: 500,
        stop_on_verdict: false,
        ..SolverConfig::default()
    };
    let tr = evolve(&CoefficientMatrix::from_amplitudes(&c0), &basis, None, &cfg)?;
    let amp = amplitude_evolve(&c0, &basis, None, cfg.beta, cfg.h, cfg.steps(), cfg.sample_stride)?;
    let mut gap = 0.0f64;
    for (a, b) in tr.samples.iter().zip(&amp) {
        debug_assert_eq!(a.t, b.t);
        for (x, y) in a.populations.iter().zip(b.populations()) {
            gap = gap.max((x - y).abs());
        }
    }
    Ok(gap)
}

/// Largest population gap between the product-matrix run with `n` modes and
/// the finite-difference grid with `m` points: `beta = 1`, two-mode
/// `{1, 2}` state, `t <= 0.5`.
pub fn grid_gap(n: usize, m: usize) -> Result<f64> {
    let basis = SpectralBasis::new(n, 0.5)?;
    let c0 = initial_amplitudes(&InitialKind::TwoMode { modes: [1, 2] }, n, 3, 0)?;
    let interval = 0.01;
    let cfg = SolverConfig {
        t_max: 0.5,
        sample_stride: (interval / 1e-4_f64).round() as usize,
        stop_on_verdict: false,
        ..SolverConfig::default()
    };
    let tr = evolve(&CoefficientMatrix::from_amplitudes(&c0), &basis, None, &cfg)?;

    let g0 = GridState::from_amplitudes(&c0, m)?;
    let limit = nonlinear_stable_dt(&g0, 0.5, cfg.beta).expect("beta > 0");
    let sub = (interval / (0.9 * limit)).ceil() as usize;
    let dt = interval / sub as f64;
    let steps = (cfg.t_max / dt).round() as usize;
    let grid = grid_evolve(&g0, None, 0.5, cfg.beta, dt, steps, sub, n)?;
    let mut gap = 0.0f64;
    for (a, b) in tr.samples.iter().zip(&grid.samples) {
        debug_assert!((a.t - b.t).abs() < 1e-9);
        for (x, y) in a.populations.iter().zip(&b.populations) {
            gap = gap.max((x - y).abs());
        }
    }
    Ok(gap)
}

/// Earliest `t <= t_max` at which `P_kk > threshold` under the resonant
/// `j <-> k` drive, starting from eigenstate `start`; all modes one-based.
pub fn stimulated_transition(start: usize, j: usize, k: usize, beta: f64, t_max: f64, threshold: f64) -> Result<Option<f64>> {
    let basis = SpectralBasis::new(10, 0.5)?;
    let pot = resonant_drive(&basis, j, k, 1.0)?;
    let cfg = SolverConfig {
        beta,
        t_max,
        stop_on_verdict: false,
        ..SolverConfig::default()
    };
    let mut first = None;
    evolve_with(&CoefficientMatrix::eigenstate(10, start - 1), &basis, Some(&pot), &cfg, |t, p| {
        if first.is_none() && p[(k - 1, k - 1)].re > threshold {
            first = Some(t);
        }
    })?;
    Ok(first)
}

fn paper_numbers() -> Result<Vec<CheckRow>> {
    let s = Suite::PaperNumbers;
    let mut rows = Vec::new();
    for (start, target) in [(3, 2), (2, 3)] {
        let first = stimulated_transition(start, 2, 3, 1e-4, 3.5, 0.99)?;
        rows.push(CheckRow::new(
            s,
            format!("phi_{start} under 2<->3 drive: P_{target}{target} > 0.99 by t = 3.5 (first time)"),
            first.unwrap_or(f64::INFINITY),
            Relation::Below,
            3.5 + 1e-9,
        ));
    }

    let basis = SpectralBasis::new(10, 0.5)?;
    let p0 = initial_state(&InitialKind::UniformFirst { count: 5 }, 10, 0)?;
    let cfg = SolverConfig {
        h: 2.5e-5,
        sample_stride: 4000,
        ..SolverConfig::default()
    };
    let tr = evolve(&p0, &basis, None, &cfg)?;
    let defect = match tr.verdict {
        Verdict::ConvergedToEigenstate(1) => (tr.final_state[(0, 0)].re - 1.0).abs(),
        _ => f64::INFINITY,
    };
    rows.push(CheckRow::new(
        s,
        "uniform-first-5 collapses to phi_1 with |P_11 - 1| < 1e-10 sustained",
        defect,
        Relation::Below,
        1e-10,
    ));
    Ok(rows)
}
