//! Executes one scenario and writes its artifacts.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;

use super::config::{Engine, Resolved, Scenario};
use crate::dynamics::{evolve_with, CoefficientMatrix, Sample, Trajectory, Verdict};
use crate::error::{Error, Result};
use crate::oracles::{amplitude_evolve, grid_evolve, nonlinear_stable_dt, GridPotential, GridState};

/// One named pass/fail outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Samples of a co-run engine with the largest population gap to the
/// spectral run at shared sample times.
#[derive(Debug, Clone)]
pub struct EngineRun {
    pub engine: Engine,
    pub rows: Vec<EngineRow>,
    pub max_gap: f64,
    pub compared: usize,
}

#[derive(Debug, Clone)]
pub struct EngineRow {
    pub t: f64,
    pub populations: Vec<f64>,
    pub norm: f64,
    /// Not available for the grid engine.
    pub max_offdiag: Option<f64>,
    pub rank1_defect: Option<f64>,
}

impl From<&Sample> for EngineRow {
    fn from(s: &Sample) -> Self {
        Self {
            t: s.t,
            populations: s.populations.clone(),
            norm: s.norm,
            max_offdiag: Some(s.max_offdiag),
            rank1_defect: Some(s.rank1_defect),
        }
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub name: String,
    pub samples: Vec<Sample>,
    /// `None` when the spectral run aborted.
    pub trajectory: Option<Trajectory>,
    pub abort: Option<Error>,
    pub engines: Vec<EngineRun>,
    pub checks: Vec<CheckOutcome>,
    pub warnings: Vec<String>,
    pub elapsed_s: f64,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn verdict(&self) -> Option<Verdict> {
        self.trajectory.as_ref().map(|t| t.verdict)
    }
}

/// Per-step bookkeeping for the checks that need more than the samples.
struct Watch {
    initial: Vec<f64>,
    max_change: f64,
    first_above: Vec<Option<f64>>,
}

/// Runs `scenario`, writing `<name>_trajectory.csv`, `<name>_summary.txt` and,
/// if requested, `<name>_state.bin` into `out_dir`.
///
/// Configuration errors and co-engine failures are returned as `Err`; a
/// spectral abort still writes the artifacts and is reported in
/// [`RunReport::abort`].
pub fn run_scenario(scenario: &Scenario, out_dir: &Path) -> Result<RunReport> {
    let resolved = scenario.resolve()?;
    std::fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let n = resolved.basis.n_modes();
    let cfg = &resolved.solver;
    let c0 = resolved.initial_amplitudes()?;
    let p0 = CoefficientMatrix::from_amplitudes(&c0);

    let mut checkpoint = if scenario.output.checkpoint {
        let path = out_dir.join(format!("{}_state.bin", scenario.name));
        Some((BufWriter::new(File::create(&path)?), path))
    } else {
        None
    };
    let mut io_error = None;
    let mut last_checkpoint_t = f64::NAN;
    let mut observed = Vec::new();
    let mut watch = Watch {
        initial: p0.populations(),
        max_change: 0.0,
        first_above: vec![None; scenario.checks.population.len()],
    };
    let mut index = 0usize;

    info!("running {} (N = {n}, beta = {}, h = {:e}, t_max = {})", scenario.name, cfg.beta, cfg.h, cfg.t_max);
    let result = evolve_with(&p0, &resolved.basis, resolved.potential.as_ref(), cfg, |t, p| {
        for (a, v0) in watch.initial.iter().enumerate() {
            watch.max_change = watch.max_change.max((p[(a, a)].re - v0).abs());
        }
        for (slot, check) in watch.first_above.iter_mut().zip(&scenario.checks.population) {
            if slot.is_none() && p[(check.mode - 1, check.mode - 1)].re > check.above {
                *slot = Some(t);
            }
        }
        if index % cfg.sample_stride == 0 {
            observed.push(Sample::of(t, p));
            if let Some((w, _)) = checkpoint.as_mut() {
                if let Err(e) = write_state(w, t, p) {
                    io_error.get_or_insert(e);
                }
                last_checkpoint_t = t;
            }
        }
        index += 1;
    });
    if let Some(e) = io_error {
        return Err(e.into());
    }

    let mut warnings = Vec::new();
    let (trajectory, abort, samples) = match result {
        Ok(tr) => {
            if let Some((w, _)) = checkpoint.as_mut() {
                if tr.last_sample().t != last_checkpoint_t {
                    write_state(w, tr.last_sample().t, &tr.final_state)?;
                }
            }
            let samples = tr.samples.clone();
            warnings.extend(tr.stats.warnings.iter().cloned());
            (Some(tr), None, samples)
        }
        Err(err @ Error::Aborted { .. }) => {
            if let Error::Aborted { last_good, .. } = &err {
                if observed.last().map(|s| s.t) != Some(last_good.t) {
                    observed.push((**last_good).clone());
                }
            }
            (None, Some(err), observed)
        }
        Err(e) => return Err(e),
    };
    if let Some((mut w, path)) = checkpoint {
        w.flush()?;
        info!("wrote {}", path.display());
    }

    let engines = match &trajectory {
        Some(tr) => co_run(scenario, &resolved, tr, &c0)?,
        None => Vec::new(),
    };

    let elapsed_s = started.elapsed().as_secs_f64();
    if let Some(budget) = scenario.runtime_budget_s {
        if elapsed_s > budget {
            warnings.push(format!("wall time {elapsed_s:.1} s exceeded the runtime budget of {budget} s"));
        }
    }

    let checks = trajectory
        .as_ref()
        .map(|tr| evaluate_checks(scenario, tr, &watch, &engines))
        .unwrap_or_default();

    let mut report = RunReport {
        name: scenario.name.clone(),
        samples,
        trajectory,
        abort,
        engines,
        checks,
        warnings,
        elapsed_s,
        artifacts: Vec::new(),
    };
    let csv_path = out_dir.join(format!("{}_trajectory.csv", scenario.name));
    write_trajectory_csv(&csv_path, n, &report)?;
    let summary_path = out_dir.join(format!("{}_summary.txt", scenario.name));
    std::fs::write(&summary_path, summary_text(scenario, &resolved, &report))?;
    report.artifacts.push(csv_path);
    report.artifacts.push(summary_path);
    if scenario.output.checkpoint {
        report.artifacts.push(out_dir.join(format!("{}_state.bin", scenario.name)));
    }
    Ok(report)
}

/// Little-endian `t` followed by the `N^2` entries as `(re, im)` pairs,
/// row-major.
fn write_state<W: Write>(w: &mut W, t: f64, p: &CoefficientMatrix) -> std::io::Result<()> {
    w.write_all(&t.to_le_bytes())?;
    for z in p.as_slice() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn co_run(scenario: &Scenario, resolved: &Resolved, tr: &Trajectory, c0: &[num_complex::Complex64]) -> Result<Vec<EngineRun>> {
    let cfg = &resolved.solver;
    let n = resolved.basis.n_modes();
    let mut runs = Vec::new();
    for &engine in &scenario.engines {
        let rows: Vec<EngineRow> = match engine {
            Engine::Spectral => continue,
            Engine::Amplitude => {
                info!("co-running the amplitude engine for {} steps", tr.stats.steps);
                amplitude_evolve(
                    c0,
                    &resolved.basis,
                    resolved.potential.as_ref(),
                    cfg.beta,
                    cfg.h,
                    tr.stats.steps,
                    cfg.sample_stride,
                )?
                .iter()
                .map(|s| EngineRow::from(&Sample::of(s.t, &CoefficientMatrix::from_amplitudes(&s.amplitudes))))
                .collect()
            }
            Engine::Grid => {
                let g0 = GridState::from_amplitudes(c0, scenario.grid.points)?;
                let limit = nonlinear_stable_dt(&g0, resolved.basis.alpha(), cfg.beta)
                    .ok_or_else(|| Error::config("engines", "the grid engine is ill-posed for beta < 0"))?;
                let horizon = scenario.grid.t_max.unwrap_or(tr.last_sample().t).min(tr.last_sample().t);
                // Substeps per spectral sample interval, so sample times line up.
                let interval = cfg.h * cfg.sample_stride as f64;
                let sub = (interval / (scenario.grid.safety * limit)).ceil().max(1.0) as usize;
                let dt = interval / sub as f64;
                let steps = (horizon / dt + 1e-9).floor() as usize;
                info!("co-running the grid engine: M = {}, dt = {dt:e}, {steps} steps", scenario.grid.points);
                let pot = resolved.potential.as_ref().map(|p| GridPotential::new(p, scenario.grid.points));
                grid_evolve(&g0, pot.as_ref(), resolved.basis.alpha(), cfg.beta, dt, steps, sub, n)?
                    .samples
                    .into_iter()
                    .map(|s| EngineRow {
                        t: s.t,
                        populations: s.populations,
                        norm: s.norm,
                        max_offdiag: None,
                        rank1_defect: None,
                    })
                    .collect()
            }
        };
        let (max_gap, compared) = population_gap(&tr.samples, &rows);
        runs.push(EngineRun {
            engine,
            rows,
            max_gap,
            compared,
        });
    }
    Ok(runs)
}

/// Largest population difference at sample times present in both series.
fn population_gap(spectral: &[Sample], rows: &[EngineRow]) -> (f64, usize) {
    let mut gap = 0.0f64;
    let mut compared = 0;
    let mut j = 0;
    for s in spectral {
        while j < rows.len() && rows[j].t < s.t - 1e-9 * s.t.max(1.0) {
            j += 1;
        }
        if j < rows.len() && (rows[j].t - s.t).abs() <= 1e-9 * s.t.max(1.0) {
            compared += 1;
            for (a, b) in s.populations.iter().zip(&rows[j].populations) {
                gap = gap.max((a - b).abs());
            }
        }
    }
    (gap, compared)
}

fn evaluate_checks(scenario: &Scenario, tr: &Trajectory, watch: &Watch, engines: &[EngineRun]) -> Vec<CheckOutcome> {
    let c = &scenario.checks;
    let mut out = Vec::new();
    let mut push = |name: String, passed: bool, detail: String| out.push(CheckOutcome { name, passed, detail });

    push(
        "norm_drift".into(),
        tr.stats.max_norm_drift < c.norm_drift,
        format!("max |trace - 1| = {:e}, tolerance {:e}", tr.stats.max_norm_drift, c.norm_drift),
    );
    if let Some(ok) = c.expects(tr.verdict) {
        let want = match (c.verdict, c.final_mode) {
            (Some(v), Some(k)) => format!("{v:?}({k})"),
            (Some(v), None) => format!("{v:?}"),
            _ => unreachable!("expects returned Some"),
        };
        push("verdict".into(), ok, format!("got {}, expected {want}", tr.verdict));
    }
    if let Some(tol) = c.frozen_populations {
        push(
            "frozen_populations".into(),
            watch.max_change < tol,
            format!("max |P_nn(t) - P_nn(0)| = {:e}, tolerance {tol:e}", watch.max_change),
        );
    }
    for (check, first) in c.population.iter().zip(&watch.first_above) {
        let name = format!("population P_{0}{0} > {1} by t = {2}", check.mode, check.above, check.by);
        let (ok, detail) = match first {
            Some(t) => (*t <= check.by, format!("first exceeded at t = {t}")),
            None => {
                let peak = tr.stats.peak_populations[check.mode - 1];
                (false, format!("never exceeded; peak {} at t = {}", peak.0, peak.1))
            }
        };
        push(name, ok, detail);
    }
    if let Some(o) = &c.occupied {
        let count = tr.last_sample().populations.iter().filter(|&&v| v > o.threshold).count();
        push(
            format!("occupied >= {} above {}", o.count, o.threshold),
            count >= o.count,
            format!("{count} final populations above threshold"),
        );
    }
    for (engine, tol) in [(Engine::Amplitude, c.amplitude_gap), (Engine::Grid, c.grid_gap)] {
        let Some(tol) = tol else { continue };
        match engines.iter().find(|e| e.engine == engine) {
            Some(run) => push(
                format!("{}_gap", engine.label()),
                run.compared > 0 && run.max_gap < tol,
                format!("max population gap {:e} over {} shared samples, tolerance {tol:e}", run.max_gap, run.compared),
            ),
            None => push(format!("{}_gap", engine.label()), false, "engine not run".into()),
        }
    }
    out
}

fn write_trajectory_csv(path: &Path, n: usize, report: &RunReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string(), "engine".to_string()];
    header.extend((1..=n).map(|a| format!("P_{a}{a}")));
    header.extend(["norm", "max_offdiag", "rank1_defect"].map(String::from));
    w.write_record(&header)?;

    let fmt = |v: f64| format!("{v:.16e}");
    let mut write_row = |engine: &str, row: &EngineRow| -> Result<()> {
        let mut rec = vec![fmt(row.t), engine.to_string()];
        rec.extend(row.populations.iter().map(|&v| fmt(v)));
        rec.push(fmt(row.norm));
        rec.push(row.max_offdiag.map(fmt).unwrap_or_default());
        rec.push(row.rank1_defect.map(fmt).unwrap_or_default());
        w.write_record(&rec)?;
        Ok(())
    };
    for s in &report.samples {
        write_row("spectral", &EngineRow::from(s))?;
    }
    for run in &report.engines {
        for row in &run.rows {
            write_row(run.engine.label(), row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn summary_text(scenario: &Scenario, resolved: &Resolved, report: &RunReport) -> String {
    let cfg = &resolved.solver;
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", scenario.name);
    if !scenario.description.is_empty() {
        let _ = writeln!(s, "description: {}", scenario.description);
    }
    let _ = writeln!(
        s,
        "parameters: N = {}, alpha = {}, beta = {}, h = {:e}, t_max = {}, method = {:?}",
        resolved.basis.n_modes(),
        resolved.basis.alpha(),
        cfg.beta,
        cfg.h,
        cfg.t_max,
        cfg.method
    );
    match (&report.trajectory, &report.abort) {
        (Some(tr), _) => {
            let _ = writeln!(s, "status: completed");
            let _ = writeln!(s, "verdict: {}", tr.verdict);
            match tr.convergence_time {
                Some(t) => {
                    let _ = writeln!(s, "convergence_time: {t}");
                }
                None => {
                    let _ = writeln!(s, "convergence_time: none");
                }
            }
            let _ = writeln!(s, "final_time: {}", tr.last_sample().t);
            let _ = writeln!(s, "steps: {}", tr.stats.steps);
            let _ = writeln!(s, "max_norm_drift: {:e}", tr.stats.max_norm_drift);
            let _ = writeln!(s, "max_hermiticity_defect: {:e}", tr.stats.max_hermiticity_defect);
            let _ = writeln!(s, "max_solve_residual: {:e}", tr.stats.max_residual);
            let _ = writeln!(s, "max_rank1_defect: {:e}", tr.stats.max_rank1_defect);
            let _ = writeln!(s, "refinements: {}", tr.stats.refinements);
            let _ = writeln!(s, "final_populations:");
            for (a, v) in tr.last_sample().populations.iter().enumerate() {
                let _ = writeln!(s, "  P_{0}{0} = {v:.16e}", a + 1);
            }
            let _ = writeln!(s, "peak_populations:");
            for (a, (v, t)) in tr.stats.peak_populations.iter().enumerate() {
                let _ = writeln!(s, "  P_{0}{0} peak {v:.16e} at t = {t}", a + 1);
            }
        }
        (None, Some(err)) => {
            let _ = writeln!(s, "status: aborted");
            let _ = writeln!(s, "error: {err}");
            if let Some(last) = report.samples.last() {
                let _ = writeln!(s, "last_good_time: {}", last.t);
                let _ = writeln!(s, "last_good_populations:");
                for (a, v) in last.populations.iter().enumerate() {
                    let _ = writeln!(s, "  P_{0}{0} = {v:.16e}", a + 1);
                }
            }
        }
        (None, None) => unreachable!("a run either completes or aborts"),
    }
    for run in &report.engines {
        let _ = writeln!(
            s,
            "engine {}: {} samples, max population gap to spectral {:e} over {} shared times",
            run.engine.label(),
            run.rows.len(),
            run.max_gap,
            run.compared
        );
    }
    if !report.checks.is_empty() {
        let _ = writeln!(s, "checks:");
        for c in &report.checks {
            let _ = writeln!(s, "  [{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    if !report.warnings.is_empty() {
        let _ = writeln!(s, "warnings:");
        for w in &report.warnings {
            let _ = writeln!(s, "  {w}");
        }
    }
    let _ = writeln!(s, "wall_time_s: {:.3}", report.elapsed_s);
    s
}
