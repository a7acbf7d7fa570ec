//! Parameter sweeps: one independent spectral run per axis value.

use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use super::config::Scenario;
use crate::dynamics::{evolve, initial_state_padded, Verdict};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Axis {
    Beta,
    Seed,
    Omega,
    GammaScale,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::Beta => "beta",
            Axis::Seed => "seed",
            Axis::Omega => "omega",
            Axis::GammaScale => "gamma-scale",
        }
    }

    /// Copy of `base` with this axis set to `value`.
    pub fn apply(self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = base.clone();
        match self {
            Axis::Beta => s.model.beta = value,
            Axis::Seed => {
                if value < 0.0 || value.fract() != 0.0 || value > u64::MAX as f64 {
                    return Err(Error::config("sweep.values", format!("seed {value} is not a non-negative integer")));
                }
                s.initial.seed = value as u64;
            }
            Axis::Omega | Axis::GammaScale => {
                let pot = s
                    .potential
                    .as_mut()
                    .ok_or_else(|| Error::config("potential", format!("sweeping {} needs a potential", self.label())))?;
                if self == Axis::Omega {
                    pot.omega = Some(value);
                } else {
                    pot.gamma_scale = value;
                }
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: &'static str,
    pub value: f64,
    /// `ok`, `config-error` or `aborted`.
    pub status: &'static str,
    pub verdict: Option<String>,
    /// One-based collapsed mode.
    pub final_k: Option<usize>,
    pub convergence_time: Option<f64>,
    pub final_time: Option<f64>,
    pub error: Option<String>,
}

fn run_one(base: &Scenario, axis: Axis, value: f64) -> SweepRow {
    let mut row = SweepRow {
        axis: axis.label(),
        value,
        status: "ok",
        verdict: None,
        final_k: None,
        convergence_time: None,
        final_time: None,
        error: None,
    };
    let outcome = axis.apply(base, value).and_then(|s| {
        let r = s.resolve()?;
        let p0 = initial_state_padded(&r.initial, r.basis.n_modes(), r.solver.rng_seed, r.pad)?;
        evolve(&p0, &r.basis, r.potential.as_ref(), &r.solver)
    });
    match outcome {
        Ok(tr) => {
            row.verdict = Some(tr.verdict.to_string());
            if let Verdict::ConvergedToEigenstate(k) = tr.verdict {
                row.final_k = Some(k);
            }
            row.convergence_time = tr.convergence_time;
            row.final_time = Some(tr.last_sample().t);
        }
        Err(e) => {
            row.status = if e.is_numerical() { "aborted" } else { "config-error" };
            if let Error::Aborted { last_good, .. } = &e {
                row.final_time = Some(last_good.t);
            }
            row.error = Some(e.to_string());
        }
    }
    info!("{} = {value}: {}", axis.label(), row.verdict.as_deref().unwrap_or(row.status));
    row
}

/// Runs every value on a pool of `workers` threads; rows come back in the
/// order of `values`.
pub fn sweep(base: &Scenario, axis: Axis, values: &[f64], workers: usize) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config("sweep.values", "at least one value is required"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::config("sweep.values", format!("non-finite value {v}")));
    }
    base.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("sweep.workers", e.to_string()))?;
    Ok(pool.install(|| values.par_iter().map(|&v| run_one(base, axis, v)).collect()))
}

pub fn write_sweep_csv(out_dir: &Path, name: &str, axis: Axis, rows: &[SweepRow]) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{name}_sweep_{}.csv", axis.label()));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["axis", "value", "status", "verdict", "final_k", "convergence_time", "final_time", "error"])?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.axis.to_string(),
            format!("{:.16e}", r.value),
            r.status.to_string(),
            r.verdict.clone().unwrap_or_default(),
            r.final_k.map(|k| k.to_string()).unwrap_or_default(),
            fmt(r.convergence_time),
            fmt(r.final_time),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}
