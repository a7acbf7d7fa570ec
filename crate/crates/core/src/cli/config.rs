//! Scenario files: one TOML document per experiment.
//!
//! ```toml
//! name = "figure5a"
//! runtime_budget_s = 60
//! engines = ["spectral"]          # spectral, amplitude, grid
//!
//! [basis]
//! n_modes = 10
//! alpha = 0.5
//!
//! [model]
//! beta = 0.0001
//!
//! [initial]
//! kind = "eigenstate"             # uniform-first, decreasing, two-mode, three-mode, pulse, random, eigenstate
//! mode = 3
//! seed = 0
//!
//! [potential]                     # optional
//! kind = "resonant"               # constant, family, resonant
//! j = 2
//! k = 3
//!
//! [solver]
//! h = 1e-4
//! t_max = 5.0
//!
//! [[checks.population]]
//! mode = 2
//! above = 0.99
//! by = 3.5
//! ```

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::{SpectralBasis, DEFAULT_MAX_MODES};
use crate::dynamics::{initial_amplitudes, InitialKind, SolveMethod, SolverConfig, Verdict, DEFAULT_PAD};
use crate::error::{Error, Result};
use crate::potentials::{random_gammas, resonant_drive, PotentialSpec, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Spectral,
    Amplitude,
    Grid,
}

impl Engine {
    pub fn label(self) -> &'static str {
        match self {
            Engine::Spectral => "spectral",
            Engine::Amplitude => "amplitude",
            Engine::Grid => "grid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Expected upper bound on wall-clock seconds for `run`.
    pub runtime_budget_s: Option<f64>,
    #[serde(default = "default_engines")]
    pub engines: Vec<Engine>,
    pub basis: BasisSection,
    pub model: ModelSection,
    pub initial: InitialSection,
    pub potential: Option<PotentialSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_engines() -> Vec<Engine> {
    vec![Engine::Spectral]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    pub n_modes: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub max_modes: Option<usize>,
}

fn default_alpha() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialShape {
    UniformFirst,
    Decreasing,
    TwoMode,
    ThreeMode,
    Pulse,
    Random,
    Eigenstate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialShape,
    #[serde(default)]
    pub seed: u64,
    /// Empty top modes for the decreasing, pulse and random shapes.
    pub pad: Option<usize>,
    /// `uniform-first`: number of leading modes.
    pub count: Option<usize>,
    /// `two-mode` / `three-mode`.
    pub modes: Option<Vec<usize>>,
    /// `pulse`.
    pub center: Option<usize>,
    pub width: Option<f64>,
    /// `eigenstate`.
    pub mode: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    /// `V_n(t) = gamma_n`.
    Constant,
    /// The full `gamma_n t^mu w(omega t + phi0) exp(-lambda t)` family.
    Family,
    /// Cosine at `|E_k - E_j|` with equal amplitudes.
    Resonant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub kind: PotentialKind,
    /// Explicit amplitudes; drawn uniformly from `[-1, 1]` with `gamma_seed`
    /// when absent (constant and family kinds).
    pub gammas: Option<Vec<f64>>,
    /// Multiplies every amplitude.
    #[serde(default = "one")]
    pub gamma_scale: f64,
    #[serde(default)]
    pub gamma_seed: u64,
    pub mu: Option<f64>,
    /// For `resonant`, overrides the Bohr frequency (detuned drive).
    pub omega: Option<f64>,
    pub phi0: Option<f64>,
    pub lambda: Option<f64>,
    pub waveform: Option<Waveform>,
    pub j: Option<usize>,
    pub k: Option<usize>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub h: Option<f64>,
    pub t_max: Option<f64>,
    pub sample_stride: Option<usize>,
    pub conv_eps: Option<f64>,
    pub conv_window: Option<f64>,
    pub norm_tol: Option<f64>,
    pub solve_residual_tol: Option<f64>,
    pub method: Option<SolveMethod>,
    pub stop_on_verdict: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_points")]
    pub points: usize,
    /// Horizon of the grid co-run; defaults to the spectral horizon.
    pub t_max: Option<f64>,
    /// Fraction of the stability bound used for the automatic step.
    #[serde(default = "default_safety")]
    pub safety: f64,
}

fn default_points() -> usize {
    201
}

fn default_safety() -> f64 {
    0.9
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            points: default_points(),
            t_max: None,
            safety: default_safety(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpectedVerdict {
    ConvergedToEigenstate,
    StationarySuperposition,
    NoConvergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationCheck {
    pub mode: usize,
    pub above: f64,
    pub by: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupiedCheck {
    pub count: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    pub verdict: Option<ExpectedVerdict>,
    /// One-based mode expected with `converged-to-eigenstate`.
    pub final_mode: Option<usize>,
    #[serde(default = "default_norm_drift")]
    pub norm_drift: f64,
    /// Largest allowed change of any population over the run.
    pub frozen_populations: Option<f64>,
    #[serde(default)]
    pub population: Vec<PopulationCheck>,
    /// At least `count` final populations above `threshold`.
    pub occupied: Option<OccupiedCheck>,
    /// Largest allowed population gap between the spectral run and a co-run engine.
    pub amplitude_gap: Option<f64>,
    pub grid_gap: Option<f64>,
}

fn default_norm_drift() -> f64 {
    1e-8
}

impl Default for ChecksSection {
    fn default() -> Self {
        Self {
            verdict: None,
            final_mode: None,
            norm_drift: default_norm_drift(),
            frozen_populations: None,
            population: Vec::new(),
            occupied: None,
            amplitude_gap: None,
            grid_gap: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Also dump the full state at every sample to `<name>_state.bin`.
    #[serde(default)]
    pub checkpoint: bool,
}

/// A scenario with every derived object built and checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub basis: SpectralBasis,
    pub potential: Option<PotentialSpec>,
    pub initial: InitialKind,
    pub pad: usize,
    pub solver: SolverConfig,
}

impl Resolved {
    pub fn initial_amplitudes(&self) -> Result<Vec<num_complex::Complex64>> {
        initial_amplitudes(&self.initial, self.basis.n_modes(), self.solver.rng_seed, self.pad)
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.message().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "<document>".to_string() } else { path };
            Error::config(path, e.into_inner().message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenarios always serialize")
    }

    /// Builds the basis, potential, initial shape and solver settings, reporting
    /// the first invalid field by path.
    pub fn resolve(&self) -> Result<Resolved> {
        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::config("name", "must be a non-empty file-name-safe string"));
        }
        if self.engines.is_empty() {
            return Err(Error::config("engines", "at least one engine is required"));
        }
        if !self.engines.contains(&Engine::Spectral) {
            return Err(Error::config("engines", "the spectral engine is always run and must be listed"));
        }
        if let Some(b) = self.runtime_budget_s {
            if !(b > 0.0) {
                return Err(Error::config("runtime_budget_s", "must be positive"));
            }
        }
        let basis = SpectralBasis::with_cap(self.basis.n_modes, self.basis.alpha, self.basis.max_modes.unwrap_or(DEFAULT_MAX_MODES))?;
        let n = basis.n_modes();

        let d = SolverConfig::default();
        let s = &self.solver;
        let solver = SolverConfig {
            h: s.h.unwrap_or(d.h),
            t_max: s.t_max.unwrap_or(d.t_max),
            beta: self.model.beta,
            sample_stride: s.sample_stride.unwrap_or(d.sample_stride),
            conv_eps: s.conv_eps.unwrap_or(d.conv_eps),
            conv_window: s.conv_window.unwrap_or(d.conv_window),
            norm_tol: s.norm_tol.unwrap_or(d.norm_tol),
            solve_residual_tol: s.solve_residual_tol.unwrap_or(d.solve_residual_tol),
            rng_seed: self.initial.seed,
            method: s.method.unwrap_or(d.method),
            stop_on_verdict: s.stop_on_verdict.unwrap_or(d.stop_on_verdict),
        };
        solver.validate()?;

        let initial = self.initial.kind()?;
        let pad = self.initial.pad.unwrap_or(DEFAULT_PAD);
        // Surfaces index errors now rather than at run time.
        initial_amplitudes(&initial, n, solver.rng_seed, pad)?;

        let potential = self.potential.as_ref().map(|p| p.resolve(&basis)).transpose()?;

        if self.engines.contains(&Engine::Grid) {
            if self.grid.points < 3 {
                return Err(Error::config("grid.points", "need at least 3 points"));
            }
            if !(self.grid.safety > 0.0 && self.grid.safety <= 1.0) {
                return Err(Error::config("grid.safety", "must lie in (0, 1]"));
            }
            if solver.beta < 0.0 {
                return Err(Error::config("engines", "the grid engine is ill-posed for beta < 0"));
            }
        }
        self.checks.validate(n)?;
        for (path, set, engine) in [
            ("checks.amplitude_gap", self.checks.amplitude_gap.is_some(), Engine::Amplitude),
            ("checks.grid_gap", self.checks.grid_gap.is_some(), Engine::Grid),
        ] {
            if set && !self.engines.contains(&engine) {
                return Err(Error::config(path, format!("needs the {} engine", engine.label())));
            }
        }
        Ok(Resolved {
            basis,
            potential,
            initial,
            pad,
            solver,
        })
    }
}

impl InitialSection {
    fn kind(&self) -> Result<InitialKind> {
        let need = |v: Option<usize>, field: &str| {
            v.ok_or_else(|| Error::config(format!("initial.{field}"), format!("required for kind {:?}", self.kind)))
        };
        let modes = |len: usize| -> Result<Vec<usize>> {
            let m = self
                .modes
                .clone()
                .ok_or_else(|| Error::config("initial.modes", format!("required for kind {:?}", self.kind)))?;
            if m.len() != len {
                return Err(Error::config("initial.modes", format!("expected {len} modes, got {}", m.len())));
            }
            Ok(m)
        };
        Ok(match self.kind {
            InitialShape::UniformFirst => InitialKind::UniformFirst {
                count: need(self.count, "count")?,
            },
            InitialShape::Decreasing => InitialKind::Decreasing,
            InitialShape::TwoMode => {
                let m = modes(2)?;
                InitialKind::TwoMode { modes: [m[0], m[1]] }
            }
            InitialShape::ThreeMode => {
                let m = modes(3)?;
                InitialKind::ThreeMode {
                    modes: [m[0], m[1], m[2]],
                }
            }
            InitialShape::Pulse => InitialKind::Pulse {
                center: need(self.center, "center")?,
                width: self.width.unwrap_or(1.0),
            },
            InitialShape::Random => InitialKind::Random,
            InitialShape::Eigenstate => InitialKind::Eigenstate {
                mode: need(self.mode, "mode")?,
            },
        })
    }
}

impl PotentialSection {
    pub fn resolve(&self, basis: &SpectralBasis) -> Result<PotentialSpec> {
        let n = basis.n_modes();
        if !self.gamma_scale.is_finite() {
            return Err(Error::config("potential.gamma_scale", "must be finite"));
        }
        let gammas = || -> Result<Vec<f64>> {
            match &self.gammas {
                Some(g) if g.len() != n => Err(Error::config(
                    "potential.gammas",
                    format!("expected {n} amplitudes, got {}", g.len()),
                )),
                Some(g) => Ok(g.iter().map(|v| v * self.gamma_scale).collect()),
                None => Ok(random_gammas(n, self.gamma_scale, self.gamma_seed)),
            }
        };
        let forbid = |field: &str, set: bool| {
            if set {
                Err(Error::config(format!("potential.{field}"), format!("not used by kind {:?}", self.kind)))
            } else {
                Ok(())
            }
        };
        let spec = match self.kind {
            PotentialKind::Constant => {
                forbid("mu", self.mu.is_some())?;
                forbid("omega", self.omega.is_some())?;
                forbid("phi0", self.phi0.is_some())?;
                forbid("lambda", self.lambda.is_some())?;
                forbid("waveform", self.waveform.is_some())?;
                forbid("j", self.j.is_some())?;
                forbid("k", self.k.is_some())?;
                PotentialSpec::constant(gammas()?)
            }
            PotentialKind::Family => {
                forbid("j", self.j.is_some())?;
                forbid("k", self.k.is_some())?;
                PotentialSpec::new(
                    gammas()?,
                    self.mu.unwrap_or(0.0),
                    self.omega.unwrap_or(0.0),
                    self.phi0.unwrap_or(FRAC_PI_2),
                    self.lambda.unwrap_or(0.0),
                    self.waveform.unwrap_or(Waveform::Sine),
                )?
            }
            PotentialKind::Resonant => {
                forbid("gammas", self.gammas.is_some())?;
                forbid("mu", self.mu.is_some())?;
                forbid("phi0", self.phi0.is_some())?;
                forbid("lambda", self.lambda.is_some())?;
                forbid("waveform", self.waveform.is_some())?;
                let j = self.j.ok_or_else(|| Error::config("potential.j", "required for kind Resonant"))?;
                let k = self.k.ok_or_else(|| Error::config("potential.k", "required for kind Resonant"))?;
                let mut spec = resonant_drive(basis, j, k, self.gamma_scale)?;
                if let Some(omega) = self.omega {
                    spec.omega = omega;
                    spec.validate()?;
                }
                spec
            }
        };
        Ok(spec)
    }
}

impl ChecksSection {
    fn validate(&self, n: usize) -> Result<()> {
        if !(self.norm_drift > 0.0) {
            return Err(Error::config("checks.norm_drift", "must be positive"));
        }
        match (self.verdict, self.final_mode) {
            (Some(ExpectedVerdict::ConvergedToEigenstate), _) | (_, None) => {}
            _ => {
                return Err(Error::config(
                    "checks.final_mode",
                    "only meaningful with verdict = \"converged-to-eigenstate\"",
                ))
            }
        }
        if let Some(k) = self.final_mode {
            if k == 0 || k > n {
                return Err(Error::config("checks.final_mode", format!("mode {k} outside 1..={n}")));
            }
        }
        for (i, p) in self.population.iter().enumerate() {
            if p.mode == 0 || p.mode > n {
                return Err(Error::config(format!("checks.population[{i}].mode"), format!("mode {} outside 1..={n}", p.mode)));
            }
        }
        if let Some(o) = &self.occupied {
            if o.count == 0 || o.count > n {
                return Err(Error::config("checks.occupied.count", format!("must lie in 1..={n}")));
            }
        }
        Ok(())
    }

    pub fn expects(&self, verdict: Verdict) -> Option<bool> {
        let expected = self.verdict?;
        Some(match (expected, verdict) {
            (ExpectedVerdict::ConvergedToEigenstate, Verdict::ConvergedToEigenstate(k)) => {
                self.final_mode.is_none_or(|want| want == k)
            }
            (ExpectedVerdict::StationarySuperposition, Verdict::StationarySuperposition) => true,
            (ExpectedVerdict::NoConvergence, Verdict::NoConvergence) => true,
            _ => false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
[basis]
n_modes = 10
[model]
beta = 1.0
[initial]
kind = "two-mode"
modes = [1, 2]
"#;

    #[test]
    fn minimal_scenario_uses_defaults() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        let r = s.resolve().unwrap();
        assert_eq!(r.basis.alpha(), 0.5);
        assert_eq!(r.solver.h, 1e-4);
        assert_eq!(r.solver.t_max, 200.0);
        assert_eq!(r.initial, InitialKind::TwoMode { modes: [1, 2] });
        assert!(r.potential.is_none());
        assert_eq!(s.engines, vec![Engine::Spectral]);
        assert_eq!(s.checks.norm_drift, 1e-8);
    }

    #[test]
    fn round_trips_through_toml() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(Scenario::from_toml_str(&s.to_toml_string()).unwrap(), s);
    }

    fn err_path(text: &str) -> String {
        let e = Scenario::from_toml_str(text).and_then(|s| s.resolve().map(|_| ()));
        match e {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_field_paths() {
        assert_eq!(err_path(&MINIMAL.replace("beta = 1.0", "beta = \"x\"")), "model.beta");
        assert_eq!(err_path(&MINIMAL.replace("n_modes = 10", "n_modes = 10\nfoo = 1")), "basis.foo");
        assert_eq!(err_path(&MINIMAL.replace("modes = [1, 2]", "modes = [1, 12]")), "initial.modes");
        assert_eq!(err_path(&MINIMAL.replace("modes = [1, 2]", "")), "initial.modes");
        assert_eq!(err_path(&MINIMAL.replace("n_modes = 10", "n_modes = 0")), "basis.n_modes");
        assert_eq!(err_path(&format!("{MINIMAL}[solver]\nh = -1.0\n")), "solver.h");
        assert_eq!(
            err_path(&format!("{MINIMAL}[potential]\nkind = \"resonant\"\nj = 2\nk = 2\n")),
            "potential.resonant_modes"
        );
        assert_eq!(
            err_path(&format!("{MINIMAL}[potential]\nkind = \"constant\"\ngammas = [1.0]\n")),
            "potential.gammas"
        );
        assert_eq!(
            err_path(&format!("{MINIMAL}[potential]\nkind = \"constant\"\nomega = 1.0\n")),
            "potential.omega"
        );
        assert_eq!(err_path(&format!("{MINIMAL}[[checks.population]]\nmode = 11\nabove = 0.5\nby = 1.0\n")), "checks.population[0].mode");
        assert_eq!(err_path(&MINIMAL.replace("name = \"t\"", "name = \"t\"\nengines = []")), "engines");
    }

    #[test]
    fn potential_kinds_resolve() {
        let basis = SpectralBasis::new(4, 0.5).unwrap();
        let section = |kind| PotentialSection {
            kind,
            gammas: None,
            gamma_scale: 0.5,
            gamma_seed: 3,
            mu: None,
            omega: None,
            phi0: None,
            lambda: None,
            waveform: None,
            j: None,
            k: None,
        };
        let c = section(PotentialKind::Constant).resolve(&basis).unwrap();
        assert_eq!(c.gammas, random_gammas(4, 0.5, 3));
        assert_eq!(c.coefficient(2, 7.0).unwrap(), c.gammas[1]);

        let mut r = section(PotentialKind::Resonant);
        r.j = Some(2);
        r.k = Some(3);
        let spec = r.resolve(&basis).unwrap();
        assert_eq!(spec.gammas, vec![0.5; 4]);
        assert_eq!(spec.omega, basis.energy(2) - basis.energy(1));
        r.omega = Some(20.0);
        assert_eq!(r.resolve(&basis).unwrap().omega, 20.0);

        let mut f = section(PotentialKind::Family);
        f.gammas = Some(vec![1.0, 2.0, 3.0, 4.0]);
        f.lambda = Some(0.5);
        let spec = f.resolve(&basis).unwrap();
        assert_eq!(spec.gammas, vec![0.5, 1.0, 1.5, 2.0]);
        assert_eq!(spec.phi0, FRAC_PI_2);
    }

    #[test]
    fn verdict_expectations() {
        let mut c = ChecksSection {
            verdict: Some(ExpectedVerdict::ConvergedToEigenstate),
            ..ChecksSection::default()
        };
        assert_eq!(c.expects(Verdict::ConvergedToEigenstate(2)), Some(true));
        c.final_mode = Some(1);
        assert_eq!(c.expects(Verdict::ConvergedToEigenstate(2)), Some(false));
        assert_eq!(c.expects(Verdict::NoConvergence), Some(false));
        assert_eq!(ChecksSection::default().expects(Verdict::NoConvergence), None);
    }
}
