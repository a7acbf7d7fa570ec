//! Finite-difference integration of the explicit form
//! `i psi_t = -alpha psi_xx + V psi + i alpha beta (conj(psi) psi_xx - psi conj(psi_xx)) psi`
//! on a uniform grid with `psi(0) = psi(1) = 0`.

use num_complex::Complex64;

use crate::basis::sine_mode;
use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Imaginary-axis stability limit of classical RK4.
pub const RK4_IMAGINARY_LIMIT: f64 = 2.8;

#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    values: Vec<Complex64>,
}

impl GridState {
    /// Samples `sum_n c_n phi_n(x_i)` on `m` points.
    pub fn from_amplitudes(c: &[Complex64], m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::config("grid.points", format!("need at least 3 points, got {m}")));
        }
        let dx = 1.0 / (m - 1) as f64;
        let mut values: Vec<Complex64> = (0..m)
            .map(|i| {
                let x = i as f64 * dx;
                c.iter().enumerate().map(|(a, ca)| ca * sine_mode(a + 1, x)).sum()
            })
            .collect();
        values[0] = ZERO;
        values[m - 1] = ZERO;
        Ok(Self { values })
    }

    pub fn from_values(values: Vec<Complex64>) -> Result<Self> {
        let m = values.len();
        if m < 3 {
            return Err(Error::config("grid.points", format!("need at least 3 points, got {m}")));
        }
        if values[0] != ZERO || values[m - 1] != ZERO {
            return Err(Error::Domain("boundary samples must be zero".into()));
        }
        Ok(Self { values })
    }

    pub fn grid_points(&self) -> usize {
        self.values.len()
    }

    pub fn dx(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `sum_i |psi_i|^2 dx`.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx()
    }

    /// `int psi phi_n dx` by the same rectangle rule as the norm.
    pub fn project(&self, n_modes: usize) -> Vec<Complex64> {
        let dx = self.dx();
        (1..=n_modes)
            .map(|n| {
                self.values
                    .iter()
                    .enumerate()
                    .map(|(i, z)| z * sine_mode(n, i as f64 * dx))
                    .sum::<Complex64>()
                    * dx
            })
            .collect()
    }

    pub fn populations(&self, n_modes: usize) -> Vec<f64> {
        self.project(n_modes).iter().map(|z| z.norm_sqr()).collect()
    }
}

/// `V(x_i, t) = envelope(t) * sum_n gamma_n phi_n(x_i)`, with the spatial
/// profile cached.
#[derive(Debug, Clone)]
pub struct GridPotential {
    spec: PotentialSpec,
    profile: Vec<f64>,
}

impl GridPotential {
    pub fn new(spec: &PotentialSpec, m: usize) -> Self {
        let dx = 1.0 / (m - 1) as f64;
        let profile = (0..m)
            .map(|i| {
                let x = i as f64 * dx;
                spec.gammas.iter().enumerate().map(|(a, g)| g * sine_mode(a + 1, x)).sum()
            })
            .collect();
        Self {
            spec: spec.clone(),
            profile,
        }
    }

    pub fn value(&self, i: usize, t: f64) -> f64 {
        self.profile[i] * self.spec.envelope(t)
    }
}

/// Largest RK4 step that keeps the discrete kinetic operator stable:
/// `2.8 dx^2 / (4 alpha)`.
pub fn max_stable_dt(m: usize, alpha: f64) -> f64 {
    let dx = 1.0 / (m - 1) as f64;
    RK4_IMAGINARY_LIMIT * dx * dx / (4.0 * alpha)
}

/// Step bound for `g` including the nonlinear term.
///
/// Linearizing about a locally real `psi = a` with `c = alpha k^2` gives
/// `u' = c v`, `v' = -c u - 2 beta a^2 c v`, eigenvalues
/// `c (-beta a^2 +- sqrt(beta^2 a^4 - 1))`. For `beta > 0` their modulus is
/// below `c (1 + 2 beta a^2)`. For `beta < 0` they have positive real part at
/// every wavenumber (backward diffusion), so the explicit form is ill-posed
/// and `None` is returned.
pub fn nonlinear_stable_dt(g: &GridState, alpha: f64, beta: f64) -> Option<f64> {
    let peak = g.values.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    if beta < 0.0 && peak > 0.0 {
        return None;
    }
    Some(max_stable_dt(g.grid_points(), alpha) / (1.0 + 2.0 * beta.max(0.0) * peak))
}

/// `d psi / dt` at every grid point; the endpoints stay zero.
pub fn grid_derivative(
    g: &GridState,
    t: f64,
    pot: Option<&GridPotential>,
    alpha: f64,
    beta: f64,
) -> Result<Vec<Complex64>> {
    let mut out = vec![ZERO; g.grid_points()];
    derivative_into(&g.values, t, pot, alpha, beta, &mut out);
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::StateCorruption { t });
    }
    Ok(out)
}

fn derivative_into(psi: &[Complex64], t: f64, pot: Option<&GridPotential>, alpha: f64, beta: f64, out: &mut [Complex64]) {
    let m = psi.len();
    let inv_dx2 = ((m - 1) * (m - 1)) as f64;
    out[0] = ZERO;
    out[m - 1] = ZERO;
    for i in 1..m - 1 {
        let lap = (psi[i + 1] - 2.0 * psi[i] + psi[i - 1]) * inv_dx2;
        let v = pot.map_or(0.0, |p| p.value(i, t));
        // conj(psi) lap - psi conj(lap) = 2i Im(conj(psi) lap)
        let nonlinear = -2.0 * alpha * beta * (psi[i].conj() * lap).im;
        let h_psi = -alpha * lap + (v + nonlinear) * psi[i];
        out[i] = Complex64::new(h_psi.im, -h_psi.re);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSample {
    pub t: f64,
    pub norm: f64,
    pub populations: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GridTrajectory {
    pub samples: Vec<GridSample>,
    pub final_state: GridState,
}

/// RK4 from `t = 0` for `steps` steps of `dt`, projecting onto the first
/// `n_modes` eigenfunctions every `stride` steps (and at the end).
#[allow(clippy::too_many_arguments)]
pub fn grid_evolve(
    g0: &GridState,
    pot: Option<&GridPotential>,
    alpha: f64,
    beta: f64,
    dt: f64,
    steps: usize,
    stride: usize,
    n_modes: usize,
) -> Result<GridTrajectory> {
    let m = g0.grid_points();
    let Some(limit) = nonlinear_stable_dt(g0, alpha, beta) else {
        return Err(Error::config("grid.beta", format!("beta = {beta} makes the explicit grid form ill-posed")));
    };
    if !(dt > 0.0) || dt > limit {
        return Err(Error::config(
            "grid.dt",
            format!("dt = {dt:e} outside (0, {limit:e}] for {m} points at alpha = {alpha}, beta = {beta}"),
        ));
    }
    if stride == 0 {
        return Err(Error::config("grid.stride", "must be >= 1"));
    }

    let sample = |t: f64, g: &GridState| GridSample {
        t,
        norm: g.norm(),
        populations: g.populations(n_modes),
    };
    let mut psi = g0.values.clone();
    let mut samples = vec![sample(0.0, g0)];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![ZERO; m], vec![ZERO; m], vec![ZERO; m], vec![ZERO; m]);
    let mut stage = vec![ZERO; m];
    for step in 0..steps {
        let t = step as f64 * dt;
        derivative_into(&psi, t, pot, alpha, beta, &mut k1);
        combine(&mut stage, &psi, &k1, 0.5 * dt);
        derivative_into(&stage, t + 0.5 * dt, pot, alpha, beta, &mut k2);
        combine(&mut stage, &psi, &k2, 0.5 * dt);
        derivative_into(&stage, t + 0.5 * dt, pot, alpha, beta, &mut k3);
        combine(&mut stage, &psi, &k3, dt);
        derivative_into(&stage, t + dt, pot, alpha, beta, &mut k4);
        for i in 0..m {
            psi[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
        }
        if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::StateCorruption { t: t + dt });
        }
        if (step + 1) % stride == 0 || step + 1 == steps {
            let g = GridState { values: psi.clone() };
            samples.push(sample((step + 1) as f64 * dt, &g));
        }
    }
    Ok(GridTrajectory {
        samples,
        final_state: GridState { values: psi },
    })
}

fn combine(out: &mut [Complex64], base: &[Complex64], dir: &[Complex64], s: f64) {
    for ((o, b), d) in out.iter_mut().zip(base).zip(dir) {
        *o = b + d * s;
    }
}
