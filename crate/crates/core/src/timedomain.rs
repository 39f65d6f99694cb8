//! Forced evolution `i φ_t = H_V φ + ε cos(μt) β φ` on a large domain with
//! complex absorbing layers, used to check predicted lifetimes directly.
//!
//! Time stepping is the trapezoidal (Crank–Nicolson) rule with the forcing
//! frozen at the midpoint of each step; every step is one complex tridiagonal
//! solve.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PdpError, Result};
use crate::grid::{Grid, PotentialField};
use crate::linalg::solve_tridiagonal;
use crate::spectral::{solve_ground_state, BoundState};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Quartic complex absorbing potential `-iσ(x)` next to both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Absorber {
    pub width: f64,
    pub strength: f64,
}

impl Absorber {
    pub const OFF: Absorber = Absorber { width: 0.0, strength: 0.0 };

    /// `σ(x) = strength · ((|x| - (L - width)) / width)⁴` inside the layer.
    pub fn sigma(&self, grid: &Grid) -> Vec<f64> {
        if self.width <= 0.0 || self.strength == 0.0 {
            return vec![0.0; grid.len()];
        }
        let inner = grid.x_max().min(-grid.x_min()) - self.width;
        grid.nodes()
            .iter()
            .map(|x| {
                let d = x.abs() - inner;
                if d > 0.0 { self.strength * (d / self.width).powi(4) } else { 0.0 }
            })
            .collect()
    }

    /// Half-width of the absorber-free interior.
    pub fn interior(&self, grid: &Grid) -> f64 {
        grid.x_max().min(-grid.x_min()) - self.width.max(0.0)
    }
}

/// Settings of one propagation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub grid: Grid,
    pub epsilon: f64,
    pub mu: f64,
    pub t_final: f64,
    pub dt_max: f64,
    pub absorber: Absorber,
    /// Record every this many steps (the first and last step are always recorded).
    pub record_every: usize,
    /// Times at which `|φ|²` is stored.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

impl SimConfig {
    /// Domain `[-60, 60]` with 6001 nodes and absorbing layers of width 20.
    pub fn standard(epsilon: f64, mu: f64, t_final: f64) -> Self {
        SimConfig {
            grid: Grid::symmetric(60.0, 6001).expect("static grid"),
            epsilon,
            mu,
            t_final,
            dt_max: 0.01,
            absorber: Absorber { width: 20.0, strength: 2.0 },
            record_every: 10,
            snapshot_times: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PdpError::InvalidParameter(m));
        if !(self.t_final > 0.0) || !(self.dt_max > 0.0) {
            return bad("t_final and dt_max must be positive".into());
        }
        if !self.epsilon.is_finite() || !(self.mu > 0.0) {
            return bad("epsilon must be finite and mu positive".into());
        }
        if self.absorber.width < 0.0 || self.absorber.strength < 0.0 {
            return bad("absorber width and strength must be non-negative".into());
        }
        if self.absorber.interior(&self.grid) <= 0.0 {
            return bad("absorber covers the whole domain".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be positive".into());
        }
        Ok(())
    }

    fn steps(&self) -> (usize, f64) {
        let n = (self.t_final / self.dt_max).ceil().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }
}

/// `|φ(t)|²` at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub times: Vec<f64>,
    /// `|⟨ψ, φ(t)⟩|²`
    pub projection_sq: Vec<f64>,
    /// `‖φ(t)‖` over the absorber-free interior.
    pub norm: Vec<f64>,
    /// Decay rate fitted over the second half of the run, if the data allow it.
    pub fitted_rate: Option<f64>,
    pub snapshots: Vec<Snapshot>,
    pub lambda: f64,
}

impl SimResult {
    pub fn final_projection_sq(&self) -> f64 {
        *self.projection_sq.last().unwrap_or(&f64::NAN)
    }

    /// Final over initial projection.
    pub fn retained(&self) -> f64 {
        self.final_projection_sq() / self.projection_sq[0]
    }
}

fn check_same_grid(a: &PotentialField, grid: &Grid, what: &str) -> Result<()> {
    if a.grid().same_nodes(grid) {
        Ok(())
    } else {
        Err(PdpError::InvalidGrid(format!("{what} is not sampled on the simulation grid")))
    }
}

/// Integrates from `phi0` and records the projection on the ground state of `v`.
pub fn propagate(v: &PotentialField, beta: &PotentialField, phi0: &[Complex64], cfg: &SimConfig) -> Result<SimResult> {
    let bs = solve_ground_state(v)?;
    propagate_with_state(v, beta, phi0, cfg, &bs)
}

pub fn propagate_with_state(
    v: &PotentialField,
    beta: &PotentialField,
    phi0: &[Complex64],
    cfg: &SimConfig,
    bs: &BoundState,
) -> Result<SimResult> {
    cfg.validate()?;
    let grid = cfg.grid;
    check_same_grid(v, &grid, "V")?;
    check_same_grid(beta, &grid, "beta")?;
    let n = grid.len();
    if phi0.len() != n {
        return Err(PdpError::LengthMismatch { expected: n, got: phi0.len() });
    }
    let interior = cfg.absorber.interior(&grid);
    if v.support() >= interior || beta.support() >= interior {
        return Err(PdpError::InvalidParameter("absorber overlaps the support of V or beta".into()));
    }
    let vmax = v.values().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if cfg.dt_max * cfg.mu.max(vmax).max(bs.lambda.abs()) >= 0.5 {
        return Err(PdpError::InvalidParameter(format!("dt_max = {} does not resolve the dynamics", cfg.dt_max)));
    }

    let h = grid.h();
    let inv_h2 = 1.0 / (h * h);
    let sigma = cfg.absorber.sigma(&grid);
    let weights = grid.weights();
    let interior_mask: Vec<bool> = grid.nodes().iter().map(|x| x.abs() <= interior).collect();
    let psi = &bs.psi;
    let observe = |phi: &[Complex64]| -> (f64, f64) {
        let proj: Complex64 = (0..n).map(|j| phi[j] * (weights[j] * psi[j])).sum();
        let norm_sq: f64 = (0..n).filter(|&j| interior_mask[j]).map(|j| weights[j] * phi[j].norm_sqr()).sum();
        (proj.norm_sqr(), norm_sq.sqrt())
    };

    let (steps, dt) = cfg.steps();
    let mut phi = phi0.to_vec();
    let mut times = Vec::with_capacity(steps / cfg.record_every + 2);
    let mut projection_sq = Vec::with_capacity(times.capacity());
    let mut norms = Vec::with_capacity(times.capacity());
    let (p, nm) = observe(&phi);
    times.push(0.0);
    projection_sq.push(p);
    norms.push(nm);

    let mut snapshot_steps: Vec<(usize, f64)> = cfg
        .snapshot_times
        .iter()
        .filter(|t| (0.0..=cfg.t_final).contains(*t))
        .map(|&t| (((t / dt).round() as usize).min(steps), t))
        .collect();
    snapshot_steps.sort_by_key(|s| s.0);
    let mut snapshots = Vec::new();
    let take_snapshots = |step: usize, phi: &[Complex64], out: &mut Vec<Snapshot>| {
        for &(s, _) in snapshot_steps.iter().filter(|(s, _)| *s == step) {
            out.push(Snapshot { t: s as f64 * dt, density: phi.iter().map(|z| z.norm_sqr()).collect() });
        }
    };
    take_snapshots(0, &phi, &mut snapshots);

    let half = 0.5 * dt;
    let off = I * (-half * inv_h2);
    let vals = v.values();
    let bvals = beta.values();
    for step in 1..=steps {
        let t_mid = (step as f64 - 0.5) * dt;
        let force = cfg.epsilon * (cfg.mu * t_mid).cos();
        // K_j = 2/h² + V_j + force β_j - iσ_j; solve (1 + i dt/2 K) φ⁺ = (1 - i dt/2 K) φ
        let k_diag: Vec<Complex64> =
            (0..n).map(|j| Complex64::new(2.0 * inv_h2 + vals[j] + force * bvals[j], -sigma[j])).collect();
        let rhs: Vec<Complex64> = (0..n)
            .map(|j| {
                let left = if j > 0 { phi[j - 1] } else { Complex64::new(0.0, 0.0) };
                let right = if j + 1 < n { phi[j + 1] } else { Complex64::new(0.0, 0.0) };
                let k_phi = k_diag[j] * phi[j] - (left + right) * inv_h2;
                phi[j] - I * half * k_phi
            })
            .collect();
        let diag: Vec<Complex64> = k_diag.iter().map(|k| Complex64::new(1.0, 0.0) + I * half * k).collect();
        phi = solve_tridiagonal(vec![off; n - 1], diag, vec![off; n - 1], rhs)?;
        if step % cfg.record_every == 0 || step == steps {
            let (p, nm) = observe(&phi);
            if !(p.is_finite() && nm.is_finite()) {
                return Err(PdpError::NumericalBlowup(format!("non-finite field at t = {}", step as f64 * dt)));
            }
            times.push(step as f64 * dt);
            projection_sq.push(p);
            norms.push(nm);
        }
        take_snapshots(step, &phi, &mut snapshots);
    }

    let mut result =
        SimResult { times, projection_sq, norm: norms, fitted_rate: None, snapshots, lambda: bs.lambda };
    result.fitted_rate = fit_decay_rate(&result, (0.5 * cfg.t_final, cfg.t_final)).ok();
    Ok(result)
}

/// Least-squares decay rate `-d/dt log |⟨ψ, φ⟩|²` over the window `[t0, t1]`.
pub fn fit_decay_rate(result: &SimResult, window: (f64, f64)) -> Result<f64> {
    let (t0, t1) = window;
    let pts: Vec<(f64, f64)> = result
        .times
        .iter()
        .zip(&result.projection_sq)
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .map(|(t, p)| (*t, *p))
        .collect();
    if pts.len() < 2 {
        return Err(PdpError::FitFailed(format!("fewer than two samples in [{t0}, {t1}]")));
    }
    if pts.iter().any(|(_, p)| !(*p > 0.0)) {
        return Err(PdpError::FitFailed("non-positive projection in the fit window".into()));
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|(t, _)| t).sum::<f64>() / m;
    let lm = pts.iter().map(|(_, p)| p.ln()).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|(t, _)| (t - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(t, p)| (t - tm) * (p.ln() - lm)).sum();
    if sxx == 0.0 {
        return Err(PdpError::FitFailed("degenerate time window".into()));
    }
    Ok(-sxy / sxx)
}

/// Ground state plus seeded Gaussian noise on the support of `v`, scaled so
/// that `⟨ψ, φ₀⟩ = 1`.
pub fn noisy_initial_state(v: &PotentialField, bs: &BoundState, noise_amplitude: f64, seed: u64) -> Result<Vec<Complex64>> {
    let grid = v.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi: Vec<f64> = bs.psi.clone();
    for (j, p) in phi.iter_mut().enumerate() {
        if v.in_support(j) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *p += noise_amplitude * z;
        }
    }
    let overlap: f64 = (0..grid.len()).map(|j| grid.weight(j) * bs.psi[j] * phi[j]).sum();
    if overlap.abs() < 1e-12 {
        return Err(PdpError::InvalidParameter("noisy state is orthogonal to the bound state".into()));
    }
    Ok(phi.iter().map(|p| Complex64::new(p / overlap, 0.0)).collect())
}

/// Propagates `ψ + noise` (normalised to unit projection).
pub fn filter_experiment(
    v: &PotentialField,
    beta: &PotentialField,
    cfg: &SimConfig,
    noise_amplitude: f64,
    seed: u64,
) -> Result<SimResult> {
    let bs = solve_ground_state(v)?;
    let phi0 = noisy_initial_state(v, &bs, noise_amplitude, seed)?;
    propagate_with_state(v, beta, &phi0, cfg, &bs)
}
